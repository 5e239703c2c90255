#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "geomdiff/conditioning.hpp"
#include "geomdiff/datasets.hpp"
#include "geomdiff/gp_oracle.hpp"
#include "geomdiff/likelihood.hpp"
#include "geomdiff/networks.hpp"
#include "geomdiff/samplers.hpp"
#include "geomdiff/symmetry.hpp"
#include "geomdiff/training.hpp"

namespace geomdiff::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("expected an integer list, got '" + s + "'");
    }
  }
  return out;
}

// Option registry: CLI flags first, then GEOMDIFF_* environment, then the config file.
class Section {
 public:
  explicit Section(CLI::App* app) : app_(app) {}

  template <class T>
  void option(const std::string& key, T& field, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + key, field, help)->capture_default_str();
    add(key, opt, field);
  }
  void flag(const std::string& key, bool& field, const std::string& help) {
    add(key, app_->add_flag("--" + key, field, help), field);
  }

  void apply(const json& section) {
    if (!section.is_object()) throw ConfigError("config section must be an object");
    for (const auto& [key, value] : section.items()) {
      auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
      if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
      if (it->opt->count() > 0) continue;
      try {
        it->load(value);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
  }

  json resolved() const {
    json out = json::object();
    for (const auto& e : entries_) out[e.key] = e.save();
    return out;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };

  template <class T>
  void add(const std::string& key, CLI::Option* opt, T& field) {
    entries_.push_back({key, opt, [&field](const json& j) { field = j.get<T>(); }, [&field] { return json(field); }});
  }

  CLI::App* app_;
  std::vector<Entry> entries_;
};

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

// Output directory plus the manifest that lists every file written into it.
class RunOutput {
 public:
  RunOutput(std::string command, const std::string& dir) : command_(std::move(command)), dir_(dir) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  }

  void input(const std::string& label, const std::string& content) {
    inputs_.push_back({{"path", label}, {"sha1", git_blob_sha1(content)}, {"bytes", content.size()}});
  }

  void input_dir(const std::string& label, const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) input(label + "/" + fs::relative(f, dir).generic_string(), read_file(f));
  }

  void finish(const json& config) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir_))
      if (e.is_regular_file() && e.path() != dir_ / "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    json outputs = json::array();
    for (const auto& f : files) {
      const std::string content = read_file(f);
      outputs.push_back({{"path", fs::relative(f, dir_).generic_string()},
                         {"sha1", git_blob_sha1(content)},
                         {"bytes", content.size()}});
    }
    json m;
    m["format"] = "geomdiff-run";
    m["version"] = 1;
    m["command"] = command_;
    m["config"] = config;
    m["inputs"] = inputs_;
    m["outputs"] = outputs;
    write("manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path dir_;
  json inputs_ = json::array();
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct ModelBundle {
  std::unique_ptr<ScoreModel> score;
  KernelSpec kernel;
  MeanSpec mean;
  DiffusionSchedule schedule;
  std::string label;
};

KernelSpec limit_kernel_for(const std::string& name, double lengthscale, int input_dim, int output_dim) {
  if (name == "white") return KernelSpec::white(1.0, input_dim, output_dim);
  if (name == "se") return KernelSpec::se(1.0, lengthscale, input_dim, output_dim);
  throw ConfigError("unknown limiting kernel '" + name + "' (white, se)");
}

GaussianDataModel task_data_model(TaskKind task) {
  DatasetSpec spec;
  spec.task = task;
  return {task_kernel(task), MeanSpec::zero(task_kernel(task).output_dim), spec.effective_noise_var()};
}

ModelBundle exact_model(TaskKind task, const std::string& limit, double lengthscale) {
  if (!is_gaussian_task(task)) throw ConfigError("exact score needs a Gaussian task, got '" + to_string(task) + "'");
  const GaussianDataModel data = task_data_model(task);
  ModelBundle b;
  b.kernel = limit_kernel_for(limit, lengthscale, data.kernel.input_dim, data.kernel.output_dim);
  b.mean = MeanSpec::zero(data.kernel.output_dim);
  b.score = std::make_unique<ExactGaussianScore>(data, b.kernel, b.mean, b.schedule);
  b.label = "exact:" + to_string(task);
  return b;
}

std::string model_document(const ScoreNetwork& net, const DiffusionSetup& setup) {
  json doc;
  doc["format"] = "geomdiff-model";
  doc["version"] = 1;
  doc["parametrization"] = to_string(setup.param.kind);
  doc["limit_kernel"] = kernel_to_json(setup.limit_kernel);
  doc["limit_mean"] = mean_to_json(setup.limit_mean);
  doc["schedule"] = schedule_to_json(setup.schedule);
  doc["network"] = json::parse(serialize_network(net));
  return doc.dump() + "\n";
}

ModelBundle load_model(const std::string& text, const std::string& label) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file is not JSON: " + std::string(e.what()));
  }
  if (doc.value("format", "") != "geomdiff-model") throw ConfigError("not a geomdiff model file");
  ModelBundle b;
  b.kernel = kernel_from_json(doc.at("limit_kernel"));
  b.mean = mean_from_json(doc.at("limit_mean"));
  b.schedule = schedule_from_json(doc.at("schedule"));
  Parametrization param{param_kind_from_string(doc.at("parametrization").get<std::string>())};
  std::shared_ptr<ScoreNetwork> net = deserialize_network(doc.at("network").dump());
  b.score = std::make_unique<NetworkScore>(net, param, b.kernel, b.mean, b.schedule);
  b.label = label;
  return b;
}

// --model FILE if given, else the exact score of the Gaussian task.
ModelBundle resolve_model(const std::string& model_path, const std::string& task, const std::string& limit,
                          double lengthscale, RunOutput& out) {
  if (!model_path.empty()) {
    const std::string text = read_file(model_path);
    out.input(fs::path(model_path).filename().string(), text);
    return load_model(text, fs::path(model_path).filename().string());
  }
  return exact_model(task_from_string(task), limit, lengthscale);
}

std::vector<FunctionSample> resolve_data(const std::string& data_dir, DatasetSpec spec, RunOutput& out,
                                         std::string& label) {
  if (!data_dir.empty()) {
    out.input_dir(fs::path(data_dir).filename().string(), data_dir);
    label = fs::path(data_dir).filename().string();
    return read_dataset(data_dir);
  }
  label = to_string(spec.task);
  return generate(spec);
}

std::string samples_csv(const Matrix& samples, const PointSet& x, int output_dim, const char* index_name) {
  std::string s = std::string("sample,") + index_name;
  for (Eigen::Index j = 0; j < x.cols(); ++j) s += ",x" + std::to_string(j);
  for (int j = 0; j < output_dim; ++j) s += ",y" + std::to_string(j);
  s += "\n";
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      s += std::to_string(c) + "," + std::to_string(i);
      for (Eigen::Index j = 0; j < x.cols(); ++j) s += "," + num(x(i, j));
      for (int j = 0; j < output_dim; ++j) s += "," + num(samples(i * output_dim + j, c));
      s += "\n";
    }
  }
  return s;
}

PointSet sample_inputs(int input_dim, const std::string& inputs, int n_points, double lo, double hi, int grid) {
  if (input_dim == 2) return disk_grid(grid, 10.0, 10.0);
  if (input_dim != 1) throw ConfigError("sample: unsupported input dimension");
  if (!inputs.empty()) {
    const auto items = split_list(inputs);
    PointSet x(static_cast<Eigen::Index>(items.size()), 1);
    for (std::size_t i = 0; i < items.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = std::stod(items[i]);
    return x;
  }
  if (n_points < 1) throw ConfigError("sample: n-points must be >= 1");
  PointSet x(n_points, 1);
  for (int i = 0; i < n_points; ++i) x(i, 0) = n_points == 1 ? lo : lo + (hi - lo) * i / (n_points - 1);
  return x;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct DataOptions {
  std::string task = "se";
  std::size_t paths = 128;
  std::size_t points = 60;
  double input_lo = -2.0;
  double input_hi = 2.0;
  int grid_size = 30;
  double noise_var = -1.0;
  bool generalisation = false;
};

DatasetSpec dataset_spec(const DataOptions& o, std::uint64_t seed) {
  DatasetSpec spec;
  spec.task = task_from_string(o.task);
  spec.n_paths = o.paths;
  spec.points_per_path = o.points;
  spec.input_lo = o.input_lo;
  spec.input_hi = o.input_hi;
  spec.grid_size = o.grid_size;
  spec.noise_var = o.noise_var;
  spec.seed = seed;
  if (o.generalisation) spec = generalisation_spec(spec);
  spec.validate();
  return spec;
}

void add_data_options(Section& s, DataOptions& o) {
  s.option("task", o.task, "se, matern52, weakly_periodic, sawtooth, mixture, vec_se, vec_curlfree, vec_divfree");
  s.option("paths", o.paths, "number of paths");
  s.option("points", o.points, "points per path (1-d tasks)");
  s.option("input-lo", o.input_lo, "input range lower end (1-d tasks)");
  s.option("input-hi", o.input_hi, "input range upper end (1-d tasks)");
  s.option("grid-size", o.grid_size, "disk grid resolution (2-d tasks)");
  s.option("noise-var", o.noise_var, "observation noise variance; negative selects the task default");
  s.flag("generalisation", o.generalisation, "draw 1-d inputs from [2, 6]");
}

int run_data(const DataOptions& o, const Globals& g, const json& config) {
  RunOutput out("data gen", g.out);
  const DatasetSpec spec = dataset_spec(o, g.seed);
  write_dataset((out.dir() / "dataset").string(), spec, generate(spec));
  out.finish(config);
  std::cout << json{{"dataset", (out.dir() / "dataset").generic_string()}, {"paths", spec.n_paths}}.dump() << "\n";
  return ok;
}

struct TrainOptions {
  DataOptions data;
  std::string data_dir;
  std::string arch = "biattention";
  std::string param = "precond_K";
  std::string limit = "white";
  double limit_lengthscale = 0.25;
  int steps = 10000;
  int batch = 16;
  int depth = 3;
  int width = 64;
  int heads = 4;
  double position_scale = 1.0;
  int warmup = 1000;
  double lr_peak = 1e-3;
  int subset_min = 0;
  int subset_max = 0;
  bool plot = false;
};

DiffusionSetup diffusion_setup(const std::string& limit, double lengthscale, int input_dim, int output_dim,
                               const std::string& param) {
  DiffusionSetup setup;
  setup.limit_kernel = limit_kernel_for(limit, lengthscale, input_dim, output_dim);
  setup.limit_mean = MeanSpec::zero(output_dim);
  setup.param.kind = param_kind_from_string(param);
  return setup;
}

NetworkConfig network_config(const TrainOptions& o, int input_dim, int output_dim) {
  NetworkConfig c;
  c.architecture = architecture_from_string(o.arch);
  c.depth = o.depth;
  c.width = o.width;
  c.heads = o.heads;
  c.input_dim = input_dim;
  c.output_dim = output_dim;
  c.position_scale = o.position_scale;
  c.validate();
  return c;
}

std::string loss_csv(const std::vector<double>& trace) {
  std::string s = "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i) + "," + num(trace[i]) + "\n";
  return s;
}

int run_train(const TrainOptions& o, const Globals& g, const json& config) {
  RunOutput out("train", g.out);
  std::string label;
  const auto data = resolve_data(o.data_dir, dataset_spec(o.data, g.seed), out, label);
  if (data.empty()) throw ConfigError("train: empty dataset");
  const int input_dim = static_cast<int>(data[0].x.cols());
  const int output_dim = static_cast<int>(data[0].y.size() / data[0].x.rows());
  const DiffusionSetup setup = diffusion_setup(o.limit, o.limit_lengthscale, input_dim, output_dim, o.param);

  RngStream init(RngStream(g.seed).split(1).next_u64());
  auto net = make_network(network_config(o, input_dim, output_dim), init);
  TrainConfig tc;
  tc.steps = o.steps;
  tc.batch_size = o.batch;
  tc.lr.warmup_steps = o.warmup;
  tc.lr.peak = o.lr_peak;
  tc.subset_min = o.subset_min;
  tc.subset_max = o.subset_max;
  tc.seed = RngStream(g.seed).split(2).next_u64();
  const TrainResult r = train_dsm(*net, data, setup, tc);

  out.write("model.json", model_document(*net, setup));
  out.write("loss.csv", loss_csv(r.loss_trace));
  if (o.plot) {
    std::vector<double> steps(r.loss_trace.size());
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = static_cast<double>(i);
    out.write("loss.svg", svg_line_chart(steps, r.loss_trace, "DSM loss", true));
  }
  out.finish(config);
  std::cout << json{{"dataset", label},
                    {"parameters", net->parameter_count()},
                    {"initial_loss", r.loss_trace.front()},
                    {"final_loss", r.loss_trace.back()}}
                   .dump()
            << "\n";
  return ok;
}

struct ModelOptions {
  std::string model;
  std::string task = "se";
  std::string limit = "white";
  double limit_lengthscale = 0.25;
};

void add_model_options(Section& s, ModelOptions& o) {
  s.option("model", o.model, "model.json from `train`; empty uses the exact score of --task");
  s.option("task", o.task, "Gaussian task for the exact score and for generated data");
  s.option("limit-kernel", o.limit, "limiting kernel of the exact score: white, se");
  s.option("limit-lengthscale", o.limit_lengthscale, "lengthscale of the se limiting kernel");
}

struct SampleOptions {
  ModelOptions model;
  std::string inputs;
  int n_points = 50;
  double input_lo = -2.0;
  double input_hi = 2.0;
  int grid_size = 10;
  int count = 16;
  int steps = 1000;
  std::string integrator = "euler_maruyama";
  bool ode = false;
  bool trajectory = false;
};

int run_sample(const SampleOptions& o, const Globals& g, const json& config) {
  RunOutput out("sample", g.out);
  ModelBundle m = resolve_model(o.model.model, o.model.task, o.model.limit, o.model.limit_lengthscale, out);
  if (o.count < 1) throw ConfigError("sample: count must be >= 1");
  const PointSet x = sample_inputs(m.kernel.input_dim, o.inputs, o.n_points, o.input_lo, o.input_hi, o.grid_size);
  const LimitingGaussian prior = limiting_gaussian(m.kernel, m.mean, x);
  SdeRunConfig rc;
  rc.steps = o.steps;
  rc.integrator = integrator_from_string(o.integrator);
  rc.store_trajectory = o.trajectory;
  auto bound = m.score->bind(x);
  const RngStream root(g.seed);
  Matrix samples(static_cast<Eigen::Index>(prior.dim()), o.count);
  std::string traj = "sample,t,point,value\n";
  if (o.ode || o.trajectory) {
    for (int c = 0; c < o.count; ++c) {
      RngStream rng = root.split(static_cast<std::uint64_t>(c));
      const SdeResult r = o.ode ? probability_flow_sample(*bound, prior, m.schedule, rc, rng)
                                : reverse_sde_sample(*bound, prior, m.schedule, rc, rng);
      samples.col(c) = r.sample;
      for (std::size_t k = 0; k < r.trajectory.times.size(); ++k)
        for (Eigen::Index i = 0; i < r.trajectory.states[k].size(); ++i)
          traj += std::to_string(c) + "," + num(r.trajectory.times[k]) + "," + std::to_string(i) + "," +
                  num(r.trajectory.states[k](i)) + "\n";
    }
  } else {
    samples = reverse_sde_sample_batch(*bound, prior, m.schedule, rc, root, static_cast<std::size_t>(o.count));
  }
  out.write("samples.csv", samples_csv(samples, x, m.kernel.output_dim, "point"));
  if (o.trajectory) out.write("trajectory.csv", traj);
  out.finish(config);
  std::cout << json{{"model", m.label}, {"samples", o.count}, {"points", x.rows()}}.dump() << "\n";
  return ok;
}

struct ConditionOptions {
  ModelOptions model;
  std::string schemes = "all";
  std::string inner_steps = "1,5,25";
  int budget = 5000;
  int samples = 4096;
  int n_context = 3;
  int n_target = 10;
  int terminal_steps = 0;
  double langevin_scale = 1.0;
  std::string integrator = "euler_maruyama";
  bool repaint = false;
  bool write_samples = false;
};

// Context and target drawn from one path of the task, with distinct inputs.
ContextTargetSplit conditioning_split(TaskKind task, int n_context, int n_target, std::uint64_t seed) {
  DatasetSpec spec;
  spec.task = task;
  spec.n_paths = 1;
  spec.points_per_path = static_cast<std::size_t>(n_context + n_target);
  spec.grid_size = 10;
  spec.seed = seed;
  const FunctionSample path = generate(spec).front();
  RngStream rng(RngStream(seed).split(7).next_u64());
  return split_context_target(path, n_context, n_context, n_target, rng);
}

int run_condition(const ConditionOptions& o, const Globals& g, const json& config) {
  RunOutput out("condition", g.out);
  ModelBundle m = resolve_model(o.model.model, o.model.task, o.model.limit, o.model.limit_lengthscale, out);
  const TaskKind task = task_from_string(o.model.task);
  if (o.budget < 1 || o.samples < 2) throw ConfigError("condition: budget must be >= 1 and samples >= 2");
  std::vector<NoiseScheme> schemes;
  if (o.schemes == "all")
    schemes.assign(kAllSchemes.begin(), kAllSchemes.end());
  else
    for (const auto& s : split_list(o.schemes)) schemes.push_back(noise_scheme_from_string(s));
  const std::vector<int> inner = int_list(o.inner_steps);
  if (schemes.empty() || inner.empty()) throw ConfigError("condition: empty scheme or inner-step list");

  const ContextTargetSplit split = conditioning_split(task, o.n_context, o.n_target, RngStream(g.seed).split(3).next_u64());
  std::optional<GpPosterior> oracle;
  if (is_gaussian_task(task)) {
    const GaussianDataModel data = task_data_model(task);
    oracle = gp_condition(data.kernel, data.mean, split.context_x, split.context_y, split.target_x, data.noise_var);
  }

  ConditioningTask ct;
  ct.context_x = split.context_x;
  ct.context_y = split.context_y;
  ct.target_x = split.target_x;
  ct.terminal_steps = o.terminal_steps;
  ct.langevin_scale = o.langevin_scale;
  ct.integrator = integrator_from_string(o.integrator);
  const PointSet joint = ct.joint_inputs();
  auto bound = m.score->bind(joint);
  const LimitingGaussian prior = limiting_gaussian(m.kernel, m.mean, joint);

  json study = json::array();
  std::string csv;
  auto record = [&](const std::string& sampler, const std::string& scheme, int l, int n, const ConditionalBatch& b) {
    json row{{"sampler", sampler}, {"scheme", scheme}, {"L", l}, {"N", n},
             {"score_evaluations", b.counters.score_evaluations}, {"context_draws", b.counters.context_draws}};
    if (oracle) {
      const GaussianFit fit = fit_gaussian(b.samples);
      row["kl_nats"] = gaussian_kl(fit.mean, fit.covariance, oracle->mean, oracle->covariance);
    }
    study.push_back(row);
    if (o.write_samples) {
      const std::string name = sampler + "_" + scheme + "_L" + std::to_string(l) + ".csv";
      out.write("samples/" + name, samples_csv(b.samples, ct.target_x, m.kernel.output_dim, "target"));
    }
  };
  const RngStream root(g.seed);
  for (int l : inner) {
    if (l < 0) throw ConfigError("condition: inner steps must be >= 0");
    ct.inner_steps = l;
    ct.outer_steps = std::max(1, o.budget / (l + 1));
    for (NoiseScheme s : schemes) {
      ct.scheme = s;
      record("langevin", to_string(s), l, ct.outer_steps,
             conditional_sample_batch(*bound, prior, m.schedule, ct, root, static_cast<std::size_t>(o.samples)));
    }
    if (o.repaint && l >= 1) {
      ct.outer_steps = std::max(1, o.budget / l);
      record("repaint", "resample_every_inner", l, ct.outer_steps,
             repaint_sample_batch(*bound, prior, m.schedule, ct, root, static_cast<std::size_t>(o.samples)));
    }
  }
  out.write("kl.json", study.dump(2) + "\n");
  out.finish(config);
  std::cout << study.dump() << "\n";
  return ok;
}

struct LikelihoodOptions {
  ModelOptions model;
  DataOptions data;
  std::string data_dir;
  int n_context = 3;
  int n_target = 10;
  int tasks = 8;
  int ode_steps = 100;
  std::string divergence = "exact_autodiff";
  int probes = 8;
};

int run_likelihood(const LikelihoodOptions& o, const Globals& g, const json& config) {
  RunOutput out("likelihood", g.out);
  ModelBundle m = resolve_model(o.model.model, o.model.task, o.model.limit, o.model.limit_lengthscale, out);
  DataOptions dopt = o.data;
  dopt.task = o.model.task;
  dopt.paths = static_cast<std::size_t>(std::max(o.tasks, 1));
  dopt.points = static_cast<std::size_t>(o.n_context + o.n_target);
  std::string label;
  const auto data = resolve_data(o.data_dir, dataset_spec(dopt, RngStream(g.seed).split(4).next_u64()), out, label);
  OdeConfig oc;
  oc.steps = o.ode_steps;
  DivergenceMode dm;
  dm.kind = divergence_kind_from_string(o.divergence);
  dm.probes = o.probes;

  RngStream rng(RngStream(g.seed).split(5).next_u64());
  json per_task = json::array();
  double total = 0.0;
  const std::size_t count = std::min(data.size(), static_cast<std::size_t>(o.tasks));
  if (count == 0) throw ConfigError("likelihood: no tasks");
  for (std::size_t i = 0; i < count; ++i) {
    const ContextTargetSplit s = split_context_target(data[i], o.n_context, o.n_context, o.n_target, rng);
    const double ll = conditional_log_likelihood(*m.score, m.kernel, m.mean, s.context_x, s.context_y, s.target_x,
                                                 s.target_y, m.schedule, oc, dm, rng.next_u64());
    const double per_point = ll / static_cast<double>(s.target_x.rows());
    per_task.push_back({{"task", i}, {"loglik", ll}, {"loglik_per_target", per_point}});
    total += per_point;
  }
  json report;
  report["dataset"] = label;
  report["model"] = m.label;
  report["n_context"] = o.n_context;
  report["n_target"] = o.n_target;
  report["loglik"] = total / static_cast<double>(count);
  report["divergence_mode"] = to_string(dm.kind);
  report["tasks"] = per_task;
  out.write("likelihood.json", report.dump(2) + "\n");
  out.finish(config);
  std::cout << json{{"dataset", label}, {"loglik", report["loglik"]}}.dump() << "\n";
  return ok;
}

struct AblateOptions {
  TrainOptions train;
  std::string parametrizations = "all";
  std::string kernels = "white,se";
  int tll_tasks = 8;
  int n_context = 3;
  int n_target = 10;
  int ode_steps = 50;
};

int run_ablate(const AblateOptions& o, const Globals& g, const json& config) {
  RunOutput out("ablate", g.out);
  std::string label;
  const auto data = resolve_data(o.train.data_dir, dataset_spec(o.train.data, g.seed), out, label);
  if (data.empty()) throw ConfigError("ablate: empty dataset");
  DataOptions held = o.train.data;
  held.paths = static_cast<std::size_t>(std::max(1, o.tll_tasks));
  held.points = static_cast<std::size_t>(o.n_context + o.n_target);
  const auto test = generate(dataset_spec(held, RngStream(g.seed).split(6).next_u64()));

  std::vector<std::string> params;
  if (o.parametrizations == "all")
    for (ParamKind k : kAllParametrizations) params.push_back(to_string(k));
  else
    params = split_list(o.parametrizations);
  const auto kernels = split_list(o.kernels);
  if (params.empty() || kernels.empty()) throw ConfigError("ablate: empty grid");

  const int input_dim = static_cast<int>(data[0].x.cols());
  const int output_dim = static_cast<int>(data[0].y.size() / data[0].x.rows());
  std::string csv = "parametrization,kernel,initial_loss,final_loss,tll,status\n";
  json grid = json::array();
  std::uint64_t cell = 0;
  for (const auto& kernel : kernels) {
    for (const auto& param : params) {
      const DiffusionSetup setup = diffusion_setup(kernel, o.train.limit_lengthscale, input_dim, output_dim, param);
      RngStream init(RngStream(g.seed).split(100 + cell).next_u64());
      std::shared_ptr<ScoreNetwork> net = make_network(network_config(o.train, input_dim, output_dim), init);
      TrainConfig tc;
      tc.steps = o.train.steps;
      tc.batch_size = o.train.batch;
      tc.lr.warmup_steps = o.train.warmup;
      tc.lr.peak = o.train.lr_peak;
      tc.subset_min = o.train.subset_min;
      tc.subset_max = o.train.subset_max;
      tc.seed = RngStream(g.seed).split(200 + cell).next_u64();
      ++cell;
      json row{{"parametrization", param}, {"kernel", kernel}};
      std::string status = "ok";
      double first = NAN, last = NAN, tll = NAN;
      try {
        const TrainResult r = train_dsm(*net, data, setup, tc);
        first = r.loss_trace.front();
        last = r.loss_trace.back();
        NetworkScore score(net, setup.param, setup.limit_kernel, setup.limit_mean, setup.schedule);
        OdeConfig oc;
        oc.steps = o.ode_steps;
        RngStream split_rng(RngStream(g.seed).split(300 + cell).next_u64());
        double sum = 0.0;
        for (const auto& path : test) {
          const auto s = split_context_target(path, o.n_context, o.n_context, o.n_target, split_rng);
          sum += conditional_log_likelihood(score, setup.limit_kernel, setup.limit_mean, s.context_x, s.context_y,
                                            s.target_x, s.target_y, setup.schedule, oc) /
                 static_cast<double>(s.target_x.rows());
        }
        tll = sum / static_cast<double>(test.size());
        if (!std::isfinite(tll)) status = "diverged";
      } catch (const NumericError& e) {
        status = "diverged";
      }
      csv += param + "," + kernel + "," + num(first) + "," + num(last) + "," + num(tll) + "," + status + "\n";
      row["status"] = status;
      if (status == "ok") {
        row["initial_loss"] = first;
        row["final_loss"] = last;
        row["tll"] = tll;
      }
      grid.push_back(row);
    }
  }
  out.write("ablation.csv", csv);
  out.write("ablation.json", grid.dump(2) + "\n");
  out.finish(config);
  std::cout << grid.dump() << "\n";
  return ok;
}

struct CheckOptions {
  int trials = 50;
  std::string manifests;
};

json suite_row(const std::string& name, double value, double threshold, bool below) {
  const bool pass = std::isfinite(value) && (below ? value < threshold : value > threshold);
  return {{"name", name}, {"value", value}, {"threshold", threshold}, {"expect", below ? "below" : "above"},
          {"pass", pass}};
}

int run_check(const CheckOptions& o, const Globals& g, const json& config) {
  RunOutput out("check", g.out);
  json suites = json::array();
  const RngStream root(g.seed);
  auto rng_for = [&](std::uint64_t k) { return RngStream(root.split(k).next_u64()); };

  const KernelSpec diag = task_kernel(TaskKind::vec_se);
  const KernelSpec curl = task_kernel(TaskKind::vec_curlfree);
  const KernelSpec div = task_kernel(TaskKind::vec_divfree);
  {
    RngStream r = rng_for(1);
    suites.push_back(suite_row("kernel_equivariance_diagonal", check_kernel_equivariance(diag, o.trials, r), 1e-10, true));
    suites.push_back(suite_row("kernel_equivariance_curl_free", check_kernel_equivariance(curl, o.trials, r), 1e-10, true));
    suites.push_back(suite_row("kernel_equivariance_div_free", check_kernel_equivariance(div, o.trials, r), 1e-10, true));
    KernelSpec ard = KernelSpec::se(1.0, 1.0, 2, 2);
    ard.ard_lengthscales = {0.5, 2.0};
    suites.push_back(suite_row("negative_control_anisotropic_kernel", check_kernel_equivariance(ard, o.trials, r), 1e-3, false));
  }
  {
    const DiffusionSchedule sched;
    ExactGaussianScore exact({div, MeanSpec::zero(2), 0.0}, KernelSpec::se(1.0, 2.0, 2, 2), MeanSpec::zero(2), sched);
    RngStream r = rng_for(2);
    EquivarianceProbe probe;
    probe.trials = o.trials;
    probe.points = 4;
    auto f = [&](double t, const PointSet& x, const Vector& y) { return exact.evaluate(t, x, y); };
    suites.push_back(suite_row("exact_score_equivariance", check_score_equivariance(f, 2, 2, probe, r), 1e-9, true));
  }
  for (Architecture a : {Architecture::egnn_equivariant, Architecture::mlp, Architecture::biattention}) {
    NetworkConfig c;
    c.architecture = a;
    c.input_dim = 2;
    c.output_dim = 2;
    c.depth = 2;
    c.width = 16;
    RngStream init = rng_for(10 + static_cast<std::uint64_t>(a));
    auto net = make_network(c, init);
    auto f = [&](double t, const PointSet& x, const Vector& y) { return stack(net->evaluate(t, x, unstack(y, 2))); };
    EquivarianceProbe probe;
    probe.trials = 10;
    probe.points = 5;
    RngStream r = rng_for(20 + static_cast<std::uint64_t>(a));
    if (a == Architecture::egnn_equivariant)
      suites.push_back(suite_row("egnn_equivariance", check_score_equivariance(f, 2, 2, probe, r), 1e-5, true));
    if (a == Architecture::mlp)
      suites.push_back(suite_row("negative_control_mlp_equivariance", check_score_equivariance(f, 2, 2, probe, r), 1e-2, false));
    suites.push_back(suite_row("permutation_equivariance_" + to_string(a),
                               check_permutation_equivariance(f, 2, 2, probe, r), 1e-12, true));
  }
  {
    RngStream r = rng_for(3);
    double worst_div = 0.0, worst_curl = 0.0, diag_div = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Vector x = 2.0 * r.normal_vector(2), xp = 2.0 * r.normal_vector(2), v = r.normal_vector(2);
      worst_div = std::max(worst_div, std::abs(divergence_of_kernel_column(div, xp, v, x)));
      worst_curl = std::max(worst_curl, std::abs(divergence_of_kernel_column(curl, xp, v, x)));
      diag_div = std::max(diag_div, std::abs(divergence_of_kernel_column(diag, xp, v, x)));
    }
    suites.push_back(suite_row("div_free_divergence", worst_div, 1e-5, true));
    suites.push_back(suite_row("curl_free_curl", worst_curl, 1e-5, true));
    suites.push_back(suite_row("negative_control_diagonal_divergence", diag_div, 1e-3, false));
  }
  {
    double worst = 0.0;
    for (double gamma : {1e-3, 1e-2, 1e-1}) {
      const RepaintCoefficients c = repaint_langevin_coefficients(gamma);
      worst = std::max(worst, std::abs(c.drift_scale + 2.0 * std::expm1(-gamma)));
      worst = std::max(worst, std::abs(c.noise_scale - std::sqrt(2.0) * std::sqrt(-std::expm1(-2.0 * gamma))));
    }
    suites.push_back(suite_row("repaint_coefficients", worst, 1e-12, true));
  }
  {
    const DiffusionSchedule sched;
    const KernelSpec white = KernelSpec::white(1.0);
    ExactGaussianScore stationary({white, MeanSpec::zero(), 0.0}, white, MeanSpec::zero(), sched);
    PointSet x(1, 1);
    x << 0.3;
    const Vector y = Vector::Constant(1, 0.7);
    const double ll = log_likelihood(stationary, white, MeanSpec::zero(), x, y, sched);
    const double want = -0.5 * std::log(2.0 * M_PI) - 0.5 * 0.49;
    suites.push_back(suite_row("white_point_likelihood", std::abs(ll - want), 1e-3, true));
  }
  if (!o.manifests.empty()) {
    const auto problems = manifest_problems(o.manifests);
    suites.push_back(suite_row("manifest_completeness", static_cast<double>(problems.size()), 0.5, true));
  }
  bool pass = true;
  for (const auto& s : suites) pass = pass && s["pass"].get<bool>();
  json report{{"pass", pass}, {"suites", suites}};
  out.write("check.json", report.dump(2) + "\n");
  out.finish(config);
  std::cout << report.dump() << "\n";
  if (!pass) throw CheckFailure("check: one or more suites failed");
  return ok;
}

struct PlotOptions {
  std::string input;
  std::string output = "loss.svg";
  bool log_y = true;
};

int run_plot(const PlotOptions& o, const Globals& g, const json& config) {
  if (o.input.empty()) throw ConfigError("plot: --input is required");
  RunOutput out("plot", g.out);
  const std::string text = read_file(o.input);
  out.input(fs::path(o.input).filename().string(), text);
  std::vector<double> xs, ys;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cells = split_list(line);
    if (cells.size() < 2) continue;
    xs.push_back(std::stod(cells[0]));
    ys.push_back(std::stod(cells[1]));
  }
  if (xs.empty()) throw ConfigError("plot: no rows in '" + o.input + "'");
  out.write(o.output, svg_line_chart(xs, ys, fs::path(o.input).stem().string(), o.log_y));
  out.finish(config);
  return ok;
}

int error_exit(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[digest[i] >> 4];
    s += hex[digest[i] & 15];
  }
  return s;
}

nlohmann::json kernel_to_json(const KernelSpec& k) {
  nlohmann::json j;
  j["family"] = to_string(k.family);
  j["variance"] = k.variance;
  j["lengthscale"] = k.lengthscale;
  j["period"] = k.period;
  j["envelope_lengthscale"] = k.envelope_lengthscale;
  j["input_dim"] = k.input_dim;
  j["output_dim"] = k.output_dim;
  j["base"] = to_string(k.base);
  if (!k.ard_lengthscales.empty()) j["ard_lengthscales"] = k.ard_lengthscales;
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
  try {
    KernelSpec k;
    k.family = kernel_family_from_string(j.at("family").get<std::string>());
    k.variance = j.value("variance", k.variance);
    k.lengthscale = j.value("lengthscale", k.lengthscale);
    k.period = j.value("period", k.period);
    k.envelope_lengthscale = j.value("envelope_lengthscale", k.envelope_lengthscale);
    k.input_dim = j.value("input_dim", k.input_dim);
    k.output_dim = j.value("output_dim", k.output_dim);
    if (j.contains("base")) k.base = kernel_family_from_string(j.at("base").get<std::string>());
    if (j.contains("ard_lengthscales")) k.ard_lengthscales = j.at("ard_lengthscales").get<std::vector<double>>();
    k.validate();
    return k;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("kernel spec: ") + e.what());
  }
}

nlohmann::json mean_to_json(const MeanSpec& m) {
  nlohmann::json j;
  j["output_dim"] = m.output_dim;
  switch (m.kind) {
    case MeanKind::zero:
      j["kind"] = "zero";
      break;
    case MeanKind::constant:
      j["kind"] = "constant";
      j["constant"] = std::vector<double>(m.constant.data(), m.constant.data() + m.constant.size());
      break;
    case MeanKind::linear: {
      j["kind"] = "linear";
      j["constant"] = std::vector<double>(m.constant.data(), m.constant.data() + m.constant.size());
      std::vector<std::vector<double>> rows;
      for (Eigen::Index r = 0; r < m.linear.rows(); ++r) {
        rows.emplace_back();
        for (Eigen::Index c = 0; c < m.linear.cols(); ++c) rows.back().push_back(m.linear(r, c));
      }
      j["linear"] = rows;
      break;
    }
    case MeanKind::table:
      throw ConfigError("tabulated means are not serializable");
  }
  return j;
}

MeanSpec mean_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const int d = j.value("output_dim", 1);
    auto vec = [](const std::vector<double>& v) { return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))); };
    if (kind == "zero") return MeanSpec::zero(d);
    if (kind == "constant") return MeanSpec::constant_value(vec(j.at("constant").get<std::vector<double>>()));
    if (kind == "linear") {
      const auto rows = j.at("linear").get<std::vector<std::vector<double>>>();
      Matrix a(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      return MeanSpec::linear_map(a, vec(j.at("constant").get<std::vector<double>>()));
    }
    throw ConfigError("unknown mean kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mean spec: ") + e.what());
  }
}

nlohmann::json schedule_to_json(const DiffusionSchedule& s) {
  return {{"kind", "linear"}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}, {"horizon", s.horizon},
          {"eps_clip", s.eps_clip}};
}

DiffusionSchedule schedule_from_json(const nlohmann::json& j) {
  try {
    if (j.value("kind", std::string("linear")) != "linear") throw ConfigError("only linear schedules are supported");
    DiffusionSchedule s;
    s.beta_min = j.value("beta_min", s.beta_min);
    s.beta_max = j.value("beta_max", s.beta_max);
    s.horizon = j.value("horizon", s.horizon);
    s.eps_clip = j.value("eps_clip", s.eps_clip);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

std::string svg_line_chart(const std::vector<double>& x, const std::vector<double>& y, const std::string& title,
                           bool log_y) {
  if (x.size() != y.size() || x.empty()) throw ConfigError("svg: need matching, nonempty series");
  constexpr double w = 640, h = 400, pad = 50;
  std::vector<double> v(y);
  if (log_y) {
    for (double& e : v) e = e > 0.0 ? std::log10(e) : NAN;
  }
  double x0 = *std::min_element(x.begin(), x.end()), x1 = *std::max_element(x.begin(), x.end());
  double y0 = INFINITY, y1 = -INFINITY;
  for (double e : v)
    if (std::isfinite(e)) y0 = std::min(y0, e), y1 = std::max(y1, e);
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  char buf[128];
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">", pad);
  s += buf + title + (log_y ? " (log10)" : "") + "</text>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#999\"/>\n",
                pad, pad, w - 2 * pad, h - 2 * pad);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%g\" font-size=\"10\">%.3g</text>\n", pad + 4, y1);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%g\" font-size=\"10\">%.3g</text>\n", h - pad, y0);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"10\">%.6g</text>\n", pad, h - pad + 16, x0);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" font-size=\"10\">%.6g</text>\n", w - pad - 30, h - pad + 16, x1);
  s += buf;
  s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(v[i])) continue;
    const double px = pad + (x[i] - x0) / (x1 - x0) * (w - 2 * pad);
    const double py = h - pad - (v[i] - y0) / (y1 - y0) * (h - 2 * pad);
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
    s += buf;
  }
  s += "\"/>\n</svg>\n";
  return s;
}

std::vector<std::string> manifest_problems(const std::string& dir) {
  std::vector<std::string> problems;
  const fs::path root(dir);
  const fs::path mpath = root / "manifest.json";
  if (!fs::exists(mpath)) return {"manifest.json"};
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const nlohmann::json::exception&) {
    return {"manifest.json"};
  }
  std::vector<std::pair<std::string, std::string>> listed;
  for (const auto& e : m.value("outputs", json::array()))
    listed.emplace_back(e.value("path", ""), e.value("sha1", ""));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path() != mpath) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, root).generic_string();
    auto it = std::find_if(listed.begin(), listed.end(), [&](const auto& p) { return p.first == rel; });
    if (it == listed.end() || it->second != git_blob_sha1(read_file(f))) problems.push_back(rel);
  }
  for (const auto& [path, sha] : listed)
    if (!fs::exists(root / path)) problems.push_back(path);
  return problems;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Neural diffusion processes over finite marginals of functions", "geomdiff"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config; top-level seed/out plus one object per subcommand");
  g.seed_opt = app.add_option("--seed", g.seed, "global seed (env GEOMDIFF_SEED)")->capture_default_str();
  g.out_opt = app.add_option("--out", g.out, "output directory (env GEOMDIFF_OUT)")->capture_default_str();

  CLI::App* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  CLI::App* gen = data->add_subcommand("gen", "generate a synthetic dataset");
  DataOptions data_o;
  Section data_s(gen);
  add_data_options(data_s, data_o);

  CLI::App* train = app.add_subcommand("train", "train a score network with denoising score matching");
  TrainOptions train_o;
  Section train_s(train);
  add_data_options(train_s, train_o.data);
  train_s.option("data", train_o.data_dir, "dataset directory from `data gen`; empty generates one");
  train_s.option("arch", train_o.arch, "mlp, biattention, egnn_equivariant");
  train_s.option("param", train_o.param, "none, precond_K, precond_ST, predict_Y0");
  train_s.option("limit-kernel", train_o.limit, "white, se");
  train_s.option("limit-lengthscale", train_o.limit_lengthscale, "lengthscale of the se limiting kernel");
  train_s.option("steps", train_o.steps, "optimizer steps");
  train_s.option("batch", train_o.batch, "paths per step");
  train_s.option("depth", train_o.depth, "network depth");
  train_s.option("width", train_o.width, "network width");
  train_s.option("heads", train_o.heads, "attention heads");
  train_s.option("position-scale", train_o.position_scale, "inputs are divided by this");
  train_s.option("warmup", train_o.warmup, "warmup steps");
  train_s.option("lr-peak", train_o.lr_peak, "peak learning rate");
  train_s.option("subset-min", train_o.subset_min, "random point subset size per example (0 uses all points)");
  train_s.option("subset-max", train_o.subset_max, "upper end of the subset size");
  train_s.flag("plot", train_o.plot, "also write loss.svg");

  CLI::App* sample = app.add_subcommand("sample", "unconditional samples by reverse SDE or probability flow");
  SampleOptions sample_o;
  Section sample_s(sample);
  add_model_options(sample_s, sample_o.model);
  sample_s.option("inputs", sample_o.inputs, "comma-separated 1-d inputs");
  sample_s.option("n-points", sample_o.n_points, "evenly spaced 1-d inputs when --inputs is empty");
  sample_s.option("input-lo", sample_o.input_lo, "lower end of the 1-d inputs");
  sample_s.option("input-hi", sample_o.input_hi, "upper end of the 1-d inputs");
  sample_s.option("grid-size", sample_o.grid_size, "disk grid resolution for 2-d inputs");
  sample_s.option("count", sample_o.count, "number of samples");
  sample_s.option("steps", sample_o.steps, "integration steps");
  sample_s.option("integrator", sample_o.integrator, "euler_maruyama, exponential");
  sample_s.flag("ode", sample_o.ode, "probability-flow ODE instead of the reverse SDE");
  sample_s.flag("trajectory", sample_o.trajectory, "write trajectory.csv");

  CLI::App* condition = app.add_subcommand("condition", "conditional sampling and the noising-scheme KL study");
  ConditionOptions cond_o;
  Section cond_s(condition);
  add_model_options(cond_s, cond_o.model);
  cond_s.option("scheme", cond_o.schemes, "all or a list of resample_every_inner, resample_every_outer, sde_path_noise, no_noise");
  cond_s.option("inner-steps", cond_o.inner_steps, "comma-separated inner Langevin step counts");
  cond_s.option("budget", cond_o.budget, "score evaluations per sample; outer steps = budget/(L+1)");
  cond_s.option("samples", cond_o.samples, "conditional samples per setting");
  cond_s.option("n-context", cond_o.n_context, "context points");
  cond_s.option("n-target", cond_o.n_target, "target points");
  cond_s.option("terminal-steps", cond_o.terminal_steps, "extra Langevin steps at the end");
  cond_s.option("langevin-scale", cond_o.langevin_scale, "inner step size relative to the outer step");
  cond_s.option("integrator", cond_o.integrator, "euler_maruyama, exponential");
  cond_s.flag("repaint", cond_o.repaint, "also run RePaint with the same inner step counts");
  cond_s.flag("write-samples", cond_o.write_samples, "write the samples of every setting");

  CLI::App* lik = app.add_subcommand("likelihood", "conditional log-likelihood by the probability-flow ODE");
  LikelihoodOptions lik_o;
  Section lik_s(lik);
  add_model_options(lik_s, lik_o.model);
  lik_s.option("data", lik_o.data_dir, "dataset directory; empty generates tasks");
  lik_s.option("n-context", lik_o.n_context, "context points per task");
  lik_s.option("n-target", lik_o.n_target, "target points per task");
  lik_s.option("tasks", lik_o.tasks, "number of tasks");
  lik_s.option("ode-steps", lik_o.ode_steps, "Heun steps");
  lik_s.option("divergence", lik_o.divergence, "exact_autodiff, hutchinson");
  lik_s.option("probes", lik_o.probes, "Hutchinson probes");

  CLI::App* ablate = app.add_subcommand("ablate", "parametrization x limiting-kernel training ablation");
  AblateOptions abl_o;
  abl_o.train.arch = "mlp";
  abl_o.train.steps = 300;
  abl_o.train.warmup = 50;
  abl_o.train.width = 32;
  abl_o.train.depth = 2;
  abl_o.train.data.paths = 64;
  abl_o.train.data.points = 20;
  Section abl_s(ablate);
  add_data_options(abl_s, abl_o.train.data);
  abl_s.option("data", abl_o.train.data_dir, "dataset directory; empty generates one");
  abl_s.option("parametrizations", abl_o.parametrizations, "all or a list of parametrizations");
  abl_s.option("kernels", abl_o.kernels, "list of limiting kernels (white, se)");
  abl_s.option("limit-lengthscale", abl_o.train.limit_lengthscale, "lengthscale of the se limiting kernel");
  abl_s.option("arch", abl_o.train.arch, "mlp, biattention, egnn_equivariant");
  abl_s.option("steps", abl_o.train.steps, "optimizer steps per cell");
  abl_s.option("batch", abl_o.train.batch, "paths per step");
  abl_s.option("depth", abl_o.train.depth, "network depth");
  abl_s.option("width", abl_o.train.width, "network width");
  abl_s.option("warmup", abl_o.train.warmup, "warmup steps");
  abl_s.option("lr-peak", abl_o.train.lr_peak, "peak learning rate");
  abl_s.option("tll-tasks", abl_o.tll_tasks, "held-out tasks for the TLL");
  abl_s.option("n-context", abl_o.n_context, "context points per held-out task");
  abl_s.option("n-target", abl_o.n_target, "target points per held-out task");
  abl_s.option("ode-steps", abl_o.ode_steps, "Heun steps for the TLL");

  CLI::App* check = app.add_subcommand("check", "symmetry and oracle verification suite");
  CheckOptions check_o;
  Section check_s(check);
  check_s.option("trials", check_o.trials, "random group elements per kernel");
  check_s.option("manifests", check_o.manifests, "also validate the manifest of this run directory");

  CLI::App* plot = app.add_subcommand("plot", "SVG line chart of a loss trace CSV");
  PlotOptions plot_o;
  Section plot_s(plot);
  plot_s.option("input", plot_o.input, "CSV with step and value columns");
  plot_s.option("output", plot_o.output, "SVG file name inside the output directory");
  plot_s.flag("log-y", plot_o.log_y, "log10 y axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  struct Command {
    CLI::App* app;
    std::string key;
    Section* section;
    std::function<int(const json&)> run;
  };
  const std::vector<Command> commands = {
      {gen, "data", &data_s, [&](const json& c) { return run_data(data_o, g, c); }},
      {train, "train", &train_s, [&](const json& c) { return run_train(train_o, g, c); }},
      {sample, "sample", &sample_s, [&](const json& c) { return run_sample(sample_o, g, c); }},
      {condition, "condition", &cond_s, [&](const json& c) { return run_condition(cond_o, g, c); }},
      {lik, "likelihood", &lik_s, [&](const json& c) { return run_likelihood(lik_o, g, c); }},
      {ablate, "ablate", &abl_s, [&](const json& c) { return run_ablate(abl_o, g, c); }},
      {check, "check", &check_s, [&](const json& c) { return run_check(check_o, g, c); }},
      {plot, "plot", &plot_s, [&](const json& c) { return run_plot(plot_o, g, c); }},
  };

  try {
    const Command* chosen = nullptr;
    for (const auto& c : commands)
      if (c.app->parsed()) chosen = &c;
    if (chosen == nullptr) throw ConfigError("no subcommand");

    if (!g.config.empty()) {
      json file;
      try {
        file = json::parse(read_file(g.config));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + g.config + "': " + e.what());
      }
      for (const auto& [key, value] : file.items()) {
        if (key == "seed") {
          if (g.seed_opt->count() == 0) g.seed = value.get<std::uint64_t>();
        } else if (key == "out") {
          if (g.out_opt->count() == 0) g.out = value.get<std::string>();
        } else if (key == chosen->key) {
          chosen->section->apply(value);
        } else if (std::none_of(commands.begin(), commands.end(), [&](const Command& c) { return c.key == key; })) {
          throw ConfigError("unknown config key '" + key + "'");
        }
      }
    }
    if (const char* env = std::getenv("GEOMDIFF_SEED"); env != nullptr && g.seed_opt->count() == 0) {
      try {
        g.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError("GEOMDIFF_SEED is not an unsigned integer");
      }
    }
    if (const char* env = std::getenv("GEOMDIFF_OUT"); env != nullptr && *env != '\0' && g.out_opt->count() == 0)
      g.out = env;

    json config;
    config["seed"] = g.seed;
    config[chosen->key] = chosen->section->resolved();
    return chosen->run(config);
  } catch (const CheckFailure& e) {
    return error_exit(check_failure, "check_failure", e.what());
  } catch (const NumericError& e) {
    return error_exit(numeric_failure, "numeric_failure", e.what());
  } catch (const ConfigError& e) {
    return error_exit(config_error, "config_error", e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_exit(config_error, "config_error", e.what());
  } catch (const std::invalid_argument& e) {
    return error_exit(config_error, "config_error", e.what());
  } catch (const std::exception& e) {
    return error_exit(failure, "error", e.what());
  }
}

}  // namespace geomdiff::cli
