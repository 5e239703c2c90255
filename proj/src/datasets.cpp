#include "geomdiff/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "geomdiff/gp_oracle.hpp"
#include "json.hpp"

namespace geomdiff {

namespace {

const std::pair<TaskKind, const char*> kTaskNames[] = {
    {TaskKind::se, "se"},
    {TaskKind::matern52, "matern52"},
    {TaskKind::weakly_periodic, "weakly_periodic"},
    {TaskKind::sawtooth, "sawtooth"},
    {TaskKind::mixture, "mixture"},
    {TaskKind::vec_se, "vec_se"},
    {TaskKind::vec_curlfree, "vec_curlfree"},
    {TaskKind::vec_divfree, "vec_divfree"},
};

constexpr double kOneDimNoise = 0.05 * 0.05;
constexpr double kOneDimLengthscale = 0.25;
constexpr double kVectorLengthscale = 2.2360679774997898;  // √5

constexpr TaskKind kMixtureComponents[] = {TaskKind::se, TaskKind::matern52, TaskKind::weakly_periodic,
                                           TaskKind::sawtooth};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PointSet uniform_inputs(std::size_t n, double lo, double hi, RngStream& rng) {
  PointSet x(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.uniform(lo, hi);
  return x;
}

FunctionSample sample_scalar_path(TaskKind task, const DatasetSpec& spec, RngStream& rng) {
  FunctionSample path;
  path.task = task;
  path.x = uniform_inputs(spec.points_per_path, spec.input_lo, spec.input_hi, rng);
  if (task == TaskKind::sawtooth) {
    const double freq = rng.uniform(kSawtoothFreqLo, kSawtoothFreqHi);
    const double phase = rng.uniform();
    path.y.resize(path.x.rows());
    for (Eigen::Index i = 0; i < path.x.rows(); ++i) {
      const double u = freq * path.x(i, 0) + phase;
      path.y(i) = u - std::floor(u);
    }
    return path;
  }
  const double noise = spec.noise_var >= 0.0 ? spec.noise_var : kOneDimNoise;
  path.y = gp_sample(task_kernel(task), MeanSpec::zero(), path.x, noise, rng);
  return path;
}

}  // namespace

std::string to_string(TaskKind t) {
  for (const auto& [k, name] : kTaskNames)
    if (k == t) return name;
  return "unknown";
}

TaskKind task_from_string(const std::string& name) {
  for (const auto& [k, n] : kTaskNames)
    if (name == n) return k;
  throw ConfigError("unknown task '" + name + "'");
}

bool is_vector_task(TaskKind t) {
  return t == TaskKind::vec_se || t == TaskKind::vec_curlfree || t == TaskKind::vec_divfree;
}

bool is_gaussian_task(TaskKind t) { return t != TaskKind::sawtooth && t != TaskKind::mixture; }

void DatasetSpec::validate() const {
  if (n_paths == 0) throw ConfigError("dataset: n_paths must be > 0");
  if (is_vector_task(task)) {
    if (grid_size < 2) throw ConfigError("dataset: grid_size must be >= 2");
    if (!(grid_extent > 0.0) || !(disk_radius > 0.0)) throw ConfigError("dataset: grid extent and radius must be > 0");
  } else {
    if (points_per_path == 0) throw ConfigError("dataset: points_per_path must be > 0");
    if (!(input_hi > input_lo)) throw ConfigError("dataset: empty input range");
  }
}

double DatasetSpec::effective_noise_var() const {
  if (noise_var >= 0.0) return noise_var;
  if (is_vector_task(task) || task == TaskKind::sawtooth) return 0.0;
  return kOneDimNoise;
}

KernelSpec task_kernel(TaskKind t) {
  KernelSpec k;
  switch (t) {
    case TaskKind::se:
      return KernelSpec::se(1.0, kOneDimLengthscale);
    case TaskKind::matern52:
      k.family = KernelFamily::matern52;
      k.lengthscale = kOneDimLengthscale;
      return k;
    case TaskKind::weakly_periodic:
      k.family = KernelFamily::weakly_periodic;
      k.lengthscale = 0.5;
      k.period = 0.25;
      k.envelope_lengthscale = 1.0;
      return k;
    case TaskKind::vec_se:
      k.family = KernelFamily::diagonal;
      k.base = KernelFamily::squared_exponential;
      break;
    case TaskKind::vec_curlfree:
      k.family = KernelFamily::curl_free;
      break;
    case TaskKind::vec_divfree:
      k.family = KernelFamily::div_free;
      break;
    default:
      throw ConfigError("task " + to_string(t) + " has no generating kernel");
  }
  k.variance = 1.0;
  k.lengthscale = kVectorLengthscale;
  k.input_dim = 2;
  k.output_dim = 2;
  return k;
}

PointSet disk_grid(int size, double extent, double radius) {
  if (size < 2) throw ConfigError("disk_grid: size must be >= 2");
  std::vector<std::pair<double, double>> pts;
  const double step = 2.0 * extent / (size - 1);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double a = -extent + step * i;
      const double b = -extent + step * j;
      if (a * a + b * b <= radius * radius * (1.0 + 1e-12)) pts.emplace_back(a, b);
    }
  PointSet x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t r = 0; r < pts.size(); ++r) {
    x(static_cast<Eigen::Index>(r), 0) = pts[r].first;
    x(static_cast<Eigen::Index>(r), 1) = pts[r].second;
  }
  return x;
}

std::vector<FunctionSample> generate(const DatasetSpec& spec) {
  spec.validate();
  const RngStream root(spec.seed);
  std::vector<FunctionSample> paths(spec.n_paths);
  if (is_vector_task(spec.task)) {
    const PointSet x = disk_grid(spec.grid_size, spec.grid_extent, spec.disk_radius);
    Matrix k = gram(task_kernel(spec.task), x);
    k.diagonal().array() += spec.effective_noise_var();
    const CholeskyFactor chol = cholesky_with_jitter(k);
    const Vector mean = Vector::Zero(k.rows());
    for (std::size_t i = 0; i < spec.n_paths; ++i) {
      RngStream rng = root.split(i);
      paths[i] = {x, mvn_sample(mean, chol, rng), spec.task};
    }
    return paths;
  }
  parallel_for(spec.n_paths, [&](std::size_t i) {
    RngStream rng = root.split(i);
    TaskKind task = spec.task;
    if (task == TaskKind::mixture) task = kMixtureComponents[rng.uniform_index(std::size(kMixtureComponents))];
    paths[i] = sample_scalar_path(task, spec, rng);
  });
  return paths;
}

DatasetSpec generalisation_spec(DatasetSpec spec) {
  spec.input_lo = 2.0;
  spec.input_hi = 6.0;
  return spec;
}

FunctionSample subset(const FunctionSample& path, const std::vector<int>& index) {
  const Eigen::Index n = path.x.rows();
  require_dims(n > 0 && path.y.size() % n == 0, "subset: inconsistent path");
  const Eigen::Index d = path.y.size() / n;
  FunctionSample out;
  out.task = path.task;
  out.x.resize(static_cast<Eigen::Index>(index.size()), path.x.cols());
  out.y.resize(static_cast<Eigen::Index>(index.size()) * d);
  for (std::size_t r = 0; r < index.size(); ++r) {
    require_dims(index[r] >= 0 && index[r] < n, "subset: index out of range");
    const auto row = static_cast<Eigen::Index>(r);
    out.x.row(row) = path.x.row(index[r]);
    out.y.segment(row * d, d) = path.y.segment(index[r] * d, d);
  }
  return out;
}

ContextTargetSplit split_context_target(const FunctionSample& path, int min_context, int max_context, int n_target,
                                        RngStream& rng) {
  if (min_context < 0 || max_context < min_context) throw ConfigError("split: invalid context range");
  if (n_target < 0) throw ConfigError("split: n_target must be >= 0");
  const int n = static_cast<int>(path.x.rows());
  const int n_context =
      min_context + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_context - min_context + 1)));
  if (n_context + n_target > n) throw ConfigError("split: path has too few points");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[rng.uniform_index(static_cast<std::size_t>(i + 1))]);
  ContextTargetSplit s;
  s.context_index.assign(order.begin(), order.begin() + n_context);
  s.target_index.assign(order.begin() + n_context, order.begin() + n_context + n_target);
  const FunctionSample c = subset(path, s.context_index);
  const FunctionSample t = subset(path, s.target_index);
  s.context_x = c.x;
  s.context_y = c.y;
  s.target_x = t.x;
  s.target_y = t.y;
  return s;
}

void write_dataset(const std::string& dir, const DatasetSpec& spec, const std::vector<FunctionSample>& paths) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "geomdiff-dataset";
  manifest["version"] = 1;
  manifest["task"] = to_string(spec.task);
  manifest["seed"] = spec.seed;
  manifest["n_paths"] = paths.size();
  manifest["noise_var"] = spec.effective_noise_var();
  if (is_vector_task(spec.task)) {
    manifest["grid"] = {{"size", spec.grid_size}, {"extent", spec.grid_extent}, {"disk_radius", spec.disk_radius}};
  } else {
    manifest["points_per_path"] = spec.points_per_path;
    manifest["input_range"] = {spec.input_lo, spec.input_hi};
  }
  if (is_gaussian_task(spec.task)) {
    const KernelSpec k = task_kernel(spec.task);
    manifest["kernel"] = {{"family", to_string(k.family)},
                          {"variance", k.variance},
                          {"lengthscale", k.lengthscale},
                          {"period", k.period},
                          {"envelope_lengthscale", k.envelope_lengthscale}};
  }
  if (spec.task == TaskKind::weakly_periodic || spec.task == TaskKind::sawtooth || spec.task == TaskKind::mixture)
    manifest["local_choices"] = {{"weakly_periodic", {{"period", 0.25}, {"lengthscale", 0.5}, {"envelope_lengthscale", 1.0}}},
                                 {"sawtooth", {{"frequency", {kSawtoothFreqLo, kSawtoothFreqHi}}, {"phase", {0.0, 1.0}}}}};
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const FunctionSample& p = paths[i];
    char name[32];
    std::snprintf(name, sizeof name, "path_%05zu.csv", i);
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw std::runtime_error(std::string("cannot write ") + name);
    const Eigen::Index n = p.x.rows();
    const Eigen::Index d = n > 0 ? p.y.size() / n : 0;
    for (Eigen::Index c = 0; c < p.x.cols(); ++c) out << (c ? "," : "") << "x" << c;
    for (Eigen::Index c = 0; c < d; ++c) out << ",y" << c;
    out << "\n";
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < p.x.cols(); ++c) out << (c ? "," : "") << format_double(p.x(r, c));
      for (Eigen::Index c = 0; c < d; ++c) out << "," << format_double(p.y(r * d + c));
      out << "\n";
    }
    files.push_back({{"file", name}, {"task", to_string(p.task)}});
  }
  manifest["paths"] = std::move(files);
  std::ofstream m(fs::path(dir) / "manifest.json");
  m << manifest.dump(2) << "\n";
}

std::vector<FunctionSample> read_dataset(const std::string& dir, DatasetSpec* spec) {
  namespace fs = std::filesystem;
  std::ifstream m(fs::path(dir) / "manifest.json");
  if (!m) throw ConfigError("dataset: missing manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset manifest: ") + e.what());
  }
  if (spec != nullptr) {
    spec->task = task_from_string(manifest.at("task").get<std::string>());
    spec->seed = manifest.at("seed").get<std::uint64_t>();
    spec->n_paths = manifest.at("n_paths").get<std::size_t>();
    spec->noise_var = manifest.at("noise_var").get<double>();
    if (manifest.contains("grid")) {
      spec->grid_size = manifest["grid"].at("size").get<int>();
      spec->grid_extent = manifest["grid"].at("extent").get<double>();
      spec->disk_radius = manifest["grid"].at("disk_radius").get<double>();
    }
    if (manifest.contains("points_per_path")) {
      spec->points_per_path = manifest["points_per_path"].get<std::size_t>();
      spec->input_lo = manifest["input_range"][0].get<double>();
      spec->input_hi = manifest["input_range"][1].get<double>();
    }
  }
  std::vector<FunctionSample> paths;
  for (const auto& entry : manifest.at("paths")) {
    const std::string name = entry.at("file").get<std::string>();
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw ConfigError("dataset: missing " + name);
    std::string line;
    std::getline(in, line);
    Eigen::Index xdim = 0, ydim = 0;
    {
      std::stringstream hs(line);
      std::string col;
      while (std::getline(hs, col, ',')) (col[0] == 'x' ? xdim : ydim)++;
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string cell;
      std::vector<double> row;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      if (static_cast<Eigen::Index>(row.size()) != xdim + ydim) throw ConfigError("dataset: malformed row in " + name);
      rows.push_back(std::move(row));
    }
    FunctionSample p;
    p.task = task_from_string(entry.at("task").get<std::string>());
    p.x.resize(static_cast<Eigen::Index>(rows.size()), xdim);
    p.y.resize(static_cast<Eigen::Index>(rows.size()) * ydim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      for (Eigen::Index c = 0; c < xdim; ++c) p.x(ri, c) = rows[r][static_cast<std::size_t>(c)];
      for (Eigen::Index c = 0; c < ydim; ++c) p.y(ri * ydim + c) = rows[r][static_cast<std::size_t>(xdim + c)];
    }
    paths.push_back(std::move(p));
  }
  return paths;
}

}  // namespace geomdiff
