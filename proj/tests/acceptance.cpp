#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "geomdiff/conditioning.hpp"
#include "geomdiff/gp_oracle.hpp"
#include "geomdiff/likelihood.hpp"
#include "geomdiff/symmetry.hpp"
#include "geomdiff/training.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace geomdiff;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAILED]");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

PointSet uniform_inputs(int n, double lo, double hi, RngStream& rng) {
  PointSet x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform(lo, hi);
  return x;
}

// Largest |mean error| in units of the Monte Carlo standard error.
double mean_z(const GaussianFit& fit, const Vector& mean, const Matrix& cov) {
  double z = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    z = std::max(z, std::abs(fit.mean(i) - mean(i)) / std::sqrt(cov(i, i) / static_cast<double>(fit.count)));
  return z;
}

void forward_moments(Outcome& o) {
  const DiffusionSchedule sched;
  const PointSet x = (PointSet(4, 1) << -0.9, -0.3, 0.4, 1.0).finished();
  const Matrix k = gram(KernelSpec::se(1.0, 0.8), x);
  const Matrix root = cholesky_with_jitter(k).lower;
  const Vector m = Vector::Constant(4, 0.3);
  const Vector y0 = (Vector(4) << 1.5, -0.5, 0.8, -1.2).finished();
  const int paths = 20000, steps = 2000;
  const double h = sched.horizon / steps;
  RngStream rng(1);
  Matrix y = y0.replicate(1, paths);
  const std::map<int, double> probes = {{200, 0.1}, {600, 0.3}, {steps, 1.0}};
  for (int s = 1; s <= steps; ++s) {
    const double b = sched.beta((s - 1) * h);
    Matrix z(4, paths);
    for (int j = 0; j < paths; ++j) z.col(j) = rng.normal_vector(4);
    y += 0.5 * b * h * ((-y).colwise() + m) + std::sqrt(b * h) * (root * z);
    if (auto it = probes.find(s); it != probes.end()) {
      const TransitionMoments tm = transition_moments(sched, it->second, y0, m, k);
      const GaussianFit fit = fit_gaussian(y);
      const double mz = mean_z(fit, tm.mean, tm.covariance);
      const double ce = max_normalized_cov_error(fit.covariance, tm.covariance);
      o.require(mz < 3.0 && ce < 0.05, "t=" + fmt(it->second) + " mean z " + fmt(mz) + " cov err " + fmt(ce));
    }
  }
}

void conditional_score(Outcome& o) {
  const DiffusionSchedule sched;
  RngStream rng(2);
  double worst_cond = 0.0, worst_marg = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const PointSet x = uniform_inputs(n, -2.0, 2.0, rng);
    const Matrix k = gram(KernelSpec::se(1.0, 0.7), x) + 0.05 * Matrix::Identity(n, n);
    const Vector m = rng.normal_vector(n), y0 = rng.normal_vector(n), yt = rng.normal_vector(n);
    const double t = rng.uniform(0.05, 1.0);
    const TransitionMoments tm = transition_moments(sched, t, y0, m, k);
    const Vector got = geomdiff::conditional_score(sched, t, yt, y0, m, cholesky_with_jitter(k));
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return oracle::gaussian_logpdf(v, tm.mean, tm.covariance); }, yt);
    worst_cond = std::max(worst_cond, (got - fd).norm() / fd.norm());

    const Matrix s0 = 0.25 * k;
    const Vector m0 = rng.normal_vector(n);
    const MarginalMoments mm = marginal_moments(sched, t, m0, s0, m, k);
    const Vector ks = exact_marginal_score(sched, t, yt, m0, s0, m, k);
    const Vector fdm = k * oracle::fd_gradient([&](const Vector& v) { return oracle::gaussian_logpdf(v, mm.mean, mm.covariance); }, yt);
    worst_marg = std::max(worst_marg, (ks - fdm).norm() / fdm.norm());
  }
  o.require(worst_cond < 1e-5, "conditional score rel err " + fmt(worst_cond));
  o.require(worst_marg < 1e-5, "preconditioned marginal score rel err " + fmt(worst_marg));
}

void parametrizations(Outcome& o) {
  const DiffusionSchedule sched;
  RngStream rng(3);
  double loss_err = 0.0, map_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PointSet x = uniform_inputs(4, -2.0, 2.0, rng);
    const Matrix k = gram(KernelSpec::se(1.0, 0.8), x) + 0.05 * Matrix::Identity(4, 4);
    const CholeskyFactor s = cholesky_with_jitter(k);
    const Vector m = rng.normal_vector(4), y0 = rng.normal_vector(4), z = rng.normal_vector(4);
    const double t = rng.uniform(0.02, 1.0), sigma = sched.sigma(t), s2 = sigma * sigma;
    const Vector yt = transition_moments(sched, t, y0, m, k).mean + sigma * (s.lower * z);
    // Λ-weighted definitional loss ‖D − target‖²_Λ against ∇log p_{t|0} from a dense inverse.
    const Vector g = -(s2 * k).inverse() * (yt - transition_moments(sched, t, y0, m, k).mean);
    const Vector d = rng.normal_vector(4);
    loss_err = std::max(loss_err, std::abs(dsm_loss({ParamKind::none}, d, y0, z, sigma, s) - s2 * (d - g).dot(k * (d - g))));
    loss_err = std::max(loss_err, std::abs(dsm_loss({ParamKind::precond_K}, d, y0, z, sigma, s) - s2 * (d - k * g).squaredNorm()));
    loss_err = std::max(loss_err, std::abs(dsm_loss({ParamKind::precond_ST}, d, y0, z, sigma, s) -
                                           s2 * (d - s.lower.transpose() * g).squaredNorm()));
    loss_err = std::max(loss_err, std::abs(dsm_loss({ParamKind::predict_Y0}, d, y0, z, sigma, s) - (d - y0).squaredNorm()));

    const Vector m0 = rng.normal_vector(4);
    const Vector e = exact_marginal_score(sched, t, yt, m0, 0.3 * k, m, k);
    const double dec = sched.decay(t);
    const std::pair<ParamKind, Vector> reps[] = {{ParamKind::none, k.fullPivLu().solve(e)},
                                                 {ParamKind::precond_K, e},
                                                 {ParamKind::precond_ST, s.lower.triangularView<Eigen::Lower>().solve(e)},
                                                 {ParamKind::predict_Y0, (yt + s2 * e - (1.0 - dec) * m) / dec}};
    for (const auto& [kind, rep] : reps) {
      const Vector got = to_preconditioned_score({kind}, rep, t, yt, sched, k, s, m);
      map_err = std::max(map_err, (got - e).lpNorm<Eigen::Infinity>() / std::max(1.0, e.lpNorm<Eigen::Infinity>()));
    }
  }
  o.require(loss_err < 1e-10, "loss identity err " + fmt(loss_err));
  o.require(map_err < 1e-9, "score map disagreement " + fmt(map_err));
}

void generative_fidelity(Outcome& o) {
  const DiffusionSchedule sched;
  const PointSet x = (PointSet(5, 1) << -1.2, -0.5, 0.0, 0.6, 1.3).finished();
  const KernelSpec kern = KernelSpec::se(1.0, 0.8);
  const Matrix k = gram(kern, x) + 1e-6 * Matrix::Identity(5, 5);
  const Matrix s0 = 0.25 * k;
  const Vector m0 = Vector::LinSpaced(5, -0.5, 0.5);
  FixedGaussianScore score(m0, s0, Vector::Zero(5), k, sched);
  auto bound = score.bind(x);
  const LimitingGaussian prior{Vector::Zero(5), k, cholesky_with_jitter(k).lower};
  SdeRunConfig cfg;
  cfg.steps = 1000;
  const GaussianFit fit = fit_gaussian(reverse_sde_sample_batch(*bound, prior, sched, cfg, RngStream(4), 10000));
  const double mz = mean_z(fit, m0, s0), ce = max_normalized_cov_error(fit.covariance, s0);
  o.require(mz < 3.0, "mean z " + fmt(mz));
  o.require(ce < 0.07, "cov err " + fmt(ce));
}

void likelihood_oracle(Outcome& o) {
  const DiffusionSchedule sched;
  const KernelSpec data = KernelSpec::se(1.0, 0.5);
  const double noise = 0.05 * 0.05;
  ExactGaussianScore score({data, MeanSpec::zero(), noise}, KernelSpec::white(), MeanSpec::zero(), sched);
  OdeConfig cfg;
  cfg.steps = 1000;
  RngStream rng(5);
  double joint_err = 0.0, cond_err = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    const PointSet x = uniform_inputs(6, -2.0, 2.0, rng);
    const Vector y = gp_sample(data, MeanSpec::zero(), x, noise, rng);
    const double ll = log_likelihood(score, KernelSpec::white(), MeanSpec::zero(), x, y, sched, cfg);
    const Matrix cov = gram(data, x) + noise * Matrix::Identity(6, 6);
    joint_err = std::max(joint_err, std::abs(ll - oracle::gaussian_logpdf(y, Vector::Zero(6), cov)));
    const double cl = conditional_log_likelihood(score, KernelSpec::white(), MeanSpec::zero(), x.topRows(3), y.head(3),
                                                 x.bottomRows(3), y.tail(3), sched, cfg);
    const oracle::Posterior post = oracle::condition(cov, Vector::Zero(6), y.head(3), 3);
    cond_err = std::max(cond_err, std::abs(cl - oracle::gaussian_logpdf(y.tail(3), post.mean, post.cov)));
  }
  o.require(joint_err < 1e-2, "joint err " + fmt(joint_err) + " nats");
  o.require(cond_err < 2e-2, "conditional err " + fmt(cond_err) + " nats");
}

void hutchinson(Outcome& o) {
  const DiffusionSchedule sched;
  const KernelSpec data = KernelSpec::se(1.0, 0.5);
  ExactGaussianScore score({data, MeanSpec::zero(), 0.01}, KernelSpec::white(), MeanSpec::zero(), sched);
  RngStream rng(6);
  const PointSet x = uniform_inputs(8, -2.0, 2.0, rng);
  auto bound = score.bind(x);
  const Vector y = rng.normal_vector(8);
  const double t = 0.2;
  const Matrix jac = oracle::fd_jacobian([&](const Vector& v) { return bound->evaluate(t, v); }, y);
  const double exact = bound->jacobian_trace(t, y);
  const Matrix sym = 0.5 * (jac + jac.transpose());
  // Var zᵀAz for Rademacher z is 2 Σ_{i≠j} A_ij² of the symmetric part.
  const double var1 = 2.0 * (sym.squaredNorm() - sym.diagonal().squaredNorm());
  const int draws = 200;
  for (int probes : {1, 8, 64}) {
    std::vector<double> est;
    for (int i = 0; i < draws; ++i) est.push_back(hutchinson_trace(*bound, t, y, rademacher_probes(8, probes, rng)));
    double mean = 0.0, var = 0.0;
    for (double e : est) mean += e / draws;
    for (double e : est) var += (e - mean) * (e - mean) / (draws - 1);
    if (probes == 8) {
      const double z = std::abs(mean - exact) / std::sqrt(var / draws);
      o.require(z < 3.0, "8-probe bias " + fmt(z) + " SE");
    }
    const double ratio = var * probes / var1;
    o.require(ratio > 0.7 && ratio < 1.4, "var*probes/var1 at " + std::to_string(probes) + " = " + fmt(ratio));
  }
}

struct SplitTask {
  ConditioningTask task;
  GpPosterior posterior;
};

void conditional_kl(Outcome& o) {
  const fs::path dir = fs::temp_directory_path() / "geomdiff_acceptance_7";
  fs::remove_all(dir);
  const std::vector<std::vector<std::string>> runs = {
      {"condition", "--scheme", "resample_every_inner,resample_every_outer,sde_path_noise", "--inner-steps", "5,25"},
      {"condition", "--scheme", "no_noise", "--inner-steps", "0"}};
  std::vector<nlohmann::json> rows;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<std::string> args = {"geomdiff", "--seed", "0", "--out", (dir / std::to_string(r)).string()};
    args.insert(args.end(), runs[r].begin(), runs[r].end());
    args.insert(args.end(), {"--budget", "5000", "--samples", "4096", "--n-context", "3", "--n-target", "10"});
    if (cli::dispatch(args) != cli::ok) {
      o.require(false, "condition run failed");
      return;
    }
    std::ifstream in(dir / std::to_string(r) / "kl.json");
    for (const auto& row : nlohmann::json::parse(in)) rows.push_back(row);
  }
  fs::remove_all(dir);
  double baseline = 0.0, worst = 0.0;
  for (const auto& row : rows) {
    if (row["scheme"] == "no_noise") baseline = row["kl_nats"].get<double>();
  }
  for (const auto& row : rows) {
    if (row["scheme"] == "no_noise") continue;
    const double kl = row["kl_nats"].get<double>();
    worst = std::max(worst, kl);
    o.require(kl < 0.1, row["scheme"].get<std::string>() + " L=" + std::to_string(row["L"].get<int>()) + " KL " + fmt(kl));
  }
  o.require(baseline > worst, "no_noise L=0 KL " + fmt(baseline));
}

void repaint(Outcome& o) {
  double worst = 0.0;
  for (double g : {1e-3, 1e-2, 1e-1}) {
    const RepaintCoefficients c = repaint_langevin_coefficients(g);
    worst = std::max(worst, std::abs(c.drift_scale - 2.0 * (1.0 - std::exp(-g))));
    worst = std::max(worst, std::abs(c.noise_scale - std::sqrt(2.0) * std::sqrt(1.0 - std::exp(-2.0 * g))));
  }
  o.require(worst < 1e-12, "coefficient err " + fmt(worst));

  DatasetSpec spec;
  spec.n_paths = 1;
  spec.points_per_path = 6;
  spec.seed = 11;
  const FunctionSample path = generate(spec).front();
  RngStream split_rng(5);
  const ContextTargetSplit split = split_context_target(path, 3, 3, 3, split_rng);
  const GaussianDataModel data{task_kernel(TaskKind::se), MeanSpec::zero(), spec.effective_noise_var()};
  const DiffusionSchedule sched;
  ExactGaussianScore score(data, KernelSpec::white(), MeanSpec::zero(), sched);
  ConditioningTask task;
  task.context_x = split.context_x;
  task.context_y = split.context_y;
  task.target_x = split.target_x;
  task.outer_steps = 200;
  auto bound = score.bind(task.joint_inputs());
  const LimitingGaussian prior = limiting_gaussian(KernelSpec::white(), MeanSpec::zero(), task.joint_inputs());
  const std::size_t n = 4096;
  // One RePaint cycle of L reverse/forward pairs spends one reverse step and L − 1 Langevin corrections.
  task.inner_steps = 5;
  const GaussianFit a = fit_gaussian(repaint_sample_batch(*bound, prior, sched, task, RngStream(1), n).samples);
  task.inner_steps = 4;
  const GaussianFit b = fit_gaussian(conditional_sample_batch(*bound, prior, sched, task, RngStream(2), n).samples);
  double zm = 0.0, zc = 0.0;
  for (Eigen::Index i = 0; i < 3; ++i) {
    zm = std::max(zm, std::abs(a.mean(i) - b.mean(i)) / std::sqrt((a.covariance(i, i) + b.covariance(i, i)) / n));
    for (Eigen::Index j = 0; j < 3; ++j) {
      auto v = [&](const GaussianFit& f) {
        return f.covariance(i, i) * f.covariance(j, j) + f.covariance(i, j) * f.covariance(i, j);
      };
      zc = std::max(zc, std::abs(a.covariance(i, j) - b.covariance(i, j)) / std::sqrt((v(a) + v(b)) / (n - 1)));
    }
  }
  o.require(zm < 4.0, "mean diff " + fmt(zm) + " SE");
  o.require(zc < 4.0, "cov diff " + fmt(zc) + " SE");
}

DiffusionSetup vector_setup() {
  DiffusionSetup s;
  s.limit_kernel = KernelSpec::white(1.0, 2, 2);
  s.limit_mean = MeanSpec::zero(2);
  return s;
}

NetworkConfig vector_network(Architecture a) {
  NetworkConfig c;
  c.architecture = a;
  c.input_dim = 2;
  c.output_dim = 2;
  c.depth = 2;
  c.width = 32;
  c.position_scale = 10.0;
  return c;
}

void symmetry(Outcome& o) {
  RngStream rng(9);
  for (TaskKind t : {TaskKind::vec_se, TaskKind::vec_curlfree, TaskKind::vec_divfree}) {
    const double dev = check_kernel_equivariance(task_kernel(t), 50, rng);
    o.require(dev < 1e-10, to_string(t) + " kernel " + fmt(dev));
  }
  KernelSpec ard = KernelSpec::se(1.0, 1.0, 2, 2);
  ard.ard_lengthscales = {0.5, 2.0};
  const double ard_dev = check_kernel_equivariance(ard, 50, rng);
  o.require(ard_dev > 1e-3, "anisotropic control " + fmt(ard_dev));

  const DiffusionSchedule sched;
  ExactGaussianScore exact({task_kernel(TaskKind::vec_divfree), MeanSpec::zero(2), 0.0}, KernelSpec::se(1.0, 2.0, 2, 2),
                           MeanSpec::zero(2), sched);
  EquivarianceProbe probe;
  probe.trials = 50;
  probe.points = 4;
  const double es = check_score_equivariance(
      [&](double t, const PointSet& x, const Vector& y) { return exact.evaluate(t, x, y); }, 2, 2, probe, rng);
  o.require(es < 1e-9, "exact score " + fmt(es));

  DatasetSpec ds;
  ds.task = TaskKind::vec_divfree;
  ds.n_paths = 16;
  const auto data = generate(ds);
  TrainConfig tc;
  tc.steps = 100;
  tc.lr.warmup_steps = 10;
  tc.subset_min = tc.subset_max = 20;
  probe.trials = 10;
  probe.points = 6;
  for (Architecture a : {Architecture::egnn_equivariant, Architecture::mlp, Architecture::biattention}) {
    RngStream init(20 + static_cast<int>(a));
    auto net = make_network(vector_network(a), init);
    auto f = [&](double t, const PointSet& x, const Vector& y) { return stack(net->evaluate(t, x, unstack(y, 2))); };
    for (const char* stage : {"untrained", "trained"}) {
      if (std::string(stage) == "trained") train_dsm(*net, data, vector_setup(), tc);
      const double perm = check_permutation_equivariance(f, 2, 2, probe, rng);
      o.require(perm < 1e-12, to_string(a) + " " + stage + " permutation " + fmt(perm));
      if (a == Architecture::biattention) continue;
      const double eq = check_score_equivariance(f, 2, 2, probe, rng);
      if (a == Architecture::egnn_equivariant)
        o.require(eq < 1e-5, std::string("egnn ") + stage + " " + fmt(eq));
      else
        o.require(eq > 1e-2, std::string("mlp control ") + stage + " " + fmt(eq));
    }
  }
}

void div_curl(Outcome& o) {
  RngStream rng(10);
  double div = 0.0, curl = 0.0, diag = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector x = 2.0 * rng.normal_vector(2), xp = 2.0 * rng.normal_vector(2), v = rng.normal_vector(2);
    div = std::max(div, std::abs(divergence_of_kernel_column(task_kernel(TaskKind::vec_divfree), xp, v, x)));
    curl = std::max(curl, std::abs(divergence_of_kernel_column(task_kernel(TaskKind::vec_curlfree), xp, v, x)));
    diag = std::max(diag, std::abs(divergence_of_kernel_column(task_kernel(TaskKind::vec_se), xp, v, x)));
  }
  o.require(div < 1e-5, "div-free divergence " + fmt(div));
  o.require(curl < 1e-5, "curl-free curl " + fmt(curl));
  o.require(diag > 1e-3, "diagonal control divergence " + fmt(diag));
}

void training_target_a(Outcome& o) {
  DatasetSpec ds;
  ds.task = TaskKind::se;
  ds.n_paths = 1024;
  ds.seed = 1;
  const auto train = generate(ds);
  DatasetSpec hs = ds;
  hs.seed = 2;
  hs.n_paths = 32;
  const auto held = generate(hs);

  NetworkConfig c;
  c.architecture = Architecture::biattention;
  c.depth = 3;
  c.width = 64;
  RngStream init(3);
  std::shared_ptr<ScoreNetwork> net = make_network(c, init);
  DiffusionSetup setup;
  setup.limit_kernel = KernelSpec::white();
  setup.limit_mean = MeanSpec::zero();
  setup.param = {ParamKind::precond_K};

  const double before = evaluate_dsm_loss(*net, held, setup, 512, 4);
  TrainConfig tc;
  tc.steps = 10000;
  tc.seed = 5;
  train_dsm(*net, train, setup, tc);
  const double after = evaluate_dsm_loss(*net, held, setup, 512, 4);
  o.require(after < 0.5 * before, "held-out DSM loss " + fmt(before) + " -> " + fmt(after));

  NetworkScore model(net, setup.param, setup.limit_kernel, setup.limit_mean, setup.schedule);
  const GaussianDataModel data{task_kernel(TaskKind::se), MeanSpec::zero(), ds.effective_noise_var()};
  OdeConfig ode;
  ode.steps = 100;
  const DivergenceMode div{DivergenceKind::hutchinson, 8};
  RngStream rng(6);
  double model_tll = 0.0, diag_tll = 0.0, gp_tll = 0.0;
  std::size_t targets = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const ContextTargetSplit s = split_context_target(held[i], 1, 10, 50, rng);
    model_tll += conditional_log_likelihood(model, setup.limit_kernel, setup.limit_mean, s.context_x, s.context_y,
                                            s.target_x, s.target_y, setup.schedule, ode, div, i);
    GpPosterior post = gp_condition(data.kernel, data.mean, s.context_x, s.context_y, s.target_x, data.noise_var);
    gp_tll += gp_posterior_logpdf(post, s.target_y);
    post.covariance = Matrix(post.covariance.diagonal().asDiagonal());
    diag_tll += gp_posterior_logpdf(post, s.target_y);
    targets += static_cast<std::size_t>(s.target_y.size());
  }
  const double scale = 1.0 / static_cast<double>(targets);
  o.require(model_tll * scale >= diag_tll * scale + 0.2, "TLL per target model " + fmt(model_tll * scale) + " diagonal GP " +
                                                             fmt(diag_tll * scale) + " (GP " + fmt(gp_tll * scale) + ")");
}

void training_target_b(Outcome& o) {
  for (int seed = 0; seed < 3; ++seed) {
    DatasetSpec ds;
    ds.task = TaskKind::vec_divfree;
    ds.n_paths = 64;
    ds.seed = 100 + static_cast<std::uint64_t>(seed);
    const auto train = generate(ds);
    DatasetSpec hs = ds;
    hs.seed = 900 + static_cast<std::uint64_t>(seed);
    hs.n_paths = 32;
    const auto held = generate(hs);
    std::map<Architecture, double> loss;
    for (Architecture a : {Architecture::egnn_equivariant, Architecture::biattention}) {
      RngStream init(static_cast<std::uint64_t>(seed));
      auto net = make_network(vector_network(a), init);
      TrainConfig tc;
      tc.steps = 1500;
      tc.lr.warmup_steps = 150;
      tc.subset_min = tc.subset_max = 20;
      tc.seed = static_cast<std::uint64_t>(seed);
      train_dsm(*net, train, vector_setup(), tc);
      loss[a] = evaluate_dsm_loss(*net, held, vector_setup(), 512, 9, 20);
    }
    o.require(loss[Architecture::egnn_equivariant] < loss[Architecture::biattention],
              "seed " + std::to_string(seed) + " egnn " + fmt(loss[Architecture::egnn_equivariant]) + " biattention " +
                  fmt(loss[Architecture::biattention]));
  }
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

void determinism(Outcome& o) {
  const fs::path base = fs::temp_directory_path() / "geomdiff_acceptance_13";
  auto pipelines = [](const fs::path& root) {
    const std::string r = root.string();
    return std::vector<std::vector<std::string>>{
        {"--out", r + "/data", "data", "gen", "--paths", "4", "--points", "12"},
        {"--out", r + "/train", "train", "--data", r + "/data/dataset", "--steps", "20", "--warmup", "2", "--width",
         "8", "--depth", "1", "--heads", "2", "--plot"},
        {"--out", r + "/sample_exact", "sample", "--count", "4", "--steps", "50", "--n-points", "5", "--trajectory"},
        {"--out", r + "/sample_model", "sample", "--model", r + "/train/model.json", "--count", "2", "--steps", "20",
         "--n-points", "4", "--ode"},
        {"--out", r + "/condition", "condition", "--inner-steps", "0,2", "--budget", "60", "--samples", "16",
         "--n-target", "3", "--repaint"},
        {"--out", r + "/likelihood", "likelihood", "--tasks", "2", "--n-context", "2", "--n-target", "2",
         "--ode-steps", "20"},
        {"--out", r + "/likelihood_hutch", "likelihood", "--model", r + "/train/model.json", "--tasks", "2",
         "--n-context", "2", "--n-target", "2", "--ode-steps", "10", "--divergence", "hutchinson", "--probes", "2"},
        {"--out", r + "/ablate", "ablate", "--steps", "10", "--warmup", "2", "--paths", "8", "--points", "8",
         "--width", "8", "--depth", "1", "--tll-tasks", "1", "--n-context", "2", "--n-target", "2", "--ode-steps",
         "5", "--kernels", "white,se"},
        {"--out", r + "/check", "check", "--trials", "5", "--manifests", r + "/condition"},
        {"--out", r + "/plot", "plot", "--input", r + "/train/loss.csv"},
    };
  };
  std::vector<std::map<std::string, std::string>> trees;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(base);
    for (auto args : pipelines(base)) {
      const std::string name = args[2];
      args.insert(args.begin(), {"geomdiff", "--seed", "7"});
      const int rc = cli::dispatch(args);
      if (rc != cli::ok) o.require(false, name + " exit " + std::to_string(rc));
    }
    trees.push_back(tree_contents(base));
  }
  const auto& a = trees[0];
  const auto& b = trees[1];
  std::size_t differ = 0;
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != bytes) {
      ++differ;
      o.require(false, "differs: " + path);
    }
  }
  o.require(a.size() == b.size() && differ == 0, std::to_string(a.size()) + " files byte-identical");
  fs::remove_all(base);
}

struct Criterion {
  int id;
  std::string name;
  std::function<void(Outcome&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "forward moments", forward_moments},
      {2, "conditional score", conditional_score},
      {3, "parametrization consistency", parametrizations},
      {4, "generative fidelity", generative_fidelity},
      {5, "likelihood oracle", likelihood_oracle},
      {6, "hutchinson estimator", hutchinson},
      {7, "conditional sampler KL", conditional_kl},
      {8, "repaint equivalence", repaint},
      {9, "symmetry suite", symmetry},
      {10, "div/curl property", div_curl},
      {11, "training target A", training_target_a},
      {12, "training target B", training_target_b},
      {13, "CLI determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--criterion", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name << " (" << fmt(secs)
              << " s): " << o.detail.str() << std::endl;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
