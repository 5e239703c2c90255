#include "geomdiff/conditioning.hpp"

#include <cmath>

namespace geomdiff {

namespace {

// Standard normals for every column, drawn column by column from its own stream.
Matrix draw_normals(std::vector<RngStream>& streams, Eigen::Index rows) {
  Matrix z(rows, static_cast<Eigen::Index>(streams.size()));
  for (std::size_t j = 0; j < streams.size(); ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, static_cast<Eigen::Index>(j)) = streams[j].normal();
  return z;
}

std::vector<RngStream> column_streams(const RngStream& rng, std::size_t count) {
  std::vector<RngStream> streams;
  streams.reserve(count);
  for (std::size_t j = 0; j < count; ++j) streams.push_back(rng.split(j));
  return streams;
}

void check_finite(const Matrix& y, const char* where, double t) {
  if (!y.allFinite()) throw NumericError(std::string(where) + ": non-finite state at t = " + std::to_string(t));
}

// Blocks of the joint limiting Gaussian over [context; targets].
struct JointLayout {
  Eigen::Index c = 0;
  Eigen::Index s = 0;
  Vector m_c, m_s;
  Matrix root_c;  // chol K_cc
  Matrix root_s;  // chol K_**
  Matrix k_ss;
  Vector y0_c;

  JointLayout(const LimitingGaussian& prior, const ConditioningTask& task) {
    c = task.context_y.size();
    s = static_cast<Eigen::Index>(prior.dim()) - c;
    require_dims(s > 0, "conditioning: prior dimension does not cover the targets");
    m_c = prior.mean.head(c);
    m_s = prior.mean.tail(s);
    if (c > 0) root_c = cholesky_with_jitter(prior.gram.topLeftCorner(c, c)).lower;
    k_ss = prior.gram.bottomRightCorner(s, s);
    root_s = cholesky_with_jitter(k_ss).lower;
    y0_c = task.context_y;
  }
};

// Context states y^c_t ~ p_t(· | y^c_0) per the noising scheme.
class ContextNoiser {
 public:
  ContextNoiser(const JointLayout& layout, const DiffusionSchedule& schedule, NoiseScheme scheme,
                std::vector<RngStream>& streams, std::size_t& draws)
      : layout_(layout), schedule_(schedule), scheme_(scheme), streams_(streams), draws_(draws) {}

  // Exact forward path sampled backward along `grid`: each state is drawn from the
  // OU bridge between y^c_0 and the previously drawn later state.
  void start_path(const std::vector<double>& grid) {
    grid_ = grid;
    path_index_ = 0;
    if (layout_.c == 0) return;
    const double a = -std::expm1(-schedule_.integral(grid_[0]));
    deviation_ = std::sqrt(a) * (layout_.root_c * draw_normals(streams_, layout_.c));
    ++draws_;
  }

  // Context at grid index k (time grid[k]) or, off the grid, at time t.
  Matrix at(double t, std::size_t k) {
    const auto n = static_cast<Eigen::Index>(streams_.size());
    if (layout_.c == 0) return Matrix(0, n);
    const double decay = schedule_.decay(t);
    const Vector centre = decay * layout_.y0_c + (1.0 - decay) * layout_.m_c;
    switch (scheme_) {
      case NoiseScheme::no_noise:
        return layout_.y0_c.replicate(1, n);
      case NoiseScheme::resample_every_inner:
        return fresh(t, centre);
      case NoiseScheme::resample_every_outer:
        if (t != cached_time_) {
          cached_ = fresh(t, centre);
          cached_time_ = t;
        }
        return cached_;
      case NoiseScheme::sde_path_noise: {
        while (path_index_ < k) advance_path();
        return deviation_.colwise() + centre;
      }
    }
    return cached_;
  }

 private:
  Matrix fresh(double t, const Vector& centre) {
    ++draws_;
    const double sigma = schedule_.sigma(t);
    return (sigma * (layout_.root_c * draw_normals(streams_, layout_.c))).colwise() + centre;
  }

  void advance_path() {
    const double bt = schedule_.integral(grid_[path_index_]);
    const double bs = schedule_.integral(grid_[path_index_ + 1]);
    const double at = -std::expm1(-bt);
    const double as = -std::expm1(-bs);
    const double gap = -std::expm1(-(bt - bs));
    const double coef = std::exp(-0.5 * (bt - bs)) * as / at;
    const double sd = std::sqrt(std::max(0.0, as * gap / at));
    deviation_ = coef * deviation_ + sd * (layout_.root_c * draw_normals(streams_, layout_.c));
    ++draws_;
    ++path_index_;
  }

  const JointLayout& layout_;
  const DiffusionSchedule& schedule_;
  NoiseScheme scheme_;
  std::vector<RngStream>& streams_;
  std::size_t& draws_;
  Matrix cached_;
  double cached_time_ = -1.0;
  std::vector<double> grid_;
  std::size_t path_index_ = 0;
  Matrix deviation_;  // y^c_t − m − e^{−B_t/2}(y^c_0 − m)
};

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix j(top.rows() + bottom.rows(), bottom.cols());
  j.topRows(top.rows()) = top;
  j.bottomRows(bottom.rows()) = bottom;
  return j;
}

void check_prior(BoundScore& score, const LimitingGaussian& prior, const ConditioningTask& task) {
  require_dims(score.dim() == prior.dim(), "conditioning: score/prior dimension mismatch");
  require_dims(prior.dim() % static_cast<std::size_t>(task.context_x.rows() + task.target_x.rows()) == 0,
               "conditioning: prior does not match the joint input set");
}

int output_dim_of(const LimitingGaussian& prior, const ConditioningTask& task) {
  return static_cast<int>(prior.dim() / static_cast<std::size_t>(task.context_x.rows() + task.target_x.rows()));
}

Vector single(BoundScore& bound, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
              const ConditioningTask& task, RngStream& rng, bool repaint) {
  const RngStream sub(rng.next_u64());
  const ConditionalBatch b = repaint ? repaint_sample_batch(bound, prior, schedule, task, sub, 1)
                                     : conditional_sample_batch(bound, prior, schedule, task, sub, 1);
  return b.samples.col(0);
}

}  // namespace

std::string to_string(NoiseScheme s) {
  switch (s) {
    case NoiseScheme::resample_every_inner: return "resample_every_inner";
    case NoiseScheme::resample_every_outer: return "resample_every_outer";
    case NoiseScheme::sde_path_noise: return "sde_path_noise";
    case NoiseScheme::no_noise: return "no_noise";
  }
  return "unknown";
}

NoiseScheme noise_scheme_from_string(const std::string& name) {
  for (NoiseScheme s : kAllSchemes)
    if (to_string(s) == name) return s;
  throw ConfigError("unknown noising scheme '" + name + "'");
}

void ConditioningTask::validate(int output_dim) const {
  if (target_x.rows() == 0) throw ConfigError("conditioning: empty target set");
  if (context_x.rows() > 0 && context_x.cols() != target_x.cols())
    throw ConfigError("conditioning: context and target inputs differ in dimension");
  if (context_y.size() != context_x.rows() * output_dim)
    throw ConfigError("conditioning: context outputs do not match context inputs");
  if (outer_steps < 1) throw ConfigError("conditioning: outer_steps must be >= 1");
  if (inner_steps < 0 || terminal_steps < 0) throw ConfigError("conditioning: step counts must be >= 0");
  if (!(langevin_scale > 0.0)) throw ConfigError("conditioning: langevin_scale must be > 0");
  if (!context_y.allFinite()) throw ConfigError("conditioning: non-finite context outputs");
}

PointSet ConditioningTask::joint_inputs() const {
  if (context_x.rows() == 0) return target_x;
  PointSet x(context_x.rows() + target_x.rows(), target_x.cols());
  x.topRows(context_x.rows()) = context_x;
  x.bottomRows(target_x.rows()) = target_x;
  return x;
}

ConditionalBatch conditional_sample_batch(BoundScore& score, const LimitingGaussian& prior,
                                          const DiffusionSchedule& schedule, const ConditioningTask& task,
                                          const RngStream& rng, std::size_t count) {
  check_prior(score, prior, task);
  task.validate(output_dim_of(prior, task));
  SdeRunConfig run;
  run.steps = task.outer_steps;
  run.eps_clip = task.eps_clip;
  run.validate(schedule);

  const JointLayout lay(prior, task);
  auto streams = column_streams(rng, count);
  ConditionalBatch out;
  ContextNoiser noiser(lay, schedule, task.scheme, streams, out.counters.context_draws);
  const auto grid = reverse_time_grid(schedule, task.outer_steps, run.floor(schedule));
  if (task.scheme == NoiseScheme::sde_path_noise) noiser.start_path(grid);

  const bool block = task.preconditioner == LangevinPreconditioner::target_block;
  CholeskyFactor joint_chol;
  if (block) joint_chol = cholesky_with_jitter(prior.gram);
  const Matrix root_rows = prior.root.bottomRows(lay.s);
  const auto d = static_cast<Eigen::Index>(prior.dim());

  auto langevin = [&](Matrix& y, double t, std::size_t k, double gamma) {
    const Matrix joint = stack_rows(noiser.at(t, k), y);
    const Matrix ks = score.evaluate_batch(t, joint);
    ++out.counters.score_evaluations;
    if (block) {
      const Matrix grad = joint_chol.solve(ks).bottomRows(lay.s);
      y += 0.5 * gamma * (lay.k_ss * grad) + std::sqrt(gamma) * (lay.root_s * draw_normals(streams, lay.s));
    } else {
      y += 0.5 * gamma * ks.bottomRows(lay.s) + std::sqrt(gamma) * (root_rows * draw_normals(streams, d));
    }
    check_finite(y, "conditional_sample", t);
  };

  Matrix y = (lay.root_s * draw_normals(streams, lay.s)).colwise() + lay.m_s;
  double last_gamma = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const double tn = grid[k + 1];
    const double h = t - tn;
    Matrix joint = stack_rows(noiser.at(t, k), y);
    const Matrix ks = score.evaluate_batch(t, joint);
    ++out.counters.score_evaluations;
    reverse_step(joint, ks, draw_normals(streams, d), t, h, prior, schedule, task.integrator);
    y = joint.bottomRows(lay.s);
    check_finite(y, "conditional_sample", t);

    last_gamma = task.langevin_scale * h * schedule.beta(tn);
    for (int l = 0; l < task.inner_steps; ++l) langevin(y, tn, k + 1, last_gamma);
  }
  for (int l = 0; l < task.terminal_steps; ++l) langevin(y, grid.back(), grid.size() - 1, last_gamma);

  out.samples = std::move(y);
  return out;
}

ConditionalBatch repaint_sample_batch(BoundScore& score, const LimitingGaussian& prior,
                                      const DiffusionSchedule& schedule, const ConditioningTask& task,
                                      const RngStream& rng, std::size_t count) {
  check_prior(score, prior, task);
  task.validate(output_dim_of(prior, task));
  if (task.inner_steps < 1) throw ConfigError("repaint: inner_steps must be >= 1");
  SdeRunConfig run;
  run.steps = task.outer_steps;
  run.eps_clip = task.eps_clip;
  run.validate(schedule);

  const JointLayout lay(prior, task);
  auto streams = column_streams(rng, count);
  ConditionalBatch out;
  ContextNoiser noiser(lay, schedule, NoiseScheme::resample_every_inner, streams, out.counters.context_draws);
  const auto grid = reverse_time_grid(schedule, task.outer_steps, run.floor(schedule));
  const auto d = static_cast<Eigen::Index>(prior.dim());

  const Matrix init = (prior.root * draw_normals(streams, d)).colwise() + prior.mean;
  Matrix y = init.bottomRows(lay.s);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const double h = t - grid[k + 1];
    Matrix cycled = y;
    Matrix reversed;
    for (int l = 0; l < task.inner_steps; ++l) {
      Matrix joint = stack_rows(noiser.at(t, k), cycled);
      const Matrix ks = score.evaluate_batch(t, joint);
      ++out.counters.score_evaluations;
      reverse_step(joint, ks, draw_normals(streams, d), t, h, prior, schedule, task.integrator);
      reversed = joint.bottomRows(lay.s);
      const Matrix z = lay.root_s * draw_normals(streams, lay.s);
      if (task.integrator == Integrator::euler_maruyama) {
        const double bh = schedule.beta(t) * h;
        cycled = reversed + 0.5 * bh * ((-reversed).colwise() + lay.m_s) + std::sqrt(bh) * z;
      } else {
        const double db = schedule.integral(t) - schedule.integral(t - h);
        cycled = (std::exp(-0.5 * db) * (reversed.colwise() - lay.m_s)).colwise() + lay.m_s;
        cycled += std::sqrt(-std::expm1(-db)) * z;
      }
      check_finite(cycled, "repaint_sample", t);
    }
    y = reversed;
  }
  out.samples = std::move(y);
  return out;
}

Vector conditional_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                          const DiffusionSchedule& schedule, const ConditioningTask& task, RngStream& rng) {
  task.validate(kernel.output_dim);
  const PointSet x = task.joint_inputs();
  auto bound = score.bind(x);
  return single(*bound, limiting_gaussian(kernel, mean, x), schedule, task, rng, false);
}

Vector repaint_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                      const DiffusionSchedule& schedule, const ConditioningTask& task, RngStream& rng) {
  task.validate(kernel.output_dim);
  const PointSet x = task.joint_inputs();
  auto bound = score.bind(x);
  return single(*bound, limiting_gaussian(kernel, mean, x), schedule, task, rng, true);
}

RepaintCoefficients repaint_langevin_coefficients(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("repaint coefficients: gamma must be > 0");
  // Affine forms over (X, ∇log p, Z₁, Z₂).
  struct Form {
    double x = 0.0, s = 0.0, z1 = 0.0, z2 = 0.0;
  };
  // Backward: X½ = e^{γ}X + 2(e^{γ}−1)∇log p + (e^{2γ}−1)^{1/2} Z₁
  const Form back{std::exp(gamma), 2.0 * std::expm1(gamma), std::sqrt(std::expm1(2.0 * gamma)), 0.0};
  // Forward: X' = e^{−γ}X½ + (1−e^{−2γ})^{1/2} Z₂
  const double f = std::exp(-gamma);
  const Form composed{f * back.x, f * back.s, f * back.z1, std::sqrt(-std::expm1(-2.0 * gamma))};
  RepaintCoefficients c;
  c.state_scale = composed.x;
  c.drift_scale = composed.s;
  c.backward_noise = composed.z1;
  c.forward_noise = composed.z2;
  c.noise_scale = std::hypot(composed.z1, composed.z2);
  return c;
}

SchemeCost scheme_cost(NoiseScheme scheme, int outer_steps, int inner_steps, int terminal_steps) {
  const auto n = static_cast<std::size_t>(outer_steps);
  const auto l = static_cast<std::size_t>(inner_steps);
  const auto e = static_cast<std::size_t>(terminal_steps);
  SchemeCost c;
  c.scheme = scheme;
  c.score_evaluations = n * (l + 1) + e;
  switch (scheme) {
    case NoiseScheme::resample_every_inner:
      c.closed_form_noise = "O(NI)";
      c.simulated_noise = "O(N^2I^2)";
      c.context_draws = n * (l + 1) + e;
      break;
    case NoiseScheme::resample_every_outer:
      c.closed_form_noise = "O(N)";
      c.simulated_noise = "O(N^2)";
      c.context_draws = n + (l + e > 0 ? 1 : 0);
      break;
    case NoiseScheme::sde_path_noise:
      c.closed_form_noise = "O(N)";
      c.simulated_noise = "O(N)";
      c.context_draws = n + (l + e > 0 ? 1 : 0);
      break;
    case NoiseScheme::no_noise:
      c.closed_form_noise = "-";
      c.simulated_noise = "-";
      c.context_draws = 0;
      break;
  }
  return c;
}

}  // namespace geomdiff
