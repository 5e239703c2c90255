#include "geomdiff/likelihood.hpp"

#include <algorithm>
#include <cmath>

namespace geomdiff {

std::string to_string(DivergenceKind k) { return k == DivergenceKind::hutchinson ? "hutchinson" : "exact_autodiff"; }

DivergenceKind divergence_kind_from_string(const std::string& name) {
  if (name == "exact_autodiff" || name == "exact") return DivergenceKind::exact_autodiff;
  if (name == "hutchinson") return DivergenceKind::hutchinson;
  throw ConfigError("unknown divergence mode '" + name + "'");
}

void DivergenceMode::validate() const {
  if (kind == DivergenceKind::hutchinson && probes < 1) throw ConfigError("divergence: probes must be >= 1");
}

void OdeConfig::validate(const DiffusionSchedule& schedule) const {
  if (steps < 1) throw ConfigError("ode: steps must be >= 1");
  const double eps = floor(schedule);
  if (!(eps > 0.0 && eps < schedule.horizon)) throw ConfigError("ode: eps_clip must be in (0, T)");
}

std::vector<Vector> rademacher_probes(std::size_t dim, int count, RngStream& rng) {
  std::vector<Vector> probes;
  probes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) probes.push_back(rng.rademacher_vector(dim));
  return probes;
}

double hutchinson_trace(BoundScore& score, double t, const Vector& y, const std::vector<Vector>& probes) {
  if (probes.empty()) throw ConfigError("hutchinson: no probes");
  const auto products = score.vjps(t, y, probes);
  double total = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) total += probes[i].dot(products[i]);
  return total / static_cast<double>(probes.size());
}

double flow_divergence(BoundScore& score, const DiffusionSchedule& schedule, double t, const Vector& y,
                       const DivergenceMode& mode, const std::vector<Vector>& probes) {
  const double tr = mode.kind == DivergenceKind::hutchinson ? hutchinson_trace(score, t, y, probes)
                                                            : score.jacobian_trace(t, y);
  return 0.5 * schedule.beta(t) * (-static_cast<double>(y.size()) - tr);
}

LikelihoodResult log_likelihood(BoundScore& score, const Vector& m, const Matrix& k, const DiffusionSchedule& schedule,
                                const Vector& y, const OdeConfig& config, const DivergenceMode& mode,
                                std::uint64_t seed) {
  config.validate(schedule);
  mode.validate();
  require_dims(y.size() == m.size() && k.rows() == m.size() && score.dim() == static_cast<std::size_t>(y.size()),
               "log_likelihood: dimension mismatch");
  if (!y.allFinite()) throw NumericError("log_likelihood: non-finite observation");

  std::vector<Vector> probes;
  if (mode.kind == DivergenceKind::hutchinson) {
    RngStream rng(seed);
    probes = rademacher_probes(static_cast<std::size_t>(y.size()), mode.probes, rng);
  }
  auto drift = [&](double t, const Vector& state) -> Vector {
    return 0.5 * schedule.beta(t) * (m - state - score.evaluate(t, state));
  };

  const double t0 = config.floor(schedule);
  const double t1 = schedule.horizon;
  const double h = (t1 - t0) / config.steps;
  Vector state = y;
  double integral = 0.0;
  for (int i = 0; i < config.steps; ++i) {
    const double t = t0 + i * h;
    const double tn = i + 1 == config.steps ? t1 : t0 + (i + 1) * h;
    const Vector k1 = drift(t, state);
    const double d1 = flow_divergence(score, schedule, t, state, mode, probes);
    const Vector pred = state + (tn - t) * k1;
    const Vector k2 = drift(tn, pred);
    const double d2 = flow_divergence(score, schedule, tn, pred, mode, probes);
    state += 0.5 * (tn - t) * (k1 + k2);
    integral += 0.5 * (tn - t) * (d1 + d2);
    if (!state.allFinite() || !std::isfinite(integral))
      throw NumericError("log_likelihood: non-finite state at t = " + std::to_string(t));
  }
  LikelihoodResult r;
  r.terminal = state;
  r.terminal_logpdf = mvn_logpdf(state, m, cholesky_with_jitter(k));
  r.divergence_integral = integral;
  r.log_likelihood = r.terminal_logpdf + integral;
  return r;
}

double log_likelihood(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x,
                      const Vector& y, const DiffusionSchedule& schedule, const OdeConfig& config,
                      const DivergenceMode& mode, std::uint64_t seed) {
  const GramResult g = gram(kernel, mean, x);
  auto bound = score.bind(x);
  return log_likelihood(*bound, g.mean, g.covariance, schedule, y, config, mode, seed).log_likelihood;
}

double conditional_log_likelihood(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                                  const PointSet& xc, const Vector& yc, const PointSet& xt, const Vector& yt,
                                  const DiffusionSchedule& schedule, const OdeConfig& config,
                                  const DivergenceMode& mode, std::uint64_t seed) {
  if (xt.rows() == 0) return 0.0;
  require_dims(yt.size() == xt.rows() * kernel.output_dim && yc.size() == xc.rows() * kernel.output_dim,
               "conditional_log_likelihood: output sizes do not match inputs");
  if (xc.rows() == 0) return log_likelihood(score, kernel, mean, xt, yt, schedule, config, mode, seed);
  require_dims(xc.cols() == xt.cols(), "conditional_log_likelihood: input dimension mismatch");
  PointSet x(xc.rows() + xt.rows(), xt.cols());
  x << xc, xt;
  Vector y(yc.size() + yt.size());
  y << yc, yt;
  return log_likelihood(score, kernel, mean, x, y, schedule, config, mode, seed) -
         log_likelihood(score, kernel, mean, xc, yc, schedule, config, mode, seed);
}

double consistency_gap(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean, const PointSet& xa,
                       const Vector& ya, const PointSet& xb, const DiffusionSchedule& schedule, double lo, double hi,
                       int nodes, const OdeConfig& config, const DivergenceMode& mode) {
  if (nodes < 2 || !(hi > lo)) throw ConfigError("consistency_gap: need nodes >= 2 and hi > lo");
  require_dims(xb.rows() == 1 && kernel.output_dim == 1, "consistency_gap: one scalar-output extra point");
  PointSet x(xa.rows() + 1, xa.cols());
  x << xa, xb;
  const GramResult g = gram(kernel, mean, x);
  auto bound = score.bind(x);
  const double w = (hi - lo) / (nodes - 1);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    Vector y(ya.size() + 1);
    y << ya, lo + i * w;
    const double weight = (i == 0 || i + 1 == nodes) ? 0.5 * w : w;
    terms.push_back(std::log(weight) + log_likelihood(*bound, g.mean, g.covariance, schedule, y, config, mode).log_likelihood);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - top);
  const double marginal = top + std::log(acc);
  return std::abs(log_likelihood(score, kernel, mean, xa, ya, schedule, config, mode) - marginal);
}

}  // namespace geomdiff
