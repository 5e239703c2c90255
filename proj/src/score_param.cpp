#include "geomdiff/score_param.hpp"

#include <cmath>

namespace geomdiff {

namespace {

constexpr double kOutputOffset = 1e-3;

const std::pair<ParamKind, const char*> kParamNames[] = {
    {ParamKind::none, "none"},
    {ParamKind::precond_K, "precond_K"},
    {ParamKind::precond_ST, "precond_ST"},
    {ParamKind::predict_Y0, "predict_Y0"},
};

}  // namespace

std::string to_string(ParamKind kind) {
  for (const auto& [k, name] : kParamNames)
    if (k == kind) return name;
  return "unknown";
}

ParamKind param_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kParamNames)
    if (name == n) return k;
  throw ConfigError("unknown parametrization '" + name + "'");
}

double Parametrization::c_skip(double /*sigma*/) const { return kind == ParamKind::predict_Y0 ? 1.0 : 0.0; }

double Parametrization::c_out(double sigma) const {
  return kind == ParamKind::predict_Y0 ? 1.0 : 1.0 / (sigma + kOutputOffset);
}

Vector wrap_network(const Parametrization& param, const Vector& f_out, double t, const Vector& yt,
                    const DiffusionSchedule& schedule) {
  require_dims(f_out.size() == yt.size(), "wrap_network: dimension mismatch");
  const double sigma = schedule.sigma(t);
  return param.c_skip(sigma) * yt + param.c_out(sigma) * f_out;
}

double dsm_loss(const Parametrization& param, const Vector& d_out, const Vector& y0, const Vector& z,
                double sigma, const CholeskyFactor& s, Vector& grad) {
  require_dims(d_out.size() == y0.size() && d_out.size() == z.size() &&
                   d_out.size() == static_cast<Eigen::Index>(s.dim()),
               "dsm_loss: dimension mismatch");
  switch (param.kind) {
    case ParamKind::none: {
      const Vector r = sigma * (s.lower.transpose() * d_out) + z;
      grad = 2.0 * sigma * s.multiply(r);
      return r.squaredNorm();
    }
    case ParamKind::precond_K: {
      const Vector r = sigma * d_out + s.multiply(z);
      grad = 2.0 * sigma * r;
      return r.squaredNorm();
    }
    case ParamKind::precond_ST: {
      const Vector r = sigma * d_out + z;
      grad = 2.0 * sigma * r;
      return r.squaredNorm();
    }
    case ParamKind::predict_Y0: {
      const Vector r = d_out - y0;
      grad = 2.0 * r;
      return r.squaredNorm();
    }
  }
  return 0.0;
}

double dsm_loss(const Parametrization& param, const Vector& d_out, const Vector& y0, const Vector& z,
                double sigma, const CholeskyFactor& s) {
  Vector unused;
  return dsm_loss(param, d_out, y0, z, sigma, s, unused);
}

Vector to_preconditioned_score(const Parametrization& param, const Vector& d_out, double t, const Vector& yt,
                               const DiffusionSchedule& schedule, const Matrix& k, const CholeskyFactor& s,
                               const Vector& m) {
  require_dims(d_out.size() == yt.size() && k.rows() == yt.size() && m.size() == yt.size(),
               "to_preconditioned_score: dimension mismatch");
  switch (param.kind) {
    case ParamKind::none:
      return k * d_out;
    case ParamKind::precond_K:
      return d_out;
    case ParamKind::precond_ST:
      return s.multiply(d_out);
    case ParamKind::predict_Y0: {
      const double var = -std::expm1(-schedule.integral(t));
      if (!(var > 0.0)) throw NumericError("to_preconditioned_score: predict_Y0 is singular at t = 0");
      const double decay = schedule.decay(t);
      return -(yt - decay * d_out - (1.0 - decay) * m) / var;
    }
  }
  return d_out;
}

Vector precondition_transpose(const Parametrization& param, const Vector& v, double t,
                              const DiffusionSchedule& schedule, const Matrix& k, const CholeskyFactor& s) {
  switch (param.kind) {
    case ParamKind::none:
      return k.transpose() * v;
    case ParamKind::precond_K:
      return v;
    case ParamKind::precond_ST:
      return s.lower.transpose() * v;
    case ParamKind::predict_Y0: {
      const double var = -std::expm1(-schedule.integral(t));
      return (schedule.decay(t) / var) * v;
    }
  }
  return v;
}

double precondition_direct_coefficient(const Parametrization& param, double t, const DiffusionSchedule& schedule) {
  if (param.kind != ParamKind::predict_Y0) return 0.0;
  return -1.0 / (-std::expm1(-schedule.integral(t)));
}

Matrix BoundScore::evaluate_batch(double t, const Matrix& ys) {
  Matrix out(ys.rows(), ys.cols());
  for (Eigen::Index c = 0; c < ys.cols(); ++c) out.col(c) = evaluate(t, ys.col(c));
  return out;
}

std::vector<Vector> BoundScore::vjps(double t, const Vector& y, const std::vector<Vector>& vs) {
  std::vector<Vector> out;
  out.reserve(vs.size());
  for (const Vector& v : vs) out.push_back(vjp(t, y, v));
  return out;
}

double BoundScore::jacobian_trace(double t, const Vector& y) {
  const std::size_t n = dim();
  double trace = 0.0;
  Vector e = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    e(idx) = 1.0;
    trace += vjp(t, y, e)(idx);
    e(idx) = 0.0;
  }
  return trace;
}

GaussianBoundScore::GaussianBoundScore(Vector data_mean, Matrix data_cov, Vector m, Matrix k,
                                       DiffusionSchedule schedule)
    : data_mean_(std::move(data_mean)),
      data_cov_(std::move(data_cov)),
      m_(std::move(m)),
      k_(std::move(k)),
      schedule_(schedule) {
  require_dims(data_mean_.size() == m_.size() && data_cov_.rows() == m_.size() && k_.rows() == m_.size(),
               "GaussianBoundScore: dimension mismatch");
}

const GaussianBoundScore::Slot& GaussianBoundScore::slot_at(double t) {
  for (const Slot& slot : cache_)
    if (slot.t == t) return slot;
  Slot& slot = cache_[next_slot_];
  next_slot_ = (next_slot_ + 1) % cache_.size();
  const MarginalMoments mm = marginal_moments(schedule_, t, data_mean_, data_cov_, m_, k_);
  slot.chol = cholesky_with_jitter(mm.covariance);
  slot.mean = mm.mean;
  slot.t = t;
  return slot;
}

Vector GaussianBoundScore::evaluate(double t, const Vector& y) {
  require_dims(y.size() == m_.size(), "GaussianBoundScore::evaluate: dimension mismatch");
  const Slot& slot = slot_at(t);
  return -k_ * slot.chol.solve(Vector(y - slot.mean));
}

Matrix GaussianBoundScore::evaluate_batch(double t, const Matrix& ys) {
  require_dims(ys.rows() == m_.size(), "GaussianBoundScore::evaluate_batch: dimension mismatch");
  const Slot& slot = slot_at(t);
  Matrix centered = ys.colwise() - slot.mean;
  return -k_ * slot.chol.solve(centered);
}

Vector GaussianBoundScore::vjp(double t, const Vector& /*y*/, const Vector& v) {
  require_dims(v.size() == m_.size(), "GaussianBoundScore::vjp: dimension mismatch");
  return -slot_at(t).chol.solve(Vector(k_ * v));
}

double GaussianBoundScore::jacobian_trace(double t, const Vector& /*y*/) {
  return -slot_at(t).chol.solve(k_).trace();
}

ExactGaussianScore::ExactGaussianScore(GaussianDataModel data, KernelSpec limit_kernel, MeanSpec limit_mean,
                                       DiffusionSchedule schedule)
    : data_(std::move(data)),
      limit_kernel_(std::move(limit_kernel)),
      limit_mean_(std::move(limit_mean)),
      schedule_(schedule) {
  data_.kernel.validate();
  limit_kernel_.validate();
  schedule_.validate();
  if (data_.kernel.output_dim != limit_kernel_.output_dim || data_.kernel.input_dim != limit_kernel_.input_dim)
    throw ConfigError("ExactGaussianScore: data and limiting kernels disagree on dimensions");
}

std::unique_ptr<BoundScore> ExactGaussianScore::bind(const PointSet& x) const {
  Matrix data_cov = gram(data_.kernel, x);
  data_cov.diagonal().array() += data_.noise_var;
  return std::make_unique<GaussianBoundScore>(mean_vector(data_.mean, x), std::move(data_cov),
                                              mean_vector(limit_mean_, x), gram(limit_kernel_, x), schedule_);
}

FixedGaussianScore::FixedGaussianScore(Vector data_mean, Matrix data_cov, Vector m, Matrix k,
                                       DiffusionSchedule schedule, int input_dim, int output_dim)
    : data_mean_(std::move(data_mean)),
      data_cov_(std::move(data_cov)),
      m_(std::move(m)),
      k_(std::move(k)),
      schedule_(schedule),
      input_dim_(input_dim),
      output_dim_(output_dim) {}

std::unique_ptr<BoundScore> FixedGaussianScore::bind(const PointSet& x) const {
  require_dims(x.rows() * output_dim_ == m_.size(), "FixedGaussianScore::bind: point count mismatch");
  return std::make_unique<GaussianBoundScore>(data_mean_, data_cov_, m_, k_, schedule_);
}

}  // namespace geomdiff
