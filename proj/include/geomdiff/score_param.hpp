#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geomdiff/kernels.hpp"
#include "geomdiff/numcore.hpp"
#include "geomdiff/schedule.hpp"

namespace geomdiff {

// ---------------------------------------------------------------------------
// Parametrizations
//
//               none            precond_K       precond_ST      predict_Y0
// c_skip        0               0               0               1
// c_out         1/(σ+1e-3)      1/(σ+1e-3)      1/(σ+1e-3)      1
// loss          ‖σSᵀD + z‖²     ‖σD + Sz‖²      ‖σD + z‖²       ‖D − Y₀‖²
// K∇log p_t     K·D             D               S·D             −(Y_t − m_{t|0}(D))/σ²
//
// with K = S·Sᵀ the limiting gram and Y_t = m_{t|0} + σ·S·z.
// ---------------------------------------------------------------------------

enum class ParamKind { none, precond_K, precond_ST, predict_Y0 };

inline constexpr std::array<ParamKind, 4> kAllParametrizations = {
    ParamKind::none, ParamKind::precond_K, ParamKind::precond_ST, ParamKind::predict_Y0};

std::string to_string(ParamKind kind);
ParamKind param_kind_from_string(const std::string& name);

struct Parametrization {
  ParamKind kind = ParamKind::precond_K;

  double c_skip(double sigma) const;
  double c_out(double sigma) const;
};

/// D = c_skip(t)·Y_t + c_out(t)·F
Vector wrap_network(const Parametrization& param, const Vector& f_out, double t, const Vector& yt,
                    const DiffusionSchedule& schedule);

/// Per-sample denoising score-matching loss in the table form for `param`.
/// `s` is the Cholesky factor of the limiting gram K.
double dsm_loss(const Parametrization& param, const Vector& d_out, const Vector& y0, const Vector& z,
                double sigma, const CholeskyFactor& s);
/// Same loss; also writes ∂loss/∂D into `grad`.
double dsm_loss(const Parametrization& param, const Vector& d_out, const Vector& y0, const Vector& z,
                double sigma, const CholeskyFactor& s, Vector& grad);

/// Converts a wrapped network output D into the preconditioned score K∇log p_t.
/// `m` is the limiting mean (it enters m_{t|0} for predict_Y0).
Vector to_preconditioned_score(const Parametrization& param, const Vector& d_out, double t, const Vector& yt,
                               const DiffusionSchedule& schedule, const Matrix& k, const CholeskyFactor& s,
                               const Vector& m);

/// Linear part of to_preconditioned_score: K∇log p = A·D + c·Y_t + const. Returns Aᵀv.
Vector precondition_transpose(const Parametrization& param, const Vector& v, double t,
                              const DiffusionSchedule& schedule, const Matrix& k, const CholeskyFactor& s);
/// The scalar c above (nonzero only for predict_Y0).
double precondition_direct_coefficient(const Parametrization& param, double t, const DiffusionSchedule& schedule);

// ---------------------------------------------------------------------------
// Score models
// ---------------------------------------------------------------------------

/// A score model bound to one input set X. Evaluates K(X,X)∇log p_t(y).
/// Bound scores may cache per-time factorizations and are single-owner.
class BoundScore {
 public:
  virtual ~BoundScore() = default;

  virtual std::size_t dim() const = 0;
  virtual Vector evaluate(double t, const Vector& y) = 0;
  /// One column per state.
  virtual Matrix evaluate_batch(double t, const Matrix& ys);
  /// vᵀ·∂(K∇log p_t)/∂y
  virtual Vector vjp(double t, const Vector& y, const Vector& v) = 0;
  /// Several VJPs at one state; implementations may share the forward pass.
  virtual std::vector<Vector> vjps(double t, const Vector& y, const std::vector<Vector>& vs);
  /// Trace of ∂(K∇log p_t)/∂y. The default spends dim() VJPs.
  virtual double jacobian_trace(double t, const Vector& y);
};

/// s(t, X, Y) → K∇log p_t, for any finite input set.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual std::unique_ptr<BoundScore> bind(const PointSet& x) const = 0;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;

  Vector evaluate(double t, const PointSet& x, const Vector& y) const { return bind(x)->evaluate(t, y); }
};

/// Data process GP(m₀, k₀) observed with optional i.i.d. noise.
struct GaussianDataModel {
  KernelSpec kernel;
  MeanSpec mean;
  double noise_var = 0.0;
};

/// Analytic preconditioned score when the data process is Gaussian.
class ExactGaussianScore : public ScoreModel {
 public:
  ExactGaussianScore(GaussianDataModel data, KernelSpec limit_kernel, MeanSpec limit_mean,
                     DiffusionSchedule schedule);

  std::unique_ptr<BoundScore> bind(const PointSet& x) const override;
  int input_dim() const override { return limit_kernel_.input_dim; }
  int output_dim() const override { return limit_kernel_.output_dim; }

  const GaussianDataModel& data() const { return data_; }
  const KernelSpec& limit_kernel() const { return limit_kernel_; }
  const MeanSpec& limit_mean() const { return limit_mean_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

 private:
  GaussianDataModel data_;
  KernelSpec limit_kernel_;
  MeanSpec limit_mean_;
  DiffusionSchedule schedule_;
};

/// Exact score for explicit moments on a fixed input set (the set passed to bind()
/// must have the matching size; its coordinates are ignored).
class FixedGaussianScore : public ScoreModel {
 public:
  FixedGaussianScore(Vector data_mean, Matrix data_cov, Vector m, Matrix k, DiffusionSchedule schedule,
                     int input_dim = 1, int output_dim = 1);

  std::unique_ptr<BoundScore> bind(const PointSet& x) const override;
  int input_dim() const override { return input_dim_; }
  int output_dim() const override { return output_dim_; }

 private:
  Vector data_mean_;
  Matrix data_cov_;
  Vector m_;
  Matrix k_;
  DiffusionSchedule schedule_;
  int input_dim_;
  int output_dim_;
};

/// Linear-Gaussian bound score; shared by the exact models above.
class GaussianBoundScore : public BoundScore {
 public:
  GaussianBoundScore(Vector data_mean, Matrix data_cov, Vector m, Matrix k, DiffusionSchedule schedule);

  std::size_t dim() const override { return static_cast<std::size_t>(m_.size()); }
  Vector evaluate(double t, const Vector& y) override;
  Matrix evaluate_batch(double t, const Matrix& ys) override;
  Vector vjp(double t, const Vector& y, const Vector& v) override;
  double jacobian_trace(double t, const Vector& y) override;

 private:
  struct Slot {
    double t = -1.0;
    CholeskyFactor chol;
    Vector mean;
  };
  const Slot& slot_at(double t);

  Vector data_mean_;
  Matrix data_cov_;
  Vector m_;
  Matrix k_;
  DiffusionSchedule schedule_;
  // Two-slot cache: conditional samplers alternate between t and t − γ.
  std::array<Slot, 2> cache_{};
  std::size_t next_slot_ = 0;
};

}  // namespace geomdiff
