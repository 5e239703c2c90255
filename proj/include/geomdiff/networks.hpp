#pragma once

#include <memory>
#include <string>
#include <vector>

#include "geomdiff/autodiff.hpp"
#include "geomdiff/kernels.hpp"
#include "geomdiff/score_param.hpp"

namespace geomdiff {

enum class Architecture { mlp, biattention, egnn_equivariant };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& name);

struct NetworkConfig {
  Architecture architecture = Architecture::biattention;
  int depth = 3;
  int width = 64;
  int heads = 4;
  int time_embedding = 16;
  bool translation_invariant = false;
  int input_dim = 1;
  int output_dim = 1;
  // Inputs are divided by this before entering the network.
  double position_scale = 1.0;

  void validate() const;
};

/// F_θ(t, X, Y). Outputs one row per point (n × output_dim).
///
/// mlp: pointwise layers with mean-pooled context (DeepSets); permutation
///   equivariant only.
/// biattention: one token per (point, input coordinate); alternating attention over
///   points and over coordinates with gated residual blocks.
/// egnn_equivariant: fully connected message passing on invariants of relative
///   positions and output vectors; E(n) equivariant for vector fields.
class ScoreNetwork {
 public:
  virtual ~ScoreNetwork() = default;

  const NetworkConfig& config() const { return config_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Forward pass on a caller-owned tape; `y` is n × output_dim. Does not modify
  // the parameters, so concurrent passes on separate tapes are safe.
  virtual ad::Var forward(ad::Tape& tape, double t, const PointSet& x, ad::Var y) = 0;

  Matrix evaluate(double t, const PointSet& x, const Matrix& y);

 protected:
  explicit ScoreNetwork(NetworkConfig config) : config_(std::move(config)) {}

  std::size_t add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, RngStream& rng,
                        double gain = 1.0);
  std::size_t add_zero_param(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  ad::Var p(ad::Tape& tape, std::size_t index) { return tape.param(params_[index]); }
  PointSet prepare_inputs(const PointSet& x) const;
  Matrix time_features(double t) const;

  NetworkConfig config_;
  std::vector<ad::Parameter> params_;
};

std::unique_ptr<ScoreNetwork> make_network(const NetworkConfig& config, RngStream& rng);

/// JSON checkpoint: {"format", "version", "config", "parameters": [{name, rows, cols, values}]}.
std::string serialize_network(const ScoreNetwork& net);
std::unique_ptr<ScoreNetwork> deserialize_network(const std::string& text);

/// Stacked point-major vector ↔ n × d matrix.
Matrix unstack(const Vector& y, Eigen::Index dim);
Vector stack(const Matrix& y);

/// Trained network turned into K∇log p_t through a parametrization.
class NetworkScore : public ScoreModel {
 public:
  NetworkScore(std::shared_ptr<ScoreNetwork> net, Parametrization param, KernelSpec limit_kernel,
               MeanSpec limit_mean, DiffusionSchedule schedule);

  std::unique_ptr<BoundScore> bind(const PointSet& x) const override;
  int input_dim() const override { return limit_kernel_.input_dim; }
  int output_dim() const override { return limit_kernel_.output_dim; }

  ScoreNetwork& network() const { return *net_; }
  const Parametrization& parametrization() const { return param_; }

 private:
  std::shared_ptr<ScoreNetwork> net_;
  Parametrization param_;
  KernelSpec limit_kernel_;
  MeanSpec limit_mean_;
  DiffusionSchedule schedule_;
};

/// Largest relative error between autodiff parameter gradients of sum(F·W) (W a
/// fixed random weighting) and central finite differences.
double grad_check(ScoreNetwork& net, double t, const PointSet& x, const Matrix& y, RngStream& rng,
                  double h = 1e-5, std::size_t max_entries_per_param = 12);

}  // namespace geomdiff
