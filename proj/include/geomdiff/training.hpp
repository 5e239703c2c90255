#pragma once

#include <functional>
#include <vector>

#include "geomdiff/datasets.hpp"
#include "geomdiff/networks.hpp"
#include "geomdiff/schedule.hpp"
#include "geomdiff/score_param.hpp"

namespace geomdiff {

/// Linear warmup from `initial` to `peak`, then cosine decay to `floor`.
struct LearningRateSchedule {
  int warmup_steps = 1000;
  double initial = 1e-5;
  double peak = 1e-3;
  double floor = 1e-5;

  double at(int step, int total_steps) const;
};

struct TrainConfig {
  int steps = 10000;
  int batch_size = 16;
  LearningRateSchedule lr;
  double ema = 0.99;
  double clip_norm = 1.0;
  double t_floor = 1e-5;
  // When > 0, every example uses a random subset of this many points of its path.
  int subset_min = 0;
  int subset_max = 0;
  std::uint64_t seed = 0;
  // Called every `report_every` steps with (step, loss); 0 disables.
  int report_every = 0;
  std::function<void(int, double)> report;

  void validate() const;
};

/// What the model is trained to denoise toward: the limiting process GP(m, k).
struct DiffusionSetup {
  KernelSpec limit_kernel;
  MeanSpec limit_mean;
  DiffusionSchedule schedule;
  Parametrization param;
};

struct TrainResult {
  std::vector<double> loss_trace;  // minibatch loss per step, per output coordinate
};

/// Denoising score matching with Adam, global-norm clipping and an exponential moving
/// average of the weights; the network ends up holding the EMA weights.
/// Throws NumericError on a non-finite loss.
TrainResult train_dsm(ScoreNetwork& net, const std::vector<FunctionSample>& data, const DiffusionSetup& setup,
                      const TrainConfig& config);

/// Mean DSM loss per output coordinate over `draws` fixed (path, t, z) draws
/// generated from `seed`. Identical seeds give identical draws for any network.
double evaluate_dsm_loss(ScoreNetwork& net, const std::vector<FunctionSample>& data, const DiffusionSetup& setup,
                         std::size_t draws, std::uint64_t seed, int subset_size = 0);

}  // namespace geomdiff
