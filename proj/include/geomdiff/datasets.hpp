#pragma once

#include <string>
#include <vector>

#include "geomdiff/kernels.hpp"
#include "geomdiff/numcore.hpp"

namespace geomdiff {

enum class TaskKind { se, matern52, weakly_periodic, sawtooth, mixture, vec_se, vec_curlfree, vec_divfree };

std::string to_string(TaskKind t);
TaskKind task_from_string(const std::string& name);
bool is_vector_task(TaskKind t);
bool is_gaussian_task(TaskKind t);

/// One observed function: inputs (rows) and stacked point-major outputs.
struct FunctionSample {
  PointSet x;
  Vector y;
  TaskKind task = TaskKind::se;
};

struct DatasetSpec {
  TaskKind task = TaskKind::se;
  std::size_t n_paths = 128;
  // 1-d tasks: points per path, drawn uniformly on [input_lo, input_hi].
  std::size_t points_per_path = 60;
  double input_lo = -2.0;
  double input_hi = 2.0;
  // 2-d tasks: grid_size² grid on [−grid_extent, grid_extent]², restricted to the disk.
  int grid_size = 30;
  double grid_extent = 10.0;
  double disk_radius = 10.0;
  // Negative: the task default (0.05² for 1-d Gaussian tasks, 0 otherwise).
  double noise_var = -1.0;
  std::uint64_t seed = 0;

  void validate() const;
  double effective_noise_var() const;
};

/// Generating kernel of a Gaussian task (throws for sawtooth/mixture).
KernelSpec task_kernel(TaskKind t);

// Sawtooth waveform y = frac(f·x + φ), f ~ U[3, 5], φ ~ U[0, 1].
inline constexpr double kSawtoothFreqLo = 3.0;
inline constexpr double kSawtoothFreqHi = 5.0;

PointSet disk_grid(int size, double extent, double radius);

/// Path i is generated from seed.split(i), so results do not depend on threading.
std::vector<FunctionSample> generate(const DatasetSpec& spec);

/// Inputs for the generalisation split.
DatasetSpec generalisation_spec(DatasetSpec spec);

struct ContextTargetSplit {
  PointSet context_x;
  Vector context_y;
  PointSet target_x;
  Vector target_y;
  std::vector<int> context_index;
  std::vector<int> target_index;
};

/// Random disjoint context/target subsets; the context size is uniform in
/// [min_context, max_context].
ContextTargetSplit split_context_target(const FunctionSample& path, int min_context, int max_context, int n_target,
                                        RngStream& rng);

/// Rows of `x` / point blocks of `y` at the given indices.
FunctionSample subset(const FunctionSample& path, const std::vector<int>& index);

/// CSV per path (columns x0.., y0..) plus manifest.json.
void write_dataset(const std::string& dir, const DatasetSpec& spec, const std::vector<FunctionSample>& paths);
std::vector<FunctionSample> read_dataset(const std::string& dir, DatasetSpec* spec = nullptr);

}  // namespace geomdiff
