#include "geomdiff/training.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace geomdiff {

namespace {

struct Example {
  FunctionSample path;
  double t = 0.0;
  Vector z;
};

struct PreparedPath {
  Vector m;
  CholeskyFactor s;
};

PreparedPath prepare(const FunctionSample& path, const DiffusionSetup& setup) {
  return {mean_vector(setup.limit_mean, path.x), cholesky_with_jitter(gram(setup.limit_kernel, path.x))};
}

FunctionSample random_subset(const FunctionSample& path, int size, RngStream& rng) {
  const int n = static_cast<int>(path.x.rows());
  if (size <= 0 || size >= n) return path;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < size; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.uniform_index(static_cast<std::size_t>(n - i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  order.resize(static_cast<std::size_t>(size));
  return subset(path, order);
}

// Loss of one example; when `accumulate`, adds ∂loss/∂θ·weight to the parameter grads.
double example_loss(ScoreNetwork& net, const Example& ex, const PreparedPath& prep, const DiffusionSetup& setup,
                    bool accumulate, double weight) {
  const int dy = setup.limit_kernel.output_dim;
  const double sigma = setup.schedule.sigma(ex.t);
  const double decay = setup.schedule.decay(ex.t);
  const Vector yt = decay * ex.path.y + (1.0 - decay) * prep.m + sigma * prep.s.multiply(ex.z);

  ad::Tape tape;
  ad::Var f = net.forward(tape, ex.t, ex.path.x, tape.input(unstack(yt, dy)));
  const Vector d = wrap_network(setup.param, stack(f.value()), ex.t, yt, setup.schedule);
  Vector grad;
  const double loss = dsm_loss(setup.param, d, ex.path.y, ex.z, sigma, prep.s, grad);
  if (accumulate) {
    const double c_out = setup.param.c_out(sigma);
    tape.backward(f, unstack(Vector(c_out * grad), dy));
    tape.accumulate_parameter_grads(weight);
  }
  return loss / static_cast<double>(yt.size());
}

Example draw_example(const std::vector<FunctionSample>& data, double t_floor, double horizon, int subset_size,
                     RngStream& rng) {
  Example ex;
  ex.path = random_subset(data[rng.uniform_index(data.size())], subset_size, rng);
  ex.t = rng.uniform(t_floor, horizon);
  ex.z = rng.normal_vector(static_cast<std::size_t>(ex.path.y.size()));
  return ex;
}

}  // namespace

double LearningRateSchedule::at(int step, int total_steps) const {
  if (step < warmup_steps) return initial + (peak - initial) * static_cast<double>(step) / warmup_steps;
  const int decay_steps = std::max(1, total_steps - warmup_steps);
  const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / decay_steps);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(ema > 0.0 && ema < 1.0)) throw ConfigError("train: ema must be in (0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be > 0");
  if (lr.warmup_steps < 0 || !(lr.peak > 0.0) || lr.initial < 0.0 || lr.floor < 0.0)
    throw ConfigError("train: invalid learning-rate schedule");
  if (!(t_floor > 0.0)) throw ConfigError("train: t_floor must be > 0");
  if (subset_min < 0 || subset_max < subset_min) throw ConfigError("train: invalid subset range");
}

TrainResult train_dsm(ScoreNetwork& net, const std::vector<FunctionSample>& data, const DiffusionSetup& setup,
                      const TrainConfig& config) {
  config.validate();
  setup.schedule.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");

  auto& params = net.parameters();
  std::vector<Matrix> m1, m2, ema;
  for (const auto& p : params) {
    m1.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    m2.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    ema.push_back(p.value);
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  const bool subsetting = config.subset_max > 0;
  std::vector<PreparedPath> cache;
  if (!subsetting)
    for (const auto& path : data) cache.push_back(prepare(path, setup));

  RngStream rng(config.seed);
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps));
  const double weight = 1.0 / config.batch_size;
  for (int step = 0; step < config.steps; ++step) {
    for (auto& p : params) p.grad.setZero();
    double loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const int size = subsetting ? config.subset_min + static_cast<int>(rng.uniform_index(
                                                            static_cast<std::size_t>(config.subset_max - config.subset_min + 1)))
                                  : 0;
      const std::size_t which = rng.uniform_index(data.size());
      Example ex;
      ex.path = subsetting ? random_subset(data[which], size, rng) : data[which];
      ex.t = rng.uniform(config.t_floor, setup.schedule.horizon);
      ex.z = rng.normal_vector(static_cast<std::size_t>(ex.path.y.size()));
      const PreparedPath prep = subsetting ? prepare(ex.path, setup) : cache[which];
      loss += weight * example_loss(net, ex, prep, setup, true, weight / static_cast<double>(ex.path.y.size()));
    }
    if (!std::isfinite(loss))
      throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (parametrization " +
                         to_string(setup.param.kind) + ")");
    result.loss_trace.push_back(loss);
    if (config.report && config.report_every > 0 && step % config.report_every == 0) config.report(step, loss);

    double norm2 = 0.0;
    for (const auto& p : params) norm2 += p.grad.squaredNorm();
    const double norm = std::sqrt(norm2);
    const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;
    const double lr = config.lr.at(step, config.steps);
    const double c1 = 1.0 - std::pow(b1, step + 1);
    const double c2 = 1.0 - std::pow(b2, step + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix g = clip * params[i].grad;
      m1[i] = b1 * m1[i] + (1.0 - b1) * g;
      m2[i] = b2 * m2[i] + (1.0 - b2) * g.cwiseProduct(g);
      params[i].value.array() -= lr * (m1[i].array() / c1) / ((m2[i].array() / c2).sqrt() + eps);
      ema[i] = config.ema * ema[i] + (1.0 - config.ema) * params[i].value;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = ema[i];
  return result;
}

double evaluate_dsm_loss(ScoreNetwork& net, const std::vector<FunctionSample>& data, const DiffusionSetup& setup,
                         std::size_t draws, std::uint64_t seed, int subset_size) {
  if (data.empty() || draws == 0) throw ConfigError("evaluate_dsm_loss: nothing to evaluate");
  RngStream rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const Example ex = draw_example(data, 1e-5, setup.schedule.horizon, subset_size, rng);
    total += example_loss(net, ex, prepare(ex.path, setup), setup, false, 0.0);
  }
  return total / static_cast<double>(draws);
}

}  // namespace geomdiff
