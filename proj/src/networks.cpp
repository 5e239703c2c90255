#include "geomdiff/networks.hpp"

#include <cmath>

#include "json.hpp"

namespace geomdiff {

using ad::Tape;
using ad::Var;

namespace {

const std::pair<Architecture, const char*> kArchNames[] = {
    {Architecture::mlp, "mlp"},
    {Architecture::biattention, "biattention"},
    {Architecture::egnn_equivariant, "egnn_equivariant"},
};

Var linear(Tape& tape, Var x, ad::Parameter& w, ad::Parameter& b) {
  return ad::add_row(ad::matmul(x, tape.param(w)), tape.param(b));
}

// ---------------------------------------------------------------------------

class MlpNetwork : public ScoreNetwork {
 public:
  MlpNetwork(const NetworkConfig& config, RngStream& rng) : ScoreNetwork(config) {
    const int w = config.width;
    in_w_ = add_param("in.w", config.input_dim + config.output_dim + config.time_embedding, w, rng);
    in_b_ = add_zero_param("in.b", 1, w);
    for (int l = 0; l < config.depth; ++l) {
      layer_w_.push_back(add_param("layer" + std::to_string(l) + ".w", 2 * w, w, rng));
      layer_b_.push_back(add_zero_param("layer" + std::to_string(l) + ".b", 1, w));
    }
    out_w_ = add_param("out.w", w, config.output_dim, rng);
    out_b_ = add_zero_param("out.b", 1, config.output_dim);
  }

  Var forward(Tape& tape, double t, const PointSet& x, Var y) override {
    const Eigen::Index n = x.rows();
    const Matrix temb = time_features(t).replicate(n, 1);
    Var feats = ad::concat_cols({tape.constant(prepare_inputs(x)), y, tape.constant(temb)});
    Var h = ad::silu(linear(tape, feats, params_[in_w_], params_[in_b_]));
    for (std::size_t l = 0; l < layer_w_.size(); ++l) {
      Var pooled = ad::broadcast_rows(ad::mean_rows(h), n);
      Var u = ad::silu(linear(tape, ad::concat_cols({h, pooled}), params_[layer_w_[l]], params_[layer_b_[l]]));
      h = ad::scale(ad::add(h, u), M_SQRT1_2);
    }
    return linear(tape, h, params_[out_w_], params_[out_b_]);
  }

 private:
  std::size_t in_w_, in_b_, out_w_, out_b_;
  std::vector<std::size_t> layer_w_, layer_b_;
};

// ---------------------------------------------------------------------------

class BiAttentionNetwork : public ScoreNetwork {
 public:
  BiAttentionNetwork(const NetworkConfig& config, RngStream& rng) : ScoreNetwork(config) {
    const int w = config.width;
    if (w % config.heads != 0) throw ConfigError("biattention: width must be divisible by heads");
    embed_w_ = add_param("embed.w", 1 + config.output_dim, w, rng);
    embed_b_ = add_zero_param("embed.b", 1, w);
    time_w_ = add_param("time.w", config.time_embedding, w, rng);
    time_b_ = add_zero_param("time.b", 1, w);
    for (int l = 0; l < config.depth; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      Layer layer;
      layer.q = add_param(pre + "point.q", w, w, rng);
      layer.k = add_param(pre + "point.k", w, w, rng);
      layer.v = add_param(pre + "point.v", w, w, rng);
      layer.o = add_param(pre + "point.o", w, w, rng);
      layer.dq = add_param(pre + "dim.q", w, w, rng);
      layer.dk = add_param(pre + "dim.k", w, w, rng);
      layer.dv = add_param(pre + "dim.v", w, w, rng);
      layer.g1 = add_param(pre + "gate.w1", w, w, rng);
      layer.g1b = add_zero_param(pre + "gate.b1", 1, w);
      layer.g2 = add_param(pre + "gate.w2", w, w, rng);
      layer.g2b = add_zero_param(pre + "gate.b2", 1, w);
      layers_.push_back(layer);
    }
    head_w_ = add_param("head.w", w, w, rng);
    head_b_ = add_zero_param("head.b", 1, w);
    out_w_ = add_param("out.w", w, config.output_dim, rng);
    out_b_ = add_zero_param("out.b", 1, config.output_dim);
  }

  Var forward(Tape& tape, double t, const PointSet& x, Var y) override {
    const Eigen::Index n = x.rows();
    const int dims = config_.input_dim;
    const PointSet xs = prepare_inputs(x);
    Var temb = linear(tape, tape.constant(time_features(t)), params_[time_w_], params_[time_b_]);
    Var tb = ad::broadcast_rows(temb, n);

    std::vector<Var> h(static_cast<std::size_t>(dims));
    std::vector<Var> skip;
    for (int j = 0; j < dims; ++j) {
      Var tok = ad::concat_cols({tape.constant(xs.col(j)), y});
      h[static_cast<std::size_t>(j)] = ad::add(linear(tape, tok, params_[embed_w_], params_[embed_b_]), tb);
    }
    for (const Layer& layer : layers_) {
      std::vector<Var> in(h.size()), dq(h.size()), dk(h.size()), dv(h.size());
      for (std::size_t j = 0; j < h.size(); ++j) {
        in[j] = ad::add(h[j], tb);
        dq[j] = ad::matmul(in[j], tape.param(params_[layer.dq]));
        dk[j] = ad::matmul(in[j], tape.param(params_[layer.dk]));
        dv[j] = ad::matmul(in[j], tape.param(params_[layer.dv]));
      }
      for (std::size_t j = 0; j < h.size(); ++j) {
        Var across_points = point_attention(tape, layer, in[j]);
        Var across_dims = dims == 1 ? dv[0] : dim_attention(dq[j], dk, dv);
        Var u = ad::add(across_points, across_dims);
        Var gate = ad::mul(ad::silu(linear(tape, u, params_[layer.g1], params_[layer.g1b])),
                           ad::sigmoid(linear(tape, u, params_[layer.g2], params_[layer.g2b])));
        h[j] = ad::scale(ad::add(h[j], gate), M_SQRT1_2);
        if (skip.size() < h.size())
          skip.push_back(gate);
        else
          skip[j] = ad::add(skip[j], gate);
      }
    }
    Var pooled = skip[0];
    for (std::size_t j = 1; j < skip.size(); ++j) pooled = ad::add(pooled, skip[j]);
    pooled = ad::scale(pooled, 1.0 / (static_cast<double>(dims) * std::sqrt(static_cast<double>(layers_.size()))));
    Var head = ad::silu(linear(tape, pooled, params_[head_w_], params_[head_b_]));
    return linear(tape, head, params_[out_w_], params_[out_b_]);
  }

 private:
  struct Layer {
    std::size_t q, k, v, o, dq, dk, dv, g1, g1b, g2, g2b;
  };

  Var point_attention(Tape& tape, const Layer& layer, Var in) {
    const int heads = config_.heads;
    const Eigen::Index dh = config_.width / heads;
    Var q = ad::matmul(in, tape.param(params_[layer.q]));
    Var k = ad::matmul(in, tape.param(params_[layer.k]));
    Var v = ad::matmul(in, tape.param(params_[layer.v]));
    std::vector<Var> outs;
    for (int hd = 0; hd < heads; ++hd) {
      Var qh = ad::slice_cols(q, hd * dh, dh);
      Var kh = ad::slice_cols(k, hd * dh, dh);
      Var vh = ad::slice_cols(v, hd * dh, dh);
      Var att = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh))));
      outs.push_back(ad::matmul(att, vh));
    }
    return ad::matmul(heads == 1 ? outs[0] : ad::concat_cols(outs), tape.param(params_[layer.o]));
  }

  Var dim_attention(Var q, const std::vector<Var>& k, const std::vector<Var>& v) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(config_.width));
    std::vector<Var> scores;
    for (const Var& kk : k) scores.push_back(ad::scale(ad::row_dot(q, kk), scale));
    Var att = ad::softmax_rows(ad::concat_cols(scores));
    Var out = ad::mul_col(ad::slice_cols(att, 0, 1), v[0]);
    for (std::size_t i = 1; i < v.size(); ++i)
      out = ad::add(out, ad::mul_col(ad::slice_cols(att, static_cast<Eigen::Index>(i), 1), v[i]));
    return out;
  }

  std::size_t embed_w_, embed_b_, time_w_, time_b_, head_w_, head_b_, out_w_, out_b_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------

class EgnnNetwork : public ScoreNetwork {
 public:
  static constexpr int kInvariants = 6;

  EgnnNetwork(const NetworkConfig& config, RngStream& rng) : ScoreNetwork(config) {
    if (config.input_dim != config.output_dim)
      throw ConfigError("egnn_equivariant: output_dim must equal input_dim (vector fields)");
    const int w = config.width;
    node_w_ = add_param("node.w", config.time_embedding, w, rng);
    node_b_ = add_zero_param("node.b", 1, w);
    for (int l = 0; l < config.depth; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      Layer layer;
      layer.e1 = add_param(pre + "edge.w1", 2 * w + kInvariants, w, rng);
      layer.e1b = add_zero_param(pre + "edge.b1", 1, w);
      layer.e2 = add_param(pre + "edge.w2", w, w, rng);
      layer.e2b = add_zero_param(pre + "edge.b2", 1, w);
      layer.a = add_param(pre + "coef.x", w, 1, rng);
      layer.ab = add_zero_param(pre + "coef.xb", 1, 1);
      layer.b = add_param(pre + "coef.v", w, 1, rng);
      layer.bb = add_zero_param(pre + "coef.vb", 1, 1);
      layer.n = add_param(pre + "node.w", 2 * w, w, rng);
      layer.nb = add_zero_param(pre + "node.b", 1, w);
      layers_.push_back(layer);
    }
    gain_w_ = add_param("gain.w", w, 1, rng);
    gain_b_ = add_zero_param("gain.b", 1, 1);
  }

  Var forward(Tape& tape, double t, const PointSet& x, Var y) override {
    const Eigen::Index n = x.rows();
    const PointSet xs = x / config_.position_scale;
    std::vector<int> from, to;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        from.push_back(static_cast<int>(i));
        to.push_back(static_cast<int>(j));
      }
    Matrix rel(n * n, xs.cols());
    for (Eigen::Index e = 0; e < n * n; ++e) rel.row(e) = xs.row(from[static_cast<std::size_t>(e)]) - xs.row(to[static_cast<std::size_t>(e)]);
    Var rel_v = tape.constant(rel);
    Var dist2 = tape.constant(rel.rowwise().squaredNorm());
    const double inv_n = 1.0 / static_cast<double>(n);

    Var h = ad::broadcast_rows(ad::silu(linear(tape, tape.constant(time_features(t)), params_[node_w_], params_[node_b_])), n);
    Var v = y;
    for (const Layer& layer : layers_) {
      Var vi = ad::gather_rows(v, from);
      Var vj = ad::gather_rows(v, to);
      Var edge = ad::concat_cols({ad::gather_rows(h, from), ad::gather_rows(h, to), dist2, ad::row_dot(rel_v, vi),
                                  ad::row_dot(rel_v, vj), ad::row_dot(vi, vj), ad::row_dot(vi, vi), ad::row_dot(vj, vj)});
      Var m = ad::silu(linear(tape, ad::silu(linear(tape, edge, params_[layer.e1], params_[layer.e1b])),
                              params_[layer.e2], params_[layer.e2b]));
      Var a = linear(tape, m, params_[layer.a], params_[layer.ab]);
      Var b = linear(tape, m, params_[layer.b], params_[layer.bb]);
      Var update = ad::add(ad::mul_col(a, rel_v), ad::mul_col(b, vj));
      v = ad::add(v, ad::scale(ad::sum_groups(update, n), inv_n));
      Var agg = ad::scale(ad::sum_groups(m, n), inv_n);
      h = ad::add(h, ad::silu(linear(tape, ad::concat_cols({h, agg}), params_[layer.n], params_[layer.nb])));
    }
    Var gain = linear(tape, h, params_[gain_w_], params_[gain_b_]);
    return ad::add(ad::sub(v, y), ad::mul_col(gain, y));
  }

 private:
  struct Layer {
    std::size_t e1, e1b, e2, e2b, a, ab, b, bb, n, nb;
  };
  std::size_t node_w_, node_b_, gain_w_, gain_b_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------

class BoundNetworkScore : public BoundScore {
 public:
  BoundNetworkScore(ScoreNetwork& net, Parametrization param, DiffusionSchedule schedule, PointSet x, Matrix k,
                    CholeskyFactor s, Vector m, int output_dim)
      : net_(net),
        param_(param),
        schedule_(schedule),
        x_(std::move(x)),
        k_(std::move(k)),
        s_(std::move(s)),
        m_(std::move(m)),
        output_dim_(output_dim) {}

  std::size_t dim() const override { return static_cast<std::size_t>(m_.size()); }

  Vector evaluate(double t, const Vector& y) override {
    require_dims(y.size() == m_.size(), "network score: dimension mismatch");
    Tape tape;
    Var f = net_.forward(tape, t, x_, tape.input(unstack(y, output_dim_)));
    const Vector d = wrap_network(param_, stack(f.value()), t, y, schedule_);
    return to_preconditioned_score(param_, d, t, y, schedule_, k_, s_, m_);
  }

  Vector vjp(double t, const Vector& y, const Vector& v) override { return vjps(t, y, {v}).front(); }

  std::vector<Vector> vjps(double t, const Vector& y, const std::vector<Vector>& vs) override {
    require_dims(y.size() == m_.size(), "network score: dimension mismatch");
    Tape tape;
    Var yin = tape.input(unstack(y, output_dim_));
    Var f = net_.forward(tape, t, x_, yin);
    const double sigma = schedule_.sigma(t);
    const double c_out = param_.c_out(sigma);
    const double c_skip = param_.c_skip(sigma);
    const double direct = precondition_direct_coefficient(param_, t, schedule_);
    std::vector<Vector> out;
    out.reserve(vs.size());
    for (const Vector& v : vs) {
      require_dims(v.size() == m_.size(), "network score vjp: dimension mismatch");
      const Vector a = precondition_transpose(param_, v, t, schedule_, k_, s_);
      tape.backward(f, unstack(Vector(c_out * a), output_dim_));
      out.push_back(stack(tape.grad(yin)) + c_skip * a + direct * v);
    }
    return out;
  }

  double jacobian_trace(double t, const Vector& y) override {
    const auto n = static_cast<Eigen::Index>(dim());
    std::vector<Vector> basis;
    basis.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) basis.push_back(Vector::Unit(n, i));
    const std::vector<Vector> rows = vjps(t, y, basis);
    double trace = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) trace += rows[static_cast<std::size_t>(i)](i);
    return trace;
  }

 private:
  ScoreNetwork& net_;
  Parametrization param_;
  DiffusionSchedule schedule_;
  PointSet x_;
  Matrix k_;
  CholeskyFactor s_;
  Vector m_;
  int output_dim_;
};

}  // namespace

std::string to_string(Architecture a) {
  for (const auto& [k, name] : kArchNames)
    if (k == a) return name;
  return "unknown";
}

Architecture architecture_from_string(const std::string& name) {
  for (const auto& [k, n] : kArchNames)
    if (name == n) return k;
  throw ConfigError("unknown architecture '" + name + "'");
}

void NetworkConfig::validate() const {
  if (depth < 1) throw ConfigError("network: depth must be >= 1");
  if (width < 1) throw ConfigError("network: width must be >= 1");
  if (heads < 1) throw ConfigError("network: heads must be >= 1");
  if (time_embedding < 2 || time_embedding % 2 != 0) throw ConfigError("network: time_embedding must be even and >= 2");
  if (input_dim < 1 || output_dim < 1) throw ConfigError("network: dimensions must be >= 1");
  if (!(position_scale > 0.0)) throw ConfigError("network: position_scale must be > 0");
}

std::size_t ScoreNetwork::parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : params_) count += static_cast<std::size_t>(p.value.size());
  return count;
}

Matrix ScoreNetwork::evaluate(double t, const PointSet& x, const Matrix& y) {
  Tape tape;
  return forward(tape, t, x, tape.input(y)).value();
}

std::size_t ScoreNetwork::add_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, RngStream& rng,
                                    double gain) {
  Matrix w(rows, cols);
  const double sd = gain / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = sd * rng.normal();
  params_.emplace_back(name, std::move(w));
  return params_.size() - 1;
}

std::size_t ScoreNetwork::add_zero_param(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  params_.emplace_back(name, Matrix::Zero(rows, cols));
  return params_.size() - 1;
}

PointSet ScoreNetwork::prepare_inputs(const PointSet& x) const {
  require_dims(x.cols() == config_.input_dim, "network: input dimension mismatch");
  PointSet xs = x / config_.position_scale;
  if (config_.translation_invariant && xs.rows() > 0) xs.rowwise() -= xs.colwise().mean();
  return xs;
}

Matrix ScoreNetwork::time_features(double t) const {
  const int half = config_.time_embedding / 2;
  Matrix out(1, config_.time_embedding);
  for (int k = 0; k < half; ++k) {
    const double freq = half == 1 ? 1.0 : std::exp(std::log(200.0) * k / (half - 1));
    out(0, k) = std::sin(freq * t);
    out(0, half + k) = std::cos(freq * t);
  }
  return out;
}

std::unique_ptr<ScoreNetwork> make_network(const NetworkConfig& config, RngStream& rng) {
  config.validate();
  switch (config.architecture) {
    case Architecture::mlp:
      return std::make_unique<MlpNetwork>(config, rng);
    case Architecture::biattention:
      return std::make_unique<BiAttentionNetwork>(config, rng);
    case Architecture::egnn_equivariant:
      return std::make_unique<EgnnNetwork>(config, rng);
  }
  throw ConfigError("unknown architecture");
}

std::string serialize_network(const ScoreNetwork& net) {
  const NetworkConfig& c = net.config();
  nlohmann::json j;
  j["format"] = "geomdiff-network";
  j["version"] = 1;
  j["config"] = {{"architecture", to_string(c.architecture)},
                 {"depth", c.depth},
                 {"width", c.width},
                 {"heads", c.heads},
                 {"time_embedding", c.time_embedding},
                 {"translation_invariant", c.translation_invariant},
                 {"input_dim", c.input_dim},
                 {"output_dim", c.output_dim},
                 {"position_scale", c.position_scale}};
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : net.parameters()) {
    std::vector<double> values(p.value.data(), p.value.data() + p.value.size());
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}});
  }
  j["parameters"] = std::move(params);
  return j.dump();
}

std::unique_ptr<ScoreNetwork> deserialize_network(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "geomdiff-network" || j.value("version", 0) != 1)
    throw ConfigError("checkpoint: unsupported format");
  const auto& c = j.at("config");
  NetworkConfig config;
  config.architecture = architecture_from_string(c.at("architecture").get<std::string>());
  config.depth = c.at("depth").get<int>();
  config.width = c.at("width").get<int>();
  config.heads = c.at("heads").get<int>();
  config.time_embedding = c.at("time_embedding").get<int>();
  config.translation_invariant = c.at("translation_invariant").get<bool>();
  config.input_dim = c.at("input_dim").get<int>();
  config.output_dim = c.at("output_dim").get<int>();
  config.position_scale = c.at("position_scale").get<double>();
  RngStream rng(0);
  auto net = make_network(config, rng);
  const auto& params = j.at("parameters");
  if (params.size() != net->parameters().size()) throw ConfigError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = net->parameters()[i];
    const auto& e = params[i];
    if (e.at("name").get<std::string>() != p.name || e.at("rows").get<Eigen::Index>() != p.value.rows() ||
        e.at("cols").get<Eigen::Index>() != p.value.cols())
      throw ConfigError("checkpoint: parameter '" + p.name + "' does not match the architecture");
    const auto values = e.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != p.value.size()) throw ConfigError("checkpoint: bad value count");
    p.value = Eigen::Map<const Matrix>(values.data(), p.value.rows(), p.value.cols());
  }
  return net;
}

Matrix unstack(const Vector& y, Eigen::Index dim) {
  require_dims(dim > 0 && y.size() % dim == 0, "unstack: length not divisible by dimension");
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(y.data(),
                                                                                                   y.size() / dim, dim);
}

Vector stack(const Matrix& y) {
  Vector out(y.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), y.rows(), y.cols()) = y;
  return out;
}

NetworkScore::NetworkScore(std::shared_ptr<ScoreNetwork> net, Parametrization param, KernelSpec limit_kernel,
                           MeanSpec limit_mean, DiffusionSchedule schedule)
    : net_(std::move(net)),
      param_(param),
      limit_kernel_(std::move(limit_kernel)),
      limit_mean_(std::move(limit_mean)),
      schedule_(schedule) {
  if (!net_) throw ConfigError("NetworkScore: null network");
  limit_kernel_.validate();
  if (net_->config().input_dim != limit_kernel_.input_dim || net_->config().output_dim != limit_kernel_.output_dim)
    throw ConfigError("NetworkScore: network and kernel dimensions disagree");
}

std::unique_ptr<BoundScore> NetworkScore::bind(const PointSet& x) const {
  Matrix k = gram(limit_kernel_, x);
  CholeskyFactor s = cholesky_with_jitter(k);
  return std::make_unique<BoundNetworkScore>(*net_, param_, schedule_, x, std::move(k), std::move(s),
                                             mean_vector(limit_mean_, x), limit_kernel_.output_dim);
}

double grad_check(ScoreNetwork& net, double t, const PointSet& x, const Matrix& y, RngStream& rng, double h,
                  std::size_t max_entries_per_param) {
  Matrix weight(y.rows(), net.config().output_dim);
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.normal();
  auto objective = [&]() { return net.evaluate(t, x, y).cwiseProduct(weight).sum(); };

  for (auto& p : net.parameters()) p.grad.setZero();
  {
    Tape tape;
    Var f = net.forward(tape, t, x, tape.input(y));
    tape.backward(f, weight);
    tape.accumulate_parameter_grads();
  }
  double worst = 0.0;
  for (auto& p : net.parameters()) {
    const Eigen::Index count = p.value.size();
    const std::size_t probes = std::min<std::size_t>(max_entries_per_param, static_cast<std::size_t>(count));
    for (std::size_t k = 0; k < probes; ++k) {
      const Eigen::Index idx = probes == static_cast<std::size_t>(count)
                                   ? static_cast<Eigen::Index>(k)
                                   : static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(count)));
      double& entry = p.value.data()[idx];
      const double saved = entry;
      entry = saved + h;
      const double up = objective();
      entry = saved - h;
      const double down = objective();
      entry = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = p.grad.data()[idx];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace geomdiff
