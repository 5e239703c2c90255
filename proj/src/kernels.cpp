#include "geomdiff/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace geomdiff {

namespace {

constexpr double kCoincidentTolerance = 1e-12;

const std::pair<KernelFamily, const char*> kFamilyNames[] = {
    {KernelFamily::white, "white"},
    {KernelFamily::squared_exponential, "se"},
    {KernelFamily::matern52, "matern52"},
    {KernelFamily::periodic, "periodic"},
    {KernelFamily::weakly_periodic, "weakly_periodic"},
    {KernelFamily::diagonal, "diagonal"},
    {KernelFamily::curl_free, "curl_free"},
    {KernelFamily::div_free, "div_free"},
};

double se_value(double variance, double lengthscale, double dist2) {
  return variance * std::exp(-0.5 * dist2 / (lengthscale * lengthscale));
}

double periodic_value(double variance, double lengthscale, double period, double dist) {
  const double s = std::sin(std::numbers::pi * dist / period);
  return variance * std::exp(-2.0 * s * s / (lengthscale * lengthscale));
}

double scalar_value(const KernelSpec& spec, KernelFamily family, const Vector& x, const Vector& xp) {
  const Vector diff = x - xp;
  const double dist2 = diff.squaredNorm();
  switch (family) {
    case KernelFamily::white:
      return std::sqrt(dist2) <= kCoincidentTolerance ? spec.variance : 0.0;
    case KernelFamily::squared_exponential: {
      if (!spec.ard_lengthscales.empty()) {
        double q = 0.0;
        for (Eigen::Index i = 0; i < diff.size(); ++i) {
          const double l = spec.ard_lengthscales[static_cast<std::size_t>(i)];
          q += diff(i) * diff(i) / (l * l);
        }
        return spec.variance * std::exp(-0.5 * q);
      }
      return se_value(spec.variance, spec.lengthscale, dist2);
    }
    case KernelFamily::matern52: {
      const double r = std::sqrt(5.0 * dist2) / spec.lengthscale;
      return spec.variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
    case KernelFamily::periodic:
      return periodic_value(spec.variance, spec.lengthscale, spec.period, std::sqrt(dist2));
    case KernelFamily::weakly_periodic:
      return periodic_value(spec.variance, spec.lengthscale, spec.period, std::sqrt(dist2)) *
             std::exp(-0.5 * dist2 / (spec.envelope_lengthscale * spec.envelope_lengthscale));
    default:
      break;
  }
  throw ConfigError("kernel family " + to_string(family) + " is not a scalar kernel");
}

}  // namespace

std::string to_string(KernelFamily f) {
  for (const auto& [family, name] : kFamilyNames)
    if (family == f) return name;
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  for (const auto& [family, n] : kFamilyNames)
    if (name == n) return family;
  if (name == "squared_exponential" || name == "rbf") return KernelFamily::squared_exponential;
  if (name == "curlfree") return KernelFamily::curl_free;
  if (name == "divfree") return KernelFamily::div_free;
  throw ConfigError("unknown kernel family '" + name + "'");
}

void KernelSpec::validate() const {
  if (!(variance > 0.0)) throw ConfigError("kernel variance must be > 0");
  if (!(lengthscale > 0.0)) throw ConfigError("kernel lengthscale must be > 0");
  if ((family == KernelFamily::periodic || family == KernelFamily::weakly_periodic) && !(period > 0.0))
    throw ConfigError("kernel period must be > 0");
  if (input_dim < 1 || output_dim < 1) throw ConfigError("kernel dimensions must be positive");
  if ((family == KernelFamily::curl_free || family == KernelFamily::div_free) && input_dim != output_dim)
    throw ConfigError("curl/div-free kernels need output_dim == input_dim");
  if (family == KernelFamily::diagonal &&
      (base == KernelFamily::diagonal || base == KernelFamily::curl_free || base == KernelFamily::div_free))
    throw ConfigError("diagonal kernel needs a scalar base family");
  if (!ard_lengthscales.empty() && static_cast<int>(ard_lengthscales.size()) != input_dim)
    throw ConfigError("ard_lengthscales must have input_dim entries");
}

KernelSpec KernelSpec::white(double variance, int input_dim, int output_dim) {
  KernelSpec k;
  k.family = KernelFamily::white;
  k.variance = variance;
  k.input_dim = input_dim;
  k.output_dim = output_dim;
  return k;
}

KernelSpec KernelSpec::se(double variance, double lengthscale, int input_dim, int output_dim) {
  KernelSpec k;
  k.family = KernelFamily::squared_exponential;
  k.variance = variance;
  k.lengthscale = lengthscale;
  k.input_dim = input_dim;
  k.output_dim = output_dim;
  return k;
}

MeanSpec MeanSpec::zero(int output_dim) {
  MeanSpec m;
  m.output_dim = output_dim;
  return m;
}

MeanSpec MeanSpec::constant_value(const Vector& c) {
  MeanSpec m;
  m.kind = MeanKind::constant;
  m.output_dim = static_cast<int>(c.size());
  m.constant = c;
  return m;
}

MeanSpec MeanSpec::linear_map(const Matrix& a, const Vector& b) {
  require_dims(a.rows() == b.size(), "MeanSpec::linear_map: A rows must match b");
  MeanSpec m;
  m.kind = MeanKind::linear;
  m.output_dim = static_cast<int>(b.size());
  m.linear = a;
  m.constant = b;
  return m;
}

Vector MeanSpec::evaluate(const Vector& x) const {
  switch (kind) {
    case MeanKind::zero:
      return Vector::Zero(output_dim);
    case MeanKind::constant:
      return constant;
    case MeanKind::linear:
      require_dims(linear.cols() == x.size(), "MeanSpec::evaluate: input dimension mismatch");
      return linear * x + constant;
    case MeanKind::table: {
      require_dims(table_inputs.rows() > 0 && table_inputs.cols() == x.size(),
                   "MeanSpec::evaluate: table input dimension mismatch");
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < table_inputs.rows(); ++i) {
        const double d = (table_inputs.row(i).transpose() - x).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      return table_values.row(best).transpose();
    }
  }
  return Vector::Zero(output_dim);
}

Matrix equivariant_block(const KernelSpec& spec, const Vector& x, const Vector& xp) {
  require_dims(x.size() == xp.size() && x.size() == spec.input_dim,
               "equivariant_block: input dimension mismatch");
  const Eigen::Index n = x.size();
  const Vector r = x - xp;
  const double l2 = spec.lengthscale * spec.lengthscale;
  const double k0 = se_value(spec.variance, spec.lengthscale, r.squaredNorm());
  const Matrix outer = r * r.transpose() / l2;
  const Matrix eye = Matrix::Identity(n, n);
  if (spec.family == KernelFamily::curl_free) return k0 * (eye - outer);
  if (spec.family == KernelFamily::div_free)
    return k0 * (outer + (static_cast<double>(n) - 1.0 - r.squaredNorm() / l2) * eye);
  throw ConfigError("equivariant_block: family must be curl_free or div_free");
}

Matrix kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& xp) {
  require_dims(x.size() == spec.input_dim && xp.size() == spec.input_dim,
               "kernel_eval: input dimension mismatch");
  const Eigen::Index d = spec.output_dim;
  switch (spec.family) {
    case KernelFamily::curl_free:
    case KernelFamily::div_free:
      return equivariant_block(spec, x, xp);
    case KernelFamily::diagonal:
      return scalar_value(spec, spec.base, x, xp) * Matrix::Identity(d, d);
    default:
      return scalar_value(spec, spec.family, x, xp) * Matrix::Identity(d, d);
  }
}

Matrix gram(const KernelSpec& spec, const PointSet& x, const PointSet& xp) {
  require_dims(x.cols() == spec.input_dim && xp.cols() == spec.input_dim, "gram: input dimension mismatch");
  const Eigen::Index d = spec.output_dim;
  Matrix k(x.rows() * d, xp.rows() * d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector xi = x.row(i).transpose();
    for (Eigen::Index j = 0; j < xp.rows(); ++j)
      k.block(i * d, j * d, d, d) = kernel_eval(spec, xi, xp.row(j).transpose());
  }
  return k;
}

Matrix gram(const KernelSpec& spec, const PointSet& x) {
  require_dims(x.cols() == spec.input_dim, "gram: input dimension mismatch");
  const Eigen::Index d = spec.output_dim;
  const Eigen::Index n = x.rows();
  Matrix k(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = x.row(i).transpose();
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Matrix block = kernel_eval(spec, xi, x.row(j).transpose());
      k.block(i * d, j * d, d, d) = block;
      k.block(j * d, i * d, d, d) = block.transpose();
    }
  }
  return k;
}

Vector mean_vector(const MeanSpec& mean, const PointSet& x) {
  const Eigen::Index d = mean.output_dim;
  Vector m(x.rows() * d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector v = mean.evaluate(x.row(i).transpose());
    require_dims(v.size() == d, "mean_vector: mean output dimension mismatch");
    m.segment(i * d, d) = v;
  }
  return m;
}

GramResult gram(const KernelSpec& spec, const MeanSpec& mean, const PointSet& x) {
  if (x.rows() == 0) throw std::invalid_argument("gram: empty point set");
  require_dims(mean.output_dim == spec.output_dim, "gram: mean/kernel output dimension mismatch");
  return {mean_vector(mean, x), gram(spec, x)};
}

double divergence_of_kernel_column(const KernelSpec& spec, const Vector& xp, const Vector& v,
                                   const Vector& x, double h) {
  require_dims(spec.output_dim == spec.input_dim && v.size() == spec.output_dim,
               "divergence_of_kernel_column: needs a vector-valued kernel on matching dimensions");
  const Eigen::Index n = x.size();
  auto field = [&](const Vector& at) { return Vector(kernel_eval(spec, at, xp) * v); };
  auto partial = [&](Eigen::Index coord, Eigen::Index axis) {
    Vector plus = x, minus = x;
    plus(axis) += h;
    minus(axis) -= h;
    return (field(plus)(coord) - field(minus)(coord)) / (2.0 * h);
  };
  if (spec.family == KernelFamily::curl_free) {
    require_dims(n == 2, "divergence_of_kernel_column: curl only defined for 2-d inputs");
    return partial(1, 0) - partial(0, 1);
  }
  double div = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) div += partial(i, i);
  return div;
}

}  // namespace geomdiff
