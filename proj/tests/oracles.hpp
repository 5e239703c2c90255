#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

// Reference computations built only on dense LU / closed forms, independent of the
// Cholesky-based code paths under test.
namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double gaussian_logpdf(const Vector& y, const Vector& m, const Matrix& s) {
  Eigen::FullPivLU<Matrix> lu(s);
  const Vector r = y - m;
  const double logdet = std::log(std::abs(lu.determinant()));
  return -0.5 * (r.dot(lu.solve(r)) + logdet + static_cast<double>(y.size()) * std::log(2.0 * M_PI));
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

inline double se(double r2, double variance, double lengthscale) {
  return variance * std::exp(-0.5 * r2 / (lengthscale * lengthscale));
}

// Conditioning through an explicit inverse of the context block.
struct Posterior {
  Vector mean;
  Matrix cov;
};
inline Posterior condition(const Matrix& joint, const Vector& mean, const Vector& yc, Eigen::Index nc) {
  const Eigen::Index nt = joint.rows() - nc;
  const Matrix kcc_inv = joint.topLeftCorner(nc, nc).inverse();
  const Matrix ktc = joint.bottomLeftCorner(nt, nc);
  Posterior p;
  p.mean = mean.tail(nt) + ktc * kcc_inv * (yc - mean.head(nc));
  p.cov = joint.bottomRightCorner(nt, nt) - ktc * kcc_inv * ktc.transpose();
  return p;
}

inline double kl(const Vector& m0, const Matrix& s0, const Vector& m1, const Matrix& s1) {
  const Matrix s1i = s1.inverse();
  const Vector d = m1 - m0;
  const double k = static_cast<double>(m0.size());
  return 0.5 * ((s1i * s0).trace() + d.dot(s1i * d) - k + std::log(s1.determinant() / s0.determinant()));
}

}  // namespace oracle
