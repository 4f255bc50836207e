#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace semiclassical {

using Real = double;
using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr Real pi = std::numbers::pi;
inline constexpr Complex I1{0.0, 1.0};

// Failure categories map onto CLI exit codes: invariant (1), config (2), numerical (3).
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EscapeError : NumericalError {
  double time;
  EscapeError(const std::string& what, double t) : NumericalError(what), time(t) {}
};
struct CausticError : NumericalError {
  using NumericalError::NumericalError;
};
struct ProjectabilityError : NumericalError {
  using NumericalError::NumericalError;
};
struct CoverageError : NumericalError {
  using NumericalError::NumericalError;
};

struct PhasePoint {
  Vec q;
  Vec p;

  PhasePoint() = default;
  PhasePoint(Vec q_, Vec p_) : q(std::move(q_)), p(std::move(p_)) {}
  explicit PhasePoint(const Vec& z) {
    const auto d = z.size() / 2;
    q = z.head(d);
    p = z.tail(d);
  }

  int dim() const { return static_cast<int>(q.size()); }
  Vec z() const {
    Vec out(q.size() + p.size());
    out << q, p;
    return out;
  }
  bool finite() const { return q.allFinite() && p.allFinite(); }
};

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline PhasePoint point(std::initializer_list<double> z) { return PhasePoint(vec(z)); }

// Standard symplectic form J = [[0, I], [-I, 0]] on R^{2d}.
inline Mat symplectic_J(int d) {
  Mat J = Mat::Zero(2 * d, 2 * d);
  J.topRightCorner(d, d) = Mat::Identity(d, d);
  J.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
  return J;
}

inline double symplectic_residual(const Mat& k) {
  const int d = static_cast<int>(k.rows() / 2);
  const Mat J = symplectic_J(d);
  return (k.transpose() * J * k - J).norm();
}

// Newton-type correction toward the symplectic group: k <- k (I - J^{-1} E / 2), E = k^T J k - J.
inline Mat symplectic_reproject(Mat k, int iterations = 3) {
  const int d = static_cast<int>(k.rows() / 2);
  const Mat J = symplectic_J(d);
  const Mat Jinv = -J;
  for (int it = 0; it < iterations; ++it) {
    const Mat E = k.transpose() * J * k - J;
    if (E.norm() < 1e-15) break;
    k = k * (Mat::Identity(2 * d, 2 * d) - 0.5 * Jinv * E);
  }
  return k;
}

inline double sigma(const Vec& z1, const Vec& z2) {
  const auto d = z1.size() / 2;
  return z1.tail(d).dot(z2.head(d)) - z1.head(d).dot(z2.tail(d));
}

}  // namespace semiclassical
