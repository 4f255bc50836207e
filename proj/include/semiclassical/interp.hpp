#pragma once

#include "semiclassical/types.hpp"

#include <algorithm>
#include <vector>

namespace semiclassical {

// Uniform 1D grid y_i = y0 + i*dy, i = 0..n-1.
struct UniformGrid1 {
  double y0 = 0.0;
  double dy = 1.0;
  int n = 0;

  double at(int i) const { return y0 + i * dy; }
  double back() const { return at(n - 1); }

  // Cell index and local coordinate s in [0,1]; clamps to the grid.
  std::pair<int, double> locate(double y) const {
    double u = (y - y0) / dy;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, n - 2);
    return {i, u - i};
  }
  bool contains(double y, double slack = 1e-12) const {
    return y >= y0 - slack * dy && y <= back() + slack * dy;
  }
};

// Cubic Hermite interpolation with known derivatives.
template <class T>
T hermite(const UniformGrid1& g, const std::vector<T>& f, const std::vector<T>& df, double y) {
  auto [i, s] = g.locate(y);
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * f[i] + h10 * g.dy * df[i] + h01 * f[i + 1] + h11 * g.dy * df[i + 1];
}

// Catmull-Rom style cubic interpolation (derivatives from central differences).
template <class T>
T cubic(const UniformGrid1& g, const std::vector<T>& f, double y) {
  auto [i, s] = g.locate(y);
  const int n = g.n;
  auto val = [&](int k) -> T {
    if (k < 0) return f[0] + double(k) * (f[1] - f[0]);
    if (k >= n) return f[n - 1] + double(k - n + 1) * (f[n - 1] - f[n - 2]);
    return f[k];
  };
  const T p0 = val(i - 1), p1 = val(i), p2 = val(i + 1), p3 = val(i + 2);
  const T m1 = 0.5 * (p2 - p0), m2 = 0.5 * (p3 - p1);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * p1 + (s3 - 2 * s2 + s) * m1 + (-2 * s3 + 3 * s2) * p2 +
         (s3 - s2) * m2;
}

// Fourth-order finite-difference derivative on a uniform grid (one-sided near the ends).
inline std::vector<double> fd_derivative(const std::vector<double>& f, double h) {
  const int n = static_cast<int>(f.size());
  std::vector<double> d(n, 0.0);
  if (n < 5) {
    for (int i = 0; i < n; ++i) {
      const int a = std::max(0, i - 1), b = std::min(n - 1, i + 1);
      d[i] = (f[b] - f[a]) / ((b - a) * h);
    }
    return d;
  }
  for (int i = 0; i < n; ++i) {
    if (i >= 2 && i <= n - 3)
      d[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h);
    else if (i < 2)
      d[i] = (-25 * f[i] + 48 * f[i + 1] - 36 * f[i + 2] + 16 * f[i + 3] - 3 * f[i + 4]) / (12 * h);
    else
      d[i] = (25 * f[i] - 48 * f[i - 1] + 36 * f[i - 2] - 16 * f[i - 3] + 3 * f[i - 4]) / (12 * h);
  }
  return d;
}

// Piecewise-linear interpolation on a monotone (increasing) abscissa.
inline double interp_monotone(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  size_t j = std::clamp<size_t>(static_cast<size_t>(it - xs.begin()), 1, xs.size() - 1);
  const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace semiclassical
