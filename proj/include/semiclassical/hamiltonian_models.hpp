#pragma once

#include "semiclassical/polynomial.hpp"
#include "semiclassical/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>

namespace semiclassical {

using Params = std::map<std::string, double>;

// Symmetric order-k tensor over R^n stored densely (row-major over the k indices).
struct SymTensor {
  int n = 0;
  int k = 0;
  std::vector<double> data;

  double& at(const std::vector<int>& idx) { return data[flat(idx)]; }
  double at(const std::vector<int>& idx) const { return data[flat(idx)]; }
  size_t flat(const std::vector<int>& idx) const {
    size_t f = 0;
    for (int i : idx) f = f * n + i;
    return f;
  }
  double max_abs() const {
    double m = 0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }

  // Entries from a homogeneous polynomial: T_{i1..ik} = c_a / multinomial(a).
  static SymTensor from_homogeneous(const RealPoly& h, int n, int k) {
    SymTensor t{n, k, std::vector<double>(static_cast<size_t>(std::pow(n, k)), 0.0)};
    std::vector<int> idx(k, 0);
    const size_t total = t.data.size();
    for (size_t f = 0; f < total; ++f) {
      size_t r = f;
      for (int j = k - 1; j >= 0; --j) {
        idx[j] = static_cast<int>(r % n);
        r /= n;
      }
      MultiIndex a(n, 0);
      for (int i : idx) ++a[i];
      double multinom = std::tgamma(k + 1.0);
      for (int v : a) multinom /= std::tgamma(v + 1.0);
      t.data[f] = h.coeff(a) / multinom;
    }
    return t;
  }

  // Back to the polynomial sum_{i} T_i z_{i1}...z_{ik}.
  RealPoly to_polynomial() const {
    RealPoly p(n);
    std::vector<int> idx(k, 0);
    for (size_t f = 0; f < data.size(); ++f) {
      if (data[f] == 0.0) continue;
      size_t r = f;
      for (int j = k - 1; j >= 0; --j) {
        idx[j] = static_cast<int>(r % n);
        r /= n;
      }
      MultiIndex a(n, 0);
      for (int i : idx) ++a[i];
      p.add(a, data[f]);
    }
    return p;
  }
};

// Polynomial symbol p(x, xi) on R^{2d}; variables ordered (x_1..x_d, xi_1..xi_d).
// Central coordinates come first in x: x = (x_par, y_perp).
class ModelHamiltonian {
 public:
  std::string name;
  int d = 1;
  int d_par = 1;
  int d_perp = 0;
  Params params;
  int max_taylor_order = 6;
  bool is_quadratic = false;
  bool has_invariant_K = false;
  bool kinetic_potential = false;

  ModelHamiltonian() = default;

  // p = |xi|^2 + V(x) when potential is given, otherwise the full symbol.
  static ModelHamiltonian from_symbol(std::string name, int d, int d_par, RealPoly symbol,
                                      std::optional<RealPoly> potential = std::nullopt) {
    ModelHamiltonian h;
    h.name = std::move(name);
    h.d = d;
    h.d_par = d_par;
    h.d_perp = d - d_par;
    h.symbol_ = std::move(symbol);
    h.is_quadratic = h.symbol_.degree() <= 2;
    h.kinetic_potential = potential.has_value();
    if (potential) h.potential_ = *potential;
    h.prepare();
    h.has_invariant_K = h.check_invariant_K();
    return h;
  }

  const RealPoly& symbol() const { return symbol_; }
  const RealPoly& potential() const { return potential_; }
  const RealPoly& potential_gradient(int j) const { return dV_[j]; }

  double eval(const PhasePoint& r) const { return symbol_(r.z()); }
  double eval(const Vec& z) const { return symbol_(z); }

  Vec gradient(const Vec& z) const {
    Vec g(2 * d);
    for (int i = 0; i < 2 * d; ++i) g(i) = grad_[i](z);
    return g;
  }
  Mat hessian(const Vec& z) const {
    Mat H(2 * d, 2 * d);
    for (int i = 0; i < 2 * d; ++i)
      for (int j = i; j < 2 * d; ++j) H(i, j) = H(j, i) = hess_[i][j](z);
    return H;
  }

  // (dp/dxi, -dp/dx)
  Vec vector_field(const Vec& z) const {
    const Vec g = gradient(z);
    Vec f(2 * d);
    f.head(d) = g.tail(d);
    f.tail(d) = -g.head(d);
    return f;
  }

  // Degree-k homogeneous part of z -> p(rho + z), i.e. (1/k!) D^k p(rho)[z,...,z].
  RealPoly taylor_polynomial(const Vec& rho, int k) const {
    if (k < 0 || k > max_taylor_order) throw std::out_of_range("taylor order out of range");
    return shifted(rho).homogeneous(k);
  }
  RealPoly shifted(const Vec& rho) const {
    return symbol_.substitute(Mat::Identity(2 * d, 2 * d), rho);
  }

  SymTensor taylor_tensor(const Vec& rho, int k) const {
    return SymTensor::from_homogeneous(taylor_polynomial(rho, k), 2 * d, k);
  }

 private:
  void prepare() {
    const int n = 2 * d;
    grad_.clear();
    hess_.assign(n, std::vector<RealPoly>(n));
    for (int i = 0; i < n; ++i) grad_.push_back(symbol_.derivative(i));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) hess_[i][j] = grad_[i].derivative(j);
    dV_.clear();
    if (kinetic_potential)
      for (int j = 0; j < d; ++j) dV_.push_back(potential_.derivative(j));
  }

  // K = {y = 0, eta = 0}: the (y, eta) components of H_p vanish there identically
  // iff every monomial of dp/dy and dp/deta involves some y or eta.
  bool check_invariant_K() const {
    if (d_perp == 0) return true;
    auto transverse_var = [&](int v) { return (v >= d_par && v < d) || v >= d + d_par; };
    for (int i = 0; i < 2 * d; ++i) {
      if (!transverse_var(i)) continue;
      for (const auto& [a, c] : grad_[i].coeffs()) {
        if (c == 0.0) continue;
        bool has = false;
        for (int v = 0; v < 2 * d; ++v)
          if (a[v] > 0 && transverse_var(v)) has = true;
        if (!has) return false;
      }
    }
    return true;
  }

  RealPoly symbol_;
  RealPoly potential_;
  std::vector<RealPoly> grad_;
  std::vector<std::vector<RealPoly>> hess_;
  std::vector<RealPoly> dV_;
};

namespace detail {

inline double take(const Params& p, const std::string& key, std::set<std::string>& used,
                   std::optional<double> fallback = std::nullopt) {
  auto it = p.find(key);
  if (it == p.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing model parameter '" + key + "'");
  }
  used.insert(key);
  return it->second;
}

inline MultiIndex mi(std::initializer_list<int> a) { return MultiIndex(a); }

}  // namespace detail

// Catalog: harmonic, dilation, anharmonic_quartic, saddle_cubic, nh2d.
inline ModelHamiltonian make_model(const std::string& name, const Params& params = {}) {
  using detail::take;
  std::set<std::string> used;
  ModelHamiltonian h;

  auto kinetic = [](int d) {
    RealPoly p(2 * d);
    for (int j = 0; j < d; ++j) {
      MultiIndex a(2 * d, 0);
      a[d + j] = 2;
      p.add(a, 1.0);
    }
    return p;
  };
  auto lift = [](const RealPoly& v, int d) {
    RealPoly p(2 * d);
    for (const auto& [a, c] : v.coeffs()) {
      MultiIndex b(2 * d, 0);
      for (int j = 0; j < d; ++j) b[j] = a[j];
      p.add(b, c);
    }
    return p;
  };

  if (name == "harmonic") {
    const int d = static_cast<int>(take(params, "d", used, 1.0));
    if (d < 1 || d > 3) throw ConfigError("harmonic: d must be 1..3");
    RealPoly V(d);
    for (int j = 0; j < d; ++j) {
      MultiIndex a(d, 0);
      a[j] = 2;
      V.add(a, 1.0);
    }
    h = ModelHamiltonian::from_symbol(name, d, d, kinetic(d) + lift(V, d), V);
  } else if (name == "dilation") {
    const int d = static_cast<int>(take(params, "d", used, 1.0));
    const bool transverse = take(params, "transverse", used, 1.0) != 0.0;
    if (d < 1 || d > 3) throw ConfigError("dilation: d must be 1..3");
    RealPoly p(2 * d);
    for (int j = 0; j < d; ++j) {
      MultiIndex a(2 * d, 0);
      a[j] = 1;
      a[d + j] = 1;
      p.add(a, 1.0);
    }
    h = ModelHamiltonian::from_symbol(name, d, transverse ? 0 : d, p);
  } else if (name == "anharmonic_quartic") {
    const double beta = take(params, "beta", used);
    RealPoly V(1);
    V.add(detail::mi({2}), 1.0);
    V.add(detail::mi({4}), beta);
    h = ModelHamiltonian::from_symbol(name, 1, 1, kinetic(1) + lift(V, 1), V);
  } else if (name == "saddle_cubic") {
    const double beta = take(params, "beta", used);
    RealPoly V(1);
    V.add(detail::mi({2}), -1.0);
    V.add(detail::mi({3}), beta);
    // The saddle point is the whole invariant set: fully transverse.
    h = ModelHamiltonian::from_symbol(name, 1, 0, kinetic(1) + lift(V, 1), V);
  } else if (name == "nh2d") {
    const double eps = take(params, "epsilon", used);
    RealPoly V(2);
    V.add(detail::mi({2, 0}), 1.0);
    V.add(detail::mi({0, 2}), -1.0);
    V.add(detail::mi({1, 2}), eps);
    h = ModelHamiltonian::from_symbol(name, 2, 1, kinetic(2) + lift(V, 2), V);
  } else {
    throw ConfigError("unknown model '" + name + "'");
  }
  for (const auto& kv : params)
    if (!used.count(kv.first))
      throw ConfigError("model '" + name + "' does not take parameter '" + kv.first + "'");
  h.params = params;
  return h;
}

}  // namespace semiclassical
