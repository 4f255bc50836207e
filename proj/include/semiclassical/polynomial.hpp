#pragma once

#include "semiclassical/types.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace semiclassical {

using MultiIndex = std::vector<int>;

inline int order(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

// All multi-indices in n variables with |a| == k, in lexicographic order.
inline std::vector<MultiIndex> multi_indices_of_order(int n, int k) {
  std::vector<MultiIndex> out;
  MultiIndex a(n, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == n - 1) {
      a[pos] = left;
      out.push_back(a);
      return;
    }
    for (int v = left; v >= 0; --v) {
      a[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  if (n == 0) {
    if (k == 0) out.push_back({});
    return out;
  }
  rec(rec, 0, k);
  return out;
}

inline std::vector<MultiIndex> multi_indices_up_to(int n, int kmax) {
  std::vector<MultiIndex> out;
  for (int k = 0; k <= kmax; ++k) {
    auto part = multi_indices_of_order(n, k);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// Sparse polynomial in n variables: multi-index -> coefficient.
template <class T>
class Polynomial {
 public:
  using Map = std::map<MultiIndex, T>;

  Polynomial() = default;
  explicit Polynomial(int nvars) : n_(nvars) {}

  static Polynomial constant(int nvars, T c) {
    Polynomial p(nvars);
    if (c != T(0)) p.c_[MultiIndex(nvars, 0)] = c;
    return p;
  }
  static Polynomial monomial(const MultiIndex& a, T c = T(1)) {
    Polynomial p(static_cast<int>(a.size()));
    p.c_[a] = c;
    return p;
  }
  static Polynomial variable(int nvars, int j) {
    MultiIndex a(nvars, 0);
    a[j] = 1;
    return monomial(a);
  }

  int nvars() const { return n_; }
  const Map& coeffs() const { return c_; }
  Map& coeffs() { return c_; }

  T coeff(const MultiIndex& a) const {
    auto it = c_.find(a);
    return it == c_.end() ? T(0) : it->second;
  }
  void add(const MultiIndex& a, T v) {
    if (v == T(0)) return;
    auto [it, inserted] = c_.try_emplace(a, v);
    if (!inserted) it->second += v;
  }

  int degree() const {
    int d = 0;
    for (const auto& [a, v] : c_)
      if (std::abs(v) != 0.0) d = std::max(d, order(a));
    return d;
  }
  bool is_zero() const {
    for (const auto& kv : c_)
      if (std::abs(kv.second) != 0.0) return false;
    return true;
  }
  // Sup norm of the coefficients.
  double sup_norm() const {
    double m = 0.0;
    for (const auto& kv : c_) m = std::max(m, static_cast<double>(std::abs(kv.second)));
    return m;
  }

  // Remove coefficients with magnitude below tol * sup_norm.
  Polynomial& prune(double tol = 0.0) {
    const double cut = tol * sup_norm();
    for (auto it = c_.begin(); it != c_.end();) {
      if (std::abs(it->second) <= cut)
        it = c_.erase(it);
      else
        ++it;
    }
    return *this;
  }

  Polynomial& operator+=(const Polynomial& o) {
    if (n_ == 0 && c_.empty()) n_ = o.n_;
    for (const auto& [a, v] : o.c_) add(a, v);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    if (n_ == 0 && c_.empty()) n_ = o.n_;
    for (const auto& [a, v] : o.c_) add(a, -v);
    return *this;
  }
  Polynomial& operator*=(T s) {
    for (auto& kv : c_) kv.second *= s;
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, T s) { return a *= s; }
  friend Polynomial operator*(T s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial r(std::max(a.n_, b.n_));
    for (const auto& [ia, va] : a.c_)
      for (const auto& [ib, vb] : b.c_) {
        MultiIndex s(ia.size());
        for (size_t k = 0; k < ia.size(); ++k) s[k] = ia[k] + ib[k];
        r.add(s, va * vb);
      }
    return r;
  }

  Polynomial times_variable(int j) const {
    Polynomial r(n_);
    for (const auto& [a, v] : c_) {
      MultiIndex b = a;
      ++b[j];
      r.c_.emplace(std::move(b), v);
    }
    return r;
  }

  Polynomial derivative(int j) const {
    Polynomial r(n_);
    for (const auto& [a, v] : c_) {
      if (a[j] == 0) continue;
      MultiIndex b = a;
      --b[j];
      r.add(b, v * static_cast<double>(a[j]));
    }
    return r;
  }

  template <class V>
  auto operator()(const V& x) const {
    using R = decltype(T(0) * x(0));
    R s = R(0);
    for (const auto& [a, v] : c_) {
      R m = R(v);
      for (int k = 0; k < n_; ++k)
        for (int e = 0; e < a[k]; ++e) m *= x(k);
      s += m;
    }
    return s;
  }

  // Homogeneous part of degree k.
  Polynomial homogeneous(int k) const {
    Polynomial r(n_);
    for (const auto& [a, v] : c_)
      if (order(a) == k) r.c_.emplace(a, v);
    return r;
  }

  // Q(w) = P(L w + c) for an n x m matrix L (result has m variables).
  template <class MatL, class VecC>
  Polynomial<decltype(T(0) * typename MatL::Scalar(0))> substitute(const MatL& L, const VecC& c) const {
    using S = decltype(T(0) * typename MatL::Scalar(0));
    const int m = static_cast<int>(L.cols());
    std::vector<Polynomial<S>> lin(n_);
    for (int k = 0; k < n_; ++k) {
      lin[k] = Polynomial<S>::constant(m, S(c(k)));
      for (int j = 0; j < m; ++j)
        if (L(k, j) != typename MatL::Scalar(0)) lin[k].add(unit(m, j), S(L(k, j)));
    }
    // Cache powers per variable.
    std::vector<std::vector<Polynomial<S>>> pw(n_);
    const int deg = degree();
    for (int k = 0; k < n_; ++k) {
      pw[k].push_back(Polynomial<S>::constant(m, S(1)));
      for (int e = 1; e <= deg; ++e) pw[k].push_back(pw[k].back() * lin[k]);
    }
    Polynomial<S> out(m);
    for (const auto& [a, v] : c_) {
      Polynomial<S> term = Polynomial<S>::constant(m, S(v));
      for (int k = 0; k < n_; ++k)
        if (a[k] > 0) term = term * pw[k][a[k]];
      out += term;
    }
    return out;
  }

  template <class U>
  Polynomial<U> cast() const {
    Polynomial<U> r(n_);
    for (const auto& [a, v] : c_) r.coeffs().emplace(a, U(v));
    return r;
  }

 private:
  static MultiIndex unit(int n, int j) {
    MultiIndex a(n, 0);
    a[j] = 1;
    return a;
  }

  int n_ = 0;
  Map c_;
};

using RealPoly = Polynomial<double>;
using ComplexPoly = Polynomial<Complex>;

}  // namespace semiclassical
