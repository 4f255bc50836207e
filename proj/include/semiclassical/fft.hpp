#pragma once

#include "semiclassical/types.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

namespace semiclassical {

// FFTW planning is not thread-safe; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place n-dimensional complex transform (unnormalized), axis 0 slowest.
class FFTPlan {
 public:
  FFTPlan() = default;
  FFTPlan(const std::vector<int>& dims, int sign) : dims_(dims) {
    size_t total = 1;
    for (int n : dims) total *= static_cast<size_t>(n);
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buf_, buf_, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  FFTPlan(const FFTPlan&) = delete;
  FFTPlan& operator=(const FFTPlan&) = delete;
  FFTPlan(FFTPlan&& o) noexcept { swap(o); }
  FFTPlan& operator=(FFTPlan&& o) noexcept {
    swap(o);
    return *this;
  }
  ~FFTPlan() {
    if (plan_) {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    if (buf_) fftw_free(buf_);
  }

  void execute(CVec& v) const {
    auto* p = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(plan_, p, p);
  }

 private:
  void swap(FFTPlan& o) {
    std::swap(dims_, o.dims_);
    std::swap(plan_, o.plan_);
    std::swap(buf_, o.buf_);
  }
  std::vector<int> dims_;
  fftw_plan plan_ = nullptr;
  fftw_complex* buf_ = nullptr;
};

// Angular wavenumbers for an axis of n samples at spacing dx, in FFT order.
inline Vec fft_wavenumbers(int n, double dx) {
  Vec k(n);
  for (int m = 0; m < n; ++m) {
    const int mm = m < (n + 1) / 2 ? m : m - n;
    k(m) = 2 * pi * mm / (n * dx);
  }
  return k;
}

}  // namespace semiclassical
