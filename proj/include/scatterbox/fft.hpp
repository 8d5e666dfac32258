#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "scatterbox/error.hpp"

namespace sbx {

using cplx = std::complex<double>;

namespace detail {
// FFTW's planner is not re-entrant; executing an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Forward DFT X[j] = sum_n x[n] exp(-2 pi i j n / N), backed by an FFTW plan.
// Twiddles are tabulated so exp(-2 pi i m / N) is evaluated with m reduced
// modulo N.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw ParameterError("fft size must be positive");
    twiddle_.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
      twiddle_[m] = std::polar(1.0, angle);
    }
    std::vector<cplx> probe(n);
    auto* io = reinterpret_cast<fftw_complex*>(probe.data());
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_.reset(fftw_plan_dft_1d(static_cast<int>(n), io, io, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
    if (!plan_) throw ParameterError("fftw could not create a plan of size " + std::to_string(n));
  }

  std::size_t size() const { return n_; }

  // exp(-2 pi i m / N) for any integer m.
  cplx twiddle(long long m) const {
    const long long n = static_cast<long long>(n_);
    long long r = m % n;
    if (r < 0) r += n;
    return twiddle_[static_cast<std::size_t>(r)];
  }

  // In-place transform of exactly size() values. Safe to call concurrently.
  void forward(std::span<cplx> data) const {
    if (data.size() != n_) throw InputError("fft input length does not match plan");
    auto* io = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_.get(), io, io);
  }

 private:
  struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(p);
    }
  };

  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan_;
};

}  // namespace sbx
