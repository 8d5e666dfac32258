#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scatterbox/array.hpp"
#include "scatterbox/error.hpp"

namespace sbx {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// K triangular filters over the kept DFT bins. Row nu holds the weights
// Upsilon_nu(j); its nonzero entries are the contiguous range [lo[nu], hi[nu]).
struct MelFilterBank {
  Matrix<double> filters;           // K x kept_channels
  std::vector<std::size_t> lo, hi;  // support per row
  std::vector<double> centers_hz;   // peak frequency per row
  double fmin = 0.0;
  double fmax = 0.0;
  int sample_rate = 0;
  std::size_t fft_size = 0;
  bool area_normalized = true;

  std::size_t filter_count() const { return filters.rows(); }
  std::size_t kept_channels() const { return filters.cols(); }
};

/// Triangular filters with peaks mel-uniformly spaced between fmin and fmax;
/// filter nu spans the centers of its neighbours (K + 2 mel points in total).
/// A triangle narrower than the bin spacing is widened to reach at least one
/// bin on either side of its peak, so dense low-frequency filters interpolate
/// between the two nearest bins instead of coming out empty.
inline MelFilterBank build_mel_bank(int sample_rate, std::size_t fft_size, std::size_t kept_channels,
                                    std::size_t filter_count, double fmin, double fmax,
                                    bool area_normalize = true) {
  if (sample_rate <= 0) throw ParameterError("mel bank: sample rate must be positive");
  if (fft_size < 1 || kept_channels < 1 || kept_channels > fft_size / 2 + 1)
    throw ParameterError("mel bank: kept_channels must lie in [1, fft_size/2 + 1]");
  if (filter_count < 1) throw ParameterError("mel bank: need at least one filter");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0))
    throw ParameterError("mel bank: require 0 <= fmin < fmax <= sample_rate/2");

  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  std::size_t bins_in_band = 0;
  for (std::size_t j = 0; j < kept_channels; ++j) {
    const double f = static_cast<double>(j) * bin_hz;
    if (f >= fmin && f <= fmax) ++bins_in_band;
  }
  if (filter_count > bins_in_band)
    throw ParameterError("mel bank: " + std::to_string(filter_count) + " filters but only " +
                         std::to_string(bins_in_band) + " kept bins between fmin and fmax");

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(filter_count + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(filter_count + 1));
  edges.front() = fmin;
  edges.back() = fmax;

  MelFilterBank bank;
  bank.filters = Matrix<double>(filter_count, kept_channels);
  bank.lo.assign(filter_count, 0);
  bank.hi.assign(filter_count, 0);
  bank.centers_hz.assign(edges.begin() + 1, edges.end() - 1);
  bank.fmin = fmin;
  bank.fmax = fmax;
  bank.sample_rate = sample_rate;
  bank.fft_size = fft_size;
  bank.area_normalized = area_normalize;

  for (std::size_t nu = 0; nu < filter_count; ++nu) {
    const double center = edges[nu + 1];
    const double left = std::min(edges[nu], center - bin_hz);
    const double right = std::max(edges[nu + 2], center + bin_hz);
    double sum = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < kept_channels; ++j) {
      const double f = static_cast<double>(j) * bin_hz;
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      if (w > 0.0) {
        if (!any) bank.lo[nu] = j;
        bank.hi[nu] = j + 1;
        any = true;
      }
      bank.filters(nu, j) = w;
      sum += w;
    }
    if (!any)
      throw ParameterError("mel bank: filter " + std::to_string(nu + 1) + " of " +
                           std::to_string(filter_count) +
                           " covers no kept bin; lower fmax or keep more bins");
    if (area_normalize)
      for (std::size_t j = bank.lo[nu]; j < bank.hi[nu]; ++j) bank.filters(nu, j) /= sum;
  }
  return bank;
}

/// out(nu, k) = sum_j tf(j, k) * Upsilon_nu(j).
inline Matrix<double> apply_bank(const MelFilterBank& bank, const Matrix<double>& tf) {
  if (tf.rows() != bank.kept_channels())
    throw InputError("apply_bank: matrix has " + std::to_string(tf.rows()) + " rows, bank expects " +
                     std::to_string(bank.kept_channels()));
  Matrix<double> out(bank.filter_count(), tf.cols());
  for (std::size_t nu = 0; nu < bank.filter_count(); ++nu) {
    auto dst = out.row(nu);
    for (std::size_t j = bank.lo[nu]; j < bank.hi[nu]; ++j) {
      const double w = bank.filters(nu, j);
      const auto src = tf.row(j);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
  }
  return out;
}

}  // namespace sbx
