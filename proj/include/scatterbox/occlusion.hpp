#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "scatterbox/array.hpp"
#include "scatterbox/atloss.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/model.hpp"

namespace sbx {

struct OcclusionConfig {
  std::size_t window_freq = 8, window_frames = 8;
  std::size_t stride_freq = 4, stride_frames = 4;
  double fill_value = 0.0;
  std::size_t bin_group = 3;
  unsigned threads = 1;
};

inline void validate(const OcclusionConfig& cfg, std::size_t freq_bins, std::size_t frames) {
  if (cfg.window_freq == 0 || cfg.window_frames == 0 || cfg.stride_freq == 0 || cfg.stride_frames == 0)
    throw ParameterError("occlusion window and stride must be positive");
  if (cfg.bin_group == 0) throw ParameterError("bin group must be positive");
  if (cfg.window_freq > freq_bins || cfg.window_frames > frames)
    throw ParameterError("occlusion window " + std::to_string(cfg.window_freq) + "x" + std::to_string(cfg.window_frames) +
                         " does not fit a " + std::to_string(freq_bins) + "x" + std::to_string(frames) + " input");
}

/// Score drop map for an arbitrary classifier. `logits` maps a flat
/// channel-major input to class scores and must be safe to call from several
/// threads when cfg.threads > 1.
///
/// Patches start at 0, s, 2s, ... along each axis and are clipped at the far
/// edge. Each pixel receives the mean drop of the patches covering it (0 if
/// none does, which only happens when the stride exceeds the window). The
/// patch is applied to every channel.
template <typename LogitsFn>
  requires std::invocable<LogitsFn&, std::span<const double>>
Matrix<double> occlusion_map(LogitsFn&& logits, const Tensor3<double>& input, std::size_t true_class,
                             const OcclusionConfig& cfg) {
  const std::size_t C = input.dim0(), H = input.dim1(), W = input.dim2();
  validate(cfg, H, W);
  auto score = [&](std::span<const double> x) {
    const auto z = logits(x);
    if (true_class >= z.size()) throw InputError("true class outside the model's classes");
    return softmax(z)[true_class];
  };
  const double base = score(input.values());

  std::vector<std::size_t> rows, cols;
  for (std::size_t u = 0; u < H; u += cfg.stride_freq) rows.push_back(u);
  for (std::size_t v = 0; v < W; v += cfg.stride_frames) cols.push_back(v);
  const std::size_t n_patches = rows.size() * cols.size();
  std::vector<double> drop(n_patches);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(input.values());
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t u0 = rows[p / cols.size()], v0 = cols[p % cols.size()];
      const std::size_t u1 = std::min(H, u0 + cfg.window_freq), v1 = std::min(W, v0 + cfg.window_frames);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t u = u0; u < u1; ++u)
          std::fill(x.begin() + static_cast<long>((c * H + u) * W + v0), x.begin() + static_cast<long>((c * H + u) * W + v1),
                    cfg.fill_value);
      drop[p] = base - score(x);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t u = u0; u < u1; ++u)
          for (std::size_t v = v0; v < v1; ++v) x[(c * H + u) * W + v] = input(c, u, v);
    }
  };
  const std::size_t chunks = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(n_patches, 1));
  if (chunks == 1) {
    work(0, n_patches);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < chunks; ++k) pool.emplace_back(work, k * n_patches / chunks, (k + 1) * n_patches / chunks);
    for (auto& t : pool) t.join();
  }

  Matrix<double> sum(H, W, 0.0), hits(H, W, 0.0);
  for (std::size_t p = 0; p < n_patches; ++p) {
    const std::size_t u0 = rows[p / cols.size()], v0 = cols[p % cols.size()];
    for (std::size_t u = u0; u < std::min(H, u0 + cfg.window_freq); ++u)
      for (std::size_t v = v0; v < std::min(W, v0 + cfg.window_frames); ++v) {
        sum(u, v) += drop[p];
        hits(u, v) += 1.0;
      }
  }
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (hits.data()[i] > 0.0) sum.data()[i] /= hits.data()[i];
  return sum;
}

template <typename T>
Matrix<double> occlusion_map(const ConvClassifier<T>& model, const Tensor3<double>& input, std::size_t true_class,
                             const OcclusionConfig& cfg) {
  if (input.dim0() != model.spec.channels || input.dim1() != model.spec.height || input.dim2() != model.spec.width)
    throw InputError("input is " + std::to_string(input.dim0()) + "x" + std::to_string(input.dim1()) + "x" +
                     std::to_string(input.dim2()) + ", model expects " + std::to_string(model.spec.channels) + "x" +
                     std::to_string(model.spec.height) + "x" + std::to_string(model.spec.width));
  auto logits = [&model](std::span<const double> x) {
    std::vector<T> cast(x.begin(), x.end());
    Workspace<T> ws;
    forward_sample(model, std::span<const T>(cast), ws);
    return ws.logits;
  };
  return occlusion_map(logits, input, true_class, cfg);
}

/// Signed mean of the map over groups of `group` adjacent frequency rows.
/// There are ceil(rows / group) groups; the last one averages whatever rows
/// remain.
inline std::vector<double> frequency_importance(const Matrix<double>& map, std::size_t group) {
  if (group == 0) throw ParameterError("bin group must be positive");
  const std::size_t n_groups = (map.rows() + group - 1) / group;
  std::vector<double> out(n_groups, 0.0);
  if (map.cols() == 0) return out;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::size_t begin = g * group, end = std::min(map.rows(), begin + group);
    double acc = 0.0;
    for (std::size_t r = begin; r < end; ++r)
      for (double v : map.row(r)) acc += v;
    out[g] = acc / static_cast<double>((end - begin) * map.cols());
  }
  return out;
}

enum class MaskMode { positive, signed_map };

/// input * max(map, 0) (positive) or input * map (signed_map), the map
/// broadcast over channels.
inline Tensor3<double> masked_input(const Tensor3<double>& input, const Matrix<double>& map,
                                    MaskMode mode = MaskMode::positive) {
  if (map.rows() != input.dim1() || map.cols() != input.dim2())
    throw InputError("map is " + std::to_string(map.rows()) + "x" + std::to_string(map.cols()) + ", input planes are " +
                     std::to_string(input.dim1()) + "x" + std::to_string(input.dim2()));
  Tensor3<double> out(input.dim0(), input.dim1(), input.dim2());
  for (std::size_t c = 0; c < input.dim0(); ++c)
    for (std::size_t u = 0; u < input.dim1(); ++u)
      for (std::size_t v = 0; v < input.dim2(); ++v) {
        const double m = mode == MaskMode::positive ? std::max(map(u, v), 0.0) : map(u, v);
        out(c, u, v) = input(c, u, v) * m;
      }
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline void write_map_csv(std::ostream& out, const Matrix<double>& map) {
  out << std::setprecision(17);
  for (std::size_t r = 0; r < map.rows(); ++r) {
    for (std::size_t c = 0; c < map.cols(); ++c) out << (c ? "," : "") << map(r, c);
    out << '\n';
  }
}

struct PgmScale {
  double min = 0.0, max = 0.0;
};

/// 8-bit P5 image, row 0 first, grey = round(255 * (v - min) / (max - min))
/// (all 0 for a constant map).
inline std::string encode_pgm(const Matrix<double>& map, PgmScale* scale = nullptr) {
  if (map.size() == 0) throw InputError("cannot export an empty map");
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double span = *hi - *lo;
  std::string out = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  for (double v : map.values()) {
    const double g = span > 0.0 ? std::round(255.0 * (v - *lo) / span) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(g)));
  }
  if (scale) *scale = {*lo, *hi};
  return out;
}

/// Writes `path` and the sidecar `path` + ".txt" holding the min/max scale.
inline PgmScale write_pgm(const std::filesystem::path& path, const Matrix<double>& map) {
  PgmScale scale;
  const auto bytes = encode_pgm(map, &scale);
  std::ofstream img(path, std::ios::binary | std::ios::trunc);
  img.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream side(path.string() + ".txt", std::ios::trunc);
  side << std::setprecision(17) << "min " << scale.min << "\nmax " << scale.max << '\n';
  if (!img || !side) throw InputError("cannot write " + path.string());
  return scale;
}

}  // namespace sbx
