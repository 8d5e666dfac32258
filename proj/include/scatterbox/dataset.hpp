#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "scatterbox/error.hpp"
#include "scatterbox/rng.hpp"
#include "scatterbox/signal.hpp"

namespace sbx {

// Class order used for labels, targets and the default transform bank.
inline const std::vector<std::string>& default_classes() {
  static const std::vector<std::string> names = {"clarinet", "flute", "trumpet", "violin", "saxophone", "cello"};
  return names;
}

// One ingested file. `start` is where the usable (trimmed) region begins in
// the original file and `duration` its length, both in samples.
struct AudioFileRecord {
  std::string path;
  std::string label;
  std::size_t duration = 0;
  std::size_t start = 0;
};

struct SegmentSpec {
  std::size_t segment_length = 44100;
  std::map<std::string, std::size_t> stride_per_class;
  double tukey_param = 0.1;

  std::size_t stride_for(const std::string& label) const {
    const auto it = stride_per_class.find(label);
    if (it == stride_per_class.end()) throw ConfigError("no stride configured for class '" + label + "'");
    return it->second;
  }
};

inline void validate(const SegmentSpec& spec) {
  if (spec.segment_length == 0) throw ParameterError("segment length must be positive");
  if (!(spec.tukey_param >= 0.0 && spec.tukey_param <= 1.0)) throw ParameterError("tukey parameter must lie in [0, 1]");
  for (const auto& [label, stride] : spec.stride_per_class)
    if (stride < 1 || stride > spec.segment_length)
      throw ParameterError("stride for '" + label + "' must lie in [1, segment_length]");
}

// ---------------------------------------------------------------------------
// Silence trimming

struct TrimResult {
  SampledSignal signal;
  std::size_t start = 0;  // first kept sample in the input
  bool silent = false;    // nothing reached the threshold; signal is empty
};

/// Drops leading and trailing stretches whose centered short-time RMS
/// (window min_window) stays below peak * 10^(threshold_db / 20).
inline TrimResult trim_silence(const SampledSignal& signal, double threshold_db = -50.0, std::size_t min_window = 1024) {
  if (!(threshold_db < 0.0)) throw ParameterError("trim threshold must be negative (dB relative to peak)");
  if (min_window == 0) throw ParameterError("trim window must be positive");
  const std::size_t n = signal.size();
  TrimResult out;
  out.signal.sample_rate = signal.sample_rate;
  double peak = 0.0;
  for (double v : signal.samples) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) {
    out.silent = true;
    return out;
  }
  const double threshold = peak * std::pow(10.0, threshold_db / 20.0);

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + signal.samples[i] * signal.samples[i];
  const std::size_t half = min_window / 2;
  auto loud = [&](std::size_t t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n, lo + min_window);
    const double mean = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    return std::sqrt(std::max(mean, 0.0)) >= threshold;
  };

  std::size_t first = 0;
  while (first < n && !loud(first)) ++first;
  if (first == n) {
    out.silent = true;
    return out;
  }
  std::size_t last = n - 1;
  while (last > first && !loud(last)) --last;
  out.start = first;
  out.signal.samples.assign(signal.samples.begin() + static_cast<long>(first),
                            signal.samples.begin() + static_cast<long>(last + 1));
  return out;
}

// ---------------------------------------------------------------------------
// Stride balancing

inline std::size_t segment_count(std::size_t length, std::size_t segment_length, std::size_t stride) {
  if (length < segment_length || stride == 0) return 0;
  return (length - segment_length) / stride + 1;
}

struct StrideBalance {
  std::map<std::string, std::size_t> stride;
  std::map<std::string, std::size_t> segments;   // expected count at that stride
  std::map<std::string, std::size_t> shortfall;  // classes that cannot reach 90 % of the target

  bool feasible() const { return shortfall.empty(); }
};

/// stride_c = clamp(floor(available_c / target), 1, segment_length), with the
/// class treated as one contiguous stream of available_c samples.
inline StrideBalance balance_strides(const std::map<std::string, std::size_t>& per_class_samples,
                                     std::size_t segment_length, std::size_t target_segments) {
  if (segment_length == 0 || target_segments == 0) throw ParameterError("segment length and target must be positive");
  StrideBalance out;
  for (const auto& [label, available] : per_class_samples) {
    if (available < segment_length)
      throw InputError("class '" + label + "' has " + std::to_string(available) + " samples, fewer than one segment");
    const std::size_t stride = std::clamp<std::size_t>(available / target_segments, 1, segment_length);
    const std::size_t count = segment_count(available, segment_length, stride);
    out.stride[label] = stride;
    out.segments[label] = count;
    if (static_cast<double>(count) < 0.9 * static_cast<double>(target_segments))
      out.shortfall[label] = target_segments - count;
  }
  return out;
}

/// Per-file variant: the largest stride whose summed per-file segment count
/// reaches the target. Segments never straddle files, so many short files
/// need a smaller stride than the pooled formula suggests.
inline StrideBalance balance_strides_for_files(const std::map<std::string, std::vector<std::size_t>>& file_lengths,
                                               std::size_t segment_length, std::size_t target_segments) {
  if (segment_length == 0 || target_segments == 0) throw ParameterError("segment length and target must be positive");
  StrideBalance out;
  for (const auto& [label, lengths] : file_lengths) {
    auto total = [&](std::size_t stride) {
      std::size_t sum = 0;
      for (std::size_t len : lengths) sum += segment_count(len, segment_length, stride);
      return sum;
    };
    if (total(segment_length) == 0)
      throw InputError("class '" + label + "' has no file as long as one segment");
    // total() is non-increasing in the stride: find the largest stride with total >= target.
    std::size_t lo = 1, hi = segment_length;
    if (total(1) < target_segments) {
      hi = 1;
    } else {
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (total(mid) >= target_segments) lo = mid;
        else hi = mid - 1;
      }
    }
    const std::size_t count = total(hi);
    out.stride[label] = hi;
    out.segments[label] = count;
    if (static_cast<double>(count) < 0.9 * static_cast<double>(target_segments))
      out.shortfall[label] = target_segments - count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

struct Segment {
  std::size_t offset = 0;
  std::vector<double> samples;
};

/// Tukey-windowed segments at offsets 0, stride, 2*stride, ... Signals shorter
/// than one segment yield an empty list.
inline std::vector<Segment> segment(const SampledSignal& signal, const SegmentSpec& spec, const std::string& label) {
  validate(spec);
  const std::size_t stride = spec.stride_for(label);
  const std::size_t len = spec.segment_length;
  const std::size_t count = segment_count(signal.size(), len, stride);
  std::vector<Segment> out;
  if (count == 0) return out;
  const auto window = make_window({WindowKind::tukey, len, spec.tukey_param});
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Segment seg{s * stride, std::vector<double>(len)};
    for (std::size_t t = 0; t < len; ++t) seg.samples[t] = signal.samples[seg.offset + t] * window[t];
    out.push_back(std::move(seg));
  }
  return out;
}

/// Segment starting at `offset` of an already loaded file, windowed.
inline std::vector<double> extract_segment(const SampledSignal& signal, std::size_t offset, std::size_t length,
                                           double tukey_param) {
  if (offset + length > signal.size())
    throw InputError("segment at " + std::to_string(offset) + " runs past the end of the signal (" +
                     std::to_string(signal.size()) + " samples)");
  const auto window = make_window({WindowKind::tukey, length, tukey_param});
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) out[t] = signal.samples[offset + t] * window[t];
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

enum class SplitSet { train, val, test };

inline std::string to_string(SplitSet s) {
  switch (s) {
    case SplitSet::train: return "train";
    case SplitSet::val: return "val";
    case SplitSet::test: return "test";
  }
  return "?";
}

inline SplitSet split_set_from_string(const std::string& s) {
  if (s == "train") return SplitSet::train;
  if (s == "val") return SplitSet::val;
  if (s == "test") return SplitSet::test;
  throw FormatError("unknown split set '" + s + "'");
}

// A segment reference. `offset` is in original-file samples.
struct SegmentRef {
  std::string path;
  std::string label;
  std::size_t offset = 0;

  auto operator<=>(const SegmentRef&) const = default;
};

struct DatasetSplit {
  std::vector<SegmentRef> train, val, test;
  std::uint64_t seed = 0;

  const std::vector<SegmentRef>& set(SplitSet s) const {
    return s == SplitSet::train ? train : s == SplitSet::val ? val : test;
  }
  std::vector<SegmentRef>& set(SplitSet s) { return s == SplitSet::train ? train : s == SplitSet::val ? val : test; }
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline std::map<std::string, std::size_t> per_class_counts(const std::vector<SegmentRef>& refs) {
  std::map<std::string, std::size_t> out;
  for (const auto& r : refs) ++out[r.label];
  return out;
}

/// Whole files go to exactly one set. Within each class (classes and files
/// taken in sorted order) the files are shuffled; the first
/// max(1, round(val * n)) go to validation, the next max(1, round(test * n))
/// to test, the rest to training. Validation and test are then down-sampled
/// at random to the smallest per-class count found in either of them, so
/// both sets hold the same number of segments for every class.
inline DatasetSplit split(const std::vector<AudioFileRecord>& files, const SegmentSpec& spec, SplitRatios ratios,
                          std::uint64_t seed) {
  validate(spec);
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ParameterError("split ratios must be positive and sum to 1");

  std::map<std::string, std::vector<AudioFileRecord>> by_class;
  for (const auto& f : files) by_class[f.label].push_back(f);
  for (auto& [label, list] : by_class) {
    std::sort(list.begin(), list.end(),
              [](const AudioFileRecord& a, const AudioFileRecord& b) { return a.path < b.path; });
    if (list.size() < 3)
      throw ConfigError("class '" + label + "' has " + std::to_string(list.size()) +
                        " file(s); at least 3 are needed to populate train, val and test");
  }

  SplitMix64 rng(seed);
  DatasetSplit out;
  out.seed = seed;
  auto add_segments = [&](const AudioFileRecord& f, std::vector<SegmentRef>& dst) {
    const std::size_t stride = spec.stride_for(f.label);
    const std::size_t count = segment_count(f.duration, spec.segment_length, stride);
    for (std::size_t s = 0; s < count; ++s) dst.push_back({f.path, f.label, f.start + s * stride});
  };

  std::map<std::string, std::vector<SegmentRef>> val_by_class, test_by_class;
  for (auto& [label, list] : by_class) {
    const std::size_t n = list.size();
    rng.shuffle(std::span<AudioFileRecord>(list));
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratios.val * n)));
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratios.test * n)));
    if (n_val + n_test >= n)
      throw ConfigError("class '" + label + "' has too few files (" + std::to_string(n) +
                        ") for the requested split ratios");
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_val) add_segments(list[i], val_by_class[label]);
      else if (i < n_val + n_test) add_segments(list[i], test_by_class[label]);
      else add_segments(list[i], out.train);
    }
  }

  std::size_t floor_count = std::numeric_limits<std::size_t>::max();
  for (const auto& [label, list] : by_class) {
    floor_count = std::min({floor_count, val_by_class[label].size(), test_by_class[label].size()});
    if (floor_count == 0)
      throw ConfigError("class '" + label + "' has no full-length segment in its validation or test files");
  }
  auto take = [&](std::map<std::string, std::vector<SegmentRef>>& groups, std::vector<SegmentRef>& dst) {
    for (auto& [label, list] : groups) {
      rng.shuffle(std::span<SegmentRef>(list));
      dst.insert(dst.end(), list.begin(), list.begin() + static_cast<long>(floor_count));
    }
  };
  take(val_by_class, out.val);
  take(test_by_class, out.test);
  for (auto* set : {&out.train, &out.val, &out.test}) std::sort(set->begin(), set->end());
  return out;
}

// ---------------------------------------------------------------------------
// Class share floor

struct ClassFilter {
  std::vector<AudioFileRecord> kept;
  std::map<std::string, double> share;  // fraction of all samples, per class
  std::vector<std::string> excluded;
};

/// Keeps classes holding at least `floor` of all samples.
inline ClassFilter filter_classes(const std::vector<AudioFileRecord>& files, double floor = 0.10) {
  std::map<std::string, std::size_t> samples;
  std::size_t total = 0;
  for (const auto& f : files) {
    samples[f.label] += f.duration;
    total += f.duration;
  }
  ClassFilter out;
  for (const auto& [label, count] : samples) {
    out.share[label] = total > 0 ? static_cast<double>(count) / static_cast<double>(total) : 0.0;
    if (out.share[label] < floor) out.excluded.push_back(label);
  }
  const std::set<std::string> dropped(out.excluded.begin(), out.excluded.end());
  for (const auto& f : files)
    if (!dropped.count(f.label)) out.kept.push_back(f);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: <path>\t<label>\t<offset>\t<train|val|test>, sorted by set, path, offset.

inline void write_manifest(std::ostream& out, const DatasetSplit& split) {
  for (auto s : {SplitSet::train, SplitSet::val, SplitSet::test})
    for (const auto& r : split.set(s)) out << r.path << '\t' << r.label << '\t' << r.offset << '\t' << to_string(s) << '\n';
}

inline std::string manifest_string(const DatasetSplit& split) {
  std::ostringstream out;
  write_manifest(out, split);
  return out.str();
}

inline DatasetSplit read_manifest(std::istream& in) {
  DatasetSplit out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
      const auto tab = line.find('\t', begin);
      fields.push_back(line.substr(begin, tab - begin));
      if (tab == std::string::npos) break;
      begin = tab + 1;
    }
    if (fields.size() != 4) throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    SegmentRef ref{fields[0], fields[1], 0};
    try {
      std::size_t used = 0;
      ref.offset = std::stoull(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": bad offset '" + fields[2] + "'");
    }
    out.set(split_set_from_string(fields[3])).push_back(std::move(ref));
  }
  return out;
}

}  // namespace sbx
