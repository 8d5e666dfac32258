#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "scatterbox/error.hpp"

namespace sbx {

// One target-space transform: T(y) = <y, vector>, penalised with
// weight * (T(p) - T(y))^2.
struct TargetTransform {
  std::string name;
  std::vector<double> vector;
  double weight = 0.0;

  bool operator==(const TargetTransform&) const = default;
};

struct ATConfig {
  std::vector<TargetTransform> transforms;
  double base_weight = 1.0;  // on the cross-entropy term
};

inline void validate(const ATConfig& cfg, std::size_t classes) {
  if (!(cfg.base_weight >= 0.0) || !std::isfinite(cfg.base_weight))
    throw ParameterError("base weight must be finite and non-negative");
  for (const auto& t : cfg.transforms) {
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
      throw ParameterError("transform '" + t.name + "' has a negative or non-finite weight");
    if (t.vector.size() != classes)
      throw ParameterError("transform '" + t.name + "' has " + std::to_string(t.vector.size()) +
                           " entries, expected " + std::to_string(classes));
    for (double v : t.vector)
      if (!std::isfinite(v)) throw ParameterError("transform '" + t.name + "' has a non-finite entry");
  }
}

inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InputError("softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// Index of the hot entry; anything other than a single 1 among 0s is rejected.
inline std::size_t hot_index(std::span<const double> target) {
  std::size_t hot = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0 && hot == target.size()) hot = i;
    else if (target[i] != 0.0) throw InputError("target is not one-hot");
  }
  if (hot == target.size()) throw InputError("target is not one-hot");
  return hot;
}

inline std::vector<double> one_hot(std::size_t index, std::size_t classes) {
  if (index >= classes) throw InputError("class index out of range");
  std::vector<double> y(classes, 0.0);
  y[index] = 1.0;
  return y;
}

namespace detail {

inline void check_pair(std::span<const double> target, std::span<const double> logits) {
  if (target.size() != logits.size())
    throw InputError("target has " + std::to_string(target.size()) + " entries, logits " + std::to_string(logits.size()));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

/// -log softmax(logits)[c] = (max - logits[c]) + log1p(sum over the
/// non-maximal entries of exp(z - max)); log1p keeps small losses exact.
inline double cross_entropy(std::span<const double> target, std::span<const double> logits) {
  detail::check_pair(target, logits);
  const std::size_t c = hot_index(target);
  const auto top_it = std::max_element(logits.begin(), logits.end());
  const auto top_index = static_cast<std::size_t>(top_it - logits.begin());
  double rest = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (i != top_index) rest += std::exp(logits[i] - *top_it);
  return (*top_it - logits[c]) + std::log1p(rest);
}

inline double at_loss(std::span<const double> target, std::span<const double> logits, const ATConfig& cfg) {
  const double ce = cross_entropy(target, logits);
  double loss = cfg.base_weight * ce;
  if (cfg.transforms.empty()) return loss;
  const auto p = softmax(logits);
  for (const auto& t : cfg.transforms) {
    const double r = detail::dot(p, t.vector) - detail::dot(target, t.vector);
    loss += t.weight * r * r;
  }
  return loss;
}

/// d at_loss / d logits:
///   base * (p - y) + sum_j 2 w_j r_j p_k (v_jk - <p, v_j>),  r_j = <p - y, v_j>.
inline std::vector<double> at_loss_grad(std::span<const double> target, std::span<const double> logits,
                                        const ATConfig& cfg) {
  detail::check_pair(target, logits);
  hot_index(target);
  const auto p = softmax(logits);
  std::vector<double> g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) g[k] = cfg.base_weight * (p[k] - target[k]);
  for (const auto& t : cfg.transforms) {
    const double pv = detail::dot(p, t.vector);
    const double r = pv - detail::dot(target, t.vector);
    const double scale = 2.0 * t.weight * r;
    if (scale == 0.0) continue;
    for (std::size_t k = 0; k < p.size(); ++k) g[k] += scale * p[k] * (t.vector[k] - pv);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Default bank for the class order clarinet, flute, trumpet, violin,
// saxophone, cello.

namespace detail {

struct RangeHz {
  double low, high;
};

// Playing ranges (fundamental frequency, Hz) of the six instruments, in class order.
inline const std::vector<RangeHz>& instrument_ranges() {
  static const std::vector<RangeHz> ranges = {
      {147.0, 1865.0},  // clarinet (B-flat): D3 .. B-flat 6
      {262.0, 2349.0},  // flute: C4 .. D7
      {165.0, 988.0},   // trumpet (B-flat): E3 .. B5
      {196.0, 3520.0},  // violin: G3 .. A7
      {139.0, 831.0},   // alto saxophone: D-flat 3 .. A-flat 5
      {65.0, 988.0},    // cello: C2 .. B5
  };
  return ranges;
}

}  // namespace detail

inline std::vector<TargetTransform> default_transforms(double weight = 10.0) {
  std::vector<TargetTransform> bank = {
      {"woodwind", {1, 1, 0, 0, 1, 0}, weight},
      {"brass", {0, 0, 1, 0, 0, 0}, weight},
      {"bowed", {0, 0, 0, 1, 0, 1}, weight},
      {"chordophone", {0, 0, 0, 1, 0, 1}, weight},
      {"aerophone", {1, 1, 1, 0, 1, 0}, weight},
      {"single_reed", {1, 0, 0, 0, 1, 0}, weight},
      {"double_reed_or_air_jet", {0, 1, 0, 0, 0, 0}, weight},
      {"valved", {0, 0, 1, 0, 0, 0}, weight},
  };
  const auto& ranges = detail::instrument_ranges();
  TargetTransform low{"min_frequency", {}, weight}, high{"max_frequency", {}, weight};
  for (const auto& r : ranges) {
    low.vector.push_back(r.low);
    high.vector.push_back(r.high);
  }
  for (auto* t : {&low, &high}) {
    const double top = *std::max_element(t->vector.begin(), t->vector.end());
    for (double& v : t->vector) v /= top;
    bank.push_back(*t);
  }
  const char* names[] = {"is_clarinet", "is_flute", "is_trumpet", "is_violin", "is_saxophone", "is_cello"};
  for (std::size_t c = 0; c < 6; ++c) {
    TargetTransform t{names[c], std::vector<double>(6, 0.0), weight};
    t.vector[c] = 1.0;
    bank.push_back(t);
  }
  return bank;
}

inline ATConfig default_at_config() { return ATConfig{default_transforms(), 1.0}; }

// ---------------------------------------------------------------------------
// Bank file: one transform per line, "name<TAB>weight<TAB>v1,v2,...". Lines
// starting with '#' and blank lines are ignored.

inline std::vector<TargetTransform> read_transforms(std::istream& in) {
  std::vector<TargetTransform> out;
  std::string line;
  std::size_t line_no = 0;
  auto parse_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw FormatError("transform bank line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw FormatError("transform bank line " + std::to_string(line_no) + ": expected name, weight and vector");
    TargetTransform t;
    t.name = line.substr(0, t1);
    t.weight = parse_double(line.substr(t1 + 1, t2 - t1 - 1));
    std::stringstream values(line.substr(t2 + 1));
    std::string item;
    while (std::getline(values, item, ',')) t.vector.push_back(parse_double(item));
    if (t.name.empty() || t.vector.empty())
      throw FormatError("transform bank line " + std::to_string(line_no) + ": empty name or vector");
    if (t.weight < 0.0) throw FormatError("transform bank line " + std::to_string(line_no) + ": negative weight");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<TargetTransform> load_transforms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transform bank " + path.string());
  return read_transforms(in);
}

inline void write_transforms(std::ostream& out, const std::vector<TargetTransform>& bank) {
  out << std::setprecision(17);
  for (const auto& t : bank) {
    out << t.name << '\t' << t.weight << '\t';
    for (std::size_t i = 0; i < t.vector.size(); ++i) out << (i ? "," : "") << t.vector[i];
    out << '\n';
  }
}

}  // namespace sbx
