#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scatterbox/error.hpp"
#include "scatterbox/model.hpp"
#include "scatterbox/scattering.hpp"

// Little-endian binary formats.
//
// SBXT tensor:
//   "SBXT" | u8 version (1) | u8 kind (1 mt, 2 ms, 3 gs, 0 other) | u8 rank
//   | rank x u32 dims | prod(dims) x f32 values, row-major
//
// SBXM checkpoint:
//   "SBXM" | u32 version (1)
//   | u32 channels | u32 height | u32 width
//   | u32 stacks | stacks x (u32 kernels, u32 kernel_size, u32 pool)
//   | u32 classes | f32 l2_weight
//   | channels x f32 input offset | channels x f32 input scale
//   | u64 parameter count | count x f32 parameters in declaration order
//     (per stack: weights [out][in][ky][kx], biases; then dense weights
//      [class][flat], dense biases)

namespace sbx {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string name) : data_(data), name_(std::move(name)) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(name_ + ": truncated at byte " + std::to_string(pos_));
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& name() const { return name_; }

 private:
  const std::string& data_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SBXT

struct TensorFile {
  std::uint8_t kind = 0;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline std::string encode_tensor(const TensorFile& t) {
  if (t.dims.size() > 255) throw ParameterError("tensor rank above 255");
  if (t.element_count() != t.values.size()) throw InputError("tensor dims do not match the value count");
  detail::ByteWriter w;
  w.bytes("SBXT", 4);
  w.u8(1);
  w.u8(t.kind);
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) w.u32(d);
  for (float v : t.values) w.f32(v);
  return w.str();
}

inline TensorFile decode_tensor(const std::string& bytes, const std::string& name = "<memory>") {
  detail::ByteReader r(bytes, name);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "SBXT", 4) != 0) throw FormatError(name + ": not an SBXT tensor");
  const auto version = r.u8();
  if (version != 1) throw FormatError(name + ": unsupported SBXT version " + std::to_string(version));
  TensorFile t;
  t.kind = r.u8();
  const auto rank = r.u8();
  for (std::size_t i = 0; i < rank; ++i) t.dims.push_back(r.u32());
  const std::size_t n = t.element_count();
  if (r.remaining() != 4 * n)
    throw FormatError(name + ": expected " + std::to_string(n) + " values, found " + std::to_string(r.remaining()) + " bytes");
  t.values.resize(n);
  r.bytes(t.values.data(), 4 * n);
  return t;
}

inline TensorFile to_tensor_file(const FeatureTensor& f) {
  TensorFile t;
  t.kind = static_cast<std::uint8_t>(f.kind);
  t.dims = {static_cast<std::uint32_t>(f.channels()), static_cast<std::uint32_t>(f.freq_bins()),
            static_cast<std::uint32_t>(f.frames())};
  t.values.assign(f.values.values().begin(), f.values.values().end());
  return t;
}

inline void save_tensor(const std::filesystem::path& path, const TensorFile& t) { detail::spit(path, encode_tensor(t)); }

inline TensorFile load_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::slurp(path), path.string());
}

// ---------------------------------------------------------------------------
// SBXM

inline std::string encode_checkpoint(const ConvClassifier<float>& m) {
  const auto& s = m.spec;
  detail::ByteWriter w;
  w.bytes("SBXM", 4);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.stacks.size()));
  for (const auto& st : s.stacks) {
    w.u32(static_cast<std::uint32_t>(st.kernels));
    w.u32(static_cast<std::uint32_t>(st.kernel_size));
    w.u32(static_cast<std::uint32_t>(st.pool));
  }
  w.u32(static_cast<std::uint32_t>(s.classes));
  w.f32(static_cast<float>(s.l2_weight));
  for (std::size_t c = 0; c < s.channels; ++c) w.f32(s.input_offset.empty() ? 0.0f : static_cast<float>(s.input_offset[c]));
  for (std::size_t c = 0; c < s.channels; ++c) w.f32(s.input_scale.empty() ? 1.0f : static_cast<float>(s.input_scale[c]));
  w.u64(m.params.size());
  for (float v : m.params) w.f32(v);
  return w.str();
}

inline ConvClassifier<float> decode_checkpoint(const std::string& bytes, const std::string& name = "<memory>") {
  detail::ByteReader r(bytes, name);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "SBXM", 4) != 0) throw FormatError(name + ": not an SBXM checkpoint");
  const auto version = r.u32();
  if (version != 1) throw FormatError(name + ": unsupported SBXM version " + std::to_string(version));
  ConvClassifierSpec s;
  s.channels = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  const auto n_stacks = r.u32();
  if (n_stacks > 64) throw FormatError(name + ": implausible stack count " + std::to_string(n_stacks));
  for (std::uint32_t i = 0; i < n_stacks; ++i) {
    ConvStackSpec st;
    st.kernels = r.u32();
    st.kernel_size = r.u32();
    st.pool = r.u32();
    s.stacks.push_back(st);
  }
  s.classes = r.u32();
  s.l2_weight = r.f32();
  if (s.channels > 4096) throw FormatError(name + ": implausible channel count");
  s.input_offset.resize(s.channels);
  s.input_scale.resize(s.channels);
  for (auto& v : s.input_offset) v = r.f32();
  for (auto& v : s.input_scale) v = r.f32();
  ConvClassifier<float> m;
  try {
    m = ConvClassifier<float>(s);
  } catch (const ParameterError& e) {
    throw FormatError(name + ": invalid model descriptor (" + e.what() + ")");
  }
  const auto count = r.u64();
  if (count != m.params.size())
    throw FormatError(name + ": descriptor implies " + std::to_string(m.params.size()) + " parameters, file holds " +
                      std::to_string(count));
  if (r.remaining() != 4 * count) throw FormatError(name + ": parameter block has the wrong length");
  r.bytes(m.params.data(), 4 * count);
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const ConvClassifier<float>& m) {
  detail::spit(path, encode_checkpoint(m));
}

inline ConvClassifier<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::slurp(path), path.string());
}

}  // namespace sbx
