#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scatterbox/error.hpp"
#include "scatterbox/signal.hpp"

namespace sbx {

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace detail

/// Parses a RIFF/WAVE byte buffer holding 16-bit signed PCM. Multi-channel
/// audio is averaged down to mono; samples are scaled by 1/32768.
inline SampledSignal decode_wav(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) { return FormatError(name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::read_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw fail("truncated fmt chunk");
      std::uint16_t format = detail::read_u16le(chunk + 8);
      channels = detail::read_u16le(chunk + 10);
      rate = detail::read_u32le(chunk + 12);
      bits = detail::read_u16le(chunk + 22);
      if (format == 0xFFFE && size >= 26) format = detail::read_u16le(chunk + 32);  // extensible: sub-format GUID
      if (format != 1) throw fail("only PCM WAV is supported (format tag " + std::to_string(format) + ")");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min(size, available);  // tolerate writers that leave the size unpatched
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (bits != 16) throw fail("expected 16-bit samples, found " + std::to_string(bits) + "-bit");
  if (channels == 0) throw fail("zero channels");

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data_size / frame_bytes;
  SampledSignal out{std::vector<double>(frames), static_cast<int>(rate)};
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(detail::read_u16le(data + i * frame_bytes + 2 * c));
      acc += static_cast<double>(raw) / 32768.0;
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

inline SampledSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

/// Mono 16-bit PCM. Samples are clipped to [-1, 1) and rounded.
inline std::string encode_wav(const SampledSignal& signal) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(2 * signal.samples.size());
  out.append("RIFF");
  detail::put_u32le(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  detail::put_u32le(out, 16);
  detail::put_u16le(out, 1);
  detail::put_u16le(out, 1);
  detail::put_u32le(out, static_cast<std::uint32_t>(signal.sample_rate));
  detail::put_u32le(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  detail::put_u16le(out, 2);
  detail::put_u16le(out, 16);
  out.append("data");
  detail::put_u32le(out, data_bytes);
  for (double v : signal.samples) {
    const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    detail::put_u16le(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const SampledSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const auto bytes = encode_wav(signal);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sbx
