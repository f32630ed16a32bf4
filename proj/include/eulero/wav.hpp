#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "eulero/dsp.hpp"

namespace eulero {
namespace wav {

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
};

namespace detail {
inline uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (p[1] << 8) | (p[2] << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t rd_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
inline void wr_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void wr_u16(std::ostream& os, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}
}  // namespace detail

// Reads a 16-bit PCM mono RIFF/WAVE file. Throws on any other layout.
inline AudioBuffer read(const std::string& path, WavInfo* info = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("wav: not a RIFF/WAVE file: " + path);
  int sr = 0, ch = 0, bits = 0;
  size_t pos = 12;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    uint32_t len = detail::rd_u32(buf.data() + pos + 4);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0 && len >= 16) {
      const uint8_t* p = buf.data() + pos + 8;
      uint16_t fmt = detail::rd_u16(p);
      ch = detail::rd_u16(p + 2);
      sr = static_cast<int>(detail::rd_u32(p + 4));
      bits = detail::rd_u16(p + 14);
      if (fmt != 1) throw std::runtime_error("wav: only PCM supported: " + path);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data = buf.data() + pos + 8;
      data_len = std::min<uint32_t>(len, static_cast<uint32_t>(buf.size() - pos - 8));
    }
    pos += 8 + len + (len & 1);
  }
  if (!data || sr == 0) throw std::runtime_error("wav: missing fmt/data chunk: " + path);
  if (info) *info = {sr, ch, bits};
  if (ch != 1) throw std::runtime_error("wav: mono required (" + std::to_string(ch) + " channels)");
  if (bits != 16) throw std::runtime_error("wav: 16-bit PCM required");
  AudioBuffer out;
  out.sample_rate = sr;
  size_t n = data_len / 2;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int16_t s = static_cast<int16_t>(detail::rd_u16(data + 2 * i));
    out.samples[i] = static_cast<float>(s) / 32768.f;
  }
  return out;
}

inline void write(const std::string& path, const AudioBuffer& audio) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("wav: cannot write " + path);
  const uint32_t n = static_cast<uint32_t>(audio.samples.size());
  const uint32_t data_bytes = n * 2;
  f.write("RIFF", 4);
  detail::wr_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::wr_u32(f, 16);
  detail::wr_u16(f, 1);  // PCM
  detail::wr_u16(f, 1);  // mono
  detail::wr_u32(f, static_cast<uint32_t>(audio.sample_rate));
  detail::wr_u32(f, static_cast<uint32_t>(audio.sample_rate) * 2);
  detail::wr_u16(f, 2);
  detail::wr_u16(f, 16);
  f.write("data", 4);
  detail::wr_u32(f, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    float s = std::max(-1.f, std::min(1.f, audio.samples[i]));
    int16_t q = static_cast<int16_t>(std::lrint(s * 32767.f));
    detail::wr_u16(f, static_cast<uint16_t>(q));
  }
}

}  // namespace wav
}  // namespace eulero
