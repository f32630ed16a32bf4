#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace eulero {
namespace bitstream {

struct StreamHeader {
  static constexpr char kMagic[4] = {'E', 'U', 'L', 'R'};
  static constexpr uint16_t kVersion = 1;

  uint32_t sample_rate = 24000;
  uint32_t n_fft = 512;
  uint32_t hop = 64;
  uint32_t stride = 8;       // temporal downsampling factor of the encoder
  uint32_t stages = 12;      // S
  uint32_t codebook_size = 2048;  // K
  uint32_t frame_count = 0;  // latent frames T
  uint64_t original_length_samples = 0;

  int bits_per_index() const {
    int b = 0;
    while ((1u << b) < codebook_size) ++b;
    return b;
  }

  void validate() const {
    if (sample_rate == 0 || n_fft == 0 || hop == 0 || stride == 0)
      throw std::invalid_argument("StreamHeader: zero field");
    if (stages == 0 || codebook_size < 2)
      throw std::invalid_argument("StreamHeader: invalid quantizer shape");
  }
};

// Token rate and bitrate accounting: token_rate = sample_rate / (hop * stride),
// bitrate = token_rate * S * ceil(log2 K).
inline double token_rate(const StreamHeader& h) {
  return static_cast<double>(h.sample_rate) / (static_cast<double>(h.hop) * h.stride);
}

inline double bitrate(const StreamHeader& h) {
  return token_rate(h) * h.stages * h.bits_per_index();
}

inline int64_t payload_bytes(const StreamHeader& h) {
  int64_t bits = static_cast<int64_t>(h.stages) * h.frame_count * h.bits_per_index();
  return (bits + 7) / 8;
}

namespace detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;
  uint8_t u8() {
    if (pos >= n) throw std::runtime_error("bitstream: truncated header");
    return p[pos++];
  }
  uint16_t u16() { uint16_t a = u8(); return static_cast<uint16_t>(a | (u8() << 8)); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
    return v;
  }
};

}  // namespace detail

// Header: little-endian fixed layout. Payload: indices packed MSB-first,
// stage-major then time-major, zero-padded to a byte boundary.
inline std::vector<uint8_t> pack(const std::vector<std::vector<int>>& indices,
                                 const StreamHeader& header) {
  header.validate();
  if (indices.size() != header.stages)
    throw std::invalid_argument("pack: stage count does not match header");
  for (const auto& row : indices)
    if (row.size() != header.frame_count)
      throw std::invalid_argument("pack: frame count does not match header");
  const int bits = header.bits_per_index();
  std::vector<uint8_t> out;
  out.reserve(34 + payload_bytes(header));
  out.insert(out.end(), header.kMagic, header.kMagic + 4);
  detail::put_u16(out, header.kVersion);
  detail::put_u32(out, header.sample_rate);
  detail::put_u32(out, header.n_fft);
  detail::put_u32(out, header.hop);
  detail::put_u32(out, header.stride);
  detail::put_u32(out, header.stages);
  detail::put_u32(out, header.codebook_size);
  detail::put_u32(out, header.frame_count);
  detail::put_u64(out, header.original_length_samples);

  uint8_t acc = 0;
  int filled = 0;
  for (const auto& row : indices)
    for (int v : row) {
      if (v < 0 || static_cast<uint32_t>(v) >= header.codebook_size)
        throw std::out_of_range("pack: index out of range");
      for (int b = bits - 1; b >= 0; --b) {
        acc = static_cast<uint8_t>((acc << 1) | ((v >> b) & 1));
        if (++filled == 8) {
          out.push_back(acc);
          acc = 0;
          filled = 0;
        }
      }
    }
  if (filled > 0) out.push_back(static_cast<uint8_t>(acc << (8 - filled)));
  return out;
}

struct TokenStream {
  StreamHeader header;
  std::vector<std::vector<int>> indices;  // (S, T)
};

inline TokenStream unpack(const std::vector<uint8_t>& bytes) {
  detail::Reader r{bytes.data(), bytes.size()};
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, StreamHeader::kMagic, 4) != 0)
    throw std::runtime_error("bitstream: bad magic");
  uint16_t version = r.u16();
  if (version != StreamHeader::kVersion)
    throw std::runtime_error("bitstream: unsupported version " + std::to_string(version));
  TokenStream ts;
  StreamHeader& h = ts.header;
  h.sample_rate = r.u32();
  h.n_fft = r.u32();
  h.hop = r.u32();
  h.stride = r.u32();
  h.stages = r.u32();
  h.codebook_size = r.u32();
  h.frame_count = r.u32();
  h.original_length_samples = r.u64();
  h.validate();
  if (static_cast<int64_t>(bytes.size()) - static_cast<int64_t>(r.pos) < payload_bytes(h))
    throw std::runtime_error("bitstream: truncated payload");
  const int bits = h.bits_per_index();
  ts.indices.assign(h.stages, std::vector<int>(h.frame_count));
  size_t bitpos = 0;
  const uint8_t* payload = bytes.data() + r.pos;
  for (auto& row : ts.indices)
    for (int& v : row) {
      int acc = 0;
      for (int b = 0; b < bits; ++b, ++bitpos)
        acc = (acc << 1) | ((payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1);
      if (static_cast<uint32_t>(acc) >= h.codebook_size)
        throw std::runtime_error("bitstream: decoded index out of range");
      v = acc;
    }
  return ts;
}

}  // namespace bitstream
}  // namespace eulero
