#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eulero/layers.hpp"
#include "eulero/rvq.hpp"

namespace eulero {
namespace serialize {

// Checkpoint container: little-endian binary file holding a human-readable
// config document, a flat list of named tensors (re/im float32 pairs), and
// optionally the quantizer state (centroids, EMA weights, EMA counts).

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}
inline void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const char* p;
  size_t n;
  size_t pos = 0;
  void need(size_t k) const {
    if (pos + k > n) throw std::runtime_error("corrupt checkpoint: truncated");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(p[pos++]);
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
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t k) {
    need(k);
    std::string s(p + pos, k);
    pos += k;
    return s;
  }
};

inline void put_tensor(std::string& out, const Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) {
    put_f32(out, static_cast<float>(t[i].real()));
    put_f32(out, static_cast<float>(t[i].imag()));
  }
}

inline void read_tensor(Reader& r, Tensor& t) {
  for (int64_t i = 0; i < t.size(); ++i) {
    float re = r.f32();
    float im = r.f32();
    t[i] = cfloat(real_t(re), real_t(im));
  }
}

}  // namespace detail

struct NamedTensor {
  std::string name;
  Tensor value;
  bool is_real = false;
};

struct Checkpoint {
  std::string config_text;  // key=value document, one pair per line
  std::vector<NamedTensor> tensors;
  bool has_quantizer = false;
  rvq::ResidualQuantizer quantizer;  // cfg sizes + codebook state when present

  const NamedTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

inline constexpr char kCheckpointMagic[4] = {'E', 'U', 'L', 'K'};
inline constexpr uint16_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const std::string& config_text,
                                     const nn::ParamStore& params,
                                     const rvq::ResidualQuantizer* quantizer = nullptr) {
  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u16(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<uint32_t>(config_text.size()));
  out.append(config_text);

  detail::put_u32(out, static_cast<uint32_t>(params.params.size()));
  for (const auto& p : params.params) {
    detail::put_u16(out, static_cast<uint16_t>(p.name.size()));
    out.append(p.name);
    out.push_back(p.is_real ? 1 : 0);
    const auto& shape = p.var->value.shape();
    out.push_back(static_cast<char>(shape.size()));
    for (int d : shape) detail::put_u32(out, static_cast<uint32_t>(d));
    detail::put_tensor(out, p.var->value);
  }

  out.push_back(quantizer ? 1 : 0);
  if (quantizer) {
    const auto& q = *quantizer;
    detail::put_u32(out, static_cast<uint32_t>(q.stages.size()));
    detail::put_u32(out, static_cast<uint32_t>(q.cfg.codebook_size));
    detail::put_u32(out, static_cast<uint32_t>(q.cfg.dim));
    out.push_back(q.seeded ? 1 : 0);
    for (const auto& cb : q.stages) {
      detail::put_tensor(out, cb.embed);
      detail::put_tensor(out, cb.ema_weight);
      for (double c : cb.ema_count) detail::put_f64(out, c);
    }
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::Reader r{bytes.data(), bytes.size()};
  r.need(6);
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("corrupt checkpoint: bad magic");
  r.pos = 4;
  uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw std::runtime_error("corrupt checkpoint: unsupported version " +
                             std::to_string(version));
  Checkpoint ck;
  ck.config_text = r.bytes(r.u32());

  const uint32_t n_tensors = r.u32();
  ck.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor nt;
    nt.name = r.bytes(r.u16());
    nt.is_real = r.u8() != 0;
    const int rank = r.u8();
    if (rank < 0 || rank > 8) throw std::runtime_error("corrupt checkpoint: bad tensor rank");
    std::vector<int> shape(rank);
    int64_t total = 1;
    for (int& d : shape) {
      d = static_cast<int>(r.u32());
      if (d <= 0 || d > (1 << 28)) throw std::runtime_error("corrupt checkpoint: bad tensor dim");
      total *= d;
    }
    r.need(static_cast<size_t>(total) * 8);
    nt.value = Tensor(shape);
    detail::read_tensor(r, nt.value);
    ck.tensors.push_back(std::move(nt));
  }

  if (r.u8() != 0) {
    ck.has_quantizer = true;
    auto& q = ck.quantizer;
    const uint32_t S = r.u32();
    const uint32_t K = r.u32();
    const uint32_t D = r.u32();
    if (S == 0 || S > 64 || K < 2 || K > (1u << 20) || D == 0 || D > (1u << 16))
      throw std::runtime_error("corrupt checkpoint: bad quantizer shape");
    q.cfg.stages = static_cast<int>(S);
    q.cfg.codebook_size = static_cast<int>(K);
    q.cfg.dim = static_cast<int>(D);
    q.seeded = r.u8() != 0;
    q.stages.clear();
    for (uint32_t s = 0; s < S; ++s) {
      rvq::Codebook cb;
      cb.embed = Tensor({static_cast<int>(K), static_cast<int>(D)});
      cb.ema_weight = Tensor({static_cast<int>(K), static_cast<int>(D)});
      cb.ema_count.resize(K);
      r.need(static_cast<size_t>(K) * D * 16 + static_cast<size_t>(K) * 8);
      detail::read_tensor(r, cb.embed);
      detail::read_tensor(r, cb.ema_weight);
      for (double& c : cb.ema_count) c = r.f64();
      q.stages.push_back(std::move(cb));
    }
  }
  return ck;
}

// Copies checkpoint tensors into a live parameter store; every parameter must
// be present with a matching shape.
inline void load_into(const Checkpoint& ck, nn::ParamStore& params) {
  for (auto& p : params.params) {
    const NamedTensor* nt = ck.find(p.name);
    if (!nt) throw std::runtime_error("checkpoint is missing parameter: " + p.name);
    if (nt->value.shape() != p.var->value.shape())
      throw std::runtime_error("checkpoint shape mismatch for parameter: " + p.name);
    p.var->value = nt->value;
  }
}

// ---- files (atomic replace: temp file + rename) -----------------------------

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("rename failed: " + path);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save_checkpoint(const std::string& path, const std::string& config_text,
                            const nn::ParamStore& params,
                            const rvq::ResidualQuantizer* quantizer = nullptr) {
  write_file_atomic(path, encode_checkpoint(config_text, params, quantizer));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

// ---- config document: `key = value` lines, '#' comments ---------------------

inline std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string format_config(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace serialize
}  // namespace eulero
