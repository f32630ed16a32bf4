#pragma once

#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eulero {

// Production builds store complex64 (32-bit component pairs). Defining
// EULERO_PRECISION_DOUBLE switches the whole engine to double precision;
// the finite-difference gradient suites build with it so that probe noise
// stays far below the checked tolerances.
#ifdef EULERO_PRECISION_DOUBLE
using real_t = double;
#else
using real_t = float;
#endif
using cfloat = std::complex<real_t>;

// 64-byte-aligned storage: every buffer enters SIMD kernels with the same
// alignment, so vectorized loop peeling cannot reorder accumulation between
// otherwise identical computations (bit-exact reproducibility).
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;
  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(kAlign));
  }
  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const { return true; }
};

using cvec = std::vector<cfloat, AlignedAlloc<cfloat>>;

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s[i]);
    if (i + 1 < s.size()) out += ",";
  }
  return out + ")";
}

// Dense complex tensor, row-major. The universal value type of the pipeline.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), cfloat(0.f, 0.f));
  }

  Tensor(std::vector<int> shape, cvec data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != count(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape " + shape_str(shape_));
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative axis length");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, cfloat v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(cfloat v) { return full({}, v); }

  // Circularly-symmetric complex Gaussian, per-component stddev = sigma.
  static Tensor randn(std::vector<int> shape, std::mt19937& rng, double sigma = 1.0) {
    Tensor t(std::move(shape));
    std::normal_distribution<real_t> d(real_t(0), static_cast<real_t>(sigma));
    for (auto& z : t.data_) z = cfloat(d(rng), d(rng));
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(i); }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  cfloat* data() { return data_.data(); }
  const cfloat* data() const { return data_.data(); }
  cfloat& operator[](int64_t i) { return data_[i]; }
  const cfloat& operator[](int64_t i) const { return data_[i]; }

  cvec& raw() { return data_; }
  const cvec& raw() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const auto& z : data_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != size())
      throw std::invalid_argument("reshape: element count mismatch");
    return Tensor(std::move(shape), data_);
  }

  // Row-major strides in elements.
  std::vector<int64_t> strides() const {
    std::vector<int64_t> s(shape_.size());
    int64_t acc = 1;
    for (int i = rank() - 1; i >= 0; --i) {
      s[i] = acc;
      acc *= shape_[i];
    }
    return s;
  }

 private:
  std::vector<int> shape_;
  cvec data_;
};

// Numpy-style broadcast of two shapes (align from trailing axis; 1 stretches).
inline std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out(std::max(a.size(), b.size()));
  for (size_t i = 0; i < out.size(); ++i) {
    int da = i < a.size() ? a[a.size() - 1 - i] : 1;
    int db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument("broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
    out[out.size() - 1 - i] = std::max(da, db);
  }
  return out;
}

// Strides of `shape` viewed as broadcast to `out_shape` (0 on stretched axes).
inline std::vector<int64_t> broadcast_strides(const std::vector<int>& shape,
                                              const std::vector<int>& out_shape) {
  std::vector<int64_t> st(out_shape.size(), 0);
  std::vector<int64_t> own(shape.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    own[i] = acc;
    acc *= shape[i];
  }
  size_t off = out_shape.size() - shape.size();
  for (size_t i = 0; i < shape.size(); ++i)
    if (shape[i] != 1) st[off + i] = own[i];
  return st;
}

template <typename F>
inline Tensor binary_broadcast(const Tensor& a, const Tensor& b, F&& f) {
  if (a.same_shape(b)) {  // fast path
    Tensor out(a.shape());
    const cfloat* pa = a.data();
    const cfloat* pb = b.data();
    cfloat* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  std::vector<int> os = broadcast_shape(a.shape(), b.shape());
  Tensor out(os);
  auto sa = broadcast_strides(a.shape(), os);
  auto sb = broadcast_strides(b.shape(), os);
  int r = static_cast<int>(os.size());
  std::vector<int> idx(r, 0);
  const cfloat* pa = a.data();
  const cfloat* pb = b.data();
  cfloat* po = out.data();
  int64_t oa = 0, ob = 0;
  for (int64_t i = 0; i < out.size(); ++i) {
    po[i] = f(pa[oa], pb[ob]);
    for (int ax = r - 1; ax >= 0; --ax) {
      idx[ax]++;
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < os[ax]) break;
      idx[ax] = 0;
      oa -= sa[ax] * os[ax];
      ob -= sb[ax] * os[ax];
    }
  }
  return out;
}

// Sum `t` down to `target` shape (inverse of broadcasting), for gradient reduction.
inline Tensor reduce_to_shape(const Tensor& t, const std::vector<int>& target) {
  if (t.shape() == target) return t;
  Tensor out(target);
  auto st = broadcast_strides(target, t.shape());
  int r = t.rank();
  std::vector<int> idx(r, 0);
  const cfloat* pt = t.data();
  cfloat* po = out.data();
  int64_t off = 0;
  const auto& ts = t.shape();
  for (int64_t i = 0; i < t.size(); ++i) {
    po[off] += pt[i];
    for (int ax = r - 1; ax >= 0; --ax) {
      idx[ax]++;
      off += st[ax];
      if (idx[ax] < ts[ax]) break;
      idx[ax] = 0;
      off -= st[ax] * ts[ax];
    }
  }
  return out;
}

}  // namespace eulero
