#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <unordered_set>

#include "eulero/tensor.hpp"

namespace eulero {
namespace ag {

// Reverse-mode gradient engine for real-valued losses of complex parameters.
// Gradient convention: for L real and z = x + iy, grad(z) = dL/dx + i*dL/dy
// (equivalently 2*dL/dz_bar). Descent on the complex parameter is then
// identical to descent on its two real coordinates.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool needs_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backfn;

  bool has_grad() const { return grad.size() > 0; }
};

inline Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

inline Var param(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->needs_grad = true;
  return n;
}

inline Var make_node(Tensor v, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  for (const auto& p : parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) {
    n->parents = std::move(parents);
    n->backfn = std::move(fn);
  }
  return n;
}

inline void accumulate(const Var& p, const Tensor& g) {
  if (!p->needs_grad) return;
  Tensor r = (g.shape() == p->value.shape()) ? g : reduce_to_shape(g, p->value.shape());
  if (!p->has_grad()) {
    p->grad = std::move(r);
  } else {
    cfloat* a = p->grad.data();
    const cfloat* b = r.data();
    for (int64_t i = 0; i < p->grad.size(); ++i) a[i] += b[i];
  }
}

// ---- elementwise arithmetic -------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Tensor v = binary_broadcast(a->value, b->value, [](cfloat x, cfloat y) { return x + y; });
  return make_node(std::move(v), {a, b}, [a, b](Node& n) {
    accumulate(a, n.grad);
    accumulate(b, n.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tensor v = binary_broadcast(a->value, b->value, [](cfloat x, cfloat y) { return x - y; });
  return make_node(std::move(v), {a, b}, [a, b](Node& n) {
    accumulate(a, n.grad);
    Tensor gneg(n.grad.shape());
    for (int64_t i = 0; i < gneg.size(); ++i) gneg[i] = -n.grad[i];
    accumulate(b, gneg);
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tensor v = binary_broadcast(a->value, b->value, [](cfloat x, cfloat y) { return x * y; });
  return make_node(std::move(v), {a, b}, [a, b](Node& n) {
    // holomorphic in each factor: g_a = g * conj(b)
    accumulate(a, binary_broadcast(n.grad, b->value, [](cfloat g, cfloat y) { return g * std::conj(y); }));
    accumulate(b, binary_broadcast(n.grad, a->value, [](cfloat g, cfloat x) { return g * std::conj(x); }));
  });
}

inline Var div(const Var& a, const Var& b) {
  Tensor v = binary_broadcast(a->value, b->value, [](cfloat x, cfloat y) { return x / y; });
  return make_node(std::move(v), {a, b}, [a, b](Node& n) {
    accumulate(a, binary_broadcast(n.grad, b->value, [](cfloat g, cfloat y) { return g * std::conj(cfloat(1.f, 0.f) / y); }));
    Tensor gb = binary_broadcast(a->value, b->value, [](cfloat x, cfloat y) { return std::conj(-x / (y * y)); });
    accumulate(b, binary_broadcast(n.grad, gb, [](cfloat g, cfloat d) { return g * d; }));
  });
}

inline Var neg(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = -a->value[i];
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = -n.grad[i];
    accumulate(a, g);
  });
}

inline Var smul(const Var& a, real_t s) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * s;
  return make_node(std::move(v), {a}, [a, s](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * s;
    accumulate(a, g);
  });
}

inline Var conjugate(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = std::conj(a->value[i]);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = std::conj(n.grad[i]);
    accumulate(a, g);
  });
}

inline Var real_part(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(a->value[i].real(), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = cfloat(n.grad[i].real(), 0.f);
    accumulate(a, g);
  });
}

inline Var imag_part(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(a->value[i].imag(), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = cfloat(0.f, n.grad[i].real());
    accumulate(a, g);
  });
}

inline Var make_complex(const Var& re, const Var& im) {
  if (!(re->value.shape() == im->value.shape()))
    throw std::invalid_argument("make_complex: shape mismatch");
  Tensor v(re->value.shape());
  for (int64_t i = 0; i < v.size(); ++i)
    v[i] = cfloat(re->value[i].real(), im->value[i].real());
  return make_node(std::move(v), {re, im}, [re, im](Node& n) {
    Tensor gr(n.grad.shape()), gi(n.grad.shape());
    for (int64_t i = 0; i < n.grad.size(); ++i) {
      gr[i] = cfloat(n.grad[i].real(), 0.f);
      gi[i] = cfloat(n.grad[i].imag(), 0.f);
    }
    accumulate(re, gr);
    accumulate(im, gi);
  });
}

// |z| as a real tensor; grad at z = 0 is defined as 0 (removable singularity).
inline Var modulus(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(std::abs(a->value[i]), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) {
      real_t m = std::abs(a->value[i]);
      g[i] = (m > real_t(1e-20)) ? n.grad[i].real() * a->value[i] / m : cfloat(0.f, 0.f);
    }
    accumulate(a, g);
  });
}

// ---- real elementwise nonlinearities (act on the real component) ------------

inline Var relu(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i)
    v[i] = cfloat(std::max(a->value[i].real(), real_t(0)), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i)
      g[i] = a->value[i].real() > real_t(0) ? cfloat(n.grad[i].real(), 0.f) : cfloat(0.f, 0.f);
    accumulate(a, g);
  });
}

namespace detail {
inline real_t gelu(real_t x) {
  return real_t(0.5) * x * (real_t(1) + std::erf(x * real_t(0.7071067811865476)));
}
inline real_t gelu_deriv(real_t x) {
  const real_t phi = real_t(0.3989422804014327) * std::exp(-0.5f * x * x);  // standard normal pdf
  return real_t(0.5) * (real_t(1) + std::erf(x * real_t(0.7071067811865476))) + x * phi;
}
}  // namespace detail

// GELU applied componentwise to real and imaginary parts (split activation).
inline Var split_gelu(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i)
    v[i] = cfloat(detail::gelu(a->value[i].real()), detail::gelu(a->value[i].imag()));
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i)
      g[i] = cfloat(detail::gelu_deriv(a->value[i].real()) * n.grad[i].real(),
                    detail::gelu_deriv(a->value[i].imag()) * n.grad[i].imag());
    accumulate(a, g);
  });
}

inline Var exp_real(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(std::exp(a->value[i].real()), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = cfloat(n.grad[i].real() * n.value[i].real(), 0.f);
    accumulate(a, g);
  });
}

inline Var log_real(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(std::log(a->value[i].real()), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) g[i] = cfloat(n.grad[i].real() / a->value[i].real(), 0.f);
    accumulate(a, g);
  });
}

inline Var sqrt_real(const Var& a) {
  Tensor v(a->value.shape());
  for (int64_t i = 0; i < v.size(); ++i) v[i] = cfloat(std::sqrt(a->value[i].real()), 0.f);
  return make_node(std::move(v), {a}, [a](Node& n) {
    Tensor g(n.grad.shape());
    for (int64_t i = 0; i < g.size(); ++i) {
      real_t r = std::sqrt(std::max(a->value[i].real(), real_t(0)));
      g[i] = r > real_t(1e-20) ? cfloat(real_t(0.5) * n.grad[i].real() / r, 0.f) : cfloat(0.f, 0.f);
    }
    accumulate(a, g);
  });
}

// ---- shape ops --------------------------------------------------------------

inline Var reshape(const Var& a, std::vector<int> shape) {
  Tensor v = a->value.reshaped(shape);
  return make_node(std::move(v), {a}, [a](Node& n) {
    accumulate(a, n.grad.reshaped(a->value.shape()));
  });
}

namespace detail {
inline Tensor permute_tensor(const Tensor& t, const std::vector<int>& perm) {
  std::vector<int> os(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) os[i] = t.shape()[perm[i]];
  Tensor out(os);
  auto tst = t.strides();
  int r = t.rank();
  std::vector<int> idx(r, 0);
  const cfloat* pt = t.data();
  cfloat* po = out.data();
  int64_t src = 0;
  for (int64_t i = 0; i < out.size(); ++i) {
    po[i] = pt[src];
    for (int ax = r - 1; ax >= 0; --ax) {
      idx[ax]++;
      src += tst[perm[ax]];
      if (idx[ax] < os[ax]) break;
      idx[ax] = 0;
      src -= tst[perm[ax]] * os[ax];
    }
  }
  return out;
}
}  // namespace detail

inline Var permute(const Var& a, std::vector<int> perm) {
  Tensor v = detail::permute_tensor(a->value, perm);
  return make_node(std::move(v), {a}, [a, perm](Node& n) {
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    accumulate(a, detail::permute_tensor(n.grad, inv));
  });
}

inline Var pad_axis(const Var& a, int axis, int before, int after) {
  const auto& s = a->value.shape();
  std::vector<int> os = s;
  os[axis] += before + after;
  Tensor v(os);
  auto sst = a->value.strides();
  auto ost = v.strides();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < a->value.rank(); ++i) inner *= s[i];
  for (int64_t o = 0; o < outer; ++o)
    for (int j = 0; j < s[axis]; ++j)
      std::copy_n(a->value.data() + (o * s[axis] + j) * inner, inner,
                  v.data() + (o * os[axis] + j + before) * inner);
  return make_node(std::move(v), {a}, [a, axis, before, outer, inner](Node& n) {
    const auto& s = a->value.shape();
    int pl = n.grad.shape()[axis];
    Tensor g(s);
    for (int64_t o = 0; o < outer; ++o)
      for (int j = 0; j < s[axis]; ++j)
        std::copy_n(n.grad.data() + (o * pl + j + before) * inner, inner,
                    g.data() + (o * s[axis] + j) * inner);
    accumulate(a, g);
  });
}

inline Var slice_axis(const Var& a, int axis, int start, int len) {
  const auto& s = a->value.shape();
  std::vector<int> os = s;
  os[axis] = len;
  Tensor v(os);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < a->value.rank(); ++i) inner *= s[i];
  for (int64_t o = 0; o < outer; ++o)
    for (int j = 0; j < len; ++j)
      std::copy_n(a->value.data() + (o * s[axis] + start + j) * inner, inner,
                  v.data() + (o * len + j) * inner);
  return make_node(std::move(v), {a}, [a, axis, start, len, outer, inner](Node& n) {
    const auto& s = a->value.shape();
    Tensor g(s);
    for (int64_t o = 0; o < outer; ++o)
      for (int j = 0; j < len; ++j)
        std::copy_n(n.grad.data() + (o * len + j) * inner, inner,
                    g.data() + (o * s[axis] + start + j) * inner);
    accumulate(a, g);
  });
}

inline Var detach(const Var& a) { return constant(a->value); }

// ---- reductions -------------------------------------------------------------

namespace detail {
inline Tensor sum_axes(const Tensor& t, const std::vector<int>& axes, bool keepdim) {
  std::vector<bool> red(t.rank(), false);
  for (int ax : axes) red[ax] = true;
  std::vector<int> kshape = t.shape();
  for (int ax : axes) kshape[ax] = 1;
  Tensor out = reduce_to_shape(t, kshape);
  if (keepdim) return out;
  std::vector<int> fshape;
  for (int i = 0; i < t.rank(); ++i)
    if (!red[i]) fshape.push_back(t.shape()[i]);
  return out.reshaped(fshape);
}

inline Tensor tile_to(const Tensor& t, const std::vector<int>& shape) {
  return binary_broadcast(t, Tensor(shape), [](cfloat x, cfloat) { return x; });
}
}  // namespace detail

inline Var sum(const Var& a, std::vector<int> axes, bool keepdim = true) {
  Tensor v = detail::sum_axes(a->value, axes, keepdim);
  return make_node(std::move(v), {a}, [a, axes](Node& n) {
    std::vector<int> kshape = a->value.shape();
    for (int ax : axes) kshape[ax] = 1;
    Tensor g = n.grad.reshaped(kshape);
    accumulate(a, detail::tile_to(g, a->value.shape()));
  });
}

inline Var sum_all(const Var& a) {
  cfloat acc(0.f, 0.f);
  for (int64_t i = 0; i < a->value.size(); ++i) acc += a->value[i];
  Tensor v = Tensor::scalar(acc);
  return make_node(std::move(v), {a}, [a](Node& n) {
    accumulate(a, Tensor::full(a->value.shape(), n.grad[0]));
  });
}

inline Var mean_all(const Var& a) {
  return smul(sum_all(a), real_t(1) / static_cast<real_t>(a->value.size()));
}

inline Var mean(const Var& a, std::vector<int> axes, bool keepdim = true) {
  int64_t n = 1;
  for (int ax : axes) n *= a->value.shape()[ax];
  return smul(sum(a, axes, keepdim), real_t(1) / static_cast<real_t>(n));
}

// ---- matmul -----------------------------------------------------------------

namespace detail {
using CMat = Eigen::Matrix<cfloat, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<CMat>;
using CCMap = Eigen::Map<const CMat>;
}  // namespace detail

// Batched matmul: (..., M, K) x (..., K, N) -> (..., M, N). Leading axes of
// the two operands must match exactly, or B may be rank 2 (shared weights).
inline Var matmul(const Var& a, const Var& b) {
  const auto& as = a->value.shape();
  const auto& bs = b->value.shape();
  if (as.size() < 2 || bs.size() < 2) throw std::invalid_argument("matmul: rank < 2");
  int M = as[as.size() - 2], K = as.back();
  int Kb = bs[bs.size() - 2], N = bs.back();
  if (K != Kb) throw std::invalid_argument("matmul: inner dim mismatch");
  bool shared_b = bs.size() == 2 && as.size() > 2;
  if (!shared_b) {
    std::vector<int> la(as.begin(), as.end() - 2), lb(bs.begin(), bs.end() - 2);
    if (la != lb) throw std::invalid_argument("matmul: batch dims mismatch");
  }
  int64_t batch = 1;
  for (size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
  std::vector<int> os(as.begin(), as.end() - 2);
  os.push_back(M);
  os.push_back(N);
  Tensor v(os);
  for (int64_t t = 0; t < batch; ++t) {
    detail::CCMap A(a->value.data() + t * M * K, M, K);
    detail::CCMap B(b->value.data() + (shared_b ? 0 : t * K * N), K, N);
    detail::CMap O(v.data() + t * M * N, M, N);
    O.noalias() = A * B;
  }
  return make_node(std::move(v), {a, b}, [a, b, M, K, N, batch, shared_b](Node& n) {
    Tensor ga(a->value.shape()), gb(b->value.shape());
    for (int64_t t = 0; t < batch; ++t) {
      detail::CCMap G(n.grad.data() + t * M * N, M, N);
      detail::CCMap A(a->value.data() + t * M * K, M, K);
      detail::CCMap B(b->value.data() + (shared_b ? 0 : t * K * N), K, N);
      detail::CMap GA(ga.data() + t * M * K, M, K);
      detail::CMap GB(gb.data() + (shared_b ? 0 : t * K * N), K, N);
      GA.noalias() += G * B.adjoint();
      GB.noalias() += A.adjoint() * G;
    }
    accumulate(a, ga);
    accumulate(b, gb);
  });
}

// Fused attention-score kernel: (N, L, d) x (N, L, d) -> (N, L, L) with
// out[n,i,j] = scale * Re(q[n,i,:] . conj(k[n,j,:])). A single node instead of
// the matmul/real_part/scale chain, which would retain two extra L-by-L
// intermediates per batch row in the graph.
inline Var hermitian_scores(const Var& q, const Var& k, real_t scale) {
  const auto& qs = q->value.shape();
  if (qs.size() != 3 || k->value.shape() != qs)
    throw std::invalid_argument("hermitian_scores: rank-3 operands of equal shape required");
  const int N = qs[0], L = qs[1], d = qs[2];
  Tensor v({N, L, L});
  detail::CMat tmp(L, L);
  for (int n = 0; n < N; ++n) {
    detail::CCMap Q(q->value.data() + static_cast<int64_t>(n) * L * d, L, d);
    detail::CCMap K(k->value.data() + static_cast<int64_t>(n) * L * d, L, d);
    tmp.noalias() = Q * K.adjoint();
    cfloat* o = v.data() + static_cast<int64_t>(n) * L * L;
    for (int64_t i = 0; i < static_cast<int64_t>(L) * L; ++i)
      o[i] = cfloat(scale * tmp.data()[i].real(), 0.f);
  }
  return make_node(std::move(v), {q, k}, [q, k, scale, N, L, d](Node& n) {
    // s = Re(q conj(k)) so ds/dq = k and ds/dk = q under the re+i*im gradient.
    Tensor gq(q->value.shape()), gk(k->value.shape());
    detail::CMat G(L, L);
    for (int b = 0; b < N; ++b) {
      const cfloat* g = n.grad.data() + static_cast<int64_t>(b) * L * L;
      for (int64_t i = 0; i < static_cast<int64_t>(L) * L; ++i)
        G.data()[i] = cfloat(scale * g[i].real(), 0.f);
      detail::CCMap Q(q->value.data() + static_cast<int64_t>(b) * L * d, L, d);
      detail::CCMap K(k->value.data() + static_cast<int64_t>(b) * L * d, L, d);
      detail::CMap GQ(gq.data() + static_cast<int64_t>(b) * L * d, L, d);
      detail::CMap GK(gk.data() + static_cast<int64_t>(b) * L * d, L, d);
      GQ.noalias() = G * K;
      GK.noalias() = G.transpose() * Q;
    }
    accumulate(q, gq);
    accumulate(k, gk);
  });
}

// ---- softmax (real scores, last axis) --------------------------------------

// Fused single-node softmax over the real parts of the last axis. Attention
// score maps can be large, so the composite sub/exp/sum/div chain would retain
// several score-sized intermediates in the graph; this keeps only the output.
inline Var softmax_last(const Var& a) {
  const auto& s = a->value.shape();
  int L = s.back();
  int64_t rows = a->value.size() / L;
  Tensor v(s);
  for (int64_t r = 0; r < rows; ++r) {
    const cfloat* x = a->value.data() + r * L;
    cfloat* y = v.data() + r * L;
    real_t m = real_t(-1e30);
    for (int j = 0; j < L; ++j) m = std::max(m, x[j].real());
    real_t denom = 0;
    for (int j = 0; j < L; ++j) {
      real_t e = std::exp(x[j].real() - m);
      y[j] = cfloat(e, 0.f);
      denom += e;
    }
    for (int j = 0; j < L; ++j) y[j] /= denom;
  }
  return make_node(std::move(v), {a}, [a, L, rows](Node& n) {
    Tensor ga(a->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const cfloat* y = n.value.data() + r * L;
      const cfloat* g = n.grad.data() + r * L;
      cfloat* o = ga.data() + r * L;
      real_t dot = 0;
      for (int j = 0; j < L; ++j) dot += g[j].real() * y[j].real();
      for (int j = 0; j < L; ++j)
        o[j] = cfloat(y[j].real() * (g[j].real() - dot), 0.f);
    }
    accumulate(a, ga);
  });
}

// ---- backward driver --------------------------------------------------------

inline void topo_order(const Var& root, std::vector<Node*>& order) {
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
}

// Backpropagate from a real scalar loss. Throws if the loss has a nonzero
// imaginary part (beyond 1e-9 relative) or is non-finite.
inline void backward(const Var& loss) {
  if (loss->value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  cfloat lv = loss->value[0];
  if (!std::isfinite(lv.real()) || !std::isfinite(lv.imag()))
    throw std::runtime_error("backward: non-finite loss");
  const double imag_tol = sizeof(real_t) == 4 ? 1e-5 : 1e-9;
  if (std::abs(lv.imag()) > imag_tol * std::max<double>(1.0, std::abs(lv.real())) + imag_tol)
    throw std::invalid_argument("backward: loss has nonzero imaginary part");
  std::vector<Node*> order;
  topo_order(loss, order);
  loss->grad = Tensor::full(loss->value.shape(), cfloat(1.f, 0.f));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn) {
      if (n->has_grad()) n->backfn(*n);
      // Interior gradients are fully propagated at this point and nothing reads
      // them afterwards; releasing them keeps peak memory at the live frontier
      // of the sweep instead of the whole graph. Leaf gradients stay.
      n->grad = Tensor();
    }
  }
}

}  // namespace ag
}  // namespace eulero
