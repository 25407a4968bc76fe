#include "parknet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace parknet {

namespace {

using detail::TensorImpl;
using BackFn = BackwardFn;

Tensor make_node(std::vector<int64_t> shape, std::vector<double> data,
                 const std::vector<Tensor>& parents, BackFn fn) {
  return make_op_node(std::move(shape), std::move(data), parents, std::move(fn));
}

std::vector<int64_t> contig_strides(const std::vector<int64_t>& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (int64_t d = static_cast<int64_t>(shape.size()) - 2; d >= 0; --d) {
    s[d] = s[d + 1] * shape[d + 1];
  }
  return s;
}

std::vector<int64_t> broadcast_shapes(const std::vector<int64_t>& a,
                                      const std::vector<int64_t>& b, const char* op) {
  const size_t nd = std::max(a.size(), b.size());
  std::vector<int64_t> out(nd, 1);
  for (size_t d = 0; d < nd; ++d) {
    const int64_t av = d < nd - a.size() ? 1 : a[d - (nd - a.size())];
    const int64_t bv = d < nd - b.size() ? 1 : b[d - (nd - b.size())];
    if (av != bv && av != 1 && bv != 1) {
      throw std::invalid_argument(std::string(op) + ": shapes not broadcastable: " +
                                  shape_to_string(a) + " vs " + shape_to_string(b));
    }
    out[d] = std::max(av, bv);
  }
  return out;
}

// Strides of `shape` right-aligned against `out`, zero along broadcast axes.
std::vector<int64_t> broadcast_strides(const std::vector<int64_t>& shape,
                                       const std::vector<int64_t>& out) {
  std::vector<int64_t> own = contig_strides(shape);
  std::vector<int64_t> s(out.size(), 0);
  const size_t off = out.size() - shape.size();
  for (size_t d = 0; d < shape.size(); ++d) {
    s[off + d] = (shape[d] == 1 && out[off + d] != 1) ? 0 : own[d];
  }
  return s;
}

// Materialize `t` broadcast to `out_shape` (used for masks).
std::vector<double> broadcast_to(const TensorImpl& t, const std::vector<int64_t>& out_shape) {
  const auto ostrides = contig_strides(out_shape);
  const auto tstrides = broadcast_strides(t.shape, out_shape);
  int64_t n = 1;
  for (int64_t s : out_shape) n *= s;
  std::vector<double> out(static_cast<size_t>(n));
  const size_t nd = out_shape.size();
  std::vector<int64_t> idx(nd, 0);
  int64_t toff = 0;
  for (int64_t lin = 0; lin < n; ++lin) {
    out[static_cast<size_t>(lin)] = t.data[static_cast<size_t>(toff)];
    for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
      idx[d]++;
      toff += tstrides[d];
      if (idx[d] < out_shape[d]) break;
      idx[d] = 0;
      toff -= tstrides[d] * out_shape[d];
    }
  }
  return out;
}

enum class BinOp { Add, Sub, Mul };

Tensor binary_elementwise(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const auto& ash = a.shape();
  const auto& bsh = b.shape();
  const auto osh = broadcast_shapes(ash, bsh, name);
  const auto ostr = contig_strides(osh);
  int64_t n = 1;
  for (int64_t s : osh) n *= s;

  std::vector<double> out(static_cast<size_t>(n));
  const double* ad = a.data().data();
  const double* bd = b.data().data();

  const bool same = ash == bsh;
  if (same) {
    switch (op) {
      case BinOp::Add:
        for (int64_t i = 0; i < n; ++i) out[i] = ad[i] + bd[i];
        break;
      case BinOp::Sub:
        for (int64_t i = 0; i < n; ++i) out[i] = ad[i] - bd[i];
        break;
      case BinOp::Mul:
        for (int64_t i = 0; i < n; ++i) out[i] = ad[i] * bd[i];
        break;
    }
  } else {
    const auto sa = broadcast_strides(ash, osh);
    const auto sb = broadcast_strides(bsh, osh);
    const size_t nd = osh.size();
    std::vector<int64_t> idx(nd, 0);
    int64_t oa = 0, ob = 0;
    for (int64_t lin = 0; lin < n; ++lin) {
      double v = 0;
      switch (op) {
        case BinOp::Add: v = ad[oa] + bd[ob]; break;
        case BinOp::Sub: v = ad[oa] - bd[ob]; break;
        case BinOp::Mul: v = ad[oa] * bd[ob]; break;
      }
      out[static_cast<size_t>(lin)] = v;
      for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
        idx[d]++;
        oa += sa[d];
        ob += sb[d];
        if (idx[d] < osh[d]) break;
        idx[d] = 0;
        oa -= sa[d] * osh[d];
        ob -= sb[d] * osh[d];
      }
    }
  }

  Tensor ta = a, tb = b;
  return make_node(
      osh, std::move(out), {a, b},
      [ta, tb, op, osh, same](const std::vector<double>& go,
                              const std::vector<std::vector<double>*>& pg) {
        const int64_t n = static_cast<int64_t>(go.size());
        const double* ad = ta.data().data();
        const double* bd = tb.data().data();
        if (same) {
          if (pg[0]) {
            auto& ga = *pg[0];
            switch (op) {
              case BinOp::Add:
              case BinOp::Sub:
                for (int64_t i = 0; i < n; ++i) ga[i] += go[i];
                break;
              case BinOp::Mul:
                for (int64_t i = 0; i < n; ++i) ga[i] += go[i] * bd[i];
                break;
            }
          }
          if (pg[1]) {
            auto& gb = *pg[1];
            switch (op) {
              case BinOp::Add:
                for (int64_t i = 0; i < n; ++i) gb[i] += go[i];
                break;
              case BinOp::Sub:
                for (int64_t i = 0; i < n; ++i) gb[i] -= go[i];
                break;
              case BinOp::Mul:
                for (int64_t i = 0; i < n; ++i) gb[i] += go[i] * ad[i];
                break;
            }
          }
          return;
        }
        const auto sa = broadcast_strides(ta.shape(), osh);
        const auto sb = broadcast_strides(tb.shape(), osh);
        const size_t nd = osh.size();
        std::vector<int64_t> idx(nd, 0);
        int64_t oa = 0, ob = 0;
        for (int64_t lin = 0; lin < n; ++lin) {
          const double g = go[static_cast<size_t>(lin)];
          if (pg[0]) {
            switch (op) {
              case BinOp::Add:
              case BinOp::Sub: (*pg[0])[oa] += g; break;
              case BinOp::Mul: (*pg[0])[oa] += g * bd[ob]; break;
            }
          }
          if (pg[1]) {
            switch (op) {
              case BinOp::Add: (*pg[1])[ob] += g; break;
              case BinOp::Sub: (*pg[1])[ob] -= g; break;
              case BinOp::Mul: (*pg[1])[ob] += g * ad[oa]; break;
            }
          }
          for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
            idx[d]++;
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < osh[d]) break;
            idx[d] = 0;
            oa -= sa[d] * osh[d];
            ob -= sb[d] * osh[d];
          }
        }
      });
}

// ---- GEMM kernels (row-major, accumulate into C) ----

void gemm(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    double* c = C + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = a[kk];
      const double* b = B + kk * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// C (m,n) += A (m,k) * B(n,k)^T
void gemm_nt(const double* A, const double* B, double* C, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    double* c = C + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* b = B + j * k;
      double acc = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += a[kk] * b[kk];
      c[j] += acc;
    }
  }
}

// C (m,n) += A(inner,m)^T * B(inner,n)
void gemm_tn(const double* A, const double* B, double* C, int64_t m, int64_t inner,
             int64_t n) {
  for (int64_t kk = 0; kk < inner; ++kk) {
    const double* a = A + kk * m;
    const double* b = B + kk * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i];
      double* c = C + i * n;
      for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

struct MatmulPlan {
  int64_t m = 0, k = 0, n = 0;
  std::vector<int64_t> out_shape;
  std::vector<int64_t> a_off;  // element offsets per batch slot
  std::vector<int64_t> b_off;
};

MatmulPlan plan_matmul(const std::vector<int64_t>& ash, const std::vector<int64_t>& bsh,
                       bool b_transposed, const char* op) {
  if (ash.size() < 2 || bsh.size() < 2) {
    throw std::invalid_argument(std::string(op) + ": operands must have rank >= 2, got " +
                                shape_to_string(ash) + " and " + shape_to_string(bsh));
  }
  MatmulPlan p;
  p.m = ash[ash.size() - 2];
  p.k = ash[ash.size() - 1];
  const int64_t bk = b_transposed ? bsh[bsh.size() - 1] : bsh[bsh.size() - 2];
  p.n = b_transposed ? bsh[bsh.size() - 2] : bsh[bsh.size() - 1];
  if (p.k != bk) {
    throw std::invalid_argument(std::string(op) + ": inner dimensions disagree: " +
                                shape_to_string(ash) + " vs " + shape_to_string(bsh));
  }
  std::vector<int64_t> abatch(ash.begin(), ash.end() - 2);
  std::vector<int64_t> bbatch(bsh.begin(), bsh.end() - 2);
  const auto batch = broadcast_shapes(abatch, bbatch, op);
  p.out_shape = batch;
  p.out_shape.push_back(p.m);
  p.out_shape.push_back(p.n);

  int64_t nbatch = 1;
  for (int64_t s : batch) nbatch *= s;
  const auto sa = broadcast_strides(abatch, batch);
  const auto sb = broadcast_strides(bbatch, batch);
  const int64_t a_mat = p.m * p.k;
  const int64_t b_mat = b_transposed ? p.n * p.k : p.k * p.n;
  p.a_off.resize(static_cast<size_t>(nbatch));
  p.b_off.resize(static_cast<size_t>(nbatch));
  const size_t nd = batch.size();
  std::vector<int64_t> idx(nd, 0);
  int64_t oa = 0, ob = 0;
  for (int64_t lin = 0; lin < nbatch; ++lin) {
    p.a_off[static_cast<size_t>(lin)] = oa * a_mat;
    p.b_off[static_cast<size_t>(lin)] = ob * b_mat;
    for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
      idx[d]++;
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < batch[d]) break;
      idx[d] = 0;
      oa -= sa[d] * batch[d];
      ob -= sb[d] * batch[d];
    }
  }
  return p;
}

struct AxisSplit {
  int64_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<int64_t>& shape, int64_t axis, const char* op) {
  int64_t d = static_cast<int64_t>(shape.size());
  if (axis < 0) axis += d;
  if (axis < 0 || axis >= d) {
    throw std::invalid_argument(std::string(op) + ": axis out of range for shape " +
                                shape_to_string(shape));
  }
  AxisSplit s;
  for (int64_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (int64_t i = axis + 1; i < d; ++i) s.inner *= shape[i];
  return s;
}

Tensor softmax_impl(const Tensor& x, const Tensor& mask, int64_t axis) {
  const auto& sh = x.shape();
  const AxisSplit ax = split_axis(sh, axis, "softmax");
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));

  std::vector<double> mask_full;
  if (mask.defined()) {
    mask_full = broadcast_to(*mask.impl(), sh);
    for (double v : mask_full) {
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("softmax: mask entries must be 0 or 1");
      }
    }
  }
  const double* xd = x.data().data();
  for (int64_t o = 0; o < ax.outer; ++o) {
    for (int64_t in = 0; in < ax.inner; ++in) {
      const int64_t base = o * ax.len * ax.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t t = 0; t < ax.len; ++t) {
        const int64_t off = base + t * ax.inner;
        if (!mask_full.empty() && mask_full[off] == 0.0) continue;
        mx = std::max(mx, xd[off]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("softmax: a row has every position masked");
      }
      double z = 0.0;
      for (int64_t t = 0; t < ax.len; ++t) {
        const int64_t off = base + t * ax.inner;
        const bool open = mask_full.empty() || mask_full[off] != 0.0;
        const double e = open ? std::exp(xd[off] - mx) : 0.0;
        out[static_cast<size_t>(off)] = e;
        z += e;
      }
      const double inv = 1.0 / z;
      for (int64_t t = 0; t < ax.len; ++t) {
        out[static_cast<size_t>(base + t * ax.inner)] *= inv;
      }
    }
  }

  std::vector<double> y_cache = out;
  return make_node(sh, std::move(out), {x},
                   [y_cache = std::move(y_cache), ax](
                       const std::vector<double>& go,
                       const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (int64_t o = 0; o < ax.outer; ++o) {
                       for (int64_t in = 0; in < ax.inner; ++in) {
                         const int64_t base = o * ax.len * ax.inner + in;
                         double dot = 0.0;
                         for (int64_t t = 0; t < ax.len; ++t) {
                           const int64_t off = base + t * ax.inner;
                           dot += go[off] * y_cache[off];
                         }
                         for (int64_t t = 0; t < ax.len; ++t) {
                           const int64_t off = base + t * ax.inner;
                           gx[off] += y_cache[off] * (go[off] - dot);
                         }
                       }
                     }
                   });
}

Tensor unary_elementwise(const Tensor& x, double (*f)(double), double (*df)(double),
                         const char* /*name*/) {
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = f(xd[i]);
  Tensor tx = x;
  return make_node(x.shape(), std::move(out), {x},
                   [tx, df](const std::vector<double>& go,
                            const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     const double* xd = tx.data().data();
                     for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * df(xd[i]);
                   });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, BinOp::Mul, "mul"); }

Tensor add_scalar(const Tensor& a, double c) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* ad = a.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = ad[i] + c;
  return make_node(a.shape(), std::move(out), {a},
                   [](const std::vector<double>& go,
                      const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& ga = *pg[0];
                     for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                   });
}

Tensor mul_scalar(const Tensor& a, double c) {
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* ad = a.data().data();
  for (int64_t i = 0; i < n; ++i) out[i] = ad[i] * c;
  return make_node(a.shape(), std::move(out), {a},
                   [c](const std::vector<double>& go,
                       const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& ga = *pg[0];
                     for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
                   });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      },
      "sigmoid");
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("log: inputs must be strictly positive");
    }
  }
  return unary_elementwise(
      x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; }, "log");
}

namespace {

Tensor matmul_common(const Tensor& a, const Tensor& b, bool b_transposed, const char* op) {
  const MatmulPlan p = plan_matmul(a.shape(), b.shape(), b_transposed, op);
  int64_t n = 1;
  for (int64_t s : p.out_shape) n *= s;
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  const int64_t out_mat = p.m * p.n;
  for (size_t s = 0; s < p.a_off.size(); ++s) {
    double* c = out.data() + static_cast<int64_t>(s) * out_mat;
    if (b_transposed) {
      gemm_nt(ad + p.a_off[s], bd + p.b_off[s], c, p.m, p.k, p.n);
    } else {
      gemm(ad + p.a_off[s], bd + p.b_off[s], c, p.m, p.k, p.n);
    }
  }
  Tensor ta = a, tb = b;
  return make_node(
      p.out_shape, std::move(out), {a, b},
      [ta, tb, p, b_transposed](const std::vector<double>& go,
                                const std::vector<std::vector<double>*>& pg) {
        const double* ad = ta.data().data();
        const double* bd = tb.data().data();
        const int64_t out_mat = p.m * p.n;
        for (size_t s = 0; s < p.a_off.size(); ++s) {
          const double* g = go.data() + static_cast<int64_t>(s) * out_mat;
          if (!b_transposed) {
            // C = A B: dA = G B^T, dB = A^T G
            if (pg[0]) gemm_nt(g, bd + p.b_off[s], pg[0]->data() + p.a_off[s], p.m, p.n, p.k);
            if (pg[1]) gemm_tn(ad + p.a_off[s], g, pg[1]->data() + p.b_off[s], p.k, p.m, p.n);
          } else {
            // C = A B^T: dA = G B, dB = G^T A
            if (pg[0]) gemm(g, bd + p.b_off[s], pg[0]->data() + p.a_off[s], p.m, p.n, p.k);
            if (pg[1]) gemm_tn(g, ad + p.a_off[s], pg[1]->data() + p.b_off[s], p.n, p.m, p.k);
          }
        }
      });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul_common(a, b, false, "matmul"); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { return matmul_common(a, b, true, "matmul_nt"); }

Tensor softmax(const Tensor& x, int64_t axis) { return softmax_impl(x, Tensor(), axis); }

Tensor softmax_masked(const Tensor& x, const Tensor& mask, int64_t axis) {
  if (!mask.defined()) return softmax_impl(x, Tensor(), axis);
  return softmax_impl(x, mask, axis);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask) {
  const auto& qs = q.shape();
  const auto& ks = k.shape();
  const auto& vs = v.shape();
  if (qs.size() < 2 || ks.size() < 2 || vs.size() < 2) {
    throw std::invalid_argument("attention: operands must have rank >= 2");
  }
  if (qs.back() != ks.back()) {
    throw std::invalid_argument("attention: query/key feature dims disagree: " +
                                shape_to_string(qs) + " vs " + shape_to_string(ks));
  }
  if (ks[ks.size() - 2] != vs[vs.size() - 2]) {
    throw std::invalid_argument("attention: key/value counts disagree: " +
                                shape_to_string(ks) + " vs " + shape_to_string(vs));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(qs.back()));
  Tensor scores = mul_scalar(matmul_nt(q, k), scale);
  Tensor probs = softmax_masked(scores, mask, -1);
  return matmul(probs, v);
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets,
                     int64_t ignore_index) {
  if (logits.dim() != 2) {
    throw std::invalid_argument("cross_entropy: logits must be (N, V), got " +
                                shape_to_string(logits.shape()));
  }
  const int64_t n = logits.size(0);
  const int64_t vocab = logits.size(1);
  if (static_cast<int64_t>(targets.size()) != n) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(n) + " rows");
  }
  const double* ld = logits.data().data();
  std::vector<double> probs(static_cast<size_t>(n * vocab));
  double total = 0.0;
  int64_t count = 0;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t t = targets[static_cast<size_t>(i)];
    const double* row = ld + i * vocab;
    double* prow = probs.data() + i * vocab;
    if (t == ignore_index) {
      std::fill(prow, prow + vocab, 0.0);
      continue;
    }
    if (t < 0 || t >= vocab) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) +
                              " outside vocabulary of size " + std::to_string(vocab));
    }
    double mx = row[0];
    for (int64_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < vocab; ++j) {
      prow[j] = std::exp(row[j] - mx);
      z += prow[j];
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < vocab; ++j) prow[j] *= inv;
    total += -(row[t] - mx - std::log(z));
    ++count;
  }
  if (count == 0) {
    throw std::invalid_argument("cross_entropy: every position carries the ignore marker");
  }
  const double mean_nll = total / static_cast<double>(count);
  return make_node(
      {1}, {mean_nll}, {logits},
      [probs = std::move(probs), targets, ignore_index, n, vocab, count](
          const std::vector<double>& go, const std::vector<std::vector<double>*>& pg) {
        if (!pg[0]) return;
        auto& gl = *pg[0];
        const double g = go[0] / static_cast<double>(count);
        for (int64_t i = 0; i < n; ++i) {
          const int64_t t = targets[static_cast<size_t>(i)];
          if (t == ignore_index) continue;
          const double* prow = probs.data() + i * vocab;
          double* grow = gl.data() + i * vocab;
          for (int64_t j = 0; j < vocab; ++j) grow[j] += g * prow[j];
          grow[t] -= g;
        }
      });
}

Tensor embedding(const Tensor& weight, const std::vector<int64_t>& indices) {
  if (weight.dim() != 2) {
    throw std::invalid_argument("embedding: table must be (V, d), got " +
                                shape_to_string(weight.shape()));
  }
  const int64_t vocab = weight.size(0);
  const int64_t dim = weight.size(1);
  const int64_t n = static_cast<int64_t>(indices.size());
  std::vector<double> out(static_cast<size_t>(n * dim));
  const double* wd = weight.data().data();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t idx = indices[static_cast<size_t>(i)];
    if (idx < 0 || idx >= vocab) {
      throw std::out_of_range("embedding: index " + std::to_string(idx) +
                              " outside table of size " + std::to_string(vocab));
    }
    std::memcpy(out.data() + i * dim, wd + idx * dim, sizeof(double) * static_cast<size_t>(dim));
  }
  return make_node({n, dim}, std::move(out), {weight},
                   [indices, dim](const std::vector<double>& go,
                                  const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gw = *pg[0];
                     for (size_t i = 0; i < indices.size(); ++i) {
                       const double* g = go.data() + static_cast<int64_t>(i) * dim;
                       double* row = gw.data() + indices[i] * dim;
                       for (int64_t j = 0; j < dim; ++j) row[j] += g[j];
                     }
                   });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const auto& sh = x.shape();
  const int64_t d = sh.back();
  if (gain.numel() != d || bias.numel() != d) {
    throw std::invalid_argument("layer_norm: gain/bias must match trailing dim " +
                                std::to_string(d));
  }
  const int64_t rows = x.numel() / d;
  std::vector<double> out(x.data().size());
  std::vector<double> xhat(x.data().size());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  const double* xd = x.data().data();
  const double* gd = gain.data().data();
  const double* bd = bias.data().data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = xd + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    for (int64_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[static_cast<size_t>(r * d + j)] = h;
      out[static_cast<size_t>(r * d + j)] = h * gd[j] + bd[j];
    }
  }
  Tensor tg = gain;
  return make_node(
      sh, std::move(out), {x, gain, bias},
      [tg, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](
          const std::vector<double>& go, const std::vector<std::vector<double>*>& pg) {
        const double* gd = tg.data().data();
        for (int64_t r = 0; r < rows; ++r) {
          const double* g = go.data() + r * d;
          const double* h = xhat.data() + r * d;
          if (pg[0]) {
            double m1 = 0.0, m2 = 0.0;
            for (int64_t j = 0; j < d; ++j) {
              const double dh = g[j] * gd[j];
              m1 += dh;
              m2 += dh * h[j];
            }
            m1 /= static_cast<double>(d);
            m2 /= static_cast<double>(d);
            double* gx = pg[0]->data() + r * d;
            const double is = inv_std[static_cast<size_t>(r)];
            for (int64_t j = 0; j < d; ++j) {
              const double dh = g[j] * gd[j];
              gx[j] += is * (dh - m1 - h[j] * m2);
            }
          }
          if (pg[1]) {
            double* gg = pg[1]->data();
            for (int64_t j = 0; j < d; ++j) gg[j] += g[j] * h[j];
          }
          if (pg[2]) {
            double* gb = pg[2]->data();
            for (int64_t j = 0; j < d; ++j) gb[j] += g[j];
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.dim() != 2) {
    throw std::invalid_argument("linear: weight must be (out, in), got " +
                                shape_to_string(weight.shape()));
  }
  Tensor y = matmul_nt(x, weight);
  if (bias.defined()) y = add(y, bias);
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride,
              int64_t padding) {
  if (x.dim() != 4 || w.dim() != 4) {
    throw std::invalid_argument("conv2d: expected x (N,C,H,W) and w (Co,Ci,kh,kw), got " +
                                shape_to_string(x.shape()) + " and " +
                                shape_to_string(w.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  const int64_t batch = x.size(0), ci = x.size(1), h = x.size(2), wd = x.size(3);
  const int64_t co = w.size(0), kh = w.size(2), kw = w.size(3);
  if (w.size(1) != ci) {
    throw std::invalid_argument("conv2d: channel mismatch: x " + shape_to_string(x.shape()) +
                                " vs w " + shape_to_string(w.shape()));
  }
  if (bias.defined() && bias.numel() != co) {
    throw std::invalid_argument("conv2d: bias size must equal output channels");
  }
  const int64_t ho = (h + 2 * padding - kh) / stride + 1;
  const int64_t wo = (wd + 2 * padding - kw) / stride + 1;
  if (ho < 1 || wo < 1) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  const int64_t ckk = ci * kh * kw;
  const int64_t ow = ho * wo;

  // im2col once, shared by forward and backward
  auto cols = std::make_shared<std::vector<double>>(
      static_cast<size_t>(batch * ckk * ow), 0.0);
  const double* xd = x.data().data();
  for (int64_t nb = 0; nb < batch; ++nb) {
    double* colbase = cols->data() + nb * ckk * ow;
    for (int64_t c = 0; c < ci; ++c) {
      for (int64_t ki = 0; ki < kh; ++ki) {
        for (int64_t kj = 0; kj < kw; ++kj) {
          double* colrow = colbase + ((c * kh + ki) * kw + kj) * ow;
          for (int64_t oi = 0; oi < ho; ++oi) {
            const int64_t ii = oi * stride - padding + ki;
            if (ii < 0 || ii >= h) continue;
            const double* src = xd + ((nb * ci + c) * h + ii) * wd;
            for (int64_t oj = 0; oj < wo; ++oj) {
              const int64_t jj = oj * stride - padding + kj;
              if (jj < 0 || jj >= wd) continue;
              colrow[oi * wo + oj] = src[jj];
            }
          }
        }
      }
    }
  }

  std::vector<double> out(static_cast<size_t>(batch * co * ow), 0.0);
  const double* wmat = w.data().data();
  for (int64_t nb = 0; nb < batch; ++nb) {
    gemm(wmat, cols->data() + nb * ckk * ow, out.data() + nb * co * ow, co, ckk, ow);
  }
  if (bias.defined()) {
    const double* bd = bias.data().data();
    for (int64_t nb = 0; nb < batch; ++nb) {
      for (int64_t c = 0; c < co; ++c) {
        double* o = out.data() + (nb * co + c) * ow;
        for (int64_t i = 0; i < ow; ++i) o[i] += bd[c];
      }
    }
  }

  Tensor tw = w;
  std::vector<Tensor> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_node(
      {batch, co, ho, wo}, std::move(out), parents,
      [tw, cols, batch, ci, h, wd, co, kh, kw, ho, wo, stride, padding, ckk, ow](
          const std::vector<double>& go, const std::vector<std::vector<double>*>& pg) {
        const double* wmat = tw.data().data();
        std::vector<double> dcols;
        for (int64_t nb = 0; nb < batch; ++nb) {
          const double* g = go.data() + nb * co * ow;
          if (pg[1]) {
            gemm_nt(g, cols->data() + nb * ckk * ow, pg[1]->data(), co, ow, ckk);
          }
          if (pg[0]) {
            dcols.assign(static_cast<size_t>(ckk * ow), 0.0);
            gemm_tn(wmat, g, dcols.data(), ckk, co, ow);
            double* gx = pg[0]->data();
            for (int64_t c = 0; c < ci; ++c) {
              for (int64_t ki = 0; ki < kh; ++ki) {
                for (int64_t kj = 0; kj < kw; ++kj) {
                  const double* colrow = dcols.data() + ((c * kh + ki) * kw + kj) * ow;
                  for (int64_t oi = 0; oi < ho; ++oi) {
                    const int64_t ii = oi * stride - padding + ki;
                    if (ii < 0 || ii >= h) continue;
                    double* dst = gx + ((nb * ci + c) * h + ii) * wd;
                    for (int64_t oj = 0; oj < wo; ++oj) {
                      const int64_t jj = oj * stride - padding + kj;
                      if (jj < 0 || jj >= wd) continue;
                      dst[jj] += colrow[oi * wo + oj];
                    }
                  }
                }
              }
            }
          }
          if (pg.size() > 2 && pg[2]) {
            double* gb = pg[2]->data();
            for (int64_t c = 0; c < co; ++c) {
              const double* row = g + c * ow;
              double acc = 0.0;
              for (int64_t i = 0; i < ow; ++i) acc += row[i];
              gb[c] += acc;
            }
          }
        }
      });
}

Tensor avg_pool2d(const Tensor& x, int64_t factor) {
  if (factor < 1) throw std::invalid_argument("avg_pool2d: factor must be >= 1");
  const auto& sh = x.shape();
  if (sh.size() < 2) throw std::invalid_argument("avg_pool2d: rank must be >= 2");
  const int64_t h = sh[sh.size() - 2];
  const int64_t w = sh[sh.size() - 1];
  if (h % factor != 0 || w % factor != 0) {
    throw std::invalid_argument("avg_pool2d: factor " + std::to_string(factor) +
                                " must divide spatial dims of " + shape_to_string(sh));
  }
  const int64_t ho = h / factor, wo = w / factor;
  const int64_t planes = x.numel() / (h * w);
  std::vector<int64_t> osh = sh;
  osh[osh.size() - 2] = ho;
  osh[osh.size() - 1] = wo;
  std::vector<double> out(static_cast<size_t>(planes * ho * wo), 0.0);
  const double* xd = x.data().data();
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (int64_t p = 0; p < planes; ++p) {
    const double* src = xd + p * h * w;
    double* dst = out.data() + p * ho * wo;
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < w; ++j) {
        dst[(i / factor) * wo + (j / factor)] += src[i * w + j] * inv;
      }
    }
  }
  return make_node(osh, std::move(out), {x},
                   [planes, h, w, ho, wo, factor, inv](
                       const std::vector<double>& go,
                       const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (int64_t p = 0; p < planes; ++p) {
                       const double* g = go.data() + p * ho * wo;
                       double* dst = gx.data() + p * h * w;
                       for (int64_t i = 0; i < h; ++i) {
                         for (int64_t j = 0; j < w; ++j) {
                           dst[i * w + j] += g[(i / factor) * wo + (j / factor)] * inv;
                         }
                       }
                     }
                   });
}

Tensor reduce_sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return make_node({1}, {acc}, {x},
                   [](const std::vector<double>& go,
                      const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (auto& g : gx) g += go[0];
                   });
}

Tensor reduce_mean(const Tensor& x) {
  return mul_scalar(reduce_sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reduce_sum(const Tensor& x, int64_t axis, bool keepdims) {
  const auto& sh = x.shape();
  const AxisSplit ax = split_axis(sh, axis, "reduce_sum");
  std::vector<int64_t> osh;
  for (size_t d = 0; d < sh.size(); ++d) {
    const int64_t norm_axis = axis < 0 ? axis + static_cast<int64_t>(sh.size()) : axis;
    if (static_cast<int64_t>(d) == norm_axis) {
      if (keepdims) osh.push_back(1);
    } else {
      osh.push_back(sh[d]);
    }
  }
  if (osh.empty()) osh.push_back(1);
  std::vector<double> out(static_cast<size_t>(ax.outer * ax.inner), 0.0);
  const double* xd = x.data().data();
  for (int64_t o = 0; o < ax.outer; ++o) {
    for (int64_t t = 0; t < ax.len; ++t) {
      const double* src = xd + (o * ax.len + t) * ax.inner;
      double* dst = out.data() + o * ax.inner;
      for (int64_t in = 0; in < ax.inner; ++in) dst[in] += src[in];
    }
  }
  return make_node(osh, std::move(out), {x},
                   [ax](const std::vector<double>& go,
                        const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (int64_t o = 0; o < ax.outer; ++o) {
                       for (int64_t t = 0; t < ax.len; ++t) {
                         double* dst = gx.data() + (o * ax.len + t) * ax.inner;
                         const double* g = go.data() + o * ax.inner;
                         for (int64_t in = 0; in < ax.inner; ++in) dst[in] += g[in];
                       }
                     }
                   });
}

Tensor reduce_mean(const Tensor& x, int64_t axis, bool keepdims) {
  const AxisSplit ax = split_axis(x.shape(), axis, "reduce_mean");
  return mul_scalar(reduce_sum(x, axis, keepdims), 1.0 / static_cast<double>(ax.len));
}

Tensor reshape(const Tensor& x, std::vector<int64_t> new_shape) {
  int64_t n = 1;
  for (int64_t s : new_shape) n *= s;
  if (n != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_to_string(x.shape()) +
                                " as " + shape_to_string(new_shape));
  }
  std::vector<double> out = x.data();
  return make_node(std::move(new_shape), std::move(out), {x},
                   [](const std::vector<double>& go,
                      const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
                   });
}

Tensor permute(const Tensor& x, const std::vector<int64_t>& dims) {
  const auto& sh = x.shape();
  const size_t nd = sh.size();
  if (dims.size() != nd) {
    throw std::invalid_argument("permute: dims rank mismatch for shape " + shape_to_string(sh));
  }
  std::vector<bool> seen(nd, false);
  std::vector<int64_t> osh(nd);
  for (size_t d = 0; d < nd; ++d) {
    const int64_t s = dims[d];
    if (s < 0 || s >= static_cast<int64_t>(nd) || seen[static_cast<size_t>(s)]) {
      throw std::invalid_argument("permute: dims must be a permutation of axes");
    }
    seen[static_cast<size_t>(s)] = true;
    osh[d] = sh[static_cast<size_t>(s)];
  }
  const auto xstr = contig_strides(sh);
  std::vector<int64_t> src_stride(nd);
  for (size_t d = 0; d < nd; ++d) src_stride[d] = xstr[static_cast<size_t>(dims[d])];

  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double* xd = x.data().data();
  std::vector<int64_t> idx(nd, 0);
  int64_t soff = 0;
  for (int64_t lin = 0; lin < n; ++lin) {
    out[static_cast<size_t>(lin)] = xd[soff];
    for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
      idx[d]++;
      soff += src_stride[d];
      if (idx[d] < osh[d]) break;
      idx[d] = 0;
      soff -= src_stride[d] * osh[d];
    }
  }
  return make_node(osh, std::move(out), {x},
                   [osh, src_stride, nd](const std::vector<double>& go,
                                         const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     std::vector<int64_t> idx(nd, 0);
                     int64_t soff = 0;
                     const int64_t n = static_cast<int64_t>(go.size());
                     for (int64_t lin = 0; lin < n; ++lin) {
                       gx[soff] += go[static_cast<size_t>(lin)];
                       for (int64_t d = static_cast<int64_t>(nd) - 1; d >= 0; --d) {
                         idx[d]++;
                         soff += src_stride[d];
                         if (idx[d] < osh[d]) break;
                         idx[d] = 0;
                         soff -= src_stride[d] * osh[d];
                       }
                     }
                   });
}

Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t length) {
  const auto& sh = x.shape();
  const AxisSplit ax = split_axis(sh, axis, "slice");
  const int64_t norm_axis = axis < 0 ? axis + static_cast<int64_t>(sh.size()) : axis;
  if (start < 0 || length < 1 || start + length > ax.len) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") invalid for shape " +
                                shape_to_string(sh));
  }
  std::vector<int64_t> osh = sh;
  osh[static_cast<size_t>(norm_axis)] = length;
  std::vector<double> out(static_cast<size_t>(ax.outer * length * ax.inner));
  const double* xd = x.data().data();
  for (int64_t o = 0; o < ax.outer; ++o) {
    const double* src = xd + (o * ax.len + start) * ax.inner;
    double* dst = out.data() + o * length * ax.inner;
    std::memcpy(dst, src, sizeof(double) * static_cast<size_t>(length * ax.inner));
  }
  return make_node(osh, std::move(out), {x},
                   [ax, start, length](const std::vector<double>& go,
                                       const std::vector<std::vector<double>*>& pg) {
                     if (!pg[0]) return;
                     auto& gx = *pg[0];
                     for (int64_t o = 0; o < ax.outer; ++o) {
                       double* dst = gx.data() + (o * ax.len + start) * ax.inner;
                       const double* src = go.data() + o * length * ax.inner;
                       for (int64_t i = 0; i < length * ax.inner; ++i) dst[i] += src[i];
                     }
                   });
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no tensors given");
  const auto& ref = parts[0].shape();
  const int64_t nd = static_cast<int64_t>(ref.size());
  int64_t norm_axis = axis < 0 ? axis + nd : axis;
  if (norm_axis < 0 || norm_axis >= nd) {
    throw std::invalid_argument("concat: axis out of range for shape " + shape_to_string(ref));
  }
  int64_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (static_cast<int64_t>(s.size()) != nd) {
      throw std::invalid_argument("concat: rank mismatch: " + shape_to_string(ref) + " vs " +
                                  shape_to_string(s));
    }
    for (int64_t d = 0; d < nd; ++d) {
      if (d != norm_axis && s[static_cast<size_t>(d)] != ref[static_cast<size_t>(d)]) {
        throw std::invalid_argument("concat: shapes differ off-axis: " + shape_to_string(ref) +
                                    " vs " + shape_to_string(s));
      }
    }
    total += s[static_cast<size_t>(norm_axis)];
  }
  std::vector<int64_t> osh = ref;
  osh[static_cast<size_t>(norm_axis)] = total;
  const AxisSplit oax = split_axis(osh, norm_axis, "concat");

  std::vector<double> out(static_cast<size_t>(oax.outer * oax.len * oax.inner));
  std::vector<int64_t> lens;
  int64_t pos = 0;
  for (const auto& p : parts) {
    const int64_t len = p.shape()[static_cast<size_t>(norm_axis)];
    lens.push_back(len);
    const double* src = p.data().data();
    for (int64_t o = 0; o < oax.outer; ++o) {
      std::memcpy(out.data() + (o * oax.len + pos) * oax.inner,
                  src + o * len * oax.inner,
                  sizeof(double) * static_cast<size_t>(len * oax.inner));
    }
    pos += len;
  }
  return make_node(osh, std::move(out), parts,
                   [oax, lens](const std::vector<double>& go,
                               const std::vector<std::vector<double>*>& pg) {
                     int64_t pos = 0;
                     for (size_t pi = 0; pi < lens.size(); ++pi) {
                       const int64_t len = lens[pi];
                       if (pg[pi]) {
                         auto& g = *pg[pi];
                         for (int64_t o = 0; o < oax.outer; ++o) {
                           const double* src = go.data() + (o * oax.len + pos) * oax.inner;
                           double* dst = g.data() + o * len * oax.inner;
                           for (int64_t i = 0; i < len * oax.inner; ++i) dst[i] += src[i];
                         }
                       }
                       pos += len;
                     }
                   });
}

Tensor gaussian_maps(const Tensor& centers, double sigma, int64_t height, int64_t width) {
  if (centers.dim() != 2 || centers.size(1) != 2) {
    throw std::invalid_argument("gaussian_maps: centers must be (T, 2), got " +
                                shape_to_string(centers.shape()));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_maps: sigma must be positive");
  if (height < 1 || width < 1) {
    throw std::invalid_argument("gaussian_maps: grid extents must be positive");
  }
  const int64_t steps = centers.size(0);
  const int64_t cells = height * width;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> out(static_cast<size_t>(steps * cells));
  const double* cd = centers.data().data();
  for (int64_t t = 0; t < steps; ++t) {
    const double cr = cd[t * 2 + 0];
    const double cc = cd[t * 2 + 1];
    double* row = out.data() + t * cells;
    // exponent shift keeps the normalization exact even for far-off centers
    double emax = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < height; ++i) {
      for (int64_t j = 0; j < width; ++j) {
        const double di = static_cast<double>(i) - cr;
        const double dj = static_cast<double>(j) - cc;
        const double e = -(di * di + dj * dj) * inv2s2;
        row[i * width + j] = e;
        emax = std::max(emax, e);
      }
    }
    double z = 0.0;
    for (int64_t c = 0; c < cells; ++c) {
      row[c] = std::exp(row[c] - emax);
      z += row[c];
    }
    const double inv = 1.0 / z;
    for (int64_t c = 0; c < cells; ++c) row[c] *= inv;
  }

  std::vector<double> map_cache = out;
  Tensor tc = centers;
  return make_node(
      {steps, cells}, std::move(out), {centers},
      [tc, map_cache = std::move(map_cache), steps, cells, height, width, sigma](
          const std::vector<double>& go, const std::vector<std::vector<double>*>& pg) {
        if (!pg[0]) return;
        auto& gc = *pg[0];
        const double* cd = tc.data().data();
        const double inv_s2 = 1.0 / (sigma * sigma);
        for (int64_t t = 0; t < steps; ++t) {
          const double cr = cd[t * 2 + 0];
          const double cc = cd[t * 2 + 1];
          const double* map = map_cache.data() + t * cells;
          const double* g = go.data() + t * cells;
          double a_r = 0.0, a_c = 0.0, b = 0.0, c_r = 0.0, c_c = 0.0;
          for (int64_t i = 0; i < height; ++i) {
            for (int64_t j = 0; j < width; ++j) {
              const int64_t off = i * width + j;
              const double di = static_cast<double>(i) - cr;
              const double dj = static_cast<double>(j) - cc;
              const double gm = g[off] * map[off];
              a_r += gm * di;
              a_c += gm * dj;
              b += gm;
              c_r += map[off] * di;
              c_c += map[off] * dj;
            }
          }
          gc[t * 2 + 0] += (a_r - b * c_r) * inv_s2;
          gc[t * 2 + 1] += (a_c - b * c_c) * inv_s2;
        }
      });
}

}  // namespace parknet
