#pragma once

// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written as plain scalar loops (long double
// where extra precision matters) and never calls into the library paths it
// is checking.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "parknet/rng.hpp"
#include "parknet/tensor.hpp"

namespace oracle {

// Central finite differences of loss_fn w.r.t. every element of probe.
// loss_fn must rebuild the forward graph from the probe's current data.
// Returns the worst |analytic - numeric| - (atol + rtol * |numeric|); a
// non-positive result means every element passed.
inline double finite_difference_gap(parknet::Tensor probe,
                                    const std::function<parknet::Tensor()>& loss_fn,
                                    double h = 1e-5, double rtol = 1e-4,
                                    double atol = 1e-7) {
  probe.zero_grad();
  parknet::Tensor loss = loss_fn();
  loss.backward();
  const std::vector<double> analytic = probe.grad();

  double worst = -1.0;
  auto& values = probe.data();
  for (size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss_fn().item();
    values[i] = saved - h;
    const double down = loss_fn().item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double gap = std::abs(analytic[i] - numeric) - (atol + rtol * std::abs(numeric));
    worst = std::max(worst, gap);
  }
  return worst;
}

// Triple-loop matrix product, no blocking, no reuse of library kernels.
inline std::vector<double> matmul_naive(const std::vector<double>& a,
                                        const std::vector<double>& b, int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      long double acc = 0.0L;
      for (int kk = 0; kk < k; ++kk) {
        acc += static_cast<long double>(a[i * k + kk]) * b[kk * n + j];
      }
      c[static_cast<size_t>(i) * n + j] = static_cast<double>(acc);
    }
  }
  return c;
}

// Extended-precision softmax of one row.
inline std::vector<double> softmax_naive(const std::vector<double>& x) {
  long double mx = x[0];
  for (double v : x) mx = std::max<long double>(mx, v);
  std::vector<long double> e(x.size());
  long double z = 0.0L;
  for (size_t i = 0; i < x.size(); ++i) {
    e[i] = expl(static_cast<long double>(x[i]) - mx);
    z += e[i];
  }
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(e[i] / z);
  return out;
}

// Scalar-loop single-head attention: q (tq, d), k (tk, d), v (tk, dv),
// optional 0/1 mask (tq, tk).
inline std::vector<double> attention_naive(const std::vector<double>& q,
                                           const std::vector<double>& k,
                                           const std::vector<double>& v, int tq, int tk,
                                           int d, int dv,
                                           const std::vector<double>* mask = nullptr) {
  std::vector<double> out(static_cast<size_t>(tq) * dv, 0.0);
  const long double scale = 1.0L / sqrtl(static_cast<long double>(d));
  for (int i = 0; i < tq; ++i) {
    std::vector<long double> scores(static_cast<size_t>(tk));
    long double mx = -1e30L;
    for (int j = 0; j < tk; ++j) {
      long double s = 0.0L;
      for (int c = 0; c < d; ++c) {
        s += static_cast<long double>(q[i * d + c]) * k[j * d + c];
      }
      scores[static_cast<size_t>(j)] = s * scale;
      if (!mask || (*mask)[static_cast<size_t>(i) * tk + j] != 0.0) {
        mx = std::max(mx, scores[static_cast<size_t>(j)]);
      }
    }
    long double z = 0.0L;
    std::vector<long double> w(static_cast<size_t>(tk), 0.0L);
    for (int j = 0; j < tk; ++j) {
      if (mask && (*mask)[static_cast<size_t>(i) * tk + j] == 0.0) continue;
      w[static_cast<size_t>(j)] = expl(scores[static_cast<size_t>(j)] - mx);
      z += w[static_cast<size_t>(j)];
    }
    for (int j = 0; j < tk; ++j) {
      const long double p = w[static_cast<size_t>(j)] / z;
      for (int c = 0; c < dv; ++c) {
        out[static_cast<size_t>(i) * dv + c] += static_cast<double>(p * v[j * dv + c]);
      }
    }
  }
  return out;
}

// Extended-precision mean NLL with an ignore marker.
inline double cross_entropy_naive(const std::vector<double>& logits,
                                  const std::vector<int64_t>& targets, int n, int vocab,
                                  int64_t ignore_index) {
  long double total = 0.0L;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    const int64_t t = targets[static_cast<size_t>(i)];
    if (t == ignore_index) continue;
    long double mx = logits[static_cast<size_t>(i) * vocab];
    for (int j = 1; j < vocab; ++j) {
      mx = std::max<long double>(mx, logits[static_cast<size_t>(i) * vocab + j]);
    }
    long double z = 0.0L;
    for (int j = 0; j < vocab; ++j) {
      z += expl(static_cast<long double>(logits[static_cast<size_t>(i) * vocab + j]) - mx);
    }
    total += -(static_cast<long double>(logits[static_cast<size_t>(i) * vocab + t]) - mx -
               logl(z));
    ++count;
  }
  if (count == 0) throw std::logic_error("oracle: all rows ignored");
  return static_cast<double>(total / count);
}

// Direct-summation DFT of a complex sequence (the library uses an FFT).
inline std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& z) {
  const size_t n = z.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * M_PIl * static_cast<long double>(k) *
                              static_cast<long double>(t) / static_cast<long double>(n);
      const long double c = cosl(ang), s = sinl(ang);
      re += z[t].real() * c - z[t].imag() * s;
      im += z[t].real() * s + z[t].imag() * c;
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

inline parknet::Tensor random_tensor(parknet::Rng& rng, std::vector<int64_t> shape,
                                     bool requires_grad = true, double lo = -1.0,
                                     double hi = 1.0) {
  parknet::Tensor t = parknet::Tensor::zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
