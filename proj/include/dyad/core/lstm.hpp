#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "dyad/core/matrix.hpp"
#include "dyad/core/rng.hpp"

namespace dyad {

// LSTM cell with standard gates: i,f,o = sigmoid, g = tanh,
// c_t = f (.) c_{t-1} + i (.) g, h_t = o (.) tanh(c_t).
// Gate rows in Wx/Wh/b are packed [i | f | g | o], each block of size hidden.
struct LstmCell {
  std::size_t in = 0, hidden = 0;
  Matrix Wx;  // 4H x in
  Matrix Wh;  // 4H x H
  Matrix b;   // 1 x 4H

  LstmCell() = default;
  LstmCell(std::size_t in_size, std::size_t hidden_size)
      : in(in_size),
        hidden(hidden_size),
        Wx(4 * hidden_size, in_size),
        Wh(4 * hidden_size, hidden_size),
        b(1, 4 * hidden_size) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t i = 0; i < Wx.size(); ++i) Wx[i] = rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < Wh.size(); ++i) Wh[i] = rng.uniform(-bound, bound);
    b.fill(0.0);
  }

  std::vector<Matrix*> params() { return {&Wx, &Wh, &b}; }

  // Single-sample step. x: 1 x in, h/c: 1 x hidden.
  std::pair<Matrix, Matrix> step(const Matrix& x, const Matrix& h_prev,
                                 const Matrix& c_prev) const {
    require(x.rows() == 1 && x.cols() == in,
            "lstm: input shape " + x.shape_str() + " != (1," + std::to_string(in) + ")");
    require(h_prev.cols() == hidden && c_prev.cols() == hidden,
            "lstm: state width != hidden " + std::to_string(hidden));
    const std::size_t H = hidden;
    Matrix h(1, H), c(1, H);
    for (std::size_t u = 0; u < H; ++u) {
      double zi = b[u], zf = b[H + u], zg = b[2 * H + u], zo = b[3 * H + u];
      for (std::size_t k = 0; k < in; ++k) {
        const double xv = x[k];
        zi += Wx(u, k) * xv;
        zf += Wx(H + u, k) * xv;
        zg += Wx(2 * H + u, k) * xv;
        zo += Wx(3 * H + u, k) * xv;
      }
      for (std::size_t k = 0; k < H; ++k) {
        const double hv = h_prev[k];
        zi += Wh(u, k) * hv;
        zf += Wh(H + u, k) * hv;
        zg += Wh(2 * H + u, k) * hv;
        zo += Wh(3 * H + u, k) * hv;
      }
      const double gi = 1.0 / (1.0 + std::exp(-zi));
      const double gf = 1.0 / (1.0 + std::exp(-zf));
      const double gg = std::tanh(zg);
      const double go = 1.0 / (1.0 + std::exp(-zo));
      c[u] = gf * c_prev[u] + gi * gg;
      h[u] = go * std::tanh(c[u]);
    }
    return {h, c};
  }
};

// Cached activations of a batched sequence forward pass (B samples, T steps).
struct LstmSeqCache {
  std::vector<Matrix> gi, gf, gg, go;  // T of B x H, post-activation
  std::vector<Matrix> cs;              // T of B x H
  std::vector<Matrix> tanh_cs;         // T of B x H
  std::vector<Matrix> hs;              // T+1 of B x H, hs[0] = h0
  const std::vector<Matrix>* xs = nullptr;
};

struct LstmGrads {
  Matrix dWx, dWh, db;
};

// xs: T matrices of B x in; initial state zero. Returns cache whose hs[t+1]
// is the hidden output at step t.
inline void lstm_seq_forward(const LstmCell& cell, const std::vector<Matrix>& xs,
                             LstmSeqCache& cache) {
  const std::size_t T = xs.size();
  require(T > 0, "lstm: empty sequence");
  const std::size_t B = xs[0].rows();
  const std::size_t H = cell.hidden;
  cache.gi.assign(T, Matrix());
  cache.gf.assign(T, Matrix());
  cache.gg.assign(T, Matrix());
  cache.go.assign(T, Matrix());
  cache.cs.assign(T, Matrix());
  cache.tanh_cs.assign(T, Matrix());
  cache.hs.assign(T + 1, Matrix());
  cache.hs[0] = Matrix(B, H);
  cache.xs = &xs;
  Matrix c_prev(B, H);
  for (std::size_t t = 0; t < T; ++t) {
    require(xs[t].cols() == cell.in && xs[t].rows() == B,
            "lstm: step " + std::to_string(t) + " shape " + xs[t].shape_str());
    Matrix z = matmul_nt(xs[t], cell.Wx);  // B x 4H
    Matrix zh = matmul_nt(cache.hs[t], cell.Wh);
    add_inplace(z, zh);
    add_row_broadcast(z, cell.b);
    Matrix i(B, H), f(B, H), g(B, H), o(B, H), c(B, H), tc(B, H), h(B, H);
    for (std::size_t n = 0; n < B; ++n) {
      const double* zr = z.row(n);
      const double* cp = c_prev.row(n);
      for (std::size_t u = 0; u < H; ++u) {
        const double vi = 1.0 / (1.0 + std::exp(-zr[u]));
        const double vf = 1.0 / (1.0 + std::exp(-zr[H + u]));
        const double vg = std::tanh(zr[2 * H + u]);
        const double vo = 1.0 / (1.0 + std::exp(-zr[3 * H + u]));
        const double vc = vf * cp[u] + vi * vg;
        i(n, u) = vi;
        f(n, u) = vf;
        g(n, u) = vg;
        o(n, u) = vo;
        c(n, u) = vc;
        tc(n, u) = std::tanh(vc);
        h(n, u) = vo * tc(n, u);
      }
    }
    cache.gi[t] = std::move(i);
    cache.gf[t] = std::move(f);
    cache.gg[t] = std::move(g);
    cache.go[t] = std::move(o);
    cache.cs[t] = std::move(c);
    cache.tanh_cs[t] = std::move(tc);
    cache.hs[t + 1] = std::move(h);
    c_prev = cache.cs[t];
  }
}

// dhs[t] is dLoss/dh_t (B x H). Accumulates parameter grads; optionally
// produces dLoss/dx_t when dxs is non-null.
inline void lstm_seq_backward(const LstmCell& cell, const LstmSeqCache& cache,
                              const std::vector<Matrix>& dhs, LstmGrads& grads,
                              std::vector<Matrix>* dxs = nullptr) {
  const std::size_t T = cache.cs.size();
  require(cache.xs != nullptr && T > 0, "lstm: backward without forward cache");
  require(dhs.size() == T, "lstm: dhs count mismatch");
  const std::vector<Matrix>& xs = *cache.xs;
  const std::size_t B = cache.cs[0].rows();
  const std::size_t H = cell.hidden;
  grads.dWx = Matrix(4 * H, cell.in);
  grads.dWh = Matrix(4 * H, H);
  grads.db = Matrix(1, 4 * H);
  if (dxs) dxs->assign(T, Matrix());
  Matrix dc_next(B, H);
  Matrix dh_carry(B, H);
  for (std::size_t t = T; t-- > 0;) {
    Matrix dz(B, 4 * H);
    const Matrix* c_prev_m = (t == 0) ? nullptr : &cache.cs[t - 1];
    for (std::size_t n = 0; n < B; ++n) {
      const double* dh_in = dhs[t].row(n);
      const double* dh_c = dh_carry.row(n);
      const double* tc = cache.tanh_cs[t].row(n);
      const double* io = cache.go[t].row(n);
      const double* ii = cache.gi[t].row(n);
      const double* ff = cache.gf[t].row(n);
      const double* gg = cache.gg[t].row(n);
      double* dcn = dc_next.row(n);
      double* dzr = dz.row(n);
      for (std::size_t u = 0; u < H; ++u) {
        const double dh = dh_in[u] + dh_c[u];
        const double dov = dh * tc[u];
        const double dcv = dcn[u] + dh * io[u] * (1.0 - tc[u] * tc[u]);
        const double cprev = (t == 0) ? 0.0 : (*c_prev_m)(n, u);
        const double div = dcv * gg[u];
        const double dfv = dcv * cprev;
        const double dgv = dcv * ii[u];
        dcn[u] = dcv * ff[u];
        dzr[u] = div * ii[u] * (1.0 - ii[u]);
        dzr[H + u] = dfv * ff[u] * (1.0 - ff[u]);
        dzr[2 * H + u] = dgv * (1.0 - gg[u] * gg[u]);
        dzr[3 * H + u] = dov * io[u] * (1.0 - io[u]);
      }
    }
    Matrix dwx = matmul_tn(dz, xs[t]);
    Matrix dwh = matmul_tn(dz, cache.hs[t]);
    add_inplace(grads.dWx, dwx);
    add_inplace(grads.dWh, dwh);
    Matrix dbt = col_sums(dz);
    add_inplace(grads.db, dbt);
    dh_carry = matmul(dz, cell.Wh);
    if (dxs) (*dxs)[t] = matmul(dz, cell.Wx);
  }
}

}  // namespace dyad
