#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dyad/core/matrix.hpp"

namespace dyad {

// Bias-corrected Adam over a fixed list of parameter arrays.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<Matrix> m;  // first moments, one per parameter
  std::vector<Matrix> v;  // second moments

  AdamState() = default;
  AdamState(double learning_rate, const std::vector<Matrix*>& params)
      : lr(learning_rate) {
    attach(params);
  }

  void attach(const std::vector<Matrix*>& params) {
    m.clear();
    v.clear();
    for (const Matrix* p : params) {
      m.emplace_back(p->rows(), p->cols());
      v.emplace_back(p->rows(), p->cols());
    }
    step = 0;
  }
};

// One update. grads[i] must match params[i] in shape; non-finite gradients
// abort training via NumericError.
inline void adam_step(AdamState& state, const std::vector<Matrix*>& params,
                      const std::vector<const Matrix*>& grads) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam: parameter/gradient count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p];
    const Matrix& g = *grads[p];
    require(w.same_shape(g), "adam: gradient shape " + g.shape_str() +
                                 " != parameter shape " + w.shape_str());
    Matrix& mm = state.m[p];
    Matrix& vv = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) throw NumericError("adam: non-finite gradient");
      mm[i] = state.beta1 * mm[i] + (1.0 - state.beta1) * gi;
      vv[i] = state.beta2 * vv[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = mm[i] / bc1;
      const double vhat = vv[i] / bc2;
      w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline void adam_step(AdamState& state, const std::vector<Matrix*>& params,
                      const std::vector<Matrix*>& grads) {
  std::vector<const Matrix*> cg(grads.begin(), grads.end());
  adam_step(state, params, cg);
}

}  // namespace dyad
