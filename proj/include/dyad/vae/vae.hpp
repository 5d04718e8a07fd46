#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "dyad/core/layers.hpp"
#include "dyad/core/rng.hpp"
#include "dyad/pipeline/stride.hpp"

namespace dyad::vae {

using pipeline::Joint;
using pipeline::kStrideSamples;
using pipeline::NormStats;

inline constexpr std::size_t kLatentDim = 2;

// ---------------------------------------------------------------------------
// Fourier reconstruction: s_hat(tau) = sum_k a_k cos(2 pi k tau / 100)
//                                    + b_k sin(2 pi k tau / 100), tau = 0..99.
// The basis is 100-periodic, so decoded strides are cyclic by construction.
// ---------------------------------------------------------------------------
inline double fourier_eval(const std::vector<double>& a, const std::vector<double>& b,
                           double tau) {
  require(a.size() == b.size(), "fourier: coefficient counts differ");
  const double w = 2.0 * std::numbers::pi / static_cast<double>(kStrideSamples);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double arg = w * static_cast<double>(k + 1) * tau;
    acc += a[k] * std::cos(arg) + b[k] * std::sin(arg);
  }
  return acc;
}

inline std::vector<double> fourier_reconstruct(const std::vector<double>& a,
                                               const std::vector<double>& b) {
  std::vector<double> s(kStrideSamples);
  for (std::size_t t = 0; t < kStrideSamples; ++t)
    s[t] = fourier_eval(a, b, static_cast<double>(t));
  return s;
}

// Basis matrix used by the decoder: row c is basis function c sampled at
// tau = 0..99; coefficients are packed [a_1..a_{n/2} | b_1..b_{n/2}].
inline Matrix fourier_basis(std::size_t n_coeffs) {
  require(n_coeffs % 2 == 0, "fourier: coefficient count must be even");
  const std::size_t half = n_coeffs / 2;
  Matrix phi(n_coeffs, kStrideSamples);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(kStrideSamples);
  for (std::size_t k = 0; k < half; ++k)
    for (std::size_t t = 0; t < kStrideSamples; ++t) {
      const double arg = w * static_cast<double>(k + 1) * static_cast<double>(t);
      phi(k, t) = std::cos(arg);
      phi(half + k, t) = std::sin(arg);
    }
  return phi;
}

// ---------------------------------------------------------------------------
// Model: conv/pool encoder with dense heads for (z_mu, log z_sigma), dense
// decoder emitting Fourier coefficients. One independent model per joint.
// ---------------------------------------------------------------------------
struct VaeModel {
  Joint joint = Joint::hip;
  std::size_t n_coeffs = 32;  // 16 harmonics
  Network trunk;
  Dense head_mu;
  Dense head_logsigma;
  Network decoder;
  Matrix basis;  // n_coeffs x 100, fixed
  NormStats stats;

  std::vector<Matrix*> params() {
    std::vector<Matrix*> p = trunk.params();
    p.push_back(&head_mu.W);
    p.push_back(&head_mu.b);
    p.push_back(&head_logsigma.W);
    p.push_back(&head_logsigma.b);
    for (Matrix* q : decoder.params()) p.push_back(q);
    return p;
  }
};

// Architecture: conv1d(1->8,k5) / pool2 / conv1d(8->16,k5) / pool2 /
// dense 352->64->16, heads 16->2; decoder dense 2->32->64->n.
inline VaeModel make_vae(Joint joint, std::uint64_t seed, std::size_t n_coeffs = 32) {
  VaeModel m;
  m.joint = joint;
  m.n_coeffs = n_coeffs;
  m.basis = fourier_basis(n_coeffs);
  Rng rng(seed);

  m.trunk.layers.push_back(Conv1d(1, 8, 5, 1, kStrideSamples));  // -> 8 x 96
  m.trunk.layers.push_back(Activation(Act::tanh));
  m.trunk.layers.push_back(MaxPool1d(8, 2, 96));  // -> 8 x 48
  m.trunk.layers.push_back(Conv1d(8, 16, 5, 1, 48));  // -> 16 x 44
  m.trunk.layers.push_back(Activation(Act::tanh));
  m.trunk.layers.push_back(MaxPool1d(16, 2, 44));  // -> 16 x 22
  m.trunk.layers.push_back(Dense(16 * 22, 64));
  m.trunk.layers.push_back(Activation(Act::tanh));
  m.trunk.layers.push_back(Dense(64, 16));
  m.trunk.layers.push_back(Activation(Act::tanh));
  m.trunk.init(rng);

  m.head_mu = Dense(16, kLatentDim);
  m.head_mu.init(rng);
  m.head_logsigma = Dense(16, kLatentDim);
  m.head_logsigma.init(rng);

  m.decoder.layers.push_back(Dense(kLatentDim, 32));
  m.decoder.layers.push_back(Activation(Act::tanh));
  m.decoder.layers.push_back(Dense(32, 64));
  m.decoder.layers.push_back(Activation(Act::tanh));
  m.decoder.layers.push_back(Dense(64, n_coeffs));
  m.decoder.init(rng);
  return m;
}

// Latent distribution parameters for a batch of normalized strides (B x 100).
// z_sigma = exp(log-head output) > 0.
inline std::pair<Matrix, Matrix> encode(const VaeModel& m, const Matrix& s) {
  require(s.cols() == kStrideSamples,
          "encode: input length " + std::to_string(s.cols()) + " != 100");
  Matrix h = m.trunk.forward(s);
  LayerCache c1, c2;
  Matrix mu = m.head_mu.forward(h, c1);
  Matrix logs = m.head_logsigma.forward(h, c2);
  Matrix sigma(logs.rows(), logs.cols());
  for (std::size_t i = 0; i < logs.size(); ++i) sigma[i] = std::exp(logs[i]);
  return {mu, sigma};
}

// Reparameterized draw: z = mu + sigma (.) eps, eps ~ N(0, I).
inline Matrix sample_latent(const Matrix& z_mu, const Matrix& z_sigma, Rng& rng) {
  require(z_mu.same_shape(z_sigma), "sample_latent: shape mismatch");
  Matrix z(z_mu.rows(), z_mu.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    require(z_sigma[i] >= 0.0, "sample_latent: negative sigma");
    z[i] = z_mu[i] + z_sigma[i] * rng.normal();
  }
  return z;
}

// Decoded (normalized-scale) strides for a batch of latents (B x 2).
inline Matrix decode(const VaeModel& m, const Matrix& z) {
  require(z.cols() == kLatentDim, "decode: latent dim " + std::to_string(z.cols()) + " != 2");
  Matrix coeffs = m.decoder.forward(z);
  return matmul(coeffs, m.basis);
}

// Closed-form KL(N(mu, sigma^2) || N(0, I)), summed over latent dims,
// averaged over the batch.
inline double kl_divergence(const Matrix& z_mu, const Matrix& z_sigma) {
  double acc = 0.0;
  for (std::size_t i = 0; i < z_mu.size(); ++i) {
    const double s2 = z_sigma[i] * z_sigma[i];
    acc += 0.5 * (z_mu[i] * z_mu[i] + s2 - 1.0 - std::log(s2));
  }
  return acc / static_cast<double>(z_mu.rows());
}

// MSE (mean over batch and samples) + beta * KL.
inline double vae_loss(const Matrix& s, const Matrix& s_hat, const Matrix& z_mu,
                       const Matrix& z_sigma, double beta) {
  require(s.same_shape(s_hat), "vae_loss: shape mismatch " + s.shape_str() + " vs " +
                                   s_hat.shape_str());
  double mse = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s_hat[i] - s[i];
    mse += d * d;
  }
  mse /= static_cast<double>(s.size());
  return mse + beta * kl_divergence(z_mu, z_sigma);
}

}  // namespace dyad::vae
