#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dyad/core/adam.hpp"
#include "dyad/core/serialize.hpp"
#include "dyad/io/csv.hpp"
#include "dyad/pipeline/dataset_io.hpp"
#include "dyad/vae/vae.hpp"

namespace dyad::vae {

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::size_t patience = 20;
  double beta = 1e-3;  // KL weight
  std::uint64_t seed = 0;
};

struct CurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

namespace detail {

struct VaeGrads {
  std::vector<LayerGrads> trunk;
  LayerGrads head_mu;
  LayerGrads head_logsigma;
  std::vector<LayerGrads> decoder;

  std::vector<Matrix*> flatten(VaeModel& m) {
    std::vector<Matrix*> out = Network::flatten(trunk, m.trunk.layers);
    out.push_back(&head_mu.dW);
    out.push_back(&head_mu.db);
    out.push_back(&head_logsigma.dW);
    out.push_back(&head_logsigma.db);
    for (Matrix* g : Network::flatten(decoder, m.decoder.layers)) out.push_back(g);
    return out;
  }
};

// One forward/backward pass over a batch with frozen noise. Returns the loss.
inline double vae_batch_grads(VaeModel& m, const Matrix& s, const Matrix& eps, double beta,
                              VaeGrads& grads) {
  const std::size_t B = s.rows();
  std::vector<LayerCache> trunk_caches;
  Matrix h = m.trunk.forward(s, &trunk_caches);
  LayerCache mu_cache, ls_cache;
  Matrix mu = m.head_mu.forward(h, mu_cache);
  Matrix logs = m.head_logsigma.forward(h, ls_cache);
  Matrix sigma(logs.rows(), logs.cols());
  for (std::size_t i = 0; i < logs.size(); ++i) sigma[i] = std::exp(logs[i]);

  Matrix z(B, kLatentDim);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + sigma[i] * eps[i];

  std::vector<LayerCache> dec_caches;
  Matrix coeffs = m.decoder.forward(z, &dec_caches);
  Matrix s_hat = matmul(coeffs, m.basis);

  const double loss = vae_loss(s, s_hat, mu, sigma, beta);

  // d MSE / d s_hat
  Matrix ds_hat(B, kStrideSamples);
  const double inv = 2.0 / static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ds_hat[i] = inv * (s_hat[i] - s[i]);

  Matrix dcoeffs = matmul_nt(ds_hat, m.basis);
  Matrix dz = m.decoder.backward(dec_caches, dcoeffs, grads.decoder);

  // reparameterization + closed-form KL gradients
  Matrix dmu = dz;
  Matrix dlogs(B, kLatentDim);
  const double bscale = beta / static_cast<double>(B);
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dlogs[i] = dz[i] * eps[i] * sigma[i] + bscale * (sigma[i] * sigma[i] - 1.0);
    dmu[i] += bscale * mu[i];
  }

  Matrix dh = m.head_mu.backward(mu_cache, dmu, grads.head_mu);
  Matrix dh2 = m.head_logsigma.backward(ls_cache, dlogs, grads.head_logsigma);
  add_inplace(dh, dh2);
  m.trunk.backward(trunk_caches, dh, grads.trunk);
  return loss;
}

inline std::vector<Matrix> snapshot(VaeModel& m) {
  std::vector<Matrix> out;
  for (Matrix* p : m.params()) out.push_back(*p);
  return out;
}

inline void restore(VaeModel& m, const std::vector<Matrix>& snap) {
  auto ps = m.params();
  require(ps.size() == snap.size(), "vae restore: parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = snap[i];
}

}  // namespace detail

// Deterministic validation objective: reconstruction from the latent mode
// plus the analytic KL term.
inline double validation_loss(const VaeModel& m, const Matrix& val, double beta) {
  auto [mu, sigma] = encode(m, val);
  Matrix s_hat = decode(m, mu);
  return vae_loss(val, s_hat, mu, sigma, beta);
}

struct TrainResult {
  std::vector<CurvePoint> curves;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// Trains in place; keeps the weights of the best-validation epoch.
inline TrainResult train_vae(VaeModel& m, const Matrix& train, const Matrix& val,
                             const TrainConfig& cfg) {
  require(train.rows() > 0 && val.rows() > 0, "train_vae: empty train or validation set");
  require(cfg.patience >= 1, "train_vae: patience must be >= 1");
  require(cfg.beta >= 0.0, "train_vae: beta must be >= 0");

  Rng rng(cfg.seed);
  AdamState opt(cfg.lr, m.params());

  TrainResult res;
  res.best_val_loss = validation_loss(m, val, cfg.beta);
  std::vector<Matrix> best = detail::snapshot(m);
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t bsz = std::min(cfg.batch, order.size() - start);
      Matrix bs(bsz, kStrideSamples);
      for (std::size_t i = 0; i < bsz; ++i)
        for (std::size_t c = 0; c < kStrideSamples; ++c)
          bs(i, c) = train(order[start + i], c);
      Matrix eps(bsz, kLatentDim);
      for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();

      detail::VaeGrads grads;
      const double loss = detail::vae_batch_grads(m, bs, eps, cfg.beta, grads);
      if (!std::isfinite(loss))
        throw NumericError("train_vae: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches));
      epoch_loss += loss * static_cast<double>(bsz);
      ++batches;

      auto params = m.params();
      auto gflat = grads.flatten(m);
      adam_step(opt, params, gflat);
    }
    epoch_loss /= static_cast<double>(train.rows());

    const double vloss = validation_loss(m, val, cfg.beta);
    res.curves.push_back({epoch, epoch_loss, vloss});
    if (vloss < res.best_val_loss) {
      res.best_val_loss = vloss;
      res.best_epoch = epoch;
      best = detail::snapshot(m);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = true;
      break;
    }
  }
  detail::restore(m, best);
  return res;
}

// Per-stride rMSE in degrees (denormalized), aggregated mean +/- std.
struct Rmse {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t count = 0;
};

inline Rmse reconstruction_rmse(const VaeModel& m, const std::vector<pipeline::Stride>& strides) {
  require(!strides.empty(), "reconstruction_rmse: no strides");
  const std::size_t j = m.joint == Joint::hip ? 0 : 1;
  const auto& mean = m.stats.mean(j);
  const auto& stdev = m.stats.stdev(j);
  std::vector<double> rmses;
  rmses.reserve(strides.size());
  for (const auto& s : strides) {
    Matrix x(1, kStrideSamples);
    for (std::size_t i = 0; i < kStrideSamples; ++i)
      x(0, i) = (s.joint(j)[i] - mean[i]) / stdev[i];
    auto [mu, sigma] = encode(m, x);
    Matrix s_hat = decode(m, mu);
    double acc = 0.0;
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      const double denorm = s_hat(0, i) * stdev[i] + mean[i];
      const double d = denorm - s.joint(j)[i];
      acc += d * d;
    }
    rmses.push_back(std::sqrt(acc / static_cast<double>(kStrideSamples)));
  }
  Rmse out;
  out.count = rmses.size();
  for (double v : rmses) out.mean += v;
  out.mean /= static_cast<double>(rmses.size());
  for (double v : rmses) out.stdev += (v - out.mean) * (v - out.mean);
  out.stdev = std::sqrt(out.stdev / static_cast<double>(rmses.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: DYFW weights + JSON sidecar (hyperparameters + NormStats).
// ---------------------------------------------------------------------------
inline void save_vae(const std::string& path, const VaeModel& m) {
  std::vector<dyfw::Record> records;
  for (const Layer& l : m.trunk.layers) records.push_back(dyfw::to_record(l));
  records.push_back(dyfw::to_record(Layer(m.head_mu)));
  records.push_back(dyfw::to_record(Layer(m.head_logsigma)));
  for (const Layer& l : m.decoder.layers) records.push_back(dyfw::to_record(l));
  dyfw::write_file(path, records);

  nlohmann::json j;
  j["joint"] = pipeline::joint_name(m.joint);
  j["n_coeffs"] = m.n_coeffs;
  j["latent_dim"] = kLatentDim;
  j["trunk_layers"] = m.trunk.layers.size();
  j["decoder_layers"] = m.decoder.layers.size();
  j["norm"] = pipeline::stats_to_json(m.stats);
  std::ofstream os(path + ".json");
  if (!os) throw DataError("vae: cannot write sidecar for " + path);
  os << j.dump(2) << "\n";
}

inline VaeModel load_vae(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) throw DataError("vae: missing sidecar " + path + ".json");
  nlohmann::json j;
  is >> j;

  VaeModel m;
  m.joint = pipeline::joint_from(j.at("joint").get<std::string>());
  m.n_coeffs = j.at("n_coeffs").get<std::size_t>();
  m.basis = fourier_basis(m.n_coeffs);
  m.stats = pipeline::stats_from_json(j.at("norm"));

  auto records = dyfw::read_file(path);
  const auto n_trunk = j.at("trunk_layers").get<std::size_t>();
  const auto n_dec = j.at("decoder_layers").get<std::size_t>();
  require(records.size() == n_trunk + 2 + n_dec, "vae: layer count mismatch in " + path);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < n_trunk; ++i)
    m.trunk.layers.push_back(dyfw::to_layer(records[idx++]));
  m.head_mu = std::get<Dense>(dyfw::to_layer(records[idx++]));
  m.head_logsigma = std::get<Dense>(dyfw::to_layer(records[idx++]));
  for (std::size_t i = 0; i < n_dec; ++i)
    m.decoder.layers.push_back(dyfw::to_layer(records[idx++]));
  return m;
}

inline void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curves) {
  io::CsvWriter w(path);
  w.header({"epoch", "train_loss", "val_loss"});
  for (const CurvePoint& c : curves)
    w.row_strings({std::to_string(c.epoch), io::num(c.train_loss), io::num(c.val_loss)});
}

}  // namespace dyad::vae
