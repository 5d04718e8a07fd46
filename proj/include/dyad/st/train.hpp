#pragma once

#include <cmath>
#include <future>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "dyad/core/adam.hpp"
#include "dyad/io/csv.hpp"
#include "dyad/st/model.hpp"

namespace dyad::st {

struct StTrainConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 150;
  std::size_t batch = 256;
  double lr = 1e-5;
  std::size_t patience = 0;  // 0 = run every epoch, keep the best
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// Windows pre-normalized once and shared read-only by all eight heads.
struct PreparedWindows {
  std::vector<Matrix> X;  // win x 8 each, z-scored inputs
  std::vector<Matrix> Y;  // win x 8 each, z-scored targets
};

inline PreparedWindows prepare_windows(const std::vector<WindowSample>& windows,
                                       const FeatureNorm& norm) {
  PreparedWindows out;
  out.X.reserve(windows.size());
  out.Y.reserve(windows.size());
  for (const auto& w : windows) {
    Matrix x(w.X.rows(), kFeatures), y(w.Y.rows(), kFeatures);
    for (std::size_t t = 0; t < w.X.rows(); ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) {
        x(t, f) = (w.X(t, f) - norm.in_mean[f]) / norm.in_std[f];
        y(t, f) = (w.Y(t, f) - norm.out_mean[f]) / norm.out_std[f];
      }
    out.X.push_back(std::move(x));
    out.Y.push_back(std::move(y));
  }
  return out;
}

namespace detail {

// Mean per-window rMSE of one head over a prepared set, in normalized units.
inline double head_val_rmse(const FeatureHead& head, const PreparedWindows& data) {
  if (data.X.empty()) return 0.0;
  const std::size_t T = data.X[0].rows();
  double total = 0.0;
  LstmSeqCache cache;
  std::vector<Matrix> xs(T, Matrix(1, kFeatures));
  for (std::size_t w = 0; w < data.X.size(); ++w) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) xs[t](0, f) = data.X[w](t, f);
    lstm_seq_forward(head.cell, xs, cache);
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double y = head.b_out[0];
      for (std::size_t u = 0; u < head.cell.hidden; ++u)
        y += head.w_out[u] * cache.hs[t + 1](0, u);
      const double d = y - data.Y[w](t, head.feature);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(T));
  }
  return total / static_cast<double>(data.X.size());
}

}  // namespace detail

struct HeadCurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;    // normalized MSE
  double val_rmse_raw = 0.0;  // denormalized (deg or deg/s)
};

struct TrainedHead {
  FeatureHead head;
  std::vector<HeadCurvePoint> curves;
  std::size_t best_epoch = 0;
};

// Trains one therapist-feature head. Deterministic given (seed, feature_idx).
inline TrainedHead train_feature_model(const PreparedWindows& train,
                                       const PreparedWindows& val,
                                       std::size_t feature_idx, const FeatureNorm& norm,
                                       const StTrainConfig& cfg) {
  require(!train.X.empty(), "train_feature_model: no training windows");
  require(!val.X.empty(), "train_feature_model: no validation windows");
  const std::size_t T = train.X[0].rows();

  Rng rng = Rng(cfg.seed).fork(100 + feature_idx);
  TrainedHead out;
  out.head = FeatureHead(feature_idx, cfg.hidden);
  out.head.init(rng);
  FeatureHead& head = out.head;

  AdamState opt(cfg.lr, head.params());

  double best_val = detail::head_val_rmse(head, val);
  std::vector<Matrix> best{head.cell.Wx, head.cell.Wh, head.cell.b, head.w_out, head.b_out};
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train.X.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Matrix> xs(T), ys(T), dhs(T);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t bsz = std::min(cfg.batch, order.size() - start);
      for (std::size_t t = 0; t < T; ++t) {
        xs[t] = Matrix(bsz, kFeatures);
        ys[t] = Matrix(bsz, 1);
      }
      for (std::size_t i = 0; i < bsz; ++i) {
        const Matrix& xw = train.X[order[start + i]];
        const Matrix& yw = train.Y[order[start + i]];
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t f = 0; f < kFeatures; ++f) xs[t](i, f) = xw(t, f);
          ys[t](i, 0) = yw(t, feature_idx);
        }
      }

      LstmSeqCache cache;
      lstm_seq_forward(head.cell, xs, cache);

      // per-timestep readout + MSE
      Matrix dw_out(1, cfg.hidden), db_out(1, 1);
      const double scale = 2.0 / static_cast<double>(bsz * T);
      double loss = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const Matrix& h = cache.hs[t + 1];
        Matrix dy(bsz, 1);
        for (std::size_t i = 0; i < bsz; ++i) {
          double y = head.b_out[0];
          const double* hr = h.row(i);
          for (std::size_t u = 0; u < cfg.hidden; ++u) y += head.w_out[u] * hr[u];
          const double err = y - ys[t](i, 0);
          loss += err * err;
          dy(i, 0) = scale * err;
        }
        Matrix dwt = matmul_tn(dy, h);  // 1 x H
        add_inplace(dw_out, dwt);
        db_out[0] += col_sums(dy)[0];
        dhs[t] = matmul(dy, head.w_out);  // bsz x H
      }
      loss /= static_cast<double>(bsz * T);
      if (!std::isfinite(loss))
        throw NumericError("train_feature_model: non-finite loss (feature " +
                           std::to_string(feature_idx) + ", epoch " +
                           std::to_string(epoch) + ")");
      epoch_loss += loss * static_cast<double>(bsz);

      LstmGrads lg;
      lstm_seq_backward(head.cell, cache, dhs, lg);
      auto params = head.params();
      std::vector<const Matrix*> grads{&lg.dWx, &lg.dWh, &lg.db, &dw_out, &db_out};
      adam_step(opt, params, grads);
    }
    epoch_loss /= static_cast<double>(train.X.size());

    const double vr = detail::head_val_rmse(head, val);
    out.curves.push_back({epoch, epoch_loss, vr * norm.out_std[feature_idx]});
    if (vr < best_val) {
      best_val = vr;
      out.best_epoch = epoch;
      best = {head.cell.Wx, head.cell.Wh, head.cell.b, head.w_out, head.b_out};
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  head.cell.Wx = best[0];
  head.cell.Wh = best[1];
  head.cell.b = best[2];
  head.w_out = best[3];
  head.b_out = best[4];
  return out;
}

struct TrainedSt {
  std::vector<FeatureHead> heads;
  FeatureNorm norm;
  StModel model;
  std::vector<std::vector<HeadCurvePoint>> curves;  // one per head
};

// Trains the eight heads (fully independent; run in parallel) and combines
// them into the deployment model.
inline TrainedSt train_st(const std::vector<WindowSample>& train_windows,
                          const std::vector<WindowSample>& val_windows,
                          const StTrainConfig& cfg) {
  TrainedSt out;
  out.norm = fit_feature_norm(train_windows);
  PreparedWindows train = prepare_windows(train_windows, out.norm);
  PreparedWindows val = prepare_windows(val_windows, out.norm);

  const std::size_t hw = std::thread::hardware_concurrency();
  const std::size_t threads = cfg.threads > 0 ? cfg.threads : (hw > 0 ? hw : 1);
  std::counting_semaphore<kFeatures> slots(static_cast<std::ptrdiff_t>(threads));

  std::vector<std::future<TrainedHead>> futures;
  for (std::size_t f = 0; f < kFeatures; ++f) {
    futures.push_back(std::async(std::launch::async, [&, f] {
      slots.acquire();
      TrainedHead h = train_feature_model(train, val, f, out.norm, cfg);
      slots.release();
      return h;
    }));
  }
  out.curves.resize(kFeatures);
  for (std::size_t f = 0; f < kFeatures; ++f) {
    TrainedHead th = futures[f].get();
    out.curves[f] = std::move(th.curves);
    out.heads.push_back(std::move(th.head));
  }
  out.model = StModel::combine(out.heads, out.norm);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation: per-window rMSE over the 50 timesteps per feature, then
// mean +/- std across windows; positions aggregate features 0..3, velocities
// features 4..7. All in raw units (deg, deg/s).
// ---------------------------------------------------------------------------
struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::array<MeanStd, kFeatures> per_feature;
  MeanStd position;
  MeanStd velocity;
};

namespace detail {

inline MeanStd summarize(const std::vector<double>& v) {
  MeanStd out;
  out.count = v.size();
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  for (double x : v) out.stdev += (x - out.mean) * (x - out.mean);
  out.stdev = std::sqrt(out.stdev / static_cast<double>(v.size()));
  return out;
}

template <typename PredictFn>
inline EvalReport evaluate_with(const std::vector<WindowSample>& test, PredictFn&& fn) {
  require(!test.empty(), "evaluate: no test windows");
  std::array<std::vector<double>, kFeatures> feat;
  std::vector<double> pos, vel;
  for (const auto& w : test) {
    Matrix yhat = fn(w);
    std::array<double, kFeatures> rmse{};
    for (std::size_t f = 0; f < kFeatures; ++f) {
      double acc = 0.0;
      for (std::size_t t = 0; t < w.Y.rows(); ++t) {
        const double d = yhat(t, f) - w.Y(t, f);
        acc += d * d;
      }
      rmse[f] = std::sqrt(acc / static_cast<double>(w.Y.rows()));
      feat[f].push_back(rmse[f]);
    }
    pos.push_back((rmse[0] + rmse[1] + rmse[2] + rmse[3]) / 4.0);
    vel.push_back((rmse[4] + rmse[5] + rmse[6] + rmse[7]) / 4.0);
  }
  EvalReport rep;
  for (std::size_t f = 0; f < kFeatures; ++f) rep.per_feature[f] = summarize(feat[f]);
  rep.position = summarize(pos);
  rep.velocity = summarize(vel);
  return rep;
}

}  // namespace detail

inline EvalReport evaluate_rmse(const StModel& model,
                                const std::vector<WindowSample>& test) {
  return detail::evaluate_with(test, [&](const WindowSample& w) {
    return model.predict(w.X);
  });
}

// Patient-copy baseline: the therapist prediction is the patient stream
// re-indexed onto the target window ([t_start+shift ...], last frame held).
inline EvalReport evaluate_baseline_copy(const std::vector<WindowSample>& test,
                                         std::size_t shift = kShift) {
  return detail::evaluate_with(test, [&](const WindowSample& w) {
    Matrix yhat(w.Y.rows(), kFeatures);
    for (std::size_t t = 0; t < w.Y.rows(); ++t) {
      const std::size_t src = std::min(t + shift, w.X.rows() - 1);
      for (std::size_t f = 0; f < kFeatures; ++f) yhat(t, f) = w.X(src, f);
    }
    return yhat;
  });
}

// Zero-order hold: the last therapist value observable at time t (offline
// baseline only; uses therapist history).
inline EvalReport evaluate_baseline_zoh(const std::vector<WindowSample>& test,
                                        std::size_t shift = kShift) {
  return detail::evaluate_with(test, [&](const WindowSample& w) {
    const std::size_t now_row = w.Y.rows() - shift - 1;  // therapist at time t
    Matrix yhat(w.Y.rows(), kFeatures);
    for (std::size_t t = 0; t < w.Y.rows(); ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) yhat(t, f) = w.Y(now_row, f);
    return yhat;
  });
}

// ---------------------------------------------------------------------------
// Leave-one-out harness.
// ---------------------------------------------------------------------------
struct DyadWindows {
  int dyad_id = 0;
  std::vector<WindowSample> train, val, test, all;
};

struct LooRow {
  std::string train_set;
  std::string test_set;
  EvalReport report;
  StModel model;
};

struct LooReport {
  std::vector<LooRow> rows;  // row 0 = pooled, then one per held-out dyad
};

inline LooReport leave_one_out(const std::vector<DyadWindows>& dyads,
                               const StTrainConfig& cfg) {
  require(dyads.size() >= 2, "leave_one_out: need at least 2 dyads");
  LooReport rep;

  auto concat = [](const std::vector<const std::vector<WindowSample>*>& parts) {
    std::vector<WindowSample> out;
    for (const auto* p : parts)
      for (const auto& w : *p) out.push_back(w);
    return out;
  };

  // pooled: train/val/test partitions of every dyad
  {
    std::vector<const std::vector<WindowSample>*> tr, va, te;
    std::string ids;
    for (const auto& d : dyads) {
      tr.push_back(&d.train);
      va.push_back(&d.val);
      te.push_back(&d.test);
      ids += (ids.empty() ? "" : "+") + std::to_string(d.dyad_id);
    }
    TrainedSt model = train_st(concat(tr), concat(va), cfg);
    LooRow row;
    row.train_set = ids;
    row.test_set = ids + " (held-out tail)";
    row.report = evaluate_rmse(model.model, concat(te));
    row.model = model.model;
    rep.rows.push_back(std::move(row));
  }

  // one run per held-out dyad, tested on everything it recorded
  for (std::size_t held = 0; held < dyads.size(); ++held) {
    std::vector<const std::vector<WindowSample>*> tr, va;
    std::string ids;
    for (std::size_t d = 0; d < dyads.size(); ++d) {
      if (d == held) continue;
      tr.push_back(&dyads[d].train);
      va.push_back(&dyads[d].val);
      ids += (ids.empty() ? "" : "+") + std::to_string(dyads[d].dyad_id);
    }
    TrainedSt model = train_st(concat(tr), concat(va), cfg);
    LooRow row;
    row.train_set = ids;
    row.test_set = std::to_string(dyads[held].dyad_id);
    row.report = evaluate_rmse(model.model, dyads[held].all);
    row.model = model.model;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline void write_loo_csv(const std::string& path, const LooReport& rep) {
  io::CsvWriter w(path);
  w.header({"train_set", "test_set", "pos_rmse_mean", "pos_rmse_std", "vel_rmse_mean",
            "vel_rmse_std"});
  for (const auto& r : rep.rows)
    w.row({r.train_set, r.test_set},
          {r.report.position.mean, r.report.position.stdev, r.report.velocity.mean,
           r.report.velocity.stdev});
}

inline void write_head_curves_csv(const std::string& path,
                                  const std::vector<std::vector<HeadCurvePoint>>& curves) {
  io::CsvWriter w(path);
  w.header({"feature", "epoch", "train_loss", "val_rmse"});
  for (std::size_t f = 0; f < curves.size(); ++f)
    for (const auto& c : curves[f])
      w.row_strings({std::to_string(f), std::to_string(c.epoch), io::num(c.train_loss),
                     io::num(c.val_rmse_raw)});
}

}  // namespace dyad::st
