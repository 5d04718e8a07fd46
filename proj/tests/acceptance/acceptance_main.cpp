// Acceptance suite: one self-contained check per criterion (A1..A8), each
// printing a single [PASS]/[FAIL] line. Run with no arguments for the full
// suite or pass criterion ids (e.g. "A3 A6").

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/field/field.hpp"
#include "dyad/io/hash.hpp"
#include "dyad/pipeline/pipeline.hpp"
#include "dyad/rt/engine.hpp"
#include "dyad/st/train.hpp"
#include "dyad/synth/dyad.hpp"
#include "dyad/vae/train.hpp"
#include "support/gradcheck.hpp"

#ifndef DYAD_CLI_PATH
#define DYAD_CLI_PATH "dyad"
#endif

using namespace dyad;
namespace fs = std::filesystem;

namespace {

std::string g_bin = DYAD_CLI_PATH;
fs::path g_work;

struct Outcome {
  bool pass = false;
  std::string details;
};

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------
Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal(0.0, scale);
  return m;
}

double probe_loss(const Matrix& y, const Matrix& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
  return acc;
}

// Spearman rank correlation with midranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return v[x] < v[y];
    });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

st::StModel random_st_model(std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<st::FeatureHead> heads;
  st::FeatureNorm norm;
  for (std::size_t f = 0; f < st::kFeatures; ++f) {
    st::FeatureHead h(f, hidden);
    h.init(rng);
    heads.push_back(h);
    norm.in_mean[f] = 5.0;
    norm.in_std[f] = 20.0;
    norm.out_mean[f] = 5.0;
    norm.out_std[f] = 20.0;
  }
  return st::StModel::combine(heads, norm);
}

int run_cli(const std::string& args) {
  const std::string cmd = g_bin + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

// ---------------------------------------------------------------------------
// A1: finite-difference gradient suite over >= 20 seeds per layer kind.
// ---------------------------------------------------------------------------
Outcome check_a1() {
  double worst = 0.0;
  std::string worst_where = "none";
  auto track = [&](double err, const char* where) {
    if (err > worst) {
      worst = err;
      worst_where = where;
    }
  };

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    {  // dense
      Dense d(6, 5);
      d.init(rng);
      Matrix x = random_matrix(3, 6, rng);
      Matrix r = random_matrix(3, 5, rng);
      auto loss = [&] {
        LayerCache c;
        return probe_loss(d.forward(x, c), r);
      };
      LayerCache cache;
      d.forward(x, cache);
      LayerGrads g;
      Matrix dx = d.backward(cache, r, g);
      track(dyad::test::max_grad_rel_err(d.W, g.dW, loss), "dense.W");
      track(dyad::test::max_grad_rel_err(d.b, g.db, loss), "dense.b");
      track(dyad::test::max_grad_rel_err(x, dx, loss), "dense.x");
    }
    {  // conv1d
      Conv1d cv(2, 3, 4, 2, 12);
      cv.init(rng);
      Matrix x = random_matrix(2, 24, rng);
      Matrix r = random_matrix(2, 3 * cv.out_len(), rng);
      auto loss = [&] {
        LayerCache c;
        return probe_loss(cv.forward(x, c), r);
      };
      LayerCache cache;
      cv.forward(x, cache);
      LayerGrads g;
      Matrix dx = cv.backward(cache, r, g);
      track(dyad::test::max_grad_rel_err(cv.W, g.dW, loss), "conv1d.W");
      track(dyad::test::max_grad_rel_err(cv.b, g.db, loss), "conv1d.b");
      track(dyad::test::max_grad_rel_err(x, dx, loss), "conv1d.x");
    }
    {  // maxpool
      MaxPool1d mp(2, 3, 12);
      Matrix x = random_matrix(2, 24, rng);
      Matrix r = random_matrix(2, 8, rng);
      auto loss = [&] {
        LayerCache c;
        return probe_loss(mp.forward(x, c), r);
      };
      LayerCache cache;
      mp.forward(x, cache);
      LayerGrads g;
      Matrix dx = mp.backward(cache, r, g);
      track(dyad::test::max_grad_rel_err(x, dx, loss), "maxpool.x");
    }
    {  // lstm cell over a short sequence
      LstmCell cell(3, 4);
      cell.init(rng);
      const std::size_t T = 4, B = 2;
      std::vector<Matrix> xs, rs;
      for (std::size_t t = 0; t < T; ++t) {
        xs.push_back(random_matrix(B, 3, rng));
        rs.push_back(random_matrix(B, 4, rng));
      }
      auto loss = [&] {
        LstmSeqCache c;
        lstm_seq_forward(cell, xs, c);
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t) acc += probe_loss(c.hs[t + 1], rs[t]);
        return acc;
      };
      LstmSeqCache cache;
      lstm_seq_forward(cell, xs, cache);
      LstmGrads g;
      lstm_seq_backward(cell, cache, rs, g);
      track(dyad::test::max_grad_rel_err(cell.Wx, g.dWx, loss), "lstm.Wx");
      track(dyad::test::max_grad_rel_err(cell.Wh, g.dWh, loss), "lstm.Wh");
      track(dyad::test::max_grad_rel_err(cell.b, g.db, loss), "lstm.b");
    }
    {  // VAE end-to-end (subsampled parameter entries, every matrix)
      vae::VaeModel m = vae::make_vae(pipeline::Joint::hip, 300 + seed);
      Matrix s = random_matrix(2, pipeline::kStrideSamples, rng);
      Matrix eps = random_matrix(2, 2, rng);
      const double beta = 1e-2;
      auto loss = [&] {
        auto [mu, sigma] = vae::encode(m, s);
        Matrix z(2, 2);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + sigma[i] * eps[i];
        Matrix s_hat = vae::decode(m, z);
        return vae::vae_loss(s, s_hat, mu, sigma, beta);
      };
      vae::detail::VaeGrads grads;
      vae::detail::vae_batch_grads(m, s, eps, beta, grads);
      auto params = m.params();
      auto gflat = grads.flatten(m);
      Rng pick(seed + 900);
      for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        const Matrix& g = *gflat[p];
        for (std::size_t c = 0; c < std::min<std::size_t>(4, w.size()); ++c) {
          const std::size_t i = pick.index(w.size());
          const double saved = w[i];
          w[i] = saved + dyad::test::kFdStep;
          const double up = loss();
          w[i] = saved - dyad::test::kFdStep;
          const double down = loss();
          w[i] = saved;
          track(dyad::test::rel_err(g[i], (up - down) / (2.0 * dyad::test::kFdStep)),
                "vae.e2e");
        }
      }
    }
    {  // ST end-to-end at win = 5
      const std::size_t T = 5, B = 2, H = 4;
      st::FeatureHead head(1, H);
      head.init(rng);
      std::vector<Matrix> xs(T), ys(T);
      for (std::size_t t = 0; t < T; ++t) {
        xs[t] = random_matrix(B, st::kFeatures, rng);
        ys[t] = random_matrix(B, 1, rng);
      }
      auto loss = [&] {
        LstmSeqCache cache;
        lstm_seq_forward(head.cell, xs, cache);
        double acc = 0.0;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t i = 0; i < B; ++i) {
            double y = head.b_out[0];
            for (std::size_t u = 0; u < H; ++u)
              y += head.w_out[u] * cache.hs[t + 1](i, u);
            const double d = y - ys[t](i, 0);
            acc += d * d;
          }
        return acc / static_cast<double>(B * T);
      };
      LstmSeqCache cache;
      lstm_seq_forward(head.cell, xs, cache);
      Matrix dw_out(1, H), db_out(1, 1);
      std::vector<Matrix> dhs(T);
      const double scale = 2.0 / static_cast<double>(B * T);
      for (std::size_t t = 0; t < T; ++t) {
        Matrix dy(B, 1);
        for (std::size_t i = 0; i < B; ++i) {
          double y = head.b_out[0];
          for (std::size_t u = 0; u < H; ++u)
            y += head.w_out[u] * cache.hs[t + 1](i, u);
          dy(i, 0) = scale * (y - ys[t](i, 0));
        }
        Matrix dwt = matmul_tn(dy, cache.hs[t + 1]);
        add_inplace(dw_out, dwt);
        db_out[0] += col_sums(dy)[0];
        dhs[t] = matmul(dy, head.w_out);
      }
      LstmGrads lg;
      lstm_seq_backward(head.cell, cache, dhs, lg);
      track(dyad::test::max_grad_rel_err(head.cell.Wx, lg.dWx, loss), "st.Wx");
      track(dyad::test::max_grad_rel_err(head.cell.Wh, lg.dWh, loss), "st.Wh");
      track(dyad::test::max_grad_rel_err(head.cell.b, lg.db, loss), "st.b");
      track(dyad::test::max_grad_rel_err(head.w_out, dw_out, loss), "st.w_out");
      track(dyad::test::max_grad_rel_err(head.b_out, db_out, loss), "st.b_out");
    }
  }

  Outcome o;
  o.pass = worst < 1e-4;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max rel err %.3g (worst at %s, threshold 1e-4, 20 seeds)", worst,
                worst_where.c_str());
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A2: VAE on a 2-parameter synthetic gait family.
// ---------------------------------------------------------------------------
struct FamilyStride {
  pipeline::Stride stride;
  double timing;     // parameter 1: flexion timing shift (cycles)
  double amplitude;  // parameter 2: amplitude scale
};

FamilyStride make_family_stride(Rng& rng) {
  FamilyStride out;
  out.timing = rng.uniform(-0.08, 0.08);
  out.amplitude = rng.uniform(0.7, 1.3);
  synth::GaitProfile p = synth::GaitProfile::typical();
  for (std::size_t t = 0; t < pipeline::kStrideSamples; ++t) {
    const double phase = static_cast<double>(t) / 99.0 + out.timing;
    double q, qd;
    synth::eval_harmonics(p.hip, p.hip_mean, out.amplitude, phase, 1.0, q, qd);
    out.stride.hip[t] = q + rng.normal(0.0, 0.3);
    synth::eval_harmonics(p.knee, p.knee_mean, out.amplitude, phase, 1.0, q, qd);
    out.stride.knee[t] = q + rng.normal(0.0, 0.3);
  }
  return out;
}

Outcome check_a2() {
  Rng rng(20260401);
  std::vector<FamilyStride> train_set, held_set;
  for (int i = 0; i < 5000; ++i) train_set.push_back(make_family_stride(rng));
  for (int i = 0; i < 1600; ++i) held_set.push_back(make_family_stride(rng));

  std::vector<pipeline::Stride> train_strides, held_strides;
  for (const auto& f : train_set) train_strides.push_back(f.stride);
  for (const auto& f : held_set) held_strides.push_back(f.stride);
  pipeline::NormStats stats = pipeline::fit_stats(train_strides);

  auto to_matrix = [&](const std::vector<pipeline::Stride>& strides,
                       pipeline::Joint joint) {
    const std::size_t j = joint == pipeline::Joint::hip ? 0 : 1;
    Matrix m(strides.size(), pipeline::kStrideSamples);
    for (std::size_t i = 0; i < strides.size(); ++i)
      for (std::size_t t = 0; t < pipeline::kStrideSamples; ++t)
        m(i, t) = (strides[i].joint(j)[t] - stats.mean(j)[t]) / stats.stdev(j)[t];
    return m;
  };

  auto train_joint = [&](pipeline::Joint joint) {
    vae::VaeModel model = vae::make_vae(joint, joint == pipeline::Joint::hip ? 71 : 72);
    model.stats = stats;
    vae::TrainConfig tc;
    tc.epochs = 150;
    tc.batch = 256;
    tc.lr = 2e-3;
    tc.patience = 15;
    tc.beta = 1e-3;
    tc.seed = joint == pipeline::Joint::hip ? 81 : 82;
    vae::train_vae(model, to_matrix(train_strides, joint), to_matrix(held_strides, joint),
                   tc);
    return model;
  };
  auto hip_future = std::async(std::launch::async, train_joint, pipeline::Joint::hip);
  vae::VaeModel knee = train_joint(pipeline::Joint::knee);
  vae::VaeModel hip = hip_future.get();

  // (a) held-out reconstruction rMSE in degrees
  auto hip_rmse = vae::reconstruction_rmse(hip, held_strides);
  auto knee_rmse = vae::reconstruction_rmse(knee, held_strides);

  // (b) latent axes vs generative parameters, best axis assignment per joint
  auto min_best_rho = [&](const vae::VaeModel& model) {
    Matrix z = vae::encode(model, to_matrix(held_strides, model.joint)).first;
    std::vector<double> z0(z.rows()), z1(z.rows()), t(z.rows()), a(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      z0[i] = z(i, 0);
      z1[i] = z(i, 1);
      t[i] = held_set[i].timing;
      a[i] = held_set[i].amplitude;
    }
    const double r00 = std::fabs(spearman(z0, t));
    const double r01 = std::fabs(spearman(z0, a));
    const double r10 = std::fabs(spearman(z1, t));
    const double r11 = std::fabs(spearman(z1, a));
    // assignment 1: axis0<->timing, axis1<->amplitude; assignment 2: swapped
    return std::max(std::min(r00, r11), std::min(r01, r10));
  };
  const double rho_hip = min_best_rho(hip);
  const double rho_knee = min_best_rho(knee);

  Outcome o;
  o.pass = hip_rmse.mean <= 3.0 && knee_rmse.mean <= 3.0 && rho_hip >= 0.7 &&
           rho_knee >= 0.7;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "held-out rMSE hip %.2f deg, knee %.2f deg (<= 3); |spearman| hip %.2f, "
                "knee %.2f (>= 0.7)",
                hip_rmse.mean, knee_rmse.mean, rho_hip, rho_knee);
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A3: GMR against a linear-field oracle.
// ---------------------------------------------------------------------------
Outcome check_a3() {
  const double a11 = 2.0, a12 = 0.3, a21 = -0.5, a22 = 1.5;
  const double sigma = 0.05;
  Rng rng(33);
  Matrix samples(4000, 4);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double z0 = rng.uniform(-1, 1), z1 = rng.uniform(-1, 1);
    samples(i, 0) = z0;
    samples(i, 1) = z1;
    samples(i, 2) = a11 * z0 + a12 * z1 + rng.normal(0.0, sigma);
    samples(i, 3) = a21 * z0 + a22 * z1 + rng.normal(0.0, sigma);
  }
  field::GmmConfig gc;
  gc.components = 10;
  gc.seed = 7;
  field::GmmModel gmm = field::fit_gmm(samples, gc);

  // (a) EM trace monotone within 1e-9
  bool monotone = true;
  for (std::size_t i = 1; i < gmm.trace.mean_loglik.size(); ++i)
    if (gmm.trace.mean_loglik[i] < gmm.trace.mean_loglik[i - 1] - 1e-9) monotone = false;

  // (b) interior-grid RMSE of E[F|z] vs the exact field, <= 3 sigma
  auto grid = field::sample_grid(gmm.z_min, gmm.z_max, 25);
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = 0; j < 25; ++j) {
      if (i == 0 || j == 0 || i == 24 || j == 24) continue;  // boundary ring
      const field::Vec2 z = grid[i * 25 + j];
      auto g = field::gmr_expect(gmm, z);
      const double fx = a11 * z[0] + a12 * z[1];
      const double fy = a21 * z[0] + a22 * z[1];
      se += (g.expectation[0] - fx) * (g.expectation[0] - fx) +
            (g.expectation[1] - fy) * (g.expectation[1] - fy);
      n += 2;
    }
  const double rmse = std::sqrt(se / static_cast<double>(n));

  // (c) K=1 conditional vs a brute-force quadrature oracle
  field::GmmConfig g1;
  g1.components = 1;
  g1.seed = 3;
  field::GmmModel single = field::fit_gmm(samples, g1);
  const field::GmmComponent& comp = single.comps[0];
  double worst_rel = 0.0;
  for (const field::Vec2& z : {field::Vec2{0.2, -0.4}, field::Vec2{-0.5, 0.1}}) {
    // quadrature over the force block
    const int nq = 240;
    const double s2 = std::sqrt(std::max(comp.cov[10], comp.cov[15]));
    double mass = 0.0, m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nq; ++j) {
        const double f0 = comp.mean[2] + (i + 0.5 - nq / 2.0) * (12.0 * s2 / nq);
        const double f1 = comp.mean[3] + (j + 0.5 - nq / 2.0) * (12.0 * s2 / nq);
        const double p = std::exp(comp.log_density({z[0], z[1], f0, f1}));
        mass += p;
        m0 += p * f0;
        m1 += p * f1;
      }
    auto g = field::gmr_expect(single, z);
    worst_rel = std::max(worst_rel, std::fabs(g.expectation[0] - m0 / mass) /
                                        std::max(1e-6, std::fabs(m0 / mass)));
    worst_rel = std::max(worst_rel, std::fabs(g.expectation[1] - m1 / mass) /
                                        std::max(1e-6, std::fabs(m1 / mass)));
  }

  Outcome o;
  o.pass = monotone && rmse <= 3.0 * sigma && worst_rel < 1e-3;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "interior RMSE %.4f (<= %.2f), EM monotone %s, K=1 vs quadrature rel "
                "err %.2e (< 1e-3)",
                rmse, 3.0 * sigma, monotone ? "yes" : "NO", worst_rel);
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A4: ST learnability and leave-one-out generalization on 8 transform dyads.
// ---------------------------------------------------------------------------
Outcome check_a4() {
  // one shared therapist policy (same transform) across dyads; patients vary
  synth::TransformDyadParams tp;
  tp.gain = {0.85, 0.9, 0.85, 0.9};
  tp.offset_deg = {4.0, -3.0, 4.0, -3.0};
  tp.lowpass_alpha = 0.5;
  tp.noise_sigma_deg = 0.2;

  std::vector<st::DyadWindows> dyads;
  Rng root(444);
  for (int d = 0; d < 8; ++d) {
    Rng r = root.fork(d);
    synth::GaitProfile p = synth::GaitProfile::typical();
    p.cadence = 0.85 + 0.3 * r.uniform();
    for (auto& h : p.hip) h.amp *= 0.85 + 0.3 * r.uniform();
    for (auto& h : p.knee) h.amp *= 0.85 + 0.3 * r.uniform();
    p.impairment[r.index(4)] = 0.2 + 0.4 * r.uniform();
    p.side_scale[r.index(2)] = 0.8 + 0.15 * r.uniform();
    p.noise_sigma_deg = 0.2;
    auto rec = synth::transform_dyad(p, tp, 10.0, 333.0, 4000 + d);

    st::DyadWindows dw;
    dw.dyad_id = d;
    Matrix xp = st::features_from_frames(rec.patient);
    Matrix xt = st::features_from_frames(rec.therapist);
    dw.all = st::build_windows(xp, xt, d);
    auto labels = st::split_windows_by_time(dw.all, rec.patient.size(), {0.7, 0.2, 0.1});
    for (std::size_t w = 0; w < dw.all.size(); ++w) {
      if (labels[w] == 0) dw.train.push_back(dw.all[w]);
      if (labels[w] == 1) dw.val.push_back(dw.all[w]);
      if (labels[w] == 2) dw.test.push_back(dw.all[w]);
    }
    dyads.push_back(std::move(dw));
  }

  st::StTrainConfig cfg;
  cfg.hidden = 24;
  cfg.epochs = 10;
  cfg.batch = 32;
  cfg.lr = 3e-3;
  cfg.seed = 5;
  cfg.threads = 2;
  st::LooReport rep = st::leave_one_out(dyads, cfg);

  const double pooled = rep.rows[0].report.position.mean;
  bool loo_ok = true, beats_copy = true;
  double worst_loo = 0.0, worst_margin = 0.0;
  for (std::size_t r = 1; r < rep.rows.size(); ++r) {
    const double held = rep.rows[r].report.position.mean;
    worst_loo = std::max(worst_loo, held);
    if (held > 2.0 * pooled) loo_ok = false;
    const auto copy = st::evaluate_baseline_copy(dyads[r - 1].all);
    if (held >= copy.position.mean) beats_copy = false;
    worst_margin = std::max(worst_margin, held / copy.position.mean);
  }

  Outcome o;
  o.pass = pooled <= 2.0 && loo_ok && beats_copy;
  char buf[220];
  std::snprintf(buf, sizeof(buf),
                "pooled test pos rMSE %.2f deg (<= 2); worst held-out %.2f deg (<= "
                "%.2f); beats patient-copy on every dyad: %s (worst ratio %.2f)",
                pooled, worst_loo, 2.0 * pooled, beats_copy ? "yes" : "NO",
                worst_margin);
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A5: the paper's latency claim on this hardware.
// ---------------------------------------------------------------------------
Outcome check_a5() {
  st::StModel model = random_st_model(64, 9);

  rt::BenchOptions bo;
  bo.trials = 2000;
  bo.warmup = 200;
  bo.seed = 1;
  rt::LatencyStats bench = rt::bench_latency(model, bo);

  // 60 s session replayed through serve at the stream rate
  synth::GaitProfile p = synth::GaitProfile::typical();
  p.noise_sigma_deg = 0.3;
  auto rec = synth::transform_dyad(p, {}, 60.0, 333.0, 12);
  rt::VectorFrameSource src(rt::frames_from_recording(rec));
  rt::NullFrameSink sink;
  rt::ServeStats stats = rt::serve(src, sink, model, {});

  const bool mean_ok = bench.mean_ms < 3.0;
  const bool p99_ok = bench.p99_ms < 5.0;
  const bool rate_ok = stats.achieved_hz >= 333.0;
  const bool overruns_ok = stats.overruns == 0;
  Outcome o;
  o.pass = mean_ok && p99_ok && rate_ok && overruns_ok;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "bench mean %.2f ms (< 3), p99 %.2f ms (< 5); replay %.0f Hz (>= 333), "
                "overruns %zu/%zu (= 0 required)",
                bench.mean_ms, bench.p99_ms, stats.achieved_hz, stats.overruns,
                stats.predictions);
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A6: ring buffer properties + bitwise replay equivalence.
// ---------------------------------------------------------------------------
Outcome check_a6() {
  // (a) randomized concurrent push/snapshot interleavings, >= 1e5 ops
  rt::RingBuffer ring(st::kWin);
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> pushes{0};
  std::thread pusher([&] {
    std::uint64_t seq = 1;
    while (!stop.load(std::memory_order_relaxed)) {
      rt::FrameMessage f;
      f.seq = seq;
      for (std::size_t j = 0; j < st::kFeatures; ++j)
        f.v[j] = static_cast<float>(seq * 8 + j);
      ring.push(f);
      pushes.fetch_add(1, std::memory_order_relaxed);
      ++seq;
    }
  });
  std::size_t snapshots = 0, violations = 0;
  std::vector<rt::FrameMessage> snap;
  while (snapshots < 100000) {
    if (!ring.snapshot(snap)) continue;
    for (std::size_t i = 0; i < snap.size(); ++i) {
      if (snap[i].seq != snap[0].seq + i) ++violations;  // torn or out of order
      if (snap[i].v[5] != static_cast<float>(snap[i].seq * 8 + 5)) ++violations;
    }
    ++snapshots;
  }
  stop.store(true);
  pusher.join();
  const std::uint64_t total_ops = pushes.load() + snapshots;

  // (b) serve replay equals offline predict bitwise at every emitted window
  st::StModel model = random_st_model(64, 21);
  synth::GaitProfile p = synth::GaitProfile::typical();
  p.noise_sigma_deg = 0.3;
  auto rec = synth::transform_dyad(p, {}, 6.0, 333.0, 5);
  auto frames = rt::frames_from_recording(rec);
  rt::VectorFrameSource src(frames);
  rt::VectorFrameSink sink;
  rt::ServeOptions so;
  so.horizon = 49;
  rt::ServeStats stats = rt::serve(src, sink, model, so);
  std::size_t mismatches = 0;
  for (const rt::FrameMessage& out : sink.frames) {
    Matrix x(st::kWin, st::kFeatures);
    for (std::size_t t = 0; t < st::kWin; ++t)
      for (std::size_t f = 0; f < st::kFeatures; ++f)
        x(t, f) = static_cast<double>(frames[out.seq - st::kWin + t].v[f]);
    Matrix y = model.predict(x);
    for (std::size_t f = 0; f < st::kFeatures; ++f)
      if (out.v[f] != static_cast<float>(y(so.horizon, f))) ++mismatches;
  }

  Outcome o;
  o.pass = violations == 0 && mismatches == 0 && stats.predictions > 0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%llu interleaved ops, %zu snapshot violations (= 0); replay vs offline "
                "mismatches %zu/%zu values (= 0)",
                static_cast<unsigned long long>(total_ops), violations, mismatches,
                sink.frames.size() * st::kFeatures);
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A7: end-to-end determinism through the CLI.
// ---------------------------------------------------------------------------
Outcome check_a7() {
  const fs::path base = g_work / "a7";
  fs::remove_all(base);
  fs::create_directories(base);
  for (const char* which : {"a", "b"}) {
    nlohmann::json cfg = {
        {"seed", 17},
        {"out_dir", (base / which).string()},
        {"synth", {{"dyads", 5}, {"duration_s", 24.0}}},
        {"vae", {{"epochs", 10}, {"batch", 64}, {"lr", 3e-3}, {"patience", 10}}},
        {"field", {{"components", 5}, {"grid", 9}}},
        {"st", {{"hidden", 8}, {"epochs", 2}, {"lr", 1e-3}, {"threads", 2}}},
    };
    const fs::path cfg_path = base / (std::string("cfg_") + which + ".json");
    std::ofstream os(cfg_path);
    os << cfg.dump(2);
    os.close();
    const std::string c = "--config " + cfg_path.string();
    for (const char* sub :
         {"synth-data", "preprocess", "train-vae", "fit-field", "export-field",
          "train-st"}) {
      if (run_cli(c + " " + sub) != 0) {
        Outcome o;
        o.details = std::string("pipeline step failed: ") + sub;
        return o;
      }
    }
  }
  std::vector<std::string> files = {"models/vae_hip.dyfw", "models/vae_knee.dyfw",
                                    "field/field_hip_patient.csv",
                                    "field/field_hip_therapist.csv",
                                    "field/field_knee_patient.csv",
                                    "field/field_knee_therapist.csv"};
  for (std::size_t f = 0; f < st::kFeatures; ++f)
    files.push_back("st/st_model.head" + std::to_string(f) + ".dyfw");
  std::size_t differing = 0;
  for (const auto& f : files)
    if (io::hash_file((base / "a" / f).string()) !=
        io::hash_file((base / "b" / f).string()))
      ++differing;
  Outcome o;
  o.pass = differing == 0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%zu/%zu model/field files differ between identical-seed runs (= 0)",
                differing, files.size());
  o.details = buf;
  return o;
}

// ---------------------------------------------------------------------------
// A8: field antisymmetry with equal, constant stiffness.
// ---------------------------------------------------------------------------
Outcome check_a8() {
  const fs::path out = g_work / "a8";
  fs::remove_all(out);
  nlohmann::json cfg = {
      {"seed", 23},
      {"out_dir", out.string()},
      {"synth",
       {{"dyads", 6},
        {"duration_s", 30.0},
        {"K_p", 30.0},
        {"K_t", 30.0},
        {"B_p", 1.0},
        {"B_t", 1.0},
        {"vary_stiffness", false}}},
      {"vae", {{"epochs", 40}, {"batch", 64}, {"lr", 2e-3}, {"patience", 15}}},
      {"field", {{"components", 10}, {"grid", 25}}},
  };
  fs::create_directories(out);
  const fs::path cfg_path = out / "cfg.json";
  {
    std::ofstream os(cfg_path);
    os << cfg.dump(2);
  }
  const std::string c = "--config " + cfg_path.string();
  for (const char* sub : {"synth-data", "preprocess", "train-vae", "fit-field"}) {
    if (run_cli(c + " " + sub) != 0) {
      Outcome o;
      o.details = std::string("pipeline step failed: ") + sub;
      return o;
    }
  }

  double worst_mean_dev = 0.0;
  for (const char* joint : {"hip", "knee"}) {
    field::GmmModel gp = field::read_gmm_json(
        (out / "field" / (std::string("gmm_") + joint + "_patient.json")).string());
    field::GmmModel gt = field::read_gmm_json(
        (out / "field" / (std::string("gmm_") + joint + "_therapist.json")).string());
    // shared support: overlap of both fields' training bounds
    field::Vec2 lo{std::max(gp.z_min[0], gt.z_min[0]), std::max(gp.z_min[1], gt.z_min[1])};
    field::Vec2 hi{std::min(gp.z_max[0], gt.z_max[0]), std::min(gp.z_max[1], gt.z_max[1])};
    auto grid = field::sample_grid(lo, hi, 25);

    // interior - off the boundary ring, and with latent support under both
    // mixtures (above the lower quartile of grid marginal densities)
    auto marginal_logp = [](const field::GmmModel& g, const field::Vec2& z) {
      double best = -std::numeric_limits<double>::infinity();
      std::vector<double> terms(g.comps.size());
      for (std::size_t k = 0; k < g.comps.size(); ++k) {
        const auto& c4 = g.comps[k];
        const std::array<double, 4> szz{c4.cov[0], c4.cov[1], c4.cov[4], c4.cov[5]};
        const double det = szz[0] * szz[3] - szz[1] * szz[2];
        const auto inv = field::linalg::inv2(szz);
        const double d0 = z[0] - c4.mean[0], d1 = z[1] - c4.mean[1];
        const double quad =
            d0 * (inv[0] * d0 + inv[1] * d1) + d1 * (inv[2] * d0 + inv[3] * d1);
        terms[k] = std::log(c4.weight) - std::log(2.0 * std::numbers::pi) -
                   0.5 * std::log(det) - 0.5 * quad;
        best = std::max(best, terms[k]);
      }
      double acc = 0.0;
      for (double t : terms) acc += std::exp(t - best);
      return best + std::log(acc);
    };
    std::vector<double> support;
    std::vector<std::size_t> interior_idx;
    for (std::size_t i = 0; i < 25; ++i)
      for (std::size_t j = 0; j < 25; ++j) {
        if (i == 0 || j == 0 || i == 24 || j == 24) continue;
        const std::size_t idx = i * 25 + j;
        interior_idx.push_back(idx);
        support.push_back(std::min(marginal_logp(gp, grid[idx]),
                                   marginal_logp(gt, grid[idx])));
      }
    std::vector<double> sorted = support;
    std::sort(sorted.begin(), sorted.end());
    const double floor = sorted[sorted.size() / 4];

    double dev_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < interior_idx.size(); ++k) {
      if (support[k] < floor) continue;
      const field::Vec2& z = grid[interior_idx[k]];
      auto fp = field::gmr_expect(gp, z).expectation;
      auto ft = field::gmr_expect(gt, z).expectation;
      const double nx = -fp[0], ny = -fp[1];
      const double dot = nx * ft[0] + ny * ft[1];
      const double na = std::sqrt(nx * nx + ny * ny);
      const double nb = std::sqrt(ft[0] * ft[0] + ft[1] * ft[1]);
      if (na < 1e-9 || nb < 1e-9) continue;
      const double cosv = std::clamp(dot / (na * nb), -1.0, 1.0);
      dev_sum += std::acos(cosv) * 180.0 / std::numbers::pi;
      ++n;
    }
    worst_mean_dev = std::max(worst_mean_dev, dev_sum / static_cast<double>(n));
  }

  Outcome o;
  o.pass = worst_mean_dev <= 15.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean angular deviation between F_t and -F_p: worst joint %.2f deg "
                "(<= 15)",
                worst_mean_dev);
  o.details = buf;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::map<std::string, std::function<Outcome()>> checks = {
      {"A1", check_a1}, {"A2", check_a2}, {"A3", check_a3}, {"A4", check_a4},
      {"A5", check_a5}, {"A6", check_a6}, {"A7", check_a7}, {"A8", check_a8}};
  std::map<std::string, std::string> titles = {
      {"A1", "gradient suite"},
      {"A2", "VAE on synthetic gait family"},
      {"A3", "GMR linear-field oracle"},
      {"A4", "ST learnability + leave-one-out generalization"},
      {"A5", "latency"},
      {"A6", "ring buffer properties + replay equivalence"},
      {"A7", "pipeline determinism"},
      {"A8", "field antisymmetry"}};

  std::vector<std::string> selected;
  g_work = fs::temp_directory_path() / "dyad_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--bin" && i + 1 < argc) {
      g_bin = argv[++i];
    } else if (arg == "--workdir" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (checks.count(arg)) {
      selected.push_back(arg);
    } else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 1;
    }
  }
  if (selected.empty())
    for (const auto& [id, fn] : checks) selected.push_back(id);
  fs::create_directories(g_work);

  int failures = 0;
  for (const auto& id : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks.at(id)();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s — %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id.c_str(),
                titles.at(id).c_str(), o.details.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
