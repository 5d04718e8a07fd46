#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/core/lstm.hpp"
#include "dyad/core/serialize.hpp"
#include "dyad/st/windows.hpp"

namespace dyad::st {

namespace detail {

// Branch-free exp for the f32 inference path: 2^(x log2 e) with a degree-5
// polynomial for the fractional part and an exponent-bit reconstruction.
// Absolute error ~2e-7 over the clamped range; every operation vectorizes.
inline float fast_expf(float x) {
  float t = x * 1.44269504088896341f;  // log2(e)
  t = t > 126.0f ? 126.0f : t;
  t = t < -126.0f ? -126.0f : t;
  const float k = std::floor(t);
  const float f = t - k;
  float p = 1.33335581e-3f;
  p = p * f + 9.61812911e-3f;
  p = p * f + 5.55041087e-2f;
  p = p * f + 2.40226507e-1f;
  p = p * f + 6.93147180e-1f;
  p = p * f + 1.0f;
  const auto bits = static_cast<std::uint32_t>((static_cast<std::int32_t>(k) + 127) << 23);
  float scale;
  std::memcpy(&scale, &bits, sizeof(scale));
  return p * scale;
}

inline float fast_sigmoidf(float x) { return 1.0f / (1.0f + fast_expf(-x)); }

inline float fast_tanhf(float x) { return 2.0f / (1.0f + fast_expf(-2.0f * x)) - 1.0f; }

}  // namespace detail

// One therapist feature's predictor: LSTM over the 8 patient features with a
// per-timestep linear readout. Training-precision (f64) representation.
struct FeatureHead {
  std::size_t feature = 0;  // therapist feature index this head predicts
  LstmCell cell;
  Matrix w_out;  // 1 x H readout weights
  Matrix b_out;  // 1 x 1

  FeatureHead() = default;
  FeatureHead(std::size_t feature_idx, std::size_t hidden)
      : feature(feature_idx), cell(kFeatures, hidden), w_out(1, hidden), b_out(1, 1) {}

  void init(Rng& rng) {
    cell.init(rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cell.hidden));
    for (std::size_t i = 0; i < w_out.size(); ++i) w_out[i] = rng.uniform(-bound, bound);
    b_out.fill(0.0);
  }

  std::vector<Matrix*> params() { return {&cell.Wx, &cell.Wh, &cell.b, &w_out, &b_out}; }
};

// ---------------------------------------------------------------------------
// Combined deployment model: the eight heads packed in float32 with fused
// input/recurrent weights. Inference runs in f32 end to end (normalization,
// recurrence, readout); offline evaluation and the streaming engine share
// this exact code path, so replay equals batch prediction bit for bit.
// ---------------------------------------------------------------------------
struct StModel {
  std::size_t hidden = 64;
  std::size_t win = kWin;
  std::array<float, kFeatures> in_mean{}, in_std{}, out_mean{}, out_std{};

  struct PackedHead {
    // column-major [(8 + H) columns][4H rows]: the gate pre-activation is an
    // accumulation over columns, which keeps the hot loop vectorizable
    std::vector<float> w_cols;
    std::vector<float> b;      // 4H
    std::vector<float> w_out;  // H
    float b_out = 0.0f;
  };
  std::array<PackedHead, kFeatures> heads;

  static StModel combine(const std::vector<FeatureHead>& trained, const FeatureNorm& norm) {
    require(trained.size() == kFeatures, "st: expected 8 trained heads");
    StModel m;
    m.hidden = trained[0].cell.hidden;
    for (std::size_t f = 0; f < kFeatures; ++f) {
      m.in_mean[f] = static_cast<float>(norm.in_mean[f]);
      m.in_std[f] = static_cast<float>(norm.in_std[f]);
      m.out_mean[f] = static_cast<float>(norm.out_mean[f]);
      m.out_std[f] = static_cast<float>(norm.out_std[f]);
    }
    for (const FeatureHead& h : trained) {
      require(h.cell.hidden == m.hidden, "st: heads disagree on hidden size");
      PackedHead& p = m.heads[h.feature];
      const std::size_t H = m.hidden;
      const std::size_t rows = 4 * H;
      p.w_cols.assign((kFeatures + H) * rows, 0.0f);
      p.b.assign(rows, 0.0f);
      p.w_out.assign(H, 0.0f);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < kFeatures; ++c)
          p.w_cols[c * rows + r] = static_cast<float>(h.cell.Wx(r, c));
        for (std::size_t c = 0; c < H; ++c)
          p.w_cols[(kFeatures + c) * rows + r] = static_cast<float>(h.cell.Wh(r, c));
        p.b[r] = static_cast<float>(h.cell.b[r]);
      }
      for (std::size_t c = 0; c < H; ++c) p.w_out[c] = static_cast<float>(h.w_out[c]);
      p.b_out = static_cast<float>(h.b_out[0]);
    }
    return m;
  }

  // X: win x 8 raw patient features, row-major. Y: win x 8 raw therapist
  // prediction, row-major. Head h fills output column h only.
  void predict(const float* x, float* y) const {
    const std::size_t H = hidden;
    const std::size_t rows = 4 * H;
    thread_local std::vector<float> scratch;
    scratch.assign(win * kFeatures + rows + 3 * H, 0.0f);
    float* xn = scratch.data();          // win x 8 normalized input
    float* gates = xn + win * kFeatures; // 4H
    float* h_state = gates + rows;       // H
    float* c_state = h_state + H;        // H
    float* th = c_state + H;             // H, tanh(c)
    for (std::size_t t = 0; t < win; ++t)
      for (std::size_t f = 0; f < kFeatures; ++f)
        xn[t * kFeatures + f] = (x[t * kFeatures + f] - in_mean[f]) / in_std[f];
    for (std::size_t head = 0; head < kFeatures; ++head) {
      const PackedHead& p = heads[head];
      for (std::size_t u = 0; u < H; ++u) h_state[u] = c_state[u] = 0.0f;
      for (std::size_t t = 0; t < win; ++t) {
        const float* wc = p.w_cols.data();
        // row-blocked accumulation keeps the partial gate sums in registers
        constexpr std::size_t RB = 64;
        for (std::size_t rb = 0; rb < rows; rb += RB) {
          const std::size_t bs = std::min(RB, rows - rb);
          float acc[RB];
          for (std::size_t r = 0; r < bs; ++r) acc[r] = p.b[rb + r];
          for (std::size_t c = 0; c < kFeatures; ++c) {
            const float xv = xn[t * kFeatures + c];
            const float* col = wc + c * rows + rb;
            for (std::size_t r = 0; r < bs; ++r) acc[r] += col[r] * xv;
          }
          for (std::size_t c = 0; c < H; ++c) {
            const float xv = h_state[c];
            const float* col = wc + (kFeatures + c) * rows + rb;
            for (std::size_t r = 0; r < bs; ++r) acc[r] += col[r] * xv;
          }
          for (std::size_t r = 0; r < bs; ++r) gates[rb + r] = acc[r];
        }
        // gate blocks [i | f | g | o]
        float* gi = gates;
        float* gf = gates + H;
        float* gg = gates + 2 * H;
        float* go = gates + 3 * H;
        for (std::size_t u = 0; u < 2 * H; ++u)
          gates[u] = detail::fast_sigmoidf(gates[u]);
        for (std::size_t u = 0; u < H; ++u) gg[u] = detail::fast_tanhf(gg[u]);
        for (std::size_t u = 0; u < H; ++u) go[u] = detail::fast_sigmoidf(go[u]);
        for (std::size_t u = 0; u < H; ++u) c_state[u] = gf[u] * c_state[u] + gi[u] * gg[u];
        for (std::size_t u = 0; u < H; ++u) th[u] = detail::fast_tanhf(c_state[u]);
        float yt = p.b_out;
        for (std::size_t u = 0; u < H; ++u) {
          h_state[u] = go[u] * th[u];
          yt += p.w_out[u] * h_state[u];
        }
        y[t * kFeatures + head] = yt * out_std[head] + out_mean[head];
      }
    }
  }

  // Convenience wrapper over double-precision windows (evaluation path).
  Matrix predict(const Matrix& x_raw) const {
    require(x_raw.rows() == win && x_raw.cols() == kFeatures,
            "st predict: input shape " + x_raw.shape_str() + " != (" +
                std::to_string(win) + ",8)");
    std::vector<float> xf(win * kFeatures), yf(win * kFeatures);
    for (std::size_t i = 0; i < xf.size(); ++i) xf[i] = static_cast<float>(x_raw[i]);
    predict(xf.data(), yf.data());
    Matrix y(win, kFeatures);
    for (std::size_t i = 0; i < yf.size(); ++i) y[i] = static_cast<double>(yf[i]);
    return y;
  }
};

// ---------------------------------------------------------------------------
// Persistence: one DYFW file per head plus a manifest JSON tying the combined
// model together (feature order, normalization, horizon semantics).
// ---------------------------------------------------------------------------
inline void save_head(const std::string& path, const FeatureHead& h) {
  std::vector<dyfw::Record> records;
  records.push_back(dyfw::to_record(h.cell));
  Dense readout(h.cell.hidden, 1);
  for (std::size_t i = 0; i < h.w_out.size(); ++i) readout.W(0, i) = h.w_out[i];
  readout.b[0] = h.b_out[0];
  records.push_back(dyfw::to_record(Layer(readout)));
  dyfw::write_file(path, records);
}

inline FeatureHead load_head(const std::string& path, std::size_t feature_idx) {
  auto records = dyfw::read_file(path);
  require(records.size() == 2, "st head: expected lstm + readout records in " + path);
  FeatureHead h;
  h.feature = feature_idx;
  h.cell = dyfw::to_lstm(records[0]);
  Dense readout = std::get<Dense>(dyfw::to_layer(records[1]));
  require(readout.in == h.cell.hidden && readout.out == 1,
          "st head: readout shape mismatch in " + path);
  h.w_out = Matrix(1, h.cell.hidden);
  for (std::size_t i = 0; i < h.cell.hidden; ++i) h.w_out[i] = readout.W(0, i);
  h.b_out = Matrix(1, 1);
  h.b_out[0] = readout.b[0];
  return h;
}

// basename -> basename.head0.dyfw ... basename.head7.dyfw + basename.json
inline void save_st(const std::string& basename, const std::vector<FeatureHead>& heads,
                    const FeatureNorm& norm, std::size_t horizon_now = kShift) {
  require(heads.size() == kFeatures, "st: expected 8 heads");
  nlohmann::json j;
  j["hidden"] = heads[0].cell.hidden;
  j["win"] = kWin;
  j["step"] = kStep;
  j["shift"] = kShift;
  j["features"] = kFeatureNames;
  j["horizon"] = {{"now_row", horizon_now}, {"max_row", kWin - 1},
                  {"frame_ms", 1000.0 / 333.0}};
  j["norm"] = {{"in_mean", norm.in_mean},
               {"in_std", norm.in_std},
               {"out_mean", norm.out_mean},
               {"out_std", norm.out_std}};
  std::vector<std::string> files;
  for (std::size_t f = 0; f < kFeatures; ++f) {
    const std::string head_path = basename + ".head" + std::to_string(f) + ".dyfw";
    const FeatureHead* head = nullptr;
    for (const auto& h : heads)
      if (h.feature == f) head = &h;
    require(head != nullptr, "st: missing head for feature " + std::to_string(f));
    save_head(head_path, *head);
    files.push_back(head_path);
  }
  j["heads"] = files;
  std::ofstream os(basename + ".json");
  if (!os) throw DataError("st: cannot write manifest " + basename + ".json");
  os << j.dump(2) << "\n";
}

struct LoadedSt {
  std::vector<FeatureHead> heads;
  FeatureNorm norm;
  StModel model;
};

inline LoadedSt load_st(const std::string& basename) {
  std::ifstream is(basename + ".json");
  if (!is)
    throw DataError("st: missing manifest " + basename +
                    ".json (produce it with train-st)");
  nlohmann::json j;
  is >> j;
  LoadedSt out;
  out.norm.in_mean = j.at("norm").at("in_mean").get<std::array<double, kFeatures>>();
  out.norm.in_std = j.at("norm").at("in_std").get<std::array<double, kFeatures>>();
  out.norm.out_mean = j.at("norm").at("out_mean").get<std::array<double, kFeatures>>();
  out.norm.out_std = j.at("norm").at("out_std").get<std::array<double, kFeatures>>();
  const auto files = j.at("heads").get<std::vector<std::string>>();
  require(files.size() == kFeatures, "st: manifest must list 8 heads");
  for (std::size_t f = 0; f < kFeatures; ++f)
    out.heads.push_back(load_head(files[f], f));
  out.model = StModel::combine(out.heads, out.norm);
  return out;
}

}  // namespace dyad::st
