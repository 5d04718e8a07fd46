#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dyad/core/matrix.hpp"
#include "dyad/pipeline/pipeline.hpp"
#include "dyad/synth/dyad.hpp"

namespace dyad::st {

inline constexpr std::size_t kWin = 50;    // timesteps per window (~150 ms @ 333 Hz)
inline constexpr std::size_t kStep = 10;   // window stride (~30 ms)
inline constexpr std::size_t kShift = 25;  // target half-window shift
inline constexpr std::size_t kFeatures = 8;

inline const std::array<const char*, kFeatures> kFeatureNames{
    "q1", "q2", "q3", "q4", "qd1", "qd2", "qd3", "qd4"};

// Feature matrix (N x 8) of one stream: joint angles then velocities.
inline Matrix features_from_frames(const std::vector<synth::JointFrame>& frames) {
  Matrix m(frames.size(), kFeatures);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      m(i, j) = frames[i].q[j];
      m(i, 4 + j) = frames[i].qd[j];
    }
  }
  return m;
}

// X holds patient kinematics over [t-T, t]; Y holds therapist kinematics over
// [t-T/2, t+T/2], i.e. shifted forward by `shift` frames.
struct WindowSample {
  Matrix X;  // win x 8, raw units (deg, deg/s)
  Matrix Y;  // win x 8, raw units
  int dyad_id = 0;
  std::size_t t_start = 0;  // frame index of X row 0
};

struct WindowConfig {
  std::size_t win = kWin;
  std::size_t step = kStep;
  std::size_t shift = kShift;
};

// count = floor((N - win - shift) / step) + 1; empty (with no error) when the
// series is too short.
inline std::vector<WindowSample> build_windows(const Matrix& patient,
                                               const Matrix& therapist, int dyad_id,
                                               const WindowConfig& cfg = {}) {
  require(patient.rows() == therapist.rows(),
          "build_windows: stream lengths differ " + std::to_string(patient.rows()) +
              " vs " + std::to_string(therapist.rows()));
  require(patient.cols() == kFeatures && therapist.cols() == kFeatures,
          "build_windows: streams must have 8 feature columns");
  std::vector<WindowSample> out;
  const std::size_t n = patient.rows();
  if (n < cfg.win + cfg.shift) return out;  // too short; caller may warn
  const std::size_t count = (n - cfg.win - cfg.shift) / cfg.step + 1;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    WindowSample s;
    s.dyad_id = dyad_id;
    s.t_start = w * cfg.step;
    s.X = Matrix(cfg.win, kFeatures);
    s.Y = Matrix(cfg.win, kFeatures);
    for (std::size_t t = 0; t < cfg.win; ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) {
        s.X(t, f) = patient(s.t_start + t, f);
        s.Y(t, f) = therapist(s.t_start + cfg.shift + t, f);
      }
    out.push_back(std::move(s));
  }
  return out;
}

// Contiguous-in-time split of one dyad's windows by full frame support
// [t_start, t_start + win + shift - 1]; windows crossing a partition boundary
// are dropped, so no frame leaks between partitions.
inline std::vector<int> split_windows_by_time(const std::vector<WindowSample>& windows,
                                              std::size_t n_frames,
                                              const std::vector<double>& ratios,
                                              const WindowConfig& cfg = {}) {
  auto frame_label = pipeline::split_contiguous(n_frames, ratios);
  std::vector<int> labels(windows.size(), -1);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t lo = windows[i].t_start;
    const std::size_t hi = lo + cfg.win + cfg.shift - 1;
    if (frame_label[lo] == frame_label[hi]) labels[i] = frame_label[lo];
  }
  return labels;
}

// Per-feature z-scoring statistics over a window set.
struct FeatureNorm {
  std::array<double, kFeatures> in_mean{}, in_std{};
  std::array<double, kFeatures> out_mean{}, out_std{};
};

inline FeatureNorm fit_feature_norm(const std::vector<WindowSample>& train) {
  require(!train.empty(), "fit_feature_norm: no training windows");
  FeatureNorm fn;
  double count = 0.0;
  for (const auto& w : train) {
    for (std::size_t t = 0; t < w.X.rows(); ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) {
        fn.in_mean[f] += w.X(t, f);
        fn.out_mean[f] += w.Y(t, f);
      }
    count += static_cast<double>(w.X.rows());
  }
  for (std::size_t f = 0; f < kFeatures; ++f) {
    fn.in_mean[f] /= count;
    fn.out_mean[f] /= count;
  }
  for (const auto& w : train)
    for (std::size_t t = 0; t < w.X.rows(); ++t)
      for (std::size_t f = 0; f < kFeatures; ++f) {
        const double dx = w.X(t, f) - fn.in_mean[f];
        const double dy = w.Y(t, f) - fn.out_mean[f];
        fn.in_std[f] += dx * dx;
        fn.out_std[f] += dy * dy;
      }
  for (std::size_t f = 0; f < kFeatures; ++f) {
    fn.in_std[f] = std::max(std::sqrt(fn.in_std[f] / count), 1e-6);
    fn.out_std[f] = std::max(std::sqrt(fn.out_std[f] / count), 1e-6);
  }
  return fn;
}

}  // namespace dyad::st
