#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dyad/core/rng.hpp"
#include "dyad/pipeline/stride.hpp"
#include "dyad/synth/gait.hpp"

namespace dyad::pipeline {

// ---------------------------------------------------------------------------
// Heel-strike detection: rising edges of the foot contact signal, optionally
// debounced by a refractory window (frames).
// ---------------------------------------------------------------------------
inline std::vector<std::size_t> detect_heel_strikes(const std::vector<bool>& contact,
                                                    std::size_t refractory = 0) {
  std::vector<std::size_t> strikes;
  for (std::size_t i = 1; i < contact.size(); ++i) {
    if (!contact[i - 1] && contact[i]) {
      if (!strikes.empty() && i - strikes.back() <= refractory) continue;
      strikes.push_back(i);
    }
  }
  if (strikes.size() < 2)
    throw DataError("insufficient strides: found " + std::to_string(strikes.size()) +
                    " heel-strikes, need at least 2");
  return strikes;
}

inline std::vector<bool> contact_signal(const std::vector<synth::JointFrame>& frames,
                                        Side side) {
  std::vector<bool> c(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    c[i] = side == Side::left ? frames[i].contact_left : frames[i].contact_right;
  return c;
}

// ---------------------------------------------------------------------------
// Segmentation + resampling to 100 samples per joint.
// ---------------------------------------------------------------------------
struct SegmentLimits {
  double min_stride_s = 0.3;
  double max_stride_s = 3.0;
};

struct StrideMeta {
  Owner owner = Owner::patient;
  int dyad_id = 0;
  std::array<double, 2> K_p{};  // [hip, knee] for the segmented side
  std::array<double, 2> K_t{};
};

struct SegmentResult {
  std::vector<Stride> strides;
  int discarded = 0;  // strides outside the duration limits
};

// Linear interpolation of a per-frame joint value at fractional frame x.
inline double lerp_frames(const std::vector<synth::JointFrame>& frames, std::size_t joint,
                          double x) {
  const auto i0 = static_cast<std::size_t>(x);
  const double f = x - static_cast<double>(i0);
  if (i0 + 1 >= frames.size()) return frames.back().q[joint];
  return frames[i0].q[joint] * (1.0 - f) + frames[i0 + 1].q[joint] * f;
}

// Cuts strides on [strike_k, strike_{k+1}] (both endpoints on heel-strikes)
// and resamples each to 100 samples. `side` selects which leg's hip/knee is
// extracted; for therapist streams pass the patient's strikes and the
// mirrored side.
inline SegmentResult segment_and_resample(const std::vector<synth::JointFrame>& frames,
                                          const std::vector<std::size_t>& strikes,
                                          Side side, double rate_hz, const StrideMeta& meta,
                                          const SegmentLimits& limits = {}) {
  require(strikes.size() >= 2, "segment: need at least 2 heel-strikes");
  const std::size_t hip_j = side == Side::left ? synth::JOINT_L_HIP : synth::JOINT_R_HIP;
  const std::size_t knee_j = side == Side::left ? synth::JOINT_L_KNEE : synth::JOINT_R_KNEE;
  SegmentResult out;
  for (std::size_t k = 0; k + 1 < strikes.size(); ++k) {
    const std::size_t a = strikes[k];
    const std::size_t b = strikes[k + 1];
    require(b < frames.size(), "segment: strike index out of range");
    const double span_s = static_cast<double>(b - a) / rate_hz;
    if (span_s < limits.min_stride_s || span_s > limits.max_stride_s) {
      ++out.discarded;
      continue;
    }
    Stride s;
    s.owner = meta.owner;
    s.side = side;
    s.dyad_id = meta.dyad_id;
    s.stride_index = static_cast<int>(k);
    s.K_p = meta.K_p;
    s.K_t = meta.K_t;
    const double step = static_cast<double>(b - a) / (kStrideSamples - 1.0);
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      const double x = static_cast<double>(a) + step * static_cast<double>(i);
      s.hip[i] = lerp_frames(frames, hip_j, x);
      s.knee[i] = lerp_frames(frames, knee_j, x);
    }
    out.strides.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outlier removal: per-stride RMS deviation from the mean stride (hip and
// knee pooled); strides above the 90th percentile are dropped.
// ---------------------------------------------------------------------------
struct OutlierResult {
  std::vector<Stride> kept;
  std::vector<Stride> removed;
};

// R-7 linear-interpolated percentile of a sorted copy.
inline double percentile(std::vector<double> v, double p) {
  require(!v.empty(), "percentile: empty input");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline OutlierResult remove_outliers(const std::vector<Stride>& strides,
                                     double keep_percentile = 0.9) {
  require(strides.size() >= 10, "remove_outliers: need at least 10 strides, got " +
                                    std::to_string(strides.size()));
  std::array<double, kStrideSamples> mean_hip{}, mean_knee{};
  for (const Stride& s : strides)
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      mean_hip[i] += s.hip[i];
      mean_knee[i] += s.knee[i];
    }
  const double inv_n = 1.0 / static_cast<double>(strides.size());
  for (std::size_t i = 0; i < kStrideSamples; ++i) {
    mean_hip[i] *= inv_n;
    mean_knee[i] *= inv_n;
  }
  std::vector<double> dist(strides.size());
  for (std::size_t k = 0; k < strides.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      const double dh = strides[k].hip[i] - mean_hip[i];
      const double dk = strides[k].knee[i] - mean_knee[i];
      acc += dh * dh + dk * dk;
    }
    dist[k] = std::sqrt(acc / (2.0 * kStrideSamples));
  }
  const double cut = percentile(dist, keep_percentile);
  OutlierResult out;
  for (std::size_t k = 0; k < strides.size(); ++k) {
    if (dist[k] <= cut)
      out.kept.push_back(strides[k]);
    else
      out.removed.push_back(strides[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization.
// ---------------------------------------------------------------------------
inline NormStats fit_stats(const std::vector<Stride>& train) {
  require(!train.empty(), "fit_stats: empty training set");
  NormStats st;
  const double n = static_cast<double>(train.size());
  for (const Stride& s : train)
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      st.hip_mean[i] += s.hip[i];
      st.knee_mean[i] += s.knee[i];
    }
  for (std::size_t i = 0; i < kStrideSamples; ++i) {
    st.hip_mean[i] /= n;
    st.knee_mean[i] /= n;
  }
  for (const Stride& s : train)
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      const double dh = s.hip[i] - st.hip_mean[i];
      const double dk = s.knee[i] - st.knee_mean[i];
      st.hip_std[i] += dh * dh;
      st.knee_std[i] += dk * dk;
    }
  for (std::size_t i = 0; i < kStrideSamples; ++i) {
    st.hip_std[i] = std::sqrt(st.hip_std[i] / n);
    st.knee_std[i] = std::sqrt(st.knee_std[i] / n);
    if (st.hip_std[i] < NormStats::kSigmaFloor) {
      st.hip_std[i] = NormStats::kSigmaFloor;
      ++st.floor_hits;
    }
    if (st.knee_std[i] < NormStats::kSigmaFloor) {
      st.knee_std[i] = NormStats::kSigmaFloor;
      ++st.floor_hits;
    }
  }
  return st;
}

inline void normalize_curve(std::array<double, kStrideSamples>& c,
                            const std::array<double, kStrideSamples>& mean,
                            const std::array<double, kStrideSamples>& stdev) {
  for (std::size_t i = 0; i < kStrideSamples; ++i) c[i] = (c[i] - mean[i]) / stdev[i];
}

inline void denormalize_curve(std::array<double, kStrideSamples>& c,
                              const std::array<double, kStrideSamples>& mean,
                              const std::array<double, kStrideSamples>& stdev) {
  for (std::size_t i = 0; i < kStrideSamples; ++i) c[i] = c[i] * stdev[i] + mean[i];
}

inline Stride normalize(const Stride& s, const NormStats& st) {
  Stride out = s;
  normalize_curve(out.hip, st.hip_mean, st.hip_std);
  normalize_curve(out.knee, st.knee_mean, st.knee_std);
  return out;
}

inline Stride denormalize(const Stride& s, const NormStats& st) {
  Stride out = s;
  denormalize_curve(out.hip, st.hip_mean, st.hip_std);
  denormalize_curve(out.knee, st.knee_mean, st.knee_std);
  return out;
}

// ---------------------------------------------------------------------------
// Splits. Both return per-item partition labels 0..k-1; partitions are
// disjoint, exhaustive and never empty.
// ---------------------------------------------------------------------------
namespace detail {

inline std::vector<std::size_t> boundaries(std::size_t n, const std::vector<double>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    require(r > 0.0, "split: ratios must be positive");
    sum += r;
  }
  require(std::fabs(sum - 1.0) < 1e-9, "split: ratios must sum to 1");
  std::vector<std::size_t> b(ratios.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    acc += ratios[k];
    b[k] = static_cast<std::size_t>(std::llround(acc * static_cast<double>(n)));
  }
  b.back() = n;
  std::size_t prev = 0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    require(b[k] > prev, "split: partition " + std::to_string(k) + " is empty");
    prev = b[k];
  }
  return b;
}

}  // namespace detail

// Random split: shuffle then cut (the stride-level split).
inline std::vector<int> split_random(std::size_t n, const std::vector<double>& ratios,
                                     std::uint64_t seed) {
  auto b = detail::boundaries(n, ratios);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> label(n);
  std::size_t k = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    while (pos >= b[k]) ++k;
    label[order[pos]] = static_cast<int>(k);
  }
  return label;
}

// Contiguous-in-time split (the sliding-window split; no window leakage).
inline std::vector<int> split_contiguous(std::size_t n, const std::vector<double>& ratios) {
  auto b = detail::boundaries(n, ratios);
  std::vector<int> label(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (i >= b[k]) ++k;
    label[i] = static_cast<int>(k);
  }
  return label;
}

}  // namespace dyad::pipeline
