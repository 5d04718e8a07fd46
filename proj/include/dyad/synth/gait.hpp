#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dyad/core/common.hpp"
#include "dyad/core/rng.hpp"

namespace dyad::synth {

// Joint order used everywhere: [left hip, left knee, right hip, right knee].
inline constexpr std::size_t kJoints = 4;
inline constexpr std::size_t JOINT_L_HIP = 0;
inline constexpr std::size_t JOINT_L_KNEE = 1;
inline constexpr std::size_t JOINT_R_HIP = 2;
inline constexpr std::size_t JOINT_R_KNEE = 3;

// Opposite-leg partner of a joint (left hip <-> right hip, ...).
inline std::size_t mirror_joint(std::size_t j) { return (j + 2) % 4; }

struct JointFrame {
  double t = 0.0;                     // seconds
  std::array<double, 4> q{};          // degrees
  std::array<double, 4> qd{};         // degrees/second
  bool contact_left = false;
  bool contact_right = false;
};

struct Harmonic {
  double amp = 0.0;    // degrees
  double phase = 0.0;  // radians
};

inline constexpr std::size_t kMaxHarmonics = 6;

// Parametric walker. Left and right legs share per-joint harmonic templates;
// asymmetry scales one side, impairment attenuates single joints.
struct GaitProfile {
  double cadence = 1.0;  // strides per second per leg
  double hip_mean = 8.0;
  double knee_mean = 25.0;
  std::vector<Harmonic> hip;   // <= kMaxHarmonics
  std::vector<Harmonic> knee;  // <= kMaxHarmonics
  std::array<double, 2> side_scale{1.0, 1.0};   // [left, right] amplitude factor
  std::array<double, 4> impairment{};           // per joint, in [0,1]
  double noise_sigma_deg = 0.0;

  // Gait events are derived from the leg phase: left leg phase starts at
  // kPhase0 so the first heel-strike falls inside the recording.
  static constexpr double kPhase0 = 0.75;
  static constexpr double kStanceFraction = 0.6;

  void validate() const {
    require(cadence > 0.0, "gait profile: cadence must be > 0");
    require(hip.size() <= kMaxHarmonics && knee.size() <= kMaxHarmonics,
            "gait profile: at most 6 harmonics per joint");
    for (const auto& h : hip) require(std::isfinite(h.amp) && std::isfinite(h.phase),
                                      "gait profile: non-finite hip harmonic");
    for (const auto& h : knee) require(std::isfinite(h.amp) && std::isfinite(h.phase),
                                       "gait profile: non-finite knee harmonic");
    for (double v : impairment)
      require(v >= 0.0 && v <= 1.0, "gait profile: impairment must lie in [0,1]");
    require(noise_sigma_deg >= 0.0, "gait profile: noise sigma must be >= 0");
  }

  // A plausible walking pattern; amplitudes in degrees.
  static GaitProfile typical() {
    GaitProfile p;
    p.hip = {{22.0, 0.0}, {4.0, 0.9}, {1.5, 2.1}};
    p.knee = {{28.0, -1.2}, {12.0, 0.5}, {3.0, 1.7}};
    return p;
  }
};

// Phase of one leg at time t, in cycles (not wrapped).
inline double leg_phase(const GaitProfile& p, double t, int side) {
  return p.cadence * t + GaitProfile::kPhase0 + (side == 1 ? 0.5 : 0.0);
}

// Harmonic series evaluation at a given phase (cycles). Derivative is with
// respect to time given the profile cadence.
inline void eval_harmonics(const std::vector<Harmonic>& hs, double mean, double scale,
                           double phase, double cadence, double& q, double& qd) {
  q = mean;
  qd = 0.0;
  const double w = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const double omega = w * static_cast<double>(k + 1);
    const double arg = omega * phase + hs[k].phase;
    q += scale * hs[k].amp * std::sin(arg);
    qd += scale * hs[k].amp * omega * cadence * std::cos(arg);
  }
}

// Nominal (noise-free) joint state at time t.
inline void nominal_state(const GaitProfile& p, double t, std::array<double, 4>& q,
                          std::array<double, 4>& qd) {
  for (int side = 0; side < 2; ++side) {
    const double phase = leg_phase(p, t, side);
    const double ss = p.side_scale[static_cast<std::size_t>(side)];
    const std::size_t hip_j = side == 0 ? JOINT_L_HIP : JOINT_R_HIP;
    const std::size_t knee_j = side == 0 ? JOINT_L_KNEE : JOINT_R_KNEE;
    eval_harmonics(p.hip, p.hip_mean, ss * (1.0 - p.impairment[hip_j]), phase, p.cadence,
                   q[hip_j], qd[hip_j]);
    eval_harmonics(p.knee, p.knee_mean, ss * (1.0 - p.impairment[knee_j]), phase,
                   p.cadence, q[knee_j], qd[knee_j]);
  }
}

namespace detail {

inline double frac(double x) { return x - std::floor(x); }

// Clean stance flags, then each contact edge jittered by at most one frame.
inline std::vector<std::pair<bool, bool>> contact_series(const GaitProfile& p,
                                                         std::size_t n, double rate,
                                                         Rng& rng) {
  std::vector<std::pair<bool, bool>> contacts(n);
  for (int side = 0; side < 2; ++side) {
    std::vector<bool> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = leg_phase(p, static_cast<double>(i) / rate, side);
      c[i] = frac(phase) < GaitProfile::kStanceFraction;
    }
    if (p.noise_sigma_deg > 0.0) {
      // move each edge index by -1/0/+1 frames
      std::vector<bool> jittered = c;
      for (std::size_t i = 1; i < n; ++i) {
        if (c[i] == c[i - 1]) continue;
        const int shift = static_cast<int>(rng.index(3)) - 1;
        const std::ptrdiff_t from = static_cast<std::ptrdiff_t>(i);
        const std::ptrdiff_t to = from + shift;
        if (to < 1 || to >= static_cast<std::ptrdiff_t>(n)) continue;
        if (shift == -1) jittered[static_cast<std::size_t>(to)] = c[i];
        if (shift == 1) jittered[static_cast<std::size_t>(from)] = c[i - 1];
      }
      c = jittered;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (side == 0)
        contacts[i].first = c[i];
      else
        contacts[i].second = c[i];
    }
  }
  return contacts;
}

}  // namespace detail

// Synthesizes one walker. Deterministic per seed; heel-strikes at stride
// boundaries of each leg.
inline std::vector<JointFrame> generate_gait(const GaitProfile& profile, double duration_s,
                                             double rate_hz, std::uint64_t seed) {
  profile.validate();
  require(duration_s > 0.0, "generate_gait: duration must be > 0");
  require(rate_hz > 0.0, "generate_gait: rate must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  Rng rng(seed);
  Rng contact_rng = rng.fork(1);
  auto contacts = detail::contact_series(profile, n, rate_hz, contact_rng);
  std::vector<JointFrame> frames(n);
  for (std::size_t i = 0; i < n; ++i) {
    JointFrame& f = frames[i];
    f.t = static_cast<double>(i) / rate_hz;
    nominal_state(profile, f.t, f.q, f.qd);
    if (profile.noise_sigma_deg > 0.0) {
      for (std::size_t j = 0; j < kJoints; ++j) {
        f.q[j] += rng.normal(0.0, profile.noise_sigma_deg);
        f.qd[j] += rng.normal(0.0, 10.0 * profile.noise_sigma_deg);
      }
    }
    for (std::size_t j = 0; j < kJoints; ++j)
      require(std::fabs(f.q[j]) <= 150.0, "generate_gait: joint angle out of sane range");
    f.contact_left = contacts[i].first;
    f.contact_right = contacts[i].second;
  }
  return frames;
}

}  // namespace dyad::synth
