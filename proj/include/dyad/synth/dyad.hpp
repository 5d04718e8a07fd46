#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dyad/io/csv.hpp"
#include "dyad/synth/gait.hpp"

namespace dyad::synth {

// Torsional spring-damper rendered between corresponding joints of the two
// exoskeletons. Stiffness in N*m/rad, damping in N*m*s/rad.
struct CouplingParams {
  std::array<double, 4> K_p{};
  std::array<double, 4> K_t{};
  std::array<double, 4> B_p{};
  std::array<double, 4> B_t{};

  static CouplingParams uniform(double kp, double kt, double bp, double bt) {
    CouplingParams c;
    c.K_p.fill(kp);
    c.K_t.fill(kt);
    c.B_p.fill(bp);
    c.B_t.fill(bt);
    return c;
  }

  void validate() const {
    for (double v : K_p) require(v >= 0.0, "coupling: negative patient stiffness");
    for (double v : K_t) require(v >= 0.0, "coupling: negative therapist stiffness");
    for (double v : B_p) require(v >= 0.0, "coupling: negative patient damping");
    for (double v : B_t) require(v >= 0.0, "coupling: negative therapist damping");
  }
};

inline constexpr double kDeg2Rad = std::numbers::pi / 180.0;

// Desired interaction torque for one side of the virtual element:
// tau = K (q_other - q_self) + B (qd_other - qd_self), angles in degrees in,
// torque in N*m out.
inline std::array<double, 4> interaction_torque(const std::array<double, 4>& K,
                                                const std::array<double, 4>& B,
                                                const std::array<double, 4>& q_self,
                                                const std::array<double, 4>& qd_self,
                                                const std::array<double, 4>& q_other,
                                                const std::array<double, 4>& qd_other) {
  std::array<double, 4> tau{};
  for (std::size_t j = 0; j < kJoints; ++j) {
    require(K[j] >= 0.0, "interaction_torque: negative stiffness");
    tau[j] = K[j] * (q_other[j] - q_self[j]) * kDeg2Rad +
             B[j] * (qd_other[j] - qd_self[j]) * kDeg2Rad;
  }
  return tau;
}

// Two synchronized streams plus the coupling that produced them.
struct DyadRecording {
  int dyad_id = 0;
  double rate_hz = 333.0;
  std::vector<JointFrame> patient;
  std::vector<JointFrame> therapist;
  CouplingParams coupling;
};

struct CoupleOptions {
  // First-order admittance gain: deviation velocity per unit interaction
  // torque, (rad/s)/(N*m). Small values keep each walker close to their
  // nominal gait while the virtual element pulls the pair together.
  double admittance = 0.05;
};

// Simulates the coupled pair: each walker follows its nominal gait plus a
// first-order admittance response to the interaction torque,
// delta_qdot = admittance * tau. Opposite legs are coupled
// (patient left <-> therapist right).
inline DyadRecording couple_dyad(const GaitProfile& patient, const GaitProfile& therapist,
                                 const CouplingParams& params, double duration_s,
                                 double rate_hz, std::uint64_t seed,
                                 const CoupleOptions& opts = {}) {
  patient.validate();
  therapist.validate();
  params.validate();
  require(duration_s > 0.0 && rate_hz > 0.0, "couple_dyad: bad duration/rate");
  require(opts.admittance > 0.0, "couple_dyad: admittance must be > 0");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  const double dt = 1.0 / rate_hz;
  const double rad2deg = 1.0 / kDeg2Rad;

  DyadRecording rec;
  rec.rate_hz = rate_hz;
  rec.coupling = params;
  rec.patient.resize(n);
  rec.therapist.resize(n);

  Rng rng(seed);
  Rng noise_p = rng.fork(2);
  Rng noise_t = rng.fork(3);
  Rng contact_p = rng.fork(4);
  Rng contact_t = rng.fork(5);
  auto contacts_p = detail::contact_series(patient, n, rate_hz, contact_p);
  auto contacts_t = detail::contact_series(therapist, n, rate_hz, contact_t);

  // deviation state (degrees); rates follow the torque directly
  std::array<double, 4> dev_p{}, devd_p{}, dev_t{}, devd_t{};

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    std::array<double, 4> qn_p{}, qdn_p{}, qn_t{}, qdn_t{};
    nominal_state(patient, t, qn_p, qdn_p);
    nominal_state(therapist, t, qn_t, qdn_t);

    std::array<double, 4> q_p{}, qd_p{}, q_t{}, qd_t{};
    for (std::size_t j = 0; j < kJoints; ++j) {
      q_p[j] = qn_p[j] + dev_p[j];
      qd_p[j] = qdn_p[j] + devd_p[j];
      q_t[j] = qn_t[j] + dev_t[j];
      qd_t[j] = qdn_t[j] + devd_t[j];
    }

    // mirrored partner states seen through the virtual element
    std::array<double, 4> q_t_m{}, qd_t_m{}, q_p_m{}, qd_p_m{};
    for (std::size_t j = 0; j < kJoints; ++j) {
      q_t_m[j] = q_t[mirror_joint(j)];
      qd_t_m[j] = qd_t[mirror_joint(j)];
      q_p_m[j] = q_p[mirror_joint(j)];
      qd_p_m[j] = qd_p[mirror_joint(j)];
    }
    const auto tau_p = interaction_torque(params.K_p, params.B_p, q_p, qd_p, q_t_m, qd_t_m);
    const auto tau_t = interaction_torque(params.K_t, params.B_t, q_t, qd_t, q_p_m, qd_p_m);

    for (std::size_t j = 0; j < kJoints; ++j) {
      devd_p[j] = opts.admittance * tau_p[j] * rad2deg;
      dev_p[j] += devd_p[j] * dt;
      devd_t[j] = opts.admittance * tau_t[j] * rad2deg;
      dev_t[j] += devd_t[j] * dt;
    }

    JointFrame& fp = rec.patient[i];
    JointFrame& ft = rec.therapist[i];
    fp.t = ft.t = t;
    for (std::size_t j = 0; j < kJoints; ++j) {
      require(std::fabs(q_p[j]) <= 150.0 && std::fabs(q_t[j]) <= 150.0,
              "couple_dyad: joint angle exceeded the 150 deg sanity bound; lower the "
              "stiffness or the admittance gain");
      fp.q[j] = q_p[j];
      fp.qd[j] = qd_p[j];
      ft.q[j] = q_t[j];
      ft.qd[j] = qd_t[j];
      if (patient.noise_sigma_deg > 0.0) {
        fp.q[j] += noise_p.normal(0.0, patient.noise_sigma_deg);
        fp.qd[j] += noise_p.normal(0.0, 10.0 * patient.noise_sigma_deg);
      }
      if (therapist.noise_sigma_deg > 0.0) {
        ft.q[j] += noise_t.normal(0.0, therapist.noise_sigma_deg);
        ft.qd[j] += noise_t.normal(0.0, 10.0 * therapist.noise_sigma_deg);
      }
    }
    fp.contact_left = contacts_p[i].first;
    fp.contact_right = contacts_p[i].second;
    ft.contact_left = contacts_t[i].first;
    ft.contact_right = contacts_t[i].second;
  }
  return rec;
}

// Alternative dyad construction: the therapist stream is a per-joint linear
// transform of the low-pass filtered patient stream, delayed by `lag` frames,
// plus measurement noise. Gives the sequence models a known learnable target.
struct TransformDyadParams {
  std::size_t lag_frames = 25;
  std::array<double, 4> gain{0.85, 0.9, 0.85, 0.9};
  std::array<double, 4> offset_deg{4.0, -3.0, 4.0, -3.0};
  double lowpass_alpha = 0.35;  // one-pole EMA coefficient
  double noise_sigma_deg = 0.2;
};

inline DyadRecording transform_dyad(const GaitProfile& patient,
                                    const TransformDyadParams& params, double duration_s,
                                    double rate_hz, std::uint64_t seed) {
  require(params.lowpass_alpha > 0.0 && params.lowpass_alpha <= 1.0,
          "transform_dyad: lowpass alpha in (0,1]");
  DyadRecording rec;
  rec.rate_hz = rate_hz;
  rec.patient = generate_gait(patient, duration_s, rate_hz, seed);
  const std::size_t n = rec.patient.size();
  require(n > params.lag_frames, "transform_dyad: recording shorter than lag");

  // filter the *measured* patient stream so the mapping is exactly what a
  // model sees at its input
  std::vector<std::array<double, 4>> fq(n), fqd(n);
  fq[0] = rec.patient[0].q;
  fqd[0] = rec.patient[0].qd;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < kJoints; ++j) {
      fq[i][j] = params.lowpass_alpha * rec.patient[i].q[j] +
                 (1.0 - params.lowpass_alpha) * fq[i - 1][j];
      fqd[i][j] = params.lowpass_alpha * rec.patient[i].qd[j] +
                  (1.0 - params.lowpass_alpha) * fqd[i - 1][j];
    }
  }

  Rng noise = Rng(seed).fork(7);
  rec.therapist.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = i >= params.lag_frames ? i - params.lag_frames : 0;
    JointFrame& f = rec.therapist[i];
    f.t = rec.patient[i].t;
    for (std::size_t j = 0; j < kJoints; ++j) {
      f.q[j] = params.gain[j] * fq[src][j] + params.offset_deg[j] +
               noise.normal(0.0, params.noise_sigma_deg);
      f.qd[j] = params.gain[j] * fqd[src][j] +
                noise.normal(0.0, 10.0 * params.noise_sigma_deg);
    }
    f.contact_left = rec.patient[src].contact_left;
    f.contact_right = rec.patient[src].contact_right;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Recording persistence: one CSV per dyad session,
// header t,role,q1..q4,qd1..qd4,contactL,contactR.
// ---------------------------------------------------------------------------

inline void write_recording_csv(const std::string& path, const DyadRecording& rec) {
  io::CsvWriter w(path);
  w.header({"t", "role", "q1", "q2", "q3", "q4", "qd1", "qd2", "qd3", "qd4", "contactL",
            "contactR"});
  require(rec.patient.size() == rec.therapist.size(),
          "recording: stream lengths differ");
  auto emit = [&](const JointFrame& f, const char* role) {
    std::vector<double> tail;
    tail.reserve(8);
    for (double v : f.q) tail.push_back(v);
    for (double v : f.qd) tail.push_back(v);
    w.row_strings({io::num(f.t), role, io::num(tail[0]), io::num(tail[1]), io::num(tail[2]),
                   io::num(tail[3]), io::num(tail[4]), io::num(tail[5]), io::num(tail[6]),
                   io::num(tail[7]), f.contact_left ? "1" : "0",
                   f.contact_right ? "1" : "0"});
  };
  for (std::size_t i = 0; i < rec.patient.size(); ++i) {
    emit(rec.patient[i], "patient");
    emit(rec.therapist[i], "therapist");
  }
}

inline DyadRecording read_recording_csv(const std::string& path) {
  io::CsvTable t = io::read_csv(path);
  DyadRecording rec;
  const std::size_t ct = t.col("t");
  const std::size_t crole = t.col("role");
  const std::size_t cq = t.col("q1");
  const std::size_t cqd = t.col("qd1");
  const std::size_t ccl = t.col("contactL");
  const std::size_t ccr = t.col("contactR");
  for (const auto& row : t.rows) {
    JointFrame f;
    f.t = io::to_double(row[ct]);
    for (std::size_t j = 0; j < 4; ++j) {
      f.q[j] = io::to_double(row[cq + j]);
      f.qd[j] = io::to_double(row[cqd + j]);
    }
    f.contact_left = row[ccl] == "1";
    f.contact_right = row[ccr] == "1";
    if (row[crole] == "patient")
      rec.patient.push_back(f);
    else if (row[crole] == "therapist")
      rec.therapist.push_back(f);
    else
      throw DataError("recording: unknown role '" + row[crole] + "' in " + path);
  }
  require(!rec.patient.empty(), "recording: no patient rows in " + path);
  require(rec.patient.size() == rec.therapist.size(),
          "recording: unpaired rows in " + path);
  if (rec.patient.size() >= 2) rec.rate_hz = 1.0 / (rec.patient[1].t - rec.patient[0].t);
  return rec;
}

// The mirrored leg pairing emitted with every recording's metadata.
inline std::vector<std::pair<std::string, std::string>> pairing_metadata() {
  return {{"patient_left_hip", "therapist_right_hip"},
          {"patient_left_knee", "therapist_right_knee"},
          {"patient_right_hip", "therapist_left_hip"},
          {"patient_right_knee", "therapist_left_knee"}};
}

}  // namespace dyad::synth
