#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "dyad/core/common.hpp"

namespace dyad::pipeline {

inline constexpr std::size_t kStrideSamples = 100;

enum class Owner : std::uint8_t { patient = 0, therapist = 1 };
enum class Side : std::uint8_t { left = 0, right = 1 };
enum class Joint : std::uint8_t { hip = 0, knee = 1 };

inline const char* joint_name(Joint j) { return j == Joint::hip ? "hip" : "knee"; }

inline Joint joint_from(const std::string& s) {
  if (s == "hip") return Joint::hip;
  if (s == "knee") return Joint::knee;
  throw DataError("unknown joint '" + s + "'");
}

inline const char* owner_name(Owner o) { return o == Owner::patient ? "patient" : "therapist"; }
inline const char* side_name(Side s) { return s == Side::left ? "left" : "right"; }

inline Owner owner_from(const std::string& s) {
  if (s == "patient") return Owner::patient;
  if (s == "therapist") return Owner::therapist;
  throw DataError("unknown owner '" + s + "'");
}

inline Side side_from(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw DataError("unknown side '" + s + "'");
}

inline Side mirror_side(Side s) { return s == Side::left ? Side::right : Side::left; }

// One gait cycle of one leg, heel-strike to heel-strike, resampled to 100
// samples per joint. Sample 0 and sample 99 sit on heel-strikes.
struct Stride {
  std::array<double, kStrideSamples> hip{};
  std::array<double, kStrideSamples> knee{};
  Owner owner = Owner::patient;
  Side side = Side::left;
  int dyad_id = 0;
  int stride_index = 0;
  // virtual-element stiffness for this stride's joints, [hip, knee]
  std::array<double, 2> K_p{};
  std::array<double, 2> K_t{};

  const std::array<double, kStrideSamples>& joint(std::size_t j) const {
    return j == 0 ? hip : knee;
  }
  std::array<double, kStrideSamples>& joint(std::size_t j) { return j == 0 ? hip : knee; }
};

// Mirrored-leg correspondence cut on the same patient heel-strikes.
struct StridePair {
  Stride patient;
  Stride therapist;
};

// Per-sample-index z-scoring statistics, fit on the training set only.
struct NormStats {
  std::array<double, kStrideSamples> hip_mean{}, hip_std{};
  std::array<double, kStrideSamples> knee_mean{}, knee_std{};
  int floor_hits = 0;  // indices where the sigma floor kicked in

  static constexpr double kSigmaFloor = 1e-6;

  const std::array<double, kStrideSamples>& mean(std::size_t j) const {
    return j == 0 ? hip_mean : knee_mean;
  }
  const std::array<double, kStrideSamples>& stdev(std::size_t j) const {
    return j == 0 ? hip_std : knee_std;
  }
};

}  // namespace dyad::pipeline
