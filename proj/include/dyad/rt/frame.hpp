#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dyad/core/common.hpp"
#include "dyad/io/csv.hpp"
#include "dyad/st/windows.hpp"
#include "dyad/synth/dyad.hpp"

namespace dyad::rt {

// Fixed 48-byte wire message: sequence u64 | timestamp us u64 | 8 x f32,
// all little-endian. One message per 333 Hz tick.
struct FrameMessage {
  std::uint64_t seq = 0;
  std::uint64_t t_us = 0;
  std::array<float, st::kFeatures> v{};
};

inline constexpr std::size_t kFrameBytes = 48;

inline void encode_frame(const FrameMessage& f, unsigned char* out) {
  std::memcpy(out, &f.seq, 8);
  std::memcpy(out + 8, &f.t_us, 8);
  std::memcpy(out + 16, f.v.data(), 32);
}

inline FrameMessage decode_frame(const unsigned char* in) {
  FrameMessage f;
  std::memcpy(&f.seq, in, 8);
  std::memcpy(&f.t_us, in + 8, 8);
  std::memcpy(f.v.data(), in + 16, 32);
  return f;
}

inline void write_frames(const std::string& path, const std::vector<FrameMessage>& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("frames: cannot open for write: " + path);
  unsigned char buf[kFrameBytes];
  for (const auto& f : frames) {
    encode_frame(f, buf);
    os.write(reinterpret_cast<const char*>(buf), kFrameBytes);
  }
}

inline std::vector<FrameMessage> read_frames(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("frames: cannot open: " + path);
  std::vector<FrameMessage> out;
  unsigned char buf[kFrameBytes];
  while (is.read(reinterpret_cast<char*>(buf), kFrameBytes)) out.push_back(decode_frame(buf));
  if (is.gcount() != 0 && is.gcount() != static_cast<std::streamsize>(kFrameBytes))
    throw DataError("frames: truncated file " + path);
  return out;
}

// CSV text mode (debugging): seq,t_us,v0..v7.
inline void write_frames_csv(const std::string& path,
                             const std::vector<FrameMessage>& frames) {
  io::CsvWriter w(path);
  w.header({"seq", "t_us", "v0", "v1", "v2", "v3", "v4", "v5", "v6", "v7"});
  for (const auto& f : frames) {
    std::vector<double> tail;
    for (float x : f.v) tail.push_back(static_cast<double>(x));
    w.row({std::to_string(f.seq), std::to_string(f.t_us)}, tail);
  }
}

inline std::vector<FrameMessage> read_frames_csv(const std::string& path) {
  io::CsvTable t = io::read_csv(path);
  const std::size_t cs = t.col("seq");
  const std::size_t cv = t.col("v0");
  std::vector<FrameMessage> out;
  for (const auto& r : t.rows) {
    FrameMessage f;
    f.seq = static_cast<std::uint64_t>(io::to_double(r[cs]));
    f.t_us = static_cast<std::uint64_t>(io::to_double(r[cs + 1]));
    for (std::size_t i = 0; i < st::kFeatures; ++i)
      f.v[i] = static_cast<float>(io::to_double(r[cv + i]));
    out.push_back(f);
  }
  return out;
}

// The patient stream of a recording as wire frames (sequence starts at 1).
inline std::vector<FrameMessage> frames_from_recording(const synth::DyadRecording& rec) {
  std::vector<FrameMessage> out;
  out.reserve(rec.patient.size());
  for (std::size_t i = 0; i < rec.patient.size(); ++i) {
    FrameMessage f;
    f.seq = i + 1;
    f.t_us = static_cast<std::uint64_t>(rec.patient[i].t * 1e6);
    for (std::size_t j = 0; j < 4; ++j) {
      f.v[j] = static_cast<float>(rec.patient[i].q[j]);
      f.v[4 + j] = static_cast<float>(rec.patient[i].qd[j]);
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace dyad::rt
