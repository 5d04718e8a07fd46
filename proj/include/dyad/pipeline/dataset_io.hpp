#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/io/csv.hpp"
#include "dyad/pipeline/stride.hpp"

namespace dyad::pipeline {

// strides.csv: one row per stride, metadata first, then 100 hip + 100 knee
// values in degrees (pre-normalization).
struct StrideRow {
  Stride stride;
  std::string split;  // "train" / "val" / ...
};

inline void write_strides_csv(const std::string& path, const std::vector<StrideRow>& rows) {
  io::CsvWriter w(path);
  std::vector<std::string> header = {"dyad_id", "owner",  "side",   "stride_index",
                                     "split",   "Kp_hip", "Kp_knee", "Kt_hip",
                                     "Kt_knee"};
  for (std::size_t i = 0; i < kStrideSamples; ++i) header.push_back("h" + std::to_string(i));
  for (std::size_t i = 0; i < kStrideSamples; ++i) header.push_back("k" + std::to_string(i));
  w.header(header);
  for (const StrideRow& r : rows) {
    const Stride& s = r.stride;
    std::vector<double> tail;
    tail.reserve(4 + 2 * kStrideSamples);
    tail.push_back(s.K_p[0]);
    tail.push_back(s.K_p[1]);
    tail.push_back(s.K_t[0]);
    tail.push_back(s.K_t[1]);
    for (double v : s.hip) tail.push_back(v);
    for (double v : s.knee) tail.push_back(v);
    w.row({std::to_string(s.dyad_id), owner_name(s.owner), side_name(s.side),
           std::to_string(s.stride_index), r.split},
          tail);
  }
}

inline std::vector<StrideRow> read_strides_csv(const std::string& path) {
  io::CsvTable t = io::read_csv(path);
  const std::size_t c0 = t.col("dyad_id");
  const std::size_t ch = t.col("h0");
  const std::size_t ck = t.col("k0");
  const std::size_t ckp = t.col("Kp_hip");
  std::vector<StrideRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    StrideRow row;
    Stride& s = row.stride;
    s.dyad_id = static_cast<int>(io::to_double(r[c0]));
    s.owner = owner_from(r[c0 + 1]);
    s.side = side_from(r[c0 + 2]);
    s.stride_index = static_cast<int>(io::to_double(r[c0 + 3]));
    row.split = r[c0 + 4];
    s.K_p = {io::to_double(r[ckp]), io::to_double(r[ckp + 1])};
    s.K_t = {io::to_double(r[ckp + 2]), io::to_double(r[ckp + 3])};
    for (std::size_t i = 0; i < kStrideSamples; ++i) {
      s.hip[i] = io::to_double(r[ch + i]);
      s.knee[i] = io::to_double(r[ck + i]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// pairs.csv: row indices into strides.csv for each surviving mirrored pair.
struct PairRow {
  int dyad_id = 0;
  std::size_t patient_row = 0;
  std::size_t therapist_row = 0;
};

inline void write_pairs_csv(const std::string& path, const std::vector<PairRow>& pairs) {
  io::CsvWriter w(path);
  w.header({"dyad_id", "patient_row", "therapist_row"});
  for (const PairRow& p : pairs)
    w.row_strings({std::to_string(p.dyad_id), std::to_string(p.patient_row),
                   std::to_string(p.therapist_row)});
}

inline std::vector<PairRow> read_pairs_csv(const std::string& path) {
  io::CsvTable t = io::read_csv(path);
  const std::size_t cd = t.col("dyad_id");
  const std::size_t cp = t.col("patient_row");
  const std::size_t ct = t.col("therapist_row");
  std::vector<PairRow> pairs;
  for (const auto& r : t.rows) {
    PairRow p;
    p.dyad_id = static_cast<int>(io::to_double(r[cd]));
    p.patient_row = static_cast<std::size_t>(io::to_double(r[cp]));
    p.therapist_row = static_cast<std::size_t>(io::to_double(r[ct]));
    pairs.push_back(p);
  }
  return pairs;
}

inline nlohmann::json stats_to_json(const NormStats& st) {
  nlohmann::json j;
  j["hip"]["mean"] = st.hip_mean;
  j["hip"]["std"] = st.hip_std;
  j["knee"]["mean"] = st.knee_mean;
  j["knee"]["std"] = st.knee_std;
  j["floor_hits"] = st.floor_hits;
  return j;
}

inline NormStats stats_from_json(const nlohmann::json& j) {
  NormStats st;
  for (std::size_t i = 0; i < kStrideSamples; ++i) {
    st.hip_mean[i] = j.at("hip").at("mean").at(i).get<double>();
    st.hip_std[i] = j.at("hip").at("std").at(i).get<double>();
    st.knee_mean[i] = j.at("knee").at("mean").at(i).get<double>();
    st.knee_std[i] = j.at("knee").at("std").at(i).get<double>();
  }
  st.floor_hits = j.value("floor_hits", 0);
  return st;
}

inline void write_stats_json(const std::string& path, const NormStats& st) {
  std::ofstream os(path);
  if (!os) throw DataError("stats: cannot open for write: " + path);
  os << stats_to_json(st).dump(2) << "\n";
}

inline NormStats read_stats_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("stats: cannot open: " + path);
  nlohmann::json j;
  is >> j;
  return stats_from_json(j);
}

}  // namespace dyad::pipeline
