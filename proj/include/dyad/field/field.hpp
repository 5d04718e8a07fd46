#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/field/gmm.hpp"
#include "dyad/io/csv.hpp"
#include "dyad/vae/vae.hpp"

namespace dyad::field {

// ---------------------------------------------------------------------------
// Latent virtual force between paired strides: F = K (z_other - z_self).
// Stiffness-only by construction; no damping term exists in latent space.
// ---------------------------------------------------------------------------
inline Vec2 latent_force(const Vec2& z_self, const Vec2& z_other, double k_stiff) {
  require(k_stiff >= 0.0, "latent_force: negative stiffness");
  return {k_stiff * (z_other[0] - z_self[0]), k_stiff * (z_other[1] - z_self[1])};
}

struct LatentForceSample {
  Vec2 z{};
  Vec2 force{};
  Joint joint = Joint::hip;
  FieldRole role = FieldRole::patient;
  int dyad_id = 0;
};

// Latent embeddings of each pair plus the resulting virtual forces, for both
// roles and one joint. The per-stride stiffness comes from the pair metadata.
inline std::vector<LatentForceSample> make_force_samples(
    const std::vector<pipeline::StridePair>& pairs, const vae::VaeModel& model) {
  std::vector<LatentForceSample> out;
  out.reserve(pairs.size() * 2);
  const std::size_t j = model.joint == Joint::hip ? 0 : 1;
  const auto& mean = model.stats.mean(j);
  const auto& stdev = model.stats.stdev(j);
  for (const auto& pair : pairs) {
    Matrix x(2, pipeline::kStrideSamples);
    for (std::size_t i = 0; i < pipeline::kStrideSamples; ++i) {
      x(0, i) = (pair.patient.joint(j)[i] - mean[i]) / stdev[i];
      x(1, i) = (pair.therapist.joint(j)[i] - mean[i]) / stdev[i];
    }
    auto [mu, sigma] = vae::encode(model, x);
    const Vec2 z_p{mu(0, 0), mu(0, 1)};
    const Vec2 z_t{mu(1, 0), mu(1, 1)};
    LatentForceSample sp;
    sp.z = z_p;
    sp.force = latent_force(z_p, z_t, pair.patient.K_p[j]);
    sp.joint = model.joint;
    sp.role = FieldRole::patient;
    sp.dyad_id = pair.patient.dyad_id;
    out.push_back(sp);
    LatentForceSample st;
    st.z = z_t;
    st.force = latent_force(z_t, z_p, pair.patient.K_t[j]);
    st.joint = model.joint;
    st.role = FieldRole::therapist;
    st.dyad_id = pair.patient.dyad_id;
    out.push_back(st);
  }
  return out;
}

inline Matrix samples_matrix(const std::vector<LatentForceSample>& samples, FieldRole role) {
  std::size_t n = 0;
  for (const auto& s : samples)
    if (s.role == role) ++n;
  Matrix m(n, kDim);
  std::size_t r = 0;
  for (const auto& s : samples) {
    if (s.role != role) continue;
    m(r, 0) = s.z[0];
    m(r, 1) = s.z[1];
    m(r, 2) = s.force[0];
    m(r, 3) = s.force[1];
    ++r;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian mixture regression: E[F | z] and Cov[F | z].
// ---------------------------------------------------------------------------
struct GmrResult {
  Vec2 expectation{};
  std::array<double, 4> covariance{};  // 2x2 row-major
  std::vector<double> responsibilities;
  bool regularized = false;  // singular Sigma_zz fallback used
};

inline GmrResult gmr_expect(const GmmModel& m, const Vec2& z) {
  require(!m.comps.empty(), "gmr: model has no components");
  const std::size_t k = m.comps.size();
  GmrResult out;
  out.responsibilities.resize(k);

  std::vector<std::array<double, 4>> szz_inv(k);
  std::vector<double> logw(k);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const auto& comp = m.comps[c];
    std::array<double, 4> szz{comp.cov[0], comp.cov[1], comp.cov[4], comp.cov[5]};
    double det = szz[0] * szz[3] - szz[1] * szz[2];
    if (det <= 1e-250 || szz[0] <= 0.0) {
      // ridge fallback for a degenerate latent marginal
      const double jitter = 1e-9 * (1.0 + std::fabs(szz[0]) + std::fabs(szz[3]));
      szz[0] += jitter;
      szz[3] += jitter;
      det = szz[0] * szz[3] - szz[1] * szz[2];
      out.regularized = true;
    }
    szz_inv[c] = {szz[3] / det, -szz[1] / det, -szz[2] / det, szz[0] / det};
    const double dz0 = z[0] - comp.mean[0];
    const double dz1 = z[1] - comp.mean[1];
    const double quad = dz0 * (szz_inv[c][0] * dz0 + szz_inv[c][1] * dz1) +
                        dz1 * (szz_inv[c][2] * dz0 + szz_inv[c][3] * dz1);
    logw[c] = std::log(comp.weight) - std::log(2.0 * std::numbers::pi) -
              0.5 * std::log(det) - 0.5 * quad;
    best = std::max(best, logw[c]);
  }
  double norm = 0.0;
  for (std::size_t c = 0; c < k; ++c) norm += std::exp(logw[c] - best);
  const double log_norm = best + std::log(norm);

  // E[F|z] = sum_k h_k (mu_F + Sigma_Fz Sigma_zz^-1 (z - mu_z));
  // Cov adds the mixture spread term sum h_k (C_k + m_k m_k^T) - E E^T.
  Vec2 ef{0.0, 0.0};
  std::array<double, 4> second{};
  for (std::size_t c = 0; c < k; ++c) {
    const auto& comp = m.comps[c];
    const double h = std::exp(logw[c] - log_norm);
    out.responsibilities[c] = h;
    const double dz0 = z[0] - comp.mean[0];
    const double dz1 = z[1] - comp.mean[1];
    // Sigma_Fz rows: cov rows 2..3, cols 0..1
    const std::array<double, 4> sfz{comp.cov[8], comp.cov[9], comp.cov[12], comp.cov[13]};
    const std::array<double, 4> sff{comp.cov[10], comp.cov[11], comp.cov[14], comp.cov[15]};
    // A = Sigma_Fz Sigma_zz^-1
    const std::array<double, 4> a{
        sfz[0] * szz_inv[c][0] + sfz[1] * szz_inv[c][2],
        sfz[0] * szz_inv[c][1] + sfz[1] * szz_inv[c][3],
        sfz[2] * szz_inv[c][0] + sfz[3] * szz_inv[c][2],
        sfz[2] * szz_inv[c][1] + sfz[3] * szz_inv[c][3]};
    const Vec2 mk{comp.mean[2] + a[0] * dz0 + a[1] * dz1,
                  comp.mean[3] + a[2] * dz0 + a[3] * dz1};
    // C_k = Sigma_FF - A Sigma_zF
    const std::array<double, 4> ck{
        sff[0] - (a[0] * sfz[0] + a[1] * sfz[1]),
        sff[1] - (a[0] * sfz[2] + a[1] * sfz[3]),
        sff[2] - (a[2] * sfz[0] + a[3] * sfz[1]),
        sff[3] - (a[2] * sfz[2] + a[3] * sfz[3])};
    ef[0] += h * mk[0];
    ef[1] += h * mk[1];
    second[0] += h * (ck[0] + mk[0] * mk[0]);
    second[1] += h * (ck[1] + mk[0] * mk[1]);
    second[2] += h * (ck[2] + mk[1] * mk[0]);
    second[3] += h * (ck[3] + mk[1] * mk[1]);
  }
  out.expectation = ef;
  out.covariance = {second[0] - ef[0] * ef[0], second[1] - ef[0] * ef[1],
                    second[2] - ef[1] * ef[0], second[3] - ef[1] * ef[1]};
  return out;
}

// ---------------------------------------------------------------------------
// Grid sampling and field construction.
// ---------------------------------------------------------------------------
inline std::vector<Vec2> sample_grid(const Vec2& z_min, const Vec2& z_max,
                                     std::size_t resolution = 25) {
  require(resolution >= 2, "sample_grid: resolution must be >= 2 per axis");
  for (std::size_t d = 0; d < 2; ++d)
    require(z_max[d] > z_min[d], "sample_grid: degenerate bounds on axis " +
                                     std::to_string(d));
  std::vector<Vec2> grid;
  grid.reserve(resolution * resolution);
  const double step0 = (z_max[0] - z_min[0]) / static_cast<double>(resolution - 1);
  const double step1 = (z_max[1] - z_min[1]) / static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i)
    for (std::size_t j = 0; j < resolution; ++j)
      grid.push_back({z_min[0] + step0 * static_cast<double>(i),
                      z_min[1] + step1 * static_cast<double>(j)});
  return grid;
}

struct FieldRecord {
  Vec2 z{};
  std::array<double, pipeline::kStrideSamples> stride_deg{};
  Vec2 force{};
  std::array<double, 4> force_cov{};
};

// Decodes every grid point through the joint's decoder (denormalized to
// degrees) and attaches the regressed force.
inline std::vector<FieldRecord> build_field(const GmmModel& gmm, const vae::VaeModel& model,
                                            const std::vector<Vec2>& grid) {
  require(gmm.joint == model.joint, "build_field: joint tag mismatch between GMM and VAE");
  const std::size_t j = model.joint == Joint::hip ? 0 : 1;
  const auto& mean = model.stats.mean(j);
  const auto& stdev = model.stats.stdev(j);
  std::vector<FieldRecord> out;
  out.reserve(grid.size());
  for (const Vec2& z : grid) {
    FieldRecord rec;
    rec.z = z;
    Matrix zm(1, 2);
    zm[0] = z[0];
    zm[1] = z[1];
    Matrix s_hat = vae::decode(model, zm);
    for (std::size_t i = 0; i < pipeline::kStrideSamples; ++i)
      rec.stride_deg[i] = s_hat(0, i) * stdev[i] + mean[i];
    GmrResult g = gmr_expect(gmm, z);
    rec.force = g.expectation;
    rec.force_cov = g.covariance;
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence.
// ---------------------------------------------------------------------------
inline nlohmann::json gmm_to_json(const GmmModel& m) {
  nlohmann::json j;
  j["joint"] = pipeline::joint_name(m.joint);
  j["role"] = role_name(m.role);
  j["components"] = m.comps.size();
  j["z_min"] = m.z_min;
  j["z_max"] = m.z_max;
  j["iterations"] = m.trace.iterations;
  j["converged"] = m.trace.converged;
  j["reseeds"] = m.trace.reseeds;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.comps) {
    nlohmann::json cj;
    cj["weight"] = c.weight;
    cj["mean"] = c.mean;
    cj["cov"] = c.cov;
    comps.push_back(cj);
  }
  j["mixture"] = comps;
  return j;
}

inline GmmModel gmm_from_json(const nlohmann::json& j) {
  GmmModel m;
  m.joint = pipeline::joint_from(j.at("joint").get<std::string>());
  m.role = role_from(j.at("role").get<std::string>());
  m.z_min = j.at("z_min").get<Vec2>();
  m.z_max = j.at("z_max").get<Vec2>();
  for (const auto& cj : j.at("mixture")) {
    GmmComponent c;
    c.weight = cj.at("weight").get<double>();
    c.mean = cj.at("mean").get<std::array<double, kDim>>();
    c.cov = cj.at("cov").get<std::array<double, kDim * kDim>>();
    c.refresh();
    m.comps.push_back(c);
  }
  require(!m.comps.empty(), "gmm: empty mixture in json");
  return m;
}

inline void write_gmm_json(const std::string& path, const GmmModel& m) {
  std::ofstream os(path);
  if (!os) throw DataError("gmm: cannot open for write: " + path);
  os << gmm_to_json(m).dump(2) << "\n";
}

inline GmmModel read_gmm_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("gmm: cannot open: " + path);
  nlohmann::json j;
  is >> j;
  return gmm_from_json(j);
}

// Quiver-ready export: one row per grid point.
inline void write_field_csv(const std::string& path, const std::vector<FieldRecord>& recs) {
  io::CsvWriter w(path);
  w.header({"z1", "z2", "F1", "F2", "covFF11", "covFF12", "covFF22"});
  for (const auto& r : recs)
    w.row({r.z[0], r.z[1], r.force[0], r.force[1], r.force_cov[0], r.force_cov[1],
           r.force_cov[3]});
}

// Companion export with the decoded stride per grid point.
inline void write_field_strides_csv(const std::string& path,
                                    const std::vector<FieldRecord>& recs) {
  io::CsvWriter w(path);
  std::vector<std::string> header{"z1", "z2"};
  for (std::size_t i = 0; i < pipeline::kStrideSamples; ++i)
    header.push_back("s" + std::to_string(i));
  w.header(header);
  for (const auto& r : recs) {
    std::vector<double> row{r.z[0], r.z[1]};
    for (double v : r.stride_deg) row.push_back(v);
    w.row(row);
  }
}

}  // namespace dyad::field
