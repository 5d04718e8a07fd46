#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "dyad/core/matrix.hpp"
#include "dyad/core/rng.hpp"
#include "dyad/pipeline/stride.hpp"

namespace dyad::field {

using pipeline::Joint;

inline constexpr std::size_t kZDim = 2;  // latent block
inline constexpr std::size_t kFDim = 2;  // force block
inline constexpr std::size_t kDim = kZDim + kFDim;

using Vec2 = std::array<double, 2>;

enum class FieldRole : std::uint8_t { patient = 0, therapist = 1 };

inline const char* role_name(FieldRole r) {
  return r == FieldRole::patient ? "patient" : "therapist";
}

inline FieldRole role_from(const std::string& s) {
  if (s == "patient") return FieldRole::patient;
  if (s == "therapist") return FieldRole::therapist;
  throw DataError("unknown field role '" + s + "'");
}

// ---------------------------------------------------------------------------
// Small dense symmetric linear algebra (n <= 4), enough for the mixture.
// ---------------------------------------------------------------------------
namespace linalg {

// In-place Cholesky L L^T of a row-major n x n SPD matrix; false if not PD.
inline bool cholesky(std::size_t n, const double* a, double* l) {
  for (std::size_t i = 0; i < n * n; ++i) l[i] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) acc -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (acc <= 0.0) return false;
        l[i * n + i] = std::sqrt(acc);
      } else {
        l[i * n + j] = acc / l[j * n + j];
      }
    }
  }
  return true;
}

// Solves L y = b (forward substitution).
inline void forward_solve(std::size_t n, const double* l, const double* b, double* y) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b[i];
    for (std::size_t k = 0; k < i; ++k) acc -= l[i * n + k] * y[k];
    y[i] = acc / l[i * n + i];
  }
}

inline double log_det_from_chol(std::size_t n, const double* l) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::log(l[i * n + i]);
  return 2.0 * acc;
}

// 2x2 symmetric inverse.
inline std::array<double, 4> inv2(const std::array<double, 4>& s) {
  const double det = s[0] * s[3] - s[1] * s[2];
  require(std::fabs(det) > 1e-300, "linalg: singular 2x2 matrix");
  return {s[3] / det, -s[1] / det, -s[2] / det, s[0] / det};
}

}  // namespace linalg

// ---------------------------------------------------------------------------
// Gaussian mixture over [z, F] in R^4.
// ---------------------------------------------------------------------------
struct GmmComponent {
  double weight = 0.0;
  std::array<double, kDim> mean{};
  std::array<double, kDim * kDim> cov{};  // row-major, symmetric positive definite

  // cached factorization (refreshed after every M-step)
  std::array<double, kDim * kDim> chol{};
  double log_det = 0.0;

  void refresh() {
    if (!linalg::cholesky(kDim, cov.data(), chol.data()))
      throw NumericError("gmm: component covariance is not positive definite");
    log_det = linalg::log_det_from_chol(kDim, chol.data());
  }

  double log_density(const std::array<double, kDim>& x) const {
    std::array<double, kDim> d{}, y{};
    for (std::size_t i = 0; i < kDim; ++i) d[i] = x[i] - mean[i];
    linalg::forward_solve(kDim, chol.data(), d.data(), y.data());
    double quad = 0.0;
    for (double v : y) quad += v * v;
    return -0.5 * (static_cast<double>(kDim) * std::log(2.0 * std::numbers::pi) +
                   log_det + quad);
  }
};

struct FitTrace {
  std::vector<double> mean_loglik;   // after every E-step
  std::vector<std::size_t> reseeds;  // iterations where a component was re-seeded
  std::size_t iterations = 0;
  bool converged = false;
};

struct GmmModel {
  std::vector<GmmComponent> comps;
  Joint joint = Joint::hip;
  FieldRole role = FieldRole::patient;
  Vec2 z_min{}, z_max{};  // training latent bounds (grid support)
  FitTrace trace;

  double log_density(const std::array<double, kDim>& x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
      terms[k] = std::log(comps[k].weight) + comps[k].log_density(x);
      best = std::max(best, terms[k]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
  }
};

struct GmmConfig {
  std::size_t components = 10;
  std::size_t max_iterations = 500;
  double tol = 1e-7;           // on the change of mean log-likelihood
  double reg_scale = 1e-6;     // epsilon = reg_scale * trace(Sigma_data) / dim
  double collapse_weight = 1e-6;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::array<double, kDim> sample_at(const Matrix& x, std::size_t i) {
  std::array<double, kDim> s{};
  for (std::size_t d = 0; d < kDim; ++d) s[d] = x(i, d);
  return s;
}

inline double sq_dist(const std::array<double, kDim>& a, const std::array<double, kDim>& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < kDim; ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
  return acc;
}

// k-means++ seeding over the joint samples.
inline std::vector<std::array<double, kDim>> kmeanspp(const Matrix& x, std::size_t k,
                                                      Rng& rng) {
  const std::size_t n = x.rows();
  std::vector<std::array<double, kDim>> centers;
  centers.push_back(sample_at(x, rng.index(n)));
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      const auto s = sample_at(x, i);
      for (const auto& c : centers) best = std::min(best, sq_dist(s, c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(sample_at(x, rng.index(n)));
      continue;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      pick -= d2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(sample_at(x, chosen));
  }
  return centers;
}

inline std::array<double, kDim * kDim> data_covariance(const Matrix& x,
                                                       std::array<double, kDim>& mean) {
  const double n = static_cast<double>(x.rows());
  mean.fill(0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t d = 0; d < kDim; ++d) mean[d] += x(i, d);
  for (double& v : mean) v /= n;
  std::array<double, kDim * kDim> cov{};
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t a = 0; a < kDim; ++a)
      for (std::size_t b = 0; b < kDim; ++b)
        cov[a * kDim + b] += (x(i, a) - mean[a]) * (x(i, b) - mean[b]);
  for (double& v : cov) v /= n;
  return cov;
}

}  // namespace detail

// EM fit with k-means++ initialization, ridge-regularized covariances and
// collapse re-seeding. Samples are rows [z1, z2, F1, F2].
inline GmmModel fit_gmm(const Matrix& samples, const GmmConfig& cfg = {}) {
  const std::size_t n = samples.rows();
  const std::size_t k = cfg.components;
  require(samples.cols() == kDim, "fit_gmm: samples must have 4 columns");
  require(n >= 10 * k, "fit_gmm: need at least 10*K samples, got " + std::to_string(n));

  GmmModel model;
  Rng rng(cfg.seed);

  std::array<double, kDim> data_mean{};
  const auto data_cov = detail::data_covariance(samples, data_mean);
  double trace = 0.0;
  for (std::size_t d = 0; d < kDim; ++d) trace += data_cov[d * kDim + d];
  const double eps = cfg.reg_scale * trace / static_cast<double>(kDim);

  // latent bounds for later grid sampling
  model.z_min = {samples(0, 0), samples(0, 1)};
  model.z_max = model.z_min;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < kZDim; ++d) {
      model.z_min[d] = std::min(model.z_min[d], samples(i, d));
      model.z_max[d] = std::max(model.z_max[d], samples(i, d));
    }

  // init: k-means++ centers, shared data covariance
  auto centers = detail::kmeanspp(samples, k, rng);
  model.comps.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    model.comps[c].weight = 1.0 / static_cast<double>(k);
    model.comps[c].mean = centers[c];
    model.comps[c].cov = data_cov;
    for (std::size_t d = 0; d < kDim; ++d) model.comps[c].cov[d * kDim + d] += eps;
    model.comps[c].refresh();
  }

  Matrix resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    // E-step with log-sum-exp
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = detail::sample_at(samples, i);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        resp(i, c) = std::log(model.comps[c].weight) + model.comps[c].log_density(x);
        best = std::max(best, resp(i, c));
      }
      double norm = 0.0;
      for (std::size_t c = 0; c < k; ++c) norm += std::exp(resp(i, c) - best);
      const double log_norm = best + std::log(norm);
      ll += log_norm;
      for (std::size_t c = 0; c < k; ++c) resp(i, c) = std::exp(resp(i, c) - log_norm);
    }
    ll /= static_cast<double>(n);
    model.trace.mean_loglik.push_back(ll);
    model.trace.iterations = iter + 1;

    if (std::fabs(ll - prev_ll) < cfg.tol) {
      model.trace.converged = true;
      break;
    }
    prev_ll = ll;

    // M-step
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp(i, c);
      GmmComponent& comp = model.comps[c];
      if (nk / static_cast<double>(n) < cfg.collapse_weight) {
        // re-seed a starved component at the lowest-density sample
        std::size_t worst = 0;
        double worst_ll = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          const double di = model.log_density(detail::sample_at(samples, i));
          if (di < worst_ll) {
            worst_ll = di;
            worst = i;
          }
        }
        comp.weight = 1.0 / static_cast<double>(n);
        comp.mean = detail::sample_at(samples, worst);
        comp.cov = data_cov;
        for (std::size_t d = 0; d < kDim; ++d) comp.cov[d * kDim + d] += eps;
        comp.refresh();
        model.trace.reseeds.push_back(iter);
        continue;
      }
      comp.weight = nk / static_cast<double>(n);
      comp.mean.fill(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < kDim; ++d) comp.mean[d] += resp(i, c) * samples(i, d);
      for (double& v : comp.mean) v /= nk;
      comp.cov.fill(0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp(i, c);
        for (std::size_t a = 0; a < kDim; ++a) {
          const double da = samples(i, a) - comp.mean[a];
          for (std::size_t b = a; b < kDim; ++b) {
            comp.cov[a * kDim + b] += r * da * (samples(i, b) - comp.mean[b]);
          }
        }
      }
      for (std::size_t a = 0; a < kDim; ++a)
        for (std::size_t b = a; b < kDim; ++b) {
          comp.cov[a * kDim + b] /= nk;
          comp.cov[b * kDim + a] = comp.cov[a * kDim + b];
        }
      for (std::size_t d = 0; d < kDim; ++d) comp.cov[d * kDim + d] += eps;
      comp.refresh();
    }

    // renormalize weights (guards the re-seed path)
    double wsum = 0.0;
    for (const auto& c : model.comps) wsum += c.weight;
    for (auto& c : model.comps) c.weight /= wsum;
  }
  return model;
}

struct LoglikStats {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t count = 0;
};

inline LoglikStats gmm_loglik(const GmmModel& m, const Matrix& samples) {
  require(samples.cols() == kDim, "gmm_loglik: samples must have 4 columns");
  require(samples.rows() > 0, "gmm_loglik: no samples");
  LoglikStats out;
  out.count = samples.rows();
  std::vector<double> lls(samples.rows());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    lls[i] = m.log_density(detail::sample_at(samples, i));
    out.mean += lls[i];
  }
  out.mean /= static_cast<double>(samples.rows());
  for (double v : lls) out.stdev += (v - out.mean) * (v - out.mean);
  out.stdev = std::sqrt(out.stdev / static_cast<double>(samples.rows()));
  return out;
}

}  // namespace dyad::field
