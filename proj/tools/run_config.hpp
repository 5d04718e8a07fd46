#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "dyad/core/common.hpp"

namespace dyad::cli {

using nlohmann::json;

// Everything a full pipeline run needs, serializable to/from one JSON file.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "runs/default";

  struct Synth {
    std::size_t dyads = 8;
    double duration_s = 60.0;
    double rate_hz = 333.0;
    std::string mode = "coupled";  // coupled | transform
    double noise_sigma_deg = 0.3;
    double K_p = 40.0, K_t = 20.0, B_p = 1.5, B_t = 1.5;
    double admittance = 0.05;
    bool vary_stiffness = true;  // per-dyad stiffness jitter (blocks differ)
    double impairment_scale = 1.0;  // severity of synthetic patient impairments
  } synth;

  struct Pipeline {
    double train_ratio = 0.7;
    std::size_t refractory_frames = 0;
    double outlier_keep = 0.9;  // keep strides at or below this percentile
  } pipeline;

  struct Vae {
    std::size_t epochs = 1000;
    std::size_t batch = 256;
    double lr = 1e-3;
    std::size_t patience = 20;
    double beta = 1e-3;
    std::size_t harmonics = 16;
    std::size_t warmup_epochs = 0;  // optional synthetic-family warm-up
    std::size_t warmup_strides = 2000;
  } vae;

  struct Field {
    std::size_t components = 10;
    std::size_t grid = 25;
    bool per_dyad = false;  // default: one pooled GMM per joint/role
    double val_ratio = 0.3;
  } field;

  struct St {
    std::size_t hidden = 64;
    std::size_t epochs = 150;
    std::size_t batch = 256;
    double lr = 1e-5;
    std::size_t patience = 0;
    std::size_t threads = 0;
  } st;

  struct Serve {
    double rate_hz = 333.0;
    std::size_t horizon = 25;  // 25 = "now", 49 = +75 ms
  } serve;

  json to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["synth"] = {{"dyads", synth.dyads},
                  {"duration_s", synth.duration_s},
                  {"rate_hz", synth.rate_hz},
                  {"mode", synth.mode},
                  {"noise_sigma_deg", synth.noise_sigma_deg},
                  {"K_p", synth.K_p},
                  {"K_t", synth.K_t},
                  {"B_p", synth.B_p},
                  {"B_t", synth.B_t},
                  {"admittance", synth.admittance},
                  {"vary_stiffness", synth.vary_stiffness},
                  {"impairment_scale", synth.impairment_scale}};
    j["pipeline"] = {{"train_ratio", pipeline.train_ratio},
                     {"refractory_frames", pipeline.refractory_frames},
                     {"outlier_keep", pipeline.outlier_keep}};
    j["vae"] = {{"epochs", vae.epochs},       {"batch", vae.batch},
                {"lr", vae.lr},               {"patience", vae.patience},
                {"beta", vae.beta},           {"harmonics", vae.harmonics},
                {"warmup_epochs", vae.warmup_epochs},
                {"warmup_strides", vae.warmup_strides}};
    j["field"] = {{"components", field.components},
                  {"grid", field.grid},
                  {"per_dyad", field.per_dyad},
                  {"val_ratio", field.val_ratio}};
    j["st"] = {{"hidden", st.hidden},   {"epochs", st.epochs}, {"batch", st.batch},
               {"lr", st.lr},           {"patience", st.patience},
               {"threads", st.threads}};
    j["serve"] = {{"rate_hz", serve.rate_hz}, {"horizon", serve.horizon}};
    return j;
  }
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw UsageError("config: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  detail::check_keys(
      j, {"seed", "out_dir", "synth", "pipeline", "vae", "field", "st", "serve"},
      "top level");
  detail::get_if(j, "seed", c.seed);
  detail::get_if(j, "out_dir", c.out_dir);
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    detail::check_keys(s,
                       {"dyads", "duration_s", "rate_hz", "mode", "noise_sigma_deg",
                        "K_p", "K_t", "B_p", "B_t", "admittance", "vary_stiffness",
                        "impairment_scale"},
                       "synth");
    detail::get_if(s, "dyads", c.synth.dyads);
    detail::get_if(s, "duration_s", c.synth.duration_s);
    detail::get_if(s, "rate_hz", c.synth.rate_hz);
    detail::get_if(s, "mode", c.synth.mode);
    detail::get_if(s, "noise_sigma_deg", c.synth.noise_sigma_deg);
    detail::get_if(s, "K_p", c.synth.K_p);
    detail::get_if(s, "K_t", c.synth.K_t);
    detail::get_if(s, "B_p", c.synth.B_p);
    detail::get_if(s, "B_t", c.synth.B_t);
    detail::get_if(s, "admittance", c.synth.admittance);
    detail::get_if(s, "vary_stiffness", c.synth.vary_stiffness);
    detail::get_if(s, "impairment_scale", c.synth.impairment_scale);
    if (c.synth.mode != "coupled" && c.synth.mode != "transform")
      throw UsageError("config: synth.mode must be 'coupled' or 'transform'");
  }
  if (j.contains("pipeline")) {
    const json& p = j.at("pipeline");
    detail::check_keys(p, {"train_ratio", "refractory_frames", "outlier_keep"},
                       "pipeline");
    detail::get_if(p, "train_ratio", c.pipeline.train_ratio);
    detail::get_if(p, "refractory_frames", c.pipeline.refractory_frames);
    detail::get_if(p, "outlier_keep", c.pipeline.outlier_keep);
  }
  if (j.contains("vae")) {
    const json& v = j.at("vae");
    detail::check_keys(v,
                       {"epochs", "batch", "lr", "patience", "beta", "harmonics",
                        "warmup_epochs", "warmup_strides"},
                       "vae");
    detail::get_if(v, "epochs", c.vae.epochs);
    detail::get_if(v, "batch", c.vae.batch);
    detail::get_if(v, "lr", c.vae.lr);
    detail::get_if(v, "patience", c.vae.patience);
    detail::get_if(v, "beta", c.vae.beta);
    detail::get_if(v, "harmonics", c.vae.harmonics);
    detail::get_if(v, "warmup_epochs", c.vae.warmup_epochs);
    detail::get_if(v, "warmup_strides", c.vae.warmup_strides);
  }
  if (j.contains("field")) {
    const json& f = j.at("field");
    detail::check_keys(f, {"components", "grid", "per_dyad", "val_ratio"}, "field");
    detail::get_if(f, "components", c.field.components);
    detail::get_if(f, "grid", c.field.grid);
    detail::get_if(f, "per_dyad", c.field.per_dyad);
    detail::get_if(f, "val_ratio", c.field.val_ratio);
  }
  if (j.contains("st")) {
    const json& s = j.at("st");
    detail::check_keys(s, {"hidden", "epochs", "batch", "lr", "patience", "threads"},
                       "st");
    detail::get_if(s, "hidden", c.st.hidden);
    detail::get_if(s, "epochs", c.st.epochs);
    detail::get_if(s, "batch", c.st.batch);
    detail::get_if(s, "lr", c.st.lr);
    detail::get_if(s, "patience", c.st.patience);
    detail::get_if(s, "threads", c.st.threads);
  }
  if (j.contains("serve")) {
    const json& s = j.at("serve");
    detail::check_keys(s, {"rate_hz", "horizon"}, "serve");
    detail::get_if(s, "rate_hz", c.serve.rate_hz);
    detail::get_if(s, "horizon", c.serve.horizon);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("config: invalid JSON in " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError("config: bad value in " + path + ": " + e.what());
  }
}

}  // namespace dyad::cli
