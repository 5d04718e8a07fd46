#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dyad/field/field.hpp"
#include "dyad/io/hash.hpp"
#include "dyad/pipeline/dataset_io.hpp"
#include "dyad/pipeline/pipeline.hpp"
#include "dyad/rt/engine.hpp"
#include "dyad/st/train.hpp"
#include "dyad/synth/dyad.hpp"
#include "dyad/vae/train.hpp"
#include "run_config.hpp"

namespace dyad::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifests: every subcommand records enough to reproduce its outputs
// (command, version, config hash, input hashes, output hashes). No
// timestamps, so identical runs produce identical manifests.
// ---------------------------------------------------------------------------
inline void write_manifest(const fs::path& dir, const std::string& command,
                           const RunConfig& cfg, const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config_hash"] = io::hex64(io::fnv1a(cfg.to_json().dump()));
  json in = json::object();
  for (const auto& p : inputs) in[p] = io::hash_file(p);
  json out = json::object();
  for (const auto& p : outputs) out[p] = io::hash_file(p);
  m["inputs"] = in;
  m["outputs"] = out;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw DataError("cannot write manifest in " + dir.string());
  os << m.dump(2) << "\n";
}

inline void require_artifact(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p))
    throw DataError("missing artifact " + p.string() + " (produce it with `dyad " +
                    producer + "`)");
}

// ---------------------------------------------------------------------------
// synth-data
// ---------------------------------------------------------------------------
inline synth::GaitProfile make_patient_profile(Rng& r, double noise,
                                               double severity = 1.0) {
  synth::GaitProfile p = synth::GaitProfile::typical();
  p.cadence = 0.85 + 0.3 * r.uniform();
  for (auto& h : p.hip) {
    h.amp *= 1.0 + severity * r.uniform(-0.15, 0.15);
    h.phase += severity * r.uniform(-0.3, 0.3);
  }
  for (auto& h : p.knee) {
    h.amp *= 1.0 + severity * r.uniform(-0.15, 0.15);
    h.phase += severity * r.uniform(-0.3, 0.3);
  }
  p.impairment[r.index(4)] = severity * (0.2 + 0.4 * r.uniform());
  p.impairment[r.index(4)] =
      std::max(p.impairment[r.index(4)], severity * (0.1 + 0.3 * r.uniform()));
  p.side_scale[r.index(2)] = 1.0 - severity * (0.05 + 0.2 * r.uniform());
  p.noise_sigma_deg = noise;
  return p;
}

inline synth::GaitProfile make_therapist_profile(Rng& r, double cadence, double noise) {
  synth::GaitProfile t = synth::GaitProfile::typical();
  t.cadence = cadence;  // locked to the patient for a coherent dyad
  for (auto& h : t.hip) h.amp *= 0.9 + 0.2 * r.uniform();
  for (auto& h : t.knee) h.amp *= 0.9 + 0.2 * r.uniform();
  t.noise_sigma_deg = noise;
  return t;
}

inline json profile_to_json(const synth::GaitProfile& p) {
  json harmonics_hip = json::array(), harmonics_knee = json::array();
  for (const auto& h : p.hip) harmonics_hip.push_back({{"amp", h.amp}, {"phase", h.phase}});
  for (const auto& h : p.knee)
    harmonics_knee.push_back({{"amp", h.amp}, {"phase", h.phase}});
  return {{"cadence", p.cadence},     {"hip_mean", p.hip_mean},
          {"knee_mean", p.knee_mean}, {"hip", harmonics_hip},
          {"knee", harmonics_knee},   {"side_scale", p.side_scale},
          {"impairment", p.impairment}, {"noise_sigma_deg", p.noise_sigma_deg}};
}

inline int cmd_synth_data(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "recordings";
  fs::create_directories(dir);
  Rng root(cfg.seed);
  std::vector<std::string> outputs;
  for (std::size_t d = 0; d < cfg.synth.dyads; ++d) {
    Rng r = root.fork(1000 + d);
    synth::GaitProfile patient = make_patient_profile(r, cfg.synth.noise_sigma_deg,
                                                      cfg.synth.impairment_scale);
    const double kj = cfg.synth.vary_stiffness ? 0.75 + 0.5 * r.uniform() : 1.0;

    synth::DyadRecording rec;
    json meta;
    if (cfg.synth.mode == "coupled") {
      synth::GaitProfile therapist =
          make_therapist_profile(r, patient.cadence, cfg.synth.noise_sigma_deg);
      auto params = synth::CouplingParams::uniform(cfg.synth.K_p * kj, cfg.synth.K_t * kj,
                                                   cfg.synth.B_p, cfg.synth.B_t);
      synth::CoupleOptions copts;
      copts.admittance = cfg.synth.admittance;
      rec = synth::couple_dyad(patient, therapist, params, cfg.synth.duration_s,
                               cfg.synth.rate_hz, cfg.seed + d, copts);
      meta["therapist_profile"] = profile_to_json(therapist);
      meta["K_p"] = params.K_p[0];
      meta["K_t"] = params.K_t[0];
      meta["B_p"] = params.B_p[0];
      meta["B_t"] = params.B_t[0];
    } else {
      synth::TransformDyadParams tp;
      for (std::size_t j = 0; j < 4; ++j) {
        tp.gain[j] = 0.8 + 0.2 * r.uniform();
        tp.offset_deg[j] = r.uniform(-5.0, 5.0);
      }
      tp.lowpass_alpha = 0.3 + 0.4 * r.uniform();
      tp.noise_sigma_deg = 0.2;
      rec = synth::transform_dyad(patient, tp, cfg.synth.duration_s, cfg.synth.rate_hz,
                                  cfg.seed + d);
      meta["transform"] = {{"gain", tp.gain},
                           {"offset_deg", tp.offset_deg},
                           {"lowpass_alpha", tp.lowpass_alpha},
                           {"lag_frames", tp.lag_frames},
                           {"noise_sigma_deg", tp.noise_sigma_deg}};
      meta["K_p"] = 0.0;
      meta["K_t"] = 0.0;
    }
    rec.dyad_id = static_cast<int>(d);

    char name[32];
    std::snprintf(name, sizeof(name), "dyad_%02zu", d);
    const std::string csv = (dir / (std::string(name) + ".csv")).string();
    const std::string frames = (dir / (std::string(name) + ".frames")).string();
    const std::string meta_path = (dir / (std::string(name) + ".meta.json")).string();
    synth::write_recording_csv(csv, rec);
    rt::write_frames(frames, rt::frames_from_recording(rec));
    meta["dyad_id"] = d;
    meta["mode"] = cfg.synth.mode;
    meta["seed"] = cfg.seed + d;
    meta["rate_hz"] = cfg.synth.rate_hz;
    meta["duration_s"] = cfg.synth.duration_s;
    meta["patient_profile"] = profile_to_json(patient);
    json pairing = json::object();
    for (const auto& [a, b] : synth::pairing_metadata()) pairing[a] = b;
    meta["pairing"] = pairing;
    std::ofstream os(meta_path);
    os << meta.dump(2) << "\n";
    outputs.insert(outputs.end(), {csv, frames, meta_path});
    std::cout << "wrote " << csv << " (" << rec.patient.size() << " frames/stream)\n";
  }
  write_manifest(dir, "synth-data", cfg, {}, outputs);
  return 0;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------
struct RecordingSet {
  std::vector<std::string> csvs;   // sorted
  std::vector<std::string> metas;  // parallel to csvs
};

inline RecordingSet list_recordings(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "recordings";
  require_artifact(dir, "synth-data");
  RecordingSet set;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".csv") set.csvs.push_back(e.path().string());
  }
  std::sort(set.csvs.begin(), set.csvs.end());
  require(!set.csvs.empty(),
          "no recordings in " + dir.string() + " (produce them with `dyad synth-data`)");
  for (const auto& c : set.csvs) {
    std::string m = c;
    m.replace(m.size() - 4, 4, ".meta.json");
    require_artifact(m, "synth-data");
    set.metas.push_back(m);
  }
  return set;
}

inline int cmd_preprocess(const RunConfig& cfg) {
  RecordingSet recs = list_recordings(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "dataset";
  fs::create_directories(dir);

  std::vector<pipeline::Stride> all_strides;
  std::vector<std::pair<std::size_t, std::size_t>> pair_rows;  // patient, therapist
  int discarded = 0, removed_outliers = 0;

  for (std::size_t i = 0; i < recs.csvs.size(); ++i) {
    synth::DyadRecording rec = synth::read_recording_csv(recs.csvs[i]);
    std::ifstream ms(recs.metas[i]);
    json meta;
    ms >> meta;
    const int dyad_id = meta.at("dyad_id").get<int>();
    const double kp = meta.value("K_p", 0.0);
    const double kt = meta.value("K_t", 0.0);
    const double rate = meta.at("rate_hz").get<double>();

    for (pipeline::Side side : {pipeline::Side::left, pipeline::Side::right}) {
      auto strikes = pipeline::detect_heel_strikes(
          pipeline::contact_signal(rec.patient, side), cfg.pipeline.refractory_frames);
      pipeline::StrideMeta mp{pipeline::Owner::patient, dyad_id, {kp, kp}, {kt, kt}};
      pipeline::StrideMeta mt{pipeline::Owner::therapist, dyad_id, {kp, kp}, {kt, kt}};
      auto sp = pipeline::segment_and_resample(rec.patient, strikes, side, rate, mp);
      auto st = pipeline::segment_and_resample(rec.therapist, strikes,
                                               pipeline::mirror_side(side), rate, mt);
      discarded += sp.discarded + st.discarded;
      require(sp.strides.size() == st.strides.size(),
              "preprocess: patient/therapist stride counts diverged");

      // outlier pass per (dyad, owner, side); a removed stride removes its pair
      auto op = pipeline::remove_outliers(sp.strides, cfg.pipeline.outlier_keep);
      auto ot = pipeline::remove_outliers(st.strides, cfg.pipeline.outlier_keep);
      removed_outliers += static_cast<int>(op.removed.size() + ot.removed.size());
      std::set<int> kept_p, kept_t;
      for (const auto& s : op.kept) kept_p.insert(s.stride_index);
      for (const auto& s : ot.kept) kept_t.insert(s.stride_index);
      std::map<int, const pipeline::Stride*> by_index_p, by_index_t;
      for (const auto& s : op.kept) by_index_p[s.stride_index] = &s;
      for (const auto& s : ot.kept) by_index_t[s.stride_index] = &s;
      for (const auto& [idx, ps] : by_index_p) {
        if (!kept_t.count(idx)) continue;
        pair_rows.push_back({all_strides.size(), all_strides.size() + 1});
        all_strides.push_back(*ps);
        all_strides.push_back(*by_index_t.at(idx));
      }
    }
  }
  require(!all_strides.empty(), "preprocess: no strides survived");

  // stride-level random split; stats from the training partition only
  auto labels = pipeline::split_random(
      all_strides.size(), {cfg.pipeline.train_ratio, 1.0 - cfg.pipeline.train_ratio},
      cfg.seed);
  std::vector<pipeline::Stride> train;
  std::vector<pipeline::StrideRow> rows;
  for (std::size_t i = 0; i < all_strides.size(); ++i) {
    pipeline::StrideRow r;
    r.stride = all_strides[i];
    r.split = labels[i] == 0 ? "train" : "val";
    if (labels[i] == 0) train.push_back(all_strides[i]);
    rows.push_back(std::move(r));
  }
  pipeline::NormStats stats = pipeline::fit_stats(train);

  const std::string strides_csv = (dir / "strides.csv").string();
  const std::string pairs_csv = (dir / "pairs.csv").string();
  const std::string stats_json = (dir / "norm_stats.json").string();
  const std::string meta_json = (dir / "preprocess_meta.json").string();
  pipeline::write_strides_csv(strides_csv, rows);
  std::vector<pipeline::PairRow> prs;
  for (auto [p, t] : pair_rows)
    prs.push_back({rows[p].stride.dyad_id, p, t});
  pipeline::write_pairs_csv(pairs_csv, prs);
  pipeline::write_stats_json(stats_json, stats);
  {
    json m = {{"strides", all_strides.size()},
              {"pairs", prs.size()},
              {"train", train.size()},
              {"discarded_duration", discarded},
              {"removed_outliers", removed_outliers},
              {"sigma_floor_hits", stats.floor_hits}};
    std::ofstream os(meta_json);
    os << m.dump(2) << "\n";
  }
  std::vector<std::string> inputs = recs.csvs;
  write_manifest(dir, "preprocess", cfg, inputs,
                 {strides_csv, pairs_csv, stats_json, meta_json});
  std::cout << "kept " << all_strides.size() << " strides (" << prs.size() << " pairs), "
            << removed_outliers << " outliers removed\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-vae
// ---------------------------------------------------------------------------
inline Matrix stride_matrix(const std::vector<pipeline::StrideRow>& rows,
                            const pipeline::NormStats& stats, pipeline::Joint joint,
                            const std::string& split) {
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.split == split) ++n;
  require(n > 0, "train-vae: split '" + split + "' is empty");
  const std::size_t j = joint == pipeline::Joint::hip ? 0 : 1;
  Matrix m(n, pipeline::kStrideSamples);
  std::size_t row = 0;
  for (const auto& r : rows) {
    if (r.split != split) continue;
    for (std::size_t i = 0; i < pipeline::kStrideSamples; ++i)
      m(row, i) = (r.stride.joint(j)[i] - stats.mean(j)[i]) / stats.stdev(j)[i];
    ++row;
  }
  return m;
}

// Broad synthetic gait family used for the optional warm-up phase (stand-in
// for pre-training on an external dataset).
inline Matrix warmup_family(std::size_t n, pipeline::Joint joint,
                            const pipeline::NormStats& stats, Rng& rng) {
  const std::size_t j = joint == pipeline::Joint::hip ? 0 : 1;
  Matrix m(n, pipeline::kStrideSamples);
  for (std::size_t i = 0; i < n; ++i) {
    synth::GaitProfile p = synth::GaitProfile::typical();
    auto& hs = joint == pipeline::Joint::hip ? p.hip : p.knee;
    for (auto& h : hs) {
      h.amp *= 0.5 + rng.uniform();
      h.phase += rng.uniform(-0.6, 0.6);
    }
    const double mean = joint == pipeline::Joint::hip ? p.hip_mean : p.knee_mean;
    for (std::size_t t = 0; t < pipeline::kStrideSamples; ++t) {
      double q, qd;
      synth::eval_harmonics(hs, mean, 1.0, static_cast<double>(t) / 99.0, 1.0, q, qd);
      m(i, t) = (q + rng.normal(0.0, 0.5) - stats.mean(j)[t]) / stats.stdev(j)[t];
    }
  }
  return m;
}

inline int cmd_train_vae(const RunConfig& cfg) {
  const fs::path data = fs::path(cfg.out_dir) / "dataset";
  require_artifact(data / "strides.csv", "preprocess");
  require_artifact(data / "norm_stats.json", "preprocess");
  auto rows = pipeline::read_strides_csv((data / "strides.csv").string());
  auto stats = pipeline::read_stats_json((data / "norm_stats.json").string());

  const fs::path dir = fs::path(cfg.out_dir) / "models";
  fs::create_directories(dir);

  auto train_joint = [&](pipeline::Joint joint) {
    Matrix train = stride_matrix(rows, stats, joint, "train");
    Matrix val = stride_matrix(rows, stats, joint, "val");
    vae::VaeModel model =
        vae::make_vae(joint, cfg.seed + (joint == pipeline::Joint::hip ? 1 : 2),
                      2 * cfg.vae.harmonics);
    model.stats = stats;
    vae::TrainConfig tc;
    tc.epochs = cfg.vae.epochs;
    tc.batch = cfg.vae.batch;
    tc.lr = cfg.vae.lr;
    tc.patience = cfg.vae.patience;
    tc.beta = cfg.vae.beta;
    tc.seed = cfg.seed + (joint == pipeline::Joint::hip ? 11 : 12);
    std::vector<vae::CurvePoint> curves;
    if (cfg.vae.warmup_epochs > 0) {
      Rng wr = Rng(cfg.seed).fork(joint == pipeline::Joint::hip ? 21 : 22);
      Matrix wtrain = warmup_family(cfg.vae.warmup_strides, joint, stats, wr);
      Matrix wval = warmup_family(cfg.vae.warmup_strides / 5 + 1, joint, stats, wr);
      vae::TrainConfig wc = tc;
      wc.epochs = cfg.vae.warmup_epochs;
      wc.patience = cfg.vae.warmup_epochs;  // run the warm-up to its cap
      auto wres = vae::train_vae(model, wtrain, wval, wc);
      curves = wres.curves;
    }
    auto res = vae::train_vae(model, train, val, tc);
    curves.insert(curves.end(), res.curves.begin(), res.curves.end());
    return std::make_tuple(model, curves, res);
  };

  auto hip_future = std::async(std::launch::async, train_joint, pipeline::Joint::hip);
  auto [knee_model, knee_curves, knee_res] = train_joint(pipeline::Joint::knee);
  auto [hip_model, hip_curves, hip_res] = hip_future.get();

  // validation reconstruction error in degrees
  std::vector<pipeline::Stride> val_strides;
  for (const auto& r : rows)
    if (r.split == "val") val_strides.push_back(r.stride);
  auto hip_rmse = vae::reconstruction_rmse(hip_model, val_strides);
  auto knee_rmse = vae::reconstruction_rmse(knee_model, val_strides);

  const std::string hip_path = (dir / "vae_hip.dyfw").string();
  const std::string knee_path = (dir / "vae_knee.dyfw").string();
  vae::save_vae(hip_path, hip_model);
  vae::save_vae(knee_path, knee_model);
  vae::write_curves_csv((dir / "curves_hip.csv").string(), hip_curves);
  vae::write_curves_csv((dir / "curves_knee.csv").string(), knee_curves);
  {
    json m = {{"hip",
               {{"val_rmse_deg_mean", hip_rmse.mean},
                {"val_rmse_deg_std", hip_rmse.stdev},
                {"best_epoch", hip_res.best_epoch},
                {"stopped_early", hip_res.stopped_early}}},
              {"knee",
               {{"val_rmse_deg_mean", knee_rmse.mean},
                {"val_rmse_deg_std", knee_rmse.stdev},
                {"best_epoch", knee_res.best_epoch},
                {"stopped_early", knee_res.stopped_early}}}};
    std::ofstream os(dir / "vae_meta.json");
    os << m.dump(2) << "\n";
  }
  write_manifest(dir, "train-vae", cfg,
                 {(data / "strides.csv").string(), (data / "norm_stats.json").string()},
                 {hip_path, hip_path + ".json", knee_path, knee_path + ".json",
                  (dir / "curves_hip.csv").string(), (dir / "curves_knee.csv").string(),
                  (dir / "vae_meta.json").string()});
  std::cout << "vae val rMSE: hip " << hip_rmse.mean << " +/- " << hip_rmse.stdev
            << " deg, knee " << knee_rmse.mean << " +/- " << knee_rmse.stdev << " deg\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit-field / export-field
// ---------------------------------------------------------------------------
inline std::vector<pipeline::StridePair> load_pairs(const RunConfig& cfg) {
  const fs::path data = fs::path(cfg.out_dir) / "dataset";
  require_artifact(data / "strides.csv", "preprocess");
  require_artifact(data / "pairs.csv", "preprocess");
  auto rows = pipeline::read_strides_csv((data / "strides.csv").string());
  auto prs = pipeline::read_pairs_csv((data / "pairs.csv").string());
  std::vector<pipeline::StridePair> pairs;
  for (const auto& p : prs) {
    require(p.patient_row < rows.size() && p.therapist_row < rows.size(),
            "pairs.csv references rows outside strides.csv");
    pairs.push_back({rows[p.patient_row].stride, rows[p.therapist_row].stride});
  }
  return pairs;
}

inline std::string gmm_file(const RunConfig& cfg, pipeline::Joint joint,
                            field::FieldRole role, int dyad_id = -1) {
  std::string name = std::string("gmm_") + pipeline::joint_name(joint) + "_" +
                     field::role_name(role);
  if (dyad_id >= 0) name += "_d" + std::to_string(dyad_id);
  return (fs::path(cfg.out_dir) / "field" / (name + ".json")).string();
}

inline int cmd_fit_field(const RunConfig& cfg) {
  const fs::path models = fs::path(cfg.out_dir) / "models";
  require_artifact(models / "vae_hip.dyfw", "train-vae");
  require_artifact(models / "vae_knee.dyfw", "train-vae");
  auto pairs = load_pairs(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "field";
  fs::create_directories(dir);

  std::vector<std::string> outputs;
  json summary = json::object();
  for (pipeline::Joint joint : {pipeline::Joint::hip, pipeline::Joint::knee}) {
    vae::VaeModel model = vae::load_vae(
        (models / (joint == pipeline::Joint::hip ? "vae_hip.dyfw" : "vae_knee.dyfw"))
            .string());
    auto samples = field::make_force_samples(pairs, model);
    for (field::FieldRole role : {field::FieldRole::patient, field::FieldRole::therapist}) {
      auto fit_one = [&](const Matrix& data, int dyad_id) {
        auto labels = pipeline::split_random(
            data.rows(), {1.0 - cfg.field.val_ratio, cfg.field.val_ratio}, cfg.seed);
        std::size_t ntr = 0;
        for (int l : labels) ntr += l == 0 ? 1 : 0;
        Matrix train(ntr, field::kDim), val(data.rows() - ntr, field::kDim);
        std::size_t a = 0, b = 0;
        for (std::size_t i = 0; i < data.rows(); ++i) {
          if (labels[i] == 0) {
            for (std::size_t d = 0; d < field::kDim; ++d) train(a, d) = data(i, d);
            ++a;
          } else {
            for (std::size_t d = 0; d < field::kDim; ++d) val(b, d) = data(i, d);
            ++b;
          }
        }
        field::GmmConfig gc;
        gc.components = cfg.field.components;
        gc.seed = cfg.seed + static_cast<std::uint64_t>(joint == pipeline::Joint::hip ? 0 : 100) +
                  (role == field::FieldRole::patient ? 0 : 1);
        field::GmmModel gmm = field::fit_gmm(train, gc);
        gmm.joint = joint;
        gmm.role = role;
        const std::string path = gmm_file(cfg, joint, role, dyad_id);
        field::write_gmm_json(path, gmm);
        outputs.push_back(path);
        auto tr_ll = field::gmm_loglik(gmm, train);
        auto va_ll = field::gmm_loglik(gmm, val);
        json e = {{"train_loglik_mean", tr_ll.mean}, {"train_loglik_std", tr_ll.stdev},
                  {"val_loglik_mean", va_ll.mean},   {"val_loglik_std", va_ll.stdev},
                  {"samples", data.rows()},          {"iterations", gmm.trace.iterations},
                  {"reseeds", gmm.trace.reseeds.size()}};
        const std::string key = std::string(pipeline::joint_name(joint)) + "_" +
                                field::role_name(role) +
                                (dyad_id >= 0 ? "_d" + std::to_string(dyad_id) : "");
        summary[key] = e;
      };

      if (cfg.field.per_dyad) {
        std::set<int> dyads;
        for (const auto& s : samples) dyads.insert(s.dyad_id);
        for (int d : dyads) {
          std::vector<field::LatentForceSample> sub;
          for (const auto& s : samples)
            if (s.dyad_id == d && s.role == role) sub.push_back(s);
          fit_one(field::samples_matrix(sub, role), d);
        }
      } else {
        fit_one(field::samples_matrix(samples, role), -1);
      }
    }
  }
  {
    std::ofstream os(dir / "loglik.json");
    os << summary.dump(2) << "\n";
  }
  outputs.push_back((dir / "loglik.json").string());
  write_manifest(dir, "fit-field", cfg,
                 {(fs::path(cfg.out_dir) / "dataset" / "pairs.csv").string()}, outputs);
  std::cout << "fitted " << outputs.size() - 1 << " mixture(s); loglik in "
            << (dir / "loglik.json").string() << "\n";
  return 0;
}

inline int cmd_export_field(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.out_dir) / "field";
  const fs::path models = fs::path(cfg.out_dir) / "models";
  require_artifact(dir, "fit-field");
  std::vector<std::string> outputs, inputs;
  for (pipeline::Joint joint : {pipeline::Joint::hip, pipeline::Joint::knee}) {
    vae::VaeModel model = vae::load_vae(
        (models / (joint == pipeline::Joint::hip ? "vae_hip.dyfw" : "vae_knee.dyfw"))
            .string());
    for (field::FieldRole role : {field::FieldRole::patient, field::FieldRole::therapist}) {
      const std::string gpath = gmm_file(cfg, joint, role);
      require_artifact(gpath, "fit-field");
      inputs.push_back(gpath);
      field::GmmModel gmm = field::read_gmm_json(gpath);
      auto grid = field::sample_grid(gmm.z_min, gmm.z_max, cfg.field.grid);
      auto records = field::build_field(gmm, model, grid);
      const std::string base = std::string("field_") + pipeline::joint_name(joint) + "_" +
                               field::role_name(role);
      const std::string fcsv = (dir / (base + ".csv")).string();
      const std::string scsv = (dir / (base + "_strides.csv")).string();
      field::write_field_csv(fcsv, records);
      field::write_field_strides_csv(scsv, records);
      json g = {{"joint", pipeline::joint_name(joint)},
                {"role", field::role_name(role)},
                {"resolution", cfg.field.grid},
                {"z_min", gmm.z_min},
                {"z_max", gmm.z_max},
                {"records", records.size()}};
      const std::string gjson = (dir / (base + "_grid.json")).string();
      std::ofstream os(gjson);
      os << g.dump(2) << "\n";
      outputs.insert(outputs.end(), {fcsv, scsv, gjson});
    }
  }
  write_manifest(dir, "export-field", cfg, inputs, outputs);
  std::cout << "exported " << outputs.size() / 3 << " quiver-ready field(s) under "
            << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-st / eval-loo
// ---------------------------------------------------------------------------
inline std::vector<st::DyadWindows> build_dyad_windows(const RunConfig& cfg) {
  RecordingSet recs = list_recordings(cfg);
  std::vector<st::DyadWindows> out;
  for (std::size_t i = 0; i < recs.csvs.size(); ++i) {
    synth::DyadRecording rec = synth::read_recording_csv(recs.csvs[i]);
    std::ifstream ms(recs.metas[i]);
    json meta;
    ms >> meta;
    st::DyadWindows dw;
    dw.dyad_id = meta.at("dyad_id").get<int>();
    Matrix xp = st::features_from_frames(rec.patient);
    Matrix xt = st::features_from_frames(rec.therapist);
    dw.all = st::build_windows(xp, xt, dw.dyad_id);
    if (dw.all.empty()) {
      std::cerr << "warning: recording " << recs.csvs[i] << " too short for windows\n";
      continue;
    }
    auto labels = st::split_windows_by_time(dw.all, rec.patient.size(), {0.7, 0.2, 0.1});
    for (std::size_t w = 0; w < dw.all.size(); ++w) {
      if (labels[w] == 0) dw.train.push_back(dw.all[w]);
      if (labels[w] == 1) dw.val.push_back(dw.all[w]);
      if (labels[w] == 2) dw.test.push_back(dw.all[w]);
    }
    out.push_back(std::move(dw));
  }
  require(!out.empty(), "no usable recordings (produce them with `dyad synth-data`)");
  return out;
}

inline json meanstd_json(const st::MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.stdev}, {"count", m.count}};
}

inline st::StTrainConfig st_config(const RunConfig& cfg) {
  st::StTrainConfig tc;
  tc.hidden = cfg.st.hidden;
  tc.epochs = cfg.st.epochs;
  tc.batch = cfg.st.batch;
  tc.lr = cfg.st.lr;
  tc.patience = cfg.st.patience;
  tc.seed = cfg.seed;
  tc.threads = cfg.st.threads;
  return tc;
}

inline int cmd_train_st(const RunConfig& cfg) {
  auto dyads = build_dyad_windows(cfg);
  std::vector<st::WindowSample> train, val, test;
  for (const auto& d : dyads) {
    train.insert(train.end(), d.train.begin(), d.train.end());
    val.insert(val.end(), d.val.begin(), d.val.end());
    test.insert(test.end(), d.test.begin(), d.test.end());
  }
  const fs::path dir = fs::path(cfg.out_dir) / "st";
  fs::create_directories(dir);

  st::TrainedSt trained = st::train_st(train, val, st_config(cfg));
  auto rep = st::evaluate_rmse(trained.model, test);
  auto copy = st::evaluate_baseline_copy(test);
  auto zoh = st::evaluate_baseline_zoh(test);

  const std::string base = (dir / "st_model").string();
  st::save_st(base, trained.heads, trained.norm, cfg.serve.horizon);
  st::write_head_curves_csv((dir / "st_curves.csv").string(), trained.curves);
  {
    json e;
    e["position"] = meanstd_json(rep.position);
    e["velocity"] = meanstd_json(rep.velocity);
    json pf = json::array();
    for (const auto& f : rep.per_feature) pf.push_back(meanstd_json(f));
    e["per_feature"] = pf;
    e["baseline_copy"] = {{"position", meanstd_json(copy.position)},
                          {"velocity", meanstd_json(copy.velocity)}};
    e["baseline_zoh"] = {{"position", meanstd_json(zoh.position)},
                         {"velocity", meanstd_json(zoh.velocity)}};
    e["windows"] = {{"train", train.size()}, {"val", val.size()}, {"test", test.size()}};
    std::ofstream os(dir / "st_eval.json");
    os << e.dump(2) << "\n";
  }
  std::vector<std::string> outputs = {(dir / "st_curves.csv").string(),
                                      (dir / "st_eval.json").string(),
                                      base + ".json"};
  for (std::size_t f = 0; f < st::kFeatures; ++f)
    outputs.push_back(base + ".head" + std::to_string(f) + ".dyfw");
  write_manifest(dir, "train-st", cfg, {}, outputs);
  std::cout << "st test rMSE: position " << rep.position.mean << " +/- "
            << rep.position.stdev << " deg, velocity " << rep.velocity.mean << " +/- "
            << rep.velocity.stdev << " deg/s (copy baseline " << copy.position.mean
            << " deg)\n";
  return 0;
}

inline int cmd_eval_loo(const RunConfig& cfg) {
  auto dyads = build_dyad_windows(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "loo";
  fs::create_directories(dir);
  st::LooReport rep = st::leave_one_out(dyads, st_config(cfg));
  const std::string path = (dir / "loo_report.csv").string();
  st::write_loo_csv(path, rep);
  write_manifest(dir, "eval-loo", cfg, {}, {path});
  for (const auto& r : rep.rows)
    std::cout << "train [" << r.train_set << "] test [" << r.test_set << "]: pos "
              << r.report.position.mean << " +/- " << r.report.position.stdev
              << " deg, vel " << r.report.velocity.mean << " +/- "
              << r.report.velocity.stdev << " deg/s\n";
  return 0;
}

// ---------------------------------------------------------------------------
// serve / bench-latency
// ---------------------------------------------------------------------------
struct ServeCliOptions {
  std::string model;      // st model basename
  std::string input;      // file path or tcp://host:port (tcp://:port listens)
  std::string output;     // file path or empty
  std::string stats_json; // where to write run stats
  double rate = 333.0;
  std::size_t horizon = 25;
  bool paced = false;
};

inline int cmd_serve(const RunConfig& cfg, const ServeCliOptions& opts) {
  std::string base = opts.model.empty()
                         ? (fs::path(cfg.out_dir) / "st" / "st_model").string()
                         : opts.model;
  require_artifact(base + ".json", "train-st");
  st::LoadedSt loaded = st::load_st(base);

  std::unique_ptr<rt::FrameSource> src;
  if (opts.input.rfind("tcp://", 0) == 0) {
    const std::string rest = opts.input.substr(6);
    const auto colon = rest.rfind(':');
    require(colon != std::string::npos, "serve: tcp input must be tcp://host:port");
    const int port = std::stoi(rest.substr(colon + 1));
    src = std::make_unique<rt::TcpFrameSource>(static_cast<std::uint16_t>(port));
  } else if (opts.input.size() > 4 &&
             opts.input.compare(opts.input.size() - 4, 4, ".csv") == 0) {
    src = std::make_unique<rt::VectorFrameSource>(rt::read_frames_csv(opts.input));
  } else {
    require_artifact(opts.input, "synth-data");
    src = std::make_unique<rt::FileFrameSource>(opts.input);
  }
  std::unique_ptr<rt::FrameSink> sink;
  if (opts.output.empty())
    sink = std::make_unique<rt::NullFrameSink>();
  else
    sink = std::make_unique<rt::FileFrameSink>(opts.output);

  rt::ServeOptions so;
  so.rate_hz = opts.rate;
  so.horizon = opts.horizon;
  so.threaded = opts.paced || opts.input.rfind("tcp://", 0) == 0;
  rt::ServeStats stats = rt::serve(*src, *sink, loaded.model, so);

  const json j = stats.to_json();
  std::cout << j.dump(2) << "\n";
  if (!opts.stats_json.empty()) {
    std::ofstream os(opts.stats_json);
    os << j.dump(2) << "\n";
  }
  return 0;
}

struct BenchCliOptions {
  std::string model;
  std::size_t trials = 1000;
  std::size_t warmup = 100;
  std::string stats_json;
};

inline int cmd_bench_latency(const RunConfig& cfg, const BenchCliOptions& opts) {
  st::StModel model;
  std::string provenance;
  const std::string base = opts.model.empty()
                               ? (fs::path(cfg.out_dir) / "st" / "st_model").string()
                               : opts.model;
  if (fs::exists(base + ".json")) {
    model = st::load_st(base).model;
    provenance = base;
  } else {
    // latency depends on the architecture, not the weight values
    Rng rng(cfg.seed);
    std::vector<st::FeatureHead> heads;
    st::FeatureNorm norm;
    for (std::size_t f = 0; f < st::kFeatures; ++f) {
      st::FeatureHead h(f, cfg.st.hidden);
      h.init(rng);
      heads.push_back(h);
      norm.in_std[f] = norm.out_std[f] = 1.0;
    }
    model = st::StModel::combine(heads, norm);
    provenance = "random-initialized (hidden " + std::to_string(cfg.st.hidden) + ")";
  }

  rt::BenchOptions bo;
  bo.trials = opts.trials;
  bo.warmup = opts.warmup;
  bo.seed = cfg.seed;
  rt::LatencyStats s = rt::bench_latency(model, bo);
  json j = s.to_json();
  j["model"] = provenance;
  j["hidden"] = model.hidden;
  std::cout << j.dump(2) << "\n";
  const fs::path dir = fs::path(cfg.out_dir) / "latency";
  fs::create_directories(dir);
  const std::string path =
      opts.stats_json.empty() ? (dir / "latency.json").string() : opts.stats_json;
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------
inline int cmd_report(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  std::ofstream md(out / "report.md");
  if (!md) throw DataError("cannot write " + (out / "report.md").string());
  md << "# Run report\n\n";
  md << "- output dir: `" << cfg.out_dir << "`\n";
  md << "- seed: " << cfg.seed << "\n\n";

  auto read_json = [](const fs::path& p, json& j) {
    std::ifstream is(p);
    if (!is) return false;
    is >> j;
    return true;
  };

  json j;
  if (read_json(out / "dataset" / "preprocess_meta.json", j)) {
    md << "## Dataset\n\n";
    md << "| strides | pairs | train | outliers removed | too short/long |\n";
    md << "|---|---|---|---|---|\n";
    md << "| " << j["strides"] << " | " << j["pairs"] << " | " << j["train"] << " | "
       << j["removed_outliers"] << " | " << j["discarded_duration"] << " |\n\n";
  }
  if (read_json(out / "models" / "vae_meta.json", j)) {
    md << "## Stride reconstruction (validation)\n\n";
    md << "| joint | rMSE (deg) | best epoch |\n|---|---|---|\n";
    for (const char* joint : {"hip", "knee"})
      md << "| " << joint << " | " << j[joint]["val_rmse_deg_mean"].get<double>()
         << " +/- " << j[joint]["val_rmse_deg_std"].get<double>() << " | "
         << j[joint]["best_epoch"] << " |\n";
    md << "\n";
  }
  if (read_json(out / "field" / "loglik.json", j)) {
    md << "## Force-field mixtures\n\n";
    md << "| field | train loglik | val loglik | samples |\n|---|---|---|---|\n";
    for (auto it = j.begin(); it != j.end(); ++it)
      md << "| " << it.key() << " | " << it.value()["train_loglik_mean"].get<double>()
         << " +/- " << it.value()["train_loglik_std"].get<double>() << " | "
         << it.value()["val_loglik_mean"].get<double>() << " +/- "
         << it.value()["val_loglik_std"].get<double>() << " | "
         << it.value()["samples"] << " |\n";
    md << "\n";
  }
  if (read_json(out / "st" / "st_eval.json", j)) {
    md << "## Synthetic therapist (pooled test)\n\n";
    md << "| metric | model | patient-copy | zero-order hold |\n|---|---|---|---|\n";
    md << "| position rMSE (deg) | " << j["position"]["mean"].get<double>() << " +/- "
       << j["position"]["std"].get<double>() << " | "
       << j["baseline_copy"]["position"]["mean"].get<double>() << " | "
       << j["baseline_zoh"]["position"]["mean"].get<double>() << " |\n";
    md << "| velocity rMSE (deg/s) | " << j["velocity"]["mean"].get<double>() << " +/- "
       << j["velocity"]["std"].get<double>() << " | "
       << j["baseline_copy"]["velocity"]["mean"].get<double>() << " | "
       << j["baseline_zoh"]["velocity"]["mean"].get<double>() << " |\n\n";
  }
  if (fs::exists(out / "loo" / "loo_report.csv")) {
    auto t = io::read_csv((out / "loo" / "loo_report.csv").string());
    md << "## Leave-one-out\n\n";
    md << "| train | test | position rMSE (deg) | velocity rMSE (deg/s) |\n|---|---|---|---|\n";
    for (const auto& r : t.rows)
      md << "| " << r[0] << " | " << r[1] << " | " << r[2] << " +/- " << r[3] << " | "
         << r[4] << " +/- " << r[5] << " |\n";
    md << "\n";
  }
  if (read_json(out / "latency" / "latency.json", j)) {
    md << "## Inference latency\n\n";
    md << "| mean (ms) | p50 | p95 | p99 | max | trials |\n|---|---|---|---|---|---|\n";
    md << "| " << j["mean_ms"].get<double>() << " | " << j["p50_ms"].get<double>()
       << " | " << j["p95_ms"].get<double>() << " | " << j["p99_ms"].get<double>()
       << " | " << j["max_ms"].get<double>() << " | " << j["count"] << " |\n\n";
  }
  std::cout << "wrote " << (out / "report.md").string() << "\n";
  return 0;
}

}  // namespace dyad::cli
