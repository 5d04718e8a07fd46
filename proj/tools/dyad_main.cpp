// dyad: synthetic dyad generation, stride pipeline, latent force fields and
// streaming therapist prediction from one binary.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "run_config.hpp"

using namespace dyad;
using namespace dyad::cli;

int main(int argc, char** argv) {
  CLI::App app{"patient-therapist interaction modeling toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cfg;
  app.add_option("--config", config_path, "run configuration JSON")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", cfg.seed, "global seed override");
  auto* out_opt = app.add_option("--out", cfg.out_dir, "output directory override");

  auto* synth = app.add_subcommand("synth-data", "generate synthetic dyad recordings");
  std::size_t dyads_override = 0;
  double duration_override = 0.0;
  std::string mode_override;
  synth->add_option("--dyads", dyads_override, "number of dyads");
  synth->add_option("--duration", duration_override, "seconds per recording");
  synth->add_option("--mode", mode_override, "coupled | transform");

  auto* preprocess =
      app.add_subcommand("preprocess", "segment, clean and split stride datasets");

  auto* train_vae = app.add_subcommand("train-vae", "train the hip and knee stride VAEs");
  std::size_t vae_epochs_override = 0;
  train_vae->add_option("--epochs", vae_epochs_override, "epoch cap");

  auto* fit_field =
      app.add_subcommand("fit-field", "fit latent force-field mixtures per joint/role");
  auto* export_field =
      app.add_subcommand("export-field", "export quiver-ready force-field grids");
  std::size_t grid_override = 0;
  export_field->add_option("--grid", grid_override, "grid resolution per axis");

  auto* train_st = app.add_subcommand("train-st", "train the 8-head therapist predictor");
  std::size_t st_epochs_override = 0, st_hidden_override = 0;
  train_st->add_option("--epochs", st_epochs_override, "epoch cap");
  train_st->add_option("--hidden", st_hidden_override, "LSTM hidden size");

  auto* eval_loo =
      app.add_subcommand("eval-loo", "leave-one-dyad-out cross-validation table");
  eval_loo->add_option("--epochs", st_epochs_override, "epoch cap");
  eval_loo->add_option("--hidden", st_hidden_override, "LSTM hidden size");

  auto* serve_cmd =
      app.add_subcommand("serve", "stream frames through the predictor in real time");
  ServeCliOptions serve_opts;
  serve_cmd->add_option("--model", serve_opts.model, "st model basename");
  serve_cmd->add_option("--input", serve_opts.input,
                        "frame stream: file(.frames/.csv) or tcp://host:port")
      ->required();
  serve_cmd->add_option("--output", serve_opts.output, "prediction frame file");
  serve_cmd->add_option("--rate", serve_opts.rate, "tick rate in Hz");
  serve_cmd->add_option("--horizon", serve_opts.horizon,
                        "output row (25 = now, 49 = +75 ms)");
  serve_cmd->add_option("--stats-json", serve_opts.stats_json, "stats output path");
  serve_cmd->add_flag("--paced", serve_opts.paced, "tick off the wall clock");

  auto* bench = app.add_subcommand("bench-latency", "single-window inference latency");
  BenchCliOptions bench_opts;
  bench->add_option("--model", bench_opts.model, "st model basename");
  bench->add_option("--trials", bench_opts.trials, "measured inferences");
  bench->add_option("--warmup", bench_opts.warmup, "excluded warm-up inferences");
  bench->add_option("--stats-json", bench_opts.stats_json, "stats output path");

  auto* report = app.add_subcommand("report", "render a Markdown run summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints usage/help
    return rc == 0 ? 0 : 1;     // any parse failure is a usage error
  }

  try {
    if (!config_path.empty()) {
      RunConfig from_file = load_config(config_path);
      // flag overrides beat file values
      if (seed_opt->count() == 0) cfg.seed = from_file.seed;
      if (out_opt->count() == 0) cfg.out_dir = from_file.out_dir;
      from_file.seed = cfg.seed;
      from_file.out_dir = cfg.out_dir;
      cfg = from_file;
    }
    if (dyads_override > 0) cfg.synth.dyads = dyads_override;
    if (duration_override > 0) cfg.synth.duration_s = duration_override;
    if (!mode_override.empty()) cfg.synth.mode = mode_override;
    if (vae_epochs_override > 0) cfg.vae.epochs = vae_epochs_override;
    if (st_epochs_override > 0) cfg.st.epochs = st_epochs_override;
    if (st_hidden_override > 0) cfg.st.hidden = st_hidden_override;
    if (grid_override > 0) cfg.field.grid = grid_override;
    if (cfg.synth.mode != "coupled" && cfg.synth.mode != "transform")
      throw UsageError("synth mode must be 'coupled' or 'transform'");

    if (synth->parsed()) return cmd_synth_data(cfg);
    if (preprocess->parsed()) return cmd_preprocess(cfg);
    if (train_vae->parsed()) return cmd_train_vae(cfg);
    if (fit_field->parsed()) return cmd_fit_field(cfg);
    if (export_field->parsed()) return cmd_export_field(cfg);
    if (train_st->parsed()) return cmd_train_st(cfg);
    if (eval_loo->parsed()) return cmd_eval_loo(cfg);
    if (serve_cmd->parsed()) return cmd_serve(cfg, serve_opts);
    if (bench->parsed()) return cmd_bench_latency(cfg, bench_opts);
    if (report->parsed()) return cmd_report(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
