#include "lfsal/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lfsal/error.hpp"
#include "lfsal/evalkit.hpp"
#include "lfsal/jsonio.hpp"
#include "lfsal/synth.hpp"
#include "lfsal/trainer.hpp"

#ifndef LFSAL_VERSION
#define LFSAL_VERSION "0.0.0"
#endif

namespace lfsal {
namespace {

namespace fs = std::filesystem;

// Manifest timestamps are the single documented exception to byte-identical
// reruns; every other output file is deterministic in (inputs, config, seed).
std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

fs::path prepare_out_dir(const std::string& out, bool force) {
  const fs::path dir(out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw ConfigError("output path '" + out + "' exists and is not a directory");
    }
    if (!fs::is_empty(dir) && !force) {
      throw ConfigError("output directory '" + out +
                        "' is not empty; pass --force to write into it");
    }
  } else {
    fs::create_directories(dir);
  }
  return dir;
}

// manifest.json is an append-only array: reruns into the same directory add
// an entry instead of erasing the history.
void append_manifest(const fs::path& dir, nlohmann::json entry) {
  const fs::path path = dir / "manifest.json";
  nlohmann::json all = nlohmann::json::array();
  if (fs::exists(path)) {
    all = load_json_file(path.string());
    if (!all.is_array()) {
      throw IoError("existing manifest '" + path.string() + "' is not an array");
    }
  }
  all.push_back(std::move(entry));
  save_json_file(path.string(), all);
}

nlohmann::json manifest_base(const char* command, const std::string& out,
                             const std::string& started) {
  return {{"command", command},
          {"tool", "lfsal"},
          {"version", LFSAL_VERSION},
          {"out", out},
          {"started", started},
          {"finished", iso_utc_now()}};
}

void save_checkpoint_file(const Checkpoint& ck, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  ck.save(out);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return Checkpoint::load(in);
}

// Refuses analyses that need a ground-truth noise mask when the labels came
// from the contrast/center heuristic: there the "clean vs noisy" difference
// is not a noise process.
void require_corruption_labels(const std::vector<FocalStackSample>& corpus,
                               const std::string& dir) {
  for (const FocalStackSample& s : corpus) {
    if (s.meta.contains("noise") &&
        s.meta.at("noise").value("mode", std::string()) == "heuristic") {
      throw ConfigError("corpus '" + dir + "' carries heuristic labels; this analysis " +
                        "needs corruption-mode labels with a known noise mask");
    }
  }
}

// The most recent training entry recorded in a run directory's manifest.
nlohmann::json last_train_entry(const fs::path& run_dir) {
  const fs::path path = run_dir / "manifest.json";
  if (!fs::exists(path)) {
    throw ConfigError("no manifest.json in run directory '" + run_dir.string() + "'");
  }
  const nlohmann::json all = load_json_file(path.string());
  if (all.is_array()) {
    for (auto it = all.rbegin(); it != all.rend(); ++it) {
      if (it->value("command", std::string()) == "train") return *it;
    }
  }
  throw ConfigError("run directory '" + run_dir.string() +
                    "' has no training entry in its manifest");
}

// Writes run.csv, summary.json, a rolling latest.ckpt, and final.ckpt on
// success; shared by `train` and the delta sweep.
RunRecord run_training(const TrainConfig& cfg,
                       const std::vector<FocalStackSample>& train_set,
                       const std::vector<FocalStackSample>& eval_set,
                       const fs::path& dir, const Checkpoint* resume) {
  Checkpoint final_state;
  const RunRecord record =
      train(train_set, eval_set, cfg, &final_state, resume,
            [&](const Checkpoint& ck) { save_checkpoint_file(ck, dir / "latest.ckpt"); });
  std::ofstream csv(dir / "run.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open '" + (dir / "run.csv").string() + "' for writing");
  write_run_record_csv(csv, record);
  csv.close();
  save_json_file((dir / "summary.json").string(), run_record_summary(record, cfg));
  if (!record.diverged) save_checkpoint_file(final_state, dir / "final.ckpt");
  return record;
}

int cmd_gen(const std::string& config_path, const std::string& out, std::uint64_t seed,
            bool force) {
  const std::string started = iso_utc_now();
  const GenConfig cfg = gen_config_from_json(load_json_file(config_path));
  const fs::path dir = prepare_out_dir(out, force);
  const std::vector<FocalStackSample> corpus = generate_corpus(cfg, seed);
  write_corpus(dir.string(), corpus);

  nlohmann::json entry = manifest_base("gen", out, started);
  entry["config_path"] = config_path;
  entry["config_hash"] = file_hash(config_path);
  entry["config"] = gen_config_to_json(cfg);
  entry["seed"] = seed;
  entry["samples"] = corpus.size();
  append_manifest(dir, entry);

  std::cout << "wrote " << corpus.size() << " samples to " << out << "\n";
  return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& config_path,
              const std::string& corpus_dir, const std::string& eval_dir,
              const std::string& out, const std::string& resume_path, bool force) {
  const std::string started = iso_utc_now();
  cfg.validate();
  const std::vector<FocalStackSample> train_set = read_corpus(corpus_dir);
  const std::vector<FocalStackSample> eval_set =
      eval_dir.empty() ? std::vector<FocalStackSample>{} : read_corpus(eval_dir);
  const fs::path dir = prepare_out_dir(out, force);

  std::optional<Checkpoint> resume;
  if (!resume_path.empty()) resume = load_checkpoint_file(resume_path);
  const RunRecord record =
      run_training(cfg, train_set, eval_set, dir, resume ? &*resume : nullptr);

  nlohmann::json entry = manifest_base("train", out, started);
  entry["config_path"] = config_path;
  entry["config_hash"] = file_hash(config_path);
  entry["config"] = train_config_to_json(cfg);
  entry["corpus"] = corpus_dir;
  entry["eval"] = eval_dir.empty() ? nlohmann::json() : nlohmann::json(eval_dir);
  entry["resume"] = resume_path.empty() ? nlohmann::json() : nlohmann::json(resume_path);
  entry["variant"] = variant_name(cfg.variant);
  entry["seed"] = cfg.seed;
  entry["epochs_recorded"] = record.epochs.size();
  entry["diverged"] = record.diverged;
  append_manifest(dir, entry);

  if (record.diverged) {
    std::cerr << "error: training diverged after " << record.epochs.size()
              << " completed epochs; the last stable checkpoint survives as latest.ckpt\n";
    return 1;
  }
  std::cout << "trained variant '" << variant_name(cfg.variant) << "' for "
            << record.epochs.size() << " epochs into " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_dir,
             const std::string& out, bool save_maps, bool force) {
  const std::string started = iso_utc_now();
  const Checkpoint ck = load_checkpoint_file(ckpt_path);
  const std::vector<FocalStackSample> corpus = read_corpus(corpus_dir);
  if (corpus.empty()) throw ConfigError("corpus '" + corpus_dir + "' is empty");
  const fs::path dir = prepare_out_dir(out, force);

  std::vector<Tensor> maps;
  const MetricReport report =
      evaluate_corpus(ck.params, ck.config, corpus, save_maps ? &maps : nullptr);

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open '" + (dir / "metrics.csv").string() + "' for writing");
  write_metric_csv(csv, report);
  csv.close();

  nlohmann::json summary = metric_report_to_json(report);
  summary["checkpoint"] = ckpt_path;
  summary["corpus"] = corpus_dir;
  save_json_file((dir / "summary.json").string(), summary);

  if (save_maps) {
    fs::create_directories(dir / "maps");
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      render_map(maps[i], (dir / "maps" / (corpus[i].id + ".pgm")).string());
    }
  }

  nlohmann::json entry = manifest_base("eval", out, started);
  entry["checkpoint"] = ckpt_path;
  entry["config_hash"] = fnv1a_hex(train_config_to_json(ck.config).dump());
  entry["corpus"] = corpus_dir;
  entry["samples"] = report.count;
  entry["save_maps"] = save_maps;
  append_manifest(dir, entry);

  std::cout << "evaluated " << report.count << " samples: mean F " << report.mean_f
            << ", mean MAE " << report.mean_mae << "\n";
  return 0;
}

int cmd_analyze_forgetting(const std::string& run_dir, std::string corpus_dir,
                           std::string out, int threshold, bool force) {
  const std::string started = iso_utc_now();
  if (corpus_dir.empty()) {
    corpus_dir = last_train_entry(run_dir).value("corpus", std::string());
    if (corpus_dir.empty()) {
      throw ConfigError("the run manifest does not record a corpus; pass --corpus");
    }
  }
  const fs::path ckpt_path = fs::path(run_dir) / "final.ckpt";
  if (!fs::exists(ckpt_path)) {
    throw ConfigError("run directory '" + run_dir + "' has no final.ckpt");
  }
  const Checkpoint ck = load_checkpoint_file(ckpt_path.string());
  if (!ck.has_forgetting) {
    throw ConfigError("variant '" + std::string(variant_name(ck.config.variant)) +
                      "' logs no forgetting state; train with 'pfm' or 'full'");
  }
  const std::vector<FocalStackSample> corpus = read_corpus(corpus_dir);
  require_corruption_labels(corpus, corpus_dir);

  if (out.empty()) out = (fs::path(run_dir) / "analysis" / "forgetting").string();
  const fs::path dir = prepare_out_dir(out, force);

  const ForgettingReport report = forgetting_analysis(ck.forgetting, corpus, threshold);
  save_json_file((dir / "forgetting.json").string(), forgetting_report_to_json(report));
  {
    std::ofstream f(dir / "event_histogram.csv", std::ios::binary);
    write_event_histogram_csv(f, report);
  }
  {
    std::ofstream f(dir / "first_learn.csv", std::ios::binary);
    write_first_learn_csv(f, report);
  }

  nlohmann::json entry = manifest_base("analyze", out, started);
  entry["analysis"] = "forgetting";
  entry["run"] = run_dir;
  entry["corpus"] = corpus_dir;
  entry["event_threshold"] = threshold;
  append_manifest(dir, entry);

  std::cout << "forgetting analysis: noisy fraction " << report.overall.noisy_fraction
            << ", clean fraction " << report.overall.clean_fraction << " (threshold "
            << threshold << ")\n";
  return 0;
}

int cmd_analyze_correlation(const std::string& run_dir, std::string corpus_dir,
                            std::string out, bool force) {
  const std::string started = iso_utc_now();
  if (corpus_dir.empty()) {
    corpus_dir = last_train_entry(run_dir).value("corpus", std::string());
    if (corpus_dir.empty()) {
      throw ConfigError("the run manifest does not record a corpus; pass --corpus");
    }
  }
  const std::vector<FocalStackSample> corpus = read_corpus(corpus_dir);
  require_corruption_labels(corpus, corpus_dir);

  if (out.empty()) {
    if (run_dir.empty()) throw ConfigError("--out is required when analyzing a bare corpus");
    out = (fs::path(run_dir) / "analysis" / "correlation").string();
  }
  const fs::path dir = prepare_out_dir(out, force);

  const CorrelationData data = cross_scene_correlation(corpus);
  std::ofstream csv(dir / "correlation.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open '" + (dir / "correlation.csv").string() + "' for writing");
  write_correlation_csv(csv, data);
  csv.close();

  nlohmann::json entry = manifest_base("analyze", out, started);
  entry["analysis"] = "correlation";
  entry["run"] = run_dir.empty() ? nlohmann::json() : nlohmann::json(run_dir);
  entry["corpus"] = corpus_dir;
  entry["points"] = data.points.size();
  entry["skipped_no_noise"] = data.skipped_no_noise;
  entry["skipped_no_object"] = data.skipped_no_object;
  append_manifest(dir, entry);

  std::cout << "correlation analysis: " << data.points.size() << " scenes ("
            << data.skipped_no_noise << " without noise, " << data.skipped_no_object
            << " without an object)\n";
  return 0;
}

int cmd_analyze_delta_sweep(const TrainConfig& base, const std::string& config_path,
                            const std::string& corpus_dir, const std::string& eval_dir,
                            const std::string& out, bool force) {
  const std::string started = iso_utc_now();
  base.validate();
  if (eval_dir.empty()) {
    throw ConfigError("the delta sweep needs --eval to rank the margins");
  }
  const std::vector<FocalStackSample> train_set = read_corpus(corpus_dir);
  const std::vector<FocalStackSample> eval_set = read_corpus(eval_dir);
  const fs::path dir = prepare_out_dir(out, force);

  std::ostringstream sweep;
  sweep << "delta,final_val_f,final_val_mae,best_val_f,diverged\n";
  for (int tenth = 1; tenth <= 7; ++tenth) {
    TrainConfig cfg = base;
    cfg.delta = tenth / 10.0;
    char label[16];
    std::snprintf(label, sizeof(label), "delta_%.1f", cfg.delta);
    const fs::path subdir = dir / label;
    fs::create_directories(subdir);

    const std::string sub_started = iso_utc_now();
    const RunRecord record = run_training(cfg, train_set, eval_set, subdir, nullptr);
    nlohmann::json entry = manifest_base("train", subdir.string(), sub_started);
    entry["config_path"] = config_path;
    entry["config"] = train_config_to_json(cfg);
    entry["corpus"] = corpus_dir;
    entry["eval"] = eval_dir;
    entry["variant"] = variant_name(cfg.variant);
    entry["seed"] = cfg.seed;
    entry["epochs_recorded"] = record.epochs.size();
    entry["diverged"] = record.diverged;
    append_manifest(subdir, entry);

    char row[160];
    if (record.diverged || record.epochs.empty()) {
      std::snprintf(row, sizeof(row), "%.17g,nan,nan,nan,1\n", cfg.delta);
    } else {
      double best = record.epochs.front().val_f;
      for (const EpochStats& e : record.epochs) best = std::max(best, e.val_f);
      const EpochStats& last = record.epochs.back();
      std::snprintf(row, sizeof(row), "%.17g,%.17g,%.17g,%.17g,0\n", cfg.delta,
                    last.val_f, last.val_mae, best);
    }
    sweep << row;
    std::cout << label << ": " << (record.diverged ? "diverged" : "done") << "\n";
  }

  std::ofstream csv(dir / "sweep.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open '" + (dir / "sweep.csv").string() + "' for writing");
  csv << sweep.str();
  csv.close();

  nlohmann::json entry = manifest_base("analyze", out, started);
  entry["analysis"] = "delta-sweep";
  entry["config_path"] = config_path;
  entry["config_hash"] = file_hash(config_path);
  entry["corpus"] = corpus_dir;
  entry["eval"] = eval_dir;
  entry["deltas"] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  append_manifest(dir, entry);

  std::cout << "delta sweep complete: " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"light-field saliency: synthetic corpora, noisy-label training, analysis"};
  app.set_version_flag("--version", LFSAL_VERSION);
  app.require_subcommand(1);

  // gen ----------------------------------------------------------------
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 1;
  bool gen_force = false;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic focal-stack corpus");
  gen->add_option("--config", gen_config, "generation config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "corpus output directory")->required();
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_flag("--force", gen_force, "write into a non-empty directory");

  // train --------------------------------------------------------------
  std::string tr_config, tr_corpus, tr_eval, tr_out, tr_resume, tr_variant;
  double tr_delta = 0, tr_alpha = 0, tr_a = 0, tr_lr = 0;
  int tr_ml = 0, tr_epochs = 0;
  std::uint64_t tr_seed = 0;
  bool tr_force = false;
  CLI::App* tr = app.add_subcommand("train", "train a saliency model on noisy labels");
  tr->add_option("--config", tr_config, "training config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--corpus", tr_corpus, "training corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  tr->add_option("--eval", tr_eval, "held-out corpus for per-epoch validation")
      ->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "run output directory")->required();
  const CLI::Option* o_variant =
      tr->add_option("--variant", tr_variant, "baseline|mffo|pfm|ploss|full");
  const CLI::Option* o_delta = tr->add_option("--delta", tr_delta, "agreement margin");
  const CLI::Option* o_alpha = tr->add_option("--alpha", tr_alpha, "penalty strength");
  const CLI::Option* o_a = tr->add_option("--a", tr_a, "confidence descent coefficient");
  const CLI::Option* o_ml = tr->add_option("--ml", tr_ml, "peer group size");
  const CLI::Option* o_epochs = tr->add_option("--epochs", tr_epochs, "training epochs");
  const CLI::Option* o_lr = tr->add_option("--lr", tr_lr, "learning rate");
  const CLI::Option* o_seed = tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--resume", tr_resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  tr->add_flag("--force", tr_force, "write into a non-empty directory");

  // eval ---------------------------------------------------------------
  std::string ev_ckpt, ev_corpus, ev_out;
  bool ev_maps = false, ev_force = false;
  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint against clean masks");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--corpus", ev_corpus, "evaluation corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "report output directory")->required();
  ev->add_flag("--save-maps", ev_maps, "write one saliency PGM per sample");
  ev->add_flag("--force", ev_force, "write into a non-empty directory");

  // analyze ------------------------------------------------------------
  CLI::App* an = app.add_subcommand("analyze", "distribution and correlation analyses");
  an->require_subcommand(1);

  std::string fg_run, fg_corpus, fg_out;
  int fg_threshold = 3;
  bool fg_force = false;
  CLI::App* fg = an->add_subcommand("forgetting", "forgetting-event distributions");
  fg->add_option("--run", fg_run, "training run directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  fg->add_option("--corpus", fg_corpus, "override the corpus recorded in the manifest")
      ->check(CLI::ExistingDirectory);
  fg->add_option("--out", fg_out, "output directory (default <run>/analysis/forgetting)");
  fg->add_option("--threshold", fg_threshold, "forgetting-event cutoff");
  fg->add_flag("--force", fg_force, "write into a non-empty directory");

  std::string co_run, co_corpus, co_out;
  bool co_force = false;
  CLI::App* co = an->add_subcommand("correlation", "cross-scene noise correlation scatter");
  co->add_option("--run", co_run, "training run directory")->check(CLI::ExistingDirectory);
  co->add_option("--corpus", co_corpus, "corpus directory (overrides the manifest)")
      ->check(CLI::ExistingDirectory);
  co->add_option("--out", co_out, "output directory (default <run>/analysis/correlation)");
  co->add_flag("--force", co_force, "write into a non-empty directory");

  std::string ds_config, ds_corpus, ds_eval, ds_out, ds_variant;
  std::uint64_t ds_seed = 0;
  int ds_epochs = 0;
  bool ds_force = false;
  CLI::App* ds = an->add_subcommand("delta-sweep",
                                    "train at delta 0.1..0.7 and tabulate the metrics");
  ds->add_option("--config", ds_config, "base training config (json)")
      ->required()
      ->check(CLI::ExistingFile);
  ds->add_option("--corpus", ds_corpus, "training corpus directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ds->add_option("--eval", ds_eval, "held-out corpus for the ranking metrics")
      ->check(CLI::ExistingDirectory);
  ds->add_option("--out", ds_out, "sweep output directory")->required();
  const CLI::Option* ds_o_variant =
      ds->add_option("--variant", ds_variant, "baseline|mffo|pfm|ploss|full");
  const CLI::Option* ds_o_seed = ds->add_option("--seed", ds_seed, "training seed");
  const CLI::Option* ds_o_epochs = ds->add_option("--epochs", ds_epochs, "training epochs");
  ds->add_flag("--force", ds_force, "write into non-empty directories");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lfsal");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (*gen) return cmd_gen(gen_config, gen_out, gen_seed, gen_force);

    if (*tr) {
      TrainConfig cfg = train_config_from_json(load_json_file(tr_config));
      if (*o_variant) cfg.variant = variant_from_name(tr_variant);
      if (*o_delta) cfg.delta = tr_delta;
      if (*o_alpha) cfg.alpha = tr_alpha;
      if (*o_a) cfg.a = tr_a;
      if (*o_ml) cfg.ml = tr_ml;
      if (*o_epochs) cfg.epochs = tr_epochs;
      if (*o_lr) cfg.lr = tr_lr;
      if (*o_seed) cfg.seed = tr_seed;
      return cmd_train(cfg, tr_config, tr_corpus, tr_eval, tr_out, tr_resume, tr_force);
    }

    if (*ev) return cmd_eval(ev_ckpt, ev_corpus, ev_out, ev_maps, ev_force);

    if (*fg) return cmd_analyze_forgetting(fg_run, fg_corpus, fg_out, fg_threshold, fg_force);

    if (*co) {
      if (co_run.empty() && co_corpus.empty()) {
        throw ConfigError("correlation analysis needs --run or --corpus");
      }
      return cmd_analyze_correlation(co_run, co_corpus, co_out, co_force);
    }

    if (*ds) {
      TrainConfig cfg = train_config_from_json(load_json_file(ds_config));
      if (*ds_o_variant) cfg.variant = variant_from_name(ds_variant);
      if (*ds_o_seed) cfg.seed = ds_seed;
      if (*ds_o_epochs) cfg.epochs = ds_epochs;
      return cmd_analyze_delta_sweep(cfg, ds_config, ds_corpus, ds_eval, ds_out, ds_force);
    }

    throw ConfigError("no command selected");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lfsal
