// gml: command-line front end.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gml/gml.hpp"

namespace fs = std::filesystem;
using namespace gml;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_globals(CLI::App* cmd, Globals& g, bool out_required = true) {
  cmd->add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", g.seed, "random seed");
  auto* out = cmd->add_option("--out", g.out, "output directory");
  if (out_required) out->required();
}

harness::RunConfig run_config(const Globals& g) {
  return g.config.empty() ? harness::RunConfig{} : harness::load_run_config(g.config);
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  require(!ec, Errc::io_failure, "cannot create " + p.string() + ": " + ec.message());
}

std::vector<net::Checkpoint> load_checkpoints(const std::vector<std::string>& args) {
  std::vector<fs::path> paths;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".gmlckpt") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      require(!found.empty(), Errc::missing_file, "no .gmlckpt files in " + a);
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      require(fs::exists(a), Errc::missing_file, "no such checkpoint " + a);
      paths.emplace_back(a);
    }
  }
  std::vector<net::Checkpoint> cks;
  for (const auto& p : paths) {
    try {
      cks.push_back(net::load_checkpoint(p));
    } catch (const Error& e) {
      throw Error(e.code(), p.string() + ": " + e.what());
    }
  }
  for (const auto& ck : cks) {
    require(ck.family == cks[0].family, Errc::invalid_argument, "checkpoints disagree on the loss family");
    require(ck.frontend == cks[0].frontend, Errc::invalid_argument, "checkpoints disagree on the gammatone config");
  }
  return cks;
}

int cmd_synth(const Globals& g, std::optional<int> excerpts, std::optional<int> listeners) {
  auto cfg = run_config(g);
  if (g.seed) cfg.synthetic.seed = *g.seed;
  if (excerpts) cfg.synthetic.n_excerpts = *excerpts;
  if (listeners) cfg.synthetic.listeners = *listeners;
  const auto ds = harness::generate_synthetic(cfg.synthetic, g.out);
  std::cerr << "wrote " << ds.manifest.entries.size() << " conditions, " << ds.manifest.rating_count()
            << " ratings to " << g.out << "\n";
  return 0;
}

int cmd_featurize(const Globals& g, const std::string& manifest, unsigned threads) {
  const auto cfg = run_config(g);
  const auto m = harness::load_manifest(manifest);
  const auto stats = harness::featurize(m, cfg.gammatone, g.out, threads);
  std::cerr << "featurized " << m.entries.size() << " pairs (" << stats.computed << " computed, " << stats.reused
            << " cached)\n";
  return 0;
}

struct TrainOverrides {
  std::string family, augmentation;
  std::optional<int> epochs, folds;
  std::optional<double> learning_rate;
  bool provenance = false;
};

int cmd_train(const Globals& g, const std::string& manifest, const std::string& features, const TrainOverrides& o) {
  auto cfg = run_config(g);
  if (g.seed) {
    cfg.train.seed = *g.seed;
    cfg.backbone.seed = *g.seed;
  }
  if (!o.family.empty()) cfg.train.loss_family = parse_family(o.family);
  if (!o.augmentation.empty()) cfg.train.augmentation = parse_augmentation(o.augmentation);
  if (o.epochs) cfg.train.epochs_per_fold = *o.epochs;
  if (o.folds) cfg.train.folds = *o.folds;
  if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
  cfg.train.validate();

  const GammatoneConfig frontend = harness::load_feature_frontend(features);
  if (!g.config.empty() && json::parse(read_file(g.config)).contains("gammatone"))
    require(frontend == cfg.gammatone, Errc::invalid_config,
            "features in " + features + " were computed with a different gammatone config; re-run featurize");
  cfg.gammatone = frontend;

  const auto m = harness::load_manifest(manifest);
  const auto items = harness::load_rated_items(m, features);
  net::TrainHooks hooks;
  hooks.record_provenance = o.provenance && cfg.train.augmentation != Augmentation::none;
  hooks.on_epoch = [](const net::LossRecord& r) {
    if (r.split == "validation")
      std::cerr << "fold " << r.fold << " epoch " << r.epoch << " validation nll " << r.nll << "\n";
  };
  const auto result = net::train(items, cfg.train, cfg.backbone, frontend, hooks);

  make_dir(g.out);
  for (const auto& ck : result.checkpoints)
    net::save_checkpoint(fs::path(g.out) / ("fold_" + std::to_string(ck.meta.fold) + ".gmlckpt"), ck);
  write_file_atomic(fs::path(g.out) / "loss.csv", harness::format_loss_csv(result.curve));
  if (hooks.record_provenance)
    write_file_atomic(fs::path(g.out) / "provenance.csv", harness::format_provenance_csv(result.provenance));
  write_file_atomic(fs::path(g.out) / "config.json", harness::to_json(cfg).dump(2) + "\n");

  const auto oof = net::out_of_fold_predictions(result, items);
  std::vector<ConditionPrediction> preds;
  for (std::size_t i = 0; i < items.size(); ++i)
    preds.push_back({items[i].excerpt_id + "/" + items[i].condition_id, oof[i]});
  write_file_atomic(fs::path(g.out) / "oof_predictions.csv", harness::format_predictions_csv(preds));
  return 0;
}

int cmd_predict(const Globals& g, const std::vector<std::string>& checkpoints, const std::string& features,
                const std::string& manifest) {
  const auto cks = load_checkpoints(checkpoints);
  std::vector<ConditionPrediction> preds;
  if (!features.empty()) {
    const GammatoneConfig frontend = harness::load_feature_frontend(features);
    require(frontend == cks[0].frontend, Errc::invalid_config,
            "features in " + features + " were computed with a different gammatone config than the checkpoint");
    for (const auto& f : harness::load_feature_index(features)) {
      const ModelInput in = read_spectrogram_cache(fs::path(features) / f.cache_file);
      preds.push_back({f.excerpt_id + "/" + f.condition_id, net::predict_ensemble(cks, in)});
    }
  } else {
    const auto m = harness::load_manifest(manifest);
    for (const auto& e : m.entries) {
      const ModelInput in = harness::input_for_checkpoint(
          load_audio(m.resolve(e.ref_path)), load_audio(m.resolve(e.cod_path)), cks[0].frontend,
          static_cast<std::size_t>(cks[0].backbone.input_frames), e.excerpt_id);
      preds.push_back({e.key(), net::predict_ensemble(cks, in)});
    }
  }
  make_dir(g.out);
  write_file_atomic(fs::path(g.out) / "predictions.csv", harness::format_predictions_csv(preds));
  std::cerr << "wrote " << preds.size() << " predictions from " << cks.size() << " checkpoint(s)\n";
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& predictions, std::size_t n) {
  const auto preds = harness::parse_predictions_csv(read_file(predictions), predictions);
  make_dir(g.out);
  write_file_atomic(fs::path(g.out) / "simulated.csv", harness::simulate_panels_csv(preds, n, g.seed.value_or(0)));
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& predictions, const std::string& subjective,
                 const std::string& truth, const std::string& name, int listeners) {
  const auto preds = harness::parse_predictions_csv(read_file(predictions), predictions);
  EvalReport rep;
  if (!subjective.empty()) {
    const auto panels = harness::parse_subjective_csv(read_file(subjective), subjective);
    rep.test_sets.push_back(evaluate(name, preds, panels));
  } else {
    const auto t = harness::load_truth(truth);
    rep.test_sets.push_back(harness::evaluate_against_truth(name, preds, t, listeners));
  }
  make_dir(g.out);
  write_file_atomic(fs::path(g.out) / "report.json", report_to_json(rep).dump(2) + "\n");
  const std::string table = format_report_table(rep);
  write_file_atomic(fs::path(g.out) / "report.txt", table);
  std::cout << table;
  return 0;
}

int cmd_report(const Globals& g, const std::string& report) {
  EvalReport rep;
  try {
    rep = report_from_json(json::parse(read_file(report)));
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, report + ": " + e.what());
  }
  make_dir(g.out);
  write_file_atomic(fs::path(g.out) / "report.txt", format_report_table(rep));
  for (const auto& t : rep.test_sets) {
    std::string stem;
    for (char c : t.name) stem += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    write_file_atomic(fs::path(g.out) / (stem.empty() ? "scatter.svg" : stem + ".svg"), render_scatter_svg(t));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generative machine listener toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gml 0.1.0");
  Globals g;

  auto* synth = app.add_subcommand("synth", "generate the synthetic oracle dataset");
  add_globals(synth, g);
  std::optional<int> excerpts, listeners;
  synth->add_option("--excerpts", excerpts, "number of excerpts")->check(CLI::PositiveNumber);
  synth->add_option("--listeners", listeners, "listeners per condition")->check(CLI::PositiveNumber);

  auto* feat = app.add_subcommand("featurize", "compute the spectrogram cache for a manifest");
  add_globals(feat, g);
  std::string manifest;
  unsigned threads = std::thread::hardware_concurrency();
  feat->add_option("--manifest", manifest, "manifest CSV")->required()->check(CLI::ExistingFile);
  feat->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "k-fold training from a feature cache");
  add_globals(tr, g);
  std::string features;
  TrainOverrides ov;
  tr->add_option("--manifest", manifest, "manifest CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--features", features, "featurize output directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--family", ov.family, "logistic or gaussian");
  tr->add_option("--augmentation", ov.augmentation, "none, cutmix or mixup");
  tr->add_option("--epochs", ov.epochs, "epochs per fold")->check(CLI::PositiveNumber);
  tr->add_option("--folds", ov.folds, "number of folds");
  tr->add_option("--learning-rate", ov.learning_rate, "Adam step size");
  tr->add_flag("--provenance", ov.provenance, "write provenance.csv for mixed batches");

  auto* pr = app.add_subcommand("predict", "ensemble predictions for every pair");
  add_globals(pr, g);
  std::vector<std::string> checkpoints;
  std::string pfeatures, pmanifest;
  pr->add_option("--checkpoint", checkpoints, "checkpoint files or directories")->required();
  auto* pf = pr->add_option("--features", pfeatures, "featurize output directory")->check(CLI::ExistingDirectory);
  auto* pm = pr->add_option("--manifest", pmanifest, "manifest CSV")->check(CLI::ExistingFile);
  pf->excludes(pm);
  pm->excludes(pf);

  auto* sim = app.add_subcommand("simulate", "sample listener panels from predictions");
  add_globals(sim, g);
  std::string predictions;
  std::size_t n = 0;
  sim->add_option("--predictions", predictions, "predictions CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--n", n, "listeners per condition")->required()->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("evaluate", "metrics of predictions against subjective scores");
  add_globals(ev, g);
  std::string subjective, truth, name = "test";
  int truth_listeners = 20;
  ev->add_option("--predictions", predictions, "predictions CSV")->required()->check(CLI::ExistingFile);
  auto* es = ev->add_option("--subjective", subjective, "subjective scores CSV")->check(CLI::ExistingFile);
  auto* et = ev->add_option("--truth", truth, "synthetic truth CSV")->check(CLI::ExistingFile);
  es->excludes(et);
  et->excludes(es);
  ev->add_option("--name", name, "test set name");
  ev->add_option("--listeners", truth_listeners, "panel size assumed for --truth intervals")->check(CLI::Range(2, 100000));

  auto* rp = app.add_subcommand("report", "table and SVG scatter from a report JSON");
  add_globals(rp, g);
  std::string report;
  rp->add_option("--report", report, "report JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) return cmd_synth(g, excerpts, listeners);
    if (*feat) return cmd_featurize(g, manifest, threads);
    if (*tr) return cmd_train(g, manifest, features, ov);
    if (*pr) {
      require(!pfeatures.empty() || !pmanifest.empty(), Errc::invalid_argument,
              "predict needs one of --features or --manifest");
      return cmd_predict(g, checkpoints, pfeatures, pmanifest);
    }
    if (*sim) return cmd_simulate(g, predictions, n);
    if (*ev) {
      require(!subjective.empty() || !truth.empty(), Errc::invalid_argument,
              "evaluate needs one of --subjective or --truth");
      return cmd_evaluate(g, predictions, subjective, truth, name, truth_listeners);
    }
    if (*rp) return cmd_report(g, report);
  } catch (const Error& e) {
    std::cerr << "gml: error: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const json::exception& e) {
    std::cerr << "gml: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gml: runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
