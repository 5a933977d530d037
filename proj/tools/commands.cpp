#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mfm/config.hpp"
#include "mfm/data.hpp"
#include "mfm/experiments.hpp"
#include "mfm/metrics.hpp"
#include "mfm/modulator.hpp"
#include "mfm/net.hpp"
#include "mfm/random.hpp"
#include "mfm/train.hpp"

namespace fs = std::filesystem;

namespace mfm::cli {

namespace {

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? ExperimentConfig{} : load_config(args.config_path);
  for (const auto& ov : args.overrides) apply_override(cfg, ov);
  return cfg;
}

void log_resolved_config(const std::string& out_dir, const ExperimentConfig& cfg) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "config.ini");
  if (!out) throw IoError("cannot write resolved config in " + out_dir);
  out << serialize_config(cfg);
  if (!out) throw IoError("resolved config write failed in " + out_dir);
}

DatasetBundle build_bundle(const ExperimentConfig& cfg) {
  if (cfg.data.kind == "synthetic") {
    SynthOptions opts;
    opts.meta_strategy = meta_strategy_from_string(cfg.data.meta_strategy);
    opts.meta_per_class = cfg.data.meta_per_class;
    opts.test_per_class = cfg.data.test_per_class;
    return make_synthetic_gaussians(cfg.data.classes, cfg.data.dim,
                                    longtail_spec_of(cfg), cfg.data.separation, opts);
  }
  // idx: long-tail the train files, keep the test files as provided.
  Dataset source = load_idx(cfg.data.train_images, cfg.data.train_labels);
  if (source.num_classes != cfg.data.classes) {
    throw DataError("idx train set has " + std::to_string(source.num_classes) +
                    " classes, config says " + std::to_string(cfg.data.classes));
  }
  DatasetBundle bundle;
  Dataset train = build_longtail(source, longtail_spec_of(cfg));
  auto [train2, meta] =
      extract_meta(train, meta_strategy_from_string(cfg.data.meta_strategy),
                   cfg.data.meta_per_class, derive_seed(cfg.data.seed, "meta"));
  bundle.train = std::move(train2);
  bundle.meta = std::move(meta);
  bundle.test = load_idx(cfg.data.test_images, cfg.data.test_labels);
  bundle.provenance.spec = longtail_spec_of(cfg);
  bundle.provenance.source = "idx:" + cfg.data.train_images;
  bundle.provenance.meta_strategy = meta_strategy_from_string(cfg.data.meta_strategy);
  bundle.provenance.meta_per_class = cfg.data.meta_per_class;
  bundle.provenance.train_counts = bundle.train.class_histogram();
  bundle.provenance.meta_counts = bundle.meta.class_histogram();
  bundle.provenance.test_counts = bundle.test.class_histogram();
  return bundle;
}

ClassifierNet build_net(const ExperimentConfig& cfg, const DatasetBundle& bundle) {
  if (cfg.model.arch == "lenet") {
    if (bundle.train.sample_shape != Shape{1, 28, 28}) {
      throw ConfigError("lenet expects 1x28x28 samples, dataset has " +
                        shape_str(bundle.train.sample_shape));
    }
    return build_lenet(bundle.train.num_classes);
  }
  const int64_t input_dim =
      cfg.model.input_dim > 0 ? cfg.model.input_dim : bundle.train.sample_numel();
  if (input_dim != bundle.train.sample_numel()) {
    throw ConfigError("mlp input_dim " + std::to_string(input_dim) +
                      " does not match dataset sample size " +
                      std::to_string(bundle.train.sample_numel()));
  }
  return build_mlp(input_dim, cfg.model.hidden, bundle.train.num_classes);
}

Modulator build_modulator(const ExperimentConfig& cfg, const ClassifierNet& net,
                          const TrainConfig& tcfg, const DatasetBundle& bundle) {
  ModulatorSpec spec;
  spec.kind = modulator_kind_from_string(cfg.modulator.kind);
  spec.variant = modulator_variant_from_string(cfg.modulator.variant);
  spec.input_dim = net.num_classes();
  spec.hidden_dim = cfg.modulator.hidden_dim;
  spec.sites = resolve_active_sites(net, tcfg.active_sites);
  spec.table_rows = bundle.train.size();
  if (cfg.modulator.use_weight_hash) {
    int64_t total = 0;
    for (const auto& s : spec.sites) total += s.width;
    spec.wh = WeightHashSpec::make(cfg.modulator.wh_dim_gamma, cfg.modulator.wh_dim_beta,
                                   total, total, cfg.modulator.wh_seed);
  }
  return Modulator(std::move(spec));
}

// Exit contract: 0 only when the artifact was fully written; on failure any
// partial output is renamed to <path>.failed.
int run_guarded(const std::string& out_path, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!out_path.empty() && fs::exists(out_path)) {
      std::error_code ec;
      const std::string failed = out_path + ".failed";
      fs::remove_all(failed, ec);
      fs::rename(out_path, failed, ec);
      if (!ec) std::cerr << "partial output moved to " << failed << "\n";
    }
    return 1;
  }
}

}  // namespace

int cmd_synthesize(const CommonArgs& args, const std::string& out_dir) {
  return run_guarded(out_dir, [&] {
    ExperimentConfig cfg = resolve_config(args);
    DatasetBundle bundle = build_bundle(cfg);
    save_bundle(out_dir, bundle);
    log_resolved_config(out_dir, cfg);
    std::cout << "bundle written to " << out_dir << " (train " << bundle.train.size()
              << ", meta " << bundle.meta.size() << ", test " << bundle.test.size()
              << ")\n";
  });
}

int cmd_train(const CommonArgs& args, const std::string& data_dir,
              const std::string& out_dir, const std::string& mode, bool dry_run) {
  if (dry_run) {
    try {
      ExperimentConfig cfg = resolve_config(args);
      std::cout << serialize_config(cfg);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return run_guarded(out_dir, [&] {
    ExperimentConfig cfg = resolve_config(args);
    DatasetBundle bundle = load_bundle(data_dir);
    ClassifierNet net = build_net(cfg, bundle);
    TrainConfig tcfg = train_config_of(cfg);
    tcfg.out_dir = out_dir;
    log_resolved_config(out_dir, cfg);

    ParamSet w0 = net.init_params(derive_seed(tcfg.seed, "net_init"));
    TrainResult result;
    if (mode == "baseline") {
      result = train_baseline(bundle, net, std::move(w0), tcfg);
    } else if (mode == "mfm") {
      Modulator mod = build_modulator(cfg, net, tcfg, bundle);
      ParamSet phi0 = mod.init_params(derive_seed(tcfg.seed, "mod_init"));
      result = train(bundle, net, mod, std::move(w0), std::move(phi0), tcfg);
    } else if (mode.rfind("frozen:", 0) == 0) {
      auto [mod, phi] = load_modulator(mode.substr(7));
      result = train_with_frozen_modulator(bundle, net, mod, std::move(phi),
                                           std::move(w0), tcfg);
    } else {
      throw ConfigError("unknown --mode '" + mode +
                        "' (expected mfm, baseline or frozen:PATH)");
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << result.mode << " training finished: " << result.log.size()
              << " steps in " << result.wall_seconds << " s, artifacts in " << out_dir
              << "\n";
  });
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir,
             const std::string& test_profile) {
  return run_guarded(out_dir, [&] {
    ExperimentConfig cfg = resolve_config(args);
    if (!test_profile.empty()) cfg.eval.test_profile = test_profile;
    auto [net, params] = load_classifier(checkpoint);
    DatasetBundle bundle = load_bundle(data_dir);

    Dataset test = bundle.test;
    const TestKind kind = test_kind_from_string(cfg.eval.test_profile);
    if (kind != TestKind::uniform) {
      auto hist = bundle.test.class_histogram();
      TestProfile profile;
      profile.kind = kind;
      profile.imbalance_factor = cfg.eval.profile_imbalance;
      profile.n_max = *std::min_element(hist.begin(), hist.end());
      profile.seed = cfg.eval.profile_seed;
      test = build_test_set(bundle.test, profile);
    }

    MetricsReport report = evaluate(net, params, test);
    fs::create_directories(out_dir);
    write_report_csv((fs::path(out_dir) / "report.csv").string(), report);
    write_confusion_csv((fs::path(out_dir) / "confusion.csv").string(), report);
    log_resolved_config(out_dir, cfg);
    std::cout << "profile " << cfg.eval.test_profile << ": top-1 error "
              << report.top1_error << ", mean recall " << report.mean_recall << "\n";
  });
}

int cmd_ablate(const CommonArgs& args, const std::string& data_dir,
               const std::string& out_dir, const std::string& sites_arg,
               const std::string& modes_arg, int64_t seeds) {
  return run_guarded(out_dir, [&] {
    ExperimentConfig cfg = resolve_config(args);
    DatasetBundle bundle = load_bundle(data_dir);
    ClassifierNet net = build_net(cfg, bundle);
    TrainConfig tcfg = train_config_of(cfg);
    if (seeds <= 0) seeds = cfg.eval.seeds;

    // Subsets split by '|', site names within a subset by ','. The baseline
    // row (no sites) is always included first.
    std::vector<std::vector<std::string>> subsets{{}};
    std::string cur;
    auto flush = [&] {
      std::vector<std::string> sites;
      std::string name;
      for (char ch : cur + ",") {
        if (ch == ',') {
          if (!name.empty()) sites.push_back(name);
          name.clear();
        } else if (!isspace(static_cast<unsigned char>(ch))) {
          name += ch;
        }
      }
      if (!sites.empty()) subsets.push_back(std::move(sites));
      cur.clear();
    };
    for (char ch : sites_arg) {
      if (ch == '|') {
        flush();
      } else {
        cur += ch;
      }
    }
    flush();

    std::vector<ConstraintMode> modes;
    for (const auto& m : [&] {
           std::vector<std::string> out;
           std::string name;
           for (char ch : modes_arg + ",") {
             if (ch == ',') {
               if (!name.empty()) out.push_back(name);
               name.clear();
             } else if (!isspace(static_cast<unsigned char>(ch))) {
               name += ch;
             }
           }
           return out;
         }()) {
      modes.push_back(constraint_mode_from_string(m));
    }
    if (modes.empty()) modes.push_back(ConstraintMode::full);

    auto cells = ablation_matrix(bundle, net, tcfg, subsets, modes, seeds,
                                 cfg.modulator.hidden_dim);
    fs::create_directories(out_dir);
    write_ablation_csv((fs::path(out_dir) / "ablation.csv").string(), cells);
    log_resolved_config(out_dir, cfg);
    for (const auto& cell : cells) {
      std::string sites = cell.sites.empty() ? "(none)" : "";
      for (const auto& s : cell.sites) sites += (sites.empty() ? "" : ";") + s;
      std::cout << sites << " [" << to_string(cell.mode) << "]: ";
      if (cell.failed) {
        std::cout << "FAILED " << cell.failure << "\n";
      } else {
        std::cout << "error " << cell.mean_error << " +- " << cell.std_error << "\n";
      }
    }
  });
}

int cmd_transfer(const CommonArgs& args, const std::string& source_dir,
                 const std::vector<std::string>& target_dirs,
                 const std::string& out_dir, int64_t seeds) {
  return run_guarded(out_dir, [&] {
    ExperimentConfig cfg = resolve_config(args);
    DatasetBundle source = load_bundle(source_dir);
    std::vector<std::pair<std::string, DatasetBundle>> targets;
    for (const auto& dir : target_dirs) {
      targets.emplace_back(fs::path(dir).filename().string(), load_bundle(dir));
    }
    ClassifierNet net = build_net(cfg, source);
    TrainConfig tcfg = train_config_of(cfg);
    if (seeds <= 0) seeds = cfg.eval.seeds;

    auto rows = transfer_experiment(source, targets, net, tcfg, seeds,
                                    cfg.modulator.hidden_dim);
    fs::create_directories(out_dir);
    write_transfer_csv((fs::path(out_dir) / "transfer.csv").string(), rows);
    log_resolved_config(out_dir, cfg);
    for (const auto& r : rows) {
      std::cout << r.dataset << " / " << r.method << ": error " << r.error_mean
                << " +- " << r.error_std << ", mean recall " << r.mean_recall_mean
                << "\n";
    }
  });
}

int cmd_export_mods(const CommonArgs& args, const std::string& classifier_ckpt,
                    const std::string& modulator_ckpt, const std::string& data_dir,
                    const std::string& site, const std::string& out_csv) {
  return run_guarded(out_csv, [&] {
    (void)resolve_config(args);  // validates overrides even though none apply
    auto [net, params] = load_classifier(classifier_ckpt);
    auto [mod, phi] = load_modulator(modulator_ckpt);
    DatasetBundle bundle = load_bundle(data_dir);
    auto rows = export_modulation_vectors(net, params, mod, phi, bundle.test, site);
    write_modulation_csv(out_csv, site, rows);
    std::cout << rows.size() << " rows written to " << out_csv << " (class-mean gamma "
              << "separation " << class_mean_gamma_separation(rows, net.num_classes())
              << ")\n";
  });
}

}  // namespace mfm::cli
