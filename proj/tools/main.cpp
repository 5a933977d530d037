#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"meta feature modulator: long-tailed training via feature modulation"};
  app.require_subcommand(1);

  mfm::cli::CommonArgs common;
  std::string data_dir, out_dir, mode = "mfm", checkpoint, test_profile;
  std::string sites_arg, modes_arg = "full", source_dir, site, out_csv;
  std::string classifier_ckpt, modulator_ckpt;
  std::vector<std::string> target_dirs;
  int64_t seeds = 0;
  bool dry_run = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "experiment config (INI)");
    cmd->add_option("--set", common.overrides,
                    "override as section.key=value (repeatable; flags win)");
  };

  auto* synth = app.add_subcommand("synthesize", "materialize a dataset bundle");
  add_common(synth);
  synth->add_option("--out", out_dir, "output bundle directory")->required();

  auto* train = app.add_subcommand("train", "train a classifier on a bundle");
  add_common(train);
  train->add_option("--data", data_dir, "bundle directory")->required();
  train->add_option("--out", out_dir, "run output directory");
  train->add_option("--mode", mode, "mfm | baseline | frozen:MODULATOR.mfmm");
  train->add_flag("--dry-run", dry_run, "print the resolved config and exit");

  auto* eval = app.add_subcommand("eval", "evaluate a classifier checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "classifier .mfmc file")->required();
  eval->add_option("--data", data_dir, "bundle directory")->required();
  eval->add_option("--out", out_dir, "report output directory")->required();
  eval->add_option("--test-profile", test_profile, "uniform | test1 | test2");

  auto* ablate = app.add_subcommand("ablate", "site/constraint ablation matrix");
  add_common(ablate);
  ablate->add_option("--data", data_dir, "bundle directory")->required();
  ablate->add_option("--out", out_dir, "output directory")->required();
  ablate->add_option("--sites", sites_arg,
                     "site subsets: ',' within a subset, '|' between subsets");
  ablate->add_option("--modes", modes_arg, "full,beta_zero,gamma_one");
  ablate->add_option("--seeds", seeds, "seeds per cell (default eval.seeds)");

  auto* transfer = app.add_subcommand("transfer", "modulator transfer comparison");
  add_common(transfer);
  transfer->add_option("--source-data", source_dir, "source bundle")->required();
  transfer->add_option("--target-data", target_dirs, "target bundles")->required();
  transfer->add_option("--out", out_dir, "output directory")->required();
  transfer->add_option("--seeds", seeds, "seeds (default eval.seeds)");

  auto* exp = app.add_subcommand("export-mods", "per-sample gamma/beta vectors");
  add_common(exp);
  exp->add_option("--classifier", classifier_ckpt, "classifier .mfmc")->required();
  exp->add_option("--modulator", modulator_ckpt, "modulator .mfmm")->required();
  exp->add_option("--data", data_dir, "bundle directory")->required();
  exp->add_option("--site", site, "modulation site name")->required();
  exp->add_option("--out", out_csv, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) return mfm::cli::cmd_synthesize(common, out_dir);
  if (train->parsed()) {
    if (!dry_run && out_dir.empty()) {
      std::cerr << "error: --out is required unless --dry-run is given\n";
      return 1;
    }
    return mfm::cli::cmd_train(common, data_dir, out_dir, mode, dry_run);
  }
  if (eval->parsed()) {
    return mfm::cli::cmd_eval(common, checkpoint, data_dir, out_dir, test_profile);
  }
  if (ablate->parsed()) {
    return mfm::cli::cmd_ablate(common, data_dir, out_dir, sites_arg, modes_arg, seeds);
  }
  if (transfer->parsed()) {
    return mfm::cli::cmd_transfer(common, source_dir, target_dirs, out_dir, seeds);
  }
  if (exp->parsed()) {
    return mfm::cli::cmd_export_mods(common, classifier_ckpt, modulator_ckpt, data_dir,
                                     site, out_csv);
  }
  return 1;
}
