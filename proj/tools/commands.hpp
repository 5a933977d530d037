#pragma once

#include <string>
#include <vector>

namespace mfm::cli {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value, flags win
};

int cmd_synthesize(const CommonArgs& args, const std::string& out_dir);

// mode: "mfm", "baseline" or "frozen:<modulator.mfmm>"
int cmd_train(const CommonArgs& args, const std::string& data_dir,
              const std::string& out_dir, const std::string& mode, bool dry_run);

int cmd_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& data_dir, const std::string& out_dir,
             const std::string& test_profile);

int cmd_ablate(const CommonArgs& args, const std::string& data_dir,
               const std::string& out_dir, const std::string& sites_arg,
               const std::string& modes_arg, int64_t seeds);

int cmd_transfer(const CommonArgs& args, const std::string& source_dir,
                 const std::vector<std::string>& target_dirs,
                 const std::string& out_dir, int64_t seeds);

int cmd_export_mods(const CommonArgs& args, const std::string& classifier_ckpt,
                    const std::string& modulator_ckpt, const std::string& data_dir,
                    const std::string& site, const std::string& out_csv);

}  // namespace mfm::cli
