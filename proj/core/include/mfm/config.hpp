#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfm/data.hpp"
#include "mfm/modulator.hpp"
#include "mfm/train.hpp"

namespace mfm {

// Experiment file: INI-style sections [data], [model], [modulator], [train],
// [eval]. Unknown sections or keys are errors; parse -> serialize -> parse
// is the identity.
struct ExperimentConfig {
  struct Data {
    std::string kind = "synthetic";  // synthetic | idx
    int64_t classes = 10;
    int64_t dim = 2;                 // synthetic
    double separation = 2.0;         // synthetic
    int64_t n_max = 1000;
    double imbalance_factor = 100.0;
    uint64_t seed = 1;
    std::string meta_strategy = "development";
    int64_t meta_per_class = 20;
    int64_t test_per_class = 500;    // synthetic
    std::string train_images, train_labels;  // idx
    std::string test_images, test_labels;    // idx
    bool operator==(const Data&) const = default;
  } data;

  struct Model {
    std::string arch = "mlp";  // mlp | lenet
    std::vector<int64_t> hidden = {32};
    int64_t input_dim = 0;  // 0 = derive from data
    bool operator==(const Model&) const = default;
  } model;

  struct Mod {
    std::string kind = "network";
    std::string variant = "paper_default";
    int64_t hidden_dim = 100;
    bool use_weight_hash = false;
    int64_t wh_dim_gamma = 256;
    int64_t wh_dim_beta = 256;
    uint64_t wh_seed = 7;
    bool operator==(const Mod&) const = default;
  } modulator;

  struct Train {
    int64_t batch_n = 100;
    int64_t batch_m = 0;
    double alpha = 0.01;
    std::string lr_schedule;  // "epoch:lr,epoch:lr"
    double eta = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int64_t epochs = 50;
    uint64_t seed = 1;
    std::string meta_grad = "exact";
    std::vector<std::string> active_sites;  // empty = last site
    int64_t checkpoint_every = 0;
    bool operator==(const Train&) const = default;
  } train;

  struct Eval {
    std::string test_profile = "uniform";
    double profile_imbalance = 10.0;
    uint64_t profile_seed = 9;
    int64_t seeds = 5;
    bool operator==(const Eval&) const = default;
  } eval;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Applies "section.key=value" overrides (the CLI's --set flags).
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Materialized pieces.
LongTailSpec longtail_spec_of(const ExperimentConfig& cfg);
TrainConfig train_config_of(const ExperimentConfig& cfg);
std::vector<LrPoint> parse_lr_schedule(const std::string& text);
std::string format_lr_schedule(const std::vector<LrPoint>& schedule);

}  // namespace mfm
