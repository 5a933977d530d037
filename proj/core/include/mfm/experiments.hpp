#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfm/data.hpp"
#include "mfm/metrics.hpp"
#include "mfm/modulator.hpp"
#include "mfm/net.hpp"
#include "mfm/train.hpp"

namespace mfm {

struct AblationCell {
  std::vector<std::string> sites;  // empty = baseline row
  ConstraintMode mode = ConstraintMode::full;
  std::vector<double> per_seed_error;
  double mean_error = 0.0;
  double std_error = 0.0;  // population std, matching the multi-seed protocol
  bool failed = false;
  std::string failure;
};

// Trains one model per (site subset x constraint mode) with identical seeds
// and reports balanced-test top-1 error. A failing cell is marked and the
// rest of the matrix still runs.
std::vector<AblationCell> ablation_matrix(const DatasetBundle& bundle,
                                          const ClassifierNet& net,
                                          const TrainConfig& base_cfg,
                                          const std::vector<std::vector<std::string>>& site_subsets,
                                          const std::vector<ConstraintMode>& modes,
                                          int64_t seeds,
                                          int64_t modulator_hidden_dim = 100);

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells);

struct ModulationExportRow {
  int64_t id = 0;
  int32_t label = 0;
  std::vector<double> gamma, beta;
};

// Per-sample (gamma, beta) at one site, computed from each sample's soft
// label under the provided classifier parameters.
std::vector<ModulationExportRow> export_modulation_vectors(
    const ClassifierNet& net, const ParamSet& params, const Modulator& modulator,
    const ParamSet& phi, const Dataset& dataset, const std::string& site_name,
    int64_t batch_size = 256);

void write_modulation_csv(const std::string& path, const std::string& site_name,
                          const std::vector<ModulationExportRow>& rows);

// Mean L2 distance between per-class mean gamma vectors, averaged over
// class pairs; 0 means the modulator ignores class identity.
double class_mean_gamma_separation(const std::vector<ModulationExportRow>& rows,
                                   int64_t num_classes);

struct TransferRow {
  std::string dataset;  // e.g. "target_if10"
  std::string method;   // baseline | mfm | frozen-transfer
  std::vector<double> per_seed_mean_recall;
  std::vector<double> per_seed_error;
  double mean_recall_mean = 0.0, mean_recall_std = 0.0;
  double error_mean = 0.0, error_std = 0.0;
};

// Trains a modulator on the source bundle per seed, then runs
// {baseline, mfm, frozen-transfer} on each target bundle with the same seeds.
std::vector<TransferRow> transfer_experiment(const DatasetBundle& source,
                                             const std::vector<std::pair<std::string, DatasetBundle>>& targets,
                                             const ClassifierNet& net,
                                             const TrainConfig& cfg, int64_t seeds,
                                             int64_t modulator_hidden_dim = 100);

void write_transfer_csv(const std::string& path, const std::vector<TransferRow>& rows);

double mean_of(const std::vector<double>& v);
double population_std(const std::vector<double>& v);

}  // namespace mfm
