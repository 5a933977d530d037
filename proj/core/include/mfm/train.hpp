#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfm/data.hpp"
#include "mfm/modulator.hpp"
#include "mfm/net.hpp"
#include "mfm/tensor.hpp"

namespace mfm {

enum class MetaGradMode { exact, first_order };
const char* to_string(MetaGradMode m);
MetaGradMode meta_grad_mode_from_string(const std::string& s);

struct LrPoint {
  int64_t epoch = 0;  // 0-based epoch at which this rate takes effect
  double lr = 0.0;
};

struct TrainConfig {
  int64_t batch_n = 100;
  // 0 derives c * min(10, smallest per-class meta count).
  int64_t batch_m = 0;
  double alpha = 0.01;
  std::vector<LrPoint> lr_schedule;
  double eta = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int64_t epochs = 50;
  uint64_t seed = 0;
  MetaGradMode meta_grad = MetaGradMode::exact;
  std::vector<std::string> active_sites;  // empty -> the net's last site
  ConstraintMode constraint = ConstraintMode::full;
  int64_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  std::string out_dir;           // empty = keep results in memory only
};

struct StepLogRow {
  int64_t step = 0;
  int64_t epoch = 0;
  double train_loss = 0.0;
  double meta_loss = 0.0;  // NaN when the step had no meta objective
  double lr = 0.0;
};

struct TrainResult {
  std::string mode;  // mfm | baseline | frozen
  ParamSet classifier;
  ParamSet phi;  // empty for baseline
  std::vector<StepLogRow> log;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

// Momentum buffers of the real optimizer (Eq.-7 side); plain value state.
struct OptState {
  ParamSet velocity;
};

struct TrainBatch {
  Tensor x;
  Tensor targets;              // one-hot [n, c]
  std::vector<int64_t> rows;   // row indices into the training split
};

std::vector<SiteSpec> resolve_active_sites(const ClassifierNet& net,
                                           const std::vector<std::string>& names);

// One online bilevel step:
//   soft labels from the unmodulated pass (stop-gradient),
//   modulated training loss, differentiable virtual SGD step of w,
//   modulator update from the meta loss at the virtual parameters,
//   then the real momentum/weight-decay update of w with the fresh
//   modulation held constant.
// `modulator == nullptr` degrades to a plain ERM step; `update_phi == false`
// drives modulation from the frozen phi without the meta machinery.
// Throws TrainError (with losses and gradient norms) on non-finite loss.
StepLogRow train_step(const ClassifierNet& net, ParamSet& w, const Modulator* modulator,
                      ParamSet& phi, const TrainBatch& train_batch,
                      const TrainBatch& meta_batch, const TrainConfig& cfg, double lr,
                      OptState& opt, bool update_phi);

// Meta objective as a pure function of phi (no state updates): the meta-set
// cross-entropy at w - alpha * grad_w(modulated train loss). Used by the
// finite-difference oracles.
double bilevel_meta_loss(const ClassifierNet& net, const ParamSet& w,
                         const Modulator& modulator, const ParamSet& phi,
                         const TrainBatch& train_batch, const TrainBatch& meta_batch,
                         double alpha, ConstraintMode mode = ConstraintMode::full);

// Exact gradient of the same objective wrt phi, through the virtual step.
ParamSet bilevel_meta_grad(const ClassifierNet& net, const ParamSet& w,
                           const Modulator& modulator, const ParamSet& phi,
                           const TrainBatch& train_batch, const TrainBatch& meta_batch,
                           double alpha, ConstraintMode mode = ConstraintMode::full);

TrainResult train(const DatasetBundle& data, const ClassifierNet& net,
                  const Modulator& modulator, ParamSet w0, ParamSet phi0,
                  const TrainConfig& cfg);

TrainResult train_baseline(const DatasetBundle& data, const ClassifierNet& net,
                           ParamSet w0, const TrainConfig& cfg);

TrainResult train_with_frozen_modulator(const DatasetBundle& data,
                                        const ClassifierNet& net,
                                        const Modulator& modulator, ParamSet phi_frozen,
                                        ParamSet w0, const TrainConfig& cfg);

// Writes manifest.json and metrics.csv (and is also called by train when
// cfg.out_dir is set).
void write_run_artifacts(const std::string& out_dir, const TrainResult& result,
                         const TrainConfig& cfg, const BundleProvenance& provenance,
                         const ClassifierNet& net, const Modulator* modulator);

}  // namespace mfm
