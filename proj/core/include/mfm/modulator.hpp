#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mfm/net.hpp"
#include "mfm/tensor.hpp"

namespace mfm {

// Parameter-free expansion theta(i) = x(kappa(i)) * zeta(i): each compressed
// coefficient is replicated into several output slots with random sign flips.
// kappa and zeta are fixed at construction and never change.
struct WeightHashSide {
  int64_t m = 0, d = 0;
  std::vector<int64_t> kappa;  // size d, values in [0, m)
  std::vector<int8_t> zeta;    // size d, +1 / -1
};

struct WeightHashSpec {
  WeightHashSide gamma, beta;
  uint64_t seed = 0;

  static WeightHashSpec make(int64_t m_gamma, int64_t m_beta, int64_t d_gamma,
                             int64_t d_beta, uint64_t seed);
};

// Batched: x is [B, m] -> [B, d]. Equals x W^T row-wise for the one-nonzero-
// per-row matrix W(i,j) = zeta(i) [j == kappa(i)].
Tensor weight_hash_expand(const Tensor& x, const std::shared_ptr<const WeightHashSide>& side);
// Adjoint: [B, d] -> [B, m], dx(j) = sum over {i : kappa(i)=j} of zeta(i) dtheta(i).
Tensor weight_hash_collapse(const Tensor& dtheta,
                            const std::shared_ptr<const WeightHashSide>& side);

enum class ModulatorKind { tabular, network };
enum class ModulatorVariant { paper_default, film, channel_attention, gated };
// Ablation overlays: beta_zero clamps beta = 0 (gamma learnable); gamma_one
// clamps gamma = 1 (beta learnable).
enum class ConstraintMode { full, beta_zero, gamma_one };

const char* to_string(ModulatorKind k);
const char* to_string(ModulatorVariant v);
const char* to_string(ConstraintMode m);
ModulatorKind modulator_kind_from_string(const std::string& s);
ModulatorVariant modulator_variant_from_string(const std::string& s);
ConstraintMode constraint_mode_from_string(const std::string& s);

struct ModulatorSpec {
  ModulatorKind kind = ModulatorKind::network;
  ModulatorVariant variant = ModulatorVariant::paper_default;
  int64_t input_dim = 0;   // soft-label length c (network kind)
  int64_t hidden_dim = 100;
  std::vector<SiteSpec> sites;  // name + width; layer_index unused here
  std::optional<WeightHashSpec> wh;
  int64_t table_rows = 0;  // tabular kind: training-set size

  int64_t total_width() const;       // sum of site widths
  int64_t raw_output_dim() const;    // 2*total or m_gamma+m_beta with wh
};

// Emits per-sample (gamma, beta) for each configured site, either from a
// soft-label MLP (network kind) or from learnable per-sample rows keyed by
// ids (tabular kind). Zero-initialized output parameters make the very
// first emission the identity modulation for every variant.
class Modulator {
 public:
  explicit Modulator(ModulatorSpec spec);

  const ModulatorSpec& spec() const { return spec_; }

  ParamSet init_params(uint64_t seed) const;

  ModulationMap emit(const ParamSet& phi, const Tensor& soft_labels,
                     ConstraintMode mode = ConstraintMode::full) const;
  ModulationMap emit_tabular(const ParamSet& phi, const std::vector<int64_t>& ids,
                             ConstraintMode mode = ConstraintMode::full) const;

  uint64_t emit_count() const { return emit_count_->load(); }

 private:
  ModulationMap split_and_constrain(const Tensor& raw, ConstraintMode mode) const;

  ModulatorSpec spec_;
  std::shared_ptr<const WeightHashSide> wh_gamma_, wh_beta_;
  std::shared_ptr<std::atomic<uint64_t>> emit_count_;
};

// Checkpoint: magic "MFMM", version, spec as structured text with kappa and
// zeta verbatim (required for cross-dataset transfer), then the ParamSet.
void save_modulator(const std::string& path, const Modulator& mod, const ParamSet& phi);
std::pair<Modulator, ParamSet> load_modulator(const std::string& path);

}  // namespace mfm
