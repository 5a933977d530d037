#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mfm/tensor.hpp"

namespace mfm {

struct LayerSpec {
  enum class Kind { conv, maxpool, relu, flatten, gap, linear };
  Kind kind = Kind::relu;
  std::string name;       // parameter prefix for conv/linear
  int64_t out_channels = 0, kernel = 0, stride = 1, pad = 0;  // conv
  int64_t pool_k = 0, pool_stride = 0;                        // maxpool
  int64_t out_dim = 0;                                        // linear
};

// A named position where per-sample feature modulation is applied, bound
// after a specific layer. `width` is the channel (conv) or neuron (fc)
// count of the feature it scales and shifts.
struct SiteSpec {
  std::string name;
  int layer_index = 0;
  int64_t width = 0;
};

// Per-sample scale and shift for one site: both [batch, width].
struct ModulationParams {
  Tensor gamma, beta;
};

// Active-site modulation for one batch, keyed by site name. Sites absent
// from the map are skipped entirely (bitwise-identical to no modulation).
using ModulationMap = std::map<std::string, ModulationParams>;

class ClassifierNet {
 public:
  ClassifierNet() = default;
  ClassifierNet(Shape input_shape, int64_t num_classes, std::vector<LayerSpec> layers,
                std::vector<SiteSpec> sites);

  const Shape& input_shape() const { return input_shape_; }
  int64_t num_classes() const { return num_classes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<SiteSpec>& sites() const { return sites_; }
  const SiteSpec& site(const std::string& name) const;
  bool has_site(const std::string& name) const;

  // He-normal weights, zero biases; each parameter drawn from a stream
  // derived from (seed, name) so init is independent of iteration order.
  ParamSet init_params(uint64_t seed) const;

  // Logits [batch, num_classes]. With mods, each listed site's feature h
  // becomes gamma * h + beta, broadcast over spatial dims for conv features.
  Tensor forward(const ParamSet& params, const Tensor& batch,
                 const ModulationMap* mods = nullptr) const;

 private:
  Shape input_shape_;
  int64_t num_classes_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<SiteSpec> sites_;
};

Tensor forward_plain(const ClassifierNet& net, const ParamSet& params, const Tensor& batch);
Tensor forward_modulated(const ClassifierNet& net, const ParamSet& params,
                         const Tensor& batch, const ModulationMap& mods);

// Count of modulated forward passes this process has run; evaluation code
// is expected to leave it untouched.
uint64_t modulated_forward_count();

// Modified LeNet for 28x28x1 inputs: three conv stages (the last with a
// 3x3 kernel followed by global average pooling) and one hidden fc layer.
// Sites: conv1, conv2, conv3, fc1. The classifier layer is never a site.
ClassifierNet build_lenet(int64_t num_classes);

// Fully-connected net with one site per hidden layer (h1, h2, ...).
ClassifierNet build_mlp(int64_t input_dim, const std::vector<int64_t>& hidden,
                        int64_t num_classes);

// Checkpoint: magic "MFMC", version, architecture as structured text, then
// the ParamSet name-sorted with shapes and f32 payloads.
void save_classifier(const std::string& path, const ClassifierNet& net,
                     const ParamSet& params);
std::pair<ClassifierNet, ParamSet> load_classifier(const std::string& path);

}  // namespace mfm
