#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfm/tensor.hpp"

namespace mfm {

// Class-count profile of a long-tailed split: n_k = floor(n_max * IF^(-k/(c-1))).
struct LongTailSpec {
  int64_t num_classes = 0;
  int64_t n_max = 0;
  double imbalance_factor = 1.0;
  uint64_t seed = 0;
};

std::vector<int64_t> class_count_profile(const LongTailSpec& spec);

// Labeled samples stored as f32 (the on-disk dtype); batches are assembled
// as f64 tensors. `ids` carry sample identity (index into the originating
// source dataset) through every transformation, which is what split
// disjointness and tabular modulator rows key on.
struct Dataset {
  Shape sample_shape;           // per-sample, e.g. {2} or {1,28,28}
  std::vector<float> values;    // size() * prod(sample_shape)
  std::vector<int32_t> labels;
  std::vector<int64_t> ids;
  int64_t num_classes = 0;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  int64_t sample_numel() const { return shape_numel(sample_shape); }
  std::vector<int64_t> class_histogram() const;

  // Rows `index_list` as a [n, ...sample_shape] f64 tensor.
  Tensor gather_batch(const std::vector<int64_t>& index_list) const;
  Dataset subset(const std::vector<int64_t>& index_list) const;
};

Dataset build_longtail(const Dataset& source, const LongTailSpec& spec);

enum class MetaStrategy { meta, development };
const char* to_string(MetaStrategy s);
MetaStrategy meta_strategy_from_string(const std::string& s);

// strategy=meta moves per_class samples per class out of train (splits are
// disjoint by id); strategy=development copies min(per_class, n_k) per class
// and leaves train untouched (meta ids stay members of train).
std::pair<Dataset, Dataset> extract_meta(const Dataset& train, MetaStrategy strategy,
                                         int64_t per_class, uint64_t seed);

enum class TestKind { uniform, test1, test2 };
const char* to_string(TestKind k);
TestKind test_kind_from_string(const std::string& s);

struct TestProfile {
  TestKind kind = TestKind::uniform;
  double imbalance_factor = 10.0;  // base profile for test1/test2
  int64_t n_max = 0;
  uint64_t seed = 0;
};

std::vector<int64_t> test_profile_counts(const TestProfile& profile, int64_t num_classes);
Dataset build_test_set(const Dataset& source, const TestProfile& profile);

struct BundleProvenance {
  LongTailSpec spec;
  std::string source;         // free-form description, e.g. "synthetic-gaussians"
  MetaStrategy meta_strategy = MetaStrategy::development;
  int64_t meta_per_class = 0;
  double separation = 0.0;    // synthetic only
  int64_t dim = 0;            // synthetic only
  std::vector<int64_t> train_counts, meta_counts, test_counts;
};

struct DatasetBundle {
  Dataset train, meta, test;
  BundleProvenance provenance;
};

struct SynthOptions {
  MetaStrategy meta_strategy = MetaStrategy::development;
  int64_t meta_per_class = 20;
  int64_t test_per_class = 500;
};

// Isotropic unit-variance Gaussian classes centered at separation * u_k.
// dim == 2 places u_k equally spaced on the unit circle; dim > 2 uses a
// seeded orthonormalized random frame.
DatasetBundle make_synthetic_gaussians(int64_t num_classes, int64_t dim,
                                       const LongTailSpec& spec, double separation,
                                       const SynthOptions& opts = {});
std::vector<std::vector<double>> synthetic_class_centers(int64_t num_classes,
                                                         int64_t dim, uint64_t seed);

// IDX (big-endian) image/label files; pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Bundle directory: manifest.json + {train,meta,test}.mfmd.
void save_bundle(const std::string& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::string& dir);

// Flat tensor file: magic "MFMD", version, dtype tag, shape, f32 rows,
// then u32 labels.
void save_mfmd(const std::string& path, const Dataset& ds);
Dataset load_mfmd(const std::string& path);

}  // namespace mfm
