#include "mfm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfm/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mfm {

std::vector<int64_t> class_count_profile(const LongTailSpec& spec) {
  if (spec.num_classes < 2) {
    throw DataError("class_count_profile: need >= 2 classes, got " +
                    std::to_string(spec.num_classes));
  }
  if (spec.imbalance_factor < 1.0) {
    throw DataError("class_count_profile: imbalance factor must be >= 1, got " +
                    std::to_string(spec.imbalance_factor));
  }
  if (spec.n_max < 1) {
    throw DataError("class_count_profile: n_max must be >= 1");
  }
  std::vector<int64_t> counts(static_cast<size_t>(spec.num_classes));
  const double c1 = static_cast<double>(spec.num_classes - 1);
  for (int64_t k = 0; k < spec.num_classes; ++k) {
    const double exact = static_cast<double>(spec.n_max) *
                         std::pow(spec.imbalance_factor, -static_cast<double>(k) / c1);
    counts[static_cast<size_t>(k)] = static_cast<int64_t>(exact);
    if (counts[static_cast<size_t>(k)] == 0) {
      throw DataError("class_count_profile: class " + std::to_string(k) +
                      " count truncates to 0 (n_max=" + std::to_string(spec.n_max) +
                      ", IF=" + std::to_string(spec.imbalance_factor) + ")");
    }
  }
  return counts;
}

std::vector<int64_t> Dataset::class_histogram() const {
  std::vector<int64_t> h(static_cast<size_t>(num_classes), 0);
  for (int32_t y : labels) ++h[static_cast<size_t>(y)];
  return h;
}

Tensor Dataset::gather_batch(const std::vector<int64_t>& index_list) const {
  const int64_t d = sample_numel();
  std::vector<double> out(index_list.size() * static_cast<size_t>(d));
  for (size_t i = 0; i < index_list.size(); ++i) {
    const int64_t r = index_list[i];
    if (r < 0 || r >= size()) {
      throw DataError("gather_batch: row " + std::to_string(r) + " outside dataset of " +
                      std::to_string(size()));
    }
    const float* src = values.data() + r * d;
    double* dst = out.data() + i * static_cast<size_t>(d);
    for (int64_t j = 0; j < d; ++j) dst[j] = static_cast<double>(src[j]);
  }
  Shape shape{static_cast<int64_t>(index_list.size())};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return Tensor::from_data(std::move(shape), std::move(out));
}

Dataset Dataset::subset(const std::vector<int64_t>& index_list) const {
  Dataset out;
  out.sample_shape = sample_shape;
  out.num_classes = num_classes;
  const int64_t d = sample_numel();
  out.values.resize(index_list.size() * static_cast<size_t>(d));
  out.labels.resize(index_list.size());
  out.ids.resize(index_list.size());
  for (size_t i = 0; i < index_list.size(); ++i) {
    const int64_t r = index_list[i];
    std::memcpy(out.values.data() + i * static_cast<size_t>(d),
                values.data() + r * d, static_cast<size_t>(d) * sizeof(float));
    out.labels[i] = labels[static_cast<size_t>(r)];
    out.ids[i] = ids[static_cast<size_t>(r)];
  }
  return out;
}

Dataset build_longtail(const Dataset& source, const LongTailSpec& spec) {
  if (source.num_classes != spec.num_classes) {
    throw DataError("build_longtail: source has " + std::to_string(source.num_classes) +
                    " classes, spec wants " + std::to_string(spec.num_classes));
  }
  const auto counts = class_count_profile(spec);
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(spec.num_classes));
  for (int64_t i = 0; i < source.size(); ++i) {
    by_class[static_cast<size_t>(source.labels[static_cast<size_t>(i)])].push_back(i);
  }
  Rng rng(derive_seed(spec.seed, "longtail"));
  std::vector<int64_t> chosen;
  for (int64_t k = 0; k < spec.num_classes; ++k) {
    auto& rows = by_class[static_cast<size_t>(k)];
    const int64_t want = counts[static_cast<size_t>(k)];
    if (static_cast<int64_t>(rows.size()) < want) {
      throw DataError("build_longtail: class " + std::to_string(k) + " has " +
                      std::to_string(rows.size()) + " samples, profile needs " +
                      std::to_string(want));
    }
    rng.shuffle(rows);
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + want);
  }
  rng.shuffle(chosen);
  return source.subset(chosen);
}

const char* to_string(MetaStrategy s) {
  return s == MetaStrategy::meta ? "meta" : "development";
}

MetaStrategy meta_strategy_from_string(const std::string& s) {
  if (s == "meta") return MetaStrategy::meta;
  if (s == "development") return MetaStrategy::development;
  throw ConfigError("unknown meta strategy '" + s + "'");
}

std::pair<Dataset, Dataset> extract_meta(const Dataset& train, MetaStrategy strategy,
                                         int64_t per_class, uint64_t seed) {
  if (per_class < 1) throw DataError("extract_meta: per_class must be >= 1");
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(train.num_classes));
  for (int64_t i = 0; i < train.size(); ++i) {
    by_class[static_cast<size_t>(train.labels[static_cast<size_t>(i)])].push_back(i);
  }
  Rng rng(derive_seed(seed, "extract_meta"));
  std::vector<char> is_meta(static_cast<size_t>(train.size()), 0);
  std::vector<int64_t> meta_rows;
  for (int64_t k = 0; k < train.num_classes; ++k) {
    auto rows = by_class[static_cast<size_t>(k)];
    const int64_t have = static_cast<int64_t>(rows.size());
    int64_t take = per_class;
    if (strategy == MetaStrategy::meta) {
      if (have < per_class + 1) {
        throw DataError("extract_meta: class " + std::to_string(k) + " has " +
                        std::to_string(have) + " samples; strategy=meta needs " +
                        std::to_string(per_class) + " plus at least one retained");
      }
    } else {
      take = std::min(per_class, have);
    }
    rng.shuffle(rows);
    rows.resize(static_cast<size_t>(take));
    std::sort(rows.begin(), rows.end());  // keep original train order
    for (int64_t r : rows) {
      meta_rows.push_back(r);
      if (strategy == MetaStrategy::meta) is_meta[static_cast<size_t>(r)] = 1;
    }
  }
  std::sort(meta_rows.begin(), meta_rows.end());
  Dataset meta = train.subset(meta_rows);
  if (strategy == MetaStrategy::development) {
    return {train, std::move(meta)};
  }
  std::vector<int64_t> keep;
  keep.reserve(static_cast<size_t>(train.size()) - meta_rows.size());
  for (int64_t i = 0; i < train.size(); ++i) {
    if (!is_meta[static_cast<size_t>(i)]) keep.push_back(i);
  }
  return {train.subset(keep), std::move(meta)};
}

const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::uniform: return "uniform";
    case TestKind::test1: return "test1";
    default: return "test2";
  }
}

TestKind test_kind_from_string(const std::string& s) {
  if (s == "uniform") return TestKind::uniform;
  if (s == "test1") return TestKind::test1;
  if (s == "test2") return TestKind::test2;
  throw ConfigError("unknown test profile '" + s + "'");
}

std::vector<int64_t> test_profile_counts(const TestProfile& profile, int64_t num_classes) {
  if (profile.n_max < 1) throw DataError("test_profile_counts: n_max must be >= 1");
  if (profile.kind == TestKind::uniform) {
    return std::vector<int64_t>(static_cast<size_t>(num_classes), profile.n_max);
  }
  LongTailSpec base;
  base.num_classes = num_classes;
  base.n_max = profile.n_max;
  base.imbalance_factor = profile.imbalance_factor;
  auto counts = class_count_profile(base);
  std::reverse(counts.begin(), counts.end());
  if (profile.kind == TestKind::test1) {
    // The five most frequent classes after reversal share the maximum count.
    const int64_t plateau = std::min<int64_t>(5, num_classes);
    const int64_t top = counts.back();
    for (int64_t k = num_classes - plateau; k < num_classes; ++k) {
      counts[static_cast<size_t>(k)] = top;
    }
    return counts;
  }
  // test2: seeded permutation of the profile across classes.
  Rng rng(derive_seed(profile.seed, "test2"));
  rng.shuffle(counts);
  return counts;
}

Dataset build_test_set(const Dataset& source, const TestProfile& profile) {
  const auto counts = test_profile_counts(profile, source.num_classes);
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(source.num_classes));
  for (int64_t i = 0; i < source.size(); ++i) {
    by_class[static_cast<size_t>(source.labels[static_cast<size_t>(i)])].push_back(i);
  }
  Rng rng(derive_seed(profile.seed, "test_set"));
  std::vector<int64_t> chosen;
  for (int64_t k = 0; k < source.num_classes; ++k) {
    auto& rows = by_class[static_cast<size_t>(k)];
    const int64_t want = counts[static_cast<size_t>(k)];
    if (static_cast<int64_t>(rows.size()) < want) {
      throw DataError("build_test_set: class " + std::to_string(k) + " has " +
                      std::to_string(rows.size()) + " samples, profile needs " +
                      std::to_string(want));
    }
    rng.shuffle(rows);
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + want);
  }
  rng.shuffle(chosen);
  return source.subset(chosen);
}

std::vector<std::vector<double>> synthetic_class_centers(int64_t num_classes,
                                                         int64_t dim, uint64_t seed) {
  std::vector<std::vector<double>> centers(static_cast<size_t>(num_classes),
                                           std::vector<double>(static_cast<size_t>(dim), 0.0));
  if (dim == 2) {
    for (int64_t k = 0; k < num_classes; ++k) {
      const double theta = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(num_classes);
      centers[static_cast<size_t>(k)] = {std::cos(theta), std::sin(theta)};
    }
    return centers;
  }
  // Random directions, Gram-Schmidt orthonormalized while possible.
  Rng rng(derive_seed(seed, "centers"));
  for (int64_t k = 0; k < num_classes; ++k) {
    auto& u = centers[static_cast<size_t>(k)];
    for (auto& v : u) v = rng.normal();
    for (int64_t j = 0; j < std::min(k, dim); ++j) {
      const auto& prev = centers[static_cast<size_t>(j)];
      double dot = 0.0;
      for (int64_t i = 0; i < dim; ++i) dot += u[static_cast<size_t>(i)] * prev[static_cast<size_t>(i)];
      for (int64_t i = 0; i < dim; ++i) u[static_cast<size_t>(i)] -= dot * prev[static_cast<size_t>(i)];
    }
    double norm = 0.0;
    for (double v : u) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9) {
      throw DataError("synthetic_class_centers: degenerate frame, try another seed");
    }
    for (auto& v : u) v /= norm;
  }
  return centers;
}

namespace {

Dataset sample_gaussians(const std::vector<std::vector<double>>& centers,
                         const std::vector<int64_t>& counts, double separation,
                         int64_t dim, Rng& rng, int64_t id_base) {
  Dataset ds;
  ds.sample_shape = {dim};
  ds.num_classes = static_cast<int64_t>(centers.size());
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  ds.values.reserve(static_cast<size_t>(total * dim));
  ds.labels.reserve(static_cast<size_t>(total));
  ds.ids.reserve(static_cast<size_t>(total));
  int64_t id = id_base;
  for (size_t k = 0; k < centers.size(); ++k) {
    for (int64_t i = 0; i < counts[k]; ++i) {
      for (int64_t j = 0; j < dim; ++j) {
        const double v = separation * centers[k][static_cast<size_t>(j)] + rng.normal();
        ds.values.push_back(static_cast<float>(v));
      }
      ds.labels.push_back(static_cast<int32_t>(k));
      ds.ids.push_back(id++);
    }
  }
  return ds;
}

std::vector<int64_t> iota_rows(int64_t n) {
  std::vector<int64_t> v(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = i;
  return v;
}

}  // namespace

DatasetBundle make_synthetic_gaussians(int64_t num_classes, int64_t dim,
                                       const LongTailSpec& spec, double separation,
                                       const SynthOptions& opts) {
  if (separation <= 0.0) {
    throw DataError("make_synthetic_gaussians: separation must be > 0");
  }
  if (spec.num_classes != num_classes) {
    throw DataError("make_synthetic_gaussians: spec classes " +
                    std::to_string(spec.num_classes) + " != " + std::to_string(num_classes));
  }
  const auto counts = class_count_profile(spec);
  const auto centers = synthetic_class_centers(num_classes, dim, spec.seed);

  Rng train_rng(derive_seed(spec.seed, "synth_train"));
  Dataset train = sample_gaussians(centers, counts, separation, dim, train_rng, 0);
  // Shuffle train order; ids keep identity.
  auto order = iota_rows(train.size());
  train_rng.shuffle(order);
  train = train.subset(order);

  Rng test_rng(derive_seed(spec.seed, "synth_test"));
  const std::vector<int64_t> test_counts(static_cast<size_t>(num_classes),
                                         opts.test_per_class);
  Dataset test =
      sample_gaussians(centers, test_counts, separation, dim, test_rng, train.size());

  auto [train2, meta] = extract_meta(train, opts.meta_strategy, opts.meta_per_class,
                                     derive_seed(spec.seed, "synth_meta"));

  DatasetBundle bundle;
  bundle.train = std::move(train2);
  bundle.meta = std::move(meta);
  bundle.test = std::move(test);
  bundle.provenance.spec = spec;
  bundle.provenance.source = "synthetic-gaussians";
  bundle.provenance.meta_strategy = opts.meta_strategy;
  bundle.provenance.meta_per_class = opts.meta_per_class;
  bundle.provenance.separation = separation;
  bundle.provenance.dim = dim;
  bundle.provenance.train_counts = bundle.train.class_histogram();
  bundle.provenance.meta_counts = bundle.meta.class_histogram();
  bundle.provenance.test_counts = bundle.test.class_histogram();
  return bundle;
}

namespace {

uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("idx: truncated file " + path);
  }
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) |
         uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path);
  const uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803u) {
    throw IoError("idx: bad magic in " + images_path + " (expected 0x00000803)");
  }
  const uint32_t n = read_be32(img, images_path);
  const uint32_t rows = read_be32(img, images_path);
  const uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path);
  const uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801u) {
    throw IoError("idx: bad magic in " + labels_path + " (expected 0x00000801)");
  }
  const uint32_t n_labels = read_be32(lab, labels_path);
  if (n != n_labels) {
    throw IoError("idx: " + std::to_string(n) + " images vs " +
                  std::to_string(n_labels) + " labels");
  }

  const size_t pixels = size_t(n) * rows * cols;
  std::vector<unsigned char> raw(pixels);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
    throw IoError("idx: truncated file " + images_path);
  }
  std::vector<unsigned char> raw_labels(n);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), n)) {
    throw IoError("idx: truncated file " + labels_path);
  }

  Dataset ds;
  ds.sample_shape = {1, static_cast<int64_t>(rows), static_cast<int64_t>(cols)};
  ds.values.resize(pixels);
  for (size_t i = 0; i < pixels; ++i) {
    ds.values[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  ds.labels.resize(n);
  int32_t max_label = 0;
  for (size_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<int32_t>(raw_labels[i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  ds.ids = iota_rows(static_cast<int64_t>(n));
  return ds;
}

namespace {

constexpr uint32_t kMfmdVersion = 1;
constexpr uint32_t kDtypeF32 = 0;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("mfmd: truncated file " + path);
  }
  return v;
}

json provenance_to_json(const BundleProvenance& p) {
  return json{{"spec",
               {{"num_classes", p.spec.num_classes},
                {"n_max", p.spec.n_max},
                {"imbalance_factor", p.spec.imbalance_factor},
                {"seed", p.spec.seed}}},
              {"source", p.source},
              {"meta_strategy", to_string(p.meta_strategy)},
              {"meta_per_class", p.meta_per_class},
              {"separation", p.separation},
              {"dim", p.dim},
              {"train_counts", p.train_counts},
              {"meta_counts", p.meta_counts},
              {"test_counts", p.test_counts}};
}

BundleProvenance provenance_from_json(const json& j) {
  BundleProvenance p;
  const auto& s = j.at("spec");
  p.spec.num_classes = s.at("num_classes").get<int64_t>();
  p.spec.n_max = s.at("n_max").get<int64_t>();
  p.spec.imbalance_factor = s.at("imbalance_factor").get<double>();
  p.spec.seed = s.at("seed").get<uint64_t>();
  p.source = j.at("source").get<std::string>();
  p.meta_strategy = meta_strategy_from_string(j.at("meta_strategy").get<std::string>());
  p.meta_per_class = j.at("meta_per_class").get<int64_t>();
  p.separation = j.at("separation").get<double>();
  p.dim = j.at("dim").get<int64_t>();
  p.train_counts = j.at("train_counts").get<std::vector<int64_t>>();
  p.meta_counts = j.at("meta_counts").get<std::vector<int64_t>>();
  p.test_counts = j.at("test_counts").get<std::vector<int64_t>>();
  return p;
}

}  // namespace

void save_mfmd(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("mfmd: cannot open " + path + " for writing");
  out.write("MFMD", 4);
  write_pod(out, kMfmdVersion);
  write_pod(out, kDtypeF32);
  const uint32_t ndim = static_cast<uint32_t>(ds.sample_shape.size()) + 1;
  write_pod(out, ndim);
  write_pod(out, static_cast<uint32_t>(ds.size()));
  for (int64_t d : ds.sample_shape) write_pod(out, static_cast<uint32_t>(d));
  out.write(reinterpret_cast<const char*>(ds.values.data()),
            static_cast<std::streamsize>(ds.values.size() * sizeof(float)));
  for (int32_t y : ds.labels) write_pod(out, static_cast<uint32_t>(y));
  if (!out) throw IoError("mfmd: write failed for " + path);
}

Dataset load_mfmd(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("mfmd: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MFMD", 4) != 0) {
    throw IoError("mfmd: bad magic in " + path);
  }
  const auto version = read_pod<uint32_t>(in, path);
  if (version != kMfmdVersion) {
    throw IoError("mfmd: unsupported version " + std::to_string(version) + " in " + path);
  }
  const auto dtype = read_pod<uint32_t>(in, path);
  if (dtype != kDtypeF32) {
    throw IoError("mfmd: unsupported dtype tag " + std::to_string(dtype) + " in " + path);
  }
  const auto ndim = read_pod<uint32_t>(in, path);
  if (ndim < 1 || ndim > 8) throw IoError("mfmd: implausible ndim in " + path);
  const auto n = read_pod<uint32_t>(in, path);
  Dataset ds;
  for (uint32_t i = 1; i < ndim; ++i) {
    ds.sample_shape.push_back(static_cast<int64_t>(read_pod<uint32_t>(in, path)));
  }
  const size_t count = size_t(n) * static_cast<size_t>(ds.sample_numel());
  ds.values.resize(count);
  if (!in.read(reinterpret_cast<char*>(ds.values.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    throw IoError("mfmd: truncated file " + path);
  }
  ds.labels.resize(n);
  int32_t max_label = -1;
  for (uint32_t i = 0; i < n; ++i) {
    ds.labels[i] = static_cast<int32_t>(read_pod<uint32_t>(in, path));
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

void save_bundle(const std::string& dir, const DatasetBundle& bundle) {
  fs::create_directories(dir);
  save_mfmd((fs::path(dir) / "train.mfmd").string(), bundle.train);
  save_mfmd((fs::path(dir) / "meta.mfmd").string(), bundle.meta);
  save_mfmd((fs::path(dir) / "test.mfmd").string(), bundle.test);
  json manifest = provenance_to_json(bundle.provenance);
  manifest["num_classes"] = bundle.train.num_classes;
  manifest["train_ids"] = bundle.train.ids;
  manifest["meta_ids"] = bundle.meta.ids;
  manifest["test_ids"] = bundle.test.ids;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("bundle: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("bundle: manifest write failed in " + dir);
}

DatasetBundle load_bundle(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("bundle: missing manifest.json in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError("bundle: malformed manifest.json in " + dir + ": " + e.what());
  }
  DatasetBundle bundle;
  bundle.provenance = provenance_from_json(manifest);
  bundle.train = load_mfmd((fs::path(dir) / "train.mfmd").string());
  bundle.meta = load_mfmd((fs::path(dir) / "meta.mfmd").string());
  bundle.test = load_mfmd((fs::path(dir) / "test.mfmd").string());
  const int64_t c = manifest.at("num_classes").get<int64_t>();
  bundle.train.num_classes = bundle.meta.num_classes = bundle.test.num_classes = c;
  bundle.train.ids = manifest.at("train_ids").get<std::vector<int64_t>>();
  bundle.meta.ids = manifest.at("meta_ids").get<std::vector<int64_t>>();
  bundle.test.ids = manifest.at("test_ids").get<std::vector<int64_t>>();
  if (static_cast<int64_t>(bundle.train.ids.size()) != bundle.train.size() ||
      static_cast<int64_t>(bundle.meta.ids.size()) != bundle.meta.size() ||
      static_cast<int64_t>(bundle.test.ids.size()) != bundle.test.size()) {
    throw IoError("bundle: manifest ids disagree with split sizes in " + dir);
  }
  return bundle;
}

}  // namespace mfm
