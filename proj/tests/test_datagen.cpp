#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mfm/data.hpp"
#include "mfm/random.hpp"

using namespace mfm;
namespace fs = std::filesystem;

namespace {

// Balanced synthetic source: label k, trivial 2-d features.
Dataset balanced_source(int64_t classes, int64_t per_class) {
  Dataset ds;
  ds.sample_shape = {2};
  ds.num_classes = classes;
  for (int64_t k = 0; k < classes; ++k) {
    for (int64_t i = 0; i < per_class; ++i) {
      ds.values.push_back(static_cast<float>(k));
      ds.values.push_back(static_cast<float>(i));
      ds.labels.push_back(static_cast<int32_t>(k));
      ds.ids.push_back(static_cast<int64_t>(ds.labels.size()) - 1);
    }
  }
  return ds;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mfm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("class count profile matches the direct evaluation") {
  // Oracle: evaluate n_max * IF^(-k/(c-1)) and truncate, independently.
  LongTailSpec spec{10, 5000, 100.0, 0};
  auto counts = class_count_profile(spec);
  const std::vector<int64_t> expected{5000, 2997, 1796, 1077, 645, 387, 232, 139, 83, 50};
  CHECK(counts == expected);
  for (int64_t k = 0; k < 10; ++k) {
    const double exact = 5000.0 * std::pow(100.0, -static_cast<double>(k) / 9.0);
    CHECK(counts[static_cast<size_t>(k)] == static_cast<int64_t>(exact));
  }
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  CHECK(total == 12406);
}

TEST_CASE("profile endpoints and degenerate cases") {
  CHECK(class_count_profile({4, 123, 1.0, 0}) == std::vector<int64_t>{123, 123, 123, 123});
  CHECK(class_count_profile({2, 100, 100.0, 0}) == std::vector<int64_t>{100, 1});
  CHECK_THROWS_AS((void)class_count_profile({2, 5, 10.0, 0}), DataError);   // tail hits 0
  CHECK_THROWS_AS((void)class_count_profile({1, 10, 2.0, 0}), DataError);   // c < 2
  CHECK_THROWS_AS((void)class_count_profile({4, 10, 0.5, 0}), DataError);   // IF < 1
}

TEST_CASE("profile is non-increasing for random specs") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    LongTailSpec spec;
    spec.num_classes = 2 + static_cast<int64_t>(rng.below(20));
    spec.n_max = 100 + static_cast<int64_t>(rng.below(5000));
    spec.imbalance_factor = 1.0 + rng.uniform() * 50.0;
    auto counts = class_count_profile(spec);
    for (size_t k = 1; k < counts.size(); ++k) CHECK(counts[k] <= counts[k - 1]);
    CHECK(counts.front() == spec.n_max);
  }
}

TEST_CASE("build_longtail draws the profile from a balanced source") {
  Dataset source = balanced_source(10, 5000);
  LongTailSpec spec{10, 5000, 100.0, 3};
  Dataset lt = build_longtail(source, spec);
  CHECK(lt.size() == 12406);
  CHECK(lt.class_histogram() == class_count_profile(spec));

  Dataset again = build_longtail(source, spec);
  CHECK(lt.values == again.values);
  CHECK(lt.ids == again.ids);

  LongTailSpec flat{10, 100, 1.0, 3};
  Dataset uniform = build_longtail(source, flat);
  CHECK(uniform.class_histogram() == std::vector<int64_t>(10, 100));

  LongTailSpec too_big{10, 6000, 1.0, 3};
  CHECK_THROWS_WITH_AS((void)build_longtail(source, too_big),
                       doctest::Contains("class 0"), DataError);
}

TEST_CASE("extract_meta development copies without shrinking train") {
  Dataset source = balanced_source(2, 50);
  LongTailSpec spec{2, 50, 50.0 / 6.0, 1};  // counts [50, 6]
  Dataset train = build_longtail(source, spec);
  REQUIRE(train.class_histogram() == std::vector<int64_t>{50, 6});

  auto [train2, meta] = extract_meta(train, MetaStrategy::development, 20, 11);
  CHECK(train2.size() == train.size());
  CHECK(meta.class_histogram() == std::vector<int64_t>{20, 6});
  // Every development meta identity appears in train.
  for (int64_t id : meta.ids) {
    CHECK(std::find(train.ids.begin(), train.ids.end(), id) != train.ids.end());
  }
}

TEST_CASE("extract_meta strategy=meta is disjoint and conserves counts") {
  Dataset source = balanced_source(10, 100);
  LongTailSpec spec{10, 100, 1.0, 5};
  Dataset train = build_longtail(source, spec);

  auto [train2, meta] = extract_meta(train, MetaStrategy::meta, 10, 13);
  CHECK(meta.size() == 100);
  CHECK(meta.class_histogram() == std::vector<int64_t>(10, 10));
  CHECK(train2.size() + meta.size() == train.size());

  auto h_train2 = train2.class_histogram();
  auto h_meta = meta.class_histogram();
  auto h_train = train.class_histogram();
  for (size_t k = 0; k < 10; ++k) CHECK(h_train2[k] + h_meta[k] == h_train[k]);

  for (int64_t id : meta.ids) {
    CHECK(std::find(train2.ids.begin(), train2.ids.end(), id) == train2.ids.end());
  }

  // A class with exactly per_class samples cannot both donate and retain one.
  Dataset tiny = balanced_source(2, 10);
  CHECK_THROWS_AS((void)extract_meta(tiny, MetaStrategy::meta, 10, 1), DataError);
}

TEST_CASE("test profiles") {
  SUBCASE("uniform is flat") {
    TestProfile p{TestKind::uniform, 10.0, 100, 0};
    CHECK(test_profile_counts(p, 10) == std::vector<int64_t>(10, 100));
  }
  SUBCASE("test1 reverses then plateaus the top five") {
    TestProfile p{TestKind::test1, 10.0, 1000, 0};
    // Oracle: truncated base profile reversed, five most frequent set to max.
    const std::vector<int64_t> expected{100, 129, 166, 215, 278,
                                        1000, 1000, 1000, 1000, 1000};
    auto counts = test_profile_counts(p, 10);
    CHECK(counts == expected);
    for (size_t k = 1; k < counts.size(); ++k) CHECK(counts[k] >= counts[k - 1]);
  }
  SUBCASE("test2 is a seeded permutation") {
    TestProfile a{TestKind::test2, 10.0, 1000, 4};
    TestProfile b{TestKind::test2, 10.0, 1000, 4};
    TestProfile c{TestKind::test2, 10.0, 1000, 5};
    CHECK(test_profile_counts(a, 10) == test_profile_counts(b, 10));
    CHECK(test_profile_counts(a, 10) != test_profile_counts(c, 10));
    auto counts = test_profile_counts(a, 10);
    auto sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int64_t> base{100, 129, 166, 215, 278, 359, 464, 599, 774, 1000};
    CHECK(sorted == base);
  }
  SUBCASE("built sets match the profile exactly") {
    Dataset source = balanced_source(10, 1000);
    TestProfile p{TestKind::test1, 10.0, 1000, 21};
    Dataset t = build_test_set(source, p);
    CHECK(t.class_histogram() == test_profile_counts(p, 10));
    TestProfile big{TestKind::uniform, 10.0, 2000, 0};
    CHECK_THROWS_AS((void)build_test_set(source, big), DataError);
  }
}

TEST_CASE("synthetic gaussians") {
  LongTailSpec spec{2, 1000, 1.0, 17};
  DatasetBundle bundle = make_synthetic_gaussians(2, 2, spec, 4.0);

  SUBCASE("nearest-center rule is nearly perfect at separation 4") {
    auto centers = synthetic_class_centers(2, 2, spec.seed);
    int64_t correct = 0;
    const auto& test = bundle.test;
    for (int64_t i = 0; i < test.size(); ++i) {
      double best = 1e300;
      int32_t pred = -1;
      for (size_t k = 0; k < centers.size(); ++k) {
        double d2 = 0.0;
        for (int64_t j = 0; j < 2; ++j) {
          const double diff = static_cast<double>(test.values[i * 2 + j]) -
                              4.0 * centers[k][static_cast<size_t>(j)];
          d2 += diff * diff;
        }
        if (d2 < best) {
          best = d2;
          pred = static_cast<int32_t>(k);
        }
      }
      correct += pred == test.labels[static_cast<size_t>(i)];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) > 0.97);
  }

  SUBCASE("imbalanced profile and determinism") {
    LongTailSpec imb{2, 1000, 100.0, 23};
    DatasetBundle b1 = make_synthetic_gaussians(2, 2, imb, 2.0);
    CHECK(b1.train.class_histogram() == std::vector<int64_t>{1000, 10});
    DatasetBundle b2 = make_synthetic_gaussians(2, 2, imb, 2.0);
    CHECK(b1.train.values == b2.train.values);
    CHECK(b1.test.values == b2.test.values);
    CHECK(b1.train.ids == b2.train.ids);
  }

  SUBCASE("higher-dimensional centers are orthonormal") {
    auto centers = synthetic_class_centers(4, 8, 3);
    for (size_t a = 0; a < centers.size(); ++a) {
      double norm = 0.0;
      for (double v : centers[a]) norm += v * v;
      CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
      for (size_t b = 0; b < a; ++b) {
        double dot = 0.0;
        for (size_t j = 0; j < 8; ++j) dot += centers[a][j] * centers[b][j];
        CHECK(std::fabs(dot) < 1e-9);
      }
    }
  }
}

TEST_CASE("idx loader") {
  auto dir = temp_dir("idx");
  auto write_be32 = [](std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
  };

  const auto images = (dir / "images").string();
  const auto labels = (dir / "labels").string();
  {
    std::ofstream img(images, std::ios::binary);
    write_be32(img, 0x00000803);
    write_be32(img, 2);  // two 2x2 images
    write_be32(img, 2);
    write_be32(img, 2);
    const unsigned char px[8] = {0, 51, 102, 153, 204, 255, 128, 64};
    img.write(reinterpret_cast<const char*>(px), 8);
  }
  {
    std::ofstream lab(labels, std::ios::binary);
    write_be32(lab, 0x00000801);
    write_be32(lab, 2);
    const unsigned char ys[2] = {1, 0};
    lab.write(reinterpret_cast<const char*>(ys), 2);
  }

  Dataset ds = load_idx(images, labels);
  CHECK(ds.size() == 2);
  CHECK(ds.sample_shape == Shape{1, 2, 2});
  CHECK(ds.values[0] == doctest::Approx(0.0f));
  CHECK(ds.values[1] == doctest::Approx(51.0f / 255.0f));
  CHECK(ds.values[5] == doctest::Approx(1.0f));
  CHECK(ds.labels == std::vector<int32_t>{1, 0});

  SUBCASE("empty file is a truncation error") {
    const auto empty = (dir / "empty").string();
    std::ofstream(empty, std::ios::binary).close();
    CHECK_THROWS_WITH_AS((void)load_idx(empty, labels), doctest::Contains("truncated"),
                         IoError);
  }
  SUBCASE("label count mismatch") {
    const auto bad = (dir / "bad_labels").string();
    std::ofstream lab(bad, std::ios::binary);
    write_be32(lab, 0x00000801);
    write_be32(lab, 10);
    lab.close();
    CHECK_THROWS_WITH_AS((void)load_idx(images, bad), doctest::Contains("2 images"),
                         IoError);
  }
  SUBCASE("bad magic") {
    CHECK_THROWS_WITH_AS((void)load_idx(labels, labels), doctest::Contains("magic"),
                         IoError);
  }
}

TEST_CASE("bundle round trip preserves splits, ids and provenance") {
  LongTailSpec spec{3, 60, 10.0, 29};
  DatasetBundle bundle =
      make_synthetic_gaussians(3, 2, spec, 3.0, {MetaStrategy::meta, 2, 20});
  auto dir = temp_dir("bundle");
  save_bundle(dir.string(), bundle);
  DatasetBundle loaded = load_bundle(dir.string());

  CHECK(loaded.train.values == bundle.train.values);
  CHECK(loaded.train.labels == bundle.train.labels);
  CHECK(loaded.train.ids == bundle.train.ids);
  CHECK(loaded.meta.ids == bundle.meta.ids);
  CHECK(loaded.test.size() == bundle.test.size());
  CHECK(loaded.provenance.spec.n_max == spec.n_max);
  CHECK(loaded.provenance.meta_strategy == MetaStrategy::meta);
  CHECK(loaded.provenance.train_counts == bundle.train.class_histogram());
}

}  // TEST_SUITE
