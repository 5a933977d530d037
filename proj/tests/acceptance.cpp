// Acceptance suite: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL]/[SKIP] line. Exit codes: 0 all pass, 1 any fail,
// 77 skipped (missing external dataset).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mfm/autodiff.hpp"
#include "mfm/data.hpp"
#include "mfm/experiments.hpp"
#include "mfm/metrics.hpp"
#include "mfm/modulator.hpp"
#include "mfm/net.hpp"
#include "mfm/ops.hpp"
#include "mfm/random.hpp"
#include "mfm/train.hpp"
#include "oracles.hpp"

using namespace mfm;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

TrainBatch batch_from(const Dataset& ds, std::vector<int64_t> rows) {
  TrainBatch b;
  b.x = ds.gather_batch(rows);
  std::vector<int32_t> labels(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) labels[i] = ds.labels[static_cast<size_t>(rows[i])];
  b.targets = make_onehot(labels, ds.num_classes);
  b.rows = std::move(rows);
  return b;
}

Modulator network_modulator(const ClassifierNet& net, int64_t hidden,
                            std::vector<SiteSpec> sites) {
  ModulatorSpec spec;
  spec.kind = ModulatorKind::network;
  spec.variant = ModulatorVariant::paper_default;
  spec.input_dim = net.num_classes();
  spec.hidden_dim = hidden;
  spec.sites = std::move(sites);
  return Modulator(std::move(spec));
}

// ---------------------------------------------------------------------------
// 1. Meta-gradient oracle: grad_phi of the meta loss through the virtual
//    step matches central finite differences coordinate-wise (< 1e-4).
Outcome criterion1(std::string& detail) {
  Timer timer;
  LongTailSpec spec{2, 30, 3.0, 41};
  DatasetBundle bundle =
      make_synthetic_gaussians(2, 2, spec, 2.0, {MetaStrategy::development, 8, 20});
  ClassifierNet net = build_mlp(2, {6}, 2);
  ParamSet w = net.init_params(42);
  Modulator mod = network_modulator(net, 8, {net.sites().back()});
  ParamSet phi = mod.init_params(43);
  Rng rng(44);
  for (double& v : phi.at("out.w").mutable_data()) v = rng.uniform(-0.8, 0.8);
  for (double& v : phi.at("out.b").mutable_data()) v = rng.uniform(-0.3, 0.3);

  TrainBatch tb = batch_from(bundle.train, {0, 1, 2, 3, 4, 5, 6, 7});
  TrainBatch mb = batch_from(bundle.meta, {0, 1, 2, 3});
  const double alpha = 0.1;

  ParamSet analytic = bilevel_meta_grad(net, w, mod, phi, tb, mb, alpha);

  double worst = 0.0;
  int64_t coords = 0;
  for (const auto& [name, t] : phi) {
    auto f = [&, pname = name](const std::vector<double>& x) {
      ParamSet phi_mod = detach_all(phi, false);
      phi_mod[pname] = Tensor::from_data(phi.at(pname).shape(), x);
      return bilevel_meta_loss(net, w, mod, phi_mod, tb, mb, alpha);
    };
    worst = std::max(worst, oracle::max_grad_rel_err(f, t.data(),
                                                     analytic.at(name).data(), 1e-4));
    coords += t.numel();
  }
  detail = "max rel err " + std::to_string(worst) + " over " + std::to_string(coords) +
           " phi coordinates, " + std::to_string(timer.seconds()) + " s";
  return worst < 1e-4 && timer.seconds() < 10.0 ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 2. Weight hashing equals the dense fixed-weight matrix exactly, both
//    directions, 100 random (m=8, d=64) specs.
Outcome criterion2(std::string& detail) {
  Timer timer;
  Rng rng(51);
  int64_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    WeightHashSpec spec = WeightHashSpec::make(8, 8, 64, 64, rng.u64());
    auto side = std::make_shared<const WeightHashSide>(trial % 2 == 0 ? spec.gamma
                                                                      : spec.beta);
    auto w = oracle::dense_hash_matrix(side->kappa, side->zeta, side->m);
    std::vector<double> x(8), dtheta(64);
    for (auto& v : x) v = rng.uniform(-2, 2);
    for (auto& v : dtheta) v = rng.uniform(-2, 2);

    Tensor ex = weight_hash_expand(Tensor::from_data({1, 8}, x), side);
    const auto wx = oracle::matvec(w, x);
    for (size_t i = 0; i < 64; ++i) {
      if (ex.data()[i] != wx[i]) {
        detail = "expand mismatch at trial " + std::to_string(trial);
        return Outcome::fail;
      }
    }
    Tensor col = weight_hash_collapse(Tensor::from_data({1, 64}, dtheta), side);
    const auto wt = oracle::matvec_t(w, dtheta);
    for (size_t j = 0; j < 8; ++j) {
      if (col.data()[j] != wt[j]) {
        detail = "backward mismatch at trial " + std::to_string(trial);
        return Outcome::fail;
      }
    }
    ++checked;
  }
  detail = std::to_string(checked) + " specs exact both directions, " +
           std::to_string(timer.seconds()) + " s";
  return timer.seconds() < 1.0 ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 3. eta = 0 with a zero-initialized modulator reproduces baseline losses
//    step for step (10 steps, 1e-9).
Outcome criterion3(std::string& detail) {
  Timer timer;
  LongTailSpec spec{2, 120, 10.0, 61};
  DatasetBundle bundle =
      make_synthetic_gaussians(2, 2, spec, 2.0, {MetaStrategy::development, 10, 50});
  ClassifierNet net = build_mlp(2, {16}, 2);
  ParamSet w0 = net.init_params(62);
  Modulator mod = network_modulator(net, 12, {net.sites().back()});
  ParamSet phi0 = mod.init_params(63);

  TrainConfig cfg;
  cfg.batch_n = 25;
  cfg.batch_m = 10;
  cfg.alpha = 0.05;
  cfg.eta = 0.0;
  cfg.epochs = 3;
  cfg.seed = 64;

  TrainResult base = train_baseline(bundle, net, detach_all(w0, true), cfg);
  TrainResult mfm = train(bundle, net, mod, detach_all(w0, true),
                          detach_all(phi0, true), cfg);
  if (base.log.size() != mfm.log.size() || base.log.size() < 10) {
    detail = "step counts diverge";
    return Outcome::fail;
  }
  double worst = 0.0;
  for (size_t i = 0; i < 10; ++i) {
    worst = std::max(worst, std::fabs(base.log[i].train_loss - mfm.log[i].train_loss));
  }
  detail = "max per-step loss gap " + std::to_string(worst) + " over 10 steps, " +
           std::to_string(timer.seconds()) + " s";
  return worst < 1e-9 && timer.seconds() < 30.0 ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// Shared runner for the synthetic directional criteria.
struct PairedRun {
  double base_minority_recall = 0.0, mfm_minority_recall = 0.0;
  double base_mu = 0.0, mfm_mu = 0.0;
  double base_error = 0.0, mfm_error = 0.0;
};

// Desk-scale schedule. The modulator step size is scaled up from the
// long-schedule default (1e-3 over ~1e5 steps) to match the few hundred
// steps these runs take; 0.1 was fixed by a pilot grid before freezing the
// margins below.
TrainConfig desk_config(uint64_t seed, int64_t epochs) {
  TrainConfig cfg;
  cfg.batch_n = 100;
  cfg.batch_m = 0;  // derive c * min(10, meta per class)
  cfg.alpha = 0.01;
  cfg.eta = 0.1;
  cfg.momentum = 0.9;
  cfg.weight_decay = 5e-4;
  cfg.epochs = epochs;
  cfg.seed = seed;
  return cfg;
}

PairedRun paired_synthetic_run(const DatasetBundle& bundle, const ClassifierNet& net,
                               TrainConfig cfg) {
  PairedRun out;
  ParamSet w0 = net.init_params(derive_seed(cfg.seed, "net_init"));

  TrainResult base = train_baseline(bundle, net, detach_all(w0, true), cfg);
  MetricsReport base_rep = evaluate(net, base.classifier, bundle.test);

  Modulator mod = network_modulator(net, 100, {net.sites().back()});
  ParamSet phi0 = mod.init_params(derive_seed(cfg.seed, "mod_init"));
  TrainResult mfm = train(bundle, net, mod, detach_all(w0, true), std::move(phi0), cfg);
  MetricsReport mfm_rep = evaluate(net, mfm.classifier, bundle.test);

  const size_t minority = base_rep.per_class_recall.size() - 1;
  out.base_minority_recall = base_rep.per_class_recall[minority];
  out.mfm_minority_recall = mfm_rep.per_class_recall[minority];
  out.base_mu = base_rep.mean_recall;
  out.mfm_mu = mfm_rep.mean_recall;
  out.base_error = base_rep.top1_error;
  out.mfm_error = mfm_rep.top1_error;
  return out;
}

// 4. 2-class 2-D Gaussians, separation 2.0, IF=100: minority-class recall
//    gain >= 10 points on the balanced test set; mean recall improves for
//    every seed.
Outcome criterion4(std::string& detail) {
  Timer timer;
  double gain_sum = 0.0;
  bool mu_all = true;
  std::string per_seed;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    LongTailSpec spec{2, 1000, 100.0, 400 + seed};
    DatasetBundle bundle =
        make_synthetic_gaussians(2, 2, spec, 2.0, {MetaStrategy::development, 20, 500});
    ClassifierNet net = build_mlp(2, {32}, 2);
    PairedRun run = paired_synthetic_run(bundle, net, desk_config(500 + seed, 50));
    gain_sum += run.mfm_minority_recall - run.base_minority_recall;
    mu_all = mu_all && run.mfm_mu > run.base_mu;
    per_seed += " +" + std::to_string(run.mfm_minority_recall - run.base_minority_recall);
  }
  const double mean_gain = gain_sum / 5.0;
  detail = "mean minority-recall gain " + std::to_string(mean_gain) +
           " (per seed:" + per_seed + "), mean-recall improved on all seeds: " +
           (mu_all ? "yes" : "no") + ", " + std::to_string(timer.seconds()) + " s";
  return mean_gain >= 0.10 && mu_all ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 5. Fashion-MNIST downscale: modified LeNet, IF=100, n_max=2000, 30 epochs,
//    3 seeds; MFM top-1 error strictly below baseline for every seed.
Outcome criterion5(std::string& detail) {
  std::string dir = "data/fashion-mnist";
  if (const char* env = std::getenv("MFM_FASHION_DIR")) dir = env;
  const fs::path train_images = fs::path(dir) / "train-images-idx3-ubyte";
  const fs::path train_labels = fs::path(dir) / "train-labels-idx1-ubyte";
  const fs::path test_images = fs::path(dir) / "t10k-images-idx3-ubyte";
  const fs::path test_labels = fs::path(dir) / "t10k-labels-idx1-ubyte";
  if (!fs::exists(train_images) || !fs::exists(train_labels) ||
      !fs::exists(test_images) || !fs::exists(test_labels)) {
    detail = "Fashion-MNIST IDX files not found under '" + dir +
             "' (set MFM_FASHION_DIR); criterion requires the real dataset";
    return Outcome::skip;
  }

  Timer timer;
  Dataset source = load_idx(train_images.string(), train_labels.string());
  Dataset test = load_idx(test_images.string(), test_labels.string());

  bool all_better = true;
  std::string per_seed;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    LongTailSpec spec{10, 2000, 100.0, 900 + seed};
    DatasetBundle bundle;
    Dataset train = build_longtail(source, spec);
    auto [train2, meta] = extract_meta(train, MetaStrategy::development, 10,
                                       derive_seed(spec.seed, "meta"));
    bundle.train = std::move(train2);
    bundle.meta = std::move(meta);
    bundle.test = test;
    bundle.provenance.spec = spec;
    bundle.provenance.source = "fashion-mnist";
    bundle.provenance.meta_strategy = MetaStrategy::development;
    bundle.provenance.meta_per_class = 10;
    bundle.provenance.train_counts = bundle.train.class_histogram();
    bundle.provenance.meta_counts = bundle.meta.class_histogram();
    bundle.provenance.test_counts = bundle.test.class_histogram();

    ClassifierNet net = build_lenet(10);
    TrainConfig cfg = desk_config(910 + seed, 30);
    PairedRun run = paired_synthetic_run(bundle, net, cfg);
    all_better = all_better && run.mfm_error < run.base_error;
    per_seed += " [base " + std::to_string(run.base_error) + " vs mfm " +
                std::to_string(run.mfm_error) + "]";
  }
  detail = "per-seed top-1 errors:" + per_seed + ", " + std::to_string(timer.seconds()) +
           " s";
  return all_better ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 6. Two-site MLP: modulating the last site is at least as good (mean over
//    5 seeds) as modulating the first.
Outcome criterion6(std::string& detail) {
  Timer timer;
  LongTailSpec spec{2, 1000, 100.0, 600};
  DatasetBundle bundle =
      make_synthetic_gaussians(2, 2, spec, 2.0, {MetaStrategy::development, 20, 500});
  ClassifierNet net = build_mlp(2, {32, 32}, 2);
  TrainConfig cfg = desk_config(610, 50);

  auto cells = ablation_matrix(bundle, net, cfg, {{"h1"}, {"h2"}},
                               {ConstraintMode::full}, 5, 100);
  if (cells.size() != 2 || cells[0].failed || cells[1].failed) {
    detail = "ablation cells failed to train";
    return Outcome::fail;
  }
  detail = "mean error first site " + std::to_string(cells[0].mean_error) +
           ", last site " + std::to_string(cells[1].mean_error) + ", " +
           std::to_string(timer.seconds()) + " s";
  return cells[1].mean_error <= cells[0].mean_error ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 7. Modulator trained on task A (IF=200) and frozen helps fresh training on
//    task B with different class geometry, for IF in {10, 100}.
Outcome criterion7(std::string& detail) {
  Timer timer;
  LongTailSpec src_spec{2, 1000, 200.0, 700};
  DatasetBundle source =
      make_synthetic_gaussians(2, 4, src_spec, 2.0, {MetaStrategy::development, 20, 500});
  std::vector<std::pair<std::string, DatasetBundle>> targets;
  for (double target_if : {10.0, 100.0}) {
    LongTailSpec t{2, 1000, target_if, 777};  // different seed: different frame
    targets.emplace_back("if" + std::to_string(static_cast<int>(target_if)),
                         make_synthetic_gaussians(2, 4, t, 2.0,
                                                  {MetaStrategy::development, 20, 500}));
  }
  ClassifierNet net = build_mlp(4, {32}, 2);
  TrainConfig cfg = desk_config(710, 50);

  auto rows = transfer_experiment(source, targets, net, cfg, 5, 100);
  bool ok = true;
  detail.clear();
  for (const auto& name : {"if10", "if100"}) {
    double base = -1.0, frozen = -1.0;
    for (const auto& r : rows) {
      if (r.dataset == name && r.method == "baseline") base = r.mean_recall_mean;
      if (r.dataset == name && r.method == "frozen-transfer") frozen = r.mean_recall_mean;
    }
    ok = ok && frozen >= base;
    detail += std::string(name) + ": baseline mu " + std::to_string(base) +
              " vs frozen mu " + std::to_string(frozen) + "; ";
  }
  detail += std::to_string(timer.seconds()) + " s";
  return ok ? Outcome::pass : Outcome::fail;
}

// ---------------------------------------------------------------------------
// 8. Module invariants, compact and self-contained.
Outcome criterion8(std::string& detail) {
  Timer timer;
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  {  // identity modulation
    ClassifierNet net = build_mlp(3, {8, 6}, 4);
    ParamSet params = net.init_params(801);
    Rng rng(802);
    std::vector<double> xv(21);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    Tensor x = Tensor::from_data({7, 3}, xv);
    Tensor plain = forward_plain(net, params, x);
    ModulationMap mods;
    for (const auto& s : net.sites()) {
      mods.emplace(s.name, ModulationParams{Tensor::ones({7, s.width}),
                                            Tensor::zeros({7, s.width})});
    }
    Tensor modded = forward_modulated(net, params, x, mods);
    double worst = 0.0;
    for (size_t i = 0; i < plain.data().size(); ++i) {
      worst = std::max(worst, std::fabs(plain.data()[i] - modded.data()[i]));
    }
    expect(worst < 1e-9, "identity modulation");
  }
  {  // inference purity
    LongTailSpec spec{2, 60, 5.0, 803};
    DatasetBundle bundle =
        make_synthetic_gaussians(2, 2, spec, 2.0, {MetaStrategy::development, 5, 30});
    ClassifierNet net = build_mlp(2, {6}, 2);
    Modulator mod = network_modulator(net, 8, {net.sites().back()});
    TrainConfig cfg;
    cfg.batch_n = 16;
    cfg.batch_m = 4;
    cfg.alpha = 0.05;
    cfg.eta = 1e-2;
    cfg.epochs = 1;
    cfg.seed = 804;
    TrainResult res = train(bundle, net, mod, net.init_params(805),
                            mod.init_params(806), cfg);
    const uint64_t before = mod.emit_count();
    const uint64_t modded_before = modulated_forward_count();
    (void)evaluate(net, res.classifier, bundle.test);
    expect(mod.emit_count() == before && modulated_forward_count() == modded_before,
           "inference purity counter");
  }
  {  // profile monotonicity
    Rng rng(807);
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      LongTailSpec spec;
      spec.num_classes = 2 + static_cast<int64_t>(rng.below(20));
      spec.n_max = 50 + static_cast<int64_t>(rng.below(3000));
      spec.imbalance_factor = 1.0 + rng.uniform() * 100.0;
      auto counts = class_count_profile(spec);
      for (size_t k = 1; k < counts.size(); ++k) ok = ok && counts[k] <= counts[k - 1];
      ok = ok && counts.front() == spec.n_max;
    }
    expect(ok, "profile monotonicity");
  }
  {  // split conservation
    LongTailSpec spec{5, 80, 4.0, 808};
    Dataset source;
    source.sample_shape = {2};
    source.num_classes = 5;
    for (int64_t k = 0; k < 5; ++k) {
      for (int64_t i = 0; i < 80; ++i) {
        source.values.push_back(static_cast<float>(k));
        source.values.push_back(static_cast<float>(i));
        source.labels.push_back(static_cast<int32_t>(k));
        source.ids.push_back(static_cast<int64_t>(source.ids.size()));
      }
    }
    Dataset train = build_longtail(source, spec);
    auto [train2, meta] = extract_meta(train, MetaStrategy::meta, 5, 809);
    bool ok = train2.size() + meta.size() == train.size();
    auto h_train = train.class_histogram();
    auto h2 = train2.class_histogram();
    auto hm = meta.class_histogram();
    for (size_t k = 0; k < 5; ++k) ok = ok && h2[k] + hm[k] == h_train[k];
    for (int64_t id : meta.ids) {
      ok = ok && std::find(train2.ids.begin(), train2.ids.end(), id) == train2.ids.end();
    }
    expect(ok, "split conservation");
  }
  {  // report-oracle equivalence (constant predictor, exact counting)
    ClassifierNet net = build_mlp(4, {4}, 4);
    ParamSet params = net.init_params(810);
    for (double& v : params.at("out.w").mutable_data()) v = 0.0;
    auto& b = params.at("out.b").mutable_data();
    std::fill(b.begin(), b.end(), 0.0);
    b[2] = 5.0;
    Dataset ds;
    ds.sample_shape = {4};
    ds.num_classes = 4;
    Rng rng(811);
    for (int64_t i = 0; i < 40; ++i) {
      for (int64_t j = 0; j < 4; ++j) ds.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
      ds.labels.push_back(static_cast<int32_t>(rng.below(4)));
      ds.ids.push_back(i);
    }
    MetricsReport rep = evaluate(net, params, ds);
    auto hist = ds.class_histogram();
    bool ok = rep.per_class_recall[2] == (hist[2] > 0 ? 1.0 : 0.0);
    ok = ok && rep.predicted_histogram[2] == 1.0;
    ok = ok && std::fabs(rep.top1_error -
                         (1.0 - static_cast<double>(hist[2]) / 40.0)) < 1e-15;
    int64_t diag = 0, total = 0;
    for (size_t r = 0; r < 4; ++r) {
      for (size_t c2 = 0; c2 < 4; ++c2) total += rep.confusion[r][c2];
    }
    diag = rep.confusion[2][2];
    ok = ok && total == 40 && diag == hist[2];
    expect(ok, "report-oracle equivalence");
  }
  {  // variant constraint checks
    ClassifierNet net = build_mlp(4, {10}, 4);
    Rng rng(812);
    auto soft = [&](int64_t n) {
      std::vector<double> v(static_cast<size_t>(n * 4));
      for (int64_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < 4; ++j) {
          v[static_cast<size_t>(i * 4 + j)] = rng.uniform(0.05, 1.0);
          sum += v[static_cast<size_t>(i * 4 + j)];
        }
        for (int64_t j = 0; j < 4; ++j) v[static_cast<size_t>(i * 4 + j)] /= sum;
      }
      return Tensor::from_data({n, 4}, v);
    };
    bool ok = true;
    for (auto variant : {ModulatorVariant::paper_default, ModulatorVariant::gated,
                         ModulatorVariant::channel_attention}) {
      ModulatorSpec spec;
      spec.kind = ModulatorKind::network;
      spec.variant = variant;
      spec.input_dim = 4;
      spec.hidden_dim = 8;
      spec.sites = {net.sites()[0]};
      Modulator mod(spec);
      ParamSet phi = mod.init_params(813);
      for (double& v : phi.at("out.w").mutable_data()) v = rng.uniform(-1.5, 1.5);
      for (int batch = 0; batch < 10; ++batch) {
        ModulationMap mods = mod.emit(phi, soft(100));
        const auto& gv = mods.at("h1").gamma.data();
        for (int64_t r = 0; r < 100 && ok; ++r) {
          double sum = 0.0;
          for (int64_t j = 0; j < 10; ++j) sum += gv[r * 10 + j];
          if (variant == ModulatorVariant::paper_default) ok = std::fabs(sum - 10.0) < 1e-6;
          if (variant == ModulatorVariant::gated) ok = std::fabs(sum - 1.0) < 1e-6;
          if (variant == ModulatorVariant::channel_attention) {
            for (int64_t j = 0; j < 10; ++j) {
              ok = ok && gv[r * 10 + j] > 0.0 && gv[r * 10 + j] < 1.0;
            }
          }
        }
      }
    }
    expect(ok, "variant constraints (1000 draws per variant)");
  }

  if (!failures.empty()) {
    detail = "failed: ";
    for (const auto& f : failures) detail += f + "; ";
    return Outcome::fail;
  }
  detail = "all invariant groups hold, " + std::to_string(timer.seconds()) + " s";
  return timer.seconds() < 120.0 ? Outcome::pass : Outcome::fail;
}

using CriterionFn = Outcome (*)(std::string&);

struct Criterion {
  int number;
  const char* title;
  CriterionFn fn;
};

const Criterion kCriteria[] = {
    {1, "meta-gradient finite-difference oracle", criterion1},
    {2, "weight-hashing dense-matrix equivalence", criterion2},
    {3, "eta=0 baseline reduction", criterion3},
    {4, "synthetic directional effectiveness", criterion4},
    {5, "fashion-mnist lenet downscale", criterion5},
    {6, "last-site vs first-site ablation direction", criterion6},
    {7, "frozen modulator transfer direction", criterion7},
    {8, "module invariant suites", criterion8},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    }
  }
  bool any_fail = false, any_skip = false;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    std::string detail;
    Outcome outcome;
    try {
      outcome = c.fn(detail);
    } catch (const std::exception& e) {
      outcome = Outcome::fail;
      detail = std::string("exception: ") + e.what();
    }
    const char* tag = outcome == Outcome::pass ? "[PASS]"
                      : outcome == Outcome::fail ? "[FAIL]"
                                                 : "[SKIP]";
    std::cout << tag << " criterion " << c.number << ": " << c.title << " — " << detail
              << "\n";
    any_fail |= outcome == Outcome::fail;
    any_skip |= outcome == Outcome::skip;
  }
  if (any_fail) return 1;
  if (any_skip) return 77;
  return 0;
}
