#include "mfm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfm/autodiff.hpp"
#include "mfm/ops.hpp"
#include "mfm/parallel.hpp"
#include "mfm/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mfm {

const char* to_string(MetaGradMode m) {
  return m == MetaGradMode::exact ? "exact" : "first_order";
}

MetaGradMode meta_grad_mode_from_string(const std::string& s) {
  if (s == "exact") return MetaGradMode::exact;
  if (s == "first_order") return MetaGradMode::first_order;
  throw ConfigError("unknown meta_grad mode '" + s + "'");
}

std::vector<SiteSpec> resolve_active_sites(const ClassifierNet& net,
                                           const std::vector<std::string>& names) {
  std::vector<SiteSpec> out;
  if (names.empty()) {
    if (net.sites().empty()) throw Error("net exposes no modulation sites");
    out.push_back(net.sites().back());
    return out;
  }
  for (const auto& n : names) out.push_back(net.site(n));
  return out;
}

namespace {

Tensor soft_labels_of(const ClassifierNet& net, const ParamSet& w, const Tensor& x) {
  NoGradGuard ng;
  return softmax(net.forward(w, x), 1);
}

ModulationMap emit_mods(const Modulator& mod, const ParamSet& phi, const Tensor& soft,
                        const std::vector<int64_t>& rows, ConstraintMode mode) {
  if (mod.spec().kind == ModulatorKind::tabular) {
    return mod.emit_tabular(phi, rows, mode);
  }
  return mod.emit(phi, soft, mode);
}

// Plain SGD on phi (Eq.-6 side has no momentum or weight decay).
ParamSet sgd_plain(const ParamSet& params, const ParamSet& grads, double lr) {
  ParamSet out;
  auto git = grads.begin();
  for (const auto& [name, w] : params) {
    const auto& wv = w.data();
    const auto& gv = git->second.data();
    std::vector<double> nv(wv.size());
    for (size_t i = 0; i < wv.size(); ++i) nv[i] = wv[i] - lr * gv[i];
    Tensor t = Tensor::from_data(w.shape(), std::move(nv));
    t.set_requires_grad(true);
    out.emplace(name, std::move(t));
    ++git;
  }
  return out;
}

// v = mu * v + (g + wd * w); w -= lr * v.
ParamSet sgd_momentum(const ParamSet& params, const ParamSet& grads, OptState& opt,
                      double lr, double momentum, double weight_decay) {
  ParamSet out;
  auto git = grads.begin();
  for (const auto& [name, w] : params) {
    const auto& wv = w.data();
    const auto& gv = git->second.data();
    auto vit = opt.velocity.find(name);
    if (vit == opt.velocity.end()) {
      vit = opt.velocity.emplace(name, Tensor::zeros(w.shape())).first;
    }
    std::vector<double> nv(wv.size()), nw(wv.size());
    const auto& vv = vit->second.data();
    for (size_t i = 0; i < wv.size(); ++i) {
      nv[i] = momentum * vv[i] + gv[i] + weight_decay * wv[i];
      nw[i] = wv[i] - lr * nv[i];
    }
    vit->second = Tensor::from_data(w.shape(), std::move(nv));
    Tensor t = Tensor::from_data(w.shape(), std::move(nw));
    t.set_requires_grad(true);
    out.emplace(name, std::move(t));
    ++git;
  }
  return out;
}

double grad_norm(const ParamSet& grads) { return l2_norm(grads); }

[[noreturn]] void abort_step(const char* where, int64_t step, double train_loss,
                             double meta_loss, double gnorm) {
  throw TrainError(std::string("non-finite loss in ") + where + " at step " +
                   std::to_string(step) + " (train_loss=" + std::to_string(train_loss) +
                   ", meta_loss=" + std::to_string(meta_loss) +
                   ", grad_norm=" + std::to_string(gnorm) + ")");
}

struct VirtualStep {
  ParamSet w_hat;
  Tensor meta_loss;
};

VirtualStep make_virtual_step(const ClassifierNet& net, const ParamSet& w,
                              const Modulator& modulator, const ParamSet& phi,
                              const TrainBatch& train_batch, const TrainBatch& meta_batch,
                              double alpha, ConstraintMode mode) {
  Tensor soft = soft_labels_of(net, w, train_batch.x);
  ModulationMap mods = emit_mods(modulator, phi, soft, train_batch.rows, mode);
  Tensor loss = cross_entropy_with_softmax(
      forward_modulated(net, w, train_batch.x, mods), train_batch.targets);
  ParamSet gw = backward(loss, w, /*create_graph=*/true);
  VirtualStep vs;
  vs.w_hat = virtual_sgd_step(w, gw, alpha);
  vs.meta_loss = cross_entropy_with_softmax(
      forward_plain(net, vs.w_hat, meta_batch.x), meta_batch.targets);
  return vs;
}

// DARTS-style finite-difference surrogate for the mixed second-order term:
// grad_phi L ~= -alpha * [grad_phi l(w+, phi) - grad_phi l(w-, phi)] / (2 eps)
// with w+- = w +- eps * grad_what(meta loss).
ParamSet first_order_meta_grad(const ClassifierNet& net, const ParamSet& w,
                               const Modulator& modulator, const ParamSet& phi,
                               const TrainBatch& train_batch, const TrainBatch& meta_batch,
                               double alpha, ConstraintMode mode) {
  Tensor soft = soft_labels_of(net, w, train_batch.x);
  ParamSet w_hat;
  {
    // Plain (non-differentiable) virtual step.
    ModulationMap mods;
    {
      NoGradGuard ng;
      mods = emit_mods(modulator, phi, soft, train_batch.rows, mode);
    }
    ParamSet w_live = detach_all(w, /*requires_grad=*/true);
    Tensor loss = cross_entropy_with_softmax(
        forward_modulated(net, w_live, train_batch.x, mods), train_batch.targets);
    ParamSet gw = backward(loss, w_live, /*create_graph=*/false);
    NoGradGuard ng;
    w_hat = virtual_sgd_step(detach_all(w, false), gw, alpha);
  }
  ParamSet v;
  {
    ParamSet w_hat_live = detach_all(w_hat, /*requires_grad=*/true);
    Tensor mloss = cross_entropy_with_softmax(
        forward_plain(net, w_hat_live, meta_batch.x), meta_batch.targets);
    v = backward(mloss, w_hat_live, /*create_graph=*/false);
  }
  const double vnorm = grad_norm(v);
  if (vnorm == 0.0) {
    ParamSet zeros;
    for (const auto& [name, t] : phi) zeros.emplace(name, Tensor::zeros(t.shape()));
    return zeros;
  }
  const double eps = 0.01 / vnorm;

  auto phi_grad_at = [&](double shift) {
    ParamSet w_shift;
    {
      NoGradGuard ng;
      auto vit = v.begin();
      for (const auto& [name, t] : w) {
        const auto& wv = t.data();
        const auto& dv = vit->second.data();
        std::vector<double> nv(wv.size());
        for (size_t i = 0; i < wv.size(); ++i) nv[i] = wv[i] + shift * dv[i];
        w_shift.emplace(name, Tensor::from_data(t.shape(), std::move(nv)));
        ++vit;
      }
    }
    ModulationMap mods = emit_mods(modulator, phi, soft, train_batch.rows, mode);
    Tensor loss = cross_entropy_with_softmax(
        forward_modulated(net, w_shift, train_batch.x, mods), train_batch.targets);
    return backward(loss, phi, /*create_graph=*/false);
  };

  ParamSet plus = phi_grad_at(eps);
  ParamSet minus = phi_grad_at(-eps);
  ParamSet out;
  auto mit = minus.begin();
  for (const auto& [name, gp] : plus) {
    const auto& pv = gp.data();
    const auto& mv = mit->second.data();
    std::vector<double> nv(pv.size());
    const double k = -alpha / (2.0 * eps);
    for (size_t i = 0; i < pv.size(); ++i) nv[i] = k * (pv[i] - mv[i]);
    out.emplace(name, Tensor::from_data(gp.shape(), std::move(nv)));
    ++mit;
  }
  return out;
}

}  // namespace

double bilevel_meta_loss(const ClassifierNet& net, const ParamSet& w,
                         const Modulator& modulator, const ParamSet& phi,
                         const TrainBatch& train_batch, const TrainBatch& meta_batch,
                         double alpha, ConstraintMode mode) {
  ParamSet w_live = detach_all(w, /*requires_grad=*/true);
  ParamSet phi_live = detach_all(phi, /*requires_grad=*/true);
  VirtualStep vs = make_virtual_step(net, w_live, modulator, phi_live, train_batch,
                                     meta_batch, alpha, mode);
  return vs.meta_loss.item();
}

ParamSet bilevel_meta_grad(const ClassifierNet& net, const ParamSet& w,
                           const Modulator& modulator, const ParamSet& phi,
                           const TrainBatch& train_batch, const TrainBatch& meta_batch,
                           double alpha, ConstraintMode mode) {
  ParamSet w_live = detach_all(w, /*requires_grad=*/true);
  ParamSet phi_live = detach_all(phi, /*requires_grad=*/true);
  VirtualStep vs = make_virtual_step(net, w_live, modulator, phi_live, train_batch,
                                     meta_batch, alpha, mode);
  return backward(vs.meta_loss, phi_live, /*create_graph=*/false);
}

StepLogRow train_step(const ClassifierNet& net, ParamSet& w, const Modulator* modulator,
                      ParamSet& phi, const TrainBatch& train_batch,
                      const TrainBatch& meta_batch, const TrainConfig& cfg, double lr,
                      OptState& opt, bool update_phi) {
  StepLogRow row;
  row.lr = lr;
  row.meta_loss = std::numeric_limits<double>::quiet_NaN();

  if (modulator == nullptr) {  // plain ERM
    Tensor loss = cross_entropy_with_softmax(forward_plain(net, w, train_batch.x),
                                             train_batch.targets);
    ParamSet gw = backward(loss, w, /*create_graph=*/false);
    row.train_loss = loss.item();
    if (!std::isfinite(row.train_loss)) {
      abort_step("baseline step", row.step, row.train_loss, row.meta_loss, grad_norm(gw));
    }
    w = sgd_momentum(w, gw, opt, lr, cfg.momentum, cfg.weight_decay);
    return row;
  }

  Tensor soft = soft_labels_of(net, w, train_batch.x);

  const bool run_meta = update_phi && cfg.eta != 0.0;
  if (run_meta) {
    if (cfg.meta_grad == MetaGradMode::exact) {
      VirtualStep vs = make_virtual_step(net, w, *modulator, phi, train_batch,
                                         meta_batch, lr, cfg.constraint);
      row.meta_loss = vs.meta_loss.item();
      ParamSet gphi = backward(vs.meta_loss, phi, /*create_graph=*/false);
      if (!std::isfinite(row.meta_loss)) {
        abort_step("meta update", row.step, row.train_loss, row.meta_loss,
                   grad_norm(gphi));
      }
      phi = sgd_plain(phi, gphi, cfg.eta);
    } else {
      ParamSet gphi = first_order_meta_grad(net, w, *modulator, phi, train_batch,
                                            meta_batch, lr, cfg.constraint);
      {
        NoGradGuard ng;
        row.meta_loss = cross_entropy_with_softmax(
                            forward_plain(net, w, meta_batch.x), meta_batch.targets)
                            .item();
      }
      phi = sgd_plain(phi, gphi, cfg.eta);
    }
  } else if (meta_batch.x.defined()) {
    NoGradGuard ng;
    row.meta_loss =
        cross_entropy_with_softmax(forward_plain(net, w, meta_batch.x), meta_batch.targets)
            .item();
  }

  // Real update (Eq.-7 side): fresh modulation from the updated phi, held
  // constant; the soft labels from the current w are reused.
  ModulationMap mods;
  {
    NoGradGuard ng;
    mods = emit_mods(*modulator, phi, soft, train_batch.rows, cfg.constraint);
  }
  Tensor loss = cross_entropy_with_softmax(
      forward_modulated(net, w, train_batch.x, mods), train_batch.targets);
  ParamSet gw = backward(loss, w, /*create_graph=*/false);
  row.train_loss = loss.item();
  if (!std::isfinite(row.train_loss)) {
    abort_step("real update", row.step, row.train_loss, row.meta_loss, grad_norm(gw));
  }
  w = sgd_momentum(w, gw, opt, lr, cfg.momentum, cfg.weight_decay);
  return row;
}

namespace {

// Class-stratified round-robin over the meta split: per-class queues in
// seeded order, reshuffled on exhaustion. Batches are balanced whenever
// batch_m is a multiple of the class count; otherwise the extra slots
// rotate across classes.
class MetaSampler {
 public:
  MetaSampler(const Dataset& meta, uint64_t seed)
      : rng_(derive_seed(seed, "meta_cycle")) {
    queues_.resize(static_cast<size_t>(meta.num_classes));
    positions_.assign(static_cast<size_t>(meta.num_classes), 0);
    for (int64_t i = 0; i < meta.size(); ++i) {
      queues_[static_cast<size_t>(meta.labels[static_cast<size_t>(i)])].push_back(i);
    }
    for (auto& q : queues_) rng_.shuffle(q);
  }

  bool empty() const {
    for (const auto& q : queues_) {
      if (!q.empty()) return false;
    }
    return true;
  }

  std::vector<int64_t> next(int64_t batch_m) {
    const int64_t c = static_cast<int64_t>(queues_.size());
    std::vector<int64_t> rows;
    rows.reserve(static_cast<size_t>(batch_m));
    const int64_t quota = batch_m / c;
    const int64_t extra = batch_m % c;
    for (int64_t k = 0; k < c; ++k) {
      int64_t want = quota;
      if (extra > 0) {
        const int64_t rot = (k - rotation_) % c;
        if (rot >= 0 && rot < extra) ++want;
      }
      for (int64_t i = 0; i < want; ++i) {
        auto& q = queues_[static_cast<size_t>(k)];
        if (q.empty()) continue;  // class absent from the meta split
        auto& pos = positions_[static_cast<size_t>(k)];
        if (pos >= q.size()) {
          rng_.shuffle(q);
          pos = 0;
        }
        rows.push_back(q[pos++]);
      }
    }
    rotation_ = (rotation_ + extra) % c;
    return rows;
  }

 private:
  std::vector<std::vector<int64_t>> queues_;
  std::vector<size_t> positions_;
  int64_t rotation_ = 0;
  Rng rng_;
};

TrainBatch make_batch(const Dataset& ds, const std::vector<int64_t>& rows) {
  TrainBatch b;
  b.x = ds.gather_batch(rows);
  std::vector<int32_t> labels(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    labels[i] = ds.labels[static_cast<size_t>(rows[i])];
  }
  b.targets = make_onehot(labels, ds.num_classes);
  b.rows = rows;
  return b;
}

enum class Role { baseline, mfm, frozen };

TrainResult run_training(const DatasetBundle& data, const ClassifierNet& net,
                         const Modulator* modulator, ParamSet w, ParamSet phi,
                         const TrainConfig& cfg, Role role) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.mode = role == Role::baseline ? "baseline" : (role == Role::mfm ? "mfm" : "frozen");

  if (data.train.size() == 0) throw TrainError("train: empty training split");
  if (cfg.batch_n < 1) throw TrainError("train: batch_n must be >= 1");
  if (cfg.alpha <= 0.0) throw TrainError("train: alpha must be > 0");
  if (cfg.eta < 0.0) throw TrainError("train: eta must be >= 0");

  int64_t batch_m = cfg.batch_m;
  if (modulator != nullptr) {
    if (data.meta.size() == 0) throw TrainError("train: empty meta split");
    const auto meta_hist = data.meta.class_histogram();
    const auto mn = *std::min_element(meta_hist.begin(), meta_hist.end());
    const auto mx = *std::max_element(meta_hist.begin(), meta_hist.end());
    if (mn != mx) {
      result.warnings.push_back(
          "meta split is not class-balanced (min " + std::to_string(mn) + ", max " +
          std::to_string(mx) + " per class)");
    }
    if (batch_m == 0) {
      batch_m = data.train.num_classes * std::min<int64_t>(10, std::max<int64_t>(1, mn));
    }
    batch_m = std::min(batch_m, data.meta.size());
  }

  Rng data_rng(derive_seed(cfg.seed, "data_shuffle"));
  MetaSampler meta_sampler(data.meta, cfg.seed);
  OptState opt;
  double lr = cfg.alpha;
  int64_t step = 0;

  std::vector<int64_t> order(static_cast<size_t>(data.train.size()));
  for (int64_t i = 0; i < data.train.size(); ++i) order[static_cast<size_t>(i)] = i;

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& pt : cfg.lr_schedule) {
      if (pt.epoch == epoch) lr = pt.lr;
    }
    data_rng.shuffle(order);
    for (int64_t start = 0; start < data.train.size(); start += cfg.batch_n) {
      const int64_t end = std::min<int64_t>(start + cfg.batch_n, data.train.size());
      std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
      TrainBatch tb = make_batch(data.train, rows);
      TrainBatch mb;
      if (modulator != nullptr) mb = make_batch(data.meta, meta_sampler.next(batch_m));

      StepLogRow row;
      try {
        row = train_step(net, w, modulator, phi, tb, mb, cfg, lr, opt,
                         /*update_phi=*/role == Role::mfm);
      } catch (const TrainError& e) {
        throw TrainError("step " + std::to_string(step) + " (epoch " +
                         std::to_string(epoch) + "): " + e.what());
      }
      row.step = step++;
      row.epoch = epoch;
      result.log.push_back(row);
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      save_classifier((fs::path(cfg.out_dir) /
                       ("classifier_ep" + std::to_string(epoch + 1) + ".mfmc"))
                          .string(),
                      net, w);
      if (modulator != nullptr) {
        save_modulator((fs::path(cfg.out_dir) /
                        ("modulator_ep" + std::to_string(epoch + 1) + ".mfmm"))
                           .string(),
                       *modulator, phi);
      }
    }
  }

  result.classifier = std::move(w);
  result.phi = std::move(phi);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    save_classifier((fs::path(cfg.out_dir) / "classifier_final.mfmc").string(), net,
                    result.classifier);
    if (modulator != nullptr) {
      save_modulator((fs::path(cfg.out_dir) / "modulator_final.mfmm").string(),
                     *modulator, result.phi);
    }
    write_run_artifacts(cfg.out_dir, result, cfg, data.provenance, net, modulator);
  }
  return result;
}

}  // namespace

TrainResult train(const DatasetBundle& data, const ClassifierNet& net,
                  const Modulator& modulator, ParamSet w0, ParamSet phi0,
                  const TrainConfig& cfg) {
  return run_training(data, net, &modulator, std::move(w0), std::move(phi0), cfg,
                      Role::mfm);
}

TrainResult train_baseline(const DatasetBundle& data, const ClassifierNet& net,
                           ParamSet w0, const TrainConfig& cfg) {
  return run_training(data, net, nullptr, std::move(w0), ParamSet{}, cfg, Role::baseline);
}

TrainResult train_with_frozen_modulator(const DatasetBundle& data,
                                        const ClassifierNet& net,
                                        const Modulator& modulator, ParamSet phi_frozen,
                                        ParamSet w0, const TrainConfig& cfg) {
  // The checkpointed modulator must agree with the target task and net.
  if (modulator.spec().kind == ModulatorKind::tabular) {
    throw TrainError("frozen modulator: tabular rows are keyed to their own "
                     "training set; transfer requires the network kind");
  }
  if (modulator.spec().kind == ModulatorKind::network &&
      modulator.spec().input_dim != data.train.num_classes) {
    throw TrainError("frozen modulator: input_dim " +
                     std::to_string(modulator.spec().input_dim) + " vs task classes " +
                     std::to_string(data.train.num_classes));
  }
  auto active = resolve_active_sites(net, cfg.active_sites);
  if (active.size() != modulator.spec().sites.size()) {
    throw TrainError("frozen modulator: drives " +
                     std::to_string(modulator.spec().sites.size()) + " sites, " +
                     std::to_string(active.size()) + " active on the target net");
  }
  for (size_t i = 0; i < active.size(); ++i) {
    if (modulator.spec().sites[i].width != active[i].width) {
      throw TrainError("frozen modulator: site '" + modulator.spec().sites[i].name +
                       "' width " + std::to_string(modulator.spec().sites[i].width) +
                       " vs target site '" + active[i].name + "' width " +
                       std::to_string(active[i].width));
    }
  }
  // Re-key the modulator's site names onto the target's active sites.
  ModulatorSpec spec = modulator.spec();
  for (size_t i = 0; i < active.size(); ++i) spec.sites[i].name = active[i].name;
  Modulator bound(std::move(spec));
  return run_training(data, net, &bound, std::move(w0), std::move(phi_frozen), cfg,
                      Role::frozen);
}

void write_run_artifacts(const std::string& out_dir, const TrainResult& result,
                         const TrainConfig& cfg, const BundleProvenance& provenance,
                         const ClassifierNet& net, const Modulator* modulator) {
  fs::create_directories(out_dir);

  {
    std::ofstream csv(fs::path(out_dir) / "metrics.csv");
    if (!csv) throw IoError("train: cannot write metrics.csv in " + out_dir);
    csv << "step,epoch,train_loss,meta_loss,lr\n";
    char buf[64];
    for (const auto& row : result.log) {
      csv << row.step << ',' << row.epoch << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", row.train_loss);
      csv << buf << ',';
      if (std::isfinite(row.meta_loss)) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.meta_loss);
        csv << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", row.lr);
      csv << ',' << buf << '\n';
    }
    if (!csv) throw IoError("train: metrics.csv write failed in " + out_dir);
  }

  json schedule = json::array();
  for (const auto& pt : cfg.lr_schedule) {
    schedule.push_back({{"epoch", pt.epoch}, {"lr", pt.lr}});
  }
  json manifest{
      {"mode", result.mode},
      {"code_version", kVersion},
      {"threads", max_threads()},
      {"wall_seconds", result.wall_seconds},
      {"warnings", result.warnings},
      {"steps", result.log.size()},
      {"config",
       {{"batch_n", cfg.batch_n},
        {"batch_m", cfg.batch_m},
        {"alpha", cfg.alpha},
        {"lr_schedule", schedule},
        {"eta", cfg.eta},
        {"momentum", cfg.momentum},
        {"weight_decay", cfg.weight_decay},
        {"epochs", cfg.epochs},
        {"seed", cfg.seed},
        {"meta_grad", to_string(cfg.meta_grad)},
        {"active_sites", cfg.active_sites},
        {"constraint", to_string(cfg.constraint)},
        {"checkpoint_every", cfg.checkpoint_every}}},
      {"dataset",
       {{"source", provenance.source},
        {"num_classes", provenance.spec.num_classes},
        {"n_max", provenance.spec.n_max},
        {"imbalance_factor", provenance.spec.imbalance_factor},
        {"seed", provenance.spec.seed},
        {"meta_strategy", to_string(provenance.meta_strategy)},
        {"meta_per_class", provenance.meta_per_class},
        {"train_counts", provenance.train_counts},
        {"meta_counts", provenance.meta_counts},
        {"test_counts", provenance.test_counts}}},
      {"num_sites", net.sites().size()},
      {"modulator",
       modulator == nullptr
           ? json(nullptr)
           : json{{"kind", to_string(modulator->spec().kind)},
                  {"variant", to_string(modulator->spec().variant)},
                  {"hidden_dim", modulator->spec().hidden_dim},
                  {"weight_hash", modulator->spec().wh.has_value()}}}};
  if (!result.log.empty()) {
    manifest["final"] = {{"train_loss", result.log.back().train_loss},
                         {"meta_loss", result.log.back().meta_loss}};
  }
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw IoError("train: cannot write manifest.json in " + out_dir);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("train: manifest.json write failed in " + out_dir);
}

}  // namespace mfm
