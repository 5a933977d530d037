#include "mfm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mfm/ops.hpp"
#include "mfm/random.hpp"

namespace mfm {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

namespace {

Modulator make_network_modulator(const ClassifierNet& net, const TrainConfig& cfg,
                                 int64_t hidden_dim) {
  ModulatorSpec spec;
  spec.kind = ModulatorKind::network;
  spec.variant = ModulatorVariant::paper_default;
  spec.input_dim = net.num_classes();
  spec.hidden_dim = hidden_dim;
  spec.sites = resolve_active_sites(net, cfg.active_sites);
  return Modulator(std::move(spec));
}

}  // namespace

std::vector<AblationCell> ablation_matrix(
    const DatasetBundle& bundle, const ClassifierNet& net, const TrainConfig& base_cfg,
    const std::vector<std::vector<std::string>>& site_subsets,
    const std::vector<ConstraintMode>& modes, int64_t seeds,
    int64_t modulator_hidden_dim) {
  std::vector<AblationCell> cells;
  for (const auto& sites : site_subsets) {
    const bool baseline_row = sites.empty();
    const auto& cell_modes =
        baseline_row ? std::vector<ConstraintMode>{ConstraintMode::full} : modes;
    for (ConstraintMode mode : cell_modes) {
      AblationCell cell;
      cell.sites = sites;
      cell.mode = mode;
      try {
        for (int64_t s = 0; s < seeds; ++s) {
          TrainConfig cfg = base_cfg;
          cfg.seed = base_cfg.seed + static_cast<uint64_t>(s);
          cfg.active_sites = sites;
          cfg.constraint = mode;
          cfg.out_dir.clear();
          ParamSet w0 = net.init_params(derive_seed(cfg.seed, "net_init"));
          TrainResult res;
          if (baseline_row) {
            res = train_baseline(bundle, net, std::move(w0), cfg);
          } else {
            Modulator mod = make_network_modulator(net, cfg, modulator_hidden_dim);
            ParamSet phi0 = mod.init_params(derive_seed(cfg.seed, "mod_init"));
            res = train(bundle, net, mod, std::move(w0), std::move(phi0), cfg);
          }
          cell.per_seed_error.push_back(
              evaluate(net, res.classifier, bundle.test).top1_error);
        }
        cell.mean_error = mean_of(cell.per_seed_error);
        cell.std_error = population_std(cell.per_seed_error);
      } catch (const Error& e) {
        cell.failed = true;
        cell.failure = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells) {
  std::ofstream out(path);
  if (!out) throw IoError("ablation: cannot write " + path);
  out << "sites,mode,mean_error,std_error,per_seed,status\n";
  for (const auto& cell : cells) {
    std::string sites;
    for (const auto& s : cell.sites) {
      if (!sites.empty()) sites += ';';
      sites += s;
    }
    if (sites.empty()) sites = "(none)";
    out << sites << ',' << to_string(cell.mode) << ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", cell.mean_error);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", cell.std_error);
    out << buf << ',';
    std::string per_seed;
    for (double e : cell.per_seed_error) {
      if (!per_seed.empty()) per_seed += ';';
      std::snprintf(buf, sizeof(buf), "%.6f", e);
      per_seed += buf;
    }
    out << per_seed << ',' << (cell.failed ? ("failed: " + cell.failure) : "ok") << '\n';
  }
  if (!out) throw IoError("ablation: write failed for " + path);
}

std::vector<ModulationExportRow> export_modulation_vectors(
    const ClassifierNet& net, const ParamSet& params, const Modulator& modulator,
    const ParamSet& phi, const Dataset& dataset, const std::string& site_name,
    int64_t batch_size) {
  if (modulator.spec().kind != ModulatorKind::network) {
    throw Error("export_modulation_vectors: requires the network modulator");
  }
  bool site_known = false;
  for (const auto& s : modulator.spec().sites) site_known |= s.name == site_name;
  if (!site_known) {
    throw Error("export_modulation_vectors: site '" + site_name +
                "' is not driven by this modulator");
  }

  std::vector<ModulationExportRow> rows;
  rows.reserve(static_cast<size_t>(dataset.size()));
  NoGradGuard ng;
  for (int64_t start = 0; start < dataset.size(); start += batch_size) {
    const int64_t end = std::min<int64_t>(start + batch_size, dataset.size());
    std::vector<int64_t> batch_rows(static_cast<size_t>(end - start));
    for (int64_t i = start; i < end; ++i) batch_rows[static_cast<size_t>(i - start)] = i;
    Tensor soft = softmax(forward_plain(net, params, dataset.gather_batch(batch_rows)), 1);
    ModulationMap mods = modulator.emit(phi, soft);
    const auto& mp = mods.at(site_name);
    const auto& gv = mp.gamma.data();
    const auto& bv = mp.beta.data();
    const int64_t width = mp.gamma.dim(1);
    for (int64_t i = 0; i < end - start; ++i) {
      ModulationExportRow row;
      row.id = dataset.ids[static_cast<size_t>(start + i)];
      row.label = dataset.labels[static_cast<size_t>(start + i)];
      row.gamma.assign(gv.begin() + i * width, gv.begin() + (i + 1) * width);
      row.beta.assign(bv.begin() + i * width, bv.begin() + (i + 1) * width);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_modulation_csv(const std::string& path, const std::string& site_name,
                          const std::vector<ModulationExportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("export: cannot write " + path);
  const size_t width = rows.empty() ? 0 : rows[0].gamma.size();
  out << "# site=" << site_name << " width=" << width << '\n';
  out << "id,label";
  for (size_t j = 0; j < width; ++j) out << ",gamma_" << j;
  for (size_t j = 0; j < width; ++j) out << ",beta_" << j;
  out << '\n';
  char buf[64];
  for (const auto& row : rows) {
    out << row.id << ',' << row.label;
    for (double v : row.gamma) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << ',' << buf;
    }
    for (double v : row.beta) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("export: write failed for " + path);
}

double class_mean_gamma_separation(const std::vector<ModulationExportRow>& rows,
                                   int64_t num_classes) {
  if (rows.empty()) return 0.0;
  const size_t width = rows[0].gamma.size();
  std::vector<std::vector<double>> sums(static_cast<size_t>(num_classes),
                                        std::vector<double>(width, 0.0));
  std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
  for (const auto& row : rows) {
    auto& s = sums[static_cast<size_t>(row.label)];
    for (size_t j = 0; j < width; ++j) s[j] += row.gamma[j];
    ++counts[static_cast<size_t>(row.label)];
  }
  double total = 0.0;
  int64_t pairs = 0;
  for (int64_t a = 0; a < num_classes; ++a) {
    if (counts[static_cast<size_t>(a)] == 0) continue;
    for (int64_t b = a + 1; b < num_classes; ++b) {
      if (counts[static_cast<size_t>(b)] == 0) continue;
      double d2 = 0.0;
      for (size_t j = 0; j < width; ++j) {
        const double ma = sums[static_cast<size_t>(a)][j] / static_cast<double>(counts[static_cast<size_t>(a)]);
        const double mb = sums[static_cast<size_t>(b)][j] / static_cast<double>(counts[static_cast<size_t>(b)]);
        d2 += (ma - mb) * (ma - mb);
      }
      total += std::sqrt(d2);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

std::vector<TransferRow> transfer_experiment(
    const DatasetBundle& source,
    const std::vector<std::pair<std::string, DatasetBundle>>& targets,
    const ClassifierNet& net, const TrainConfig& cfg, int64_t seeds,
    int64_t modulator_hidden_dim) {
  std::vector<TransferRow> rows;
  auto row_for = [&](const std::string& dataset, const std::string& method) -> TransferRow& {
    for (auto& r : rows) {
      if (r.dataset == dataset && r.method == method) return r;
    }
    rows.push_back(TransferRow{dataset, method, {}, {}, 0, 0, 0, 0});
    return rows.back();
  };

  for (int64_t s = 0; s < seeds; ++s) {
    TrainConfig seed_cfg = cfg;
    seed_cfg.seed = cfg.seed + static_cast<uint64_t>(s);
    seed_cfg.out_dir.clear();

    // One source modulator per seed.
    Modulator source_mod = make_network_modulator(net, seed_cfg, modulator_hidden_dim);
    ParamSet phi_source;
    {
      ParamSet w0 = net.init_params(derive_seed(seed_cfg.seed, "net_init_source"));
      ParamSet phi0 = source_mod.init_params(derive_seed(seed_cfg.seed, "mod_init_source"));
      TrainResult res = train(source, net, source_mod, std::move(w0), std::move(phi0),
                              seed_cfg);
      phi_source = std::move(res.phi);
    }

    for (const auto& [name, bundle] : targets) {
      ParamSet w0 = net.init_params(derive_seed(seed_cfg.seed, "net_init_" + name));

      TrainResult base = train_baseline(bundle, net, detach_all(w0, true), seed_cfg);
      MetricsReport base_rep = evaluate(net, base.classifier, bundle.test);
      auto& br = row_for(name, "baseline");
      br.per_seed_mean_recall.push_back(base_rep.mean_recall);
      br.per_seed_error.push_back(base_rep.top1_error);

      Modulator target_mod = make_network_modulator(net, seed_cfg, modulator_hidden_dim);
      ParamSet phi0 = target_mod.init_params(derive_seed(seed_cfg.seed, "mod_init_" + name));
      TrainResult mfm_res =
          train(bundle, net, target_mod, detach_all(w0, true), std::move(phi0), seed_cfg);
      MetricsReport mfm_rep = evaluate(net, mfm_res.classifier, bundle.test);
      auto& mr = row_for(name, "mfm");
      mr.per_seed_mean_recall.push_back(mfm_rep.mean_recall);
      mr.per_seed_error.push_back(mfm_rep.top1_error);

      TrainResult frozen = train_with_frozen_modulator(
          bundle, net, source_mod, detach_all(phi_source, true), detach_all(w0, true),
          seed_cfg);
      MetricsReport frozen_rep = evaluate(net, frozen.classifier, bundle.test);
      auto& fr = row_for(name, "frozen-transfer");
      fr.per_seed_mean_recall.push_back(frozen_rep.mean_recall);
      fr.per_seed_error.push_back(frozen_rep.top1_error);
    }
  }

  for (auto& r : rows) {
    r.mean_recall_mean = mean_of(r.per_seed_mean_recall);
    r.mean_recall_std = population_std(r.per_seed_mean_recall);
    r.error_mean = mean_of(r.per_seed_error);
    r.error_std = population_std(r.per_seed_error);
  }
  return rows;
}

void write_transfer_csv(const std::string& path, const std::vector<TransferRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("transfer: cannot write " + path);
  out << "dataset,method,error_mean,error_std,mean_recall_mean,mean_recall_std,per_seed_error\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.method << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.error_mean);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.error_std);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.mean_recall_mean);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.mean_recall_std);
    out << buf << ',';
    std::string per_seed;
    for (double e : r.per_seed_error) {
      if (!per_seed.empty()) per_seed += ';';
      std::snprintf(buf, sizeof(buf), "%.6f", e);
      per_seed += buf;
    }
    out << per_seed << '\n';
  }
  if (!out) throw IoError("transfer: write failed for " + path);
}

}  // namespace mfm
