#include "mfm/modulator.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfm/ops.hpp"
#include "mfm/random.hpp"

using json = nlohmann::json;

namespace mfm {

WeightHashSpec WeightHashSpec::make(int64_t m_gamma, int64_t m_beta, int64_t d_gamma,
                                    int64_t d_beta, uint64_t seed) {
  if (m_gamma < 1 || m_beta < 1 || d_gamma < 1 || d_beta < 1) {
    throw Error("weight hash: dimensions must be positive");
  }
  WeightHashSpec spec;
  spec.seed = seed;
  auto fill = [&](WeightHashSide& side, int64_t m, int64_t d, const char* stream) {
    side.m = m;
    side.d = d;
    side.kappa.resize(static_cast<size_t>(d));
    side.zeta.resize(static_cast<size_t>(d));
    Rng rng(derive_seed(seed, stream));
    for (int64_t i = 0; i < d; ++i) {
      side.kappa[static_cast<size_t>(i)] =
          static_cast<int64_t>(rng.below(static_cast<uint64_t>(m)));
      side.zeta[static_cast<size_t>(i)] = (rng.u64() & 1) ? int8_t{1} : int8_t{-1};
    }
  };
  fill(spec.gamma, m_gamma, d_gamma, "wh_gamma");
  fill(spec.beta, m_beta, d_beta, "wh_beta");
  return spec;
}

Tensor weight_hash_expand(const Tensor& x,
                          const std::shared_ptr<const WeightHashSide>& side) {
  if (x.ndim() != 2 || x.dim(1) != side->m) {
    throw ShapeError("weight_hash_expand: expected [B," + std::to_string(side->m) +
                     "], got " + shape_str(x.shape()));
  }
  const int64_t b = x.dim(0), m = side->m, d = side->d;
  const auto& xv = x.data();
  std::vector<double> out(static_cast<size_t>(b * d));
  for (int64_t r = 0; r < b; ++r) {
    const double* src = xv.data() + r * m;
    double* dst = out.data() + r * d;
    for (int64_t i = 0; i < d; ++i) {
      dst[i] = src[side->kappa[static_cast<size_t>(i)]] *
               static_cast<double>(side->zeta[static_cast<size_t>(i)]);
    }
  }
  return make_op("weight_hash_expand", {b, d}, std::move(out), {x},
                 [side](const Tensor& g) -> std::vector<Tensor> {
                   return {weight_hash_collapse(g, side)};
                 });
}

Tensor weight_hash_collapse(const Tensor& dtheta,
                            const std::shared_ptr<const WeightHashSide>& side) {
  if (dtheta.ndim() != 2 || dtheta.dim(1) != side->d) {
    throw ShapeError("weight_hash_collapse: expected [B," + std::to_string(side->d) +
                     "], got " + shape_str(dtheta.shape()));
  }
  const int64_t b = dtheta.dim(0), m = side->m, d = side->d;
  const auto& gv = dtheta.data();
  std::vector<double> out(static_cast<size_t>(b * m), 0.0);
  for (int64_t r = 0; r < b; ++r) {
    const double* src = gv.data() + r * d;
    double* dst = out.data() + r * m;
    for (int64_t i = 0; i < d; ++i) {
      dst[side->kappa[static_cast<size_t>(i)]] +=
          src[i] * static_cast<double>(side->zeta[static_cast<size_t>(i)]);
    }
  }
  return make_op("weight_hash_collapse", {b, m}, std::move(out), {dtheta},
                 [side](const Tensor& g) -> std::vector<Tensor> {
                   return {weight_hash_expand(g, side)};
                 });
}

const char* to_string(ModulatorKind k) {
  return k == ModulatorKind::tabular ? "tabular" : "network";
}

const char* to_string(ModulatorVariant v) {
  switch (v) {
    case ModulatorVariant::paper_default: return "paper_default";
    case ModulatorVariant::film: return "film";
    case ModulatorVariant::channel_attention: return "channel_attention";
    default: return "gated";
  }
}

const char* to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::full: return "full";
    case ConstraintMode::beta_zero: return "beta_zero";
    default: return "gamma_one";
  }
}

ModulatorKind modulator_kind_from_string(const std::string& s) {
  if (s == "tabular") return ModulatorKind::tabular;
  if (s == "network") return ModulatorKind::network;
  throw ConfigError("unknown modulator kind '" + s + "'");
}

ModulatorVariant modulator_variant_from_string(const std::string& s) {
  if (s == "paper_default") return ModulatorVariant::paper_default;
  if (s == "film") return ModulatorVariant::film;
  if (s == "channel_attention") return ModulatorVariant::channel_attention;
  if (s == "gated") return ModulatorVariant::gated;
  throw ConfigError("unknown modulator variant '" + s + "'");
}

ConstraintMode constraint_mode_from_string(const std::string& s) {
  if (s == "full") return ConstraintMode::full;
  if (s == "beta_zero") return ConstraintMode::beta_zero;
  if (s == "gamma_one") return ConstraintMode::gamma_one;
  throw ConfigError("unknown constraint mode '" + s + "'");
}

int64_t ModulatorSpec::total_width() const {
  int64_t w = 0;
  for (const auto& s : sites) w += s.width;
  return w;
}

int64_t ModulatorSpec::raw_output_dim() const {
  if (wh) return wh->gamma.m + wh->beta.m;
  return 2 * total_width();
}

Modulator::Modulator(ModulatorSpec spec)
    : spec_(std::move(spec)),
      emit_count_(std::make_shared<std::atomic<uint64_t>>(0)) {
  if (spec_.sites.empty()) throw Error("modulator: no sites configured");
  if (spec_.kind == ModulatorKind::tabular && spec_.wh) {
    throw Error("modulator: tabular rows are direct (gamma, beta) values; "
                "weight hashing applies to the network kind only");
  }
  if (spec_.wh) {
    if (spec_.wh->gamma.d != spec_.total_width() ||
        spec_.wh->beta.d != spec_.total_width()) {
      throw Error("modulator: weight hash expanded dims must equal total site width " +
                  std::to_string(spec_.total_width()));
    }
    wh_gamma_ = std::make_shared<const WeightHashSide>(spec_.wh->gamma);
    wh_beta_ = std::make_shared<const WeightHashSide>(spec_.wh->beta);
  }
}

ParamSet Modulator::init_params(uint64_t seed) const {
  ParamSet phi;
  if (spec_.kind == ModulatorKind::tabular) {
    if (spec_.table_rows < 1) throw Error("modulator: tabular kind needs table_rows");
    // Zero rows = identity modulation for every sample.
    Tensor t = Tensor::zeros({spec_.table_rows, 2 * spec_.total_width()});
    t.set_requires_grad(true);
    phi.emplace("table", std::move(t));
    return phi;
  }
  if (spec_.input_dim < 1) throw Error("modulator: network kind needs input_dim");
  auto he_tensor = [&](const std::string& name, Shape shape, int64_t fan_in) {
    Rng rng(derive_seed(seed, "modulator." + name));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = stddev * rng.normal();
    Tensor t = Tensor::from_data(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    phi.emplace(name, std::move(t));
  };
  auto zero_tensor = [&](const std::string& name, Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    t.set_requires_grad(true);
    phi.emplace(name, std::move(t));
  };
  he_tensor("hidden.w", {spec_.hidden_dim, spec_.input_dim}, spec_.input_dim);
  zero_tensor("hidden.b", {spec_.hidden_dim});
  // Zero output layer: gamma-hat = beta-hat = 0, i.e. identity modulation
  // at the start of training.
  zero_tensor("out.w", {spec_.raw_output_dim(), spec_.hidden_dim});
  zero_tensor("out.b", {spec_.raw_output_dim()});
  return phi;
}

ModulationMap Modulator::split_and_constrain(const Tensor& raw, ConstraintMode mode) const {
  const int64_t total = spec_.total_width();
  Tensor gamma_hat, beta_hat;
  if (spec_.wh) {
    Tensor g_comp = slice(raw, 1, 0, spec_.wh->gamma.m);
    Tensor b_comp = slice(raw, 1, spec_.wh->gamma.m, spec_.wh->beta.m);
    gamma_hat = weight_hash_expand(g_comp, wh_gamma_);
    beta_hat = weight_hash_expand(b_comp, wh_beta_);
  } else {
    gamma_hat = slice(raw, 1, 0, total);
    beta_hat = slice(raw, 1, total, total);
  }

  const int64_t n = raw.dim(0);
  ModulationMap mods;
  int64_t offset = 0;
  for (const auto& site : spec_.sites) {
    Tensor gh = slice(gamma_hat, 1, offset, site.width);
    Tensor bh = slice(beta_hat, 1, offset, site.width);
    offset += site.width;

    ModulationParams mp;
    switch (spec_.variant) {
      case ModulatorVariant::paper_default:
        mp.gamma = scale(softmax(gh, 1), static_cast<double>(site.width));
        mp.beta = bh;
        break;
      case ModulatorVariant::film:
        mp.gamma = gh;  // unconstrained affine
        mp.beta = bh;
        break;
      case ModulatorVariant::channel_attention:
        mp.gamma = sigmoid(gh);
        mp.beta = Tensor::zeros({n, site.width});
        break;
      case ModulatorVariant::gated:
        mp.gamma = softmax(gh, 1);
        mp.beta = Tensor::zeros({n, site.width});
        break;
    }
    if (mode == ConstraintMode::beta_zero) {
      mp.beta = Tensor::zeros({n, site.width});
    } else if (mode == ConstraintMode::gamma_one) {
      mp.gamma = Tensor::ones({n, site.width});
    }

    // Per-emission activation constraint checks.
    const auto& gv = mp.gamma.data();
    if (mode != ConstraintMode::gamma_one) {
      if (spec_.variant == ModulatorVariant::paper_default ||
          spec_.variant == ModulatorVariant::gated) {
        const double target =
            spec_.variant == ModulatorVariant::paper_default
                ? static_cast<double>(site.width)
                : 1.0;
        for (int64_t r = 0; r < n; ++r) {
          double s = 0.0;
          for (int64_t j = 0; j < site.width; ++j) s += gv[r * site.width + j];
          if (std::abs(s - target) > 1e-6) {
            throw Error("modulator: gamma row sums to " + std::to_string(s) +
                        ", expected " + std::to_string(target));
          }
        }
      } else if (spec_.variant == ModulatorVariant::channel_attention) {
        for (double v : gv) {
          if (v <= 0.0 || v >= 1.0) {
            throw Error("modulator: channel_attention gamma outside (0,1)");
          }
        }
      }
    }
    mods.emplace(site.name, std::move(mp));
  }
  emit_count_->fetch_add(1);
  return mods;
}

ModulationMap Modulator::emit(const ParamSet& phi, const Tensor& soft_labels,
                              ConstraintMode mode) const {
  if (spec_.kind != ModulatorKind::network) {
    throw Error("modulator: emit(soft_labels) requires the network kind");
  }
  if (soft_labels.ndim() != 2 || soft_labels.dim(1) != spec_.input_dim) {
    throw ShapeError("modulator: soft labels must be [B," +
                     std::to_string(spec_.input_dim) + "], got " +
                     shape_str(soft_labels.shape()));
  }
  const auto& sv = soft_labels.data();
  const int64_t b = soft_labels.dim(0), c = spec_.input_dim;
  for (int64_t r = 0; r < b; ++r) {
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double p = sv[r * c + j];
      if (p < 0.0) throw Error("modulator: soft label has negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw Error("modulator: soft label row sums to " + std::to_string(sum));
    }
  }
  Tensor h = relu(linear(soft_labels, phi.at("hidden.w"), phi.at("hidden.b")));
  Tensor raw = linear(h, phi.at("out.w"), phi.at("out.b"));
  return split_and_constrain(raw, mode);
}

ModulationMap Modulator::emit_tabular(const ParamSet& phi,
                                      const std::vector<int64_t>& ids,
                                      ConstraintMode mode) const {
  if (spec_.kind != ModulatorKind::tabular) {
    throw Error("modulator: emit_tabular requires the tabular kind");
  }
  Tensor rows = gather_rows(phi.at("table"), ids);
  return split_and_constrain(rows, mode);
}

namespace {

constexpr uint32_t kModulatorVersion = 1;

json wh_side_to_json(const WeightHashSide& s) {
  std::vector<int> zeta(s.zeta.begin(), s.zeta.end());
  return json{{"m", s.m}, {"d", s.d}, {"kappa", s.kappa}, {"zeta", zeta}};
}

WeightHashSide wh_side_from_json(const json& j) {
  WeightHashSide s;
  s.m = j.at("m").get<int64_t>();
  s.d = j.at("d").get<int64_t>();
  s.kappa = j.at("kappa").get<std::vector<int64_t>>();
  for (int v : j.at("zeta").get<std::vector<int>>()) {
    s.zeta.push_back(static_cast<int8_t>(v));
  }
  if (static_cast<int64_t>(s.kappa.size()) != s.d ||
      static_cast<int64_t>(s.zeta.size()) != s.d) {
    throw IoError("modulator checkpoint: hash arrays disagree with d");
  }
  return s;
}

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw IoError("checkpoint: truncated file " + path);
  }
  return v;
}

}  // namespace

void write_paramset(std::ostream& out, const ParamSet& params);
ParamSet read_paramset(std::istream& in, const std::string& path);

void save_modulator(const std::string& path, const Modulator& mod, const ParamSet& phi) {
  const auto& spec = mod.spec();
  json j{{"kind", to_string(spec.kind)},
         {"variant", to_string(spec.variant)},
         {"input_dim", spec.input_dim},
         {"hidden_dim", spec.hidden_dim},
         {"table_rows", spec.table_rows}};
  json sites = json::array();
  for (const auto& s : spec.sites) {
    sites.push_back({{"name", s.name}, {"width", s.width}});
  }
  j["sites"] = sites;
  if (spec.wh) {
    j["wh"] = json{{"seed", spec.wh->seed},
                   {"gamma", wh_side_to_json(spec.wh->gamma)},
                   {"beta", wh_side_to_json(spec.wh->beta)}};
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("modulator checkpoint: cannot open " + path + " for writing");
  out.write("MFMM", 4);
  write_pod(out, kModulatorVersion);
  const std::string text = j.dump();
  write_pod(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_paramset(out, phi);
  if (!out) throw IoError("modulator checkpoint: write failed for " + path);
}

std::pair<Modulator, ParamSet> load_modulator(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("modulator checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MFMM", 4) != 0) {
    throw IoError("modulator checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<uint32_t>(in, path);
  if (version != kModulatorVersion) {
    throw IoError("modulator checkpoint: unsupported version in " + path);
  }
  const auto text_len = read_pod<uint32_t>(in, path);
  std::string text(text_len, '\0');
  if (!in.read(text.data(), text_len)) throw IoError("checkpoint: truncated file " + path);
  json j = json::parse(text);

  ModulatorSpec spec;
  spec.kind = modulator_kind_from_string(j.at("kind").get<std::string>());
  spec.variant = modulator_variant_from_string(j.at("variant").get<std::string>());
  spec.input_dim = j.at("input_dim").get<int64_t>();
  spec.hidden_dim = j.at("hidden_dim").get<int64_t>();
  spec.table_rows = j.at("table_rows").get<int64_t>();
  for (const auto& sj : j.at("sites")) {
    spec.sites.push_back({sj.at("name").get<std::string>(), 0,
                          sj.at("width").get<int64_t>()});
  }
  if (j.contains("wh")) {
    WeightHashSpec wh;
    wh.seed = j.at("wh").at("seed").get<uint64_t>();
    wh.gamma = wh_side_from_json(j.at("wh").at("gamma"));
    wh.beta = wh_side_from_json(j.at("wh").at("beta"));
    spec.wh = std::move(wh);
  }
  Modulator mod(std::move(spec));
  ParamSet phi = read_paramset(in, path);
  return {std::move(mod), std::move(phi)};
}

}  // namespace mfm
