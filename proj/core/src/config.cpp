#include "mfm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mfm {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_i64(const std::string& section, const std::string& key,
                  const std::string& v) {
  try {
    size_t used = 0;
    const int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + section + "." + key + " expects an integer, got '" +
                      v + "'");
  }
}

uint64_t parse_u64(const std::string& section, const std::string& key,
                   const std::string& v) {
  try {
    size_t used = 0;
    const uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + section + "." + key + " expects an unsigned integer, got '" +
                      v + "'");
  }
}

double parse_f64(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: " + section + "." + key + " expects a number, got '" + v +
                      "'");
  }
}

bool parse_bool(const std::string& section, const std::string& key,
                const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + section + "." + key + " expects true/false, got '" + v +
                    "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

std::vector<int64_t> parse_i64_list(const std::string& section, const std::string& key,
                                    const std::string& v) {
  std::vector<int64_t> out;
  for (const auto& item : split_list(v)) out.push_back(parse_i64(section, key, item));
  return out;
}

std::string format_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ",";
    out += s;
  }
  return out;
}

std::string join_i64_list(const std::vector<int64_t>& v) {
  std::string out;
  for (int64_t x : v) {
    if (!out.empty()) out += ",";
    out += std::to_string(x);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

// One canonical key table drives parsing, serialization and overrides.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto add = [&](const std::string& path, Setter s) { t.emplace(path, std::move(s)); };

    add("data.kind", [](ExperimentConfig& c, const std::string& v) {
      if (v != "synthetic" && v != "idx") {
        throw ConfigError("config: data.kind must be synthetic or idx, got '" + v + "'");
      }
      c.data.kind = v;
    });
    add("data.classes", [](ExperimentConfig& c, const std::string& v) {
      c.data.classes = parse_i64("data", "classes", v);
    });
    add("data.dim", [](ExperimentConfig& c, const std::string& v) {
      c.data.dim = parse_i64("data", "dim", v);
    });
    add("data.separation", [](ExperimentConfig& c, const std::string& v) {
      c.data.separation = parse_f64("data", "separation", v);
    });
    add("data.n_max", [](ExperimentConfig& c, const std::string& v) {
      c.data.n_max = parse_i64("data", "n_max", v);
    });
    add("data.imbalance_factor", [](ExperimentConfig& c, const std::string& v) {
      c.data.imbalance_factor = parse_f64("data", "imbalance_factor", v);
    });
    add("data.seed", [](ExperimentConfig& c, const std::string& v) {
      c.data.seed = parse_u64("data", "seed", v);
    });
    add("data.meta_strategy", [](ExperimentConfig& c, const std::string& v) {
      meta_strategy_from_string(v);  // validates
      c.data.meta_strategy = v;
    });
    add("data.meta_per_class", [](ExperimentConfig& c, const std::string& v) {
      c.data.meta_per_class = parse_i64("data", "meta_per_class", v);
    });
    add("data.test_per_class", [](ExperimentConfig& c, const std::string& v) {
      c.data.test_per_class = parse_i64("data", "test_per_class", v);
    });
    add("data.train_images", [](ExperimentConfig& c, const std::string& v) {
      c.data.train_images = v;
    });
    add("data.train_labels", [](ExperimentConfig& c, const std::string& v) {
      c.data.train_labels = v;
    });
    add("data.test_images", [](ExperimentConfig& c, const std::string& v) {
      c.data.test_images = v;
    });
    add("data.test_labels", [](ExperimentConfig& c, const std::string& v) {
      c.data.test_labels = v;
    });

    add("model.arch", [](ExperimentConfig& c, const std::string& v) {
      if (v != "mlp" && v != "lenet") {
        throw ConfigError("config: model.arch must be mlp or lenet, got '" + v + "'");
      }
      c.model.arch = v;
    });
    add("model.hidden", [](ExperimentConfig& c, const std::string& v) {
      c.model.hidden = parse_i64_list("model", "hidden", v);
    });
    add("model.input_dim", [](ExperimentConfig& c, const std::string& v) {
      c.model.input_dim = parse_i64("model", "input_dim", v);
    });

    add("modulator.kind", [](ExperimentConfig& c, const std::string& v) {
      modulator_kind_from_string(v);
      c.modulator.kind = v;
    });
    add("modulator.variant", [](ExperimentConfig& c, const std::string& v) {
      modulator_variant_from_string(v);
      c.modulator.variant = v;
    });
    add("modulator.hidden_dim", [](ExperimentConfig& c, const std::string& v) {
      c.modulator.hidden_dim = parse_i64("modulator", "hidden_dim", v);
    });
    add("modulator.use_weight_hash", [](ExperimentConfig& c, const std::string& v) {
      c.modulator.use_weight_hash = parse_bool("modulator", "use_weight_hash", v);
    });
    add("modulator.wh_dim_gamma", [](ExperimentConfig& c, const std::string& v) {
      c.modulator.wh_dim_gamma = parse_i64("modulator", "wh_dim_gamma", v);
    });
    add("modulator.wh_dim_beta", [](ExperimentConfig& c, const std::string& v) {
      c.modulator.wh_dim_beta = parse_i64("modulator", "wh_dim_beta", v);
    });
    add("modulator.wh_seed", [](ExperimentConfig& c, const std::string& v) {
      c.modulator.wh_seed = parse_u64("modulator", "wh_seed", v);
    });

    add("train.batch_n", [](ExperimentConfig& c, const std::string& v) {
      c.train.batch_n = parse_i64("train", "batch_n", v);
    });
    add("train.batch_m", [](ExperimentConfig& c, const std::string& v) {
      c.train.batch_m = parse_i64("train", "batch_m", v);
    });
    add("train.alpha", [](ExperimentConfig& c, const std::string& v) {
      c.train.alpha = parse_f64("train", "alpha", v);
    });
    add("train.lr_schedule", [](ExperimentConfig& c, const std::string& v) {
      parse_lr_schedule(v);  // validates
      c.train.lr_schedule = v;
    });
    add("train.eta", [](ExperimentConfig& c, const std::string& v) {
      c.train.eta = parse_f64("train", "eta", v);
    });
    add("train.momentum", [](ExperimentConfig& c, const std::string& v) {
      c.train.momentum = parse_f64("train", "momentum", v);
    });
    add("train.weight_decay", [](ExperimentConfig& c, const std::string& v) {
      c.train.weight_decay = parse_f64("train", "weight_decay", v);
    });
    add("train.epochs", [](ExperimentConfig& c, const std::string& v) {
      c.train.epochs = parse_i64("train", "epochs", v);
    });
    add("train.seed", [](ExperimentConfig& c, const std::string& v) {
      c.train.seed = parse_u64("train", "seed", v);
    });
    add("train.meta_grad", [](ExperimentConfig& c, const std::string& v) {
      meta_grad_mode_from_string(v);
      c.train.meta_grad = v;
    });
    add("train.active_sites", [](ExperimentConfig& c, const std::string& v) {
      c.train.active_sites = split_list(v);
    });
    add("train.checkpoint_every", [](ExperimentConfig& c, const std::string& v) {
      c.train.checkpoint_every = parse_i64("train", "checkpoint_every", v);
    });

    add("eval.test_profile", [](ExperimentConfig& c, const std::string& v) {
      test_kind_from_string(v);
      c.eval.test_profile = v;
    });
    add("eval.profile_imbalance", [](ExperimentConfig& c, const std::string& v) {
      c.eval.profile_imbalance = parse_f64("eval", "profile_imbalance", v);
    });
    add("eval.profile_seed", [](ExperimentConfig& c, const std::string& v) {
      c.eval.profile_seed = parse_u64("eval", "profile_seed", v);
    });
    add("eval.seeds", [](ExperimentConfig& c, const std::string& v) {
      c.eval.seeds = parse_i64("eval", "seeds", v);
    });
    return t;
  }();
  return table;
}

}  // namespace

std::vector<LrPoint> parse_lr_schedule(const std::string& text) {
  std::vector<LrPoint> out;
  for (const auto& item : split_list(text)) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("config: lr_schedule entries are epoch:lr, got '" + item + "'");
    }
    LrPoint pt;
    pt.epoch = parse_i64("train", "lr_schedule", trim(item.substr(0, colon)));
    pt.lr = parse_f64("train", "lr_schedule", trim(item.substr(colon + 1)));
    if (!out.empty() && pt.epoch <= out.back().epoch) {
      throw ConfigError("config: lr_schedule epochs must be strictly increasing");
    }
    out.push_back(pt);
  }
  return out;
}

std::string format_lr_schedule(const std::vector<LrPoint>& schedule) {
  std::string out;
  for (const auto& pt : schedule) {
    if (!out.empty()) out += ",";
    out += std::to_string(pt.epoch) + ":" + format_f64(pt.lr);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "data" && section != "model" && section != "modulator" &&
          section != "train" && section != "eval") {
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": key outside a section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string path = section + "." + key;
    auto it = setters().find(path);
    if (it == setters().end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key " + path);
    }
    it->second(cfg, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[data]\n";
  out << "kind = " << cfg.data.kind << "\n";
  out << "classes = " << cfg.data.classes << "\n";
  out << "dim = " << cfg.data.dim << "\n";
  out << "separation = " << format_f64(cfg.data.separation) << "\n";
  out << "n_max = " << cfg.data.n_max << "\n";
  out << "imbalance_factor = " << format_f64(cfg.data.imbalance_factor) << "\n";
  out << "seed = " << cfg.data.seed << "\n";
  out << "meta_strategy = " << cfg.data.meta_strategy << "\n";
  out << "meta_per_class = " << cfg.data.meta_per_class << "\n";
  out << "test_per_class = " << cfg.data.test_per_class << "\n";
  out << "train_images = " << cfg.data.train_images << "\n";
  out << "train_labels = " << cfg.data.train_labels << "\n";
  out << "test_images = " << cfg.data.test_images << "\n";
  out << "test_labels = " << cfg.data.test_labels << "\n";
  out << "\n[model]\n";
  out << "arch = " << cfg.model.arch << "\n";
  out << "hidden = " << join_i64_list(cfg.model.hidden) << "\n";
  out << "input_dim = " << cfg.model.input_dim << "\n";
  out << "\n[modulator]\n";
  out << "kind = " << cfg.modulator.kind << "\n";
  out << "variant = " << cfg.modulator.variant << "\n";
  out << "hidden_dim = " << cfg.modulator.hidden_dim << "\n";
  out << "use_weight_hash = " << (cfg.modulator.use_weight_hash ? "true" : "false") << "\n";
  out << "wh_dim_gamma = " << cfg.modulator.wh_dim_gamma << "\n";
  out << "wh_dim_beta = " << cfg.modulator.wh_dim_beta << "\n";
  out << "wh_seed = " << cfg.modulator.wh_seed << "\n";
  out << "\n[train]\n";
  out << "batch_n = " << cfg.train.batch_n << "\n";
  out << "batch_m = " << cfg.train.batch_m << "\n";
  out << "alpha = " << format_f64(cfg.train.alpha) << "\n";
  out << "lr_schedule = " << cfg.train.lr_schedule << "\n";
  out << "eta = " << format_f64(cfg.train.eta) << "\n";
  out << "momentum = " << format_f64(cfg.train.momentum) << "\n";
  out << "weight_decay = " << format_f64(cfg.train.weight_decay) << "\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "meta_grad = " << cfg.train.meta_grad << "\n";
  out << "active_sites = " << join_list(cfg.train.active_sites) << "\n";
  out << "checkpoint_every = " << cfg.train.checkpoint_every << "\n";
  out << "\n[eval]\n";
  out << "test_profile = " << cfg.eval.test_profile << "\n";
  out << "profile_imbalance = " << format_f64(cfg.eval.profile_imbalance) << "\n";
  out << "profile_seed = " << cfg.eval.profile_seed << "\n";
  out << "seeds = " << cfg.eval.seeds << "\n";
  return out.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not section.key=value");
  }
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  auto it = setters().find(path);
  if (it == setters().end()) {
    throw ConfigError("override: unknown key " + path);
  }
  it->second(cfg, value);
}

LongTailSpec longtail_spec_of(const ExperimentConfig& cfg) {
  LongTailSpec spec;
  spec.num_classes = cfg.data.classes;
  spec.n_max = cfg.data.n_max;
  spec.imbalance_factor = cfg.data.imbalance_factor;
  spec.seed = cfg.data.seed;
  return spec;
}

TrainConfig train_config_of(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.batch_n = cfg.train.batch_n;
  t.batch_m = cfg.train.batch_m;
  t.alpha = cfg.train.alpha;
  t.lr_schedule = parse_lr_schedule(cfg.train.lr_schedule);
  t.eta = cfg.train.eta;
  t.momentum = cfg.train.momentum;
  t.weight_decay = cfg.train.weight_decay;
  t.epochs = cfg.train.epochs;
  t.seed = cfg.train.seed;
  t.meta_grad = meta_grad_mode_from_string(cfg.train.meta_grad);
  t.active_sites = cfg.train.active_sites;
  t.checkpoint_every = cfg.train.checkpoint_every;
  return t;
}

}  // namespace mfm
