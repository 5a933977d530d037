#include "mfm/net.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfm/ops.hpp"
#include "mfm/random.hpp"

using json = nlohmann::json;

namespace mfm {

namespace {
std::atomic<uint64_t> g_modulated_forwards{0};

const char* kind_name(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::conv: return "conv";
    case LayerSpec::Kind::maxpool: return "maxpool";
    case LayerSpec::Kind::relu: return "relu";
    case LayerSpec::Kind::flatten: return "flatten";
    case LayerSpec::Kind::gap: return "gap";
    default: return "linear";
  }
}

LayerSpec::Kind kind_from_name(const std::string& s) {
  if (s == "conv") return LayerSpec::Kind::conv;
  if (s == "maxpool") return LayerSpec::Kind::maxpool;
  if (s == "relu") return LayerSpec::Kind::relu;
  if (s == "flatten") return LayerSpec::Kind::flatten;
  if (s == "gap") return LayerSpec::Kind::gap;
  if (s == "linear") return LayerSpec::Kind::linear;
  throw IoError("classifier checkpoint: unknown layer kind '" + s + "'");
}
}  // namespace

uint64_t modulated_forward_count() { return g_modulated_forwards.load(); }

ClassifierNet::ClassifierNet(Shape input_shape, int64_t num_classes,
                             std::vector<LayerSpec> layers, std::vector<SiteSpec> sites)
    : input_shape_(std::move(input_shape)),
      num_classes_(num_classes),
      layers_(std::move(layers)),
      sites_(std::move(sites)) {}

const SiteSpec& ClassifierNet::site(const std::string& name) const {
  for (const auto& s : sites_) {
    if (s.name == name) return s;
  }
  throw Error("net: no modulation site named '" + name + "'");
}

bool ClassifierNet::has_site(const std::string& name) const {
  for (const auto& s : sites_) {
    if (s.name == name) return true;
  }
  return false;
}

ParamSet ClassifierNet::init_params(uint64_t seed) const {
  ParamSet params;
  Shape cur = input_shape_;
  auto he_tensor = [&](const std::string& name, Shape shape, int64_t fan_in) {
    Rng rng(derive_seed(seed, name));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : v) x = stddev * rng.normal();
    Tensor t = Tensor::from_data(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    params.emplace(name, std::move(t));
  };
  auto zero_tensor = [&](const std::string& name, Shape shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    t.set_requires_grad(true);
    params.emplace(name, std::move(t));
  };
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const int64_t c = cur[0];
        he_tensor(l.name + ".w", {l.out_channels, c, l.kernel, l.kernel},
                  c * l.kernel * l.kernel);
        zero_tensor(l.name + ".b", {l.out_channels});
        cur = {l.out_channels, (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1,
               (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1};
        break;
      }
      case LayerSpec::Kind::maxpool:
        cur = {cur[0], (cur[1] - l.pool_k) / l.pool_stride + 1,
               (cur[2] - l.pool_k) / l.pool_stride + 1};
        break;
      case LayerSpec::Kind::gap:
        cur = {cur[0]};
        break;
      case LayerSpec::Kind::flatten:
        cur = {shape_numel(cur)};
        break;
      case LayerSpec::Kind::linear:
        he_tensor(l.name + ".w", {l.out_dim, cur[0]}, cur[0]);
        zero_tensor(l.name + ".b", {l.out_dim});
        cur = {l.out_dim};
        break;
      case LayerSpec::Kind::relu:
        break;
    }
  }
  return params;
}

Tensor ClassifierNet::forward(const ParamSet& params, const Tensor& batch,
                              const ModulationMap* mods) const {
  if (batch.ndim() != static_cast<int>(input_shape_.size()) + 1) {
    throw ShapeError("net: batch rank " + std::to_string(batch.ndim()) +
                     " does not match input " + shape_str(input_shape_));
  }
  for (size_t i = 0; i < input_shape_.size(); ++i) {
    if (batch.dim(static_cast<int>(i) + 1) != input_shape_[i]) {
      throw ShapeError("net: batch " + shape_str(batch.shape()) +
                       " does not match input " + shape_str(input_shape_));
    }
  }
  if (mods && !mods->empty()) g_modulated_forwards.fetch_add(1);

  const int64_t n = batch.dim(0);
  Tensor h = batch;
  for (size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    switch (l.kind) {
      case LayerSpec::Kind::conv:
        h = conv2d(h, params.at(l.name + ".w"), params.at(l.name + ".b"), l.stride, l.pad);
        break;
      case LayerSpec::Kind::maxpool:
        h = maxpool2d(h, l.pool_k, l.pool_stride);
        break;
      case LayerSpec::Kind::relu:
        h = relu(h);
        break;
      case LayerSpec::Kind::flatten:
        h = reshape(h, {n, -1});
        break;
      case LayerSpec::Kind::gap:
        h = global_avg_pool(h);
        break;
      case LayerSpec::Kind::linear:
        h = linear(h, params.at(l.name + ".w"), params.at(l.name + ".b"));
        break;
    }
    if (mods) {
      for (const auto& s : sites_) {
        if (s.layer_index != static_cast<int>(li)) continue;
        auto it = mods->find(s.name);
        if (it == mods->end()) continue;
        const auto& mp = it->second;
        if (mp.gamma.ndim() != 2 || mp.gamma.dim(0) != n || mp.gamma.dim(1) != s.width ||
            mp.beta.shape() != mp.gamma.shape()) {
          throw ShapeError("net: site '" + s.name + "' expects [batch," +
                           std::to_string(s.width) + "] modulation, got gamma " +
                           shape_str(mp.gamma.shape()) + ", beta " +
                           shape_str(mp.beta.shape()));
        }
        if (h.ndim() == 4) {
          Tensor g4 = reshape(mp.gamma, {n, s.width, 1, 1});
          Tensor b4 = reshape(mp.beta, {n, s.width, 1, 1});
          h = add(mul(h, g4), b4);
        } else {
          h = add(mul(h, mp.gamma), mp.beta);
        }
      }
    }
  }
  if (h.ndim() != 2 || h.dim(1) != num_classes_) {
    throw ShapeError("net: produced " + shape_str(h.shape()) + ", expected [batch," +
                     std::to_string(num_classes_) + "] logits");
  }
  return h;
}

Tensor forward_plain(const ClassifierNet& net, const ParamSet& params,
                     const Tensor& batch) {
  return net.forward(params, batch, nullptr);
}

Tensor forward_modulated(const ClassifierNet& net, const ParamSet& params,
                         const Tensor& batch, const ModulationMap& mods) {
  return net.forward(params, batch, &mods);
}

ClassifierNet build_lenet(int64_t num_classes) {
  std::vector<LayerSpec> layers;
  std::vector<SiteSpec> sites;
  auto conv = [&](const std::string& name, int64_t out_ch, int64_t k, int64_t pad) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::conv;
    l.name = name;
    l.out_channels = out_ch;
    l.kernel = k;
    l.stride = 1;
    l.pad = pad;
    layers.push_back(l);
  };
  auto relu_l = [&] {
    LayerSpec l;
    l.kind = LayerSpec::Kind::relu;
    layers.push_back(l);
  };
  auto pool = [&] {
    LayerSpec l;
    l.kind = LayerSpec::Kind::maxpool;
    l.pool_k = 2;
    l.pool_stride = 2;
    layers.push_back(l);
  };
  auto site = [&](const std::string& name, int64_t width) {
    sites.push_back({name, static_cast<int>(layers.size()) - 1, width});
  };

  conv("conv1", 6, 5, 2);   // 28 -> 28
  relu_l();
  site("conv1", 6);         // post-activation, pre-pool
  pool();                   // 28 -> 14
  conv("conv2", 16, 5, 0);  // 14 -> 10
  relu_l();
  site("conv2", 16);
  pool();                   // 10 -> 5
  conv("conv3", 120, 3, 0); // 5 -> 3
  relu_l();
  site("conv3", 120);
  {
    LayerSpec l;
    l.kind = LayerSpec::Kind::gap;
    layers.push_back(l);
  }
  {
    LayerSpec l;
    l.kind = LayerSpec::Kind::linear;
    l.name = "fc1";
    l.out_dim = 84;
    layers.push_back(l);
  }
  relu_l();
  site("fc1", 84);
  {
    LayerSpec l;
    l.kind = LayerSpec::Kind::linear;
    l.name = "fc2";
    l.out_dim = num_classes;
    layers.push_back(l);
  }
  return ClassifierNet({1, 28, 28}, num_classes, std::move(layers), std::move(sites));
}

ClassifierNet build_mlp(int64_t input_dim, const std::vector<int64_t>& hidden,
                        int64_t num_classes) {
  if (hidden.empty()) throw Error("build_mlp: hidden layer list must be non-empty");
  std::vector<LayerSpec> layers;
  std::vector<SiteSpec> sites;
  for (size_t i = 0; i < hidden.size(); ++i) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::linear;
    l.name = "fc" + std::to_string(i + 1);
    l.out_dim = hidden[i];
    layers.push_back(l);
    LayerSpec r;
    r.kind = LayerSpec::Kind::relu;
    layers.push_back(r);
    sites.push_back({"h" + std::to_string(i + 1),
                     static_cast<int>(layers.size()) - 1, hidden[i]});
  }
  LayerSpec out;
  out.kind = LayerSpec::Kind::linear;
  out.name = "out";
  out.out_dim = num_classes;
  layers.push_back(out);
  return ClassifierNet({input_dim}, num_classes, std::move(layers), std::move(sites));
}

namespace {

constexpr uint32_t kClassifierVersion = 1;

json net_to_json(const ClassifierNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"kind", kind_name(l.kind)},
                      {"name", l.name},
                      {"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"pad", l.pad},
                      {"pool_k", l.pool_k},
                      {"pool_stride", l.pool_stride},
                      {"out_dim", l.out_dim}});
  }
  json sites = json::array();
  for (const auto& s : net.sites()) {
    sites.push_back({{"name", s.name}, {"layer_index", s.layer_index}, {"width", s.width}});
  }
  return json{{"input_shape", net.input_shape()},
              {"num_classes", net.num_classes()},
              {"layers", layers},
              {"sites", sites}};
}

ClassifierNet net_from_json(const json& j) {
  std::vector<LayerSpec> layers;
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = kind_from_name(lj.at("kind").get<std::string>());
    l.name = lj.at("name").get<std::string>();
    l.out_channels = lj.at("out_channels").get<int64_t>();
    l.kernel = lj.at("kernel").get<int64_t>();
    l.stride = lj.at("stride").get<int64_t>();
    l.pad = lj.at("pad").get<int64_t>();
    l.pool_k = lj.at("pool_k").get<int64_t>();
    l.pool_stride = lj.at("pool_stride").get<int64_t>();
    l.out_dim = lj.at("out_dim").get<int64_t>();
    layers.push_back(std::move(l));
  }
  std::vector<SiteSpec> sites;
  for (const auto& sj : j.at("sites")) {
    sites.push_back({sj.at("name").get<std::string>(),
                     sj.at("layer_index").get<int>(),
                     sj.at("width").get<int64_t>()});
  }
  return ClassifierNet(j.at("input_shape").get<Shape>(),
                       j.at("num_classes").get<int64_t>(), std::move(layers),
                       std::move(sites));
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

void write_paramset(std::ostream& out, const ParamSet& params) {
  write_pod(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, t] : params) {  // std::map: name-sorted
    write_pod(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) write_pod(out, static_cast<int64_t>(d));
    for (double v : t.data()) write_pod(out, static_cast<float>(v));
  }
}

ParamSet read_paramset(std::istream& in, const std::string& path) {
  ParamSet params;
  const auto count = read_pod<uint32_t>(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError("checkpoint: truncated file " + path);
    const auto ndim = read_pod<uint32_t>(in, path);
    Shape shape(ndim);
    for (auto& d : shape) d = read_pod<int64_t>(in, path);
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<double>(read_pod<float>(in, path));
    Tensor t = Tensor::from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    params.emplace(std::move(name), std::move(t));
  }
  return params;
}

void save_classifier(const std::string& path, const ClassifierNet& net,
                     const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("classifier checkpoint: cannot open " + path + " for writing");
  out.write("MFMC", 4);
  write_pod(out, kClassifierVersion);
  const std::string arch = net_to_json(net).dump();
  write_pod(out, static_cast<uint32_t>(arch.size()));
  out.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  write_paramset(out, params);
  if (!out) throw IoError("classifier checkpoint: write failed for " + path);
}

std::pair<ClassifierNet, ParamSet> load_classifier(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("classifier checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MFMC", 4) != 0) {
    throw IoError("classifier checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<uint32_t>(in, path);
  if (version != kClassifierVersion) {
    throw IoError("classifier checkpoint: unsupported version in " + path);
  }
  const auto arch_len = read_pod<uint32_t>(in, path);
  std::string arch(arch_len, '\0');
  if (!in.read(arch.data(), arch_len)) throw IoError("checkpoint: truncated file " + path);
  ClassifierNet net = net_from_json(json::parse(arch));
  ParamSet params = read_paramset(in, path);

  // Shapes must agree with what the architecture implies.
  ParamSet expect = net.init_params(0);
  if (expect.size() != params.size()) {
    throw IoError("classifier checkpoint: parameter count mismatch in " + path);
  }
  auto eit = expect.begin();
  for (const auto& [name, t] : params) {
    if (eit->first != name || eit->second.shape() != t.shape()) {
      throw IoError("classifier checkpoint: parameter '" + name +
                    "' disagrees with architecture in " + path);
    }
    ++eit;
  }
  return {std::move(net), std::move(params)};
}

}  // namespace mfm
