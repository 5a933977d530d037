#include "mfm/autodiff.hpp"

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mfm/ops.hpp"

namespace mfm {

namespace {

// Reverse topological order of the recorded graph reachable from `root`.
// Iterative post-order DFS; deterministic because node input order is fixed.
std::vector<TensorImpl*> topo_order(const Tensor& root) {
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* t;
    size_t next_input;
  };
  std::vector<Frame> stack;
  if (root.impl()->producer) stack.push_back({root.impl().get(), 0});
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* node = f.t->producer.get();
    if (f.next_input < node->inputs.size()) {
      TensorImpl* in = node->inputs[f.next_input++].impl().get();
      if (in->producer && !visited.count(in)) {
        visited.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(f.t);
      stack.pop_back();
    }
  }
  return order;  // parents after children; iterate in reverse
}

std::unordered_map<TensorImpl*, Tensor> backward_map(const Tensor& loss,
                                                     bool create_graph) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  auto order = topo_order(loss);
  std::unordered_map<TensorImpl*, Tensor> grads;
  grads.emplace(loss.impl().get(), Tensor::ones(loss.shape()));

  GradGuard guard(create_graph);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* t = *it;
    auto found = grads.find(t);
    if (found == grads.end()) continue;  // no downstream contribution
    const Tensor& gout = found->second;
    Node* node = t->producer.get();
    std::vector<Tensor> input_grads = node->vjp(gout);
    if (input_grads.size() != node->inputs.size()) {
      throw Error(std::string("backward: vjp of ") + node->op + " returned " +
                  std::to_string(input_grads.size()) + " grads for " +
                  std::to_string(node->inputs.size()) + " inputs");
    }
    for (size_t i = 0; i < node->inputs.size(); ++i) {
      const Tensor& in = node->inputs[i];
      if (!in.requires_grad()) continue;
      auto [slot, fresh] = grads.try_emplace(in.impl().get(), input_grads[i]);
      if (!fresh) slot->second = add(slot->second, input_grads[i]);
    }
  }
  return grads;
}

}  // namespace

ParamSet backward(const Tensor& loss, const ParamSet& wrt, bool create_graph) {
  auto grads = backward_map(loss, create_graph);
  ParamSet out;
  for (const auto& [name, t] : wrt) {
    auto it = grads.find(t.impl().get());
    out.emplace(name, it != grads.end() ? it->second : Tensor::zeros(t.shape()));
  }
  return out;
}

std::vector<Tensor> backward(const Tensor& loss, const std::vector<Tensor>& wrt,
                             bool create_graph) {
  auto grads = backward_map(loss, create_graph);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& t : wrt) {
    auto it = grads.find(t.impl().get());
    out.push_back(it != grads.end() ? it->second : Tensor::zeros(t.shape()));
  }
  return out;
}

ParamSet virtual_sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
  if (params.size() != grads.size()) {
    throw Error("virtual_sgd_step: " + std::to_string(params.size()) +
                " params vs " + std::to_string(grads.size()) + " grads");
  }
  ParamSet out;
  auto git = grads.begin();
  for (const auto& [name, w] : params) {
    if (git->first != name) {
      throw Error("virtual_sgd_step: key mismatch '" + name + "' vs '" +
                  git->first + "'");
    }
    out.emplace(name, sub(w, scale(git->second, lr)));
    ++git;
  }
  return out;
}

}  // namespace mfm
