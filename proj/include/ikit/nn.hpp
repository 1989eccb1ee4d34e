#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ikit/autodiff.hpp"

namespace ikit {

/// Named parameter collection; the naming defines the checkpoint layout.
struct ParamSet {
  std::vector<std::pair<std::string, NodePtr>> items;

  void add(std::string name, NodePtr p) {
    items.emplace_back(std::move(name), std::move(p));
  }
  std::vector<NodePtr> nodes() const {
    std::vector<NodePtr> out;
    out.reserve(items.size());
    for (auto& [_, p] : items) out.push_back(p);
    return out;
  }
};

enum class Activation { Relu, LeakyRelu };

struct Linear {
  NodePtr W;  // in x out
  NodePtr b;  // 1 x out

  static Linear init(RngStream& rng, Index in, Index out);
  NodePtr forward(Tape& t, const NodePtr& x) const;
  void collect(ParamSet& ps, const std::string& prefix) const;
};

/// Row-wise MLP; an empty layer list is the identity function.
struct Mlp {
  std::vector<Linear> layers;
  Activation act = Activation::Relu;
  double tau = 0.01;          // leaky slope
  bool activate_last = false;

  static Mlp make(RngStream& rng, Index in, const std::vector<Index>& sizes,
                  Activation act = Activation::Relu,
                  bool activate_last = false);
  bool identity() const { return layers.empty(); }
  NodePtr forward(Tape& t, NodePtr x) const;
  void collect(ParamSet& ps, const std::string& prefix) const;
};

/// Checkpoint format: JSON map from parameter name to a Matrix object.
std::string checkpoint_to_json(const ParamSet& ps);
void load_checkpoint_json(ParamSet& ps, const std::string& json_text);

}  // namespace ikit
