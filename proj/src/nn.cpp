#include "ikit/nn.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "ikit/matrix_io.hpp"

namespace ikit {

Linear Linear::init(RngStream& rng, Index in, Index out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.W = make_param(sample_uniform(rng, in, out, -bound, bound));
  l.b = make_param(sample_uniform(rng, 1, out, -bound, bound));
  return l;
}

NodePtr Linear::forward(Tape& t, const NodePtr& x) const {
  return op_add(t, op_matmul(t, x, W), b);
}

void Linear::collect(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".W", W);
  ps.add(prefix + ".b", b);
}

Mlp Mlp::make(RngStream& rng, Index in, const std::vector<Index>& sizes,
              Activation act, bool activate_last) {
  Mlp m;
  m.act = act;
  m.activate_last = activate_last;
  Index cur = in;
  for (Index s : sizes) {
    m.layers.push_back(Linear::init(rng, cur, s));
    cur = s;
  }
  return m;
}

NodePtr Mlp::forward(Tape& t, NodePtr x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(t, x);
    if (i + 1 < layers.size() || activate_last) {
      x = act == Activation::Relu ? op_relu(t, x) : op_leaky_relu(t, x, tau);
    }
  }
  return x;
}

void Mlp::collect(ParamSet& ps, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(ps, prefix + ".l" + std::to_string(i));
  }
}

std::string checkpoint_to_json(const ParamSet& ps) {
  nlohmann::json j = nlohmann::json::object();
  for (auto& [name, p] : ps.items) j[name] = matrix_to_json(p->value);
  return j.dump(2);
}

void load_checkpoint_json(ParamSet& ps, const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  for (auto& [name, p] : ps.items) {
    if (!j.contains(name)) {
      throw Error("checkpoint: missing parameter " + name);
    }
    Matrix m = matrix_from_json(j.at(name));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw Error("checkpoint: shape mismatch for " + name);
    }
    p->value = std::move(m);
  }
}

}  // namespace ikit
