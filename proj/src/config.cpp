#include "ikit/config.hpp"

#include <nlohmann/json.hpp>

#include "ikit/matrix_io.hpp"

namespace ikit {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ContractError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ContractError("config: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string alpha_mode_name(AlphaSpec::Mode m) {
  switch (m) {
    case AlphaSpec::Mode::Fixed: return "fixed";
    case AlphaSpec::Mode::Sigmoid: return "sigmoid";
    case AlphaSpec::Mode::Softplus: return "softplus";
  }
  return "?";
}

AlphaSpec::Mode alpha_mode_from_name(const std::string& name) {
  if (name == "fixed") return AlphaSpec::Mode::Fixed;
  if (name == "sigmoid") return AlphaSpec::Mode::Sigmoid;
  if (name == "softplus") return AlphaSpec::Mode::Softplus;
  throw ContractError("config: unknown alpha mode '" + name + "'");
}

std::string schedule_kind_name(Schedule::Kind k) {
  switch (k) {
    case Schedule::Kind::Constant: return "constant";
    case Schedule::Kind::Exponential: return "exponential";
    case Schedule::Kind::CosineWarmup: return "cosine-warmup";
  }
  return "?";
}

Schedule::Kind schedule_kind_from_name(const std::string& name) {
  if (name == "constant") return Schedule::Kind::Constant;
  if (name == "exponential") return Schedule::Kind::Exponential;
  if (name == "cosine-warmup") return Schedule::Kind::CosineWarmup;
  throw ContractError("config: unknown schedule kind '" + name + "'");
}

}  // namespace

ExperimentConfig default_config(TaskKind kind) {
  ExperimentConfig c;
  c.task.kind = kind;
  c.model.kind = "intention";
  c.model.alpha = AlphaSpec::softplus(-2.0);
  c.optim = OptimSpec::adam(3e-4);
  switch (kind) {
    case TaskKind::Sine:
      c.task.context_n = 10;
      c.task.query_m = 200;
      c.model.alpha = AlphaSpec::softplus(-9.0);
      c.model.widths = {128, 128};
      c.train = {5000, 8, 500, 100};
      break;
    case TaskKind::Policy:
      c.task.context_n = 5;
      c.task.query_m = 5;
      c.task.noise = 0.05;
      c.train = {10000, 8, 1000, 200};
      break;
    case TaskKind::Kabsch:
      c.task.context_n = 5;
      c.task.query_m = 5;
      c.task.noise = 0.05;
      c.train = {10000, 8, 1000, 200};
      break;
    case TaskKind::Scaling:
      c.task.context_n = 10;
      c.task.query_m = 1;
      c.task.dim = 2;
      c.model.widths = {16};
      c.train = {1500, 32, 1500, 200};
      break;
    case TaskKind::Anomaly:
      c.task.context_n = 10;
      c.task.dim = 32;
      c.task.class_sep = 6.0;
      c.use_block = true;
      c.block.kind = BlockSpec::Kind::SigmaInformer;
      c.block.layers = 1;
      c.block.heads = 4;
      c.block.model_width = 64;
      c.block.hidden_width = 128;
      c.block.input_dropout = 0.2;
      c.optim.schedule = Schedule::cosine_warmup(3e-4, 100);
      c.train = {2000, 12, 200, 400};
      break;
    case TaskKind::Linreg2d:
      c.task.context_n = 20;
      c.task.query_m = 200;
      c.train = {0, 1, 1, 1};
      break;
  }
  return c;
}

ExperimentConfig load_config(const std::string& json_text) {
  json j = json::parse(json_text);
  check_keys(j, {"task", "model", "block", "optim", "train"}, "root");

  TaskKind kind = TaskKind::Sine;
  if (j.contains("task") && j.at("task").contains("kind")) {
    kind = task_kind_from_name(j.at("task").at("kind").get<std::string>());
  }
  ExperimentConfig c = default_config(kind);

  if (j.contains("task")) {
    const json& t = j.at("task");
    check_keys(t, {"kind", "context", "queries", "noise", "dim", "class_sep", "seed"},
               "task");
    get_if(t, "context", c.task.context_n);
    get_if(t, "queries", c.task.query_m);
    get_if(t, "noise", c.task.noise);
    get_if(t, "dim", c.task.dim);
    get_if(t, "class_sep", c.task.class_sep);
    get_if(t, "seed", c.task.seed);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"kind", "alpha", "kernel", "heads", "widths"}, "model");
    get_if(m, "kind", c.model.kind);
    get_if(m, "heads", c.model.heads);
    if (m.contains("widths")) {
      c.model.widths.clear();
      for (const auto& w : m.at("widths")) {
        c.model.widths.push_back(w.get<Index>());
      }
    }
    if (m.contains("alpha")) {
      const json& a = m.at("alpha");
      check_keys(a, {"mode", "value"}, "model.alpha");
      AlphaSpec::Mode mode = c.model.alpha.mode;
      double value = c.model.alpha.value;
      if (a.contains("mode")) mode = alpha_mode_from_name(a.at("mode").get<std::string>());
      get_if(a, "value", value);
      c.model.alpha = mode == AlphaSpec::Mode::Fixed ? AlphaSpec::fixed(value)
                                                     : AlphaSpec{mode, value};
    }
    if (m.contains("kernel")) {
      const json& k = m.at("kernel");
      check_keys(k, {"kind", "gamma"}, "model.kernel");
      std::string kname = c.model.kernel.kind == KernelSpec::Kind::Linear
                              ? "linear"
                              : "gaussian";
      double gamma = c.model.kernel.gamma;
      get_if(k, "kind", kname);
      get_if(k, "gamma", gamma);
      if (kname == "linear") {
        c.model.kernel = KernelSpec::linear();
      } else if (kname == "gaussian") {
        c.model.kernel = KernelSpec::gaussian(gamma);
      } else {
        throw ContractError("config: unknown kernel kind '" + kname + "'");
      }
    }
  }
  if (j.contains("block")) {
    const json& b = j.at("block");
    check_keys(b, {"kind", "layers", "heads", "model_width", "hidden_width",
                   "input_dropout"},
               "block");
    if (b.contains("kind")) {
      c.block.kind = BlockSpec::kind_from_name(b.at("kind").get<std::string>());
    }
    get_if(b, "layers", c.block.layers);
    get_if(b, "heads", c.block.heads);
    get_if(b, "model_width", c.block.model_width);
    get_if(b, "hidden_width", c.block.hidden_width);
    get_if(b, "input_dropout", c.block.input_dropout);
    c.block.validate();
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    check_keys(o, {"kind", "lr", "beta1", "beta2", "eps", "momentum",
                   "weight_decay", "schedule"},
               "optim");
    std::string kname =
        c.optim.kind == OptimSpec::Kind::Adam ? "adam" : "sgd-momentum";
    get_if(o, "kind", kname);
    if (kname == "adam") {
      c.optim.kind = OptimSpec::Kind::Adam;
    } else if (kname == "sgd-momentum") {
      c.optim.kind = OptimSpec::Kind::SgdMomentum;
    } else {
      throw ContractError("config: unknown optimizer kind '" + kname + "'");
    }
    const double old_lr = c.optim.lr;
    get_if(o, "lr", c.optim.lr);
    get_if(o, "beta1", c.optim.beta1);
    get_if(o, "beta2", c.optim.beta2);
    get_if(o, "eps", c.optim.eps);
    get_if(o, "momentum", c.optim.momentum);
    get_if(o, "weight_decay", c.optim.weight_decay);
    if (c.optim.lr != old_lr &&
        c.optim.schedule.kind == Schedule::Kind::Constant) {
      c.optim.schedule = Schedule::constant(c.optim.lr);
    }
    if (o.contains("schedule")) {
      const json& s = o.at("schedule");
      check_keys(s, {"kind", "init", "decay_rate", "start", "duration", "warmup"},
                 "optim.schedule");
      Schedule sc = c.optim.schedule;
      if (s.contains("kind")) {
        sc.kind = schedule_kind_from_name(s.at("kind").get<std::string>());
      }
      get_if(s, "init", sc.init);
      get_if(s, "decay_rate", sc.decay_rate);
      get_if(s, "start", sc.start);
      get_if(s, "duration", sc.duration);
      get_if(s, "warmup", sc.warmup);
      if (sc.kind == Schedule::Kind::Exponential && sc.duration < 1) {
        throw ContractError("config: schedule duration must be >= 1");
      }
      c.optim.schedule = sc;
    }
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"steps", "batch", "eval_every", "eval_instances"}, "train");
    get_if(t, "steps", c.train.steps);
    get_if(t, "batch", c.train.batch);
    get_if(t, "eval_every", c.train.eval_every);
    get_if(t, "eval_instances", c.train.eval_instances);
    if (c.train.batch < 1 || c.train.eval_every < 1 || c.train.steps < 0) {
      throw ContractError("config: invalid training sizes");
    }
  }
  c.task.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  return load_config(read_text_file(path));
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = {{"kind", task_kind_name(c.task.kind)},
               {"context", c.task.context_n},
               {"queries", c.task.query_m},
               {"noise", c.task.noise},
               {"dim", c.task.dim},
               {"class_sep", c.task.class_sep},
               {"seed", c.task.seed}};
  json widths = json::array();
  for (Index w : c.model.widths) widths.push_back(w);
  j["model"] = {
      {"kind", c.model.kind},
      {"alpha",
       {{"mode", alpha_mode_name(c.model.alpha.mode)}, {"value", c.model.alpha.value}}},
      {"kernel",
       {{"kind", c.model.kernel.kind == KernelSpec::Kind::Linear ? "linear"
                                                                 : "gaussian"},
        {"gamma", c.model.kernel.gamma}}},
      {"heads", c.model.heads},
      {"widths", widths}};
  j["block"] = {{"kind", c.block.kind_name()},
                {"layers", c.block.layers},
                {"heads", c.block.heads},
                {"model_width", c.block.model_width},
                {"hidden_width", c.block.hidden_width},
                {"input_dropout", c.block.input_dropout}};
  j["optim"] = {
      {"kind", c.optim.kind == OptimSpec::Kind::Adam ? "adam" : "sgd-momentum"},
      {"lr", c.optim.lr},
      {"beta1", c.optim.beta1},
      {"beta2", c.optim.beta2},
      {"eps", c.optim.eps},
      {"momentum", c.optim.momentum},
      {"weight_decay", c.optim.weight_decay},
      {"schedule",
       {{"kind", schedule_kind_name(c.optim.schedule.kind)},
        {"init", c.optim.schedule.init},
        {"decay_rate", c.optim.schedule.decay_rate},
        {"start", c.optim.schedule.start},
        {"duration", c.optim.schedule.duration},
        {"warmup", c.optim.schedule.warmup}}}};
  j["train"] = {{"steps", c.train.steps},
                {"batch", c.train.batch},
                {"eval_every", c.train.eval_every},
                {"eval_instances", c.train.eval_instances}};
  return j.dump(2);
}

}  // namespace ikit
