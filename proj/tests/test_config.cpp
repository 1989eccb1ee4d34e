#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ikit/config.hpp"

using namespace ikit;

TEST_CASE("empty object resolves to all defaults") {
  ExperimentConfig c = load_config("{}");
  CHECK(c.task.kind == TaskKind::Sine);
  CHECK(c.train.steps == 5000);
  CHECK(c.train.batch == 8);
  CHECK(c.model.kind == "intention");
  CHECK(c.optim.lr == 3e-4);

  const std::string echo = config_to_json(c);
  // the echo names every default explicitly
  for (const char* key :
       {"\"task\"", "\"model\"", "\"block\"", "\"optim\"", "\"train\"",
        "\"steps\"", "\"lr\"", "\"alpha\"", "\"kernel\"", "\"schedule\"",
        "\"widths\"", "\"class_sep\""}) {
    CHECK(echo.find(key) != std::string::npos);
  }
}

TEST_CASE("single override keeps remaining defaults intact") {
  ExperimentConfig c = load_config(R"({"optim": {"lr": 0.01}})");
  CHECK(c.optim.lr == 0.01);
  CHECK(c.optim.beta1 == 0.9);
  CHECK(c.train.steps == 5000);
  CHECK(c.optim.schedule.kind == Schedule::Kind::Constant);
  CHECK(c.optim.schedule.init == 0.01);  // constant schedule follows lr
}

TEST_CASE("round trip: echoed config reloads to an identical resolution") {
  ExperimentConfig c = load_config(
      R"({"task": {"kind": "kabsch", "noise": 0.1, "seed": 9},
          "model": {"kind": "np", "widths": [32, 32]},
          "optim": {"kind": "sgd-momentum", "lr": 0.05,
                     "schedule": {"kind": "cosine-warmup", "init": 0.05, "warmup": 50}},
          "train": {"steps": 123}})");
  const std::string echo1 = config_to_json(c);
  const std::string echo2 = config_to_json(load_config(echo1));
  CHECK(echo1 == echo2);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(load_config(R"({"tsk": {}})"), ContractError);
  CHECK_THROWS_AS(load_config(R"({"task": {"knid": "sine"}})"), ContractError);
  CHECK_THROWS_AS(load_config(R"({"model": {"alpha": {"mod": "fixed"}}})"),
                  ContractError);
  CHECK_THROWS_AS(load_config(R"({"optim": {"schedule": {"warm": 1}}})"),
                  ContractError);
  CHECK_THROWS_AS(load_config(R"({"train": {"step": 10}})"), ContractError);
}

TEST_CASE("task kinds switch the defaults") {
  ExperimentConfig anomaly = load_config(R"({"task": {"kind": "anomaly"}})");
  CHECK(anomaly.use_block);
  CHECK(anomaly.task.dim == 32);
  CHECK(anomaly.block.kind == BlockSpec::Kind::SigmaInformer);
  CHECK(anomaly.optim.schedule.kind == Schedule::Kind::CosineWarmup);

  ExperimentConfig policy = load_config(R"({"task": {"kind": "policy"}})");
  CHECK(policy.task.context_n == 5);
  CHECK(policy.task.noise == 0.05);
  CHECK(policy.train.steps == 10000);
}

TEST_CASE("invalid values are contract errors") {
  CHECK_THROWS_AS(load_config(R"({"task": {"kind": "nope"}})"), ContractError);
  CHECK_THROWS_AS(load_config(R"({"model": {"kernel": {"kind": "gaussian", "gamma": 1.0}}})"),
                  ContractError);
  CHECK_THROWS_AS(load_config(R"({"block": {"model_width": 30, "heads": 4}})"),
                  ContractError);
  CHECK_THROWS_AS(load_config(R"({"train": {"batch": 0}})"), ContractError);
  CHECK_THROWS_AS(load_config(R"({"model": {"alpha": {"mode": "fixed", "value": -2.0}}})"),
                  ContractError);
}

TEST_CASE("alpha and kernel parsing") {
  ExperimentConfig c = load_config(
      R"({"model": {"alpha": {"mode": "sigmoid", "value": 0.3},
                    "kernel": {"kind": "gaussian", "gamma": -0.7}}})");
  CHECK(c.model.alpha.mode == AlphaSpec::Mode::Sigmoid);
  CHECK(c.model.alpha.value == 0.3);
  CHECK(c.model.kernel.kind == KernelSpec::Kind::Gaussian);
  CHECK(c.model.kernel.gamma == -0.7);
}
