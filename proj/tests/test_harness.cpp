// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>

#include <doctest.h>
#include <json.hpp>

#include "morq/harness.hpp"

using namespace morq;

namespace {

bool same_tensor(const TensorF32& a, const TensorF32& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.values().data(), b.values().data(),
                     a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("streams are a pure function of (seed, step)") {
  TensorStreamSpec spec;
  spec.rows = 24;
  spec.cols = 16;
  spec.steps = 5;
  spec.seed = 42;
  spec.outlier_channel_fraction = 0.25;
  spec.outlier_magnitude = 64.0;

  TensorStream s1(spec), s2(spec);
  for (uint64_t t = 0; t < spec.steps; ++t)
    CHECK(same_tensor(s1.at(t), s2.at(t)));

  // Different seeds diverge.
  spec.seed = 43;
  TensorStream s3(spec);
  CHECK_FALSE(same_tensor(s1.at(0), s3.at(0)));

  // Out-of-range steps are rejected.
  CHECK_THROWS_AS(s1.at(5), std::out_of_range);
}

TEST_CASE("outlier channels are a fixed scaled subset") {
  TensorStreamSpec spec;
  spec.rows = 64;
  spec.cols = 32;
  spec.steps = 2;
  spec.seed = 7;
  spec.outlier_channel_fraction = 0.125;
  spec.outlier_magnitude = 1000.0;

  TensorStream stream(spec);
  const auto& outliers = stream.outlier_rows();
  CHECK(std::count(outliers.begin(), outliers.end(), 1) == 8);

  // Outlier rows carry visibly larger magnitudes.
  TensorF32 t = stream.at(0);
  for (size_t r = 0; r < spec.rows; ++r) {
    float amax = 0.0f;
    for (size_t c = 0; c < spec.cols; ++c)
      amax = std::max(amax, std::fabs(t(r, c)));
    if (outliers[r])
      CHECK(amax > 50.0f);
    else
      CHECK(amax < 50.0f);
  }

  // Fraction zero means no outliers.
  spec.outlier_channel_fraction = 0.0;
  TensorStream plain(spec);
  CHECK(std::count(plain.outlier_rows().begin(), plain.outlier_rows().end(),
                   1) == 0);
}

TEST_CASE("drift widens the amax multiplicatively") {
  TensorStreamSpec spec;
  spec.rows = 48;
  spec.cols = 48;
  spec.steps = 2001;
  spec.seed = 11;
  spec.drift = 1.001;

  TensorStream stream(spec);
  auto amax_of = [](const TensorF32& t) {
    float m = 0.0f;
    for (float v : t.values()) m = std::max(m, std::fabs(v));
    return static_cast<double>(m);
  };
  // Median over a few draws to tame the tail noise.
  auto med_amax = [&](uint64_t around) {
    std::vector<double> v;
    for (uint64_t s = around; s < around + 9; ++s)
      v.push_back(amax_of(stream.at(s)));
    std::sort(v.begin(), v.end());
    return v[4];
  };
  double early = med_amax(0);
  double late = med_amax(1992);
  // drift^2000 = e^2 ~ 7.39; the top-of-range draw tracks it within noise.
  double growth = late / early;
  CHECK(growth > 3.0);
  CHECK(growth < 18.0);
}

TEST_CASE("replay: constant stream gives a constant decision") {
  TensorF32 t(8, 8);
  for (size_t i = 0; i < t.size(); ++i)
    t.data()[i] = 0.25f * static_cast<float>((i % 13) + 1);
  std::vector<TensorF32> tensors(20, t);

  ReplayResult r = run_replay(tensors, TensorKey{}, Recipe::tensor_level(),
                              PartitionSpec::per_tensor(),
                              ScalingStrategy::Gam, 100);
  REQUIRE(r.log.size() == 20);
  for (const DecisionRecord& rec : r.log) {
    CHECK(rec.decisions == r.log[0].decisions);
    CHECK(rec.global_rel_error == r.log[0].global_rel_error);
  }
  CHECK(r.fp8_elements + r.bf16_elements == 20 * 64);
}

TEST_CASE("replay is independent of the thread count") {
  TensorStreamSpec spec;
  spec.rows = 16;
  spec.cols = 16;
  spec.steps = 37;
  spec.seed = 3;
  spec.drift = 1.01;
  TensorStream stream(spec);

  ReplayResult serial = run_replay(stream, Recipe::tensor_level(),
                                   PartitionSpec::block(8, 8),
                                   ScalingStrategy::Gam, 10, 1);
  ReplayResult threaded = run_replay(stream, Recipe::tensor_level(),
                                     PartitionSpec::block(8, 8),
                                     ScalingStrategy::Gam, 10, 3);
  REQUIRE(serial.log.size() == threaded.log.size());
  for (size_t i = 0; i < serial.log.size(); ++i) {
    CHECK(serial.log[i].step == threaded.log[i].step);
    CHECK(serial.log[i].decisions == threaded.log[i].decisions);
    CHECK(serial.log[i].global_rel_error ==
          threaded.log[i].global_rel_error);
  }
  CHECK(fallback_percentage(serial.stats).value_or(-1) ==
        fallback_percentage(threaded.stats).value_or(-2));
  CHECK(serial.fp8_elements == threaded.fp8_elements);
}

TEST_CASE("drifting stream flips the tensor-level decision") {
  TensorStreamSpec spec;
  spec.rows = 32;
  spec.cols = 32;
  spec.steps = 400;
  spec.seed = 19;
  spec.base = BaseDistribution::Lognormal;
  spec.sigma = 1.5;
  spec.drift = 1.02;

  TensorStream stream(spec);
  ReplayResult r = run_replay(stream, Recipe::tensor_level(),
                              PartitionSpec::per_tensor(),
                              ScalingStrategy::Gam, 100);
  REQUIRE(r.log.size() == 400);
  CHECK(r.log.front().decisions[0] == RepType::E4M3);
  CHECK(r.log.back().decisions[0] == RepType::BF16);
  // The error trend is upward: find the first flip.
  size_t flip = 0;
  for (size_t i = 0; i < r.log.size(); ++i) {
    if (r.log[i].decisions[0] == RepType::BF16) {
      flip = i;
      break;
    }
  }
  CHECK(flip > 0);
}

TEST_CASE("toy training is deterministic and reports costs") {
  ToyModelConfig config;
  config.layer_sizes = {8, 12, 6};
  config.steps = 30;
  config.batch = 16;
  config.learning_rate = 0.2f;
  config.seed = 5;

  TrainReport a = train_toy(config);
  TrainReport b = train_toy(config);
  REQUIRE(a.losses.size() == 30);
  CHECK(a.losses == b.losses);
  CHECK_FALSE(a.diverged);
  CHECK(a.cost.total_macs() == 0);  // baseline: no quantized GEMMs

  // Loss actually decreases on this smooth task.
  CHECK(a.losses.back() < a.losses.front());

  config.quant.enabled = true;
  config.quant.recipe = Recipe::tensor_level();
  config.quant.partition = PartitionSpec::per_tensor();
  TrainReport q = train_toy(config);
  CHECK(q.cost.total_macs() > 0);
  CHECK_FALSE(q.diverged);
  CHECK(fallback_percentage(q.stats).has_value());
}

TEST_CASE("quantization with every role disabled is the baseline") {
  ToyModelConfig config;
  config.layer_sizes = {6, 10, 4};
  config.steps = 12;
  config.batch = 8;
  config.seed = 9;

  TrainReport base = train_toy(config);

  config.quant.enabled = true;
  config.quant.quantize_input = false;
  config.quant.quantize_weight = false;
  config.quant.quantize_grad = false;
  TrainReport off = train_toy(config);
  CHECK(base.losses == off.losses);
  // All MACs ran, all in the BF16 class.
  CHECK(off.cost.fp8_macs == 0);
  CHECK(off.cost.total_macs() > 0);
}

TEST_CASE("a tiny threshold reduces to pure bf16 rounding") {
  ToyModelConfig config;
  config.layer_sizes = {6, 10, 4};
  config.steps = 15;
  config.batch = 8;
  config.seed = 13;
  config.quant.enabled = true;
  config.quant.partition = PartitionSpec::per_tensor();
  config.quant.recipe = Recipe::tensor_level(1e-9);

  TrainReport all_fallback = train_toy(config);
  CHECK(fallback_percentage(all_fallback.stats).value() == 1.0);

  // A recipe whose only type is the BF16 terminal: every block rounds
  // through BF16 unconditionally.
  Recipe bf16_only;
  bf16_only.types = {RepType::BF16};
  bf16_only.granularity = Granularity::SubTensorLevel;
  config.quant.recipe = bf16_only;
  TrainReport rounded = train_toy(config);

  CHECK(all_fallback.losses == rounded.losses);
}

TEST_CASE("analytic gradients match finite differences") {
  ToyModelConfig config;
  config.layer_sizes = {5, 9, 7, 3};
  config.batch = 6;
  config.seed = 21;
  CHECK(max_gradient_check_error(config) < 1e-4);

  config.layer_sizes = {4, 4};
  config.seed = 22;
  CHECK(max_gradient_check_error(config) < 1e-4);
}

TEST_CASE("divergence is detected and reported") {
  ToyModelConfig config;
  config.layer_sizes = {8, 12, 6};
  config.steps = 200;
  config.batch = 16;
  config.learning_rate = 10.0f;
  config.seed = 5;

  TrainReport r = train_toy(config);
  CHECK(r.diverged);
  CHECK(r.divergence_step < 200);
  CHECK(r.losses.size() == r.divergence_step + 1);
}

TEST_CASE("spec and config json round-trips") {
  TensorStreamSpec spec;
  spec.rows = 10;
  spec.cols = 20;
  spec.steps = 3;
  spec.base = BaseDistribution::Lognormal;
  spec.sigma = 2.0;
  spec.outlier_channel_fraction = 0.1;
  spec.outlier_magnitude = 32.0;
  spec.drift = 1.002;
  spec.seed = 77;
  TensorStreamSpec back = TensorStreamSpec::from_json(spec.to_json());
  CHECK(back.rows == spec.rows);
  CHECK(back.base == spec.base);
  CHECK(back.drift == spec.drift);
  CHECK(back.seed == spec.seed);

  ToyModelConfig config;
  config.quant.enabled = true;
  config.quant.recipe = Recipe::two_way();
  config.quant.partition = PartitionSpec::block(64, 64);
  config.quant.strategy = ScalingStrategy::E8M0;
  ToyModelConfig cback = ToyModelConfig::from_json(config.to_json());
  CHECK(cback.quant.enabled);
  CHECK(cback.quant.recipe.name() == "two-way");
  CHECK(cback.quant.partition == config.quant.partition);
  CHECK(cback.quant.strategy == ScalingStrategy::E8M0);

  auto report = train_toy(ToyModelConfig{.layer_sizes = {4, 6, 2},
                                         .steps = 5,
                                         .batch = 4,
                                         .seed = 1});
  auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["losses"].size() == 5);
  CHECK(j.contains("cost"));
}
