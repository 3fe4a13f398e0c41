// SPDX-License-Identifier: Apache-2.0

#include "morq/harness.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace morq {

namespace {

// Distinct RNG streams per (seed, step, purpose).
uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

TensorKey keyed_for_partition(TensorKey key, const PartitionSpec& partition) {
  if (partition.kind == PartitionSpec::Kind::PerChannel ||
      partition.kind == PartitionSpec::Kind::SubChannel) {
    key.direction = partition.axis == Axis::Row
                        ? PartitionDirection::RowPartition
                        : PartitionDirection::ColPartition;
  } else {
    key.direction = PartitionDirection::NotApplicable;
  }
  return key;
}

}  // namespace

TensorStream::TensorStream(TensorStreamSpec spec) : spec_(std::move(spec)) {
  if (spec_.rows == 0 || spec_.cols == 0 || spec_.steps == 0)
    throw std::invalid_argument("stream: empty spec");
  if (spec_.outlier_channel_fraction < 0.0 ||
      spec_.outlier_channel_fraction > 1.0)
    throw std::invalid_argument("stream: outlier fraction out of [0, 1]");
  if (spec_.drift < 1.0)
    throw std::invalid_argument("stream: drift must be >= 1");

  outlier_row_.assign(spec_.rows, 0);
  auto count = static_cast<size_t>(spec_.outlier_channel_fraction *
                                   static_cast<double>(spec_.rows));
  std::mt19937_64 rng(mix(spec_.seed, 0xa11ce));
  std::vector<size_t> rows(spec_.rows);
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::shuffle(rows.begin(), rows.end(), rng);
  for (size_t i = 0; i < count; ++i) outlier_row_[rows[i]] = 1;
}

TensorF32 TensorStream::at(uint64_t step) const {
  if (step >= spec_.steps) throw std::out_of_range("stream: step out of range");
  std::mt19937_64 rng(mix(spec_.seed, step));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const double log_drift =
      static_cast<double>(step) * std::log(spec_.drift);
  TensorF32 t(spec_.rows, spec_.cols);
  for (size_t r = 0; r < spec_.rows; ++r) {
    double channel_gain = outlier_row_[r] ? spec_.outlier_magnitude : 1.0;
    for (size_t c = 0; c < spec_.cols; ++c) {
      double v;
      if (spec_.base == BaseDistribution::Gaussian) {
        v = spec_.sigma * normal(rng);
      } else {
        v = std::exp(spec_.mu + spec_.sigma * normal(rng));
        if (uniform(rng) < 0.5) v = -v;
      }
      // Spread the draw by up to drift^step; u ~ U[0,1] keeps the lower end
      // of the distribution anchored while the top grows with the step.
      if (spec_.drift > 1.0) v *= std::exp(log_drift * uniform(rng));
      t(r, c) = static_cast<float>(v * channel_gain);
    }
  }
  t.key = spec_.key;
  return t;
}

std::vector<TensorF32> generate_stream(const TensorStreamSpec& spec) {
  TensorStream stream(spec);
  std::vector<TensorF32> out;
  out.reserve(spec.steps);
  for (uint64_t s = 0; s < spec.steps; ++s) out.push_back(stream.at(s));
  return out;
}

namespace {

struct ElementTally {
  uint64_t fp8 = 0;
  uint64_t bf16 = 0;
};

void replay_one(const TensorF32& t, const TensorKey& key, uint64_t step,
                const Recipe& recipe, const PartitionSpec& partition,
                ScalingStrategy strategy, StatsState& stats,
                std::vector<DecisionRecord>& log, ElementTally& tally) {
  QuantizedTensor q = mor_quantize(t, recipe, partition, strategy);

  if (recipe.granularity == Granularity::TensorLevel) {
    stats.record(key, step, q.global_rel_error, q.decisions[0]);
  } else {
    stats.record_error(key, step, q.global_rel_error);
    for (RepType d : q.decisions) stats.count_decision(key, d);
  }
  for (const BlockView& b : q.blocks) {
    if (is_fp8(q.decisions[b.block_id]))
      tally.fp8 += b.size();
    else
      tally.bf16 += b.size();
  }

  DecisionRecord rec;
  rec.tensor_key = key.label();
  rec.step = step;
  rec.partition = partition.to_string();
  if (recipe.granularity == Granularity::TensorLevel) {
    rec.decisions = {q.decisions[0]};
  } else {
    rec.decisions = q.decisions;
    rec.per_block_errors = q.block_rel_errors;
  }
  rec.global_rel_error = q.global_rel_error;
  log.push_back(std::move(rec));
}

void replay_range(const TensorStream& stream, const Recipe& recipe,
                  const PartitionSpec& partition, ScalingStrategy strategy,
                  uint64_t begin, uint64_t end, StatsState& stats,
                  std::vector<DecisionRecord>& log, ElementTally& tally) {
  TensorKey key = keyed_for_partition(stream.spec().key, partition);
  for (uint64_t step = begin; step < end; ++step)
    replay_one(stream.at(step), key, step, recipe, partition, strategy, stats,
               log, tally);
}

}  // namespace

ReplayResult run_replay(const TensorStream& stream, const Recipe& recipe,
                        const PartitionSpec& partition,
                        ScalingStrategy strategy, uint64_t reset_period,
                        int threads) {
  recipe.validate();
  const uint64_t steps = stream.spec().steps;
  if (threads < 1) threads = 1;
  auto shards = static_cast<uint64_t>(threads);
  if (shards > steps) shards = steps;

  std::vector<StatsState> stats(shards, StatsState(reset_period));
  std::vector<std::vector<DecisionRecord>> logs(shards);
  std::vector<ElementTally> tallies(shards);

  if (shards <= 1) {
    replay_range(stream, recipe, partition, strategy, 0, steps, stats[0],
                 logs[0], tallies[0]);
  } else {
    std::vector<std::thread> pool;
    for (uint64_t s = 0; s < shards; ++s) {
      uint64_t begin = steps * s / shards;
      uint64_t end = steps * (s + 1) / shards;
      pool.emplace_back([&, s, begin, end] {
        replay_range(stream, recipe, partition, strategy, begin, end, stats[s],
                     logs[s], tallies[s]);
      });
    }
    for (auto& th : pool) th.join();
  }

  ReplayResult out{StatsState(reset_period), {}, 0, 0};
  out.log.reserve(steps);
  for (uint64_t s = 0; s < shards; ++s) {
    out.stats.merge(stats[s]);
    out.log.insert(out.log.end(), std::make_move_iterator(logs[s].begin()),
                   std::make_move_iterator(logs[s].end()));
    out.fp8_elements += tallies[s].fp8;
    out.bf16_elements += tallies[s].bf16;
  }
  return out;
}

ReplayResult run_replay(const std::vector<TensorF32>& tensors,
                        const TensorKey& key, const Recipe& recipe,
                        const PartitionSpec& partition,
                        ScalingStrategy strategy, uint64_t reset_period) {
  recipe.validate();
  ReplayResult out{StatsState(reset_period), {}, 0, 0};
  ElementTally tally;
  TensorKey k = keyed_for_partition(key, partition);
  for (size_t step = 0; step < tensors.size(); ++step)
    replay_one(tensors[step], k, step, recipe, partition, strategy, out.stats,
               out.log, tally);
  out.fp8_elements = tally.fp8;
  out.bf16_elements = tally.bf16;
  return out;
}

// ----------------------------------------------------------------------
// Toy trainer
// ----------------------------------------------------------------------

namespace {

template <typename T>
struct Mat {
  size_t rows = 0, cols = 0;
  std::vector<T> v;
  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), v(r * c, T(0)) {}
  T& operator()(size_t r, size_t c) { return v[r * cols + c]; }
  T operator()(size_t r, size_t c) const { return v[r * cols + c]; }
};

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
  Mat<T> out(a.cols, a.rows);
  for (size_t r = 0; r < a.rows; ++r)
    for (size_t c = 0; c < a.cols; ++c) out(c, r) = a(r, c);
  return out;
}

// Same loop order as reference_gemm so baseline and emulated paths agree
// bit for bit when no quantization is applied.
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  Mat<T> out(a.rows, b.cols);
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t j = 0; j < b.cols; ++j) {
      T acc = T(0);
      for (size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

enum class GemmKind { Forward, GradInput, GradWeight };

struct GemmMeta {
  GemmKind kind = GemmKind::Forward;
  size_t linear_index = 0;  // which linear layer
  TensorRole role_a = TensorRole::Input;
  TensorRole role_b = TensorRole::Weight;
  bool record_a = false;  // primary use of the A stream this step
  bool record_b = false;
};

// Four linear layers mirror one transformer block.
TensorKey toy_key(size_t linear_index, TensorRole role) {
  TensorKey key;
  key.layer_index = static_cast<uint32_t>(linear_index / 4);
  key.module = static_cast<LinearModule>(linear_index % 4);
  key.role = role;
  key.pass = role == TensorRole::Grad ? Pass::Backward : Pass::Forward;
  return key;
}

template <typename T>
struct ToyNet {
  std::vector<Mat<T>> weights;  // W_l is (n_{l+1}, n_l); Z = H * W^T

  template <typename Gemm>
  T loss_forward(const Mat<T>& x, const Mat<T>& y, Gemm&& gemm,
                 std::vector<Mat<T>>* activations) const {
    Mat<T> h = x;
    if (activations) activations->push_back(h);
    for (size_t l = 0; l < weights.size(); ++l) {
      GemmMeta meta{GemmKind::Forward, l, TensorRole::Input,
                    TensorRole::Weight, true, true};
      Mat<T> z = gemm(h, transpose(weights[l]), meta);
      if (l + 1 < weights.size())
        for (T& v : z.v) v = std::tanh(v);
      h = std::move(z);
      if (activations) activations->push_back(h);
    }
    T loss = T(0);
    for (size_t i = 0; i < h.v.size(); ++i) {
      T d = h.v[i] - y.v[i];
      loss += d * d;
    }
    return loss / (T(2) * static_cast<T>(h.v.size()));
  }

  // Returns the loss; fills grads with dLoss/dW_l.
  template <typename Gemm>
  T train_step(const Mat<T>& x, const Mat<T>& y, std::vector<Mat<T>>& grads,
               Gemm&& gemm) const {
    std::vector<Mat<T>> h;  // h[0] = x, h[l+1] = activation after layer l
    T loss = loss_forward(x, y, gemm, &h);

    Mat<T>& out = h.back();
    Mat<T> dz(out.rows, out.cols);
    T inv = T(1) / static_cast<T>(out.v.size());
    for (size_t i = 0; i < out.v.size(); ++i)
      dz.v[i] = (out.v[i] - y.v[i]) * inv;

    grads.assign(weights.size(), Mat<T>());
    for (size_t l = weights.size(); l-- > 0;) {
      GemmMeta wmeta{GemmKind::GradWeight, l, TensorRole::Grad,
                     TensorRole::Input, false, false};
      grads[l] = gemm(transpose(dz), h[l], wmeta);
      if (l == 0) break;
      GemmMeta imeta{GemmKind::GradInput, l, TensorRole::Grad,
                     TensorRole::Weight, true, false};
      Mat<T> dh = gemm(dz, weights[l], imeta);
      // tanh' = 1 - tanh^2, and h[l] already holds tanh(z).
      Mat<T>& act = h[l];
      for (size_t i = 0; i < dh.v.size(); ++i)
        dh.v[i] *= T(1) - act.v[i] * act.v[i];
      dz = std::move(dh);
    }
    return loss;
  }
};

Mat<float> random_normal(size_t rows, size_t cols, double stddev,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Mat<float> m(rows, cols);
  for (float& v : m.v) v = static_cast<float>(normal(rng));
  return m;
}

ToyNet<float> random_net(const std::vector<size_t>& sizes,
                         std::mt19937_64& rng) {
  ToyNet<float> net;
  for (size_t l = 0; l + 1 < sizes.size(); ++l)
    net.weights.push_back(random_normal(
        sizes[l + 1], sizes[l], 1.0 / std::sqrt(static_cast<double>(sizes[l])),
        rng));
  return net;
}

template <typename T>
Mat<T> widen(const Mat<float>& m) {
  Mat<T> out(m.rows, m.cols);
  for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = static_cast<T>(m.v[i]);
  return out;
}

TensorF32 to_tensor(const Mat<float>& m) {
  return TensorF32(m.rows, m.cols, m.v);
}

Mat<float> to_mat(const TensorF32& t) {
  Mat<float> m(t.rows(), t.cols());
  m.v = t.values();
  return m;
}

// Training batch for one step: inputs and noisy teacher targets, shared by
// every run with the same seed.
std::pair<Mat<float>, Mat<float>> make_batch(const ToyModelConfig& config,
                                             const ToyNet<float>& teacher,
                                             uint64_t step) {
  std::mt19937_64 rng(mix(config.seed, 0xda7a0000 + step));
  Mat<float> x =
      random_normal(config.batch, config.layer_sizes.front(), 1.0, rng);
  Mat<float> y(config.batch, config.layer_sizes.back());
  // Teacher forward, plain precision.
  Mat<float> h = x;
  for (size_t l = 0; l < teacher.weights.size(); ++l) {
    h = matmul(h, transpose(teacher.weights[l]));
    if (l + 1 < teacher.weights.size())
      for (float& v : h.v) v = std::tanh(v);
  }
  std::normal_distribution<double> noise(0.0, config.label_noise);
  for (size_t i = 0; i < y.v.size(); ++i)
    y.v[i] = h.v[i] + (config.label_noise > 0.0
                           ? static_cast<float>(noise(rng))
                           : 0.0f);
  return {std::move(x), std::move(y)};
}

void validate_config(const ToyModelConfig& config) {
  if (config.layer_sizes.size() < 2)
    throw std::invalid_argument("toy: need at least input and output sizes");
  for (size_t n : config.layer_sizes)
    if (n == 0) throw std::invalid_argument("toy: zero layer size");
  if (config.batch == 0 || config.steps == 0)
    throw std::invalid_argument("toy: empty run");
}

}  // namespace

TrainReport train_toy(const ToyModelConfig& config) {
  validate_config(config);
  std::mt19937_64 teacher_rng(mix(config.seed, 0x7eac4e5));
  std::mt19937_64 init_rng(mix(config.seed, 0x1a171));
  ToyNet<float> teacher = random_net(config.layer_sizes, teacher_rng);
  ToyNet<float> net = random_net(config.layer_sizes, init_rng);

  TrainReport report;
  report.stats = StatsState(config.stats_reset_period);
  report.losses.reserve(config.steps);

  const QuantConfig& qc = config.quant;
  const bool channelwise =
      qc.partition.kind == PartitionSpec::Kind::PerChannel ||
      qc.partition.kind == PartitionSpec::Kind::SubChannel;
  uint64_t step = 0;

  // Per-channel scaling follows the dot-product dimension: rows of the first
  // operand, columns of the second. Weight transposes are quantized in the
  // layout the GEMM consumes.
  auto make_side = [&](const Mat<float>& m, TensorRole role,
                       size_t linear_index, bool record,
                       Axis dot_axis) -> GemmSide {
    bool enabled = (role == TensorRole::Input && qc.quantize_input) ||
                   (role == TensorRole::Weight && qc.quantize_weight) ||
                   (role == TensorRole::Grad && qc.quantize_grad);
    TensorF32 t = to_tensor(m);
    if (!enabled) return GemmSide::original(t);

    PartitionSpec p = qc.partition;
    if (channelwise) p.axis = dot_axis;
    QuantizedTensor q = mor_quantize(t, qc.recipe, p, qc.strategy);
    if (record) {
      TensorKey key = keyed_for_partition(toy_key(linear_index, role), p);
      if (qc.recipe.granularity == Granularity::TensorLevel) {
        report.stats.record(key, step, q.global_rel_error, q.decisions[0]);
      } else {
        report.stats.record_error(key, step, q.global_rel_error);
        for (RepType d : q.decisions) report.stats.count_decision(key, d);
      }
    }
    return GemmSide::quantized(q);
  };

  auto gemm = [&](const Mat<float>& a, const Mat<float>& b,
                  const GemmMeta& meta) -> Mat<float> {
    if (!qc.enabled) return matmul(a, b);
    GemmSide sa =
        make_side(a, meta.role_a, meta.linear_index, meta.record_a, Axis::Row);
    GemmSide sb = make_side(b, meta.role_b, meta.linear_index, meta.record_b,
                            Axis::Column);
    GemmResult r = block_gemm(sa, sb);
    report.cost += r.cost;
    return to_mat(r.output);
  };

  for (step = 0; step < config.steps; ++step) {
    auto [x, y] = make_batch(config, teacher, step);
    std::vector<Mat<float>> grads;
    float loss = net.train_step(x, y, grads, gemm);

    report.losses.push_back(loss);
    if (!std::isfinite(loss)) {
      report.diverged = true;
      report.divergence_step = step;
      break;
    }
    for (size_t l = 0; l < net.weights.size(); ++l)
      for (size_t i = 0; i < net.weights[l].v.size(); ++i)
        net.weights[l].v[i] -= config.learning_rate * grads[l].v[i];
  }

  report.final_loss = report.losses.empty() ? 0.0f : report.losses.back();
  report.stats.flush();
  return report;
}

double max_gradient_check_error(const ToyModelConfig& config) {
  validate_config(config);
  std::mt19937_64 teacher_rng(mix(config.seed, 0x7eac4e5));
  std::mt19937_64 init_rng(mix(config.seed, 0x1a171));
  ToyNet<float> teacher = random_net(config.layer_sizes, teacher_rng);
  ToyNet<float> net32 = random_net(config.layer_sizes, init_rng);

  ToyNet<double> net;
  for (const auto& w : net32.weights) net.weights.push_back(widen<double>(w));

  auto [x32, y32] = make_batch(config, teacher, 0);
  Mat<double> x = widen<double>(x32);
  Mat<double> y = widen<double>(y32);

  auto plain = [](const Mat<double>& a, const Mat<double>& b,
                  const GemmMeta&) { return matmul(a, b); };

  std::vector<Mat<double>> grads;
  net.train_step(x, y, grads, plain);

  double worst = 0.0;
  const double h = 1e-5;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    for (size_t i = 0; i < net.weights[l].v.size(); ++i) {
      double saved = net.weights[l].v[i];
      net.weights[l].v[i] = saved + h;
      double up = net.loss_forward(x, y, plain, nullptr);
      net.weights[l].v[i] = saved - h;
      double down = net.loss_forward(x, y, plain, nullptr);
      net.weights[l].v[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double ga = grads[l].v[i];
      double denom = std::max({std::fabs(fd), std::fabs(ga), 1e-8});
      worst = std::max(worst, std::fabs(fd - ga) / denom);
    }
  }
  return worst;
}

// ----------------------------------------------------------------------
// JSON forms
// ----------------------------------------------------------------------

namespace {

nlohmann::json key_to_json(const TensorKey& k) {
  return {{"layer", k.layer_index},
          {"module", module_name(k.module)},
          {"role", role_name(k.role)}};
}

TensorKey key_from_json(const nlohmann::json& j) {
  TensorKey k;
  k.layer_index = j.value("layer", 0u);
  std::string module = j.value("module", "fc1");
  for (int m = 0; m < 4; ++m)
    if (module == module_name(static_cast<LinearModule>(m)))
      k.module = static_cast<LinearModule>(m);
  std::string role = j.value("role", "input");
  for (int r = 0; r < 3; ++r)
    if (role == role_name(static_cast<TensorRole>(r)))
      k.role = static_cast<TensorRole>(r);
  return k;
}

}  // namespace

TensorStreamSpec TensorStreamSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TensorStreamSpec s;
  s.rows = j.value("rows", s.rows);
  s.cols = j.value("cols", s.cols);
  s.steps = j.value("steps", s.steps);
  std::string base = j.value("distribution", "gaussian");
  if (base == "gaussian") {
    s.base = BaseDistribution::Gaussian;
  } else if (base == "lognormal") {
    s.base = BaseDistribution::Lognormal;
  } else {
    throw std::invalid_argument("stream: unknown distribution " + base);
  }
  s.sigma = j.value("sigma", s.sigma);
  s.mu = j.value("mu", s.mu);
  s.outlier_channel_fraction =
      j.value("outlier_channel_fraction", s.outlier_channel_fraction);
  s.outlier_magnitude = j.value("outlier_magnitude", s.outlier_magnitude);
  s.drift = j.value("drift", s.drift);
  s.seed = j.value("seed", s.seed);
  if (j.contains("key")) s.key = key_from_json(j["key"]);
  return s;
}

std::string TensorStreamSpec::to_json() const {
  nlohmann::json j;
  j["rows"] = rows;
  j["cols"] = cols;
  j["steps"] = steps;
  j["distribution"] =
      base == BaseDistribution::Gaussian ? "gaussian" : "lognormal";
  j["sigma"] = sigma;
  j["mu"] = mu;
  j["outlier_channel_fraction"] = outlier_channel_fraction;
  j["outlier_magnitude"] = outlier_magnitude;
  j["drift"] = drift;
  j["seed"] = seed;
  j["key"] = key_to_json(key);
  return j.dump(2);
}

ToyModelConfig ToyModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ToyModelConfig c;
  if (j.contains("layer_sizes"))
    c.layer_sizes = j["layer_sizes"].get<std::vector<size_t>>();
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.seed = j.value("seed", c.seed);
  c.stats_reset_period = j.value("stats_reset_period", c.stats_reset_period);
  std::string recipe = j.value("recipe", "baseline");
  if (recipe == "baseline") {
    c.quant.enabled = false;
  } else {
    c.quant.enabled = true;
    c.quant.recipe = Recipe::parse(recipe, j.value("threshold", 0.045));
  }
  if (j.contains("partition"))
    c.quant.partition =
        PartitionSpec::parse(j["partition"].get<std::string>());
  if (j.contains("strategy"))
    c.quant.strategy = parse_strategy(j["strategy"].get<std::string>());
  c.quant.quantize_input = j.value("quantize_input", true);
  c.quant.quantize_weight = j.value("quantize_weight", true);
  c.quant.quantize_grad = j.value("quantize_grad", true);
  return c;
}

std::string ToyModelConfig::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = layer_sizes;
  j["steps"] = steps;
  j["batch"] = batch;
  j["learning_rate"] = learning_rate;
  j["label_noise"] = label_noise;
  j["seed"] = seed;
  j["stats_reset_period"] = stats_reset_period;
  j["recipe"] = quant.enabled ? quant.recipe.name() : "baseline";
  if (quant.enabled) {
    j["threshold"] = quant.recipe.threshold_e4m3;
    j["partition"] = quant.partition.to_string();
    j["strategy"] = strategy_name(quant.strategy);
    j["quantize_input"] = quant.quantize_input;
    j["quantize_weight"] = quant.quantize_weight;
    j["quantize_grad"] = quant.quantize_grad;
  }
  return j.dump(2);
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["losses"] = losses;
  j["final_loss"] = final_loss;
  j["diverged"] = diverged;
  if (diverged) j["divergence_step"] = divergence_step;
  j["cost"] = {{"fp8_macs", cost.fp8_macs},
               {"bf16_macs", cost.bf16_macs},
               {"upcast_blocks", cost.upcast_blocks},
               {"speedup_estimate", cost.speedup_estimate()}};
  if (auto fb = fallback_percentage(stats)) j["fallback_fraction"] = *fb;
  j["fallback"] = nlohmann::json::parse(fallback_to_json(stats));
  Heatmap h = export_heatmap(stats, HeatmapOrdering::ByTensor);
  j["heatmap"] = nlohmann::json::parse(heatmap_to_json(h));
  return j.dump(2);
}

}  // namespace morq
