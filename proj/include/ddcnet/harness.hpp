#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddcnet/losses.hpp"
#include "ddcnet/metrics.hpp"
#include "ddcnet/parameters.hpp"
#include "ddcnet/synthdata.hpp"

namespace ddcnet {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamOptions&) const = default;
};

// Everything a training run depends on. Serialized as flat key=value lines;
// see TrainConfig::documented() for the key list.
struct TrainConfig {
  NetConfig net;
  LossWeights loss;
  DegradeParams degrade;
  AdamOptions adam;

  Index batch = 8;
  Index patch = 64;
  Index steps = 2000;
  // Stop after this many completed steps (0 = run to `steps`). The schedule
  // still spans `steps`, so a stopped run can be resumed.
  Index stop_at = 0;
  double lr_start = 2e-4;
  double lr_end = 1e-6;
  std::uint64_t seed = 20240607;

  Index train_per_weather = 1500;
  Index test_per_weather = 150;
  Index train_size = 96;
  Index test_size = 100;
  std::string train_dir;  // paired folder; overrides the synthetic train set
  std::string test_dir;

  std::string checkpoint;      // written at the end and every checkpoint_every steps
  Index checkpoint_every = 0;
  std::string log;             // JSON run log
  Index eval_every = 0;        // periodic evaluation on eval_per_weather test images
  Index eval_per_weather = 10;
  Index log_every = 50;        // progress lines on stderr (0 = silent)

  void validate() const;
  std::string serialize() const;
  // serialize() with a comment line describing each key.
  std::string documented() const;
  // Unknown keys, malformed lines and invalid values throw ConfigError.
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::string& path);

  bool operator==(const TrainConfig&) const = default;
};

// Cosine annealing from lr_start at step 0 to lr_end at step == steps.
double lr_at(Index step, const TrainConfig& cfg);

// One Adam update with bias correction; moments live in the store's
// optimizer state as "adam.m:<name>" and "adam.v:<name>". Uses and then
// increments store.step.
template <typename Scalar>
void adam_step(ParameterStore<Scalar>& store, double lr, const AdamOptions& opt);

struct StepRecord {
  Index step = 0;  // 1-based count of completed updates
  double loss = 0, mae = 0, fft = 0, dm = 0;
  double lr = 0;
  std::uint64_t batch_seed = 0;
};

struct EvalRecord {
  Index step = 0;
  MetricsReport report;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::vector<std::string> warnings;

  double mean_loss(Index first, Index count) const;
  std::string to_json() const;
};

// Per-consumer seeds, all derived from the master seed.
std::uint64_t init_seed(std::uint64_t master);
std::uint64_t batch_seed(std::uint64_t master, Index step);
std::uint64_t train_data_seed(std::uint64_t master);
std::uint64_t test_data_seed(std::uint64_t master);

std::unique_ptr<SampleSource> make_train_source(const TrainConfig& cfg);
std::unique_ptr<SampleSource> make_test_source(const TrainConfig& cfg);

struct TrainResult {
  ParameterStore<float> store;
  RunLog log;
};

// Runs Adam on total_loss over mixed-weather batches. With `resume` the run
// continues from resume->step; its config must match cfg.net. A non-finite
// loss throws NumericError naming the step and batch seed.
TrainResult train(const TrainConfig& cfg, const SampleSource& data,
                  const SampleSource* eval_data = nullptr,
                  const ParameterStore<float>* resume = nullptr);

// Reflect-pads the bottom and right edges up to a multiple of m.
Image reflect_pad(const Image& img, Index m);
Image crop(const Image& img, Index h, Index w);

// Pads to a multiple of 8, runs the network, crops back and clamps to [0, 1].
Image restore(const ParameterStore<float>& store, const Image& img);

// Per-weather means over the first `per_weather` samples of each weather
// (0 = all). The store is copied, never modified.
MetricsReport evaluate(const ParameterStore<float>& store, const SampleSource& data,
                       Index per_weather = 0);

struct AblationRow {
  std::string variant;
  std::string table;  // which reference table the row belongs to
  Index params = 0;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;
  double reference_psnr = 0;
  std::string note;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  Index steps = 0;

  std::string to_json() const;
  std::string to_csv() const;
  std::string to_text() const;
};

struct AblationVariant {
  std::string name;
  std::string table;
  double reference_psnr;
  TrainConfig cfg;
};

// The seven variants: Model-1 (no amplitude guidance), Model-2 (no mean
// amplitude subtraction), Model-3 (RDB in place of CRM), Full, and loss
// weights (1,1,0), (1,0,1), (1,1,1). Each shares the base seed and budget.
std::vector<AblationVariant> ablation_variants(const TrainConfig& base);

// Trains and evaluates every variant. A variant whose config equals an
// earlier one reuses its result. `progress` receives a line per variant.
AblationTable run_ablations(const TrainConfig& base, const SampleSource& train_data,
                            const SampleSource& test_data,
                            const std::function<void(const std::string&)>& progress = {});

// Mean radial log-amplitude of degraded minus clean, per weather.
struct AmpStats {
  std::vector<std::vector<double>> profiles;  // [weather][bin]
  Index per_weather = 0;

  std::string to_json() const;
  std::string to_csv() const;
};

// Uses the first n samples of each weather; throws DataError when a
// weather has fewer.
AmpStats analyze_amp_stats(const SampleSource& data, Index n);

struct AmpSwap {
  Image degraded, clean;
  Image clean_amp_degraded_phase;  // clamped to [0, 1]
  Image degraded_amp_clean_phase;
  double psnr_degraded = 0;        // each against clean
  double psnr_clean_amp = 0;
  double psnr_degraded_amp = 0;

  std::string to_json() const;
};

AmpSwap analyze_amp_swap(const WeatherSample& pair);

// Channel-pooled stage inputs plus the radial log-amplitude profile of the
// channel mean of that map, one row per sample. Layer "image" uses the
// degraded image itself.
struct FeatureDump {
  std::string layer;
  std::vector<std::vector<double>> features;
  std::vector<std::vector<double>> amplitudes;
  std::vector<Weather> tags;

  std::string to_csv() const;
  std::string to_json() const;
};

// Throws ConfigError for an unknown layer.
FeatureDump dump_features(const ParameterStore<float>& store, const SampleSource& data,
                          const std::string& layer, Index per_weather = 0);

}  // namespace ddcnet
