#include <filesystem>
#include <fstream>
#include <iostream>
#include <malloc.h>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddcnet/analysis.hpp"
#include "ddcnet/checkpoint.hpp"
#include "ddcnet/harness.hpp"
#include "ddcnet/image_io.hpp"
#include "ddcnet/network.hpp"
#include "ddcnet/synthdata.hpp"

namespace fs = std::filesystem;
using namespace ddcnet;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

// Config file plus command-line key=value overrides.
TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    text += '\n';
  }
  for (const auto& kv : overrides) text += kv + '\n';
  return TrainConfig::parse(text);
}

std::unique_ptr<SampleSource> data_source(const std::string& dir, const TrainConfig& cfg) {
  if (!dir.empty()) return std::make_unique<MemorySource>(load_folder(dir));
  return make_test_source(cfg);
}

int run(int argc, char** argv) {
  CLI::App app{"Frequency-domain adverse-weather restoration: training, evaluation, analysis"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, data_dir, in_path, out_path, resume;
  std::vector<std::string> overrides;
  Index n = 0, size = 100, per_weather = 0;
  std::uint64_t seed = 1;
  bool do_eval = false;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "override a config key (key=value), repeatable");
  };

  auto* c_config = app.add_subcommand("config", "print the default config with key docs");
  add_config(c_config);

  auto* c_train = app.add_subcommand("train", "train a model");
  add_config(c_train);
  c_train->add_option("--resume", resume, "checkpoint to continue from");
  c_train->add_flag("--eval", do_eval, "evaluate on the test set afterwards");
  c_train->add_option("--report", out_path, "write the final evaluation JSON here");

  auto* c_eval = app.add_subcommand("eval", "per-weather PSNR/SSIM of a checkpoint");
  add_config(c_eval);
  c_eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  c_eval->add_option("--data", data_dir, "paired folder (default: synthetic test set)");
  c_eval->add_option("--per-weather", per_weather, "limit images per weather (0 = all)");
  c_eval->add_option("--out", out_path, "write JSON here; a .csv twin is written alongside");

  auto* c_infer = app.add_subcommand("infer", "restore one PNG");
  c_infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  c_infer->add_option("--in", in_path, "input PNG")->required();
  c_infer->add_option("--out", out_path, "output PNG")->required();

  auto* c_synth = app.add_subcommand("synth", "write a synthetic paired dataset");
  add_config(c_synth);
  c_synth->add_option("--out", out_path, "output folder")->required();
  c_synth->add_option("--n", n, "pairs per weather")->required();
  c_synth->add_option("--seed", seed, "master seed");
  c_synth->add_option("--size", size, "image side");

  auto* c_ablate = app.add_subcommand("ablate", "train and compare the ablation variants");
  add_config(c_ablate);
  c_ablate->add_option("--out", out_path, "write JSON here; a .csv twin is written alongside");

  auto* c_analyze = app.add_subcommand("analyze", "spectral analyses");
  c_analyze->require_subcommand(1);
  auto* a_stats = c_analyze->add_subcommand("amp-stats", "radial log-amplitude of degraded minus clean");
  add_config(a_stats);
  a_stats->add_option("--data", data_dir, "paired folder (default: synthetic)");
  a_stats->add_option("--n", n, "samples per weather")->default_val(500);
  a_stats->add_option("--out", out_path, "write JSON here; a .csv twin is written alongside");

  auto* a_swap = c_analyze->add_subcommand("amp-swap", "swap amplitude and phase of a pair");
  add_config(a_swap);
  a_swap->add_option("--in", in_path, "degraded PNG (default: a synthetic haze pair)");
  std::string gt_path;
  a_swap->add_option("--gt", gt_path, "clean PNG");
  a_swap->add_option("--out", out_path, "output folder")->required();

  auto* a_feat = c_analyze->add_subcommand("features", "dump stage features and amplitudes");
  add_config(a_feat);
  std::string layer = "enc2";
  a_feat->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  a_feat->add_option("--layer", layer, "image, enc0..enc2, mid, dec2..dec0");
  a_feat->add_option("--data", data_dir, "paired folder (default: synthetic test set)");
  a_feat->add_option("--per-weather", per_weather, "limit images per weather (0 = all)");
  a_feat->add_option("--out", out_path, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  auto twin_csv = [](const std::string& json_path) {
    return fs::path(json_path).replace_extension(".csv").string();
  };

  if (*c_config) {
    std::cout << load_config(config_path, overrides).documented();
  } else if (*c_train) {
    const TrainConfig cfg = load_config(config_path, overrides);
    const auto train_data = make_train_source(cfg);
    const auto test_data = make_test_source(cfg);
    std::unique_ptr<ParameterStore<float>> start;
    if (!resume.empty()) {
      start = std::make_unique<ParameterStore<float>>(load_checkpoint<float>(resume, &cfg.net));
    }
    const TrainResult r = train(cfg, *train_data, test_data.get(), start.get());
    std::cerr << "trained " << r.store.step << " steps, " << count_params(r.store)
              << " parameters\n";
    if (do_eval) {
      const MetricsReport rep = evaluate(r.store, *test_data);
      std::cout << rep.to_csv();
      write_text(out_path, rep.to_json() + "\n");
    }
  } else if (*c_eval) {
    const TrainConfig cfg = load_config(config_path, overrides);
    const auto store = load_checkpoint<float>(checkpoint);
    const auto data = data_source(data_dir, cfg);
    const MetricsReport rep = evaluate(store, *data, per_weather);
    std::cout << rep.to_csv();
    if (!out_path.empty()) {
      write_text(out_path, rep.to_json() + "\n");
      write_text(twin_csv(out_path), rep.to_csv());
    }
  } else if (*c_infer) {
    const auto store = load_checkpoint<float>(checkpoint);
    write_png(out_path, restore(store, read_png(in_path)));
  } else if (*c_synth) {
    TrainConfig cfg = load_config(config_path, overrides);
    if (n < 1) throw ConfigError("--n must be positive");
    write_dataset(out_path, make_dataset(n, size, cfg.degrade, seed));
  } else if (*c_ablate) {
    const TrainConfig cfg = load_config(config_path, overrides);
    const auto train_data = make_train_source(cfg);
    const auto test_data = make_test_source(cfg);
    const AblationTable table = run_ablations(
        cfg, *train_data, *test_data, [](const std::string& line) { std::cerr << line << '\n'; });
    std::cout << table.to_text();
    if (!out_path.empty()) {
      write_text(out_path, table.to_json() + "\n");
      write_text(twin_csv(out_path), table.to_csv());
    }
  } else if (*a_stats) {
    TrainConfig cfg = load_config(config_path, overrides);
    std::unique_ptr<SampleSource> data;
    if (!data_dir.empty()) {
      data = std::make_unique<MemorySource>(load_folder(data_dir));
    } else {
      data = std::make_unique<SyntheticSource>(n, cfg.test_size, cfg.degrade,
                                               test_data_seed(cfg.seed));
    }
    const AmpStats stats = analyze_amp_stats(*data, n);
    std::cout << stats.to_csv();
    if (!out_path.empty()) {
      write_text(out_path, stats.to_json() + "\n");
      write_text(twin_csv(out_path), stats.to_csv());
    }
  } else if (*a_swap) {
    TrainConfig cfg = load_config(config_path, overrides);
    WeatherSample pair;
    if (!in_path.empty()) {
      if (gt_path.empty()) throw ConfigError("--in needs --gt");
      pair.degraded = read_png(in_path);
      pair.clean = read_png(gt_path);
    } else {
      SyntheticSource src(1, cfg.test_size, cfg.degrade, test_data_seed(cfg.seed));
      pair = src.get(src.indices_of(Weather::Haze).front());
    }
    const AmpSwap r = analyze_amp_swap(pair);
    fs::create_directories(out_path);
    write_png((fs::path(out_path) / "degraded.png").string(), r.degraded);
    write_png((fs::path(out_path) / "clean.png").string(), r.clean);
    write_png((fs::path(out_path) / "clean_amp_degraded_phase.png").string(),
              r.clean_amp_degraded_phase);
    write_png((fs::path(out_path) / "degraded_amp_clean_phase.png").string(),
              r.degraded_amp_clean_phase);
    write_text((fs::path(out_path) / "psnr.json").string(), r.to_json() + "\n");
    std::cout << r.to_json() << '\n';
  } else if (*a_feat) {
    const TrainConfig cfg = load_config(config_path, overrides);
    const auto store = load_checkpoint<float>(checkpoint);
    const auto data = data_source(data_dir, cfg);
    const FeatureDump dump = dump_features(store, *data, layer, per_weather);
    write_text(out_path, dump.to_csv());
    std::cerr << dump.tags.size() << " rows written to " << out_path << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // keep freed buffers in the heap; big tensors otherwise round-trip through mmap
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return e.reason() == CheckpointError::Reason::ConfigMismatch ? kConfig : kData;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
