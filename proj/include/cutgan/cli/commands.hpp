#pragma once

#include <map>
#include <string>

#include "cutgan/metrics/metrics.hpp"
#include "cutgan/train/trainer.hpp"

namespace cutgan {

struct TrainOptions {
  std::string run_dir;
  std::string data_root;                         // root of the image-folder layout
  std::string subdir_x = "trainX";               // domain subfolders under data_root
  std::string subdir_y = "trainY";
  std::string config_path;                       // optional flat key=value file
  std::map<std::string, std::string> overrides;  // config keys set on the CLI
  std::string preset;                            // lambda_1_1 | lambda_10_0 | ""
  bool toy = false;
  int64_t toy_train_images = 64;
  int64_t toy_test_images = 16;
  std::string resume;   // checkpoint to resume from
  bool quiet = false;   // suppress per-step stdout
};

// Writes manifest.json, losses.csv and checkpoints/ under run_dir;
// returns the run directory.
std::string cmd_train(const TrainOptions& opt);

// One PNG per input image, same file stems, deterministic. Inputs whose sides
// are not divisible by 4 (or below the generator minimum) are reflect-padded
// for translation and cropped back.
void cmd_translate(const std::string& checkpoint_path, const std::string& input_dir,
                   const std::string& output_dir);

struct EvaluateOptions {
  std::string real_dir, fake_dir;
  std::string embedder = "toy";
  uint64_t seed = 0;
  int64_t image_size = 64;
  int n_projections = 128;
  int is_splits = 1;
  int swd_order = 2;
  std::string out_path;  // optional JSON file
  std::string csv_path;  // optional CSV row append
};

metrics::MetricReport cmd_evaluate(const EvaluateOptions& opt);

// Renders one PNG per loss column under <run_dir>/plots.
void cmd_plot(const std::string& run_dir);

// Flat key=value config file -> TrainConfig json patch. Unknown keys raise an
// error listing the valid ones.
nlohmann::json parse_config_file(const std::string& path);
nlohmann::json parse_config_overrides(const std::map<std::string, std::string>& kv);

std::string metric_report_json(const metrics::MetricReport& rep);

}  // namespace cutgan
