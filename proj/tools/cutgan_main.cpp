#include <CLI11.hpp>
#include <cstdio>

#include "cutgan/cli/commands.hpp"

namespace {

// shared --<key> flags that map straight onto config keys
void add_config_flags(CLI::App* cmd, std::map<std::string, std::string>& overrides) {
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"--attention", "attention"},   {"--tau", "tau"},
      {"--k", "k"},                   {"--image-size", "image_size"},
      {"--epochs", "epochs"},         {"--max-steps", "max_steps"},
      {"--seed", "seed"},             {"--batch-size", "batch_size"},
      {"--lr", "lr"},                 {"--lambda-x", "lambda_x"},
      {"--lambda-y", "lambda_y"},     {"--checkpoint-every", "checkpoint_every"},
      {"--gen-base", "gen_base_channels"},
      {"--res-blocks", "gen_res_blocks"},
      {"--disc-base", "disc_base_channels"},
      {"--disc-layers", "disc_layers"},
      {"--nce-dim", "nce_dim"},
  };
  for (const auto& [flag, key] : flags) {
    std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&overrides, k](const std::string& v) { overrides[k] = v; });
  }
  cmd->add_flag_callback("--lr-decay", [&overrides] { overrides["lr_decay"] = "true"; });
  cmd->add_flag_callback("--random-crop", [&overrides] { overrides["random_crop"] = "true"; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-guided contrastive unpaired image-to-image translation"};
  app.require_subcommand(1);

  cutgan::TrainOptions topt;
  auto* train = app.add_subcommand("train", "train a translator on two unpaired image folders");
  train->add_option("--run-dir", topt.run_dir, "output directory for this run")->required();
  train->add_option("--data-root", topt.data_root,
                    "dataset root containing trainX/trainY (and testX/testY)");
  train->add_option("--subdir-x", topt.subdir_x, "domain X subfolder (default trainX)");
  train->add_option("--subdir-y", topt.subdir_y, "domain Y subfolder (default trainY)");
  train->add_option("--config", topt.config_path, "flat key=value config file");
  train->add_option("--preset", topt.preset, "lambda preset: lambda_1_1 | lambda_10_0");
  train->add_flag("--toy", topt.toy, "generate and train on the synthetic two-domain dataset");
  train->add_option("--toy-train-images", topt.toy_train_images);
  train->add_option("--toy-test-images", topt.toy_test_images);
  train->add_option("--resume", topt.resume, "checkpoint file to resume from");
  train->add_flag("--quiet", topt.quiet, "suppress per-step progress lines");
  add_config_flags(train, topt.overrides);

  std::string ckpt, in_dir, out_dir;
  auto* translate = app.add_subcommand("translate", "translate a folder of images");
  translate->add_option("--checkpoint", ckpt, "training checkpoint")->required();
  translate->add_option("--input", in_dir, "input image directory")->required();
  translate->add_option("--output", out_dir, "output directory (PNG per input)")->required();

  cutgan::EvaluateOptions eopt;
  auto* evaluate = app.add_subcommand("evaluate", "FID / IS / SWD between two image folders");
  evaluate->add_option("--real", eopt.real_dir, "reference image directory")->required();
  evaluate->add_option("--fake", eopt.fake_dir, "generated image directory")->required();
  evaluate->add_option("--embedder", eopt.embedder, "toy | pretrained:<weights-file>");
  evaluate->add_option("--seed", eopt.seed);
  evaluate->add_option("--image-size", eopt.image_size);
  evaluate->add_option("--projections", eopt.n_projections, "SWD projection count");
  evaluate->add_option("--splits", eopt.is_splits, "inception-score splits");
  evaluate->add_option("--swd-order", eopt.swd_order, "1-D Wasserstein order (1 or 2)");
  evaluate->add_option("--out", eopt.out_path, "also write the JSON report here");
  evaluate->add_option("--csv", eopt.csv_path, "append a CSV row here");

  std::string plot_run_dir;
  auto* plot = app.add_subcommand("plot", "render loss curves from a run directory");
  plot->add_option("--run-dir", plot_run_dir, "run directory with losses.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      std::string dir = cutgan::cmd_train(topt);
      std::printf("run complete: %s\n", dir.c_str());
    } else if (translate->parsed()) {
      cutgan::cmd_translate(ckpt, in_dir, out_dir);
    } else if (evaluate->parsed()) {
      cutgan::cmd_evaluate(eopt);
    } else if (plot->parsed()) {
      cutgan::cmd_plot(plot_run_dir);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
