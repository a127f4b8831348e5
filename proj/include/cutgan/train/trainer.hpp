#pragma once

#include <functional>
#include <json.hpp>
#include <string>

#include "cutgan/attention/attention.hpp"
#include "cutgan/contrastive/nce.hpp"
#include "cutgan/core/adam.hpp"
#include "cutgan/data/dataset.hpp"
#include "cutgan/io/checkpoint.hpp"
#include "cutgan/models/discriminator.hpp"
#include "cutgan/models/generator.hpp"

namespace cutgan {

struct TrainConfig {
  double lambda_x = 1.0;
  double lambda_y = 1.0;
  double lr = 0.002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int64_t batch_size = 1;
  int64_t epochs = 400;
  int64_t max_steps = 0;  // 0: run epochs out; otherwise stop at this step
  uint64_t seed = 0;
  std::string attention = "self";
  double tau = 0.07;
  int64_t k = 256;
  int64_t image_size = 256;
  int64_t gen_base_channels = 64;
  int gen_res_blocks = 9;
  int64_t disc_base_channels = 64;
  int disc_layers = 3;
  int64_t nce_dim = 256;
  bool lr_decay = false;  // linear to zero over the planned steps
  bool random_crop = false;
  int64_t checkpoint_every = 1000;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  // (lambda_x, lambda_y) presets: "lambda_1_1" trains jointly with the
  // identity loss, "lambda_10_0" compensates for dropping it.
  void apply_preset(const std::string& preset);
};

struct LossReport {
  int64_t step = 0;
  double d_loss = 0, g_gan_loss = 0, nce_x = 0, nce_y = 0, total_g = 0;
};

// Test/diagnostic hook: parameter-group hashes around each optimizer update
// and a call counter for the identity term.
struct StepProbe {
  uint64_t g_group_before_d = 0, g_group_after_d = 0;
  uint64_t d_group_before_g = 0, d_group_after_g = 0;
  int64_t identity_nce_calls = 0;
};

// Owns the generator, discriminator, projection heads, attention scorer and
// both Adam optimizers; runs the alternating D-then-G update of the total
// objective and serializes the whole state for exact resume.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  int64_t global_step() const { return global_step_; }
  int64_t epoch() const { return epoch_; }

  ResnetGenerator<float>& generator() { return gen_; }
  PatchDiscriminator<float>& discriminator() { return disc_; }
  ProjectionHeads<float>& heads() { return heads_; }
  AttentionScorer<float>& attention() { return attn_; }

  nn::ParamMap<float> generator_group_params() const;
  nn::ParamMap<float> discriminator_params() const;

  // One discriminator update on (real y, detached G(x)), then one update of
  // generator + heads + attention on the total objective.
  LossReport train_step(const Tensor<float>& x_batch, const Tensor<float>& y_batch,
                        StepProbe* probe = nullptr);

  // Runs until the step target, reporting each LossReport and writing
  // checkpoints under checkpoint_dir (step 0, every checkpoint_every, final).
  void train(const UnpairedDataset& dataset, const std::string& checkpoint_dir,
             const std::function<void(const LossReport&)>& on_report);

  Checkpoint make_checkpoint() const;
  void load_checkpoint(const Checkpoint& ck);

 private:
  void plan_total_steps(const UnpairedDataset& dataset);

  TrainConfig cfg_;
  ResnetGenerator<float> gen_;
  PatchDiscriminator<float> disc_;
  ProjectionHeads<float> heads_;
  AttentionScorer<float> attn_;
  Adam<float> adam_g_, adam_d_;
  int64_t global_step_ = 0;
  int64_t epoch_ = 0;
  int64_t step_in_epoch_ = 0;
  int64_t planned_total_steps_ = 0;
};

uint64_t hash_params(const nn::ParamMap<float>& params);

}  // namespace cutgan
