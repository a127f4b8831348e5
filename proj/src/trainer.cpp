#include "cutgan/train/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "cutgan/train/losses.hpp"

namespace cutgan {

void TrainConfig::validate() const {
  check(lr > 0, "config: lr must be positive");
  check(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "config: betas must be in [0,1)");
  check(batch_size >= 1, "config: batch_size must be >= 1");
  check(epochs >= 1 || max_steps >= 1, "config: need epochs >= 1 or max_steps >= 1");
  check(tau > 0, "config: tau must be positive");
  check(k >= 2, "config: k must be >= 2 (a query needs at least one negative)");
  check(image_size >= 12 && image_size % 4 == 0,
        "config: image_size must be >= 12 and divisible by 4");
  check(nce_dim >= 1, "config: nce_dim must be positive");
  check(checkpoint_every >= 1, "config: checkpoint_every must be >= 1");
  attention_kind_from_string(attention);  // throws on unknown kind
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda_x", lambda_x},
          {"lambda_y", lambda_y},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"seed", seed},
          {"attention", attention},
          {"tau", tau},
          {"k", k},
          {"image_size", image_size},
          {"gen_base_channels", gen_base_channels},
          {"gen_res_blocks", gen_res_blocks},
          {"disc_base_channels", disc_base_channels},
          {"disc_layers", disc_layers},
          {"nce_dim", nce_dim},
          {"lr_decay", lr_decay},
          {"random_crop", random_crop},
          {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda_x = j.value("lambda_x", c.lambda_x);
  c.lambda_y = j.value("lambda_y", c.lambda_y);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.seed = j.value("seed", c.seed);
  c.attention = j.value("attention", c.attention);
  c.tau = j.value("tau", c.tau);
  c.k = j.value("k", c.k);
  c.image_size = j.value("image_size", c.image_size);
  c.gen_base_channels = j.value("gen_base_channels", c.gen_base_channels);
  c.gen_res_blocks = j.value("gen_res_blocks", c.gen_res_blocks);
  c.disc_base_channels = j.value("disc_base_channels", c.disc_base_channels);
  c.disc_layers = j.value("disc_layers", c.disc_layers);
  c.nce_dim = j.value("nce_dim", c.nce_dim);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.random_crop = j.value("random_crop", c.random_crop);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  return c;
}

void TrainConfig::apply_preset(const std::string& preset) {
  if (preset == "lambda_1_1") {
    lambda_x = 1.0;
    lambda_y = 1.0;
  } else if (preset == "lambda_10_0") {
    lambda_x = 10.0;
    lambda_y = 0.0;
  } else {
    throw std::runtime_error("unknown preset '" + preset +
                             "' (expected lambda_1_1 or lambda_10_0)");
  }
}

uint64_t hash_params(const nn::ParamMap<float>& params) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, v] : params) {
    mix(name.data(), name.size());
    mix(v.value().data(), static_cast<size_t>(v.value().numel()) * sizeof(float));
  }
  return h;
}

namespace {

GeneratorConfig generator_config(const TrainConfig& cfg) {
  GeneratorConfig g;
  g.base_channels = cfg.gen_base_channels;
  g.n_residual_blocks = cfg.gen_res_blocks;
  return g;
}

DiscriminatorConfig discriminator_config(const TrainConfig& cfg) {
  DiscriminatorConfig d;
  d.base_channels = cfg.disc_base_channels;
  d.n_layers = cfg.disc_layers;
  return d;
}

AttentionConfig attention_config(const TrainConfig& cfg) {
  AttentionConfig a;
  a.kind = attention_kind_from_string(cfg.attention);
  return a;
}

void check_finite(double v, const char* term, int64_t step) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("non-finite " + std::string(term) + " at step " +
                             std::to_string(step) + "; aborting");
  }
}

}  // namespace

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  gen_ = ResnetGenerator<float>(generator_config(cfg_), cfg_.seed);
  disc_ = PatchDiscriminator<float>(discriminator_config(cfg_), cfg_.seed);
  heads_ = ProjectionHeads<float>(cfg_.nce_dim, cfg_.seed);
  attn_ = AttentionScorer<float>(attention_config(cfg_), cfg_.seed);
  adam_g_ = Adam<float>(static_cast<float>(cfg_.lr), static_cast<float>(cfg_.beta1),
                        static_cast<float>(cfg_.beta2));
  adam_d_ = Adam<float>(static_cast<float>(cfg_.lr), static_cast<float>(cfg_.beta1),
                        static_cast<float>(cfg_.beta2));
}

nn::ParamMap<float> Trainer::generator_group_params() const {
  nn::ParamMap<float> pm;
  gen_.params(pm);
  heads_.params(pm);
  attn_.params(pm);
  return pm;
}

nn::ParamMap<float> Trainer::discriminator_params() const {
  nn::ParamMap<float> pm;
  disc_.params(pm);
  return pm;
}

LossReport Trainer::train_step(const Tensor<float>& x_batch, const Tensor<float>& y_batch,
                               StepProbe* probe) {
  check(x_batch.ndim() == 4 && y_batch.ndim() == 4, "train_step: batches must be B,3,H,W");
  check(x_batch.shape() == y_batch.shape(), "train_step: x and y batch shapes differ");

  auto x = Var<float>::constant(x_batch);
  auto y = Var<float>::constant(y_batch);
  int64_t batch = x_batch.dim(0);

  // one generator forward serves the D step (detached) and the G step
  auto fwd = gen_.forward(x, true);

  // --- discriminator update on real y and detached G(x)
  if (probe) probe->g_group_before_d = hash_params(generator_group_params());
  auto d_params = discriminator_params();
  adam_d_.zero_grad(d_params);
  auto d_real = disc_.forward(y);
  auto d_fake = disc_.forward(fwd.output.detach());
  auto d_loss = lsgan_d_loss(d_real, d_fake);
  check_finite(d_loss.item(), "d_loss", global_step_);
  backward(d_loss);
  adam_d_.step(d_params);
  if (probe) {
    probe->g_group_after_d = hash_params(generator_group_params());
    probe->d_group_before_g = hash_params(discriminator_params());
  }

  // --- generator + heads + attention update
  auto d_fake2 = disc_.forward(fwd.output);
  auto g_gan = lsgan_g_loss(d_fake2);
  auto taps_fake = gen_.encode(fwd.output);
  uint64_t draw_x = Rng::keyed(cfg_.seed, "train.draw.x", static_cast<uint64_t>(global_step_)).u64();
  auto nce_x_res = patch_nce_from_taps(fwd.taps, taps_fake, heads_, attn_,
                                       cfg_.k, static_cast<float>(cfg_.tau), draw_x);
  Var<float> nce_y_loss;
  if (cfg_.lambda_y != 0) {
    auto fwd_y = gen_.forward(y, true);
    auto taps_idt = gen_.encode(fwd_y.output);
    uint64_t draw_y =
        Rng::keyed(cfg_.seed, "train.draw.y", static_cast<uint64_t>(global_step_)).u64();
    nce_y_loss = patch_nce_from_taps(fwd_y.taps, taps_idt, heads_, attn_,
                                     cfg_.k, static_cast<float>(cfg_.tau), draw_y)
                     .loss;
    if (probe) probe->identity_nce_calls++;
  }
  auto total = total_generator_objective(g_gan, nce_x_res.loss, nce_y_loss,
                                         static_cast<float>(cfg_.lambda_x),
                                         static_cast<float>(cfg_.lambda_y));

  LossReport report;
  report.step = global_step_;
  report.d_loss = d_loss.item();
  report.g_gan_loss = g_gan.item();
  report.nce_x = nce_x_res.loss.item();
  report.nce_y = nce_y_loss.defined() ? nce_y_loss.item() : 0.0;
  report.total_g = report.g_gan_loss + cfg_.lambda_x * report.nce_x + cfg_.lambda_y * report.nce_y;
  check_finite(report.g_gan_loss, "g_gan_loss", global_step_);
  check_finite(report.nce_x, "nce_x", global_step_);
  check_finite(report.nce_y, "nce_y", global_step_);

  auto g_params = generator_group_params();  // after lazy head creation
  adam_g_.zero_grad(g_params);
  backward(total);
  if (cfg_.lr_decay && planned_total_steps_ > 0) {
    float f = 1.0f - static_cast<float>(global_step_) / static_cast<float>(planned_total_steps_);
    adam_g_.set_lr(static_cast<float>(cfg_.lr) * f);
    adam_d_.set_lr(static_cast<float>(cfg_.lr) * f);
  }
  adam_g_.step(g_params);
  if (probe) probe->d_group_after_g = hash_params(discriminator_params());

  global_step_++;
  step_in_epoch_ += batch;
  return report;
}

void Trainer::plan_total_steps(const UnpairedDataset& dataset) {
  int64_t per_epoch = dataset.steps_per_epoch(cfg_.batch_size);
  planned_total_steps_ =
      cfg_.max_steps > 0 ? cfg_.max_steps : cfg_.epochs * per_epoch;
}

void Trainer::train(const UnpairedDataset& dataset, const std::string& checkpoint_dir,
                    const std::function<void(const LossReport&)>& on_report) {
  namespace fs = std::filesystem;
  check(cfg_.batch_size <= std::max(dataset.size_x(), dataset.size_y()),
        "train: batch_size exceeds dataset size");
  plan_total_steps(dataset);
  int64_t per_epoch = dataset.steps_per_epoch(cfg_.batch_size);

  fs::create_directories(checkpoint_dir);
  auto ckpt_path = [&](const std::string& tag) {
    return (fs::path(checkpoint_dir) / ("ckpt_" + tag + ".bin")).string();
  };
  if (global_step_ == 0) make_checkpoint().save(ckpt_path("step000000"));

  while (global_step_ < planned_total_steps_) {
    int64_t step_index = step_in_epoch_ / cfg_.batch_size;
    if (step_index >= per_epoch) {
      epoch_++;
      step_in_epoch_ = 0;
      step_index = 0;
    }
    auto batch = dataset.load_batch(epoch_, step_index, cfg_.batch_size);
    LossReport report = train_step(batch.x, batch.y);
    on_report(report);
    if (global_step_ % cfg_.checkpoint_every == 0 && global_step_ < planned_total_steps_) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "step%06lld", static_cast<long long>(global_step_));
      make_checkpoint().save(ckpt_path(tag));
    }
  }
  make_checkpoint().save(ckpt_path("final"));
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ck;
  ck.meta["kind"] = "cutgan-train-state";
  ck.meta["step"] = global_step_;
  ck.meta["epoch"] = epoch_;
  ck.meta["step_in_epoch"] = step_in_epoch_;
  ck.meta["config"] = cfg_.to_json();
  auto dump_group = [&](const nn::ParamMap<float>& pm) {
    for (const auto& [name, v] : pm) ck.add(name, v.value().clone());
  };
  dump_group(generator_group_params());
  dump_group(discriminator_params());
  nlohmann::json opt_steps = nlohmann::json::object();
  auto dump_opt = [&](const Adam<float>& adam, const std::string& prefix) {
    for (const auto& [name, st] : adam.states()) {
      ck.add(prefix + ".m." + name, st.m.clone());
      ck.add(prefix + ".v." + name, st.v.clone());
      opt_steps[prefix + "." + name] = st.t;
    }
  };
  dump_opt(adam_g_, "opt_g");
  dump_opt(adam_d_, "opt_d");
  ck.meta["opt_steps"] = std::move(opt_steps);
  return ck;
}

void Trainer::load_checkpoint(const Checkpoint& ck) {
  check(ck.meta.value("kind", "") == "cutgan-train-state",
        "load_checkpoint: container is not a training state (kind=" +
            ck.meta.value("kind", std::string("<missing>")) + ")");
  TrainConfig stored = TrainConfig::from_json(ck.meta.at("config"));
  // model geometry must match; runtime knobs (epochs, max_steps, paths) may differ
  check(stored.gen_base_channels == cfg_.gen_base_channels &&
            stored.gen_res_blocks == cfg_.gen_res_blocks &&
            stored.disc_base_channels == cfg_.disc_base_channels &&
            stored.disc_layers == cfg_.disc_layers && stored.nce_dim == cfg_.nce_dim,
        "load_checkpoint: model architecture in checkpoint differs from configuration");
  global_step_ = ck.meta.at("step").get<int64_t>();
  epoch_ = ck.meta.at("epoch").get<int64_t>();
  step_in_epoch_ = ck.meta.at("step_in_epoch").get<int64_t>();

  // restore model parameters; heads/attention tensors recreate lazy modules
  nn::ParamMap<float> fixed;
  gen_.params(fixed);
  disc_.params(fixed);
  std::map<std::string, Var<float>> by_name(fixed.begin(), fixed.end());
  for (const auto& [name, t] : ck.tensors()) {
    if (name.rfind("opt_", 0) == 0) continue;
    if (name.rfind("heads.", 0) == 0) {
      heads_.load_param(name, t);
    } else if (name.rfind("attn.", 0) == 0) {
      attn_.load_param(name, t);
    } else {
      auto it = by_name.find(name);
      check(it != by_name.end(), "load_checkpoint: unexpected tensor " + name);
      check(it->second.value().shape() == t.shape(),
            "load_checkpoint: shape mismatch for " + name);
      std::copy_n(t.data(), t.numel(), it->second.value().data());
    }
  }
  auto load_opt = [&](Adam<float>& adam, const std::string& prefix) {
    adam.states().clear();
    const auto& opt_steps = ck.meta.at("opt_steps");
    for (const auto& [name, t] : ck.tensors()) {
      std::string mpre = prefix + ".m.";
      if (name.rfind(mpre, 0) != 0) continue;
      std::string pname = name.substr(mpre.size());
      auto& st = adam.states()[pname];
      st.m = t.clone();
      st.v = ck.get(prefix + ".v." + pname).clone();
      st.t = opt_steps.at(prefix + "." + pname).get<int64_t>();
    }
  };
  load_opt(adam_g_, "opt_g");
  load_opt(adam_d_, "opt_d");
}

}  // namespace cutgan
