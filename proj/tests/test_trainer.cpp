#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "cutgan/data/image.hpp"
#include "cutgan/train/losses.hpp"
#include "cutgan/train/trainer.hpp"

using namespace cutgan;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.gen_base_channels = 4;
  cfg.gen_res_blocks = 6;
  cfg.disc_base_channels = 4;
  cfg.disc_layers = 2;  // a 16px input leaves no room for the 3-layer stack
  cfg.k = 4;
  cfg.nce_dim = 16;
  cfg.seed = seed;
  cfg.epochs = 1;
  cfg.checkpoint_every = 1000;
  return cfg;
}

Tensor<float> rand_batch(uint64_t seed, int64_t b = 1, int64_t s = 16) {
  Rng rng = Rng::keyed(seed, "trainer.batch");
  Tensor<float> t = Tensor<float>::randn({b, 3, s, s}, rng, 0.4f);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], -0.99f, 0.99f);
  return t;
}

}  // namespace

TEST_CASE("lsgan anchors") {
  auto real = Var<float>::constant(Tensor<float>({1, 1, 3, 3}, 1.0f));
  auto fake0 = Var<float>::constant(Tensor<float>({1, 1, 3, 3}, 0.0f));
  auto fake1 = Var<float>::constant(Tensor<float>({1, 1, 3, 3}, 1.0f));
  auto real0 = Var<float>::constant(Tensor<float>({1, 1, 3, 3}, 0.0f));
  CHECK(lsgan_d_loss(real, fake0).item() == 0.0f);   // optimum
  CHECK(lsgan_g_loss(fake1).item() == 0.0f);         // optimum
  CHECK(lsgan_d_loss(real0, fake1).item() == 1.0f);  // worst labels: 1/2 + 1/2
}

TEST_CASE("total objective composition and lambda regimes") {
  auto a = Var<float>::scalar(0.7f);
  auto b = Var<float>::scalar(1.3f);
  auto c = Var<float>::scalar(0.4f);
  CHECK(total_generator_objective(a, b, c, 1.0f, 1.0f).item() ==
        doctest::Approx(0.7 + 1.3 + 0.4).epsilon(1e-6));
  CHECK(total_generator_objective(a, b, c, 10.0f, 0.0f).item() ==
        doctest::Approx(0.7 + 13.0).epsilon(1e-6));
  // lambda_y = 0: result independent of the identity term, which may be absent
  CHECK(total_generator_objective(a, b, Var<float>(), 10.0f, 0.0f).item() ==
        doctest::Approx(0.7 + 13.0).epsilon(1e-6));
  auto c2 = Var<float>::scalar(99.0f);
  CHECK(total_generator_objective(a, b, c2, 10.0f, 0.0f).item() ==
        total_generator_objective(a, b, c, 10.0f, 0.0f).item());
}

TEST_CASE("presets encode the two documented lambda regimes") {
  TrainConfig cfg = tiny_config();
  cfg.apply_preset("lambda_1_1");
  CHECK(cfg.lambda_x == 1.0);
  CHECK(cfg.lambda_y == 1.0);
  cfg.apply_preset("lambda_10_0");
  CHECK(cfg.lambda_x == 10.0);
  CHECK(cfg.lambda_y == 0.0);
  CHECK_THROWS(cfg.apply_preset("lambda_2_2"));
}

TEST_CASE("two runs from identical seeds produce bitwise-identical reports") {
  Trainer a(tiny_config(5));
  Trainer b(tiny_config(5));
  for (int step = 0; step < 10; ++step) {
    auto x = rand_batch(100 + static_cast<uint64_t>(step));
    auto y = rand_batch(200 + static_cast<uint64_t>(step));
    LossReport ra = a.train_step(x, y);
    LossReport rb = b.train_step(x, y);
    CHECK(std::memcmp(&ra, &rb, sizeof(LossReport)) == 0);
  }
}

TEST_CASE("loss report recomposes: total = gan + lx*nce_x + ly*nce_y") {
  TrainConfig cfg = tiny_config(6);
  cfg.lambda_x = 2.5;
  cfg.lambda_y = 0.5;
  Trainer t(cfg);
  for (int step = 0; step < 3; ++step) {
    auto r = t.train_step(rand_batch(300 + static_cast<uint64_t>(step)),
                          rand_batch(400 + static_cast<uint64_t>(step)));
    CHECK(std::fabs(r.total_g - (r.g_gan_loss + cfg.lambda_x * r.nce_x +
                                 cfg.lambda_y * r.nce_y)) < 1e-6);
  }
}

TEST_CASE("optimizer groups never cross-contaminate (parameter hashes)") {
  Trainer t(tiny_config(7));
  for (int step = 0; step < 3; ++step) {
    StepProbe probe;
    t.train_step(rand_batch(500 + static_cast<uint64_t>(step)),
                 rand_batch(600 + static_cast<uint64_t>(step)), &probe);
    CHECK(probe.g_group_before_d == probe.g_group_after_d);
    CHECK(probe.d_group_before_g == probe.d_group_after_g);
  }
}

TEST_CASE("lambda_y = 0 never invokes the identity loss (call-count probe)") {
  TrainConfig cfg = tiny_config(8);
  cfg.apply_preset("lambda_10_0");
  Trainer t(cfg);
  StepProbe probe;
  auto r = t.train_step(rand_batch(700), rand_batch(701), &probe);
  CHECK(probe.identity_nce_calls == 0);
  CHECK(r.nce_y == 0.0);

  TrainConfig cfg2 = tiny_config(8);
  cfg2.apply_preset("lambda_1_1");
  Trainer t2(cfg2);
  StepProbe probe2;
  t2.train_step(rand_batch(700), rand_batch(701), &probe2);
  CHECK(probe2.identity_nce_calls == 1);
}

TEST_CASE("single-direction training: state holds one generator, one discriminator") {
  Trainer t(tiny_config(9));
  t.train_step(rand_batch(800), rand_batch(801));
  Checkpoint ck = t.make_checkpoint();
  for (const auto& [name, tensor] : ck.tensors()) {
    bool known = name.rfind("gen.", 0) == 0 || name.rfind("disc.", 0) == 0 ||
                 name.rfind("heads.", 0) == 0 || name.rfind("attn.", 0) == 0 ||
                 name.rfind("opt_g.", 0) == 0 || name.rfind("opt_d.", 0) == 0;
    CHECK(known);
    // no inverse mapping anywhere: every optimizer tensor refers to the groups
    CHECK(name.find("inverse") == std::string::npos);
  }
}

TEST_CASE("non-finite inputs abort with the offending term named") {
  Trainer t(tiny_config(10));
  auto x = rand_batch(900);
  x[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.train_step(x, rand_batch(901));
    FAIL("expected abort");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip restores inference and training exactly") {
  Trainer a(tiny_config(11));
  for (int s = 0; s < 3; ++s)
    a.train_step(rand_batch(1000 + static_cast<uint64_t>(s)),
                 rand_batch(1100 + static_cast<uint64_t>(s)));
  Checkpoint ck = a.make_checkpoint();

  Trainer b(tiny_config(11));
  b.load_checkpoint(ck);
  CHECK(b.global_step() == 3);

  // bit-identical inference after reload
  auto probe_img = rand_batch(1200);
  auto ya = a.generator().translate(Var<float>::constant(probe_img));
  auto yb = b.generator().translate(Var<float>::constant(probe_img));
  for (int64_t i = 0; i < ya.value().numel(); ++i) CHECK(ya.value()[i] == yb.value()[i]);

  // resumed training matches the uninterrupted run
  for (int s = 3; s < 5; ++s) {
    auto x = rand_batch(1000 + static_cast<uint64_t>(s));
    auto y = rand_batch(1100 + static_cast<uint64_t>(s));
    LossReport ra = a.train_step(x, y);
    LossReport rb = b.train_step(x, y);
    CHECK(ra.total_g == doctest::Approx(rb.total_g).epsilon(1e-9));
    CHECK(ra.d_loss == doctest::Approx(rb.d_loss).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint file i/o: save, reload, version diagnostics") {
  fs::path dir = fs::temp_directory_path() / "cutgan_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Trainer t(tiny_config(12));
  t.train_step(rand_batch(1300), rand_batch(1301));
  std::string path = (dir / "state.bin").string();
  t.make_checkpoint().save(path);
  Checkpoint back = Checkpoint::load(path);
  CHECK(back.meta.at("step").get<int64_t>() == 1);
  Trainer t2(tiny_config(12));
  t2.load_checkpoint(back);
  CHECK(t2.global_step() == 1);

  // not-a-checkpoint diagnostic
  std::string junk = (dir / "junk.bin").string();
  {
    std::ofstream f(junk, std::ios::binary);
    f << "garbage";
  }
  try {
    Checkpoint::load(junk);
    FAIL("expected magic error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("epochs=1 on a 4-image dataset runs exactly 4 steps at batch 1") {
  fs::path dir = fs::temp_directory_path() / "cutgan_train_loop";
  fs::remove_all(dir);
  fs::create_directories(dir / "x");
  fs::create_directories(dir / "y");
  Rng rng = Rng::keyed(77, "loop.img");
  for (int i = 0; i < 4; ++i) {
    ImageU8 img;
    img.h = 16;
    img.w = 16;
    img.rgb.resize(16 * 16 * 3);
    for (auto& v : img.rgb) v = static_cast<uint8_t>(rng.below(256));
    write_png((dir / "x" / ("x" + std::to_string(i) + ".png")).string(), img);
    for (auto& v : img.rgb) v = static_cast<uint8_t>(rng.below(256));
    write_png((dir / "y" / ("y" + std::to_string(i) + ".png")).string(), img);
  }
  auto ds = UnpairedDataset::load((dir / "x").string(), (dir / "y").string(), 16, 3);
  TrainConfig cfg = tiny_config(13);
  cfg.epochs = 1;
  Trainer t(cfg);
  int reports = 0;
  t.train(ds, (dir / "ckpt").string(), [&](const LossReport& r) {
    CHECK(r.step == reports);
    reports++;
  });
  CHECK(reports == 4);
  CHECK(fs::exists(dir / "ckpt" / "ckpt_step000000.bin"));
  CHECK(fs::exists(dir / "ckpt" / "ckpt_final.bin"));
  fs::remove_all(dir);
}
