#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cutgan/cli/commands.hpp"
#include "cutgan/data/image.hpp"
#include "cutgan/toy/toy_data.hpp"

using namespace cutgan;
namespace fs = std::filesystem;

namespace {

struct TempTree {
  fs::path root;
  explicit TempTree(const std::string& tag) {
    root = fs::temp_directory_path() / ("cutgan_cmd_" + tag);
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
};

std::map<std::string, std::string> tiny_overrides() {
  return {{"image_size", "16"}, {"gen_base_channels", "4"}, {"gen_res_blocks", "6"},
          {"disc_base_channels", "4"}, {"disc_layers", "2"}, {"k", "4"},
          {"nce_dim", "16"},   {"max_steps", "2"},          {"epochs", "1"},
          {"seed", "3"}};
}

void write_random_images(const fs::path& dir, int n, int64_t h, int64_t w, uint64_t seed) {
  fs::create_directories(dir);
  Rng rng = Rng::keyed(seed, "cmd.img");
  for (int i = 0; i < n; ++i) {
    ImageU8 img;
    img.h = h;
    img.w = w;
    img.rgb.resize(static_cast<size_t>(h) * w * 3);
    for (auto& v : img.rgb) v = static_cast<uint8_t>(rng.below(256));
    write_png((dir / ("im" + std::to_string(i) + ".png")).string(), img);
  }
}

}  // namespace

TEST_CASE("config file parsing: values, comments, unknown keys") {
  TempTree t("config");
  auto path = (t.root / "train.cfg").string();
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << "lr = 0.01\n";
    f << "attention = triplet  # inline comment\n";
    f << "k=32\n";
    f << "lr_decay = true\n";
  }
  auto patch = parse_config_file(path);
  CHECK(patch.at("lr").get<double>() == 0.01);
  CHECK(patch.at("attention").get<std::string>() == "triplet");
  CHECK(patch.at("k").get<int64_t>() == 32);
  CHECK(patch.at("lr_decay").get<bool>() == true);

  {
    std::ofstream f(path);
    f << "learning_rate = 0.01\n";
  }
  try {
    parse_config_file(path);
    FAIL("expected unknown-key error");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("unknown config key") != std::string::npos);
    CHECK(msg.find("valid config keys") != std::string::npos);
    CHECK(msg.find("lambda_x") != std::string::npos);
  }
  CHECK_THROWS(parse_config_overrides({{"k", "not_a_number"}}));
}

TEST_CASE("cmd_train writes manifest, loss log and checkpoints; errors name paths") {
  TempTree t("train");
  write_random_images(t.root / "data" / "trainX", 3, 16, 16, 1);
  write_random_images(t.root / "data" / "trainY", 3, 16, 16, 2);

  TrainOptions opt;
  opt.run_dir = (t.root / "run").string();
  opt.data_root = (t.root / "data").string();
  opt.overrides = tiny_overrides();
  opt.quiet = true;
  std::string dir = cmd_train(opt);
  CHECK(fs::exists(fs::path(dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(dir) / "losses.csv"));
  CHECK(fs::exists(fs::path(dir) / "checkpoints" / "ckpt_step000000.bin"));
  CHECK(fs::exists(fs::path(dir) / "checkpoints" / "ckpt_final.bin"));

  // manifest carries config snapshot, code hash and seed
  std::ifstream mf(fs::path(dir) / "manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("config").at("k").get<int64_t>() == 4);
  CHECK(manifest.at("source_hash").get<std::string>().size() == 40);
  CHECK(manifest.contains("started_at"));
  CHECK(manifest.contains("ended_at"));

  // loss log: header + 2 steps
  std::ifstream csv(fs::path(dir) / "losses.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "step,d_loss,g_gan,nce_x,nce_y,total_g");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) rows++;
  CHECK(rows == 2);

  // missing dataset path
  TrainOptions bad = opt;
  bad.run_dir = (t.root / "run2").string();
  bad.data_root = (t.root / "missing_data").string();
  try {
    cmd_train(bad);
    FAIL("expected missing-path error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("missing_data") != std::string::npos);
  }
}

TEST_CASE("cmd_translate: names preserved, deterministic, odd sizes handled") {
  TempTree t("translate");
  write_random_images(t.root / "data" / "trainX", 2, 16, 16, 3);
  write_random_images(t.root / "data" / "trainY", 2, 16, 16, 4);
  TrainOptions opt;
  opt.run_dir = (t.root / "run").string();
  opt.data_root = (t.root / "data").string();
  opt.overrides = tiny_overrides();
  opt.overrides["max_steps"] = "1";
  opt.quiet = true;
  cmd_train(opt);
  std::string ckpt = (t.root / "run" / "checkpoints" / "ckpt_final.bin").string();

  write_random_images(t.root / "inputs", 4, 16, 16, 5);
  // one odd-size input exercises the pad-and-crop path
  {
    ImageU8 odd;
    odd.h = 63;
    odd.w = 63;
    odd.rgb.assign(63 * 63 * 3, 128);
    write_png((t.root / "inputs" / "odd.png").string(), odd);
  }
  cmd_translate(ckpt, (t.root / "inputs").string(), (t.root / "out").string());
  int produced = 0;
  for (auto& e : fs::directory_iterator(t.root / "out")) {
    (void)e;
    produced++;
  }
  CHECK(produced == 5);
  CHECK(fs::exists(t.root / "out" / "im0.png"));
  CHECK(fs::exists(t.root / "out" / "odd.png"));
  ImageU8 odd_out = read_image((t.root / "out" / "odd.png").string());
  CHECK(odd_out.h == 63);
  CHECK(odd_out.w == 63);

  // repeated invocation is byte-identical
  cmd_translate(ckpt, (t.root / "inputs").string(), (t.root / "out2").string());
  for (auto& e : fs::directory_iterator(t.root / "out")) {
    std::ifstream f1(e.path(), std::ios::binary);
    std::ifstream f2(t.root / "out2" / e.path().filename(), std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }

  CHECK_THROWS(cmd_translate((t.root / "nope.bin").string(), (t.root / "inputs").string(),
                             (t.root / "out3").string()));
}

TEST_CASE("cmd_evaluate: schema, identity anchors, determinism, count guard") {
  TempTree t("evaluate");
  generate_toy_dataset((t.root / "toy").string(), 32, 6, 4, 9);
  EvaluateOptions opt;
  opt.real_dir = (t.root / "toy" / "testY").string();
  opt.fake_dir = (t.root / "toy" / "testY").string();
  opt.seed = 11;
  opt.image_size = 32;
  opt.out_path = (t.root / "report.json").string();
  auto rep = cmd_evaluate(opt);
  CHECK(rep.fid == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.swd == 0.0);
  CHECK(rep.count_real == 4);

  // exact report key set
  nlohmann::json j = nlohmann::json::parse(metric_report_json(rep));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"counts", "embedder", "fid", "is_mean", "is_std",
                                         "seed", "swd"});
  CHECK(fs::exists(opt.out_path));

  // determinism across calls with the same seed
  opt.fake_dir = (t.root / "toy" / "testX").string();
  auto r1 = cmd_evaluate(opt);
  auto r2 = cmd_evaluate(opt);
  CHECK(r1.fid == r2.fid);
  CHECK(r1.swd == r2.swd);
  CHECK(r1.is_mean == r2.is_mean);

  // fewer than two images: covariance undefined
  fs::create_directories(t.root / "single");
  fs::copy_file(fs::directory_iterator(t.root / "toy" / "testY")->path(),
                t.root / "single" / "one.png");
  EvaluateOptions bad = opt;
  bad.fake_dir = (t.root / "single").string();
  CHECK_THROWS(cmd_evaluate(bad));
}

TEST_CASE("cmd_plot renders one curve per loss column and is idempotent") {
  TempTree t("plot");
  fs::create_directories(t.root / "run");
  {
    std::ofstream csv(t.root / "run" / "losses.csv");
    csv << "step,d_loss,g_gan,nce_x,nce_y,total_g\n";
    for (int s = 0; s < 10; ++s)
      csv << s << "," << 0.5 - 0.01 * s << "," << 1.0 + 0.02 * s << "," << 5.5 - 0.1 * s << ","
          << 5.5 - 0.09 * s << "," << 12.0 - 0.2 * s << "\n";
  }
  cmd_plot((t.root / "run").string());
  for (const char* name : {"d_loss", "g_gan", "nce_x", "nce_y", "total_g"}) {
    CHECK(fs::exists(t.root / "run" / "plots" / (std::string(name) + ".png")));
  }
  cmd_plot((t.root / "run").string());  // overwrite, no error
  CHECK_THROWS(cmd_plot((t.root / "nonexistent").string()));

  // empty CSV (header only) is an error
  fs::create_directories(t.root / "empty");
  {
    std::ofstream csv(t.root / "empty" / "losses.csv");
    csv << "step,d_loss,g_gan,nce_x,nce_y,total_g\n";
  }
  CHECK_THROWS(cmd_plot((t.root / "empty").string()));
}

TEST_CASE("toy dataset: four splits, deterministic, regeneration skipped") {
  TempTree t("toy");
  generate_toy_dataset((t.root / "d1").string(), 32, 5, 3, 42);
  generate_toy_dataset((t.root / "d2").string(), 32, 5, 3, 42);
  for (const char* split : {"trainX", "trainY", "testX", "testY"}) {
    int n = 0;
    for (auto& e : fs::directory_iterator(t.root / "d1" / split)) {
      (void)e;
      n++;
    }
    CHECK(n == (std::string(split).rfind("train", 0) == 0 ? 5 : 3));
    // deterministic across roots with the same seed
    for (auto& e : fs::directory_iterator(t.root / "d1" / split)) {
      std::ifstream f1(e.path(), std::ios::binary);
      std::ifstream f2(t.root / "d2" / split / e.path().filename(), std::ios::binary);
      std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
      std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
      CHECK(b1 == b2);
    }
  }
  // re-invocation with existing data leaves files untouched
  auto before = fs::last_write_time(t.root / "d1" / "trainX" / "000.png");
  generate_toy_dataset((t.root / "d1").string(), 32, 5, 3, 42);
  CHECK(fs::last_write_time(t.root / "d1" / "trainX" / "000.png") == before);
}
