#include "cutgan/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cutgan/cli/plot.hpp"
#include "cutgan/core/ops.hpp"
#include "cutgan/data/dataset.hpp"
#include "cutgan/data/image.hpp"
#include "cutgan/metrics/embedder.hpp"
#include "cutgan/toy/toy_data.hpp"
#include "cutgan/version.hpp"

namespace fs = std::filesystem;

namespace cutgan {

namespace {

const std::map<std::string, std::string>& config_key_types() {
  static const std::map<std::string, std::string> keys = {
      {"lambda_x", "float"},          {"lambda_y", "float"},
      {"lr", "float"},                {"beta1", "float"},
      {"beta2", "float"},             {"batch_size", "int"},
      {"epochs", "int"},              {"max_steps", "int"},
      {"seed", "int"},                {"attention", "string"},
      {"tau", "float"},               {"k", "int"},
      {"image_size", "int"},          {"gen_base_channels", "int"},
      {"gen_res_blocks", "int"},      {"disc_base_channels", "int"},
      {"disc_layers", "int"},         {"nce_dim", "int"},
      {"lr_decay", "bool"},           {"random_crop", "bool"},
      {"checkpoint_every", "int"},
  };
  return keys;
}

std::string valid_keys_message() {
  std::string msg = "valid config keys:";
  for (const auto& [k, t] : config_key_types()) msg += " " + k;
  return msg;
}

nlohmann::json typed_value(const std::string& key, const std::string& raw) {
  auto it = config_key_types().find(key);
  if (it == config_key_types().end()) {
    throw std::runtime_error("unknown config key '" + key + "'; " + valid_keys_message());
  }
  try {
    if (it->second == "int") return static_cast<int64_t>(std::stoll(raw));
    if (it->second == "float") return std::stod(raw);
    if (it->second == "bool") {
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw std::runtime_error("not a bool");
    }
    return raw;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "' expects a " + it->second + " value, got '" +
                             raw + "'");
  }
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::string timestamp_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& run_dir, const TrainConfig& cfg, const std::string& started,
                    const std::string& ended) {
  nlohmann::json m;
  m["command"] = "train";
  m["config"] = cfg.to_json();
  m["source_hash"] = kSourceHash;
  m["seed"] = cfg.seed;
  m["started_at"] = started;
  if (!ended.empty()) m["ended_at"] = ended;
  m["layout"] = {{"checkpoints", "checkpoints"},
                 {"losses", "losses.csv"},
                 {"plots", "plots"},
                 {"toy_data", "toy_data"}};
  std::ofstream out(run_dir / "manifest.json", std::ios::trunc);
  check(out.good(), "cannot write manifest under " + run_dir.string());
  out << m.dump(2) << "\n";
}

std::vector<std::string> list_dir_images(const std::string& dir) {
  check(fs::exists(dir), "directory does not exist: " + dir);
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && has_image_extension(e.path().string()))
      paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

// [B,3,S,S] batch of every image in a directory, resized + center-cropped
Tensor<float> load_dir_batch(const std::string& dir, int64_t image_size) {
  auto paths = list_dir_images(dir);
  check(!paths.empty(), "no images found in " + dir);
  Tensor<float> batch(Shape{static_cast<int64_t>(paths.size()), 3, image_size, image_size});
  for (size_t i = 0; i < paths.size(); ++i) {
    Tensor<float> t = image_to_chw(resize_and_crop(read_image(paths[i]), image_size));
    std::copy_n(t.data(), t.numel(), batch.data() + static_cast<int64_t>(i) * t.numel());
  }
  return batch;
}

}  // namespace

nlohmann::json parse_config_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open config file: " + path);
  nlohmann::json patch = nlohmann::json::object();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    check(eq != std::string::npos,
          path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    patch[key] = typed_value(key, value);
  }
  return patch;
}

nlohmann::json parse_config_overrides(const std::map<std::string, std::string>& kv) {
  nlohmann::json patch = nlohmann::json::object();
  for (const auto& [k, v] : kv) patch[k] = typed_value(k, v);
  return patch;
}

std::string cmd_train(const TrainOptions& opt) {
  check(!opt.run_dir.empty(), "train: --run-dir is required");
  fs::path run_dir(opt.run_dir);
  fs::create_directories(run_dir);

  // precedence: defaults (+ toy profile) < config file < CLI overrides < preset
  nlohmann::json cfg_json = TrainConfig{}.to_json();
  if (opt.toy) {
    cfg_json["image_size"] = 64;
    cfg_json["gen_base_channels"] = 24;
    cfg_json["gen_res_blocks"] = 6;
    cfg_json["disc_base_channels"] = 32;
    cfg_json["k"] = 64;
    cfg_json["nce_dim"] = 64;
    cfg_json["epochs"] = 4;
    cfg_json["checkpoint_every"] = 100;
  }
  if (!opt.config_path.empty()) cfg_json.update(parse_config_file(opt.config_path));
  cfg_json.update(parse_config_overrides(opt.overrides));
  TrainConfig cfg = TrainConfig::from_json(cfg_json);
  if (!opt.preset.empty()) cfg.apply_preset(opt.preset);
  cfg.validate();

  std::string data_root = opt.data_root;
  if (opt.toy) {
    data_root = (run_dir / "toy_data").string();
    generate_toy_dataset(data_root, cfg.image_size, opt.toy_train_images, opt.toy_test_images,
                         cfg.seed);
  }
  check(!data_root.empty(), "train: provide --data-root or --toy");
  auto dataset = UnpairedDataset::load((fs::path(data_root) / opt.subdir_x).string(),
                                       (fs::path(data_root) / opt.subdir_y).string(),
                                       cfg.image_size, cfg.seed);
  dataset.set_random_crop(cfg.random_crop);

  std::string started = timestamp_now();
  write_manifest(run_dir, cfg, started, "");

  Trainer trainer(cfg);
  if (!opt.resume.empty()) trainer.load_checkpoint(Checkpoint::load(opt.resume));

  fs::path csv_path = run_dir / "losses.csv";
  bool fresh_csv = !fs::exists(csv_path) || trainer.global_step() == 0;
  std::ofstream csv(csv_path, fresh_csv ? std::ios::trunc : std::ios::app);
  check(csv.good(), "cannot open loss log: " + csv_path.string());
  if (fresh_csv) csv << "step,d_loss,g_gan,nce_x,nce_y,total_g\n";

  trainer.train(dataset, (run_dir / "checkpoints").string(), [&](const LossReport& r) {
    char line[256];
    std::snprintf(line, sizeof(line), "%lld,%.10g,%.10g,%.10g,%.10g,%.10g",
                  static_cast<long long>(r.step), r.d_loss, r.g_gan_loss, r.nce_x, r.nce_y,
                  r.total_g);
    csv << line << "\n";
    csv.flush();
    if (!opt.quiet && (r.step % 10 == 0)) {
      std::printf("step %lld  d %.4f  gan %.4f  nce_x %.4f  nce_y %.4f  total %.4f\n",
                  static_cast<long long>(r.step), r.d_loss, r.g_gan_loss, r.nce_x, r.nce_y,
                  r.total_g);
      std::fflush(stdout);
    }
  });

  write_manifest(run_dir, cfg, started, timestamp_now());
  return run_dir.string();
}

void cmd_translate(const std::string& checkpoint_path, const std::string& input_dir,
                   const std::string& output_dir) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  check(ck.meta.value("kind", "") == "cutgan-train-state",
        "translate: " + checkpoint_path + " is not a training checkpoint");
  TrainConfig cfg = TrainConfig::from_json(ck.meta.at("config"));
  GeneratorConfig gcfg;
  gcfg.base_channels = cfg.gen_base_channels;
  gcfg.n_residual_blocks = cfg.gen_res_blocks;
  ResnetGenerator<float> gen(gcfg, cfg.seed);
  nn::ParamMap<float> pm;
  gen.params(pm);
  for (auto& [name, v] : pm) {
    const Tensor<float>& t = ck.get(name);
    check(t.shape() == v.value().shape(), "translate: checkpoint tensor " + name +
                                              " has shape " + shape_str(t.shape()) +
                                              ", generator expects " +
                                              shape_str(v.value().shape()));
    std::copy_n(t.data(), t.numel(), v.value().data());
  }

  auto paths = list_dir_images(input_dir);
  check(!paths.empty(), "translate: no images found in " + input_dir);
  fs::create_directories(output_dir);
  for (const auto& p : paths) {
    ImageU8 img = read_image(p);
    Tensor<float> chw = image_to_chw(img);
    int64_t h = img.h, w = img.w;
    // pad to the generator's grid (multiple of 4, minimum 12), crop back after
    int64_t ph = std::max<int64_t>(12, (h + 3) / 4 * 4);
    int64_t pw = std::max<int64_t>(12, (w + 3) / 4 * 4);
    auto x = Var<float>::constant(chw.reshaped({1, 3, h, w}));
    if (ph != h || pw != w) {
      x = ops::reflect_pad2d(x, 0, static_cast<int>(ph - h), 0, static_cast<int>(pw - w));
    }
    auto y = gen.translate(x);
    Tensor<float> out(Shape{3, h, w});
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < h; ++i)
        std::copy_n(y.value().data() + (c * ph + i) * pw, w, out.data() + (c * h + i) * w);
    fs::path out_path = fs::path(output_dir) / (fs::path(p).stem().string() + ".png");
    write_png(out_path.string(), chw_to_image(out));
  }
}

metrics::MetricReport cmd_evaluate(const EvaluateOptions& opt) {
  auto embedder = metrics::make_embedder(opt.embedder);
  Tensor<float> real = load_dir_batch(opt.real_dir, opt.image_size);
  Tensor<float> fake = load_dir_batch(opt.fake_dir, opt.image_size);
  check(real.dim(0) >= 2 && fake.dim(0) >= 2,
        "evaluate: need at least 2 images per directory (covariance undefined)");

  metrics::EmbeddedSet es_real{embedder->embed(real), embedder->id()};
  metrics::EmbeddedSet es_fake{embedder->embed(fake), embedder->id()};
  metrics::MetricReport rep;
  rep.fid = metrics::fid(es_real, es_fake);
  rep.swd = metrics::swd(es_real, es_fake, opt.n_projections, opt.seed, opt.swd_order);
  auto [is_mean, is_std] = metrics::inception_score(embedder->class_probs(fake), opt.is_splits);
  rep.is_mean = is_mean;
  rep.is_std = is_std;
  rep.count_real = real.dim(0);
  rep.count_fake = fake.dim(0);
  rep.embedder = embedder->id();
  rep.seed = opt.seed;

  std::string json = metric_report_json(rep);
  std::printf("%s\n", json.c_str());
  if (!opt.out_path.empty()) {
    std::ofstream out(opt.out_path, std::ios::trunc);
    check(out.good(), "evaluate: cannot write " + opt.out_path);
    out << json << "\n";
  }
  if (!opt.csv_path.empty()) {
    bool fresh = !fs::exists(opt.csv_path);
    std::ofstream out(opt.csv_path, std::ios::app);
    check(out.good(), "evaluate: cannot append " + opt.csv_path);
    if (fresh) out << "fid,is_mean,is_std,swd,count_real,count_fake,embedder,seed\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%.10g,%lld,%lld,%s,%llu", rep.fid,
                  rep.is_mean, rep.is_std, rep.swd, static_cast<long long>(rep.count_real),
                  static_cast<long long>(rep.count_fake), rep.embedder.c_str(),
                  static_cast<unsigned long long>(rep.seed));
    out << line << "\n";
  }
  return rep;
}

std::string metric_report_json(const metrics::MetricReport& rep) {
  nlohmann::json j;
  j["fid"] = rep.fid;
  j["is_mean"] = rep.is_mean;
  j["is_std"] = rep.is_std;
  j["swd"] = rep.swd;
  j["counts"] = {{"real", rep.count_real}, {"fake", rep.count_fake}};
  j["embedder"] = rep.embedder;
  j["seed"] = rep.seed;
  return j.dump();
}

void cmd_plot(const std::string& run_dir) {
  fs::path csv_path = fs::path(run_dir) / "losses.csv";
  check(fs::exists(csv_path), "plot: loss log not found: " + csv_path.string());
  std::ifstream in(csv_path);
  std::string header;
  std::getline(in, header);
  std::vector<std::string> columns;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) columns.push_back(col);
  }
  check(columns.size() >= 2 && columns[0] == "step",
        "plot: unexpected loss log header: " + header);
  std::vector<std::vector<double>> data(columns.size());
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    size_t c = 0;
    while (std::getline(ss, cell, ',') && c < columns.size()) {
      data[c].push_back(std::stod(cell));
      c++;
    }
  }
  check(!data[0].empty(), "plot: loss log has no rows: " + csv_path.string());
  fs::path plots = fs::path(run_dir) / "plots";
  fs::create_directories(plots);
  for (size_t c = 1; c < columns.size(); ++c) {
    render_line_chart(data[0], data[c], (plots / (columns[c] + ".png")).string());
  }
}

}  // namespace cutgan
