#include "cutgan/toy/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cutgan/core/rng.hpp"
#include "cutgan/data/image.hpp"

namespace fs = std::filesystem;

namespace cutgan {

namespace {

struct Rgb {
  double r, g, b;
};

// warm palette for domain X, cool palette for domain Y; same index = analogous
// role, so the translation to learn is a consistent color mapping
const Rgb kWarm[3] = {{220, 60, 40}, {235, 150, 40}, {225, 210, 70}};
const Rgb kCool[3] = {{40, 90, 220}, {40, 190, 230}, {80, 220, 180}};

void fill_background(ImageU8& img, double base, Rng& rng) {
  double tone = base + (rng.uniform() - 0.5) * 20.0;
  // gentle vertical gradient
  double slope = (rng.uniform() - 0.5) * 24.0;
  for (int64_t y = 0; y < img.h; ++y) {
    double v = tone + slope * (static_cast<double>(y) / img.h - 0.5);
    auto b = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c) img.at(y, x, c) = b;
  }
}

void draw_shape(ImageU8& img, Rng& rng, bool cool) {
  int kind = static_cast<int>(rng.below(3));
  int palette = static_cast<int>(rng.below(3));
  Rgb col = cool ? kCool[palette] : kWarm[palette];
  double cx = rng.uniform() * img.w;
  double cy = rng.uniform() * img.h;
  double size = (0.12 + 0.18 * rng.uniform()) * img.w;
  auto put = [&](int64_t y, int64_t x) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    img.at(y, x, 0) = static_cast<uint8_t>(col.r);
    img.at(y, x, 1) = static_cast<uint8_t>(col.g);
    img.at(y, x, 2) = static_cast<uint8_t>(col.b);
  };
  if (kind == 0) {  // disc
    for (int64_t y = static_cast<int64_t>(cy - size); y <= cy + size; ++y)
      for (int64_t x = static_cast<int64_t>(cx - size); x <= cx + size; ++x)
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= size * size) put(y, x);
  } else if (kind == 1) {  // axis-aligned rectangle
    double h = size * (0.6 + 0.8 * rng.uniform());
    for (int64_t y = static_cast<int64_t>(cy - h); y <= cy + h; ++y)
      for (int64_t x = static_cast<int64_t>(cx - size); x <= cx + size; ++x) put(y, x);
  } else {  // upward triangle
    for (int64_t y = 0; y <= static_cast<int64_t>(2 * size); ++y) {
      double half = size * (static_cast<double>(y) / (2 * size));
      for (int64_t x = static_cast<int64_t>(cx - half); x <= cx + half; ++x)
        put(static_cast<int64_t>(cy - size) + y, x);
    }
  }
}

ImageU8 render_scene(int64_t image_size, uint64_t scene_seed, bool cool) {
  // one stream drives geometry (shared structure distribution), a second adds
  // domain-specific appearance noise
  Rng geo(scene_seed);
  Rng app = Rng::keyed(scene_seed, cool ? "toy.app.y" : "toy.app.x");
  ImageU8 img;
  img.h = image_size;
  img.w = image_size;
  img.rgb.resize(static_cast<size_t>(image_size) * image_size * 3);
  fill_background(img, cool ? 225.0 : 30.0, app);
  int shapes = 2 + static_cast<int>(geo.below(3));
  for (int s = 0; s < shapes; ++s) draw_shape(img, geo, cool);
  return img;
}

void write_split(const std::string& dir, int64_t n, int64_t image_size, uint64_t base_seed,
                 bool cool) {
  fs::create_directories(dir);
  for (int64_t i = 0; i < n; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%03lld.png", static_cast<long long>(i));
    ImageU8 img = render_scene(image_size, base_seed + static_cast<uint64_t>(i), cool);
    write_png((fs::path(dir) / name).string(), img);
  }
}

}  // namespace

void generate_toy_dataset(const std::string& root, int64_t image_size, int64_t n_train,
                          int64_t n_test, uint64_t seed) {
  check(image_size >= 12, "toy dataset: image_size must be >= 12");
  check(n_train >= 1 && n_test >= 1, "toy dataset: need at least one image per split");
  fs::path r(root);
  if (fs::exists(r / "trainX") && !fs::is_empty(r / "trainX")) return;  // already generated
  // unpaired: X and Y draw different scenes from the same distribution
  uint64_t sx = Rng::keyed(seed, "toy.base.x").u64();
  uint64_t sy = Rng::keyed(seed, "toy.base.y").u64();
  write_split((r / "trainX").string(), n_train, image_size, sx, false);
  write_split((r / "trainY").string(), n_train, image_size, sy, true);
  write_split((r / "testX").string(), n_test, image_size, sx + 100000, false);
  write_split((r / "testY").string(), n_test, image_size, sy + 100000, true);
}

}  // namespace cutgan
