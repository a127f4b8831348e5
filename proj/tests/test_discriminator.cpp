#include <doctest.h>
#include <map>

#include "cutgan/models/discriminator.hpp"
#include "rf_oracle.hpp"

using namespace cutgan;

namespace {

Var<float> rand_image(int64_t b, int64_t h, int64_t w, uint64_t seed) {
  Rng rng = Rng::keyed(seed, "test.image");
  Tensor<float> t = Tensor<float>::randn({b, 3, h, w}, rng, 0.5f);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], -1.0f, 1.0f);
  return Var<float>::constant(t);
}

// Independent stride/kernel arithmetic for the 3-layer PatchGAN.
int64_t expected_map_size(int64_t s, int n_layers) {
  for (int i = 0; i < n_layers; ++i) s = (s + 2 - 4) / 2 + 1;
  s = s - 1;  // 4x4 stride-1 pad-1
  s = s - 1;  // final 4x4 stride-1 pad-1
  return s;
}

}  // namespace

TEST_CASE("score map sizes follow the stride arithmetic") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator<float> disc(cfg, 1);
  CHECK(expected_map_size(256, 3) == 30);
  CHECK(disc.score_map_size(256) == 30);
  auto y64 = disc.forward(rand_image(1, 64, 64, 2));
  CHECK(y64.value().shape() == Shape{1, 1, 6, 6});
  CHECK(disc.score_map_size(64) == expected_map_size(64, 3));
  auto y32 = disc.forward(rand_image(1, 32, 32, 3));
  CHECK(y32.value().shape() == Shape{1, 1, expected_map_size(32, 3), expected_map_size(32, 3)});
}

TEST_CASE("256 input produces a 30x30 map") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 4;
  PatchDiscriminator<float> disc(cfg, 4);
  auto y = disc.forward(rand_image(1, 256, 256, 5));
  CHECK(y.value().shape() == Shape{1, 1, 30, 30});
}

TEST_CASE("batch items produce independent maps") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator<float> disc(cfg, 6);
  auto a = rand_image(1, 32, 32, 7);
  auto b = rand_image(1, 32, 32, 8);
  Tensor<float> both({2, 3, 32, 32});
  std::copy_n(a.value().data(), a.value().numel(), both.data());
  std::copy_n(b.value().data(), b.value().numel(), both.data() + a.value().numel());
  auto y_pair = disc.forward(Var<float>::constant(both));
  auto ya = disc.forward(a);
  auto yb = disc.forward(b);
  for (int64_t i = 0; i < ya.value().numel(); ++i) {
    CHECK(y_pair.value()[i] == ya.value()[i]);
    CHECK(y_pair.value()[ya.value().numel() + i] == yb.value()[i]);
  }
}

TEST_CASE("constant-zero-weight discriminator yields an all-zero map") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 4;
  PatchDiscriminator<float> disc(cfg, 9);
  nn::ParamMap<float> pm;
  disc.params(pm);
  for (auto& [name, v] : pm) v.value().fill(0.f);
  auto y = disc.forward(rand_image(1, 32, 32, 10));
  for (int64_t i = 0; i < y.value().numel(); ++i) CHECK(y.value()[i] == 0.f);
}

TEST_CASE("locality: scores ignore perturbations outside their receptive field") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator<float> disc(cfg, 11);
  auto x = rand_image(1, 64, 64, 12);
  auto x2 = Var<float>::constant(x.value().clone());
  // corner pixel perturbation
  for (int64_t c = 0; c < 3; ++c) x2.value()[c * 64 * 64] += 0.5f;
  auto y1 = disc.forward(x);
  auto y2 = disc.forward(x2);
  // back-project: layers are 4/2/1 x3, then 4/1/1 x2 (no norm before the
  // first conv; later instance norms leak only tiny global terms)
  std::vector<rftest::LayerDesc> plan = {
      {4, 2, 1, 1}, {4, 2, 1, 1}, {4, 2, 1, 1}, {4, 1, 1, 1}, {4, 1, 1, 1}};
  auto rows = rftest::propagate(plan, 0, 0, 64);
  auto cols = rftest::propagate(plan, 0, 0, 64);
  int64_t n = y1.value().dim(2);
  // instance norms couple all positions through their statistics, so on the
  // full model we check energy concentration: the peak lands inside the
  // back-projected field and dominates the leakage outside
  float peak = 0.f;
  int64_t peak_i = -1, peak_j = -1;
  double sum_in = 0, sum_out = 0;
  int64_t cnt_in = 0, cnt_out = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      float d = std::fabs(y2.value()[i * n + j] - y1.value()[i * n + j]);
      bool inside = i >= rows.lo && i <= rows.hi && j >= cols.lo && j <= cols.hi;
      if (d > peak) {
        peak = d;
        peak_i = i;
        peak_j = j;
      }
      if (inside) {
        sum_in += d;
        cnt_in++;
      } else {
        sum_out += d;
        cnt_out++;
      }
    }
  REQUIRE(peak > 0.f);
  CHECK(peak_i >= rows.lo);
  CHECK(peak_i <= rows.hi);
  CHECK(peak_j >= cols.lo);
  CHECK(peak_j <= cols.hi);
  CHECK(sum_in / static_cast<double>(cnt_in) > 3.0 * sum_out / static_cast<double>(cnt_out));
}

TEST_CASE("conv-only probe: far scores bitwise equal under a corner perturbation") {
  // same weights, normalization omitted: no statistics coupling, so scores
  // outside the back-projected field must be bitwise identical
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  PatchDiscriminator<float> disc(cfg, 13);
  nn::ParamMap<float> pm;
  disc.params(pm);
  std::map<std::string, Var<float>> p(pm.begin(), pm.end());
  auto probe = [&](const Var<float>& in) {
    auto h = ops::leaky_relu(
        ops::conv2d(in, p.at("disc.conv0.w").detach(), p.at("disc.conv0.b").detach(), 2, 1),
        0.2f);
    for (int i = 1; i <= 3; ++i) {
      std::string nm = "disc.conv" + std::to_string(i);
      int stride = i < 3 ? 2 : 1;
      h = ops::leaky_relu(
          ops::conv2d(h, p.at(nm + ".w").detach(), p.at(nm + ".b").detach(), stride, 1), 0.2f);
    }
    return ops::conv2d(h, p.at("disc.final.w").detach(), p.at("disc.final.b").detach(), 1, 1);
  };
  auto x = rand_image(1, 64, 64, 14);
  auto x2 = Var<float>::constant(x.value().clone());
  for (int64_t c = 0; c < 3; ++c) x2.value()[c * 64 * 64] += 0.7f;  // corner pixel
  auto y1 = probe(x);
  auto y2 = probe(x2);
  std::vector<rftest::LayerDesc> plan = {
      {4, 2, 1, 1}, {4, 2, 1, 1}, {4, 2, 1, 1}, {4, 1, 1, 1}, {4, 1, 1, 1}};
  auto rows = rftest::propagate(plan, 0, 0, 64);
  int64_t n = y1.value().dim(2);
  int64_t changed_outside = 0, changed_inside = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      bool inside = i >= rows.lo && i <= rows.hi && j >= rows.lo && j <= rows.hi;
      bool changed = y1.value()[i * n + j] != y2.value()[i * n + j];
      if (changed && !inside) changed_outside++;
      if (changed && inside) changed_inside++;
    }
  CHECK(changed_outside == 0);
  CHECK(changed_inside > 0);
}

TEST_CASE("parameter count is independent of attention configuration knobs") {
  PatchDiscriminator<float> a(DiscriminatorConfig{}, 1);
  PatchDiscriminator<float> b(DiscriminatorConfig{}, 2);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() > 0);
}
