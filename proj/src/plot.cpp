#include "cutgan/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "cutgan/data/image.hpp"

namespace cutgan {

namespace {

constexpr int64_t kW = 640, kH = 420;
constexpr int64_t kMarginL = 56, kMarginR = 16, kMarginT = 16, kMarginB = 32;

// 3x5 digit/symbol font for tick labels
const char* glyph(char c) {
  switch (c) {
    case '0': return "111101101101111";
    case '1': return "010110010010111";
    case '2': return "111001111100111";
    case '3': return "111001111001111";
    case '4': return "101101111001001";
    case '5': return "111100111001111";
    case '6': return "111100111101111";
    case '7': return "111001010010010";
    case '8': return "111101111101111";
    case '9': return "111101111001111";
    case '-': return "000000111000000";
    case '.': return "000000000000010";
    case '+': return "000010111010000";
    case 'e': return "011101110100011";
    default: return nullptr;
  }
}

struct Canvas {
  ImageU8 img;
  Canvas() {
    img.h = kH;
    img.w = kW;
    img.rgb.assign(static_cast<size_t>(kH) * kW * 3, 255);
  }
  void px(int64_t y, int64_t x, uint8_t r, uint8_t g, uint8_t b) {
    if (y < 0 || y >= kH || x < 0 || x >= kW) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  }
  void line(double y0, double x0, double y1, double x1, uint8_t r, uint8_t g, uint8_t b) {
    double dy = y1 - y0, dx = x1 - x0;
    int64_t steps = static_cast<int64_t>(std::max(std::fabs(dy), std::fabs(dx))) + 1;
    for (int64_t i = 0; i <= steps; ++i) {
      double t = static_cast<double>(i) / steps;
      px(static_cast<int64_t>(std::lround(y0 + t * dy)),
         static_cast<int64_t>(std::lround(x0 + t * dx)), r, g, b);
    }
  }
  void text(int64_t y, int64_t x, const std::string& s) {
    for (char c : s) {
      const char* g = glyph(c);
      if (g) {
        for (int row = 0; row < 5; ++row)
          for (int col = 0; col < 3; ++col)
            if (g[row * 3 + col] == '1') px(y + row, x + col, 40, 40, 40);
      }
      x += 4;
    }
  }
};

std::string fmt_tick(double v) {
  char buf[32];
  double av = std::fabs(v);
  if (v == 0) return "0";
  if (av >= 0.01 && av < 10000) {
    std::snprintf(buf, sizeof(buf), "%.4g", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  }
  return buf;
}

}  // namespace

void render_line_chart(const std::vector<double>& steps, const std::vector<double>& values,
                       const std::string& out_path) {
  check(!steps.empty() && steps.size() == values.size(), "plot: empty or mismatched series");
  Canvas cv;
  double xmin = steps.front(), xmax = steps.back();
  if (xmax == xmin) xmax = xmin + 1;
  double ymin = *std::min_element(values.begin(), values.end());
  double ymax = *std::max_element(values.begin(), values.end());
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto sx = [&](double x) {
    return kMarginL + (x - xmin) / (xmax - xmin) * (kW - kMarginL - kMarginR);
  };
  auto sy = [&](double y) {
    return kH - kMarginB - (y - ymin) / (ymax - ymin) * (kH - kMarginT - kMarginB);
  };

  // gridlines + ticks
  for (int i = 0; i <= 4; ++i) {
    double gy = ymin + (ymax - ymin) * i / 4;
    cv.line(sy(gy), kMarginL, sy(gy), kW - kMarginR, 225, 225, 225);
    cv.text(static_cast<int64_t>(sy(gy)) - 2, 4, fmt_tick(gy));
    double gx = xmin + (xmax - xmin) * i / 4;
    cv.line(kMarginT, sx(gx), kH - kMarginB, sx(gx), 235, 235, 235);
    cv.text(kH - kMarginB + 6, static_cast<int64_t>(sx(gx)) - 6, fmt_tick(gx));
  }
  // axes
  cv.line(kMarginT, kMarginL, kH - kMarginB, kMarginL, 60, 60, 60);
  cv.line(kH - kMarginB, kMarginL, kH - kMarginB, kW - kMarginR, 60, 60, 60);
  // series
  for (size_t i = 1; i < steps.size(); ++i) {
    cv.line(sy(values[i - 1]), sx(steps[i - 1]), sy(values[i]), sx(steps[i]), 30, 90, 200);
  }
  write_png(out_path, cv.img);
}

}  // namespace cutgan
