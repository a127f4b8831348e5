#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cutgan/core/tensor.hpp"

namespace cutgan {

// Interleaved 8-bit RGB image.
struct ImageU8 {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> rgb;  // h*w*3

  uint8_t& at(int64_t y, int64_t x, int64_t c) { return rgb[(y * w + x) * 3 + c]; }
  uint8_t at(int64_t y, int64_t x, int64_t c) const { return rgb[(y * w + x) * 3 + c]; }
};

// PNG or JPEG by extension; grayscale and alpha inputs are converted to RGB.
// Errors name the offending file.
ImageU8 read_image(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

bool has_image_extension(const std::string& path);

ImageU8 resize_bilinear(const ImageU8& img, int64_t out_h, int64_t out_w);

// Resize the shorter edge to `size`, then crop a size x size window. The crop
// offset along the longer axis is centered unless crop_jitter in [0,1) shifts
// it (train-time random crop).
ImageU8 resize_and_crop(const ImageU8& img, int64_t size, double crop_jitter_y = 0.5,
                        double crop_jitter_x = 0.5);

// v -> v/127.5 - 1. Out-of-range input is an error.
std::vector<float> normalize_pixels(const std::vector<int>& pixels);
std::vector<int> denormalize_pixels(const std::vector<float>& values);

// [3,H,W] float in [-1,1] from interleaved RGB, and back (clamp + round).
Tensor<float> image_to_chw(const ImageU8& img);
ImageU8 chw_to_image(const Tensor<float>& chw);

}  // namespace cutgan
