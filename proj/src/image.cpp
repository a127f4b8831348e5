#include "cutgan/data/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

namespace cutgan {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext;
}

ImageU8 read_png_file(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("failed to read PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ImageU8 out;
  out.h = image.height;
  out.w = image.width;
  out.rgb.resize(static_cast<size_t>(out.h) * out.w * 3);
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("failed to decode PNG '" + path + "': " + image.message);
  }
  return out;
}

struct JpegErr {
  jpeg_error_mgr mgr;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  longjmp(err->jump, 1);
}

ImageU8 read_jpeg_file(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open '" + path + "'");
  jpeg_decompress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw std::runtime_error("failed to decode JPEG '" + path + "'");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  ImageU8 out;
  out.h = cinfo.output_height;
  out.w = cinfo.output_width;
  out.rgb.resize(static_cast<size_t>(out.h) * out.w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = out.rgb.data() + static_cast<size_t>(cinfo.output_scanline) * out.w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return out;
}

}  // namespace

bool has_image_extension(const std::string& path) {
  std::string ext = lower_ext(path);
  return ext == "png" || ext == "jpg" || ext == "jpeg";
}

ImageU8 read_image(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "png") return read_png_file(path);
  if (ext == "jpg" || ext == "jpeg") return read_jpeg_file(path);
  throw std::runtime_error("unsupported image format for '" + path + "' (PNG and JPEG only)");
}

void write_png(const std::string& path, const ImageU8& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0, nullptr)) {
    throw std::runtime_error("failed to write PNG '" + path + "': " + image.message);
  }
}

ImageU8 resize_bilinear(const ImageU8& img, int64_t out_h, int64_t out_w) {
  check(out_h >= 1 && out_w >= 1, "resize: target must be positive");
  if (out_h == img.h && out_w == img.w) return img;
  ImageU8 out;
  out.h = out_h;
  out.w = out_w;
  out.rgb.resize(static_cast<size_t>(out_h) * out_w * 3);
  double sy = static_cast<double>(img.h) / out_h;
  double sx = static_cast<double>(img.w) / out_w;
  for (int64_t y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int64_t y0 = static_cast<int64_t>(std::floor(fy));
    double wy = fy - y0;
    int64_t y1 = std::min(y0 + 1, img.h - 1);
    y0 = std::clamp<int64_t>(y0, 0, img.h - 1);
    for (int64_t x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(fx));
      double wx = fx - x0;
      int64_t x1 = std::min(x0 + 1, img.w - 1);
      x0 = std::clamp<int64_t>(x0, 0, img.w - 1);
      for (int64_t c = 0; c < 3; ++c) {
        double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
                   wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
        out.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

ImageU8 resize_and_crop(const ImageU8& img, int64_t size, double crop_jitter_y,
                        double crop_jitter_x) {
  check(size >= 1, "resize_and_crop: size must be positive");
  check(img.h >= 1 && img.w >= 1, "resize_and_crop: empty image");
  int64_t rh, rw;
  if (img.h <= img.w) {
    rh = size;
    rw = std::max<int64_t>(size, (img.w * size + img.h / 2) / img.h);
  } else {
    rw = size;
    rh = std::max<int64_t>(size, (img.h * size + img.w / 2) / img.w);
  }
  ImageU8 resized = resize_bilinear(img, rh, rw);
  int64_t oy = static_cast<int64_t>(std::floor((rh - size) * crop_jitter_y));
  int64_t ox = static_cast<int64_t>(std::floor((rw - size) * crop_jitter_x));
  oy = std::clamp<int64_t>(oy, 0, rh - size);
  ox = std::clamp<int64_t>(ox, 0, rw - size);
  ImageU8 out;
  out.h = size;
  out.w = size;
  out.rgb.resize(static_cast<size_t>(size) * size * 3);
  for (int64_t y = 0; y < size; ++y)
    std::memcpy(out.rgb.data() + y * size * 3, resized.rgb.data() + ((y + oy) * rw + ox) * 3,
                static_cast<size_t>(size) * 3);
  return out;
}

std::vector<float> normalize_pixels(const std::vector<int>& pixels) {
  std::vector<float> out(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    check(pixels[i] >= 0 && pixels[i] <= 255,
          "normalize: pixel value " + std::to_string(pixels[i]) + " outside [0,255]");
    out[i] = static_cast<float>(pixels[i]) / 127.5f - 1.0f;
  }
  return out;
}

std::vector<int> denormalize_pixels(const std::vector<float>& values) {
  std::vector<int> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    float v = (values[i] + 1.0f) * 127.5f;
    out[i] = static_cast<int>(std::lround(std::clamp(v, 0.0f, 255.0f)));
  }
  return out;
}

Tensor<float> image_to_chw(const ImageU8& img) {
  Tensor<float> t(Shape{3, img.h, img.w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < img.h; ++y)
      for (int64_t x = 0; x < img.w; ++x)
        t[(c * img.h + y) * img.w + x] = static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

ImageU8 chw_to_image(const Tensor<float>& chw) {
  check(chw.ndim() == 3 && chw.dim(0) == 3, "chw_to_image: expects [3,H,W]");
  ImageU8 img;
  img.h = chw.dim(1);
  img.w = chw.dim(2);
  img.rgb.resize(static_cast<size_t>(img.h) * img.w * 3);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < img.h; ++y)
      for (int64_t x = 0; x < img.w; ++x) {
        float v = (chw[(c * img.h + y) * img.w + x] + 1.0f) * 127.5f;
        img.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f)));
      }
  return img;
}

}  // namespace cutgan
