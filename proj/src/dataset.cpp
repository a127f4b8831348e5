#include "cutgan/data/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "cutgan/core/rng.hpp"
#include "cutgan/data/image.hpp"

namespace fs = std::filesystem;

namespace cutgan {

namespace {

std::vector<std::string> list_images(const std::string& root) {
  check(fs::exists(root), "dataset directory does not exist: " + root);
  check(fs::is_directory(root), "dataset path is not a directory: " + root);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string p = entry.path().string();
    if (has_image_extension(p)) paths.push_back(p);
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

}  // namespace

UnpairedDataset UnpairedDataset::load(const std::string& root_x, const std::string& root_y,
                                      int64_t image_size, uint64_t seed) {
  check(image_size >= 8, "image_size must be >= 8, got " + std::to_string(image_size));
  UnpairedDataset ds;
  ds.domain_x_paths_ = list_images(root_x);
  ds.domain_y_paths_ = list_images(root_y);
  check(!ds.domain_x_paths_.empty(), "empty domain: no images found in " + root_x);
  check(!ds.domain_y_paths_.empty(), "empty domain: no images found in " + root_y);
  ds.image_size_ = image_size;
  ds.seed_ = seed;
  return ds;
}

int64_t UnpairedDataset::steps_per_epoch(int64_t batch_size) const {
  check(batch_size >= 1, "batch_size must be >= 1");
  int64_t n = std::max(size_x(), size_y());
  return (n + batch_size - 1) / batch_size;
}

std::vector<std::pair<int64_t, int64_t>> UnpairedDataset::epoch_pairs(int64_t epoch) const {
  std::vector<int64_t> xi(static_cast<size_t>(size_x()));
  std::vector<int64_t> yi(static_cast<size_t>(size_y()));
  for (size_t i = 0; i < xi.size(); ++i) xi[i] = static_cast<int64_t>(i);
  for (size_t i = 0; i < yi.size(); ++i) yi[i] = static_cast<int64_t>(i);
  Rng rx = Rng::keyed(seed_, "dataset.shuffle.x", static_cast<uint64_t>(epoch));
  Rng ry = Rng::keyed(seed_, "dataset.shuffle.y", static_cast<uint64_t>(epoch));
  rx.shuffle(xi);
  ry.shuffle(yi);
  int64_t n = std::max(size_x(), size_y());
  std::vector<std::pair<int64_t, int64_t>> pairs;
  pairs.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    pairs.emplace_back(xi[static_cast<size_t>(i % size_x())],
                       yi[static_cast<size_t>(i % size_y())]);
  return pairs;
}

Tensor<float> UnpairedDataset::load_path(const std::string& path, const char* tag,
                                         int64_t epoch, int64_t step) const {
  ImageU8 img = read_image(path);
  double jy = 0.5, jx = 0.5;
  if (random_crop_) {
    Rng rng = Rng::keyed(seed_, std::string("dataset.crop.") + tag,
                         static_cast<uint64_t>(epoch), static_cast<uint64_t>(step));
    jy = rng.uniform();
    jx = rng.uniform();
  }
  return image_to_chw(resize_and_crop(img, image_size_, jy, jx));
}

Tensor<float> UnpairedDataset::load_x(int64_t index, int64_t epoch, int64_t step) const {
  check(index >= 0 && index < size_x(), "domain X index out of range");
  return load_path(domain_x_paths_[static_cast<size_t>(index)], "x", epoch, step);
}

Tensor<float> UnpairedDataset::load_y(int64_t index, int64_t epoch, int64_t step) const {
  check(index >= 0 && index < size_y(), "domain Y index out of range");
  return load_path(domain_y_paths_[static_cast<size_t>(index)], "y", epoch, step);
}

UnpairedDataset::Batch UnpairedDataset::load_batch(int64_t epoch, int64_t step,
                                                   int64_t batch_size) const {
  auto pairs = epoch_pairs(epoch);
  int64_t n = static_cast<int64_t>(pairs.size());
  int64_t s = image_size_;
  Batch b;
  b.x = Tensor<float>(Shape{batch_size, 3, s, s});
  b.y = Tensor<float>(Shape{batch_size, 3, s, s});
  for (int64_t i = 0; i < batch_size; ++i) {
    int64_t pos = step * batch_size + i;
    check(pos < n, "load_batch: step beyond epoch length");
    auto [ix, iy] = pairs[static_cast<size_t>(pos)];
    Tensor<float> tx = load_x(ix, epoch, pos);
    Tensor<float> ty = load_y(iy, epoch, pos);
    std::copy_n(tx.data(), tx.numel(), b.x.data() + i * 3 * s * s);
    std::copy_n(ty.data(), ty.numel(), b.y.data() + i * 3 * s * s);
  }
  return b;
}

}  // namespace cutgan
