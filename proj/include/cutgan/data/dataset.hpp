#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cutgan/core/tensor.hpp"

namespace cutgan {

// Two unpaired image folders served as deterministically shuffled batches.
// Immutable after construction; the iteration order is a pure function of
// (seed, epoch), so readers and resumed runs see the same sequence.
class UnpairedDataset {
 public:
  static UnpairedDataset load(const std::string& root_x, const std::string& root_y,
                              int64_t image_size, uint64_t seed);

  int64_t size_x() const { return static_cast<int64_t>(domain_x_paths_.size()); }
  int64_t size_y() const { return static_cast<int64_t>(domain_y_paths_.size()); }
  int64_t image_size() const { return image_size_; }
  uint64_t seed() const { return seed_; }

  const std::vector<std::string>& domain_x_paths() const { return domain_x_paths_; }
  const std::vector<std::string>& domain_y_paths() const { return domain_y_paths_; }

  // Independent reshuffle of each domain per epoch; the longer domain sets the
  // epoch length and the shorter one wraps around.
  int64_t steps_per_epoch(int64_t batch_size) const;
  std::vector<std::pair<int64_t, int64_t>> epoch_pairs(int64_t epoch) const;

  void set_random_crop(bool on) { random_crop_ = on; }
  bool random_crop() const { return random_crop_; }

  // [3,S,S] in [-1,1]. epoch/step key the crop jitter when random crop is on.
  Tensor<float> load_x(int64_t index, int64_t epoch = 0, int64_t step = 0) const;
  Tensor<float> load_y(int64_t index, int64_t epoch = 0, int64_t step = 0) const;

  struct Batch {
    Tensor<float> x, y;  // [B,3,S,S]
  };
  Batch load_batch(int64_t epoch, int64_t step, int64_t batch_size) const;

 private:
  Tensor<float> load_path(const std::string& path, const char* tag, int64_t epoch,
                          int64_t step) const;

  std::vector<std::string> domain_x_paths_, domain_y_paths_;
  int64_t image_size_ = 0;
  uint64_t seed_ = 0;
  bool random_crop_ = false;
};

}  // namespace cutgan
