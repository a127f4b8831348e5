#pragma once

#include <cstdint>
#include <string>

namespace cutgan {

// Synthetic two-domain dataset: the same geometric scene distribution rendered
// with a deterministic domain shift (dark warm-palette X, light cool-palette
// Y). Writes root/{trainX,trainY,testX,testY}/NNN.png; skips generation when
// the directories are already populated.
void generate_toy_dataset(const std::string& root, int64_t image_size, int64_t n_train,
                          int64_t n_test, uint64_t seed);

}  // namespace cutgan
