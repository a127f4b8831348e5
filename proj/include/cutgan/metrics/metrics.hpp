#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "cutgan/core/tensor.hpp"

namespace cutgan {
namespace metrics {

// M x D feature matrix from some embedder.
struct EmbeddedSet {
  Tensor<double> features;  // [M, D]
  std::string embedder_id;

  int64_t count() const { return features.dim(0); }
  int64_t dim() const { return features.dim(1); }
};

// Frechet distance between Gaussian fits:
// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), symmetric matrix square
// root stabilized with a small diagonal epsilon when the spectrum dips
// negative. Unbiased covariance, so each set needs M >= 2.
double fid(const EmbeddedSet& a, const EmbeddedSet& b);

// Per split: exp(mean_x KL(p(y|x) || mean_x p(y|x))). Rows must lie on the
// simplex within 1e-6. Returns (mean, std) over splits.
std::pair<double, double> inception_score(const Tensor<double>& class_probs, int splits);

// Average over seeded random unit directions of the 1-D Wasserstein distance
// between the projected samples (sort both, aggregate paired differences;
// order 2 = root-mean-square, order 1 = mean absolute). The larger set is
// resampled down to the smaller one, seeded.
double swd(const EmbeddedSet& a, const EmbeddedSet& b, int n_projections, uint64_t seed,
           int order = 2);

struct MetricReport {
  double fid = 0, is_mean = 0, is_std = 0, swd = 0;
  int64_t count_real = 0, count_fake = 0;
  std::string embedder;
  uint64_t seed = 0;
};

}  // namespace metrics
}  // namespace cutgan
