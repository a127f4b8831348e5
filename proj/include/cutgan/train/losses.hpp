#pragma once

#include "cutgan/core/ops.hpp"

namespace cutgan {

// Least-squares adversarial objectives on raw (unsquashed) score maps.
template <typename T>
Var<T> lsgan_d_loss(const Var<T>& real_scores, const Var<T>& fake_scores) {
  auto real_term = ops::mean_all(ops::mul(ops::add_scalar(real_scores, static_cast<T>(-1)),
                                          ops::add_scalar(real_scores, static_cast<T>(-1))));
  auto fake_term = ops::mean_all(ops::mul(fake_scores, fake_scores));
  return ops::mul_scalar(ops::add(real_term, fake_term), static_cast<T>(0.5));
}

template <typename T>
Var<T> lsgan_g_loss(const Var<T>& fake_scores) {
  auto shifted = ops::add_scalar(fake_scores, static_cast<T>(-1));
  return ops::mean_all(ops::mul(shifted, shifted));
}

// gan + lambda_x * nce_x + lambda_y * nce_y. nce_y may be undefined when
// lambda_y is zero (the identity term is then never evaluated).
template <typename T>
Var<T> total_generator_objective(const Var<T>& g_gan, const Var<T>& nce_x, const Var<T>& nce_y,
                                 T lambda_x, T lambda_y) {
  Var<T> total = ops::add(g_gan, ops::mul_scalar(nce_x, lambda_x));
  if (lambda_y != 0) {
    check(nce_y.defined(), "total objective: lambda_y != 0 but identity term missing");
    total = ops::add(total, ops::mul_scalar(nce_y, lambda_y));
  }
  return total;
}

}  // namespace cutgan
