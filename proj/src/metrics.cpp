#include "cutgan/metrics/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "cutgan/core/rng.hpp"

namespace cutgan {
namespace metrics {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd column_mean(const Tensor<double>& f) {
  int64_t m = f.dim(0), d = f.dim(1);
  VectorXd mu = VectorXd::Zero(d);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) mu[j] += f[i * d + j];
  return mu / static_cast<double>(m);
}

MatrixXd covariance(const Tensor<double>& f, const VectorXd& mu) {
  int64_t m = f.dim(0), d = f.dim(1);
  MatrixXd cov = MatrixXd::Zero(d, d);
  for (int64_t i = 0; i < m; ++i) {
    VectorXd row(d);
    for (int64_t j = 0; j < d; ++j) row[j] = f[i * d + j] - mu[j];
    cov.noalias() += row * row.transpose();
  }
  return cov / static_cast<double>(m - 1);
}

// symmetric PSD square root via eigendecomposition, negative dust clamped
MatrixXd psd_sqrt(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
  VectorXd lam = eig.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam[i] = lam[i] > 0 ? std::sqrt(lam[i]) : 0.0;
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

// Tr((Sa Sb)^{1/2}) through the symmetric form sqrt(Sa)^T Sb sqrt(Sa).
double trace_sqrt_product(const MatrixXd& sa, const MatrixXd& sb, double* min_eig_out) {
  MatrixXd root_a = psd_sqrt(sa);
  MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(inner);
  VectorXd lam = eig.eigenvalues();
  double min_eig = lam.minCoeff();
  if (min_eig_out) *min_eig_out = min_eig;
  double tr = 0;
  for (int i = 0; i < lam.size(); ++i) tr += lam[i] > 0 ? std::sqrt(lam[i]) : 0.0;
  return tr;
}

}  // namespace

double fid(const EmbeddedSet& a, const EmbeddedSet& b) {
  check(a.features.defined() && b.features.defined(), "fid: undefined features");
  check(a.dim() == b.dim(), "fid: embedding dims differ: " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  check(a.count() >= 2 && b.count() >= 2, "fid: need at least 2 samples per set");
  check(a.features.all_finite() && b.features.all_finite(), "fid: non-finite features");

  VectorXd mu_a = column_mean(a.features);
  VectorXd mu_b = column_mean(b.features);
  MatrixXd cov_a = covariance(a.features, mu_a);
  MatrixXd cov_b = covariance(b.features, mu_b);

  double min_eig = 0;
  double tr_sqrt = trace_sqrt_product(cov_a, cov_b, &min_eig);
  double scale = std::max(cov_a.trace(), cov_b.trace());
  double tol = 1e-9 * std::max(scale * scale, 1.0);
  if (min_eig < -tol) {
    // stabilize both covariances with a small diagonal epsilon and retry
    double eps = 1e-8 * std::max(scale, 1.0);
    MatrixXd sa = cov_a + eps * MatrixXd::Identity(cov_a.rows(), cov_a.cols());
    MatrixXd sb = cov_b + eps * MatrixXd::Identity(cov_b.rows(), cov_b.cols());
    tr_sqrt = trace_sqrt_product(sa, sb, &min_eig);
    if (min_eig < -tol) {
      throw std::runtime_error(
          "fid: matrix square root not PSD after stabilization (min eigenvalue " +
          std::to_string(min_eig) + ", covariance trace scale " + std::to_string(scale) + ")");
    }
    cov_a = sa;
    cov_b = sb;
  }
  double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  // exact arithmetic gives >= 0; clamp eigen-dust
  check(value > -1e-6, "fid: negative value " + std::to_string(value) + " beyond tolerance");
  return std::max(value, 0.0);
}

std::pair<double, double> inception_score(const Tensor<double>& class_probs, int splits) {
  check(class_probs.ndim() == 2, "inception_score: expects [M, C]");
  int64_t m = class_probs.dim(0), c = class_probs.dim(1);
  check(splits >= 1, "inception_score: splits must be >= 1");
  check(m >= splits, "inception_score: more splits than samples");
  for (int64_t i = 0; i < m; ++i) {
    double s = 0;
    for (int64_t j = 0; j < c; ++j) {
      double p = class_probs[i * c + j];
      check(p >= 0, "inception_score: negative probability in row " + std::to_string(i));
      s += p;
    }
    check(std::fabs(s - 1.0) <= 1e-6,
          "inception_score: row " + std::to_string(i) + " sums to " + std::to_string(s));
  }
  std::vector<double> scores;
  int64_t chunk = m / splits;
  for (int s = 0; s < splits; ++s) {
    int64_t lo = s * chunk;
    int64_t hi = (s == splits - 1) ? m : lo + chunk;
    std::vector<double> marginal(static_cast<size_t>(c), 0.0);
    for (int64_t i = lo; i < hi; ++i)
      for (int64_t j = 0; j < c; ++j) marginal[static_cast<size_t>(j)] += class_probs[i * c + j];
    for (auto& v : marginal) v /= static_cast<double>(hi - lo);
    double mean_kl = 0;
    for (int64_t i = lo; i < hi; ++i) {
      double kl = 0;
      for (int64_t j = 0; j < c; ++j) {
        double p = class_probs[i * c + j];
        if (p > 0) kl += p * std::log(p / marginal[static_cast<size_t>(j)]);
      }
      mean_kl += kl;
    }
    mean_kl /= static_cast<double>(hi - lo);
    scores.push_back(std::exp(mean_kl));
  }
  double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0;
  for (auto v : scores) var += (v - mean) * (v - mean);
  double stddev = std::sqrt(var / scores.size());
  return {mean, stddev};
}

double swd(const EmbeddedSet& a, const EmbeddedSet& b, int n_projections, uint64_t seed,
           int order) {
  check(a.dim() == b.dim(), "swd: embedding dims differ");
  check(order == 1 || order == 2, "swd: order must be 1 or 2");
  check(n_projections >= 1, "swd: need at least one projection");
  int64_t d = a.dim();
  int64_t m = std::min(a.count(), b.count());
  check(m >= 1, "swd: empty set");

  // seeded downsample of the larger set
  auto take = [&](const Tensor<double>& f, const char* tag) {
    int64_t rows = f.dim(0);
    std::vector<int64_t> idx(static_cast<size_t>(rows));
    std::iota(idx.begin(), idx.end(), 0);
    if (rows > m) {
      Rng rng = Rng::keyed(seed, std::string("swd.resample.") + tag);
      rng.shuffle(idx);
      idx.resize(static_cast<size_t>(m));
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  };
  auto ia = take(a.features, "a");
  auto ib = take(b.features, "b");
  check(static_cast<int64_t>(ia.size()) == m && static_cast<int64_t>(ib.size()) == m,
        "swd: sample counts differ after resampling");

  double total = 0;
  std::vector<double> pa(static_cast<size_t>(m)), pb(static_cast<size_t>(m));
  for (int p = 0; p < n_projections; ++p) {
    Rng rng = Rng::keyed(seed, "swd.proj", static_cast<uint64_t>(p));
    std::vector<double> dir(static_cast<size_t>(d));
    double nrm = 0;
    for (auto& v : dir) {
      v = rng.normal();
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    if (nrm == 0) continue;
    for (auto& v : dir) v /= nrm;
    for (int64_t i = 0; i < m; ++i) {
      double sa = 0, sb = 0;
      for (int64_t j = 0; j < d; ++j) {
        sa += a.features[ia[static_cast<size_t>(i)] * d + j] * dir[static_cast<size_t>(j)];
        sb += b.features[ib[static_cast<size_t>(i)] * d + j] * dir[static_cast<size_t>(j)];
      }
      pa[static_cast<size_t>(i)] = sa;
      pb[static_cast<size_t>(i)] = sb;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double acc = 0;
    for (int64_t i = 0; i < m; ++i) {
      double diff = pa[static_cast<size_t>(i)] - pb[static_cast<size_t>(i)];
      acc += order == 2 ? diff * diff : std::fabs(diff);
    }
    acc /= static_cast<double>(m);
    total += order == 2 ? std::sqrt(acc) : acc;
  }
  return total / n_projections;
}

}  // namespace metrics
}  // namespace cutgan
