#include "defproj/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "defproj/errors.hpp"
#include "defproj/rng.hpp"

namespace defproj {

namespace {

constexpr double kRidge = 1e-8;

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& centered) {
  const double denom = static_cast<double>(centered.rows() - 1);
  return (centered.transpose() * centered) / denom;
}

// flips each column so its largest-magnitude entry is positive
void canonicalize_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index imax = 0;
    m.col(j).cwiseAbs().maxCoeff(&imax);
    if (m(imax, j) < 0) m.col(j) = -m.col(j);
  }
}

// W <- (W W^T)^{-1/2} W
void symmetric_decorrelate(Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
  const Eigen::VectorXd inv_sqrt =
      es.eigenvalues().cwiseMax(1e-18).cwiseSqrt().cwiseInverse();
  w = es.eigenvectors() * inv_sqrt.asDiagonal() *
      es.eigenvectors().transpose() * w;
}

double excess_kurtosis(const Eigen::VectorXd& v) {
  const Eigen::ArrayXd d = v.array() - v.mean();
  const double m2 = d.square().mean();
  const double m4 = d.square().square().mean();
  if (m2 <= 0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace

Eigen::MatrixXd center(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw data_error("center requires at least 2 rows");
  return x.rowwise() - x.colwise().mean();
}

Eigen::MatrixXd top2_projection(const Eigen::MatrixXd& x,
                                ProjectionMode mode) {
  if (x.cols() < 2)
    throw data_error("top2_projection requires at least 2 columns");
  if (mode == ProjectionMode::SvdRaw) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() < 2 || sv(1) <= 1e-12 * std::max(sv(0), 1.0))
      throw data_error("matrix rank below 2, cannot project");
    Eigen::MatrixXd v2 = svd.matrixV().leftCols(2);
    canonicalize_signs(v2);
    return x * v2;
  }
  const Eigen::MatrixXd xc = center(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_covariance(xc));
  const Eigen::VectorXd& evals = es.eigenvalues();  // ascending
  const Eigen::Index d = evals.size();
  if (d < 2 || evals(d - 2) <= 1e-12 * std::max(evals(d - 1), 1.0))
    throw data_error("matrix rank below 2, cannot project");
  Eigen::MatrixXd axes(x.cols(), 2);
  axes.col(0) = es.eigenvectors().col(d - 1);
  axes.col(1) = es.eigenvectors().col(d - 2);
  canonicalize_signs(axes);
  Eigen::MatrixXd proj = xc * axes;
  proj.col(0) /= std::sqrt(evals(d - 1));
  proj.col(1) /= std::sqrt(evals(d - 2));
  return proj;
}

Eigen::MatrixXd whiten(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xc = center(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_covariance(xc));
  // ridge-shifted spectrum: healthy directions whiten exactly, directions
  // below the ridge stay near zero instead of being inflated
  const Eigen::VectorXd evals = es.eigenvalues().array() + kRidge;
  if (evals(evals.size() - 1) <= 100.0 * kRidge)
    throw numeric_error("covariance is degenerate even with ridge: largest "
                        "eigenvalue " +
                        std::to_string(evals(evals.size() - 1)));
  const Eigen::VectorXd inv_sqrt = evals.cwiseSqrt().cwiseInverse();
  return xc * es.eigenvectors() * inv_sqrt.asDiagonal() *
         es.eigenvectors().transpose();
}

IcaResult ica_transform(const Eigen::MatrixXd& x, const IcaConfig& config) {
  if (config.max_iterations <= 0 || config.rescale_factor <= 0)
    throw data_error("invalid ICA configuration");
  const Eigen::MatrixXd xw = whiten(x);
  const Eigen::Index n = xw.rows(), d = xw.cols();

  // data as components x samples
  const Eigen::MatrixXd z = xw.transpose();

  Rng rng(derive_seed(config.random_state, "fastica-init"));
  Eigen::MatrixXd w(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) w(i, j) = rng.gaussian();
  symmetric_decorrelate(w);

  IcaResult result;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < config.max_iterations; ++it) {
    const Eigen::MatrixXd u = w * z;                      // d x n
    const Eigen::MatrixXd g = u.array().tanh().matrix();  // logcosh contrast
    const Eigen::VectorXd g_prime_mean =
        (1.0 - g.array().square()).rowwise().mean().matrix();
    Eigen::MatrixXd w_new =
        g * z.transpose() * inv_n - g_prime_mean.asDiagonal() * w;
    symmetric_decorrelate(w_new);
    const double delta =
        ((w_new * w.transpose()).diagonal().cwiseAbs().array() - 1.0)
            .abs()
            .maxCoeff();
    w = w_new;
    result.iterations = it + 1;
    if (delta < config.convergence_tolerance) {
      result.converged = true;
      break;
    }
  }

  Eigen::MatrixXd sources = xw * w.transpose();  // n x d, unit variance

  // deterministic component order: excess kurtosis descending
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> kurt(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    kurt[static_cast<std::size_t>(j)] = excess_kurtosis(sources.col(j));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return kurt[static_cast<std::size_t>(a)] >
                            kurt[static_cast<std::size_t>(b)];
                   });
  Eigen::MatrixXd ordered(n, d);
  for (Eigen::Index j = 0; j < d; ++j)
    ordered.col(j) = sources.col(order[static_cast<std::size_t>(j)]);
  canonicalize_signs(ordered);

  result.transformed = ordered * config.rescale_factor;
  return result;
}

GeometryReport anisotropy_report(const Eigen::MatrixXd& x,
                                 std::uint64_t sample_seed) {
  if (x.rows() < 2) throw data_error("anisotropy_report requires n >= 2");
  GeometryReport report;

  const Eigen::Index n = x.rows();
  const Eigen::VectorXd norms = x.rowwise().norm();

  constexpr std::uint64_t kMaxPairs = 1000000;
  const std::uint64_t total_pairs =
      static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
  double cos_sum = 0.0;
  std::uint64_t cos_count = 0;
  auto accumulate = [&](Eigen::Index i, Eigen::Index j) {
    const double denom = norms(i) * norms(j);
    if (denom <= 0) return;
    cos_sum += x.row(i).dot(x.row(j)) / denom;
    ++cos_count;
  };
  if (total_pairs <= kMaxPairs) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) accumulate(i, j);
  } else {
    Rng rng(derive_seed(sample_seed, "pairwise-cosine"));
    for (std::uint64_t k = 0; k < kMaxPairs; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.below(n));
      auto j = static_cast<Eigen::Index>(rng.below(n - 1));
      if (j >= i) ++j;
      accumulate(i, j);
    }
  }
  report.mean_pairwise_cosine =
      cos_count ? cos_sum / static_cast<double>(cos_count) : 0.0;

  const Eigen::MatrixXd xc = center(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_covariance(xc));
  Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0).array() + kRidge;
  report.covariance_condition_number = evals(evals.size() - 1) / evals(0);
  const double trace = evals.sum();
  const Eigen::Index d = evals.size();
  double top2 = evals(d - 1);
  if (d >= 2) top2 += evals(d - 2);
  report.top2_variance_ratio = trace > 0 ? top2 / trace : 0.0;
  report.is_centered = x.colwise().mean().cwiseAbs().maxCoeff() < 1e-9;
  return report;
}

}  // namespace defproj
