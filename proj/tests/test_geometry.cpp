#include <doctest.h>

#include <cmath>

#include "defproj/geometry.hpp"
#include "defproj/rng.hpp"

using namespace defproj;

namespace {

Eigen::MatrixXd gaussian_sample(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.gaussian();
  return x;
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  return xc.transpose() * xc / static_cast<double>(x.rows() - 1);
}

double best_abs_corr(const Eigen::VectorXd& source,
                     const Eigen::MatrixXd& recovered) {
  double best = 0.0;
  const Eigen::VectorXd sc = source.array() - source.mean();
  for (Eigen::Index j = 0; j < recovered.cols(); ++j) {
    const Eigen::VectorXd rc =
        recovered.col(j).array() - recovered.col(j).mean();
    const double denom = sc.norm() * rc.norm();
    if (denom <= 0) continue;
    best = std::max(best, std::abs(sc.dot(rc)) / denom);
  }
  return best;
}

}  // namespace

TEST_CASE("center removes column means and is idempotent") {
  Eigen::MatrixXd x = gaussian_sample(5, 3, 31);
  x.array() += 2.5;
  const Eigen::MatrixXd c = center(x);
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(c.col(j).mean()) <= 1e-12);
  const Eigen::MatrixXd cc = center(c);
  CHECK((cc - c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("centering identical rows yields the zero matrix") {
  Eigen::MatrixXd x(4, 3);
  for (int i = 0; i < 4; ++i) x.row(i) << 1.0, -2.0, 3.0;
  CHECK(center(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("center rejects fewer than two rows") {
  Eigen::MatrixXd x(1, 3);
  CHECK_THROWS_AS(center(x), data_error);
}

TEST_CASE("svd projection of 2-d data reconstructs it exactly") {
  const Eigen::MatrixXd x = gaussian_sample(40, 2, 32);
  const Eigen::MatrixXd proj = top2_projection(x, ProjectionMode::SvdRaw);
  // the projection is x*V with V orthonormal 2x2: norms are preserved
  for (int i = 0; i < 40; ++i)
    CHECK(proj.row(i).norm() == doctest::Approx(x.row(i).norm()).epsilon(1e-9));
}

TEST_CASE("pca-whitened projection has unit variance per axis") {
  Eigen::MatrixXd x = gaussian_sample(300, 6, 33);
  x.col(0) *= 5.0;
  x.col(1) *= 2.0;
  const Eigen::MatrixXd proj =
      top2_projection(x, ProjectionMode::PcaWhitened);
  for (int j = 0; j < 2; ++j) {
    const double var =
        (proj.col(j).array() - proj.col(j).mean()).square().sum() /
        (proj.rows() - 1);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("rank-1 data cannot be projected to 2-d") {
  Eigen::MatrixXd x(10, 3);
  Rng rng(34);
  for (int i = 0; i < 10; ++i) {
    const double t = rng.gaussian();
    x.row(i) << t, 2 * t, -t;
  }
  CHECK_THROWS_AS(top2_projection(x, ProjectionMode::SvdRaw), data_error);
  CHECK_THROWS_AS(top2_projection(x, ProjectionMode::PcaWhitened), data_error);
}

TEST_CASE("isotropic gaussian: top-2 variance ratio is near 2/d") {
  const Eigen::MatrixXd x = gaussian_sample(2000, 8, 35);
  const GeometryReport r = anisotropy_report(x);
  CHECK(r.top2_variance_ratio == doctest::Approx(2.0 / 8.0).epsilon(0.2));
  CHECK(std::abs(r.top2_variance_ratio - 0.25) < 0.05);
}

TEST_CASE("whitening already-white data keeps identity covariance") {
  const Eigen::MatrixXd x = gaussian_sample(500, 4, 36);
  const Eigen::MatrixXd w1 = whiten(x);
  const Eigen::MatrixXd c1 = sample_cov(w1);
  CHECK((c1 - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("whitening diag(4,1)-scaled data gives identity covariance") {
  Eigen::MatrixXd x = gaussian_sample(400, 2, 37);
  x.col(0) *= 2.0;  // covariance becomes diag(4, 1)
  const Eigen::MatrixXd w = whiten(x);
  const Eigen::MatrixXd c = sample_cov(w);
  CHECK((c - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("whitening a rho=0.9 correlated sample kills the off-diagonal") {
  const Eigen::MatrixXd g = gaussian_sample(1000, 2, 38);
  Eigen::MatrixXd mix(2, 2);  // Cholesky factor of [[1, .9], [.9, 1]]
  mix << 1.0, 0.0, 0.9, std::sqrt(1.0 - 0.81);
  const Eigen::MatrixXd x = g * mix.transpose();
  const Eigen::MatrixXd w = whiten(x);
  const Eigen::MatrixXd c = sample_cov(w);
  CHECK(std::abs(c(0, 1)) <= 1e-6);
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("whitening twice changes almost nothing") {
  Eigen::MatrixXd x = gaussian_sample(600, 5, 39);
  x.col(2) *= 3.0;
  const Eigen::MatrixXd w1 = whiten(x);
  const Eigen::MatrixXd w2 = whiten(w1);
  CHECK((w2 - w1).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("whitening rejects an all-zero matrix") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 3);
  CHECK_THROWS_AS(whiten(x), numeric_error);
}

TEST_CASE("ica recovers already-independent non-gaussian sources") {
  Rng rng(40);
  const int n = 3000;
  Eigen::MatrixXd s(n, 3);
  for (int i = 0; i < n; ++i) {
    s(i, 0) = rng.uniform(-1.7320508, 1.7320508);  // uniform
    const double u = rng.uniform();
    s(i, 1) = (u < 0.5 ? 1.0 : -1.0) *
              std::log(1.0 - rng.uniform()) * -0.70710678;  // laplace
    s(i, 2) = (rng.uniform() < 0.5 ? -1.0 : 1.0) +
              0.3 * rng.gaussian();  // bimodal
  }
  IcaConfig cfg;
  const IcaResult r = ica_transform(s, cfg);
  const Eigen::MatrixXd rec = r.transformed / cfg.rescale_factor;
  for (int j = 0; j < 3; ++j)
    CHECK(best_abs_corr(s.col(j), rec) >= 0.99);
}

TEST_CASE("ica separates randomly mixed sources") {
  Rng rng(41);
  const int n = 5000;
  Eigen::MatrixXd s(n, 3);
  for (int i = 0; i < n; ++i) {
    s(i, 0) = rng.uniform(-1.7320508, 1.7320508);
    const double u = rng.uniform();
    s(i, 1) = (u < 0.5 ? 1.0 : -1.0) *
              std::log(1.0 - rng.uniform()) * -0.70710678;
    s(i, 2) = (rng.uniform() < 0.5 ? -1.0 : 1.0) + 0.3 * rng.gaussian();
  }
  Eigen::MatrixXd mixing(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) mixing(i, j) = rng.gaussian();
  const Eigen::MatrixXd x = s * mixing.transpose();

  IcaConfig cfg;  // max_iterations 1000, random_state 42, rescale 100
  const IcaResult r = ica_transform(x, cfg);
  CHECK(r.converged);
  const Eigen::MatrixXd rec = r.transformed / cfg.rescale_factor;
  for (int j = 0; j < 3; ++j)
    CHECK(best_abs_corr(s.col(j), rec) >= 0.95);

  // rescale leaves each axis with standard deviation near 100
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt(
        (r.transformed.col(j).array() - r.transformed.col(j).mean())
            .square()
            .sum() /
        (n - 1));
    CHECK(sd == doctest::Approx(100.0).epsilon(0.05));
  }
}

TEST_CASE("ica output divided by the rescale factor has identity covariance") {
  Rng rng(42);
  const int n = 2000;
  Eigen::MatrixXd s(n, 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j)
      s(i, j) = rng.uniform(-1.7320508, 1.7320508);
  Eigen::MatrixXd mixing(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) mixing(i, j) = rng.gaussian();
  IcaConfig cfg;
  const IcaResult r = ica_transform(s * mixing.transpose(), cfg);
  const Eigen::MatrixXd c = sample_cov(r.transformed / cfg.rescale_factor);
  CHECK((c - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("ica is deterministic for a fixed random state") {
  Rng rng(43);
  Eigen::MatrixXd x(800, 3);
  for (int i = 0; i < 800; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  IcaConfig cfg;
  const IcaResult a = ica_transform(x, cfg);
  const IcaResult b = ica_transform(x, cfg);
  CHECK(a.iterations == b.iterations);
  CHECK((a.transformed - b.transformed).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("anisotropy report: identical rows have mean cosine 1") {
  Eigen::MatrixXd x(6, 4);
  for (int i = 0; i < 6; ++i) x.row(i) << 1, 2, 3, 4;
  const GeometryReport r = anisotropy_report(x);
  CHECK(r.mean_pairwise_cosine == doctest::Approx(1.0));
}

TEST_CASE("anisotropy report: balanced antipodal rows have mean cosine near 0") {
  Eigen::MatrixXd x(8, 3);
  for (int i = 0; i < 8; ++i) {
    x.row(i).setZero();
    x(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
  }
  // 8 rows: 28 pairs, 16 antiparallel and 12 parallel -> mean -1/7
  const GeometryReport r = anisotropy_report(x);
  CHECK(std::abs(r.mean_pairwise_cosine) <= 0.15);
}

TEST_CASE("whitened data reports condition number near 1") {
  const Eigen::MatrixXd x = gaussian_sample(500, 6, 44);
  const GeometryReport r = anisotropy_report(whiten(x));
  CHECK(r.covariance_condition_number <= 1.0 + 1e-4);
  CHECK(r.covariance_condition_number >= 1.0);
  CHECK(r.is_centered);
}

TEST_CASE("geometry functions are pure") {
  Eigen::MatrixXd x = gaussian_sample(100, 4, 45);
  x.col(1) *= 4.0;
  const Eigen::MatrixXd a = whiten(x);
  const Eigen::MatrixXd b = whiten(x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd p1 = top2_projection(x, ProjectionMode::SvdRaw);
  const Eigen::MatrixXd p2 = top2_projection(x, ProjectionMode::SvdRaw);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("svd projection keeps the two largest singular directions") {
  Eigen::MatrixXd x = gaussian_sample(200, 5, 46);
  x.col(0) *= 6.0;
  x.col(1) *= 3.0;
  const Eigen::MatrixXd proj = top2_projection(x, ProjectionMode::SvdRaw);
  // captured energy equals the top-2 singular values' energy
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  const auto& sv = svd.singularValues();
  const double captured = proj.squaredNorm();
  const double top2 = sv(0) * sv(0) + sv(1) * sv(1);
  CHECK(captured == doctest::Approx(top2).epsilon(1e-9));
  // any other pair of singular directions captures no more
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b) {
      const double other = sv(a) * sv(a) + sv(b) * sv(b);
      CHECK(other <= top2 + 1e-9);
    }
}
