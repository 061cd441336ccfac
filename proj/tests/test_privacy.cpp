#include "vfl/privacy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "vfl/matrix.hpp"
#include "vfl/rng.hpp"

namespace vfl {
namespace {

// Exhaustive reference minimization of the RDP conversion objective on a
// 10^6-point grid, log-spaced in α−1 so that sharp minima near α = 1 are
// resolved to oracle accuracy.
double dense_grid_epsilon(std::size_t rounds, double sigma, double delta) {
  const int n = 1000000;
  const double lo = std::log(1e-9);
  const double hi = std::log(4095.0);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double alpha = 1.0 + std::exp(lo + (hi - lo) * i / (n - 1.0));
    double t = static_cast<double>(rounds);
    double f = t * alpha / (2.0 * sigma * sigma) + std::log((alpha - 1.0) / alpha) -
               (std::log(delta) + std::log(alpha)) / (alpha - 1.0);
    best = std::min(best, f);
  }
  return best;
}

double oracle_inverse_sigma(std::size_t rounds, double target, double delta) {
  double lo = 1e-2, hi = 1e4;
  for (int i = 0; i < 60; ++i) {
    double mid = std::sqrt(lo * hi);
    if (dense_grid_epsilon(rounds, mid, delta) > target)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(ClipFrobenius, WorkedExample) {
  // ‖[3,4]‖_F = 5 > 2.5 → scaled by 1/2.
  Matrix a = from_rows({{3.0, 4.0}});
  Matrix c = clip_frobenius(a, 2.5);
  EXPECT_DOUBLE_EQ(c(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(c(0, 1), 2.0);
  EXPECT_NEAR(frobenius_norm(c), 2.5, 1e-12);
}

TEST(ClipFrobenius, WithinBoundUntouched) {
  Matrix a = from_rows({{0.3, -0.4}, {0.0, 0.1}});
  Matrix c = clip_frobenius(a, 2.5);
  EXPECT_EQ(c.data, a.data);  // bit-identical
}

TEST(ClipFrobenius, ZeroMatrixUnchanged) {
  Matrix a(3, 4);
  Matrix c = clip_frobenius(a, 0.5);
  EXPECT_EQ(c.data, a.data);
}

TEST(ClipFrobenius, BoundHoldsAcrossScales) {
  RngStream rng = derive_stream(7, StreamPurpose::kGeneric, 0, 0);
  for (double scale : {1e-6, 1e-2, 1.0, 1e2, 1e6}) {
    for (int rep = 0; rep < 20; ++rep) {
      Matrix a(5, 7);
      for (double& v : a.data) v = rng.normal(0.0, scale);
      double c = 0.25 * scale + 1e-9;
      Matrix clipped = clip_frobenius(a, c);
      EXPECT_LE(frobenius_norm(clipped), c * (1.0 + 1e-12));
      // Direction preserved: clipped is a non-negative multiple of a.
      double na = frobenius_norm(a);
      if (na > 0.0) {
        double cosine = dot(a.data, clipped.data) / (na * frobenius_norm(clipped));
        EXPECT_NEAR(cosine, 1.0, 1e-12);
      }
    }
  }
}

TEST(ClipFrobenius, RejectsNonPositiveBound) {
  Matrix a(1, 1);
  EXPECT_THROW(clip_frobenius(a, 0.0), std::invalid_argument);
  EXPECT_THROW(clip_frobenius(a, -1.0), std::invalid_argument);
}

TEST(GaussianPerturb, SigmaZeroIsIdentity) {
  Matrix a = from_rows({{1.0, -2.0}, {0.5, 3.0}});
  RngStream rng = derive_stream(1, StreamPurpose::kDpNoise, 0, 0);
  Matrix out = gaussian_perturb(a, 0.0, 10.0, rng);
  EXPECT_EQ(out.data, a.data);
}

TEST(GaussianPerturb, EmpiricalStdMatchesSigmaTimesClip) {
  const std::size_t cells = 100000;
  Matrix zero(200, 500);
  RngStream rng = derive_stream(3, StreamPurpose::kDpNoise, 2, 5);
  Matrix noisy = gaussian_perturb(zero, 3.0, 2.0, rng);
  ASSERT_EQ(noisy.data.size(), cells);
  double mean = 0.0;
  for (double v : noisy.data) mean += v;
  mean /= cells;
  double var = 0.0;
  for (double v : noisy.data) var += (v - mean) * (v - mean);
  var /= cells;
  double stddev = std::sqrt(var);
  EXPECT_NEAR(stddev, 6.0, 0.02 * 6.0);
  EXPECT_NEAR(mean, 0.0, 0.1);
}

TEST(GaussianPerturb, DistinctStreamsAreUncorrelated) {
  const std::size_t n = 50000;
  Matrix zero(n, 1);
  RngStream a = derive_stream(3, StreamPurpose::kDpNoise, 0, 11);
  RngStream b = derive_stream(3, StreamPurpose::kDpNoise, 1, 11);
  Matrix na = gaussian_perturb(zero, 1.0, 1.0, a);
  Matrix nb = gaussian_perturb(zero, 1.0, 1.0, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += na.data[i] * nb.data[i];
  EXPECT_LT(std::abs(sum / n), 0.02);
}

TEST(GaussianPerturb, SameStreamReproduces) {
  Matrix a = from_rows({{1.0, 2.0, 3.0}});
  RngStream r1 = derive_stream(9, StreamPurpose::kDpNoise, 4, 7);
  RngStream r2 = derive_stream(9, StreamPurpose::kDpNoise, 4, 7);
  EXPECT_EQ(gaussian_perturb(a, 2.0, 1.0, r1).data, gaussian_perturb(a, 2.0, 1.0, r2).data);
}

TEST(RdpEpsilon, ZeroRoundsNearZero) {
  RdpResult r = rdp_epsilon(0, 5.0, 1e-5);
  EXPECT_GT(r.epsilon, 0.0);
  EXPECT_LE(r.epsilon, 1e-3);
}

TEST(RdpEpsilon, MatchesDenseGridOracle) {
  RdpResult r = rdp_epsilon(100, 5.0, 1e-5);
  double oracle = dense_grid_epsilon(100, 5.0, 1e-5);
  EXPECT_NEAR(r.epsilon, oracle, 1e-4);
  EXPECT_GT(r.alpha, 1.0);
}

TEST(RdpEpsilon, OracleAgreementAcrossRegimes) {
  // Spot checks spanning low/high composition counts and noise levels,
  // including the sharp-minimum regime (large T, small σ).
  struct Case {
    std::size_t t;
    double sigma, delta;
  };
  for (const Case& c : std::vector<Case>{{1, 2.0, 1e-5},
                                         {530, 30.0, 1e-6},
                                         {5000, 2.0, 1e-7},
                                         {10, 70.0, 1e-5}}) {
    double got = rdp_epsilon(c.t, c.sigma, c.delta).epsilon;
    double oracle = dense_grid_epsilon(c.t, c.sigma, c.delta);
    EXPECT_NEAR(got, oracle, 1e-4) << "T=" << c.t << " sigma=" << c.sigma << " delta=" << c.delta;
  }
}

TEST(RdpEpsilon, DoublingSigmaStrictlyDecreases) {
  double prev = rdp_epsilon(530, 1.0, 1e-5).epsilon;
  for (double sigma = 2.0; sigma <= 64.0; sigma *= 2.0) {
    double cur = rdp_epsilon(530, sigma, 1e-5).epsilon;
    EXPECT_LT(cur, prev) << "sigma=" << sigma;
    prev = cur;
  }
}

TEST(RdpEpsilon, MonotoneInRounds) {
  double prev = 0.0;
  for (std::size_t t : {1u, 10u, 100u, 530u, 5000u}) {
    double cur = rdp_epsilon(t, 5.0, 1e-5).epsilon;
    EXPECT_GT(cur, prev) << "T=" << t;
    prev = cur;
  }
}

TEST(RdpEpsilon, RejectsBadArguments) {
  EXPECT_THROW(rdp_epsilon(10, 0.0, 1e-5), std::invalid_argument);
  EXPECT_THROW(rdp_epsilon(10, -1.0, 1e-5), std::invalid_argument);
  EXPECT_THROW(rdp_epsilon(10, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(rdp_epsilon(10, 1.0, 1.0), std::invalid_argument);
}

TEST(CalibrateSigma, RoundTripsThroughRdp) {
  for (double target : {0.5, 1.0, 8.0}) {
    double sigma = calibrate_sigma(530, target, 1e-5);
    double eps = rdp_epsilon(530, sigma, 1e-5).epsilon;
    EXPECT_LE(eps, target);
    EXPECT_GE(eps, target * (1.0 - 1e-3));
  }
}

TEST(CalibrateSigma, MoreRoundsNeedMoreNoise) {
  double s100 = calibrate_sigma(100, 2.0, 1e-5);
  double s1000 = calibrate_sigma(1000, 2.0, 1e-5);
  EXPECT_GT(s1000, s100);
}

TEST(CalibrateSigma, MatchesOracleInverse) {
  double sigma = calibrate_sigma(530, 1.0, 1e-5);
  double oracle = oracle_inverse_sigma(530, 1.0, 1e-5);
  EXPECT_NEAR(sigma / oracle, 1.0, 0.01);
}

TEST(CalibrateSigma, UnreachableTargetThrows) {
  // At σ = 1e4 a single round still spends more than this.
  EXPECT_THROW(calibrate_sigma(100000000, 1e-9, 1e-5), std::runtime_error);
}

TEST(LabelDp, EpsilonMapping) {
  EXPECT_NEAR(label_dp_epsilon(1.0), 2.828, 5e-4);
  EXPECT_NEAR(label_dp_epsilon(2.0), 1.414, 5e-4);
  EXPECT_NEAR(label_dp_epsilon(1.0), 2.0 * std::sqrt(2.0), 1e-15);
}

TEST(LabelDp, TinyScaleKeepsLabels) {
  const std::size_t n = 10000;
  std::vector<int> labels(n);
  RngStream lab = derive_stream(5, StreamPurpose::kGeneric, 0, 0);
  for (auto& y : labels) y = static_cast<int>(lab.next_below(10));
  RngStream rng = derive_stream(5, StreamPurpose::kLabelDp, 0, 0);
  auto [noisy, eps] = label_dp_randomize(labels, 10, 0.01, rng);
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) same += noisy[i] == labels[i];
  EXPECT_GE(static_cast<double>(same) / n, 0.999);
  EXPECT_NEAR(eps, 2.0 * std::sqrt(2.0) / 0.01, 1e-9);
}

TEST(LabelDp, LargeScaleScramblesLabels) {
  const std::size_t n = 10000;
  std::vector<int> labels(n, 3);
  RngStream rng = derive_stream(6, StreamPurpose::kLabelDp, 0, 0);
  auto [noisy, eps] = label_dp_randomize(labels, 10, 100.0, rng);
  (void)eps;
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) same += noisy[i] == labels[i];
  // With λ = 100 the one-hot signal is negligible; agreement ≈ 1/10.
  EXPECT_LT(static_cast<double>(same) / n, 0.2);
}

TEST(LabelDp, DeterministicPerStream) {
  std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  RngStream r1 = derive_stream(2, StreamPurpose::kLabelDp, 0, 0);
  RngStream r2 = derive_stream(2, StreamPurpose::kLabelDp, 0, 0);
  EXPECT_EQ(label_dp_randomize(labels, 10, 1.0, r1).first,
            label_dp_randomize(labels, 10, 1.0, r2).first);
}

TEST(LabelDp, RejectsBadInput) {
  std::vector<int> labels{0, 12};
  RngStream rng = derive_stream(1, StreamPurpose::kLabelDp, 0, 0);
  EXPECT_THROW(label_dp_randomize(labels, 10, 1.0, rng), std::invalid_argument);
  std::vector<int> ok{0};
  EXPECT_THROW(label_dp_randomize(ok, 10, 0.0, rng), std::invalid_argument);
}

TEST(GlobalEpsilon, MaxAcrossClients) {
  std::vector<PrivacySpend> spends;
  spends.push_back({100, 1.5, 8.0});
  spends.push_back({100, 2.5, 8.0});
  spends.push_back({100, 0.5, 8.0});
  EXPECT_DOUBLE_EQ(global_epsilon(spends), 2.5);
  EXPECT_DOUBLE_EQ(global_epsilon({}), 0.0);
}

}  // namespace
}  // namespace vfl
