#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shp/stochastic.hpp"
#include "support.hpp"

using namespace shp;
using shp::test::kKs001;
using Eigen::VectorXd;

namespace {

double direct_f(double d, double a) {
  return std::pow(std::sin(a * d), a / (1 - a)) * std::sin((1 - a) * d) / std::pow(std::sin(d), 1 / (1 - a));
}

VectorXd delta_prior_draws(double alpha, int n, std::uint64_t seed) {
  RngStream rng(seed);
  VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = sample_delta_prior(alpha, rng);
  return out;
}

}  // namespace

TEST_CASE("rng streams are reproducible and substreams differ") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  RngStream s0 = RngStream(42).substream(0);
  RngStream s1 = RngStream(42).substream(1);
  CHECK(s0.uniform() != s1.uniform());
  RngStream parent(42);
  (void)parent.substream(3);
  CHECK(parent.uniform() == RngStream(42).uniform());
}

TEST_CASE("gamma variates have the requested mean") {
  RngStream rng(3);
  VectorXd x(200000);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.gamma(2.5, 4.0);
  CHECK(x.mean() == doctest::Approx(0.625).epsilon(0.01));
}

TEST_CASE("slice_sample: standard normal chain") {
  RngStream rng(1);
  auto logd = [](double x) { return -0.5 * x * x; };
  const int n = 100000;
  VectorXd chain(n);
  double x = 0.0;
  for (int i = 0; i < n; ++i) chain(i) = x = slice_sample(logd, -10, 10, x, rng);
  CHECK(std::abs(chain.mean()) < 0.02);
  CHECK(test::variance(chain) == doctest::Approx(1.0).epsilon(0.03));

  VectorXd thinned(n / 10);
  for (int i = 0; i < n / 10; ++i) thinned(i) = chain(10 * i);
  CHECK(test::ks_statistic(thinned, test::normal_cdf) < kKs001 / std::sqrt(thinned.size()));
}

TEST_CASE("slice_sample: flat target is uniform") {
  RngStream rng(2);
  const int n = 100000;
  VectorXd draws(n);
  for (int i = 0; i < n; ++i) draws(i) = slice_sample([](double) { return 0.0; }, 0.0, 1.0, 0.5, rng);
  const double d = test::ks_statistic(draws, [](double u) { return std::clamp(u, 0.0, 1.0); });
  CHECK(d < 0.01);
}

TEST_CASE("slice_sample: argument errors") {
  RngStream rng(1);
  auto flat = [](double) { return 0.0; };
  CHECK_THROWS_AS(slice_sample(flat, 1.0, 1.0, 1.0, rng), InvalidInput);
  CHECK_THROWS_AS(slice_sample(flat, 0.0, 1.0, 2.0, rng), InvalidInput);
  CHECK_THROWS_AS(slice_sample([](double) { return -HUGE_VAL; }, 0.0, 1.0, 0.5, rng), InvalidInput);
}

TEST_CASE("slice_sample: iteration cap surfaces as a sampler error") {
  RngStream rng(1);
  // Every proposal lies below the slice level.
  int calls = 0;
  auto spike = [&calls](double) { return calls++ == 0 ? 0.0 : -1e300; };
  CHECK_THROWS_AS(slice_sample(spike, 0.0, 1.0, 0.5, rng), SamplerError);
}

TEST_CASE("tilted_stable_f values") {
  CHECK(tilted_stable_f(std::numbers::pi / 2, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tilted_stable_f(1e-9, 0.5) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK_THROWS_AS(tilted_stable_f(std::numbers::pi, 0.5), DomainError);
  CHECK_THROWS_AS(tilted_stable_f(-0.1, 0.5), DomainError);
  CHECK_THROWS_AS(tilted_stable_f(1.0, 1.0), DomainError);
}

TEST_CASE("tilted_stable_f: half-stable closed form") {
  for (double d = 0.05; d < std::numbers::pi - 0.05; d += 0.1) {
    const double c = std::cos(d / 2);
    CHECK(tilted_stable_f(d, 0.5) == doctest::Approx(1.0 / (4 * c * c)).epsilon(1e-12));
  }
}

TEST_CASE("tilted_stable_f: log-space agrees with direct evaluation") {
  double worst = 0.0;
  for (int k = 1; k <= 9; ++k) {
    const double a = 0.1 * k;
    for (double d = 0.05; d <= std::numbers::pi - 0.05; d += 0.01) {
      const double direct = direct_f(d, a);
      if (!std::isfinite(direct) || direct == 0.0) continue;
      worst = std::max(worst, std::abs(tilted_stable_f(d, a) / direct - 1.0));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("tilted_stable_f increases toward pi") {
  for (double a : {0.2, 0.5, 0.8}) {
    double prev = 0.0;
    for (double d = 0.01; d < std::numbers::pi - 0.01; d += 0.01) {
      const double f = tilted_stable_f(d, a);
      CHECK(f > 0.0);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("sample_delta_prior: support, shape and repeatability") {
  const VectorXd d = delta_prior_draws(0.5, 100000, 11);
  CHECK(d.minCoeff() > 0.0);
  CHECK(d.maxCoeff() < std::numbers::pi);
  // Density f^{-1/2} = 2 cos(d/2) decreases toward pi.
  std::array<int, 4> counts{};
  for (Eigen::Index i = 0; i < d.size(); ++i) ++counts[std::min(3, static_cast<int>(4 * d(i) / std::numbers::pi))];
  CHECK(counts[0] > counts[1]);
  CHECK(counts[1] > counts[2]);
  CHECK(counts[2] > counts[3]);
  // Oracle CDF for alpha = 1/2: F(d) = sin(d/2).
  CHECK(test::ks_statistic(d, [](double x) { return std::sin(x / 2); }) < kKs001 / std::sqrt(d.size()) * 1.5);

  RngStream a(5);
  RngStream b(5);
  CHECK(sample_delta_prior(0.3, a) == sample_delta_prior(0.3, b));
  RngStream bad(1);
  CHECK_THROWS_AS(sample_delta_prior(1.2, bad), DomainError);
}

TEST_CASE("sample_tilted_stable_scale: unit second moment") {
  for (double alpha : {0.25, 0.325, 0.39, 0.5, 0.875}) {
    RngStream rng(100 + static_cast<std::uint64_t>(alpha * 1000));
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += sample_tilted_stable_scale(alpha, rng).s2;
    INFO("alpha = " << alpha);
    CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("sample_tilted_stable_scale: q = 1 gives Laplace margins") {
  RngStream rng(7);
  const int n = 1000000;
  VectorXd beta(n);
  for (int i = 0; i < n; ++i) beta(i) = std::sqrt(sample_tilted_stable_scale(0.5, rng).s2) * rng.normal();
  CHECK(test::ks_statistic(beta, test::laplace_cdf) < 0.005);
}

TEST_CASE("sample_tilted_stable_scale: xi reproduces s2") {
  RngStream rng(8);
  for (double alpha : {0.2, 0.5, 0.9}) {
    for (int i = 0; i < 100; ++i) {
      const TiltedStableDraw d = sample_tilted_stable_scale(alpha, rng);
      CHECK(d.s2 > 0.0);
      CHECK(d.delta > 0.0);
      CHECK(d.delta < std::numbers::pi);
      CHECK(tilted_stable_s2_from_xi(d.xi, alpha) == doctest::Approx(d.s2).epsilon(1e-12));
      CHECK(tilted_stable_xi_from_s2(d.s2, alpha) == doctest::Approx(d.xi).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample_delta_conditional: tilting by xi") {
  const int n = 100000;
  const VectorXd prior = delta_prior_draws(0.5, n, 21);

  auto chain = [&](double xi, std::uint64_t seed) {
    RngStream rng(seed);
    VectorXd out(n);
    double d = std::numbers::pi / 2;
    for (int i = 0; i < n; ++i) out(i) = d = sample_delta_conditional(xi, 0.5, d, rng);
    return out;
  };

  // xi -> 0: target ∝ f, which increases in delta; its CDF lies below the prior's.
  const VectorXd small = chain(1e-8, 22);
  for (double t : {0.5, 1.0, 1.5, 2.0, 2.5}) {
    const double f_small = (small.array() <= t).cast<double>().mean();
    const double f_prior = (prior.array() <= t).cast<double>().mean();
    CHECK(f_small < f_prior);
  }

  VectorXd big = chain(100.0, 23);
  VectorXd sorted_prior = prior;
  std::sort(big.data(), big.data() + big.size());
  std::sort(sorted_prior.data(), sorted_prior.data() + sorted_prior.size());
  CHECK(big(static_cast<Eigen::Index>(0.99 * n)) < sorted_prior(n / 2));

  RngStream a(9);
  RngStream b(9);
  CHECK(sample_delta_conditional(2.0, 0.4, 1.0, a) == sample_delta_conditional(2.0, 0.4, 1.0, b));
}

TEST_CASE("sample_polya_gamma: means") {
  const int n = 1000000;
  RngStream rng(31);
  double s0 = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    s0 += sample_polya_gamma(1.0, 0.0, rng);
    s2 += sample_polya_gamma(1.0, 2.0, rng);
  }
  CHECK(s0 / n == doctest::Approx(0.25).epsilon(0.01));
  CHECK(s2 / n == doctest::Approx(std::tanh(1.0) / 4.0).epsilon(0.01));

  RngStream r2(32);
  double s3 = 0.0;
  for (int i = 0; i < 100000; ++i) s3 += sample_polya_gamma(3.0, 1.0, r2);
  CHECK(s3 / 100000 == doctest::Approx(3.0 * std::tanh(0.5) / 2.0).epsilon(0.02));

  CHECK_THROWS_AS(sample_polya_gamma(0.0, 0.0, rng), DomainError);
}
