#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "pspider/errors.hpp"
#include "pspider/linalg.hpp"
#include "pspider/polya_gamma.hpp"
#include "pspider/quadrature.hpp"
#include "pspider/rng.hpp"

using namespace pspider;
using namespace pspider::num;

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("derive_stream: equal keys replay, uniforms in [0,1)") {
  auto a = derive_stream(42, 3, 7, 11, StreamRole::kInnerNew);
  auto b = derive_stream(42, 3, 7, 11, StreamRole::kInnerNew);
  for (int j = 0; j < 1000; ++j) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("derive_stream: adjacent keys are uncorrelated") {
  auto a = derive_stream(5, 1, 0, 100, StreamRole::kRefresh);
  auto b = derive_stream(5, 1, 0, 101, StreamRole::kRefresh);
  const int n = 10000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int j = 0; j < n; ++j) {
    const double x = a.uniform(), y = b.uniform();
    sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("derive_stream: distinct coordinates give distinct streams; ranges enforced") {
  std::set<std::uint64_t> firsts;
  for (long t = 0; t < 3; ++t)
    for (long k = -1; k < 3; ++k)
      for (std::uint64_t i = 0; i < 3; ++i)
        for (auto role : {StreamRole::kInnerNew, StreamRole::kInnerOld, StreamRole::kRefresh}) {
          firsts.insert(derive_stream(9, t, k, i, role).next_u64());
        }
  CHECK(firsts.size() == 3 * 4 * 3 * 3);
  CHECK_THROWS_AS(derive_stream(1, 4096, 0, 0, StreamRole::kBatch), ConfigError);
  CHECK_THROWS_AS(derive_stream(1, 0, -2, 0, StreamRole::kBatch), ConfigError);
}

TEST_CASE("RngStream::below is unbiased over a small range") {
  auto s = derive_stream(3, 0, 0, 0, StreamRole::kAuxiliary);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int j = 0; j < n; ++j) ++counts[s.below(7)];
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5 * std::sqrt(n / 7.0));
}

TEST_CASE("cholesky examples") {
  CHECK(cholesky(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  Eigen::MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  const Eigen::MatrixXd l = cholesky(a);
  CHECK((l * l.transpose() - a).norm() <= 1e-12);
  CHECK(l(0, 1) == 0.0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  try {
    cholesky(bad);
    FAIL("expected failure");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 1);
  }
}

TEST_CASE("solve_spd") {
  Eigen::VectorXd rhs(2);
  rhs << 3, 2;
  CHECK(solve_spd(cholesky(Eigen::MatrixXd::Identity(2, 2)), rhs).isApprox(rhs));
  Eigen::MatrixXd d(2, 2);
  d << 3, 0, 0, 2;
  const Eigen::VectorXd x = solve_spd(cholesky(d), rhs);
  CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x(1) == doctest::Approx(1.0).epsilon(1e-15));

  auto s = derive_stream(1, 0, 0, 0, StreamRole::kAuxiliary);
  Eigen::MatrixXd m(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = s.normal();
  const Eigen::MatrixXd spd = m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(5, 5);
  Eigen::VectorXd b(5);
  for (int i = 0; i < 5; ++i) b(i) = s.normal();
  const Eigen::VectorXd y = solve_spd(cholesky(spd), b);
  CHECK((spd * y - b).norm() <= 1e-8 * b.norm());
  CHECK_THROWS_AS(solve_spd(cholesky(spd), Eigen::VectorXd::Ones(3)), DimensionError);
}

TEST_CASE("min_eigenvalue_of_inverse") {
  Eigen::MatrixXd d(2, 2);
  d << 3, 0, 0, 2;
  CHECK(min_eigenvalue_of_inverse(d) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK(min_eigenvalue_of_inverse(2.5 * Eigen::MatrixXd::Identity(4, 4)) ==
        doctest::Approx(0.4).epsilon(1e-10));

  // Rayleigh bound: lambda_min(Omega) <= u^T Omega u for unit u.
  auto s = derive_stream(2, 0, 0, 0, StreamRole::kAuxiliary);
  Eigen::MatrixXd m(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = s.normal();
  const Eigen::MatrixXd a = m * m.transpose() + Eigen::MatrixXd::Identity(4, 4);
  const double lmin = min_eigenvalue_of_inverse(a);
  const Eigen::MatrixXd omega = a.inverse();
  for (int r = 0; r < 100; ++r) {
    Eigen::VectorXd u(4);
    for (int j = 0; j < 4; ++j) u(j) = s.normal();
    u.normalize();
    CHECK(lmin <= u.dot(omega * u) * (1 + 1e-10));
  }
}

TEST_CASE("gauss_hermite rule") {
  CHECK_THROWS_AS(gauss_hermite(1), ConfigError);
  for (int order : {2, 5, 20, 128}) {
    const auto rule = gauss_hermite(order);
    REQUIRE(rule.order() == order);
    double wsum = 0.0;
    for (double w : rule.weights) {
      CHECK(w > 0.0);
      wsum += w;
    }
    CHECK(wsum == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
    for (int j = 0; j < order; ++j) CHECK(rule.nodes[j] == -rule.nodes[order - 1 - j]);
  }
  const auto rule = gauss_hermite(128);
  const double sd = std::sqrt(0.1);
  CHECK(std::abs(gaussian_expectation(rule, 0.0, sd, [](double z) { return z; })) < 1e-15);
  CHECK(gaussian_expectation(rule, 0.0, sd, [](double z) { return z * z; }) ==
        doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("gauss_hermite is exact to degree 2n-1") {
  // E[Z^{2k}] = (2k-1)!! for Z ~ N(0, 1).
  for (int order : {3, 6, 10}) {
    const auto rule = gauss_hermite(order);
    for (int deg = 0; deg <= 2 * order - 1; ++deg) {
      double exact = 0.0;
      if (deg % 2 == 0) {
        exact = 1.0;
        for (int j = deg - 1; j > 0; j -= 2) exact *= j;
      }
      const double got =
          gaussian_expectation(rule, 0.0, 1.0, [deg](double z) { return std::pow(z, deg); });
      // odd degrees cancel between +/- nodes; judge them on the scale of E|Z|^deg
      const double scale =
          gaussian_expectation(rule, 0.0, 1.0, [deg](double z) { return std::pow(std::abs(z), deg); });
      CHECK(std::abs(got - exact) <= 1e-11 * scale);
    }
  }
}

namespace {

struct Mv {
  double mean, var, se_mean, se_var;
};

template <class Draw>
Mv sample_moments(int n, Draw draw) {
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int j = 0; j < n; ++j) {
    const double x = draw();
    s1 += x, s2 += x * x, s3 += x * x * x, s4 += x * x * x * x;
  }
  const double m = s1 / n;
  const double v = s2 / n - m * m;
  const double m4 = s4 / n - 4 * m * s3 / n + 6 * m * m * s2 / n - 3 * m * m * m * m;
  return {m, v, std::sqrt(v / n), std::sqrt((m4 - v * v) / n)};
}

}  // namespace

TEST_CASE("PG(1, c) moments match the series oracle") {
  for (double c : {0.0, 2.0}) {
    auto s = derive_stream(11, 0, 0, static_cast<std::uint64_t>(c), StreamRole::kAuxiliary);
    bool positive = true;
    const auto mv = sample_moments(1000000, [&] {
      const double x = sample_pg1(c, s);
      positive &= x > 0.0;
      return x;
    });
    const auto [mean, var] = oracle::pg1_mean_var(c);
    CHECK(positive);
    CHECK(std::abs(mv.mean - mean) <= 3 * mv.se_mean);
    CHECK(std::abs(mv.var - var) <= 5 * mv.se_var);
  }
  // The oracle itself agrees with the closed forms 1/4, tanh(1)/4 and 1/24.
  CHECK(oracle::pg1_mean_var(0.0).first == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(oracle::pg1_mean_var(2.0).first == doctest::Approx(std::tanh(1.0) / 4.0).epsilon(1e-6));
  CHECK(oracle::pg1_mean_var(0.0).second == doctest::Approx(1.0 / 24.0).epsilon(1e-6));
}

TEST_CASE("truncated PG sampler agrees with the exact sampler in mean") {
  auto s = derive_stream(12, 0, 0, 0, StreamRole::kAuxiliary);
  const auto mv = sample_moments(200000, [&] { return sample_pg1_truncated(3.0, s); });
  CHECK(std::abs(mv.mean - oracle::pg1_mean_var(3.0).first) <= 4 * mv.se_mean);
}

namespace {

const PosteriorParams kInstances[] = {
    {1.3, 1.0, 0.2, 0.1},
    {2.5, -1.0, 0.6, 0.1},
    {0.8, 1.0, -1.0, 0.5},
};

}  // namespace

TEST_CASE("one Gibbs sweep preserves the posterior's first two moments") {
  int idx = 0;
  for (const auto& p : kInstances) {
    const auto exact = oracle::posterior_moments(p.c, p.y, p.m, p.sigma2);
    // 200 strata, 500 jittered starts in each: 1e5 chains drawn from the
    // posterior by stratified inversion.
    auto jitter = derive_stream(77, 0, 0, idx, StreamRole::kAuxiliary);
    std::vector<double> probs;
    for (int s = 0; s < 200; ++s)
      for (int r = 0; r < 500; ++r) probs.push_back((s + jitter.uniform_open()) / 200.0);
    const auto starts = oracle::posterior_quantiles(p.c, p.y, p.m, p.sigma2, probs);
    const auto mom = one_step_moments(p, starts, 1, 1000 + idx);
    CHECK(mom.chains == 100000);
    CHECK(std::abs(mom.mean - exact.mean) <= 5 * mom.mean_se);
    CHECK(std::abs(mom.second - exact.second) <= 5 * mom.second_se);
    ++idx;
  }
}

TEST_CASE("Gibbs long-run mean matches the quadrature-free oracle") {
  const auto& p = kInstances[0];
  const auto exact = oracle::posterior_moments(p.c, p.y, p.m, p.sigma2);
  auto s = derive_stream(8, 0, 0, 0, StreamRole::kAuxiliary);
  // batch means for the autocorrelated chain
  const int batches = 100, per = 1000;
  GibbsState st{gibbs_start(p), p};
  for (int w = 0; w < 10; ++w) st = gibbs_step(st, s);
  double sum = 0, sumsq = 0;
  for (int b = 0; b < batches; ++b) {
    double acc = 0;
    for (int r = 0; r < per; ++r) {
      st = gibbs_step(st, s);
      acc += st.z;
    }
    acc /= per;
    sum += acc, sumsq += acc * acc;
  }
  const double mean = sum / batches;
  const double se = std::sqrt((sumsq / batches - mean * mean) / (batches - 1));
  CHECK(std::abs(mean - exact.mean) <= 5 * se);
}

TEST_CASE("Gibbs chain with c -> 0 has Gaussian moments") {
  const PosteriorParams p{1e-9, 1.0, 0.7, 0.3};
  auto s = derive_stream(4, 0, 0, 0, StreamRole::kAuxiliary);
  GibbsState st{gibbs_start(p), p};
  const auto mv = sample_moments(200000, [&] {
    st = gibbs_step(st, s);
    return st.z;
  });
  CHECK(std::abs(mv.mean - 0.7) <= 5 * mv.se_mean);
  CHECK(std::abs(mv.var - 0.3) <= 5 * mv.se_var);
}

TEST_CASE("Gibbs steps replay from equal streams; iid sampler targets the posterior") {
  const auto& p = kInstances[1];
  auto a = derive_stream(3, 1, 1, 1, StreamRole::kInnerNew);
  auto b = derive_stream(3, 1, 1, 1, StreamRole::kInnerNew);
  GibbsState x{0.3, p}, y{0.3, p};
  for (int j = 0; j < 50; ++j) {
    x = gibbs_step(x, a);
    y = gibbs_step(y, b);
    CHECK(x.z == y.z);
  }
  const auto exact = oracle::posterior_moments(p.c, p.y, p.m, p.sigma2);
  auto s = derive_stream(6, 0, 0, 0, StreamRole::kAuxiliary);
  const auto mv = sample_moments(200000, [&] { return sample_posterior_iid(p, s); });
  CHECK(std::abs(mv.mean - exact.mean) <= 5 * mv.se_mean);
  CHECK(std::abs(mv.var + mv.mean * mv.mean - exact.second) <= 5 * (mv.se_var + 2 * std::abs(mv.mean) * mv.se_mean));
}
