#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rsreg/estimation.hpp"

using namespace rsreg;
using namespace rsreg::estimation;

TEST(ClopperPearson, NoSuccesses) {
  EXPECT_EQ(clopper_pearson_lower({0, 10}, {0.05}), 0.0);
  EXPECT_EQ(clopper_pearson_lower({0, 100000}, {0.3}), 0.0);
}

TEST(ClopperPearson, AllSuccessesClosedForm) {
  EXPECT_NEAR(clopper_pearson_lower({10, 10}, {0.05}), oracle::kCP_10_10_a05, 1e-12);
  EXPECT_NEAR(clopper_pearson_lower({10, 10}, {0.05}), std::pow(0.025, 0.1), 1e-12);
  EXPECT_NEAR(clopper_pearson_lower({100, 100}, {0.05}), oracle::kCP_100_100_a05, 1e-12);
}

TEST(ClopperPearson, InteriorAgainstBisectionOracle) {
  EXPECT_NEAR(clopper_pearson_lower({80, 100}, {0.05}), oracle::kCP_80_100_a05, 1e-10);
  for (auto [x, n] : {std::pair{3, 7}, {41, 50}, {8296, 10000}, {1, 1000}}) {
    const double want = oracle::bisect([&](double p) { return oracle::binom_tail(n, x, p); }, 0.0,
                                       1.0, 0.0005);
    EXPECT_NEAR(clopper_pearson_lower({static_cast<std::size_t>(x), static_cast<std::size_t>(n)}, {0.001}),
                want, 1e-10)
        << x << "/" << n;
  }
}

TEST(ClopperPearson, SolvesTailEquation) {
  const double p = clopper_pearson_lower({37, 60}, {0.01});
  EXPECT_NEAR(specfun::binomial_tail(60, 37, p), 0.005, 1e-10);
}

TEST(ClopperPearson, InvalidObservations) {
  EXPECT_THROW(clopper_pearson_lower({11, 10}, {0.05}), DomainError);
  EXPECT_THROW(clopper_pearson_lower({1, 0}, {0.05}), DomainError);
  EXPECT_THROW(clopper_pearson_lower({1, 10}, {0.0}), DomainError);
  EXPECT_THROW(clopper_pearson_lower({1, 10}, {1.0}), DomainError);
}

TEST(ClopperPearson, MonotoneInSuccessesAndAlpha) {
  double prev = -1.0;
  for (std::size_t x = 0; x <= 50; ++x) {
    const double v = clopper_pearson_lower({x, 50}, {0.05});
    EXPECT_GE(v, prev);
    prev = v;
  }
  prev = -1.0;
  for (double a : {1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9}) {
    const double v = clopper_pearson_lower({30, 50}, {a});
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(ClopperPearson, GapClosesWithN) {
  double prev = 0.0;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const auto x = static_cast<std::size_t>(std::ceil(0.8 * n));
    const double v = clopper_pearson_lower({x, n}, {0.05});
    EXPECT_GT(v, prev);
    EXPECT_LT(v, 0.8);
    prev = v;
  }
  EXPECT_GT(prev, 0.79);
}

TEST(ClopperPearson, Coverage) {
  std::mt19937_64 gen(17);
  std::binomial_distribution<int> draw(50, 0.8);
  int covered = 0;
  for (int r = 0; r < 1000; ++r) {
    covered += clopper_pearson_lower({static_cast<std::size_t>(draw(gen)), 50}, {0.05}) <= 0.8;
  }
  EXPECT_GE(covered, 955);
}

TEST(EstimatePa, PerOutputBounds) {
  sampling::SmoothedEval ev;
  ev.n = 100;
  ev.accept_counts = {80, 100, 0};
  const auto pa = estimate_pa(ev, {0.05});
  ASSERT_EQ(pa.size(), 3u);
  EXPECT_NEAR(pa[0], oracle::kCP_80_100_a05, 1e-10);
  EXPECT_NEAR(pa[1], oracle::kCP_100_100_a05, 1e-12);
  EXPECT_EQ(pa[2], 0.0);
}
