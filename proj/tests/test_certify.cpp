#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "rsreg/certify.hpp"

using namespace rsreg;
using namespace rsreg::certify;

namespace {

// scalar geometry: f(x), l, u, l_b, u_b, n
CertRequest geometry(double, double l, double u, double lb, double ub, std::size_t n) {
  CertRequest req;
  req.x = {0.0};
  req.region = AcceptRegion::interval({0.5 * (lb + ub)}, {0.5 * (ub - lb)});
  req.region.lower = {lb};
  req.region.upper = {ub};
  req.bounds = OutputBounds{{l}, {u}};
  req.noise = {0.23, n, 0};
  return req;
}

CertRequest worst_case_geometry() { return geometry(15, 0, 35, 9, 21, 10); }

const Vector kFx{15.0};

}  // namespace

TEST(BaseRadius, Examples) {
  const auto boundary = theorem1_radius(Vector{0.8}, 0.8, 0.23);
  EXPECT_TRUE(boundary.abstain);
  EXPECT_EQ(boundary.per_output_radii[0], 0.0);

  const auto one = theorem1_radius(Vector{0.9}, 0.5, 1.0);
  EXPECT_FALSE(one.abstain);
  EXPECT_NEAR(one.radius, oracle::kPhiInv_0_9, 1e-12);

  const auto two = theorem1_radius(Vector{0.9, 0.95}, 0.8, 0.23);
  EXPECT_NEAR(two.radius, oracle::kRadius_09_095_P08, 1e-12);
  EXPECT_NEAR(two.per_output_radii[1], oracle::kRadius_095_P08, 1e-12);
}

TEST(BaseRadius, AbstainAndUnboundedFlags) {
  const auto zero = theorem1_radius(Vector{0.0, 0.99}, 0.8, 0.23);
  EXPECT_TRUE(zero.abstain);
  EXPECT_EQ(zero.radius, 0.0);
  const auto one = theorem1_radius(Vector{1.0}, 0.8, 0.23);
  EXPECT_FALSE(one.abstain);
  EXPECT_TRUE(one.unbounded);
  EXPECT_TRUE(std::isinf(one.radius));
  const auto mixed = theorem1_radius(Vector{1.0, 0.9}, 0.8, 0.23);
  EXPECT_FALSE(mixed.unbounded);
  EXPECT_NEAR(mixed.radius, oracle::kRadius_09_095_P08, 1e-12);
  EXPECT_THROW(theorem1_radius(Vector{0.9}, 1.0, 0.23), DomainError);
  EXPECT_THROW(theorem1_radius(Vector{0.9}, 0.5, 0.0), DomainError);
}

TEST(BaseRadius, MonotoneAndLinear) {
  double prev = -HUGE_VAL;
  for (double pa = 0.81; pa < 0.999; pa += 0.01) {
    const double r = theorem1_radius(Vector{pa}, 0.8, 0.23).radius;
    EXPECT_GT(r, prev);
    prev = r;
  }
  prev = HUGE_VAL;
  for (double p = 0.5; p < 0.95; p += 0.05) {
    const double r = theorem1_radius(Vector{0.96}, p, 0.23).per_output_radii[0];
    EXPECT_LT(r, prev);
    prev = r;
  }
  const double r1 = theorem1_radius(Vector{0.93}, 0.7, 1.0).radius;
  EXPECT_NEAR(theorem1_radius(Vector{0.93}, 0.7, 3.5).radius, 3.5 * r1, 1e-14);
}

TEST(BoundedOutput, WorstCaseGeometryExample) {
  const auto req = worst_case_geometry();
  const auto args = theorem3_args(kFx, req);
  ASSERT_EQ(args.size(), 1u);
  EXPECT_TRUE(args[0].upper_branch);
  EXPECT_NEAR(args[0].rho, 0.3, 1e-15);
  EXPECT_EQ(args[0].a, 7);
  EXPECT_EQ(args[0].b, 4);
  EXPECT_NEAR(theorem3_lower_bound(kFx, req, Vector{0.9}), oracle::kI_0_9_7_4, 1e-10);
}

TEST(BoundedOutput, TauShiftsRho) {
  auto req = worst_case_geometry();
  req.tau = 2.0;
  const auto a = theorem3_args(kFx, req)[0];
  EXPECT_TRUE(a.upper_branch);
  EXPECT_NEAR(a.rho, 4.0 / 18.0, 1e-15);
  EXPECT_EQ(a.a, 8);
  EXPECT_EQ(a.b, 4);
  EXPECT_NEAR(theorem3_lower_bound(kFx, req, Vector{0.9}), oracle::inc_beta(0.9, 8, 4), 1e-10);
}

TEST(BoundedOutput, LimitsAndMonotonicity) {
  auto req = geometry(15, 0, 35, 9, 15, 10);
  const double collapsed = theorem3_lower_bound(kFx, req, Vector{0.9});
  EXPECT_NEAR(collapsed, std::pow(0.9, 10), 1e-12);
  req = worst_case_geometry();
  EXPECT_NEAR(theorem3_lower_bound(kFx, req, Vector{1.0}), 1.0, 1e-15);
  double prev = 0.0;
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    const double v = theorem3_lower_bound(kFx, req, Vector{p});
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(BoundedOutput, DegenerateGeometry) {
  auto req = geometry(15, 0, 35, 9, 35, 10);
  EXPECT_THROW(theorem3_lower_bound(kFx, req, Vector{0.9}), UndefinedBoundError);
  req = geometry(15, 0, 35, 0, 21, 10);
  EXPECT_THROW(theorem3_lower_bound(kFx, req, Vector{0.9}), UndefinedBoundError);
  req = worst_case_geometry();
  req.tau = 7.0;  // exceeds u_b - f
  EXPECT_THROW(theorem3_lower_bound(kFx, req, Vector{0.9}), DomainError);
  req = worst_case_geometry();
  req.bounds.reset();
  EXPECT_THROW(theorem3_lower_bound(kFx, req, Vector{0.9}), DomainError);
  req = geometry(15, 10, 35, 9, 21, 10);  // l > l_b
  EXPECT_THROW(theorem3_lower_bound(kFx, req, Vector{0.9}), DomainError);
}

TEST(BoundedOutput, BoundHoldsForWorstCasePlacement) {
  // successes at f + tau with probability p, failures at u; n-sample mean
  const auto req = worst_case_geometry();
  const double bound = theorem3_lower_bound(kFx, req, Vector{0.9});
  std::mt19937_64 gen(4);
  std::bernoulli_distribution ok(0.9);
  const int reps = 20000;
  int accepted = 0;
  for (int r = 0; r < reps; ++r) {
    double sum = 0.0;
    for (int i = 0; i < 10; ++i) sum += ok(gen) ? 15.0 : 35.0;
    const double mean = sum / 10.0;
    accepted += 9.0 <= mean && mean <= 21.0;
  }
  const double freq = static_cast<double>(accepted) / reps;
  EXPECT_GE(freq, bound - 3.0 * std::sqrt(bound * (1 - bound) / reps));
}

TEST(Inversion, RoundTrip) {
  const auto req = worst_case_geometry();
  for (double pstar : {0.7, 0.85, 0.93}) {
    const double q = theorem3_lower_bound(kFx, req, Vector{pstar});
    const auto c = smoothed_radius_via_inversion(kFx, req, Vector{0.99}, q);
    ASSERT_TRUE(c.phat);
    EXPECT_NEAR((*c.phat)[0], pstar, 1e-8);
  }
}

TEST(Inversion, WorstCaseExample) {
  const auto req = worst_case_geometry();
  const auto c = smoothed_radius_via_inversion(kFx, req, Vector{0.95}, 0.9);
  EXPECT_NEAR((*c.phat)[0], oracle::kIinv_0_9_7_4, 1e-10);
  EXPECT_FALSE(c.abstain);
  EXPECT_NEAR(c.radius, oracle::kInversionRadius, 1e-9);
  EXPECT_FALSE(c.q_below_half);
}

TEST(Inversion, HighQAbstains) {
  const auto req = worst_case_geometry();
  const auto c = smoothed_radius_via_inversion(kFx, req, Vector{0.95}, 1.0 - 1e-12);
  EXPECT_TRUE(c.abstain);
  EXPECT_THROW(smoothed_radius_via_inversion(kFx, req, Vector{0.95}, 1.0), DomainError);
  EXPECT_TRUE(smoothed_radius_via_inversion(kFx, req, Vector{0.95}, 0.4).q_below_half);
}

TEST(Discounted, ExampleAndZeroBeta) {
  auto req = worst_case_geometry();
  req.beta = 1.5;
  const auto args = discounted_args(kFx, req);
  EXPECT_TRUE(args[0].upper_branch);
  EXPECT_NEAR(args[0].rho, 1.5 * 6.0 / 14.0, 1e-15);
  EXPECT_EQ(args[0].a, 4);
  EXPECT_EQ(args[0].b, 8);
  EXPECT_NEAR(discounted_lower_bound(kFx, req, Vector{0.9}), oracle::kI_0_9_4_8, 1e-10);

  req.beta = 0.0;
  EXPECT_NEAR(discounted_lower_bound(kFx, req, Vector{0.9}), std::pow(0.9, 10), 1e-14);
  EXPECT_NEAR(discounted_lower_bound(kFx, req, Vector{0.9}), oracle::binom_tail(10, 10, 0.9), 1e-14);
}

TEST(Discounted, MonotoneInBetaAndP) {
  auto req = geometry(15, 0, 35, 9, 21, 50);
  req.containment = Containment::clip;
  double prev = 0.0;
  for (double beta = 0.0; beta <= 2.0; beta += 0.1) {
    req.beta = beta;
    const double v = discounted_lower_bound(kFx, req, Vector{0.9});
    EXPECT_GE(v, prev) << beta;
    prev = v;
  }
  req.beta = 1.0;
  prev = 0.0;
  for (double p = 0.0; p <= 1.0; p += 0.02) {
    const double v = discounted_lower_bound(kFx, req, Vector{p});
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Discounted, ContainmentViolationNamesOutput) {
  auto req = worst_case_geometry();
  req.beta = 2.5;  // 21 + 2.5*6 = 36 > 35
  try {
    discounted_lower_bound(kFx, req, Vector{0.9});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("output 0"), std::string::npos) << e.what();
  }
  req.containment = Containment::clip;
  EXPECT_NO_THROW(discounted_lower_bound(kFx, req, Vector{0.9}));
  const auto region = discounted_region(kFx, req);
  EXPECT_EQ(region.upper[0], 35.0);
  EXPECT_EQ(region.lower[0], 0.0);
}

TEST(Discounted, Region) {
  auto req = worst_case_geometry();
  req.beta = 1.5;
  const auto region = discounted_region(kFx, req);
  EXPECT_DOUBLE_EQ(region.lower[0], 0.0);
  EXPECT_DOUBLE_EQ(region.upper[0], 30.0);
}

TEST(Discounted, BoundHoldsWithMassAtBoundary) {
  auto req = worst_case_geometry();
  req.beta = 1.5;
  const double bound = discounted_lower_bound(kFx, req, Vector{0.9});
  const auto region = discounted_region(kFx, req);
  std::mt19937_64 gen(6);
  std::bernoulli_distribution ok(0.9);
  const int reps = 20000;
  int accepted = 0;
  for (int r = 0; r < reps; ++r) {
    double sum = 0.0;
    for (int i = 0; i < 10; ++i) sum += ok(gen) ? 21.0 : 35.0;
    const double mean = sum / 10.0;
    accepted += region.lower[0] <= mean && mean <= region.upper[0];
  }
  const double freq = static_cast<double>(accepted) / reps;
  EXPECT_GE(freq, bound - 3.0 * std::sqrt(bound * (1 - bound) / reps) - 1e-12);
}

TEST(Asymptotic, Examples) {
  sampling::SmoothedEval ev;
  ev.n = 100;
  ev.covariance_defined = true;
  ev.mean = {0.0};
  ev.covariance = Eigen::MatrixXd::Identity(1, 1);
  auto region = AcceptRegion::interval({0.0}, {0.2});
  EXPECT_NEAR(asymptotic_accept_prob(ev, region).value, oracle::kPhi2_minus_Phim2, 1e-12);
  ev.mean = {1.0};
  EXPECT_LT(asymptotic_accept_prob(ev, region).value, 1e-15);

  ev.mean = {0.0, 0.1};
  ev.covariance = Eigen::MatrixXd::Zero(2, 2);
  ev.covariance(0, 0) = 1.0;
  ev.covariance(1, 1) = 4.0;
  region = AcceptRegion::interval({0.0, 0.0}, {0.2, 0.3});
  const double p1 = oracle::normal_cdf(2.0) - oracle::normal_cdf(-2.0);
  const double p2 = oracle::normal_cdf(1.0) - oracle::normal_cdf(-2.0);
  EXPECT_NEAR(asymptotic_accept_prob(ev, region).value, p1 * p2, 1e-12);
}

TEST(Asymptotic, DegenerateAndInvalid) {
  sampling::SmoothedEval ev;
  ev.n = 10;
  ev.covariance_defined = true;
  ev.mean = {0.1};
  ev.covariance = Eigen::MatrixXd::Zero(1, 1);
  const auto r = asymptotic_accept_prob(ev, AcceptRegion::interval({0.0}, {1.0}));
  EXPECT_EQ(r.value, 1.0);
  EXPECT_TRUE(r.degenerate);
  ev.n = 1;
  ev.covariance_defined = false;
  EXPECT_THROW(asymptotic_accept_prob(ev, AcceptRegion::interval({0.0}, {1.0})), DomainError);
}

// ---------------------------------------------------------------------------

TEST(CertifyPoint, ConstantInsideRegion) {
  const models::ConstantModel m(2, {5.0});
  CertRequest req;
  req.x = {0.0, 0.0};
  req.region = AcceptRegion::interval({5.0}, {1.0});
  req.noise = {0.23, 2000, 3};
  req.conf.alpha = 0.01;
  const auto c = certify_point(m, req);
  const double pa = std::pow(0.005, 1.0 / 2000);
  EXPECT_NEAR(c.pa_lower[0], pa, 1e-12);
  EXPECT_NEAR(c.radius, 0.23 * (specfun::std_normal_quantile(pa) - oracle::kPhiInv_0_8), 1e-10);
  EXPECT_EQ(c.accept_counts[0], 2000u);
  EXPECT_EQ(c.provenance.n, 2000u);
  EXPECT_EQ(c.provenance.seed, 3u);
  EXPECT_EQ(c.provenance.alpha, 0.01);
  EXPECT_EQ(c.provenance.sigma, 0.23);
}

TEST(CertifyPoint, ConstantOutsideRegionAbstains) {
  const models::ConstantModel m(2, {9.0});
  CertRequest req;
  req.x = {0.0, 0.0};
  req.region = AcceptRegion::interval({5.0}, {1.0});
  req.noise = {0.23, 500, 3};
  const auto c = certify_point(m, req);
  EXPECT_EQ(c.pa_lower[0], 0.0);
  EXPECT_TRUE(c.abstain);
}

TEST(CertifyPoint, SyntheticAllModes) {
  const auto m = models::make_model(models::clip_wrap({}, {{0.0}, {35.0}}));
  CertRequest req;
  req.x = {2.0, 2.0};
  req.region = AcceptRegion::interval(m->evaluate(req.x), {6.0});
  req.bounds = OutputBounds{{0.0}, {35.0}};
  req.noise = {0.23, 10000, 1};
  req.beta = 1.5;
  req.containment = Containment::clip;
  for (CertMode mode : {CertMode::base, CertMode::smoothed_asymptotic, CertMode::smoothed_discounted}) {
    req.mode = mode;
    const auto c = certify_point(*m, req);
    EXPECT_EQ(c.mode, mode);
    EXPECT_FALSE(c.abstain) << to_string(mode);
    EXPECT_GT(c.radius, 0.0);
    EXPECT_EQ(c.per_output_radii.size(), 1u);
    if (mode != CertMode::base) {
      ASSERT_TRUE(c.lower_bound_prob);
      EXPECT_GE(*c.lower_bound_prob, 0.0);
      EXPECT_LE(*c.lower_bound_prob, 1.0);
    }
    EXPECT_EQ(c.certified_region.has_value(), mode == CertMode::smoothed_discounted);
    const auto again = certify_point(*m, req);
    EXPECT_EQ(again.radius, c.radius);
  }
}

TEST(CertifyPoint, RequestValidation) {
  const auto m = models::make_model({});
  CertRequest req;
  req.x = {2.0};
  req.region = AcceptRegion::interval({19.0}, {6.0});
  EXPECT_THROW(certify_point(*m, req), DomainError);
  req.x = {2.0, 2.0};
  req.target_p = 1.0;
  EXPECT_THROW(certify_point(*m, req), DomainError);
  req.target_p = 0.8;
  req.mode = CertMode::smoothed_asymptotic;
  EXPECT_THROW(certify_point(*m, req), DomainError);  // no bounds
}

TEST(ParseMode, Names) {
  EXPECT_EQ(parse_mode("base"), CertMode::base);
  EXPECT_EQ(parse_mode("smoothed-asymptotic"), CertMode::smoothed_asymptotic);
  EXPECT_EQ(parse_mode("smoothed-discounted"), CertMode::smoothed_discounted);
  EXPECT_THROW(parse_mode("nope"), DomainError);
  EXPECT_STREQ(to_string(CertMode::smoothed_discounted), "smoothed-discounted");
}
