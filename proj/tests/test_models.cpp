#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "rsreg/models.hpp"

using namespace rsreg;
using namespace rsreg::models;

namespace {

std::string mock(const std::string& mode) { return std::string(RSREG_MOCK_REGRESSOR) + " " + mode; }

ModelSpec linear_spec(std::size_t d, std::size_t t, std::vector<double> params) {
  ModelSpec s;
  s.kind = ModelKind::linear;
  s.input_dim = d;
  s.output_dim = t;
  s.parameters = std::move(params);
  return s;
}

}  // namespace

TEST(SyntheticSine, KnownValues) {
  const auto m = make_model({});
  EXPECT_EQ(m->evaluate(Vector{0.0, 0.0}), Vector{19.0});
  EXPECT_NEAR(m->evaluate(Vector{std::numbers::pi / 4, 2.0})[0], 25.0, 1e-14);
  EXPECT_EQ(m->input_dim(), 2u);
  EXPECT_EQ(m->output_dim(), 1u);
}

TEST(SyntheticSine, PureFunction) {
  const auto m = make_model({});
  const Vector x{1.234, -0.75};
  EXPECT_EQ(m->evaluate(x), m->evaluate(x));
}

TEST(SyntheticSine, CustomParameters) {
  ModelSpec s;
  s.parameters = {2.0, 1.0, 0.0, 1.0};
  const auto m = make_model(s);
  EXPECT_NEAR(m->evaluate(Vector{std::numbers::pi / 2, 3.0})[0], 2.0 + 9.0 + 1.0, 1e-14);
  s.parameters = {1.0};
  EXPECT_THROW(make_model(s), DomainError);
}

TEST(LinearModel, MatrixProduct) {
  const auto m = make_model(linear_spec(3, 2, {1, 2, 3, -1, 0, 4, 0.5, -2}));
  EXPECT_EQ(m->evaluate(Vector{1.0, 1.0, 2.0}), (Vector{1 + 2 + 6 + 0.5, -1 + 0 + 8 - 2}));
  EXPECT_THROW(make_model(linear_spec(3, 2, {1, 2, 3})), DomainError);
}

TEST(ConstantModel, ReturnsValue) {
  ModelSpec s;
  s.kind = ModelKind::constant;
  s.input_dim = 5;
  s.output_dim = 2;
  s.parameters = {3.0, -4.0};
  const auto m = make_model(s);
  EXPECT_EQ(m->evaluate(Vector(5, 9.0)), (Vector{3.0, -4.0}));
}

TEST(Model, DimensionMismatch) {
  const auto m = make_model({});
  EXPECT_THROW(m->evaluate(Vector{1.0, 2.0, 3.0}), DomainError);
  const std::vector<Vector> xs{{0.0, 0.0}, {1.0}};
  try {
    m->batch_evaluate(xs);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("batch index 1"), std::string::npos) << e.what();
  }
}

TEST(ClipWrap, ClampsOutputs) {
  ModelSpec s;
  s.kind = ModelKind::constant;
  s.input_dim = 1;
  s.output_dim = 3;
  s.parameters = {40.0, -3.0, 19.0};
  const auto m = make_model(clip_wrap(s, {Vector(3, 0.0), Vector(3, 35.0)}));
  EXPECT_EQ(m->evaluate(Vector{0.0}), (Vector{35.0, 0.0, 19.0}));
}

TEST(ClipWrap, FuzzStaysInBounds) {
  const OutputBounds b{{-1.0, 2.0}, {1.0, 2.5}};
  const auto m = make_model(clip_wrap(linear_spec(2, 2, {30, -7, 4, 11}), b));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const auto y = m->evaluate(Vector{g(gen), g(gen)});
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_LE(b.lower[k], y[k]);
      EXPECT_LE(y[k], b.upper[k]);
    }
  }
}

TEST(ClipWrap, RejectsBadBounds) {
  EXPECT_THROW(clip_wrap(linear_spec(1, 1, {1.0}), {{2.0}, {1.0}}), DomainError);
  EXPECT_THROW(clip_wrap(linear_spec(1, 1, {1.0}), {{0.0, 0.0}, {1.0, 1.0}}), DomainError);
}

TEST(BatchEvaluate, MatchesSingleCalls) {
  const auto m = make_model({});
  EXPECT_TRUE(m->batch_evaluate({}).empty());
  const std::vector<Vector> one{{0.5, 0.25}};
  EXPECT_EQ(m->batch_evaluate(one), std::vector<Vector>{m->evaluate(one[0])});
  const std::vector<Vector> xs{{0.0, 0.0}, {1.0, 2.0}, {-3.0, 0.5}};
  const auto ys = m->batch_evaluate(xs);
  ASSERT_EQ(ys.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ys[i], m->evaluate(xs[i]));
}

TEST(MakeModel, SubprocessNeedsCommand) {
  ModelSpec s;
  s.kind = ModelKind::subprocess;
  EXPECT_THROW(make_model(s), DomainError);
}

// ---------------------------------------------------------------------------
// Subprocess adapter against the mock regressor.

ModelSpec sub_spec(const std::string& mode, int timeout_ms = 5000) {
  ModelSpec s;
  s.kind = ModelKind::subprocess;
  s.input_dim = 4;
  s.output_dim = 3;
  s.command = mock(mode);
  s.timeout = std::chrono::milliseconds(timeout_ms);
  return s;
}

TEST(Subprocess, HandshakeAndReplies) {
  const auto m = make_model(sub_spec("linear-bounded"));
  EXPECT_EQ(m->input_dim(), 4u);
  EXPECT_EQ(m->output_dim(), 3u);
  EXPECT_FALSE(m->concurrent());
  EXPECT_EQ(m->evaluate(Vector{0, 0, 0, 0}), (Vector{10, 20, 30}));
  EXPECT_EQ(m->evaluate(Vector{1, 2, 3, 4}), (Vector{10 + 1 + 1 - 2, 20 + 2 + 3 + 2, 30 + 0.5 - 2 + 1.5 + 4}));
  EXPECT_EQ(m->evaluate(Vector{1000, 0, 0, 0}), (Vector{85, 20, 85}));
}

TEST(Subprocess, BatchMatchesSingles) {
  const auto m = make_model(sub_spec("linear-bounded"));
  std::vector<Vector> xs;
  for (int i = 0; i < 300; ++i) xs.push_back({0.1 * i, -0.05 * i, 1.0 / (i + 1), 0.3});
  const auto ys = m->batch_evaluate(xs);
  for (std::size_t i = 0; i < xs.size(); i += 37) EXPECT_EQ(ys[i], m->evaluate(xs[i]));
}

TEST(Subprocess, DimensionsFromHandshakeMustMatchConfig) {
  auto s = sub_spec("linear-bounded");
  s.output_dim = 2;
  EXPECT_THROW(make_model(s), TransportError);
}

TEST(Subprocess, TimeoutFailsLoudly) {
  const auto m = make_model(sub_spec("hang", 300));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(m->evaluate(Vector{0, 0, 0, 0}), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
  EXPECT_THROW(m->evaluate(Vector{0, 0, 0, 0}), TransportError);
}

TEST(Subprocess, GarbageReply) {
  const auto m = make_model(sub_spec("garbage"));
  EXPECT_THROW(m->evaluate(Vector{0, 0, 0, 0}), TransportError);
}

TEST(Subprocess, WrongIdReply) {
  const auto m = make_model(sub_spec("wrong-id"));
  EXPECT_THROW(m->evaluate(Vector{0, 0, 0, 0}), TransportError);
}

TEST(Subprocess, ChildExitCarriesStderr) {
  const auto m = make_model(sub_spec("exit"));
  try {
    m->evaluate(Vector{0, 0, 0, 0});
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("exiting on purpose"), std::string::npos) << e.what();
  }
}

TEST(Subprocess, MissingProgram) {
  ModelSpec s = sub_spec("linear-bounded");
  s.command = "/nonexistent/definitely_not_here";
  EXPECT_THROW(make_model(s), TransportError);
}

TEST(Subprocess, ClippedSubprocess) {
  const auto m = make_model(clip_wrap(sub_spec("linear-bounded"), {Vector(3, 0.0), Vector(3, 25.0)}));
  EXPECT_EQ(m->evaluate(Vector{0, 0, 0, 0}), (Vector{10, 20, 25}));
}
