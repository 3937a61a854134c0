#pragma once
// Black-box regression models f: R^d -> R^t.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsreg/error.hpp"
#include "rsreg/region.hpp"
#include "rsreg/subprocess.hpp"

namespace rsreg::models {

enum class ModelKind { synthetic_sine, linear, constant, subprocess };

/// Declarative description of a model; turned into a Model by make_model.
///
/// parameters by kind:
///   synthetic_sine  empty, or {amp, freq, centre, offset} for
///                   amp*sin(freq*x1) + (x2-centre)^2 + offset (default 10,2,2,15)
///   linear          W row-major (t*d), optionally followed by a bias (t)
///   constant        the t output values
struct ModelSpec {
  ModelKind kind = ModelKind::synthetic_sine;
  std::size_t input_dim = 2;
  std::size_t output_dim = 1;
  std::vector<double> parameters;
  std::string command;
  std::chrono::milliseconds timeout{30000};
  std::optional<OutputBounds> clip;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  /// f(x). Throws DomainError on a dimension mismatch.
  Vector evaluate(std::span<const double> x) const {
    check_input(x);
    return evaluate_unchecked(x);
  }

  /// Element-wise evaluate; errors carry the failing batch index.
  virtual std::vector<Vector> batch_evaluate(std::span<const Vector> xs) const {
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      try {
        out.push_back(evaluate(xs[i]));
      } catch (const DomainError& e) {
        throw DomainError("batch index " + std::to_string(i) + ": " + e.what());
      } catch (const TransportError& e) {
        throw TransportError("batch index " + std::to_string(i) + ": " + e.what());
      }
    }
    return out;
  }

  /// Whether evaluate may be called from several threads at once.
  virtual bool concurrent() const { return true; }

 protected:
  virtual Vector evaluate_unchecked(std::span<const double> x) const = 0;

  void check_input(std::span<const double> x) const {
    if (x.size() != input_dim()) {
      throw DomainError("model input has " + std::to_string(x.size()) +
                        " components, expected " + std::to_string(input_dim()));
    }
  }
};

class SyntheticSineModel final : public Model {
 public:
  SyntheticSineModel() = default;
  SyntheticSineModel(double amp, double freq, double centre, double offset)
      : amp_(amp), freq_(freq), centre_(centre), offset_(offset) {}

  std::size_t input_dim() const override { return 2; }
  std::size_t output_dim() const override { return 1; }

 protected:
  Vector evaluate_unchecked(std::span<const double> x) const override {
    const double dx = x[1] - centre_;
    return {amp_ * std::sin(freq_ * x[0]) + dx * dx + offset_};
  }

 private:
  double amp_ = 10.0;
  double freq_ = 2.0;
  double centre_ = 2.0;
  double offset_ = 15.0;
};

/// y = W x + b.
class LinearModel final : public Model {
 public:
  LinearModel(std::size_t d, std::size_t t, std::vector<double> weights, Vector bias = {})
      : d_(d), t_(t), w_(std::move(weights)), b_(std::move(bias)) {
    if (w_.size() != d_ * t_) throw DomainError("LinearModel: weight matrix must be t*d");
    if (b_.empty()) b_.assign(t_, 0.0);
    if (b_.size() != t_) throw DomainError("LinearModel: bias must have t entries");
  }

  std::size_t input_dim() const override { return d_; }
  std::size_t output_dim() const override { return t_; }

 protected:
  Vector evaluate_unchecked(std::span<const double> x) const override {
    Vector y(b_);
    for (std::size_t i = 0; i < t_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) y[i] += w_[i * d_ + j] * x[j];
    }
    return y;
  }

 private:
  std::size_t d_, t_;
  std::vector<double> w_;
  Vector b_;
};

class ConstantModel final : public Model {
 public:
  ConstantModel(std::size_t d, Vector value) : d_(d), value_(std::move(value)) {
    if (value_.empty()) throw DomainError("ConstantModel: empty output");
  }
  std::size_t input_dim() const override { return d_; }
  std::size_t output_dim() const override { return value_.size(); }

 protected:
  Vector evaluate_unchecked(std::span<const double>) const override { return value_; }

 private:
  std::size_t d_;
  Vector value_;
};

/// Clamps every output of the inner model into [l, u].
class ClippedModel final : public Model {
 public:
  ClippedModel(std::unique_ptr<Model> inner, OutputBounds bounds)
      : inner_(std::move(inner)), bounds_(std::move(bounds)) {
    bounds_.check(inner_->output_dim());
  }

  std::size_t input_dim() const override { return inner_->input_dim(); }
  std::size_t output_dim() const override { return inner_->output_dim(); }
  bool concurrent() const override { return inner_->concurrent(); }
  const OutputBounds& bounds() const { return bounds_; }

  std::vector<Vector> batch_evaluate(std::span<const Vector> xs) const override {
    auto ys = inner_->batch_evaluate(xs);
    for (auto& y : ys) clamp(y);
    return ys;
  }

 protected:
  Vector evaluate_unchecked(std::span<const double> x) const override {
    Vector y = inner_->evaluate(x);
    clamp(y);
    return y;
  }

 private:
  void clamp(Vector& y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = std::clamp(y[i], bounds_.lower[i], bounds_.upper[i]);
    }
  }

  std::unique_ptr<Model> inner_;
  OutputBounds bounds_;
};

/// External model behind SubprocessChannel. One child process per instance;
/// requests are serialised.
class SubprocessModel final : public Model {
 public:
  SubprocessModel(const std::string& command, std::chrono::milliseconds timeout,
                  std::size_t expect_d = 0, std::size_t expect_t = 0)
      : channel_(std::make_unique<SubprocessChannel>(command, timeout)) {
    if ((expect_d && expect_d != channel_->input_dim()) ||
        (expect_t && expect_t != channel_->output_dim())) {
      throw TransportError("subprocess model '" + command + "': handshake dims (" +
                           std::to_string(channel_->input_dim()) + "," +
                           std::to_string(channel_->output_dim()) +
                           ") disagree with configured (" + std::to_string(expect_d) + "," +
                           std::to_string(expect_t) + ")");
    }
  }

  std::size_t input_dim() const override { return channel_->input_dim(); }
  std::size_t output_dim() const override { return channel_->output_dim(); }
  bool concurrent() const override { return false; }

  std::vector<Vector> batch_evaluate(std::span<const Vector> xs) const override {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].size() != input_dim()) {
        throw DomainError("batch index " + std::to_string(i) + ": model input has " +
                          std::to_string(xs[i].size()) + " components, expected " +
                          std::to_string(input_dim()));
      }
    }
    std::lock_guard lock(mutex_);
    return channel_->call(xs);
  }

 protected:
  Vector evaluate_unchecked(std::span<const double> x) const override {
    const Vector v(x.begin(), x.end());
    std::lock_guard lock(mutex_);
    return channel_->call(std::span<const Vector>(&v, 1)).front();
  }

 private:
  mutable std::mutex mutex_;
  std::unique_ptr<SubprocessChannel> channel_;
};

/// Returns a copy of `spec` whose outputs are clamped into `bounds`.
inline ModelSpec clip_wrap(ModelSpec spec, OutputBounds bounds) {
  bounds.check(spec.output_dim);
  spec.clip = std::move(bounds);
  return spec;
}

inline std::unique_ptr<Model> make_model(const ModelSpec& spec) {
  if (spec.kind != ModelKind::subprocess && (spec.input_dim == 0 || spec.output_dim == 0)) {
    throw DomainError("ModelSpec: input_dim and output_dim must be >= 1");
  }
  std::unique_ptr<Model> m;
  switch (spec.kind) {
    case ModelKind::synthetic_sine: {
      if (spec.input_dim != 2 || spec.output_dim != 1) {
        throw DomainError("synthetic-sine model is R^2 -> R");
      }
      const auto& p = spec.parameters;
      if (p.empty()) {
        m = std::make_unique<SyntheticSineModel>();
      } else if (p.size() == 4) {
        m = std::make_unique<SyntheticSineModel>(p[0], p[1], p[2], p[3]);
      } else {
        throw DomainError("synthetic-sine parameters: expected 0 or 4 values");
      }
      break;
    }
    case ModelKind::linear: {
      const std::size_t wt = spec.input_dim * spec.output_dim;
      const auto& p = spec.parameters;
      if (p.size() != wt && p.size() != wt + spec.output_dim) {
        throw DomainError("linear parameters: expected t*d or t*d+t values");
      }
      std::vector<double> w(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(wt));
      Vector b(p.begin() + static_cast<std::ptrdiff_t>(wt), p.end());
      m = std::make_unique<LinearModel>(spec.input_dim, spec.output_dim, std::move(w),
                                        std::move(b));
      break;
    }
    case ModelKind::constant:
      if (spec.parameters.size() != spec.output_dim) {
        throw DomainError("constant parameters: expected t values");
      }
      m = std::make_unique<ConstantModel>(spec.input_dim, spec.parameters);
      break;
    case ModelKind::subprocess:
      if (spec.command.empty()) throw DomainError("subprocess model requires a command");
      m = std::make_unique<SubprocessModel>(spec.command, spec.timeout, spec.input_dim,
                                            spec.output_dim);
      break;
  }
  if (spec.clip) m = std::make_unique<ClippedModel>(std::move(m), *spec.clip);
  return m;
}

}  // namespace rsreg::models
