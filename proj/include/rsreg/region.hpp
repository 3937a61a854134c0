#pragma once
// Output acceptance regions and hard output bounds.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rsreg/error.hpp"

namespace rsreg {

using Vector = std::vector<double>;

enum class Dissimilarity { abs_diff, grouped_l2 };

/// Hard component-wise bounds l <= f(z) <= u.
struct OutputBounds {
  Vector lower;
  Vector upper;

  void check(std::size_t t) const {
    if (lower.size() != t || upper.size() != t) {
      throw DomainError("OutputBounds: expected " + std::to_string(t) + " components");
    }
    for (std::size_t i = 0; i < t; ++i) {
      if (!(lower[i] <= upper[i])) {
        throw DomainError("OutputBounds: lower > upper at coordinate " + std::to_string(i));
      }
    }
  }
};

/// Per-output accepted set around a reference output y.
///
/// For abs-diff the set is the interval [lower_i, upper_i], which starts as
/// [y_i - eps_i, y_i + eps_i] and may be widened (discounted regions). For
/// grouped-l2 every output in a group is accepted iff the l2 distance of the
/// group to y is within the group's eps (all members carry the same eps).
struct AcceptRegion {
  Vector y;
  Vector eps_y;
  Vector lower;
  Vector upper;
  Dissimilarity diss = Dissimilarity::abs_diff;
  std::vector<std::vector<std::size_t>> groups;

  static AcceptRegion interval(Vector y, Vector eps) {
    AcceptRegion r;
    if (y.size() != eps.size() || y.empty()) {
      throw DomainError("AcceptRegion: y and eps_y must have equal non-zero length");
    }
    r.lower.resize(y.size());
    r.upper.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(eps[i] > 0.0)) {
        throw DomainError("AcceptRegion: eps_y must be positive at coordinate " +
                          std::to_string(i));
      }
      r.lower[i] = y[i] - eps[i];
      r.upper[i] = y[i] + eps[i];
    }
    r.y = std::move(y);
    r.eps_y = std::move(eps);
    return r;
  }

  static AcceptRegion grouped(Vector y, Vector eps, std::vector<std::vector<std::size_t>> groups) {
    AcceptRegion r = interval(std::move(y), std::move(eps));
    r.diss = Dissimilarity::grouped_l2;
    std::vector<int> seen(r.y.size(), 0);
    for (const auto& g : groups) {
      if (g.empty()) throw DomainError("AcceptRegion: empty output group");
      for (std::size_t idx : g) {
        if (idx >= r.y.size()) throw DomainError("AcceptRegion: group index out of range");
        if (seen[idx]++) throw DomainError("AcceptRegion: groups must partition the outputs");
        if (r.eps_y[idx] != r.eps_y[g.front()]) {
          throw DomainError("AcceptRegion: eps_y must be equal within a group");
        }
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw DomainError("AcceptRegion: output " + std::to_string(i) + " not grouped");
    }
    r.groups = std::move(groups);
    return r;
  }

  std::size_t dim() const { return y.size(); }
  bool is_interval() const { return diss == Dissimilarity::abs_diff; }

  /// Per-output acceptance of one model output.
  std::vector<char> accepts(std::span<const double> out) const {
    if (out.size() != dim()) throw DomainError("AcceptRegion: output dimension mismatch");
    std::vector<char> ok(dim(), 0);
    if (is_interval()) {
      for (std::size_t i = 0; i < dim(); ++i) ok[i] = lower[i] <= out[i] && out[i] <= upper[i];
      return ok;
    }
    for (const auto& g : groups) {
      double ss = 0.0;
      for (std::size_t idx : g) {
        const double diff = out[idx] - y[idx];
        ss += diff * diff;
      }
      const char in = std::sqrt(ss) <= eps_y[g.front()];
      for (std::size_t idx : g) ok[idx] = in;
    }
    return ok;
  }
};

}  // namespace rsreg
