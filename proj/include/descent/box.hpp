#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "descent/errors.hpp"

namespace descent {

/// Axis-aligned open box: per-coordinate intervals (lo_i, hi_i), all finite.
/// Containment tests against the closure are provided for the operations
/// that treat open boxes as their closures.
class BoxDomain {
 public:
  explicit BoxDomain(std::vector<std::pair<double, double>> intervals)
      : intervals_(std::move(intervals)) {
    if (intervals_.empty())
      throw std::invalid_argument("BoxDomain: no intervals");
    for (const auto& [lo, hi] : intervals_) {
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw std::invalid_argument("BoxDomain: intervals must be finite with lo < hi");
    }
  }

  std::size_t dimension() const { return intervals_.size(); }
  double lo(std::size_t i) const { return intervals_[i].first; }
  double hi(std::size_t i) const { return intervals_[i].second; }
  double width(std::size_t i) const { return intervals_[i].second - intervals_[i].first; }

  bool contains_open(std::span<const double> x) const {
    if (x.size() != intervals_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] > lo(i) && x[i] < hi(i))) return false;
    return true;
  }

  bool contains_closed(std::span<const double> x) const {
    if (x.size() != intervals_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= lo(i) && x[i] <= hi(i))) return false;
    return true;
  }

  /// Distance from x to the boundary of the closed box; negative when x is
  /// outside (largest per-axis overshoot).
  double boundary_margin(std::span<const double> x) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
      m = std::min({m, x[i] - lo(i), hi(i) - x[i]});
    return m;
  }

  bool operator==(const BoxDomain& o) const { return intervals_ == o.intervals_; }

 private:
  std::vector<std::pair<double, double>> intervals_;
};

/// Parses the box syntax "(a,b)x(c,d)x...". Whitespace is tolerated.
inline BoxDomain parse_box(std::string_view text) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto expect = [&](char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c)
      throw SyntaxError(std::string("box syntax: expected '") + c + "'", pos);
    ++pos;
  };
  auto number = [&]() -> double {
    skip_ws();
    const char* begin = text.data() + pos;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw SyntaxError("box syntax: expected a number", pos);
    pos += static_cast<std::size_t>(end - begin);
    return v;
  };

  std::vector<std::pair<double, double>> intervals;
  while (true) {
    expect('(');
    const double lo = number();
    expect(',');
    const double hi = number();
    expect(')');
    intervals.emplace_back(lo, hi);
    skip_ws();
    if (pos < text.size() && (text[pos] == 'x' || text[pos] == 'X')) {
      ++pos;
      continue;
    }
    break;
  }
  skip_ws();
  if (pos != text.size())
    throw SyntaxError("box syntax: unexpected trailing input", pos);
  return BoxDomain(std::move(intervals));
}

/// Prints a box in the same "(a,b)x(c,d)" syntax; round-trips through
/// parse_box bit-exactly.
inline std::string format_box(const BoxDomain& box) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < box.dimension(); ++i) {
    if (i) out += 'x';
    std::snprintf(buf, sizeof(buf), "(%.17g,%.17g)", box.lo(i), box.hi(i));
    out += buf;
  }
  return out;
}

}  // namespace descent
