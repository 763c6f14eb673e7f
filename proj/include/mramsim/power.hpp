#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mramsim/error.hpp"

namespace mramsim {

struct CurveSample {
  double time_ns = 0.0;
  double current = 0.0;  // normalized to the full-pulse current

  friend bool operator==(const CurveSample&, const CurveSample&) = default;
};

// Normalized write current over the charge phase of a write pulse, measured
// with a solid 0x0000 pattern and used as the envelope for every pattern.
class PowerCurve {
 public:
  static std::vector<CurveSample> anchors() { return {{0.0, 0.0}, {5.0, 0.34}, {20.0, 1.0}}; }

  PowerCurve() : samples_(anchors()) {}

  // Extra samples are merged with the anchors; a sample at an anchor time
  // must agree with it.
  explicit PowerCurve(std::vector<CurveSample> extra) : samples_(anchors()) {
    for (const auto& s : extra) {
      if (!(s.current >= 0.0 && s.current <= 1.0))
        throw Error("normalized current " + std::to_string(s.current) + " outside [0, 1]");
      if (!(s.time_ns >= 0.0)) throw Error("curve sample time must be non-negative");
      const auto it = std::find_if(samples_.begin(), samples_.end(),
                                   [&](const CurveSample& c) { return c.time_ns == s.time_ns; });
      if (it != samples_.end()) {
        if (it->current != s.current)
          throw Error("curve sample at " + std::to_string(s.time_ns) + " ns contradicts the anchor value");
        continue;
      }
      samples_.push_back(s);
    }
    std::sort(samples_.begin(), samples_.end(),
              [](const CurveSample& a, const CurveSample& b) { return a.time_ns < b.time_ns; });
    for (std::size_t i = 1; i < samples_.size(); ++i)
      if (samples_[i].current < samples_[i - 1].current)
        throw Error("normalized current decreases at " + std::to_string(samples_[i].time_ns) + " ns");
  }

  const std::vector<CurveSample>& samples() const noexcept { return samples_; }
  double min_time() const noexcept { return samples_.front().time_ns; }
  double max_time() const noexcept { return samples_.back().time_ns; }
  bool covers(double t) const noexcept { return t >= min_time() && t <= max_time(); }

  double current_at(double t) const {
    if (!covers(t))
      throw Error("time " + std::to_string(t) + " ns outside the curve range [" + std::to_string(min_time()) + ", " +
                  std::to_string(max_time()) + "]");
    const auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                                     [](const CurveSample& s, double v) { return s.time_ns < v; });
    if (hi->time_ns == t) return hi->current;
    const auto lo = hi - 1;
    const double f = (t - lo->time_ns) / (hi->time_ns - lo->time_ns);
    return lo->current + f * (hi->current - lo->current);
  }

 private:
  std::vector<CurveSample> samples_;
};

namespace detail {

inline std::pair<double, double> current_pair(const PowerCurve& curve, double t_reduced, double t_full) {
  if (t_reduced > t_full) throw Error("reduced pulse width exceeds the full pulse width");
  const double i_red = curve.current_at(t_reduced);
  const double i_full = curve.current_at(t_full);
  if (i_full == 0.0) throw Error("full-pulse current is zero");
  return {i_red, i_full};
}

}  // namespace detail

// Power goes with the square of the current.
inline double power_reduction(const PowerCurve& curve, double t_reduced, double t_full) {
  const auto [i_red, i_full] = detail::current_pair(curve, t_reduced, t_full);
  const double r = i_red / i_full;
  return 1.0 - r * r;
}

inline double current_saving(const PowerCurve& curve, double t_reduced, double t_full) {
  const auto [i_red, i_full] = detail::current_pair(curve, t_reduced, t_full);
  return 1.0 - i_red / i_full;
}

// CSV with columns time_ns,normalized_current. A non-numeric first line is a header.
inline PowerCurve read_power_curve(std::istream& in) {
  std::vector<CurveSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("curve line " + std::to_string(line_no) + ": expected two columns");
    try {
      std::size_t used_t = 0, used_i = 0;
      const std::string ts = line.substr(0, comma), is = line.substr(comma + 1);
      const double t = std::stod(ts, &used_t);
      const double i = std::stod(is, &used_i);
      if (ts.find_first_not_of(" \t", used_t) != std::string::npos ||
          is.find_first_not_of(" \t", used_i) != std::string::npos)
        throw std::invalid_argument("trailing characters");
      samples.push_back({t, i});
    } catch (const std::logic_error&) {
      if (line_no == 1 && samples.empty()) continue;
      throw IoError("curve line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return PowerCurve(std::move(samples));
}

inline PowerCurve read_power_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open curve file '" + path + "'");
  return read_power_curve(in);
}

}  // namespace mramsim
