#pragma once

// Fits a ChipProfile to measured error statistics.
//
// The failure probabilities of the device model have closed forms up to one-
// or two-dimensional Gaussian integrals, so the fit is done by quadrature
// plus nested bracketing root-finding rather than by simulation:
//   1. location/scale of the 1->0 law from the single-write failed-bit rates
//      at the characterization pulse and at the deep-reduction pulse,
//   2. jitter sigma from the growth of the union over N measurements,
//   3. word share of the threshold variance from the erroneous-address rate,
//   4. temperature coefficient from the hot/reference failed-bit ratio.

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mramsim/device.hpp"
#include "mramsim/error.hpp"

namespace mramsim {

struct CalibrationTargets {
  std::string model_id = "custom";
  ChipGrade grade = ChipGrade::commercial;
  std::size_t capacity_words = 65536;

  // Fractions in [0, 1], all for solid 0x0000 written over a 0xFFFF reset.
  double single_bit_rate = 0.0;                  // one write at reduced_t_w_ns
  double union_bit_rate = 0.0;                   // union over `measurements` writes
  std::optional<double> union_address_rate;      // same union, counted per address
  double reduced_t_w_ns = 5.0;
  unsigned measurements = 50;

  double deep_t_w_ns = 2.5;
  double deep_single_bit_rate = 0.3144;          // centre of the observed 25.59-37.30 % band

  double hot_temperature_c = 65.0;
  double hot_bit_ratio = 1.72;

  double zero_to_one_log_offset = 0.5;           // 0->1 law sits this far below in ln(ns)
  double tau_max_ns = 9.0;
  double jitter_bound = 3.0;
  double field_sensitivity = 0.998;
};

namespace detail {

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Trapezoid nodes on [lo, hi] weighted by the standard normal density, renormalized.
inline QuadratureGrid normal_grid(std::size_t n, double lo, double hi) {
  QuadratureGrid g;
  g.nodes.resize(n);
  g.weights.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    const double w = std::exp(-0.5 * z * z) * ((i == 0 || i + 1 == n) ? 0.5 : 1.0);
    g.nodes[i] = z;
    g.weights[i] = w;
    total += w;
  }
  for (auto& w : g.weights) w /= total;
  return g;
}

// Failure probabilities of the device model for solid-pattern writes in which
// every bit toggles in the 1->0 direction with relief g = 1.
class FailureQuadrature {
 public:
  FailureQuadrature(LogNormalParams law, double tau_max, double sigma, double bound, double word_share)
      : law_(law), tau_max_(tau_max), sigma_(sigma), bound_(bound), word_share_(word_share) {}

  static const QuadratureGrid& cell_grid() {
    static const QuadratureGrid g = normal_grid(2001, -8.0, 8.0);
    return g;
  }
  static const QuadratureGrid& word_grid() {
    static const QuadratureGrid g = normal_grid(401, -8.0, 8.0);
    return g;
  }
  const QuadratureGrid& jitter_grid() const {
    static const QuadratureGrid g = normal_grid(241, -3.0, 3.0);
    if (bound_ != 3.0) {
      thread_local QuadratureGrid custom;
      thread_local double custom_bound = 0.0;
      if (custom_bound != bound_) {
        custom = normal_grid(241, -bound_, bound_);
        custom_bound = bound_;
      }
      return custom;
    }
    return g;
  }

  // P(clamped threshold * temp <= y), optionally conditioned on a word offset.
  double threshold_cdf(double y, double temp, double location, double scale) const noexcept {
    if (y >= tau_max_ * temp) return 1.0;
    if (y <= 0.0) return 0.0;
    if (scale <= 0.0) return std::log(y / temp) >= location ? 1.0 : 0.0;
    return normal_cdf((std::log(y / temp) - location) / scale);
  }

  // P(jitter <= u).
  double jitter_cdf(double u) const noexcept {
    if (sigma_ == 0.0) return u >= 0.0 ? 1.0 : 0.0;
    const double z = u / sigma_;
    if (z >= bound_) return 1.0;
    if (z <= -bound_) return 0.0;
    const double lo = normal_cdf(-bound_);
    return (normal_cdf(z) - lo) / (normal_cdf(bound_) - lo);
  }

  double single_rate(double t_w, double temp = 1.0) const {
    if (sigma_ == 0.0) return 1.0 - threshold_cdf(t_w, temp, law_.location, law_.scale);
    const auto& g = jitter_grid();
    double ok = 0.0;
    for (std::size_t j = 0; j < g.nodes.size(); ++j)
      ok += g.weights[j] * threshold_cdf(t_w - sigma_ * g.nodes[j], temp, law_.location, law_.scale);
    return 1.0 - ok;
  }

  double bit_union_rate(double t_w, unsigned n, double temp = 1.0) const {
    if (sigma_ == 0.0) return single_rate(t_w, temp);
    const auto& g = cell_grid();
    double never = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const double x = std::min(std::exp(law_.location + law_.scale * g.nodes[i]), tau_max_) * temp;
      never += g.weights[i] * std::pow(jitter_cdf(t_w - x), static_cast<double>(n));
    }
    return 1.0 - never;
  }

  // {single-write address rate, union-over-n address rate}.
  std::pair<double, double> address_rates(double t_w, unsigned n, double temp = 1.0) const {
    const double shared = law_.scale * std::sqrt(word_share_);
    const double own = law_.scale * std::sqrt(1.0 - word_share_);
    const auto& gw = word_grid();
    const auto& gj = jitter_grid();
    double single_ok = 0.0;
    double union_ok = 0.0;
    for (std::size_t w = 0; w < gw.nodes.size(); ++w) {
      const double location = law_.location + shared * gw.nodes[w];
      double round_ok = 0.0;
      if (sigma_ == 0.0) {
        round_ok = std::pow(threshold_cdf(t_w, temp, location, own), kWordBits);
      } else {
        for (std::size_t j = 0; j < gj.nodes.size(); ++j)
          round_ok += gj.weights[j] *
                      std::pow(threshold_cdf(t_w - sigma_ * gj.nodes[j], temp, location, own), kWordBits);
      }
      single_ok += gw.weights[w] * round_ok;
      union_ok += gw.weights[w] * std::pow(round_ok, static_cast<double>(n));
    }
    return {1.0 - single_ok, 1.0 - union_ok};
  }

 private:
  LogNormalParams law_;
  double tau_max_;
  double sigma_;
  double bound_;
  double word_share_;
};

// Root of a function with a sign change on [lo, hi]; nullopt without one.
inline std::optional<double> bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                                            double f_lo, double f_hi) {
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo < 0.0) == (f_hi < 0.0)) return std::nullopt;
  std::uintmax_t iterations = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi,
                                                   boost::math::tools::eps_tolerance<double>(45), iterations);
  return 0.5 * (r.first + r.second);
}

inline std::optional<double> bracketed_root(const std::function<double(double)>& f, double lo, double hi) {
  return bracketed_root(f, lo, hi, f(lo), f(hi));
}

// First sign change of f over an evenly spaced scan; skips points where f is undefined.
inline std::optional<double> scanned_root(const std::function<std::optional<double>(double)>& f, double lo,
                                          double hi, int steps) {
  std::optional<double> prev_x;
  std::optional<double> prev_f;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + (hi - lo) * i / steps;
    const auto fx = f(x);
    if (fx && prev_f && ((*prev_f < 0.0) != (*fx < 0.0) || *fx == 0.0)) {
      auto plain = [&](double v) { return f(v).value_or(std::nan("")); };
      return bracketed_root(plain, *prev_x, x, *prev_f, *fx);
    }
    if (fx) {
      prev_x = x;
      prev_f = fx;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline ChipProfile calibrate_profile(const CalibrationTargets& t) {
  using detail::FailureQuadrature;

  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(t.single_bit_rate)) throw CalibrationError("single-write bit rate must lie in (0, 1)");
  if (!in_unit(t.union_bit_rate)) throw CalibrationError("union bit rate must lie in (0, 1)");
  if (t.union_bit_rate < t.single_bit_rate)
    throw CalibrationError("infeasible targets: union bit rate below the single-write rate");
  if (t.union_address_rate && !(*t.union_address_rate >= t.union_bit_rate && *t.union_address_rate < 1.0))
    throw CalibrationError("infeasible targets: address rate must lie in [union bit rate, 1)");
  if (!in_unit(t.deep_single_bit_rate) || t.deep_single_bit_rate <= t.single_bit_rate)
    throw CalibrationError("deep-reduction rate must exceed the single-write rate");
  if (t.measurements == 0) throw CalibrationError("measurement count must be positive");
  if (!(t.deep_t_w_ns > 0.0 && t.deep_t_w_ns < t.reduced_t_w_ns))
    throw CalibrationError("deep-reduction pulse must lie below the characterization pulse");

  auto quad = [&](double m, double s, double sigma, double share = 0.0) {
    return FailureQuadrature({m, s}, t.tau_max_ns, sigma, t.jitter_bound, share);
  };

  // Location giving the single-write rate at the characterization pulse.
  auto fit_location = [&](double s, double sigma) -> std::optional<double> {
    auto f = [&](double m) { return quad(m, s, sigma).single_rate(t.reduced_t_w_ns) - t.single_bit_rate; };
    return detail::bracketed_root(f, -6.0, std::log(t.tau_max_ns));
  };
  // Scale (and location) additionally hitting the deep-reduction rate.
  auto fit_law = [&](double sigma) -> std::optional<LogNormalParams> {
    auto f = [&](double s) -> std::optional<double> {
      const auto m = fit_location(s, sigma);
      if (!m) return std::nullopt;
      return quad(*m, s, sigma).single_rate(t.deep_t_w_ns) - t.deep_single_bit_rate;
    };
    const auto s = detail::scanned_root(f, 0.02, 2.0, 40);
    if (!s) return std::nullopt;
    const auto m = fit_location(*s, sigma);
    if (!m) return std::nullopt;
    return LogNormalParams{*m, *s};
  };

  double sigma = 0.0;
  if (t.union_bit_rate - t.single_bit_rate > 1e-9) {
    auto f = [&](double g) -> std::optional<double> {
      const auto law = fit_law(g);
      if (!law) return std::nullopt;
      return quad(law->location, law->scale, g).bit_union_rate(t.reduced_t_w_ns, t.measurements) -
             t.union_bit_rate;
    };
    const auto root = detail::scanned_root(f, 0.0, 2.5, 50);
    if (!root) throw CalibrationError("no jitter level reproduces the union bit rate");
    sigma = *root;
  }
  const auto law = fit_law(sigma);
  if (!law) throw CalibrationError("no threshold law reproduces the single-write rates");

  double share = 0.0;
  if (t.union_address_rate) {
    auto f = [&](double r) {
      return quad(law->location, law->scale, sigma, r).address_rates(t.reduced_t_w_ns, t.measurements).second -
             *t.union_address_rate;
    };
    const auto root = detail::bracketed_root(f, 0.0, 0.99999);
    if (!root) throw CalibrationError("no word correlation reproduces the erroneous-address rate");
    share = *root;
  }

  const double base_rate = quad(law->location, law->scale, sigma).single_rate(t.reduced_t_w_ns);
  auto hot = [&](double c) {
    const double temp = std::exp(c * (t.hot_temperature_c - kReferenceTemperatureC));
    return quad(law->location, law->scale, sigma).single_rate(t.reduced_t_w_ns, temp) / base_rate -
           t.hot_bit_ratio;
  };
  const auto coefficient = detail::bracketed_root(hot, 1e-9, 0.05);
  if (!coefficient) throw CalibrationError("no temperature coefficient reproduces the hot/reference ratio");

  ChipProfile p;
  p.model_id = t.model_id;
  p.grade = t.grade;
  p.capacity_words = t.capacity_words;
  p.tau_1to0 = *law;
  p.tau_0to1 = {law->location - t.zero_to_one_log_offset, law->scale};
  p.tau_word_share = share;
  p.tau_max_ns = t.tau_max_ns;
  p.jitter_sigma = sigma;
  p.jitter_bound = t.jitter_bound;
  p.temp_coefficient = *coefficient;
  p.field_sensitivity = t.field_sensitivity;
  p.validate();
  return p;
}

// Characterization-row targets of the five reference chips (percent -> fraction).
inline CalibrationTargets reference_targets(const std::string& model_id) {
  struct Row {
    const char* id;
    ChipGrade grade;
    double e_a, e_b, m_b;
  };
  static constexpr Row rows[] = {
      {"C1", ChipGrade::commercial, 22.41, 10.49, 0.83}, {"C2", ChipGrade::commercial, 26.41, 22.06, 3.30},
      {"C3", ChipGrade::industrial, 10.34, 7.60, 1.25},  {"C4", ChipGrade::industrial, 8.36, 5.15, 1.36},
      {"C5", ChipGrade::commercial, 5.33, 3.89, 0.86},
  };
  for (const auto& r : rows) {
    if (model_id == r.id) {
      CalibrationTargets t;
      t.model_id = r.id;
      t.grade = r.grade;
      t.single_bit_rate = r.m_b / 100.0;
      t.union_bit_rate = r.e_b / 100.0;
      t.union_address_rate = r.e_a / 100.0;
      return t;
    }
  }
  throw ProfileError("model_id", "unknown reference chip '" + model_id + "' (expected C1..C5)");
}

inline const std::vector<std::string>& reference_chip_ids() {
  static const std::vector<std::string> ids = {"C1", "C2", "C3", "C4", "C5"};
  return ids;
}

// Calibrated reference profile; computed once per process and cached.
inline const ChipProfile& builtin_profile(const std::string& model_id) {
  static std::mutex mutex;
  static std::map<std::string, ChipProfile> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(model_id);
  if (it == cache.end()) it = cache.emplace(model_id, calibrate_profile(reference_targets(model_id))).first;
  return it->second;
}

}  // namespace mramsim
