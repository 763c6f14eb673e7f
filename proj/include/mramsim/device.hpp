#pragma once

// Toggle-MRAM chip with stochastic write failures under shortened write pulses.
//
// Every cell carries two latent critical pulse widths, one per toggle
// direction, drawn once at construction from a word-correlated log-normal
// law. A toggle succeeds when the effective pulse covers the cell's
// temperature-scaled critical time plus the write's pulse jitter. The
// jitter is one truncated-Gaussian sample per write_word call, shared by
// all bits of the word, drawn from a counter-based stream keyed by the
// chip seed and the write sequence number. Because of that keying, two
// chips with the same seed that see the same operation sequence draw the
// same jitter regardless of pulse width or temperature, which is what makes
// the failure sets nest.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mramsim/error.hpp"
#include "mramsim/rng.hpp"

namespace mramsim {

using Word = std::uint16_t;
using Address = std::uint32_t;

inline constexpr unsigned kWordBits = 16;
inline constexpr std::size_t kReliefPoints = kWordBits + 1;

// W-controlled write cycle parameters, in ns.
struct WriteTimings {
  double t_wc = 35.0;
  double t_w = 15.0;
  double t_wr = 12.0;
  double t_dv = 10.0;

  static constexpr WriteTimings nominal() noexcept { return {}; }

  static constexpr WriteTimings with_pulse(double t_w_ns) noexcept {
    WriteTimings t;
    t.t_w = t_w_ns;
    return t;
  }

  void validate() const {
    if (!(t_wc > 0.0) || !(t_w > 0.0) || !(t_wr > 0.0) || !(t_dv > 0.0))
      throw TimingError("write timings must all be positive");
    if (t_w > t_wc) throw TimingError("write pulse t_w exceeds the write cycle t_wc");
  }
};

inline constexpr double kNominalPulseNs = 15.0;
inline constexpr double kReferenceTemperatureC = 26.0;

struct Environment {
  double temperature_c = kReferenceTemperatureC;
  double magnetic_field_mt = 0.0;
};

enum class ChipGrade { commercial, industrial };

struct TemperatureRange {
  double min_c;
  double max_c;
};

inline constexpr TemperatureRange rated_range(ChipGrade grade) noexcept {
  return grade == ChipGrade::commercial ? TemperatureRange{0.0, 70.0}
                                        : TemperatureRange{-40.0, 85.0};
}

inline std::string to_string(ChipGrade grade) {
  return grade == ChipGrade::commercial ? "commercial" : "industrial";
}

inline ChipGrade grade_from_string(const std::string& s) {
  if (s == "commercial") return ChipGrade::commercial;
  if (s == "industrial") return ChipGrade::industrial;
  throw ProfileError("grade", "expected 'commercial' or 'industrial', got '" + s + "'");
}

// Log-space location and scale of a log-normal law, in ln(ns).
struct LogNormalParams {
  double location = 0.0;
  double scale = 0.1;

  double mean() const noexcept { return std::exp(location + 0.5 * scale * scale); }
};

enum class ToggleDirection { one_to_zero, zero_to_one };

// Relief multiplier g(k): 3 up to half-word toggles, then linear down to 1 at 16.
inline std::array<double, kReliefPoints> default_relief_curve() {
  std::array<double, kReliefPoints> g{};
  for (unsigned k = 0; k < kReliefPoints; ++k)
    g[k] = k <= 8 ? 3.0 : 1.0 + 0.25 * static_cast<double>(kWordBits - k);
  return g;
}

struct ChipProfile {
  std::string model_id = "custom";
  ChipGrade grade = ChipGrade::commercial;
  std::size_t capacity_words = 65536;
  unsigned word_length = kWordBits;

  LogNormalParams tau_1to0{0.62, 0.35};
  LogNormalParams tau_0to1{0.12, 0.35};
  // Fraction of the log-threshold variance shared by all cells of a word.
  double tau_word_share = 0.0;
  // Upper clamp of a cell's critical time at the reference temperature.
  double tau_max_ns = 9.0;

  // Per-write pulse jitter (ns), truncated at jitter_bound standard deviations.
  double jitter_sigma = 0.0;
  double jitter_bound = 3.0;

  // Thresholds scale as exp(temp_coefficient * (T - reference_temp_c)).
  double temp_coefficient = 0.0;
  double reference_temp_c = kReferenceTemperatureC;

  std::array<double, kReliefPoints> relief_curve = default_relief_curve();
  // Effective pulse multiplier per mT of external field; 1 means no effect.
  double field_sensitivity = 1.0;

  double temp_factor(double temperature_c) const noexcept {
    return std::exp(temp_coefficient * (temperature_c - reference_temp_c));
  }

  double field_factor(double field_mt) const noexcept {
    return std::pow(field_sensitivity, field_mt);
  }

  double relief(unsigned toggles) const noexcept { return relief_curve[toggles]; }

  double max_jitter() const noexcept { return jitter_bound * jitter_sigma; }

  // Largest critical time plus jitter any cell can present at temperature_c.
  double worst_case_threshold(double temperature_c) const noexcept {
    return tau_max_ns * temp_factor(temperature_c) + max_jitter();
  }

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (capacity_words == 0 || capacity_words > 65536)
      throw ProfileError("capacity_words", "must lie in [1, 65536] (16-bit word addresses)");
    if (word_length != kWordBits) throw ProfileError("word_length", "only 16-bit words are modeled");
    if (!finite(tau_1to0.location)) throw ProfileError("tau_1to0.location", "must be finite");
    if (!finite(tau_0to1.location)) throw ProfileError("tau_0to1.location", "must be finite");
    if (!(tau_1to0.scale > 0.0) || !finite(tau_1to0.scale))
      throw ProfileError("tau_1to0.scale", "must be positive");
    if (!(tau_0to1.scale > 0.0) || !finite(tau_0to1.scale))
      throw ProfileError("tau_0to1.scale", "must be positive");
    if (!(tau_1to0.mean() > tau_0to1.mean()))
      throw ProfileError("tau_0to1", "mean critical time must be below the 1->0 direction's");
    if (!(tau_word_share >= 0.0 && tau_word_share < 1.0))
      throw ProfileError("tau_word_share", "must lie in [0, 1)");
    if (!(tau_max_ns > 0.0)) throw ProfileError("tau_max_ns", "must be positive");
    if (!(jitter_sigma >= 0.0) || !finite(jitter_sigma))
      throw ProfileError("jitter_sigma", "must be non-negative");
    if (!(jitter_bound > 0.0) || !finite(jitter_bound))
      throw ProfileError("jitter_bound", "must be positive");
    if (!(temp_coefficient > 0.0) || !finite(temp_coefficient))
      throw ProfileError("temp_coefficient", "must be positive so thresholds rise with temperature");
    if (!finite(reference_temp_c)) throw ProfileError("reference_temp_c", "must be finite");
    if (!(field_sensitivity > 0.0 && field_sensitivity <= 1.0))
      throw ProfileError("field_sensitivity", "must lie in (0, 1]");
    if (relief_curve[kWordBits] != 1.0) throw ProfileError("relief_curve", "g(16) must equal 1");
    for (unsigned k = 0; k < kReliefPoints; ++k) {
      if (!(relief_curve[k] >= 1.0) || !finite(relief_curve[k]))
        throw ProfileError("relief_curve", "entries must be finite and >= 1");
      if (k > 0 && relief_curve[k] > relief_curve[k - 1])
        throw ProfileError("relief_curve", "must be non-increasing in the toggle count");
    }
    const double worst = worst_case_threshold(rated_range(grade).max_c);
    if (worst > kNominalPulseNs)
      throw ProfileError("tau_max_ns",
                         "critical time plus jitter exceeds the rated 15 ns pulse at the rated maximum "
                         "temperature");
    if (5.0 * relief_curve[8] < worst)
      throw ProfileError("relief_curve", "g(8) too small to keep half-word toggles error-free at 5 ns");
  }
};

// Bits the write tried to toggle and the subset that did not switch.
struct WriteOutcome {
  Word toggled = 0;
  Word failed = 0;

  Word succeeded() const noexcept { return static_cast<Word>(toggled & ~failed); }
  unsigned toggle_count() const noexcept { return static_cast<unsigned>(std::popcount(toggled)); }
  unsigned failure_count() const noexcept { return static_cast<unsigned>(std::popcount(failed)); }
};

class ChipModel {
 public:
  ChipModel(ChipProfile profile, std::uint64_t seed)
      : profile_(std::move(profile)), seed_(seed), jitter_key_(mix_key(seed, 2)) {
    profile_.validate();
    const std::size_t words = profile_.capacity_words;
    contents_.assign(words, Word{0xFFFF});
    tau_1to0_.resize(words * kWordBits);
    tau_0to1_.resize(words * kWordBits);

    SplitMixStream stream(mix_key(seed, 1));
    sample_thresholds(stream, profile_.tau_1to0, tau_1to0_);
    sample_thresholds(stream, profile_.tau_0to1, tau_0to1_);
  }

  const ChipProfile& profile() const noexcept { return profile_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t capacity() const noexcept { return contents_.size(); }
  std::span<const Word> contents() const noexcept { return contents_; }

  // Number of write_word calls issued so far; selects the next jitter draw.
  std::uint64_t write_sequence() const noexcept { return write_sequence_; }
  void set_write_sequence(std::uint64_t seq) noexcept { write_sequence_ = seq; }

  float critical_time(Address addr, unsigned bit, ToggleDirection dir) const {
    check_address(addr);
    const auto& taus = dir == ToggleDirection::one_to_zero ? tau_1to0_ : tau_0to1_;
    return taus[static_cast<std::size_t>(addr) * kWordBits + bit];
  }

  // Jitter (ns) that the write with the given sequence number will see.
  double jitter_for(std::uint64_t seq) const noexcept {
    if (profile_.jitter_sigma == 0.0) return 0.0;
    SplitMixStream stream(mix_key(jitter_key_, seq));
    return profile_.jitter_sigma * stream.truncated_normal(profile_.jitter_bound);
  }

  WriteOutcome write_word(Address addr, Word data, const WriteTimings& timings, const Environment& env) {
    check_address(addr);
    if (!(timings.t_w > 0.0)) throw TimingError("write pulse width must be positive");
    check_environment(env);

    const std::uint64_t seq = write_sequence_++;
    const Word old = contents_[addr];
    const Word toggles = static_cast<Word>(old ^ data);
    WriteOutcome outcome{toggles, 0};
    if (toggles == 0) return outcome;

    const unsigned k = static_cast<unsigned>(std::popcount(toggles));
    const double pulse = timings.t_w * profile_.relief(k) * profile_.field_factor(env.magnetic_field_mt);
    const double temp = profile_.temp_factor(env.temperature_c);
    const double max_jitter = profile_.max_jitter();
    const std::size_t base = static_cast<std::size_t>(addr) * kWordBits;

    bool have_jitter = false;
    double jitter = 0.0;
    Word failed = 0;
    for (unsigned bit = 0; bit < kWordBits; ++bit) {
      const Word mask = static_cast<Word>(1u << bit);
      if (!(toggles & mask)) continue;
      const bool from_one = (old & mask) != 0;
      const double threshold = (from_one ? tau_1to0_[base + bit] : tau_0to1_[base + bit]) * temp;
      if (threshold + max_jitter <= pulse) continue;
      if (!have_jitter) {
        jitter = jitter_for(seq);
        have_jitter = true;
      }
      if (pulse < threshold + jitter) failed = static_cast<Word>(failed | mask);
    }
    outcome.failed = failed;
    contents_[addr] = static_cast<Word>(data ^ failed);
    return outcome;
  }

  Word read_word(Address addr) const {
    check_address(addr);
    return contents_[addr];
  }

  // Bulk write at rated timing. Rated writes cannot fail, so no jitter is drawn
  // and the write sequence is left alone.
  void reset_memory(Word pattern) { std::fill(contents_.begin(), contents_.end(), pattern); }

  // Overwrites contents verbatim; used to restore snapshots.
  void load_contents(std::span<const Word> words) {
    if (words.size() != contents_.size())
      throw Error("snapshot holds " + std::to_string(words.size()) + " words, chip has " +
                  std::to_string(contents_.size()));
    std::copy(words.begin(), words.end(), contents_.begin());
  }

  void check_environment(const Environment& env) const {
    const auto range = rated_range(profile_.grade);
    if (!(env.temperature_c >= range.min_c && env.temperature_c <= range.max_c))
      throw Error("temperature " + std::to_string(env.temperature_c) + " C outside the " +
                  to_string(profile_.grade) + " rated range");
    if (!(env.magnetic_field_mt >= 0.0)) throw Error("magnetic field must be non-negative");
  }

 private:
  void check_address(Address addr) const {
    if (addr >= contents_.size())
      throw AddressError("address " + std::to_string(addr) + " out of range (capacity " +
                         std::to_string(contents_.size()) + ")");
  }

  void sample_thresholds(SplitMixStream& stream, const LogNormalParams& law, std::vector<float>& out) const {
    const double shared = law.scale * std::sqrt(profile_.tau_word_share);
    const double own = law.scale * std::sqrt(1.0 - profile_.tau_word_share);
    for (std::size_t w = 0; w < contents_.size(); ++w) {
      const double word_offset = law.location + shared * stream.normal();
      for (unsigned bit = 0; bit < kWordBits; ++bit) {
        const double tau = std::exp(word_offset + own * stream.normal());
        out[w * kWordBits + bit] = static_cast<float>(std::min(tau, profile_.tau_max_ns));
      }
    }
  }

  ChipProfile profile_;
  std::uint64_t seed_;
  std::uint64_t jitter_key_;
  std::uint64_t write_sequence_ = 0;
  std::vector<Word> contents_;
  std::vector<float> tau_1to0_;
  std::vector<float> tau_0to1_;
};

inline ChipModel create_chip(const ChipProfile& profile, std::uint64_t seed) { return ChipModel(profile, seed); }

}  // namespace mramsim
