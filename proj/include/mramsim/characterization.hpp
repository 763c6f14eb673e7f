#pragma once

// Erroneous-address characterization: union accumulation of per-address error
// masks over N reduced-pulse measurements (strategy 1), severity ordering of
// the erroneous addresses (strategy 2), and the summary statistics.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mramsim/device.hpp"
#include "mramsim/error.hpp"
#include "mramsim/pattern.hpp"

namespace mramsim {

inline constexpr Word kResetPattern = 0xFFFF;

struct ErrorEntry {
  Word mask = 0;    // bits observed wrong in at least one measurement
  Word stored = 0;  // word read back in the final measurement
};

struct ErrorMap {
  std::string chip_id;
  double t_w_ns = 0.0;
  unsigned n = 0;
  std::string pattern;
  std::size_t capacity_words = 0;
  std::map<Address, ErrorEntry> erroneous;
  std::vector<std::size_t> per_measurement_counts;  // erroneous bits per measurement
  std::optional<std::string> warning;               // not serialized

  std::size_t address_count() const noexcept { return erroneous.size(); }

  std::size_t bit_count() const noexcept {
    std::size_t bits = 0;
    for (const auto& [addr, e] : erroneous) bits += static_cast<std::size_t>(std::popcount(e.mask));
    return bits;
  }

  bool contains(Address addr) const { return erroneous.count(addr) != 0; }

  Word mask_at(Address addr) const {
    const auto it = erroneous.find(addr);
    return it == erroneous.end() ? Word{0} : it->second.mask;
  }
};

struct CharacterizeOptions {
  unsigned workers = 1;
  // Measurements to skip in the jitter stream, so an evaluation run does not
  // replay the draws of an earlier characterization on the same seed.
  std::uint64_t round_offset = 0;
};

namespace detail {

// One measurement: reset at rated timing, write the pattern at the reduced
// pulse, read back at rated timing. ORs the observed error bits into `masks`.
inline std::size_t measure_round(ChipModel& chip, const WriteTimings& timings, const DataPattern& pattern,
                                 const Environment& env, std::vector<Word>& masks) {
  chip.reset_memory(kResetPattern);
  const auto capacity = static_cast<Address>(chip.capacity());
  for (Address a = 0; a < capacity; ++a) chip.write_word(a, pattern.at(a), timings, env);
  std::size_t bits = 0;
  for (Address a = 0; a < capacity; ++a) {
    const Word err = static_cast<Word>(chip.read_word(a) ^ pattern.at(a));
    masks[a] = static_cast<Word>(masks[a] | err);
    bits += static_cast<std::size_t>(std::popcount(err));
  }
  return bits;
}

}  // namespace detail

inline ErrorMap characterize(ChipModel& chip, double t_w_ns, unsigned n, const DataPattern& pattern,
                             const Environment& env, const CharacterizeOptions& options = {}) {
  if (n == 0) throw Error("characterization needs at least one measurement");
  const auto timings = WriteTimings::with_pulse(t_w_ns);
  if (!(t_w_ns > 0.0)) throw TimingError("write pulse width must be positive");
  chip.check_environment(env);

  const std::size_t capacity = chip.capacity();
  const std::uint64_t base = chip.write_sequence() + options.round_offset * capacity;
  auto round_start = [&](unsigned r) { return base + static_cast<std::uint64_t>(r) * capacity; };

  std::vector<Word> masks(capacity, 0);
  std::vector<std::size_t> counts(n, 0);
  const unsigned workers = std::clamp(options.workers, 1u, n);

  if (workers == 1) {
    for (unsigned r = 0; r < n; ++r) {
      chip.set_write_sequence(round_start(r));
      counts[r] = detail::measure_round(chip, timings, pattern, env, masks);
    }
  } else {
    // Round r always consumes the same slice of the jitter stream, so the
    // merged union does not depend on which worker ran it.
    std::vector<std::vector<Word>> partial(workers, std::vector<Word>(capacity, 0));
    std::vector<Word> final_contents;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          ChipModel clone = chip;
          for (unsigned r = w; r < n; r += workers) {
            clone.set_write_sequence(round_start(r));
            counts[r] = detail::measure_round(clone, timings, pattern, env, partial[w]);
            if (r == n - 1) final_contents.assign(clone.contents().begin(), clone.contents().end());
          }
        });
      }
    }
    for (const auto& p : partial)
      for (std::size_t a = 0; a < capacity; ++a) masks[a] = static_cast<Word>(masks[a] | p[a]);
    chip.load_contents(final_contents);
  }
  chip.set_write_sequence(round_start(n));

  ErrorMap map;
  map.chip_id = chip.profile().model_id;
  map.t_w_ns = t_w_ns;
  map.n = n;
  map.pattern = pattern.descriptor();
  map.capacity_words = capacity;
  map.per_measurement_counts = std::move(counts);
  for (Address a = 0; a < capacity; ++a)
    if (masks[a] != 0) map.erroneous.emplace(a, ErrorEntry{masks[a], chip.read_word(a)});
  if (t_w_ns >= kNominalPulseNs)
    map.warning = "write pulse at or above the rated 15 ns; characterization is vacuous";
  return map;
}

// ---------------------------------------------------------------------------
// Strategy 2

enum class SeverityGranularity { word, byte };

struct SortedEntry {
  Address address = 0;
  std::uint32_t severity = 0;
  Word error_mask = 0;

  friend bool operator==(const SortedEntry&, const SortedEntry&) = default;
};

struct SortedAddressList {
  std::vector<SortedEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
};

// Decimal value of the XOR between intended and stored data. In byte mode the
// worse of the two bytes counts, for data stored as independent 8-bit values.
inline std::uint32_t severity_of(Word intended, Word stored, SeverityGranularity g) noexcept {
  const auto x = static_cast<std::uint32_t>(intended ^ stored);
  if (g == SeverityGranularity::word) return x;
  return std::max(x & 0xFFu, x >> 8);
}

inline SortedAddressList sort_addresses(const ErrorMap& map, std::span<const Word> intended,
                                        std::span<const Word> stored,
                                        SeverityGranularity granularity = SeverityGranularity::word) {
  SortedAddressList list;
  list.entries.reserve(map.erroneous.size());
  for (const auto& [addr, e] : map.erroneous) {
    if (addr >= intended.size() || addr >= stored.size())
      throw Error("address " + std::to_string(addr) + " has no intended/stored data");
    list.entries.push_back({addr, severity_of(intended[addr], stored[addr], granularity), e.mask});
  }
  std::stable_sort(list.entries.begin(), list.entries.end(), [](const SortedEntry& a, const SortedEntry& b) {
    return a.severity != b.severity ? a.severity < b.severity : a.address < b.address;
  });
  return list;
}

// Uses the pattern as intended data and the final-measurement words kept in the map.
inline SortedAddressList sort_addresses(const ErrorMap& map, const DataPattern& intended,
                                        SeverityGranularity granularity = SeverityGranularity::word) {
  std::vector<Word> want(map.capacity_words);
  for (Address a = 0; a < map.capacity_words; ++a) want[a] = intended.at(a);
  std::vector<Word> got = want;
  for (const auto& [addr, e] : map.erroneous) {
    if (addr >= got.size()) throw Error("error map address beyond its capacity");
    got[addr] = e.stored;
  }
  return sort_addresses(map, want, got, granularity);
}

// ---------------------------------------------------------------------------
// Statistics

struct ErrorStats {
  double e_a_pct = 0.0;
  double e_b_pct = 0.0;
  double m_a_pct = 0.0;
  double m_b_pct = 0.0;
  std::optional<double> c_a_pct;
  std::optional<double> c_b_pct;
};

inline ErrorStats compute_stats(const ErrorMap& characterization, const ErrorMap& evaluation) {
  if (characterization.capacity_words != evaluation.capacity_words)
    throw Error("characterization and evaluation maps cover different capacities");
  if (characterization.capacity_words == 0) throw Error("error map has zero capacity");

  const double words = static_cast<double>(characterization.capacity_words);
  const double bits = words * kWordBits;

  ErrorStats s;
  s.e_a_pct = 100.0 * static_cast<double>(characterization.address_count()) / words;
  s.e_b_pct = 100.0 * static_cast<double>(characterization.bit_count()) / bits;

  const std::size_t eval_addrs = evaluation.address_count();
  const std::size_t eval_bits = evaluation.bit_count();
  s.m_a_pct = 100.0 * static_cast<double>(eval_addrs) / words;
  s.m_b_pct = 100.0 * static_cast<double>(eval_bits) / bits;
  if (eval_addrs == 0) return s;

  std::size_t shared_addrs = 0;
  std::size_t shared_bits = 0;
  for (const auto& [addr, e] : evaluation.erroneous) {
    const Word known = characterization.mask_at(addr);
    if (known != 0) ++shared_addrs;
    shared_bits += static_cast<std::size_t>(std::popcount(static_cast<Word>(known & e.mask)));
  }
  s.c_a_pct = 100.0 * static_cast<double>(shared_addrs) / static_cast<double>(eval_addrs);
  s.c_b_pct = 100.0 * static_cast<double>(shared_bits) / static_cast<double>(eval_bits);
  return s;
}

// ---------------------------------------------------------------------------
// Pulse-width sweep

struct SweepPoint {
  double t_w_ns = 0.0;
  double failed_bit_fraction = 0.0;
};

using ChipFactory = std::function<ChipModel()>;

// One write of the pattern over a 0xFFFF reset per pulse width, each on a fresh
// chip from the factory. Fractions are over all bits of the chip.
inline std::vector<SweepPoint> sweep_t_w(const ChipFactory& factory, std::span<const double> t_w_values,
                                         const DataPattern& pattern, const Environment& env = {}) {
  if (t_w_values.empty()) throw Error("sweep needs at least one pulse width");
  for (double t : t_w_values)
    if (!(t > 0.0)) throw TimingError("sweep pulse widths must be positive");

  std::vector<SweepPoint> out;
  out.reserve(t_w_values.size());
  for (double t : t_w_values) {
    ChipModel chip = factory();
    std::vector<Word> masks(chip.capacity(), 0);
    chip.check_environment(env);
    const std::size_t bits = detail::measure_round(chip, WriteTimings::with_pulse(t), pattern, env, masks);
    out.push_back({t, static_cast<double>(bits) / (static_cast<double>(chip.capacity()) * kWordBits)});
  }
  return out;
}

}  // namespace mramsim
