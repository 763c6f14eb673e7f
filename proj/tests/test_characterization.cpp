#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "mramsim/characterization.hpp"
#include "mramsim/pattern.hpp"
#include "support.hpp"

using namespace mramsim;
using testing_support::shrunk;

namespace {

using BitSet = std::set<std::pair<Address, unsigned>>;

BitSet bits_of(const ErrorMap& m) {
  BitSet out;
  for (const auto& [a, e] : m.erroneous)
    for (unsigned b = 0; b < kWordBits; ++b)
      if (e.mask & (1u << b)) out.insert({a, b});
  return out;
}

// Replays every measurement on an untouched copy and unions the wrong bits as a set.
BitSet union_oracle(const ChipModel& original, double t_w, unsigned n, const DataPattern& pattern) {
  ChipModel chip = original;
  const std::uint64_t base = chip.write_sequence();
  BitSet out;
  for (unsigned r = 0; r < n; ++r) {
    chip.set_write_sequence(base + static_cast<std::uint64_t>(r) * chip.capacity());
    chip.reset_memory(0xFFFF);
    for (Address a = 0; a < chip.capacity(); ++a) chip.write_word(a, pattern.at(a), WriteTimings::with_pulse(t_w), {});
    for (Address a = 0; a < chip.capacity(); ++a) {
      const Word diff = static_cast<Word>(chip.read_word(a) ^ pattern.at(a));
      for (unsigned b = 0; b < kWordBits; ++b)
        if (diff >> b & 1u) out.insert({a, b});
    }
  }
  return out;
}

// Insertion sort on (severity, address), with severity recomputed bit by bit.
std::vector<Address> sort_oracle(const std::vector<Address>& addrs, const std::vector<Word>& intended,
                                 const std::vector<Word>& stored) {
  auto severity = [&](Address a) {
    unsigned long v = 0;
    for (int b = 15; b >= 0; --b) v = v * 2 + (((intended[a] >> b) & 1u) != ((stored[a] >> b) & 1u));
    return v;
  };
  std::vector<Address> out;
  for (Address a : addrs) {
    auto it = out.begin();
    while (it != out.end() && (severity(*it) < severity(a) || (severity(*it) == severity(a) && *it < a))) ++it;
    out.insert(it, a);
  }
  return out;
}

}  // namespace

TEST(Pattern, ParseAndDescriptor) {
  EXPECT_EQ(DataPattern::parse("solid:0000").at(7), 0x0000);
  EXPECT_EQ(DataPattern::parse("solid:beef").descriptor(), "solid:BEEF");
  const auto row = DataPattern::parse("row-striped:AAAA");
  EXPECT_EQ(row.at(0), 0xAAAA);
  EXPECT_EQ(row.at(kRowWords), 0x5555);
  const auto col = DataPattern::parse("col-striped:5555");
  EXPECT_EQ(col.at(0), 0x5555);
  EXPECT_EQ(col.at(1), 0xAAAA);
  const auto chk = DataPattern::parse("checkerboard:AAAA");
  EXPECT_EQ(chk.at(0), 0xAAAA);
  EXPECT_EQ(chk.at(1), 0x5555);
  EXPECT_EQ(chk.at(kRowWords), 0x5555);
  EXPECT_EQ(chk.at(kRowWords + 1), 0xAAAA);
  const auto rnd = DataPattern::parse("random:17");
  EXPECT_EQ(rnd.descriptor(), "random:17");
  EXPECT_EQ(rnd.at(100), DataPattern::parse("random:17").at(100));
  EXPECT_NE(rnd.at(100), DataPattern::parse("random:18").at(100));
  for (const char* bad : {"solid", "solid:", "solid:12345", "diagonal:0000", "solid:xyz", "random:-1"})
    EXPECT_THROW(DataPattern::parse(bad), Error) << bad;
}

TEST(Characterize, NominalPulseGivesEmptyMapWithWarning) {
  auto chip = create_chip(shrunk("C2", 2048), 1);
  const auto m = characterize(chip, 15.0, 5, DataPattern::solid(0), {});
  EXPECT_EQ(m.address_count(), 0u);
  EXPECT_TRUE(m.warning.has_value());
  EXPECT_THROW(characterize(chip, 5.0, 0, DataPattern::solid(0), {}), Error);
  EXPECT_THROW(characterize(chip, 0.0, 1, DataPattern::solid(0), {}), TimingError);
}

TEST(Characterize, MasksAreNonzeroAndCountsConsistent) {
  auto chip = create_chip(shrunk("C1", 4096), 2);
  const auto m = characterize(chip, 5.0, 20, DataPattern::solid(0), {});
  ASSERT_EQ(m.per_measurement_counts.size(), 20u);
  for (const auto& [a, e] : m.erroneous) {
    EXPECT_NE(e.mask, 0);
    EXPECT_LT(a, 4096u);
  }
  EXPECT_GE(m.bit_count(), m.address_count());
  EXPECT_LE(m.bit_count(), 16 * m.address_count());
  for (auto c : m.per_measurement_counts) EXPECT_LE(c, m.bit_count());
}

TEST(Characterize, UnionIsMonotoneInMeasurements) {
  const auto chip = create_chip(shrunk("C2", 4096), 5);
  auto c1 = chip, c50 = chip;
  const auto one = bits_of(characterize(c1, 5.0, 1, DataPattern::solid(0), {}));
  const auto fifty = bits_of(characterize(c50, 5.0, 50, DataPattern::solid(0), {}));
  EXPECT_TRUE(std::includes(fifty.begin(), fifty.end(), one.begin(), one.end()));
  EXPECT_GT(fifty.size(), one.size());
}

TEST(Characterize, WorkerCountDoesNotChangeTheResult) {
  const auto chip = create_chip(shrunk("C1", 4096), 8);
  auto serial = chip, parallel = chip;
  const auto a = characterize(serial, 5.0, 12, DataPattern::solid(0), {}, {1, 0});
  const auto b = characterize(parallel, 5.0, 12, DataPattern::solid(0), {}, {4, 0});
  EXPECT_EQ(a.per_measurement_counts, b.per_measurement_counts);
  ASSERT_EQ(a.erroneous.size(), b.erroneous.size());
  for (const auto& [addr, e] : a.erroneous) {
    ASSERT_TRUE(b.contains(addr));
    EXPECT_EQ(e.mask, b.erroneous.at(addr).mask);
    EXPECT_EQ(e.stored, b.erroneous.at(addr).stored);
  }
  EXPECT_EQ(serial.write_sequence(), parallel.write_sequence());
  EXPECT_TRUE(std::equal(serial.contents().begin(), serial.contents().end(), parallel.contents().begin()));
}

TEST(Characterize, AccumulationMatchesSetUnionOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> cap_dist(1, 256);
  std::uniform_int_distribution<unsigned> n_dist(1, 12), chip_dist(0, 4);
  std::uniform_real_distribution<double> tw_dist(2.0, 8.0);
  const char* patterns[] = {"solid:0000", "solid:0F0F", "row-striped:00FF", "checkerboard:0001", "random:9"};
  for (int instance = 0; instance < 1000; ++instance) {
    const auto& id = reference_chip_ids()[chip_dist(rng)];
    auto chip = create_chip(shrunk(id, cap_dist(rng)), rng());
    chip.set_write_sequence(rng() % 1000);
    const double t_w = tw_dist(rng);
    const unsigned n = n_dist(rng);
    const auto pattern = DataPattern::parse(patterns[instance % 5]);
    const auto expected = union_oracle(chip, t_w, n, pattern);
    const auto got = characterize(chip, t_w, n, pattern, {});
    ASSERT_EQ(bits_of(got), expected) << "instance " << instance;
  }
}

TEST(SortAddresses, HandInstances) {
  ErrorMap m;
  m.capacity_words = 4;
  m.erroneous[0] = {0x0001, 0x0001};
  std::vector<Word> intended(4, 0), stored(4, 0);
  stored[0] = 0x0001;
  auto list = sort_addresses(m, intended, stored);
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list.entries[0].severity, 1u);

  m.erroneous.clear();
  m.erroneous[1] = {0x8000, 0};
  m.erroneous[2] = {0x0001, 0};
  m.erroneous[3] = {0x0100, 0};
  stored = {0, 0x8000, 0x0001, 0x0100};
  list = sort_addresses(m, intended, stored);
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list.entries[0].address, 2u);
  EXPECT_EQ(list.entries[1].address, 3u);
  EXPECT_EQ(list.entries[2].address, 1u);

  std::vector<Word> short_data(2, 0);
  EXPECT_THROW(sort_addresses(m, short_data, short_data), Error);
}

TEST(SortAddresses, ByteGranularityUsesTheWorseByte) {
  EXPECT_EQ(severity_of(0x0000, 0x0180, SeverityGranularity::word), 0x0180u);
  EXPECT_EQ(severity_of(0x0000, 0x0180, SeverityGranularity::byte), 0x80u);
  EXPECT_EQ(severity_of(0xFFFF, 0xFEFF, SeverityGranularity::byte), 0x01u);
}

TEST(SortAddresses, MatchesComparisonSortOracle) {
  std::mt19937_64 rng(77);
  for (int instance = 0; instance < 1000; ++instance) {
    const std::size_t capacity = 1 + rng() % 256;
    auto intended = testing_support::random_words(rng, capacity);
    auto stored = intended;
    ErrorMap m;
    m.capacity_words = capacity;
    std::vector<Address> addrs;
    for (Address a = 0; a < capacity; ++a) {
      if (rng() % 3 != 0) continue;
      // Few distinct error values so ties are common.
      const Word err = static_cast<Word>(1u << (rng() % 4 == 0 ? 15 : rng() % 3));
      stored[a] = static_cast<Word>(intended[a] ^ err);
      m.erroneous[a] = {err, stored[a]};
      addrs.push_back(a);
    }
    const auto list = sort_addresses(m, intended, stored);
    const auto expected = sort_oracle(addrs, intended, stored);
    ASSERT_EQ(list.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_EQ(list.entries[i].address, expected[i]);
  }
}

TEST(SortAddresses, PatternOverloadUsesLastStoredWord) {
  auto chip = create_chip(shrunk("C2", 2048), 3);
  const auto pattern = DataPattern::solid(0);
  const auto m = characterize(chip, 5.0, 10, pattern, {});
  const auto list = sort_addresses(m, pattern);
  ASSERT_EQ(list.size(), m.address_count());
  std::set<Address> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list.entries[i];
    EXPECT_TRUE(seen.insert(e.address).second);
    EXPECT_EQ(e.severity, m.erroneous.at(e.address).stored);
    if (i > 0) {
      EXPECT_LE(list.entries[i - 1].severity, e.severity);
    }
  }
}

TEST(Stats, HandComputedInstance) {
  ErrorMap c, e;
  c.capacity_words = e.capacity_words = 100;
  c.erroneous[1] = {0x0003, 0};
  c.erroneous[2] = {0x0001, 0};
  e.erroneous[2] = {0x0003, 0};
  e.erroneous[3] = {0x0001, 0};
  const auto s = compute_stats(c, e);
  EXPECT_DOUBLE_EQ(s.e_a_pct, 2.0);
  EXPECT_DOUBLE_EQ(s.e_b_pct, 100.0 * 3 / 1600);
  EXPECT_DOUBLE_EQ(s.m_a_pct, 2.0);
  EXPECT_DOUBLE_EQ(s.m_b_pct, 100.0 * 3 / 1600);
  EXPECT_DOUBLE_EQ(*s.c_a_pct, 50.0);
  EXPECT_DOUBLE_EQ(*s.c_b_pct, 100.0 / 3);
}

TEST(Stats, EmptyEvaluationHasNoCoverage) {
  ErrorMap c, e;
  c.capacity_words = e.capacity_words = 10;
  c.erroneous[1] = {1, 0};
  const auto s = compute_stats(c, e);
  EXPECT_EQ(s.m_a_pct, 0.0);
  EXPECT_FALSE(s.c_a_pct.has_value());
  EXPECT_FALSE(s.c_b_pct.has_value());
  const auto self = compute_stats(c, c);
  EXPECT_DOUBLE_EQ(*self.c_a_pct, 100.0);
  EXPECT_DOUBLE_EQ(*self.c_b_pct, 100.0);
  e.capacity_words = 11;
  EXPECT_THROW(compute_stats(c, e), Error);
}

TEST(Sweep, BandsAndErrors) {
  const auto profile = shrunk("C1", 8192);
  const std::vector<double> tws = {2.5, 5.0, 10.0, 15.0};
  const auto pts = sweep_t_w([&] { return ChipModel(profile, 4); }, tws, DataPattern::solid(0));
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_GE(pts[0].failed_bit_fraction, 0.2559);
  EXPECT_LE(pts[0].failed_bit_fraction, 0.3730);
  EXPECT_LT(pts[1].failed_bit_fraction, 0.05);
  EXPECT_LT(pts[2].failed_bit_fraction, 0.01);
  EXPECT_EQ(pts[3].failed_bit_fraction, 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_LE(pts[i].failed_bit_fraction, pts[i - 1].failed_bit_fraction);
  EXPECT_THROW(sweep_t_w([&] { return ChipModel(profile, 4); }, std::vector<double>{}, DataPattern::solid(0)), Error);
  EXPECT_THROW(sweep_t_w([&] { return ChipModel(profile, 4); }, std::vector<double>{-1.0}, DataPattern::solid(0)),
               TimingError);
}
