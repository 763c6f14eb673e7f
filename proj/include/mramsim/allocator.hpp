#pragma once

// Accurate/approximate address partition and the critical-bit page mapping.
//
// Addresses are 16-bit word addresses of the chip. The OS-facing tracking
// structure works on blocks of `block_size_bytes`; a block is erroneous when
// any of its words is.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mramsim/characterization.hpp"
#include "mramsim/device.hpp"
#include "mramsim/error.hpp"

namespace mramsim {

inline constexpr std::size_t kWordBytes = kWordBits / 8;
inline constexpr std::size_t kDefaultBlockBytes = 32;

struct AddressPool {
  std::size_t capacity_words = 0;
  std::vector<Address> accurate;   // ascending
  SortedAddressList approximate;   // least severe first
  std::size_t block_size_bytes = kDefaultBlockBytes;

  // First-fit cursors; nothing is ever returned to a pool.
  std::size_t accurate_used = 0;
  std::size_t approximate_used = 0;

  std::size_t accurate_free() const noexcept { return accurate.size() - accurate_used; }
  std::size_t approximate_free() const noexcept { return approximate.size() - approximate_used; }

  double accurate_fraction() const noexcept {
    return capacity_words == 0 ? 0.0 : static_cast<double>(accurate.size()) / static_cast<double>(capacity_words);
  }
};

inline AddressPool build_pool(const ErrorMap& error_map, std::size_t capacity, const SortedAddressList& sorted,
                              std::size_t block_size_bytes = kDefaultBlockBytes) {
  if (sorted.size() != error_map.address_count())
    throw Error("sorted list does not match the error map (" + std::to_string(sorted.size()) + " vs " +
                std::to_string(error_map.address_count()) + " addresses)");
  std::set<Address> seen;
  for (const auto& e : sorted.entries) {
    if (!error_map.contains(e.address))
      throw Error("sorted address " + std::to_string(e.address) + " is absent from the error map");
    if (!seen.insert(e.address).second) throw Error("sorted list repeats address " + std::to_string(e.address));
  }
  if (!error_map.erroneous.empty() && error_map.erroneous.rbegin()->first >= capacity)
    throw Error("error map addresses exceed the pool capacity");

  AddressPool pool;
  pool.capacity_words = capacity;
  pool.block_size_bytes = block_size_bytes;
  pool.approximate = sorted;
  pool.accurate.reserve(capacity - error_map.address_count());
  for (Address a = 0; a < capacity; ++a)
    if (!error_map.contains(a)) pool.accurate.push_back(a);
  return pool;
}

struct AllocationRequest {
  std::size_t words = 0;
  bool critical = false;
};

struct AllocationPolicy {
  // Approximate data takes free accurate addresses before erroneous ones.
  bool approximate_prefers_accurate = true;
};

// All-or-nothing: on failure the pool is left untouched.
inline std::vector<Address> allocate(AddressPool& pool, const AllocationRequest& request,
                                     const AllocationPolicy& policy = {}) {
  if (request.words == 0) throw AllocationError("allocation request must ask for at least one word");

  std::vector<Address> out;
  out.reserve(request.words);
  if (request.critical) {
    if (request.words > pool.accurate_free())
      throw AllocationError("critical request of " + std::to_string(request.words) + " words exceeds the " +
                            std::to_string(pool.accurate_free()) + " free accurate addresses");
    for (std::size_t i = 0; i < request.words; ++i) out.push_back(pool.accurate[pool.accurate_used + i]);
    pool.accurate_used += request.words;
    return out;
  }

  const std::size_t from_accurate =
      policy.approximate_prefers_accurate ? std::min(request.words, pool.accurate_free()) : 0;
  const std::size_t from_approximate = request.words - from_accurate;
  if (from_approximate > pool.approximate_free())
    throw AllocationError("approximate request of " + std::to_string(request.words) +
                          " words exceeds the free addresses of both pools");
  for (std::size_t i = 0; i < from_accurate; ++i) out.push_back(pool.accurate[pool.accurate_used + i]);
  for (std::size_t i = 0; i < from_approximate; ++i)
    out.push_back(pool.approximate.entries[pool.approximate_used + i].address);
  pool.accurate_used += from_accurate;
  pool.approximate_used += from_approximate;
  return out;
}

// Bits needed to flag every block of a memory as accurate or erroneous.
inline std::uint64_t tracking_overhead(std::uint64_t memory_bytes, std::uint64_t block_size) {
  if (block_size == 0 || memory_bytes % block_size != 0)
    throw Error("block size " + std::to_string(block_size) + " does not divide memory size " +
                std::to_string(memory_bytes));
  return memory_bytes / block_size;
}

struct Mapping {
  Address physical = 0;
  bool critical = false;

  friend bool operator==(const Mapping&, const Mapping&) = default;
};

using VirtualAddress = std::uint64_t;

class AllocationTable {
 public:
  explicit AllocationTable(const AddressPool& pool)
      : capacity_words_(pool.capacity_words),
        block_size_bytes_(pool.block_size_bytes),
        erroneous_words_(pool.capacity_words, false) {
    if (block_size_bytes_ == 0 || block_size_bytes_ % kWordBytes != 0)
      throw Error("block size must be a positive multiple of the word size");
    for (const auto& e : pool.approximate.entries) erroneous_words_[e.address] = true;
    const std::size_t words_per_block = block_size_bytes_ / kWordBytes;
    erroneous_blocks_.assign((capacity_words_ + words_per_block - 1) / words_per_block, false);
    for (const auto& e : pool.approximate.entries) erroneous_blocks_[e.address / words_per_block] = true;
  }

  void map(VirtualAddress vaddr, Mapping m) {
    if (m.physical >= capacity_words_)
      throw AllocationError("physical address " + std::to_string(m.physical) + " out of range");
    if (m.critical && erroneous_words_[m.physical])
      throw AllocationError("critical data cannot map to erroneous address " + std::to_string(m.physical));
    if (!mappings_.emplace(vaddr, m).second)
      throw AllocationError("virtual address " + std::to_string(vaddr) + " is already mapped");
  }

  // Allocates from the pool and maps the words to vbase, vbase + 1, ...
  std::vector<Address> assign(AddressPool& pool, VirtualAddress vbase, const AllocationRequest& request,
                              const AllocationPolicy& policy = {}) {
    for (std::size_t i = 0; i < request.words; ++i)
      if (mappings_.count(vbase + i))
        throw AllocationError("virtual address " + std::to_string(vbase + i) + " is already mapped");
    auto physical = allocate(pool, request, policy);
    for (std::size_t i = 0; i < physical.size(); ++i) map(vbase + i, {physical[i], request.critical});
    return physical;
  }

  Mapping translate(VirtualAddress vaddr) const {
    const auto it = mappings_.find(vaddr);
    if (it == mappings_.end()) throw TranslationFault("virtual address " + std::to_string(vaddr) + " is not mapped");
    return it->second;
  }

  bool block_is_erroneous(Address word) const { return erroneous_blocks_.at(word / words_per_block()); }

  std::uint64_t memory_bytes() const noexcept { return static_cast<std::uint64_t>(capacity_words_) * kWordBytes; }

  // One flag bit per block, rounded up to whole blocks.
  std::uint64_t tracking_structure_bits() const noexcept { return erroneous_blocks_.size(); }

  std::size_t block_size_bytes() const noexcept { return block_size_bytes_; }
  std::size_t capacity_words() const noexcept { return capacity_words_; }
  const std::vector<bool>& erroneous_blocks() const noexcept { return erroneous_blocks_; }
  const std::map<VirtualAddress, Mapping>& mappings() const noexcept { return mappings_; }

 private:
  std::size_t words_per_block() const noexcept { return block_size_bytes_ / kWordBytes; }

  std::size_t capacity_words_;
  std::size_t block_size_bytes_;
  std::vector<bool> erroneous_words_;
  std::vector<bool> erroneous_blocks_;
  std::map<VirtualAddress, Mapping> mappings_;
};

}  // namespace mramsim
