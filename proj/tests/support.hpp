#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mramsim/calibration.hpp"
#include "mramsim/device.hpp"

namespace testing_support {

// Calibrated reference profile shrunk to a smaller chip for fast tests.
inline mramsim::ChipProfile shrunk(const std::string& id, std::size_t capacity) {
  auto p = mramsim::builtin_profile(id);
  p.capacity_words = capacity;
  return p;
}

// Hand-set profile with no jitter, for cases that need exact thresholds.
inline mramsim::ChipProfile plain_profile(std::size_t capacity) {
  mramsim::ChipProfile p;
  p.model_id = "plain";
  p.capacity_words = capacity;
  p.tau_1to0 = {0.6, 0.35};
  p.tau_0to1 = {0.1, 0.35};
  p.jitter_sigma = 0.0;
  p.temp_coefficient = 0.002;
  return p;
}

inline std::vector<std::uint16_t> random_words(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<unsigned> d(0, 0xFFFF);
  std::vector<std::uint16_t> out(n);
  for (auto& w : out) w = static_cast<std::uint16_t>(d(rng));
  return out;
}

}  // namespace testing_support
