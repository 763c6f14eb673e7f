#pragma once

// JSON and CSV forms of profiles, chip snapshots, error maps, statistics,
// allocation tables and quality reports, plus atomic file output.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mramsim/allocator.hpp"
#include "mramsim/characterization.hpp"
#include "mramsim/device.hpp"
#include "mramsim/error.hpp"
#include "mramsim/quality.hpp"

namespace mramsim {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Formatting helpers

inline std::string hex_word(Word w) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%04X", static_cast<unsigned>(w));
  return buf;
}

inline Word parse_hex_word(const std::string& s) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used, 16);
  } catch (const std::logic_error&) {
    throw IoError("bad hex word '" + s + "'");
  }
  if (used != s.size() || v > 0xFFFF) throw IoError("bad hex word '" + s + "'");
  return static_cast<Word>(v);
}

inline std::string fixed(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string optional_pct(const std::optional<double>& v) { return v ? fixed(*v) : "-"; }

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into '" + path.string() + "'");
  }
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError(what + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Chip profile

inline Json to_json(const ChipProfile& p) {
  Json j;
  j["model_id"] = p.model_id;
  j["grade"] = to_string(p.grade);
  j["capacity_words"] = p.capacity_words;
  j["word_length"] = p.word_length;
  j["tau_1to0"] = {{"location", p.tau_1to0.location}, {"scale", p.tau_1to0.scale}};
  j["tau_0to1"] = {{"location", p.tau_0to1.location}, {"scale", p.tau_0to1.scale}};
  j["tau_word_share"] = p.tau_word_share;
  j["tau_max_ns"] = p.tau_max_ns;
  j["jitter_sigma"] = p.jitter_sigma;
  j["jitter_bound"] = p.jitter_bound;
  j["temp_coefficient"] = p.temp_coefficient;
  j["reference_temp_c"] = p.reference_temp_c;
  j["relief_curve"] = p.relief_curve;
  j["field_sensitivity"] = p.field_sensitivity;
  return j;
}

// Absent fields keep their defaults; unknown or mistyped fields are rejected.
inline ChipProfile profile_from_json(const Json& j) {
  if (!j.is_object()) throw ProfileError("<root>", "profile must be a JSON object");
  ChipProfile p;
  auto number = [](const Json& v, const std::string& field) {
    if (!v.is_number()) throw ProfileError(field, "must be a number");
    return v.get<double>();
  };
  auto count = [](const Json& v, const std::string& field) {
    if (!v.is_number_unsigned()) throw ProfileError(field, "must be a non-negative integer");
    return v.get<std::uint64_t>();
  };
  auto law = [&](const Json& v, const std::string& field, LogNormalParams& out) {
    if (!v.is_object()) throw ProfileError(field, "must be an object with location and scale");
    for (const auto& [k, x] : v.items()) {
      if (k == "location") out.location = number(x, field + ".location");
      else if (k == "scale") out.scale = number(x, field + ".scale");
      else throw ProfileError(field + "." + k, "unknown field");
    }
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "model_id") {
      if (!v.is_string()) throw ProfileError(key, "must be a string");
      p.model_id = v.get<std::string>();
    } else if (key == "grade") {
      if (!v.is_string()) throw ProfileError(key, "must be a string");
      p.grade = grade_from_string(v.get<std::string>());
    } else if (key == "capacity_words") {
      p.capacity_words = count(v, key);
    } else if (key == "word_length") {
      p.word_length = static_cast<unsigned>(count(v, key));
    } else if (key == "tau_1to0") {
      law(v, key, p.tau_1to0);
    } else if (key == "tau_0to1") {
      law(v, key, p.tau_0to1);
    } else if (key == "tau_word_share") {
      p.tau_word_share = number(v, key);
    } else if (key == "tau_max_ns") {
      p.tau_max_ns = number(v, key);
    } else if (key == "jitter_sigma") {
      p.jitter_sigma = number(v, key);
    } else if (key == "jitter_bound") {
      p.jitter_bound = number(v, key);
    } else if (key == "temp_coefficient") {
      p.temp_coefficient = number(v, key);
    } else if (key == "reference_temp_c") {
      p.reference_temp_c = number(v, key);
    } else if (key == "relief_curve") {
      if (!v.is_array() || v.size() != kReliefPoints)
        throw ProfileError(key, "must be an array of " + std::to_string(kReliefPoints) + " numbers");
      for (std::size_t k = 0; k < kReliefPoints; ++k) p.relief_curve[k] = number(v[k], key);
    } else if (key == "field_sensitivity") {
      p.field_sensitivity = number(v, key);
    } else {
      throw ProfileError(key, "unknown field");
    }
  }
  p.validate();
  return p;
}

inline ChipProfile load_profile(const std::string& path) {
  return profile_from_json(parse_json(read_text_file(path), "profile '" + path + "'"));
}

// ---------------------------------------------------------------------------
// Chip snapshot

inline Json snapshot_to_json(const ChipModel& chip) {
  std::string words;
  words.reserve(chip.capacity() * 4);
  char buf[8];
  for (Word w : chip.contents()) {
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(w));
    words += buf;
  }
  Json j;
  j["profile"] = to_json(chip.profile());
  j["seed"] = chip.seed();
  j["write_sequence"] = chip.write_sequence();
  j["contents"] = std::move(words);
  return j;
}

// Thresholds are not stored; they are regenerated from the profile and seed.
inline ChipModel snapshot_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("profile") || !j.contains("seed") || !j.contains("write_sequence") ||
      !j.contains("contents"))
    throw IoError("snapshot needs profile, seed, write_sequence and contents");
  if (!j["seed"].is_number_unsigned() || !j["write_sequence"].is_number_unsigned() || !j["contents"].is_string())
    throw IoError("snapshot fields have the wrong types");
  ChipModel chip(profile_from_json(j["profile"]), j["seed"].get<std::uint64_t>());
  const auto& hex = j["contents"].get_ref<const std::string&>();
  if (hex.size() != chip.capacity() * 4) throw IoError("snapshot contents do not match the profile capacity");
  std::vector<Word> words(chip.capacity());
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = parse_hex_word(hex.substr(4 * i, 4));
  chip.load_contents(words);
  chip.set_write_sequence(j["write_sequence"].get<std::uint64_t>());
  return chip;
}

// ---------------------------------------------------------------------------
// Error map

inline Json to_json(const ErrorMap& m) {
  Json j;
  j["chip_id"] = m.chip_id;
  j["t_w_ns"] = m.t_w_ns;
  j["n"] = m.n;
  j["pattern"] = m.pattern;
  j["capacity_words"] = m.capacity_words;
  j["per_measurement_counts"] = m.per_measurement_counts;
  Json entries = Json::array();
  for (const auto& [addr, e] : m.erroneous)
    entries.push_back({{"addr", hex_word(static_cast<Word>(addr))}, {"mask", hex_word(e.mask)},
                       {"stored", hex_word(e.stored)}});
  j["entries"] = std::move(entries);
  return j;
}

inline ErrorMap error_map_from_json(const Json& j) {
  try {
    ErrorMap m;
    m.chip_id = j.at("chip_id").get<std::string>();
    m.t_w_ns = j.at("t_w_ns").get<double>();
    m.n = j.at("n").get<unsigned>();
    m.pattern = j.at("pattern").get<std::string>();
    m.capacity_words = j.at("capacity_words").get<std::size_t>();
    if (j.contains("per_measurement_counts"))
      m.per_measurement_counts = j["per_measurement_counts"].get<std::vector<std::size_t>>();
    for (const auto& e : j.at("entries")) {
      const auto addr = static_cast<Address>(parse_hex_word(e.at("addr").get<std::string>()));
      if (addr >= m.capacity_words) throw IoError("error map entry beyond its capacity");
      ErrorEntry entry{parse_hex_word(e.at("mask").get<std::string>()), 0};
      if (e.contains("stored")) entry.stored = parse_hex_word(e["stored"].get<std::string>());
      if (entry.mask == 0) throw IoError("error map entry with an empty mask");
      if (!m.erroneous.emplace(addr, entry).second) throw IoError("error map repeats an address");
    }
    return m;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed error map: ") + e.what());
  }
}

inline ErrorMap load_error_map(const std::string& path) {
  return error_map_from_json(parse_json(read_text_file(path), "error map '" + path + "'"));
}

// ---------------------------------------------------------------------------
// Statistics CSV

inline constexpr const char* kStatsHeader = "chip,pattern,t_w_ns,e_a_pct,e_b_pct,m_a_pct,m_b_pct,c_a_pct,c_b_pct";

inline std::string stats_row(const std::string& chip, const std::string& pattern, double t_w_ns,
                             const ErrorStats& s) {
  return chip + "," + pattern + "," + fixed(t_w_ns, 2) + "," + fixed(s.e_a_pct) + "," + fixed(s.e_b_pct) + "," +
         fixed(s.m_a_pct) + "," + fixed(s.m_b_pct) + "," + optional_pct(s.c_a_pct) + "," + optional_pct(s.c_b_pct);
}

// ---------------------------------------------------------------------------
// Allocation

inline Json to_json(const AllocationTable& t) {
  Json j;
  j["capacity_words"] = t.capacity_words();
  j["block_size_bytes"] = t.block_size_bytes();
  j["memory_bytes"] = t.memory_bytes();
  j["tracking_structure_bits"] = t.tracking_structure_bits();
  Json blocks = Json::array();
  const auto& flags = t.erroneous_blocks();
  for (std::size_t b = 0; b < flags.size(); ++b)
    if (flags[b]) blocks.push_back(b);
  j["erroneous_blocks"] = std::move(blocks);
  Json maps = Json::array();
  for (const auto& [v, m] : t.mappings())
    maps.push_back({{"virtual", v}, {"physical", hex_word(static_cast<Word>(m.physical))}, {"critical", m.critical}});
  j["mappings"] = std::move(maps);
  return j;
}

inline constexpr const char* kPoolHeader = "capacity_words,accurate,approximate,accurate_fraction,block_size_bytes";

inline std::string pool_row(const AddressPool& p) {
  return std::to_string(p.capacity_words) + "," + std::to_string(p.accurate.size()) + "," +
         std::to_string(p.approximate.size()) + "," + fixed(p.accurate_fraction(), 6) + "," +
         std::to_string(p.block_size_bytes);
}

// ---------------------------------------------------------------------------
// Quality

inline constexpr const char* kQualityHeader = "image,init,selection,t_w_ns,snr,snr_db,mse,erroneous_pixels";

inline std::string quality_row(const std::string& image, InitState init, AddressSelection selection,
                               double t_w_ns, const QualityReport& r) {
  return image + "," + (init == InitState::all_ones ? "ones" : "zeros") + "," +
         (selection == AddressSelection::none ? "none" : "strategy1") + "," + fixed(t_w_ns, 2) + "," +
         fixed(r.snr, 6) + "," + fixed(r.snr_db(), 4) + "," + fixed(r.mse, 6) + "," +
         std::to_string(r.erroneous_pixels);
}

}  // namespace mramsim
