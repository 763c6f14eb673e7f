#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

#include "mramsim/device.hpp"
#include "mramsim/error.hpp"
#include "mramsim/rng.hpp"

namespace mramsim {

// Word-level data backgrounds. The array is viewed as rows of `kRowWords`
// words; striped and checkerboard patterns alternate the base word with its
// complement by row, by column, or both.
enum class PatternKind { solid, row_striped, col_striped, checkerboard, random };

inline constexpr std::size_t kRowWords = 64;

class DataPattern {
 public:
  constexpr DataPattern() = default;
  constexpr DataPattern(PatternKind kind, std::uint64_t value) : kind_(kind), value_(value) {}

  static constexpr DataPattern solid(Word w) { return {PatternKind::solid, w}; }

  PatternKind kind() const noexcept { return kind_; }

  Word at(Address addr) const noexcept {
    const Word base = static_cast<Word>(value_);
    const Word inverse = static_cast<Word>(~base);
    const std::size_t row = addr / kRowWords;
    const std::size_t col = addr % kRowWords;
    switch (kind_) {
      case PatternKind::solid:
        return base;
      case PatternKind::row_striped:
        return row % 2 == 0 ? base : inverse;
      case PatternKind::col_striped:
        return col % 2 == 0 ? base : inverse;
      case PatternKind::checkerboard:
        return (row + col) % 2 == 0 ? base : inverse;
      case PatternKind::random:
        return static_cast<Word>(mix_key(value_, addr) & 0xFFFFu);
    }
    return base;
  }

  std::string descriptor() const {
    if (kind_ == PatternKind::random) return "random:" + std::to_string(value_);
    static constexpr const char* digits = "0123456789ABCDEF";
    std::string hex(4, '0');
    for (int i = 0; i < 4; ++i) hex[3 - i] = digits[(value_ >> (4 * i)) & 0xF];
    return std::string(kind_name()) + ":" + hex;
  }

  // solid:HHHH | row-striped:HHHH | col-striped:HHHH | checkerboard:HHHH | random:SEED
  static DataPattern parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw Error("pattern '" + std::string(text) + "' lacks ':'");
    const auto name = text.substr(0, colon);
    const auto arg = text.substr(colon + 1);

    PatternKind kind;
    if (name == "solid") kind = PatternKind::solid;
    else if (name == "row-striped") kind = PatternKind::row_striped;
    else if (name == "col-striped") kind = PatternKind::col_striped;
    else if (name == "checkerboard") kind = PatternKind::checkerboard;
    else if (name == "random") kind = PatternKind::random;
    else throw Error("unknown pattern kind '" + std::string(name) + "'");

    std::uint64_t value = 0;
    const int base = kind == PatternKind::random ? 10 : 16;
    const auto [end, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value, base);
    if (arg.empty() || ec != std::errc{} || end != arg.data() + arg.size())
      throw Error("bad pattern argument '" + std::string(arg) + "'");
    if (kind != PatternKind::random && (arg.size() > 4 || value > 0xFFFF))
      throw Error("pattern word '" + std::string(arg) + "' is wider than 16 bits");
    return {kind, value};
  }

 private:
  const char* kind_name() const noexcept {
    switch (kind_) {
      case PatternKind::solid: return "solid";
      case PatternKind::row_striped: return "row-striped";
      case PatternKind::col_striped: return "col-striped";
      case PatternKind::checkerboard: return "checkerboard";
      case PatternKind::random: return "random";
    }
    return "solid";
  }

  PatternKind kind_ = PatternKind::solid;
  std::uint64_t value_ = 0;
};

}  // namespace mramsim
