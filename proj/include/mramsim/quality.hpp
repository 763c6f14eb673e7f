#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mramsim/allocator.hpp"
#include "mramsim/device.hpp"
#include "mramsim/error.hpp"

namespace mramsim {

// 8-bit grayscale, row-major.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(std::size_t width, std::size_t height, std::uint8_t fill = 0)
      : width_(width), height_(height), pixels_(width * height, fill) {
    if (width == 0 || height == 0) throw Error("image dimensions must be positive");
  }
  ImageBuffer(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width == 0 || height == 0) throw Error("image dimensions must be positive");
    if (pixels_.size() != width * height) throw Error("pixel count does not match image dimensions");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels_[y * width_ + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x]; }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

namespace detail {

inline void require_same_shape(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error("image dimensions differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

inline std::uint64_t squared_error_sum(const ImageBuffer& original, const ImageBuffer& approx) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const std::int64_t d = static_cast<std::int64_t>(approx.pixels()[i]) - original.pixels()[i];
    sum += static_cast<std::uint64_t>(d * d);
  }
  return sum;
}

}  // namespace detail

// Energy of the approximated image over the energy of the error; +inf when exact.
inline double snr(const ImageBuffer& original, const ImageBuffer& approx) {
  detail::require_same_shape(original, approx);
  const std::uint64_t noise = detail::squared_error_sum(original, approx);
  if (noise == 0) return std::numeric_limits<double>::infinity();
  std::uint64_t signal = 0;
  for (auto p : approx.pixels()) signal += static_cast<std::uint64_t>(p) * p;
  return static_cast<double>(signal) / static_cast<double>(noise);
}

inline double mse(const ImageBuffer& original, const ImageBuffer& approx) {
  detail::require_same_shape(original, approx);
  return static_cast<double>(detail::squared_error_sum(original, approx)) / static_cast<double>(original.size());
}

struct QualityReport {
  double snr = std::numeric_limits<double>::infinity();
  double mse = 0.0;
  std::size_t erroneous_pixels = 0;

  double snr_db() const { return 10.0 * std::log10(snr); }
};

inline QualityReport evaluate_quality(const ImageBuffer& original, const ImageBuffer& approx) {
  QualityReport r;
  r.snr = snr(original, approx);
  r.mse = mse(original, approx);
  for (std::size_t i = 0; i < original.size(); ++i)
    if (original.pixels()[i] != approx.pixels()[i]) ++r.erroneous_pixels;
  return r;
}

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

inline ImageBuffer read_pgm(std::istream& in) {
  auto fail = [](const std::string& why) -> IoError { return IoError("malformed PGM: " + why); };
  auto next_token = [&]() {
    std::string tok;
    for (;;) {
      const int c = in.get();
      if (c == EOF) break;
      if (c == '#') {
        if (!tok.empty()) {
          in.unget();
          break;
        }
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    return tok;
  };
  auto number = [&](const char* what) {
    const auto tok = next_token();
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9)
      throw fail(std::string("bad ") + what + " '" + tok + "'");
    return static_cast<std::size_t>(std::stoul(tok));
  };

  if (next_token() != "P5") throw fail("missing P5 magic");
  const std::size_t width = number("width");
  const std::size_t height = number("height");
  const std::size_t maxval = number("maxval");
  if (width == 0 || height == 0) throw fail("zero dimension");
  if (maxval != 255) throw fail("only maxval 255 is supported");

  std::vector<std::uint8_t> pixels(width * height);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != pixels.size()) throw fail("truncated pixel data");
  return ImageBuffer(width, height, std::move(pixels));
}

inline ImageBuffer read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path + "'");
  return read_pgm(in);
}

inline std::string encode_pgm(const ImageBuffer& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels().data()), image.size());
  return out;
}

// Deterministic grayscale scene used by the image experiments: two soft blobs
// over a diagonal ramp, with a shadowed lower-left corner at black level 1.
inline ImageBuffer make_test_image(std::size_t width = 90, std::size_t height = 90) {
  ImageBuffer img(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(width);
      const double v = static_cast<double>(y) / static_cast<double>(height);
      const double ramp = 0.35 * (u + v);
      const double blob1 = 0.45 * std::exp(-((u - 0.3) * (u - 0.3) + (v - 0.35) * (v - 0.35)) / 0.02);
      const double blob2 = 0.35 * std::exp(-((u - 0.7) * (u - 0.7) + (v - 0.7) * (v - 0.7)) / 0.035);
      const double ripple = 0.05 * std::sin(12.0 * std::numbers::pi * u) * std::cos(8.0 * std::numbers::pi * v);
      const double value = std::clamp(ramp + blob1 + blob2 + ripple, 0.0, 1.0);
      const double shade = std::clamp((0.5 - u) * 2.2 + (v - 0.6) * 2.0, 0.0, 1.0);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(16.0 + 216.0 * value - 260.0 * shade, 1.0, 255.0)));
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Read-back experiment

enum class InitState { all_ones, all_zeros };
enum class AddressSelection { none, strategy1 };
enum class PixelPacking { one_per_word, two_per_word };

struct ImageExperiment {
  ImageBuffer readback;
  QualityReport report;
  std::vector<Address> placement;  // word address of each stored word, in write order
};

inline std::size_t words_for(const ImageBuffer& image, PixelPacking packing) {
  return packing == PixelPacking::one_per_word ? image.size() : (image.size() + 1) / 2;
}

// The pool is copied; the caller's pool is not consumed.
inline ImageExperiment run_image_experiment(ChipModel& chip, const ImageBuffer& image, InitState init,
                                            AddressSelection selection, double t_w_ns, const Environment& env,
                                            const AddressPool* pool = nullptr,
                                            PixelPacking packing = PixelPacking::one_per_word) {
  const std::size_t words = words_for(image, packing);
  if (words > chip.capacity())
    throw Error("image needs " + std::to_string(words) + " words, chip holds " + std::to_string(chip.capacity()));
  if (selection == AddressSelection::strategy1 && pool == nullptr)
    throw Error("address selection requires a characterized address pool");

  ImageExperiment result;
  if (selection == AddressSelection::none) {
    result.placement.resize(words);
    for (std::size_t i = 0; i < words; ++i) result.placement[i] = static_cast<Address>(i);
  } else {
    AddressPool scratch = *pool;
    result.placement = allocate(scratch, {words, false});
  }

  auto word_at = [&](std::size_t i) -> Word {
    const auto& px = image.pixels();
    if (packing == PixelPacking::one_per_word) return px[i];
    const Word lo = px[2 * i];
    const Word hi = 2 * i + 1 < px.size() ? px[2 * i + 1] : 0;
    return static_cast<Word>(lo | (hi << 8));
  };

  chip.reset_memory(init == InitState::all_ones ? Word{0xFFFF} : Word{0x0000});
  const auto timings = WriteTimings::with_pulse(t_w_ns);
  for (std::size_t i = 0; i < words; ++i) chip.write_word(result.placement[i], word_at(i), timings, env);

  std::vector<std::uint8_t> out(image.size());
  for (std::size_t i = 0; i < words; ++i) {
    const Word w = chip.read_word(result.placement[i]);
    if (packing == PixelPacking::one_per_word) {
      out[i] = static_cast<std::uint8_t>(w & 0xFF);
    } else {
      out[2 * i] = static_cast<std::uint8_t>(w & 0xFF);
      if (2 * i + 1 < out.size()) out[2 * i + 1] = static_cast<std::uint8_t>(w >> 8);
    }
  }
  result.readback = ImageBuffer(image.width(), image.height(), std::move(out));
  result.report = evaluate_quality(image, result.readback);
  return result;
}

}  // namespace mramsim
