#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>

#include "canopy/error.hpp"
#include "canopy/hypercube.hpp"

namespace canopy::testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("canopy_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Every wavelength the index formulas and the leaf filter reference.
inline const std::vector<double>& formula_wavelengths() {
  static const std::vector<double> wl{445, 500, 510, 531, 550, 570, 660, 670, 680, 700, 705,
                                      715, 720, 726, 734, 740, 747, 750, 780, 800, 900, 970};
  return wl;
}

using Spectrum = std::map<double, double>;  // nm -> reflectance

/// Cube whose pixel (x, y) carries `spectrum_at(x, y)`; wavelengths come from
/// the first spectrum returned.
inline Hypercube cube_of(std::size_t width, std::size_t height,
                         const std::function<Spectrum(std::size_t, std::size_t)>& spectrum_at) {
  const auto first = spectrum_at(0, 0);
  std::vector<double> wl;
  for (const auto& [nm, v] : first) wl.push_back(nm);
  std::vector<std::uint16_t> data(width * height * wl.size());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const auto s = spectrum_at(x, y);
      std::size_t c = 0;
      for (const auto& [nm, v] : s) {
        data[(c * height + y) * width + x] = static_cast<std::uint16_t>(v);
        ++c;
      }
    }
  }
  return Hypercube(width, height, std::move(wl), std::move(data));
}

/// A spectrum that passes the default leaf filter, on formula_wavelengths().
inline Spectrum leaf_spectrum() {
  return {{445, 100}, {500, 260}, {510, 300}, {531, 560}, {550, 800}, {570, 690},
          {660, 300}, {670, 290}, {680, 300}, {700, 600}, {705, 800}, {715, 1300},
          {720, 1550}, {726, 1900}, {734, 2450}, {740, 2850}, {747, 3300}, {750, 3500},
          {780, 3000}, {800, 4000}, {900, 4500}, {970, 4200}};
}

/// Bright soil: fails on P660 and P780.
inline Spectrum soil_spectrum() {
  Spectrum s;
  for (double nm : formula_wavelengths()) s[nm] = 1500;
  return s;
}

/// Collects warnings raised while alive.
class WarningCapture {
 public:
  WarningCapture() : guard_([this](const std::string& m) { messages.push_back(m); }) {}
  std::vector<std::string> messages;

 private:
  ScopedWarningHandler guard_;
};

}  // namespace canopy::testing
