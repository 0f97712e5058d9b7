#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/text.hpp"

namespace canopy {

inline constexpr std::uint16_t kMaxReflectance = 10000;

/// A reflectance cube: width x height pixels, one scaled-integer reflectance
/// per spectral channel. Storage is band-sequential (channel-major, then
/// row-major), matching the on-disk payload. Immutable after construction.
class Hypercube {
 public:
  Hypercube() = default;

  Hypercube(std::size_t width, std::size_t height, std::vector<double> wavelengths,
            std::vector<std::uint16_t> reflectance)
      : width_(width),
        height_(height),
        wavelengths_(std::move(wavelengths)),
        data_(std::move(reflectance)) {
    if (width_ == 0 || height_ == 0) throw Error("hypercube: empty spatial extent");
    if (wavelengths_.empty()) throw Error("hypercube: no spectral channels");
    for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
      if (!(wavelengths_[i] > wavelengths_[i - 1])) {
        throw Error("hypercube: wavelengths must be strictly ascending (channel " +
                    std::to_string(i) + ")");
      }
    }
    if (data_.size() != width_ * height_ * wavelengths_.size()) {
      throw Error("hypercube: payload has " + std::to_string(data_.size()) +
                  " values, header requires " +
                  std::to_string(width_ * height_ * wavelengths_.size()));
    }
    auto bad = std::find_if(data_.begin(), data_.end(),
                            [](std::uint16_t v) { return v > kMaxReflectance; });
    if (bad != data_.end()) {
      throw Error("hypercube: reflectance " + std::to_string(*bad) + " outside [0, 10000]");
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return wavelengths_.size(); }
  std::span<const double> wavelengths() const { return wavelengths_; }
  std::span<const std::uint16_t> raw() const { return data_; }

  bool contains(long x, long y) const {
    return x >= 0 && y >= 0 && static_cast<std::size_t>(x) < width_ &&
           static_cast<std::size_t>(y) < height_;
  }

  std::uint16_t at(std::size_t x, std::size_t y, std::size_t channel) const {
    return data_[(channel * height_ + y) * width_ + x];
  }

  /// Channel whose wavelength is closest to `target_nm`; ties go to the
  /// lower wavelength.
  std::size_t nearest_channel(double target_nm) const {
    auto it = std::lower_bound(wavelengths_.begin(), wavelengths_.end(), target_nm);
    if (it == wavelengths_.begin()) return 0;
    if (it == wavelengths_.end()) return wavelengths_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - wavelengths_.begin());
    const auto lo = hi - 1;
    const double d_lo = target_nm - wavelengths_[lo];
    const double d_hi = wavelengths_[hi] - target_nm;
    return d_hi < d_lo ? hi : lo;
  }

  /// Reflectance of pixel (x, y) at the channel nearest `target_nm`.
  double brightness(long x, long y, double target_nm) const {
    if (!contains(x, y)) {
      throw Error("hypercube: pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                  ") out of bounds");
    }
    return static_cast<double>(at(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                  nearest_channel(target_nm)));
  }

  friend bool operator==(const Hypercube&, const Hypercube&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> wavelengths_;
  std::vector<std::uint16_t> data_;
};

/// Sibling header and payload paths of a cube pair.
inline std::filesystem::path payload_path_for(const std::filesystem::path& header) {
  auto p = header;
  p.replace_extension(".raw");
  return p;
}

inline std::filesystem::path header_path_for(const std::filesystem::path& any) {
  auto p = any;
  p.replace_extension(".hdr");
  return p;
}

/// Reads a cube from its text header (`<stem>.hdr`) and little-endian
/// band-sequential uint16 payload (`<stem>.raw`). Either path may be given.
inline Hypercube load_hypercube(const std::filesystem::path& path) {
  const auto header_path = header_path_for(path);
  const auto payload_path = payload_path_for(path);
  std::ifstream header(header_path);
  if (!header) throw Error("hypercube: cannot open header " + header_path.string());

  std::map<std::string, std::string> fields;
  std::string line;
  while (std::getline(header, line)) {
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto sep = body.find_first_of(":=");
    if (sep == std::string_view::npos) {
      throw Error("hypercube: garbled header line '" + std::string(body) + "'");
    }
    fields[text::lower(text::trim(body.substr(0, sep)))] =
        std::string(text::trim(body.substr(sep + 1)));
  }

  auto require = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error("hypercube: header missing '" + key + "'");
    return it->second;
  };
  auto as_size = [&](const std::string& key) {
    const auto& s = require(key);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0) {
      throw Error("hypercube: header field '" + key + "' is not a positive integer");
    }
    return v;
  };

  const std::size_t samples = as_size("samples");
  const std::size_t lines = as_size("lines");
  const std::size_t bands = as_size("bands");
  const auto data_type = text::lower(require("data_type"));
  if (data_type != "uint16" && data_type != "12") {
    throw Error("hypercube: unsupported data_type '" + data_type + "' (expected uint16)");
  }
  const auto interleave = text::lower(require("interleave"));
  if (interleave != "bsq") {
    throw Error("hypercube: unsupported interleave '" + interleave + "' (expected bsq)");
  }
  if (auto it = fields.find("byte_order"); it != fields.end() && it->second != "0") {
    throw Error("hypercube: only little-endian payloads (byte_order 0) are supported");
  }

  std::string wl = require("wavelengths");
  std::erase_if(wl, [](char c) { return c == '{' || c == '}'; });
  std::vector<double> wavelengths;
  for (auto token : text::split(wl, ',')) {
    auto t = text::trim(token);
    if (t.empty()) continue;
    auto v = text::parse_double(t);
    if (!v) throw Error("hypercube: bad wavelength '" + std::string(t) + "'");
    wavelengths.push_back(*v);
  }
  if (wavelengths.size() != bands) {
    throw Error("hypercube: header lists " + std::to_string(wavelengths.size()) +
                " wavelengths for " + std::to_string(bands) + " bands");
  }

  std::ifstream payload(payload_path, std::ios::binary);
  if (!payload) throw Error("hypercube: cannot open payload " + payload_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(payload)),
                          std::istreambuf_iterator<char>());
  const std::size_t expected = samples * lines * bands;
  if (bytes.size() != expected * 2) {
    throw Error("hypercube: payload holds " + std::to_string(bytes.size() / 2) +
                " values, header requires " + std::to_string(expected));
  }
  std::vector<std::uint16_t> data(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    const auto lo = static_cast<unsigned char>(bytes[2 * i]);
    const auto hi = static_cast<unsigned char>(bytes[2 * i + 1]);
    data[i] = static_cast<std::uint16_t>(lo | (hi << 8));
  }
  return Hypercube(samples, lines, std::move(wavelengths), std::move(data));
}

/// Writes `<stem>.hdr` and `<stem>.raw`; returns the header path.
inline std::filesystem::path save_hypercube(const Hypercube& cube,
                                            const std::filesystem::path& path) {
  const auto header_path = header_path_for(path);
  const auto payload_path = payload_path_for(path);
  {
    std::ofstream header(header_path);
    if (!header) throw Error("hypercube: cannot write " + header_path.string());
    header << "samples: " << cube.width() << '\n'
           << "lines: " << cube.height() << '\n'
           << "bands: " << cube.channels() << '\n'
           << "data_type: uint16\n"
           << "interleave: bsq\n"
           << "byte_order: 0\n"
           << "wavelengths: ";
    const auto wl = cube.wavelengths();
    for (std::size_t i = 0; i < wl.size(); ++i) {
      header << (i ? ", " : "") << text::format_double(wl[i]);
    }
    header << '\n';
  }
  std::ofstream payload(payload_path, std::ios::binary);
  if (!payload) throw Error("hypercube: cannot write " + payload_path.string());
  std::vector<char> bytes(cube.raw().size() * 2);
  for (std::size_t i = 0; i < cube.raw().size(); ++i) {
    bytes[2 * i] = static_cast<char>(cube.raw()[i] & 0xff);
    bytes[2 * i + 1] = static_cast<char>(cube.raw()[i] >> 8);
  }
  payload.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  return header_path;
}

}  // namespace canopy
