#include <fstream>
#include <random>

#include "canopy/hypercube.hpp"
#include "support.hpp"

using namespace canopy;
using canopy::testing::TempDir;

namespace {

void write_pair(const TempDir& dir, const std::string& header, const std::vector<std::uint16_t>& values) {
  std::ofstream(dir / "cube.hdr") << header;
  std::ofstream raw(dir / "cube.raw", std::ios::binary);
  for (auto v : values) {
    raw.put(static_cast<char>(v & 0xff));
    raw.put(static_cast<char>(v >> 8));
  }
}

const char* kHeader223 =
    "samples: 2\nlines: 2\nbands: 3\ndata_type: uint16\ninterleave: bsq\nbyte_order: 0\n"
    "wavelengths: 445, 550, 800\n";

Hypercube ramp(std::vector<double> wl) {
  std::vector<std::uint16_t> data(2 * 1 * wl.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint16_t>(100 * (i % 90 + 1));
  return Hypercube(2, 1, std::move(wl), std::move(data));
}

}  // namespace

TEST_CASE("well-formed 2x2x3 pair loads", "[hypercube]") {
  TempDir dir;
  std::vector<std::uint16_t> values(12);
  for (std::size_t i = 0; i < 12; ++i) values[i] = static_cast<std::uint16_t>(i * 10);
  write_pair(dir, kHeader223, values);
  const auto cube = load_hypercube(dir / "cube.hdr");
  CHECK(cube.channels() == 3);
  CHECK(cube.width() == 2);
  CHECK(cube.height() == 2);
  // band-major, then row-major inside a band
  CHECK(cube.at(0, 0, 0) == 0);
  CHECK(cube.at(1, 0, 0) == 10);
  CHECK(cube.at(0, 1, 0) == 20);
  CHECK(cube.at(1, 1, 2) == 110);
  // the payload path works too
  CHECK(load_hypercube(dir / "cube.raw") == cube);
}

TEST_CASE("payload size mismatch is rejected", "[hypercube]") {
  TempDir dir;
  write_pair(dir, kHeader223, std::vector<std::uint16_t>(11, 5));
  CHECK_THROWS_AS(load_hypercube(dir / "cube.hdr"), Error);
}

TEST_CASE("non-ascending wavelengths are rejected", "[hypercube]") {
  TempDir dir;
  std::string h = kHeader223;
  h.replace(h.find("445, 550, 800"), 13, "550, 445, 800");
  write_pair(dir, h, std::vector<std::uint16_t>(12, 5));
  CHECK_THROWS_AS(load_hypercube(dir / "cube.hdr"), Error);
}

TEST_CASE("reflectance above 10000 is rejected", "[hypercube]") {
  TempDir dir;
  auto values = std::vector<std::uint16_t>(12, 5);
  values[7] = 10001;
  write_pair(dir, kHeader223, values);
  CHECK_THROWS_AS(load_hypercube(dir / "cube.hdr"), Error);
  CHECK_THROWS_AS(Hypercube(2, 2, {445, 550, 800}, values), Error);
}

TEST_CASE("garbled or incomplete headers are rejected", "[hypercube]") {
  TempDir dir;
  write_pair(dir, "samples: 2\nlines 2\n", std::vector<std::uint16_t>(12, 5));
  CHECK_THROWS_AS(load_hypercube(dir / "cube.hdr"), Error);
  write_pair(dir, "samples: 2\nlines: 2\nbands: 3\ninterleave: bsq\nwavelengths: 1,2,3\n",
             std::vector<std::uint16_t>(12, 5));
  CHECK_THROWS_AS(load_hypercube(dir / "cube.hdr"), Error);
  CHECK_THROWS_AS(load_hypercube(dir / "absent.hdr"), Error);
}

TEST_CASE("nearest_channel picks the closest wavelength", "[hypercube]") {
  const auto cube = ramp({445.2, 550.0, 676.1, 680.47, 684.9, 795.1, 799.94, 804.3});
  CHECK(cube.wavelengths()[cube.nearest_channel(680)] == 680.47);
  CHECK(cube.wavelengths()[cube.nearest_channel(800)] == 799.94);
  CHECK(cube.wavelengths()[cube.nearest_channel(550)] == 550.0);
}

TEST_CASE("nearest_channel ties go to the lower wavelength", "[hypercube]") {
  const auto cube = ramp({500, 510, 520});
  CHECK(cube.nearest_channel(505) == 0);
  CHECK(cube.nearest_channel(515) == 1);
  CHECK(cube.nearest_channel(1000) == 2);
  CHECK(cube.nearest_channel(10) == 0);
}

TEST_CASE("brightness reads the nearest channel", "[hypercube]") {
  std::vector<std::uint16_t> data{2500, 1, 7, 8, 9, 10};
  const Hypercube cube(2, 1, {700, 780, 790}, data);
  CHECK(cube.brightness(0, 0, 780) == 7);
  CHECK(cube.brightness(0, 0, 735) == 2500);  // closer to 700 than to 780
  CHECK(cube.brightness(1, 0, 785) == 8);                // tie -> 780
  CHECK_THROWS_AS(cube.brightness(2, 0, 780), Error);
  CHECK_THROWS_AS(cube.brightness(0, -1, 780), Error);
}

TEST_CASE("nearest_channel properties on random axes", "[hypercube][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> step(0.5, 9.0), target(380.0, 1100.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> wl{400.0};
    for (int i = 0; i < 60; ++i) wl.push_back(wl.back() + step(rng));
    const auto cube = ramp(wl);
    for (std::size_t i = 0; i < wl.size(); ++i) REQUIRE(cube.nearest_channel(wl[i]) == i);
    for (int q = 0; q < 40; ++q) {
      const double t = target(rng);
      const double best = std::abs(wl[cube.nearest_channel(t)] - t);
      for (double w : wl) REQUIRE(best <= std::abs(w - t));
    }
  }
}

TEST_CASE("save then load round-trips bit-exactly", "[hypercube]") {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> v(0, 10000);
  std::vector<double> wl{401.25, 455.5, 612.03125, 799.94, 1000.0 / 3.0 + 600.0};
  std::vector<std::uint16_t> data(7 * 5 * wl.size());
  for (auto& d : data) d = static_cast<std::uint16_t>(v(rng));
  const Hypercube cube(7, 5, wl, data);
  const auto header = save_hypercube(cube, dir / "scene");
  CHECK(header.extension() == ".hdr");
  const auto back = load_hypercube(header);
  CHECK(back == cube);
  CHECK(std::equal(back.wavelengths().begin(), back.wavelengths().end(), wl.begin()));
}
