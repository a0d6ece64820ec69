// Units, seeds, the worker pool and the curve file format.

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>

#include "xxz/curve_io.hpp"
#include "xxz/error.hpp"
#include "xxz/parallel.hpp"
#include "xxz/rng.hpp"
#include "xxz/svg_plot.hpp"
#include "xxz/units.hpp"

using namespace xxz;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an xxz::Error");
  return ErrorCode::DomainError;
}

}  // namespace

TEST_SUITE("foundation") {

TEST_CASE("quantities convert to internal units") {
  CHECK(parse_quantity("5 um", Dimension::Length) == 5.0);
  CHECK(parse_quantity("5 μm", Dimension::Length) == 5.0);
  CHECK(parse_quantity("0.5 mm", Dimension::Length) == doctest::Approx(500.0));
  CHECK(parse_quantity("1.25e8 cm^-3", Dimension::Density) == doctest::Approx(1.25e-4).epsilon(1e-14));
  CHECK(parse_quantity("7 kHz", Dimension::Frequency) == doctest::Approx(0.007));
  CHECK(parse_quantity("59 GHz*um^6", Dimension::C6) == doctest::Approx(59000.0));
  CHECK(parse_quantity("250 ns", Dimension::Time) == doctest::Approx(0.25));
  CHECK(angular(1.0) == doctest::Approx(2.0 * M_PI));
}

TEST_CASE("unit errors are configuration errors") {
  CHECK(code_of([] { parse_quantity("5", Dimension::Length); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_quantity("5 parsec", Dimension::Length); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_quantity("5 MHz", Dimension::Length); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_quantity("abc um", Dimension::Length); }) == ErrorCode::ConfigError);
}

TEST_CASE("derived seeds are deterministic and separate streams") {
  CHECK(derive_seed(42, {1, 2}) == derive_seed(42, {1, 2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a) {
    for (std::uint64_t b = 0; b < 4; ++b) seen.insert(derive_seed(42, {a, b}));
  }
  CHECK(seen.size() == 200);
  CHECK(derive_seed(42, {1, 2}) != derive_seed(42, {2, 1}));
  CHECK(derive_seed(42, {1}) != derive_seed(43, {1}));

  Rng a(5), b(5);
  for (int k = 0; k < 10; ++k) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("parallel_for visits every index once and rethrows the lowest failure") {
  for (unsigned w : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), w, [&](std::size_t k) { hits[k]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  try {
    parallel_for(20, 4, [](std::size_t k) {
      if (k == 7 || k == 13) throw std::runtime_error(std::to_string(k));
    });
    FAIL("no exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "7");
  }
}

TEST_CASE("worker count comes from the environment") {
  ::setenv("XXZ_WORKERS", "3", 1);
  CHECK(default_workers() == 3);
  ::setenv("XXZ_WORKERS", "zero", 1);
  CHECK(code_of([] { default_workers(); }) == ErrorCode::ConfigError);
  ::unsetenv("XXZ_WORKERS");
  CHECK(default_workers() >= 1);
}

TEST_CASE("curve files round-trip bit-exactly with metadata") {
  ObservableSeries c;
  c.times = {0.0, 0.1, 1.0 / 3.0};
  c.allocate(true);
  for (std::size_t k = 0; k < c.size(); ++k) {
    c.sx[k] = 0.5 * std::exp(-static_cast<double>(k) / 7.0);
    c.sx_err[k] = 1e-3 / (1.0 + k);
    c.sy[k] = -1e-17 * k;
    c.entropy[k] = std::sqrt(2.0) * k;
  }
  std::stringstream ss;
  write_curve(ss, c, {{"method", "dtwa"}, {"seed", "9"}});
  CurveMetadata meta;
  const ObservableSeries r = read_curve(ss, &meta);
  CHECK(meta.at("method") == "dtwa");
  CHECK(meta.at("seed") == "9");
  CHECK(r.times == c.times);
  CHECK(r.sx == c.sx);
  CHECK(r.sx_err == c.sx_err);
  CHECK(r.sy == c.sy);
  CHECK(r.entropy == c.entropy);
}

TEST_CASE("malformed curve files raise IoError") {
  std::stringstream a("# t_us Sx\n0 0.5\n");
  CHECK(code_of([&] { read_curve(a); }) == ErrorCode::IoError);
  std::stringstream b("# t_us Sx Sx_err Sy Sy_err Sz Sz_err\n0 0.5 0 0 0 0\n");
  CHECK(code_of([&] { read_curve(b); }) == ErrorCode::IoError);
  std::stringstream c("# t_us Sx Sx_err Sy Sy_err Sz Sz_err\n0 0.5 0 0 0 0 x\n");
  CHECK(code_of([&] { read_curve(c); }) == ErrorCode::IoError);
}

TEST_CASE("averaging uses the sample standard error") {
  ObservableSeries a, b;
  a.times = b.times = {0.0, 1.0};
  a.allocate(false);
  b.allocate(false);
  a.sx = {0.5, 0.2};
  b.sx = {0.5, 0.4};
  const ObservableSeries m = average_curves({a, b});
  CHECK(m.sx[1] == doctest::Approx(0.3));
  // std of {0.2, 0.4} with n-1 is sqrt(0.02); divided by sqrt(2).
  CHECK(m.sx_err[1] == doctest::Approx(0.1));
  CHECK(m.sx_err[0] == 0.0);
  ObservableSeries c;
  c.times = {0.0, 2.0};
  c.allocate(false);
  CHECK(code_of([&] { average_curves({a, c}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("svg output is a well-formed document") {
  PlotSpec spec;
  spec.title = "a < b & c";
  spec.log_x = true;
  spec.series.push_back({"s", {0.1, 1.0, 10.0}, {0.5, 0.3, 0.1}, {}, false, true});
  std::stringstream ss;
  write_svg(ss, spec);
  const std::string s = ss.str();
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("a &lt; b &amp; c") != std::string::npos);
}

}  // TEST_SUITE
