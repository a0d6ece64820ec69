#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "xxz/curve_io.hpp"
#include "xxz/error.hpp"
#include "xxz/experiment.hpp"
#include "xxz/units.hpp"

using namespace xxz;
namespace fs = std::filesystem;

namespace {

const char* kSmallDtwa = R"({
  "name": "small",
  "method": "dtwa",
  "geometry": {"kind": "box", "count": 24, "density": "3.51e8 cm^-3", "blockade_radius": "5 um"},
  "times": {"unit": "us", "stop": "4 us", "points": 9},
  "realizations": 3,
  "trajectories": 10,
  "block_size": 4,
  "seed": 17
})";

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an xxz::Error");
  return ErrorCode::DomainError;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xxz_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("configs are strict about keys and units") {
  CHECK_NOTHROW(parse_config(kSmallDtwa));
  CHECK(code_of([] { parse_config(R"({"method": "dtwa", "geometry": {"kind": "box", "count": 2, "bogus": 1},
                                      "times": {"stop": "1 us", "points": 2}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"method": "dtwa", "geometry": {"kind": "box", "count": 2,
                                      "density": "1e8", "blockade_radius": "5 um"},
                                      "times": {"stop": "1 us", "points": 2}})"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config(R"({"method": "warp", "geometry": {"kind": "box"}, "times": {}})"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::IoError);

  const ExperimentConfig c = parse_config(kSmallDtwa);
  CHECK(c.geometry.blockade_radius == 5.0);
  CHECK(*c.geometry.peak_density == doctest::Approx(3.51e-4));
  const auto t = c.time_points();
  REQUIRE(t.size() == 9);
  CHECK(t.back() == doctest::Approx(4.0));
  const CloudGeometry g = c.resolved_geometry();
  CHECK(g.box[0] == doctest::Approx(std::cbrt(24.0 / 3.51e-4)));
}

TEST_CASE("config hash ignores key order and whitespace") {
  const std::string a = R"({"b": 1, "a": {"y": "5 um", "x": [1, 2]}})";
  const std::string b = "{ \"a\": {\"x\": [1,2], \"y\": \"5 um\"},\n \"b\": 1 }";
  CHECK(canonical_config(a) == canonical_config(b));
  CHECK(fnv1a64(canonical_config(a)) == fnv1a64(canonical_config(b)));
  CHECK(fnv1a64(canonical_config(a)) != fnv1a64(canonical_config(R"({"b": 2, "a": {"y": "5 um", "x": [1, 2]}})")));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
}

TEST_CASE("Wigner-Seitz time unit scales with density") {
  ExperimentConfig c = parse_config(R"({"method": "dtwa",
    "geometry": {"kind": "box", "count": 10, "density": "1.25e8 cm^-3", "blockade_radius": "5 um"},
    "times": {"unit": "wigner_seitz", "stop": 10, "points": 3}})");
  const double a = wigner_seitz_radius(1.25e-4);
  const double j = 59000.0 / std::pow(a, 6);
  CHECK(c.wigner_seitz_scale() == doctest::Approx(j));
  CHECK(c.time_points()[2] == doctest::Approx(10.0 / angular(j)));
}

TEST_CASE("exact runs through the orchestrator match a direct evolution") {
  const ExperimentConfig c = parse_config(R"({"method": "exact",
    "geometry": {"kind": "box", "count": 2, "density": "3e9 cm^-3", "blockade_radius": "5 um"},
    "times": {"stop": "2 us", "points": 21}, "realizations": 2, "seed": 3,
    "protocol": {"include_pulses": false}, "analysis": {"fit": false}})");
  CHECK(parse_config(kSmallDtwa).protocol.include_pulses);
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.realizations.size() == 2);
  const auto times = c.time_points();
  for (std::size_t k = 0; k < 2; ++k) {
    const CouplingMatrix m = build_coupling_matrix(sample_realization(c, k), c.xxz);
    const double omega = angular(m(0, 1)) * (1.0 - m.delta()) / 2.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(std::abs(r.realizations[k].sx[i] - 0.5 * std::cos(omega * times[i])) < 1e-9);
    }
  }
  CHECK(r.manifest.seeds.size() == 2);
  CHECK(r.manifest.seeds[1] == realization_seed(c, 1));
  CHECK(r.conservation.quantum_norm_drift < 1e-10);
}

TEST_CASE("fluctuator runs average over every spin's rate") {
  // Dilute enough that many nearest-neighbour couplings exceed 10 C6/a^6.
  const ExperimentConfig c = parse_config(R"({"method": "fluctuator",
    "geometry": {"kind": "box", "count": 400, "density": "1.25e8 cm^-3", "blockade_radius": "5 um"},
    "times": {"unit": "wigner_seitz", "stop": 25, "points": 51}, "seed": 9, "analysis": {"fit": false}})");
  const ExperimentResult r = run_experiment(c);
  const std::vector<double> rates =
      per_spin_couplings(sample_realization(c, 0), c.xxz.c6, Provenance::NearestNeighbor);
  std::size_t fast = 0;
  for (double j : rates) fast += j > 10.0 * c.wigner_seitz_scale() ? 1 : 0;
  REQUIRE(fast > rates.size() / 10);
  const auto times = c.time_points();
  for (std::size_t k = 0; k < times.size(); ++k) {
    double direct = 0.0;
    for (double j : rates) direct += 0.5 * std::exp(-angular(j) * times[k]);
    direct /= static_cast<double>(rates.size());
    CHECK(std::abs(r.curve.sx[k] - direct) < 5e-3);
  }
}

TEST_CASE("results do not depend on the worker count") {
  ExperimentConfig c = parse_config(kSmallDtwa);
  c.fit = false;
  c.workers = 1;
  const ExperimentResult a = run_experiment(c);
  c.workers = 8;
  const ExperimentResult b = run_experiment(c);
  CHECK(a.curve.sx == b.curve.sx);
  CHECK(a.curve.sx_err == b.curve.sx_err);
  CHECK(a.manifest.seeds == b.manifest.seeds);
  CHECK(a.scales.j_mf == b.scales.j_mf);
}

TEST_CASE("runs persist curves, fits and a manifest") {
  ExperimentConfig c = parse_config(kSmallDtwa);
  c.fit = false;
  const fs::path dir = scratch_dir("persist");
  c.output_dir = dir.string();
  const ExperimentResult r = run_experiment(c);
  for (const char* f : {"curve.dat", "manifest.json", "scales.txt", "curve.svg"}) CHECK(fs::exists(dir / f));
  std::ifstream is(dir / "curve.dat");
  CurveMetadata meta;
  const ObservableSeries back = read_curve(is, &meta);
  CHECK(back.sx == r.curve.sx);
  CHECK(meta.count("j_max_MHz") == 1);
  CHECK(fs::exists(dir / "realizations"));
  fs::remove_all(dir);
}

TEST_CASE("density sweeps tabulate and collapse") {
  ExperimentConfig c = parse_config(kSmallDtwa);
  c.n_realizations = 1;
  c.fit = false;
  const SweepResult one = sweep_density(c, {3.51e-4});
  CHECK_FALSE(one.collapse);
  CHECK_FALSE(one.notice.empty());
  const SweepResult two = sweep_density(c, {1.25e-4, 3.51e-4});
  REQUIRE(two.rows.size() == 2);
  CHECK(two.collapse);
  CHECK(two.collapse_naive);
  CHECK(two.rows[1].density > two.rows[0].density);
}

TEST_CASE("shipped presets parse") {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(XXZ_PRESET_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path().string()));
    ++n;
  }
  CHECK(n >= 8);
}

}  // TEST_SUITE
