// Configuration sampling, coupling statistics and disorder measures.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "xxz/disorder.hpp"
#include "xxz/error.hpp"
#include "xxz/units.hpp"

using namespace xxz;

namespace {

constexpr double kC6 = 59000.0;

CloudGeometry box(double edge, std::optional<std::size_t> count, std::optional<double> density, double r_bl,
                  bool periodic = false) {
  CloudGeometry g;
  g.kind = GeometryKind::UniformBox;
  g.box = {edge, edge, edge};
  g.count = count;
  g.peak_density = density;
  g.blockade_radius = r_bl;
  g.periodic = periodic;
  return g;
}

// Brute-force nearest-neighbour distances.
std::vector<double> nn_distances(const SpinConfiguration& s) {
  std::vector<double> out(s.size(), INFINITY);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i != j) out[i] = std::min(out[i], s.distance(i, j));
    }
  }
  return out;
}

double direct_j_mf(const SpinConfiguration& s) {
  std::vector<double> v(s.size(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i != j) v[i] += kC6 / std::pow(s.distance(i, j), 6);
    }
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

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

TEST_SUITE("disorder") {

TEST_CASE("box at 1.25e8 cm^-3 holds 125 hard-core spins") {
  const CloudGeometry g = box(100.0, std::nullopt, 1.25e8 * kPerCubicCm, 5.0);
  const SpinConfiguration s = sample_blockaded_box(g, 3);
  REQUIRE(s.size() == 125);
  CHECK(s.min_pair_distance() >= 5.0);
  for (const auto& p : s.positions) {
    CHECK(p.x >= 0.0);
    CHECK(p.x <= 100.0);
    CHECK(p.z >= 0.0);
    CHECK(p.z <= 100.0);
  }
}

TEST_CASE("hard-core constraint holds exhaustively over many seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SpinConfiguration s = sample_blockaded_box(box(40.0, 150, std::nullopt, 4.0, seed % 2 == 1), seed);
    CHECK(s.size() == 150);
    CHECK(s.min_pair_distance() >= 4.0);
  }
}

TEST_CASE("single spin and infeasible packing") {
  const SpinConfiguration one = sample_blockaded_box(box(10.0, 1, std::nullopt, 50.0), 1);
  CHECK(one.size() == 1);
  CHECK(code_of([] { sample_blockaded_box(box(50.0, 100, std::nullopt, 20.0), 1); }) ==
        ErrorCode::PackingInfeasible);
}

TEST_CASE("sampling is deterministic per seed") {
  const CloudGeometry g = box(60.0, 200, std::nullopt, 3.0);
  const auto a = sample_blockaded_box(g, 77);
  const auto b = sample_blockaded_box(g, 77);
  const auto c = sample_blockaded_box(g, 78);
  CHECK(a.positions == b.positions);
  CHECK_FALSE(a.positions == c.positions);
}

TEST_CASE("periodic boxes use minimum-image distances") {
  SpinConfiguration s;
  s.geometry = box(10.0, 2, std::nullopt, 0.0, true);
  s.positions = {{0.5, 5.0, 5.0}, {9.5, 5.0, 5.0}};
  CHECK(s.distance(0, 1) == doctest::Approx(1.0));
  s.geometry.periodic = false;
  CHECK(s.distance(0, 1) == doctest::Approx(9.0));
}

TEST_CASE("Wigner-Seitz radius") {
  CHECK(wigner_seitz_radius(3.0 / (4.0 * M_PI)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(wigner_seitz_radius(1.2e9 * kPerCubicCm) == doctest::Approx(5.8).epsilon(0.01));
  CHECK(wigner_seitz_radius(0.43e9 * kPerCubicCm) == doctest::Approx(8.2).epsilon(0.01));
  const double rho = 3.7e-3;
  CHECK(wigner_seitz_radius(2.0 * rho) == doctest::Approx(wigner_seitz_radius(rho) / std::cbrt(2.0)).epsilon(1e-15));
  CHECK(code_of([] { wigner_seitz_radius(0.0); }) == ErrorCode::DomainError);
}

TEST_CASE("Hertz distribution: normalization, mode, origin") {
  const double a = 1.7;
  // Composite Simpson on [0, 6a]; the tail beyond is below e^-216.
  const int n = 20000;
  const double hstep = 6.0 * a / n;
  double integral = hertz_density(0.0, a) + hertz_density(6.0 * a, a);
  for (int k = 1; k < n; ++k) integral += (k % 2 ? 4.0 : 2.0) * hertz_density(k * hstep, a);
  integral *= hstep / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-10));
  const double mode = a * std::cbrt(2.0 / 3.0);
  CHECK(hertz_density(mode, a) > hertz_density(mode * 0.999, a));
  CHECK(hertz_density(mode, a) > hertz_density(mode * 1.001, a));
  CHECK(hertz_density(0.0, a) == 0.0);
}

TEST_CASE("unblockaded nearest-neighbour distances follow the Hertz law (KS test)") {
  const double rho = 1e-3;
  const double a = wigner_seitz_radius(rho);
  std::vector<double> r;
  for (std::uint64_t seed = 0; r.size() < 100000; ++seed) {
    const double edge = std::cbrt(4000.0 / rho);
    const auto s = sample_blockaded_box(box(edge, 4000, std::nullopt, 0.0, true), seed);
    const auto d = nn_distances(s);
    r.insert(r.end(), d.begin(), d.end());
  }
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  const double n = static_cast<double>(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double cdf = 1.0 - std::exp(-std::pow(r[k] / a, 3));
    ks = std::max({ks, std::abs(cdf - k / n), std::abs(cdf - (k + 1) / n)});
  }
  CHECK(ks < 0.05);
}

TEST_CASE("Gaussian cloud at the first experimental setting") {
  CloudGeometry g;
  g.kind = GeometryKind::GaussianCloud;
  g.cloud_sigma = {203.0, 35.0, 35.0};
  g.laser_sigma = 70.6;
  g.ground_peak_density = 1.79e11 * kPerCubicCm;
  g.count = 1200;
  g.blockade_radius = 5.21;
  const SpinConfiguration s = sample_configuration(g, 4);
  REQUIRE(s.size() == 1200);
  CHECK(s.min_pair_distance() >= 5.21);
  const double peak = s.realized_density / kPerCubicCm;
  CHECK(peak > 0.9e9);
  CHECK(peak < 1.5e9);

  g.blockade_radius = 0.0;
  g.count = 50;
  CHECK(sample_configuration(g, 5).size() == 50);
}

TEST_CASE("blockade leaves the nearest-neighbour histogram untouched above R_bl") {
  // Two-sample comparison on radii > 2 R_bl at a sparse density, where
  // the constraint rarely binds.
  CloudGeometry g;
  g.kind = GeometryKind::GaussianCloud;
  g.cloud_sigma = {35.0, 35.0, 35.0};
  g.laser_sigma = 70.6;
  g.ground_peak_density = 1.7e11 * kPerCubicCm;
  g.count = 400;
  std::vector<double> with, without;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    g.blockade_radius = 5.0;
    for (double d : nn_distances(sample_configuration(g, seed))) {
      if (d > 10.0) with.push_back(d);
    }
    g.blockade_radius = 0.0;
    for (double d : nn_distances(sample_configuration(g, 100 + seed))) {
      if (d > 10.0) without.push_back(d);
    }
  }
  std::sort(with.begin(), with.end());
  std::sort(without.begin(), without.end());
  double ks = 0.0;
  for (double x : with) {
    const double fa = double(std::upper_bound(with.begin(), with.end(), x) - with.begin()) / with.size();
    const double fb = double(std::upper_bound(without.begin(), without.end(), x) - without.begin()) / without.size();
    ks = std::max(ks, std::abs(fa - fb));
  }
  // Critical value for alpha = 0.001 is 1.95 sqrt((n + m) / (n m)).
  const double n = with.size(), m = without.size();
  CHECK(ks < 1.95 * std::sqrt((n + m) / (n * m)));
}

TEST_CASE("coupling histograms") {
  SpinConfiguration pair;
  pair.geometry = box(20.0, 2, std::nullopt, 0.0);
  pair.positions = {{1.0, 1.0, 1.0}, {1.0, 1.0, 13.0}};
  pair.realized_density = 2.0 / 8000.0;
  for (Provenance p : {Provenance::NearestNeighbor, Provenance::MeanField}) {
    const auto g = coupling_distribution(pair, kC6, p);
    CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-9));
    int occupied = 0;
    for (std::size_t k = 0; k < g.bins(); ++k) {
      if (g.density[k] > 0.0) {
        ++occupied;
        const double j = kC6 / std::pow(12.0, 6);
        CHECK(g.edges[k] <= j);
        CHECK(g.edges[k + 1] > j);
      }
    }
    CHECK(occupied == 1);
  }

  const double rho = 8.73e8 * kPerCubicCm;
  const auto s = sample_blockaded_box(box(std::cbrt(500 / rho), 500, std::nullopt, 5.0), 9);
  const auto g = coupling_distribution(s, kC6, Provenance::NearestNeighbor);
  CHECK(g.integral() == doctest::Approx(1.0).epsilon(1e-9));
  const double cutoff = kC6 / std::pow(5.0, 6);
  for (std::size_t k = 0; k < g.bins(); ++k) {
    CHECK(g.density[k] >= 0.0);
    if (g.edges[k] > cutoff) CHECK(g.density[k] == 0.0);
  }

  SpinConfiguration bad = pair;
  bad.positions[1] = bad.positions[0];
  CHECK(code_of([&] { coupling_distribution(bad, kC6, Provenance::NearestNeighbor); }) ==
        ErrorCode::DegenerateConfig);
}

TEST_CASE("KL divergence closed forms") {
  CouplingDistribution g, h;
  g.edges = h.edges = {0.0, 1.0, 2.0};
  g.density = {1.0, 0.0};
  h.density = {0.5, 0.5};
  CHECK(kl_divergence(g, h).nats == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(kl_divergence(h, h).nats == 0.0);
  CouplingDistribution other = h;
  other.edges = {0.0, 1.0, 3.0};
  CHECK(code_of([&] { kl_divergence(g, other); }) == ErrorCode::BinningMismatch);
}

TEST_CASE("blockade correlations raise KL divergence and sharpen g(J)") {
  std::vector<double> kl;
  double peak_g = 0.0, peak_h = 0.0;
  for (double rho_cm : {1.25e8, 8.73e8, 2.11e9}) {
    const double rho = rho_cm * kPerCubicCm;
    const double a = wigner_seitz_radius(rho);
    const Binning bins = Binning::default_for(kC6, a);
    std::vector<double> values;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto s = sample_blockaded_box(box(std::cbrt(400 / rho), 400, std::nullopt, 5.0, true), seed);
      const auto v = per_spin_couplings(s, kC6, Provenance::NearestNeighbor);
      values.insert(values.end(), v.begin(), v.end());
    }
    const auto g = histogram_couplings(values, bins, Provenance::NearestNeighbor);
    const auto h = hertz_coupling_distribution(a, kC6, bins);
    CHECK(kl_divergence(g, h).nats >= 0.0);
    kl.push_back(kl_divergence(g, h).nats);
    if (rho_cm == 2.11e9) {
      for (std::size_t k = 0; k < g.bins(); ++k) {
        peak_g = std::max(peak_g, g.density[k] * g.width(k));
        peak_h = std::max(peak_h, h.density[k] * h.width(k));
      }
    }
  }
  CHECK(kl[0] < kl[1]);
  CHECK(kl[1] < kl[2]);
  CHECK(peak_g > 1.5 * peak_h);
}

TEST_CASE("mean-field scale") {
  SpinConfiguration pair;
  pair.geometry = box(20.0, 2, std::nullopt, 0.0);
  pair.positions = {{0.0, 0.0, 0.0}, {3.0, 4.0, 0.0}};
  const MeanFieldScale m = mean_field_scale(pair, kC6);
  CHECK(m.j_mf == doctest::Approx(kC6 / std::pow(5.0, 6)).epsilon(1e-14));
  CHECK(m.a_tilde == doctest::Approx(5.0).epsilon(1e-14));

  const double rho = 2.11e9 * kPerCubicCm;
  const double a = wigner_seitz_radius(rho);
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sample_blockaded_box(box(std::cbrt(150 / rho), 150, std::nullopt, 5.0), seed);
    const MeanFieldScale ms = mean_field_scale(s, kC6);
    CHECK(ms.j_mf == doctest::Approx(direct_j_mf(s)).epsilon(1e-12));
    sum += ms.a_tilde;
  }
  CHECK(sum / 100.0 > a);
}

TEST_CASE("J_mf scales linearly with C6/a^6 in the dilute limit") {
  // The ratio J_mf a^6 / C6 must not depend on density once the blockade
  // is negligible; it is a pure number of the Poisson point process.
  std::vector<double> ratio;
  for (double rho_cm : {2e7, 2e6}) {
    const double rho = rho_cm * kPerCubicCm;
    const double a = wigner_seitz_radius(rho);
    double acc = 0.0;
    const int reps = 40;
    for (int seed = 0; seed < reps; ++seed) {
      const auto s = sample_blockaded_box(box(std::cbrt(300 / rho), 300, std::nullopt, 5.0, true), seed);
      acc += mean_field_scale(s, kC6).j_mf * std::pow(a, 6) / kC6;
    }
    ratio.push_back(acc / reps);
  }
  CHECK(ratio[0] == doctest::Approx(ratio[1]).epsilon(0.05));
  CHECK(ratio[0] > 1.0);
}

TEST_CASE("configuration files round-trip") {
  const auto s = sample_blockaded_box(box(30.0, 20, std::nullopt, 2.0), 12);
  std::stringstream ss;
  write_configuration(ss, s);
  const auto r = read_configuration(ss);
  REQUIRE(r.size() == s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(r.positions[k].x == s.positions[k].x);
    CHECK(r.positions[k].z == s.positions[k].z);
  }
  CHECK(r.seed == s.seed);
  CHECK(r.geometry.blockade_radius == s.geometry.blockade_radius);
}

}  // TEST_SUITE
