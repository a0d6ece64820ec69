#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "xxz/couplings.hpp"
#include "xxz/error.hpp"

using namespace xxz;

namespace {

SpinConfiguration config_of(std::vector<Vec3> pts) {
  SpinConfiguration s;
  s.geometry.kind = GeometryKind::UniformBox;
  s.geometry.box = {100.0, 100.0, 100.0};
  s.geometry.count = pts.size();
  s.positions = std::move(pts);
  return s;
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::vector<Vec3> p(n);
  for (auto& v : p) v = {u(g), u(g), u(g)};
  return p;
}

}  // namespace

TEST_SUITE("couplings") {

TEST_CASE("pair at 5.8 um couples at 1.55 MHz") {
  const CouplingMatrix m = build_coupling_matrix(config_of({{0, 0, 0}, {5.8, 0, 0}}), XXZParameters{});
  CHECK(m(0, 1) == doctest::Approx(1.55).epsilon(0.01));
  CHECK(m(0, 1) == m(1, 0));
  CHECK(m(0, 0) == 0.0);
  CHECK(m.j_max() == m(0, 1));
  CHECK(m.delta() == -0.73);
}

TEST_CASE("power-law scaling") {
  const auto p = random_points(12, 3);
  std::vector<Vec3> q;
  for (const auto& v : p) q.push_back(2.0 * v);
  const auto a = build_coupling_matrix(config_of(p), {});
  const auto b = build_coupling_matrix(config_of(q), {});
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      if (i != j) CHECK(b(i, j) == doctest::Approx(a(i, j) / 64.0).epsilon(1e-13));
    }
  }
  const auto line = build_coupling_matrix(config_of({{0, 0, 0}, {3, 0, 0}, {6, 0, 0}}), {});
  CHECK(line(0, 2) == doctest::Approx(line(0, 1) / 64.0).epsilon(1e-14));
}

TEST_CASE("cached maxima and medians match recomputation") {
  const auto m = build_coupling_matrix(config_of(random_points(25, 5)), {});
  double jmax = 0.0;
  std::vector<double> rows(25, 0.0);
  for (std::size_t i = 0; i < 25; ++i) {
    for (std::size_t j = 0; j < 25; ++j) {
      jmax = std::max(jmax, m(i, j));
      rows[i] += m(i, j);
      if (i != j) CHECK(m(i, j) > 0.0);
    }
  }
  std::sort(rows.begin(), rows.end());
  CHECK(m.j_max() == jmax);
  CHECK(m.j_mf_median() == doctest::Approx(rows[12]).epsilon(1e-14));
}

TEST_CASE("permutation equivariance and rigid-motion invariance") {
  const auto p = random_points(15, 9);
  std::vector<std::size_t> perm(15);
  for (std::size_t k = 0; k < 15; ++k) perm[k] = (7 * k + 3) % 15;
  std::vector<Vec3> permuted(15), moved(15);
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (std::size_t k = 0; k < 15; ++k) {
    permuted[k] = p[perm[k]];
    const Vec3& v = p[k];
    moved[k] = {c * v.x - s * v.y + 11.0, s * v.x + c * v.y - 4.0, v.z + 2.5};
  }
  const auto a = build_coupling_matrix(config_of(p), {});
  const auto b = build_coupling_matrix(config_of(permuted), {});
  const auto r = build_coupling_matrix(config_of(moved), {});
  for (std::size_t i = 0; i < 15; ++i) {
    for (std::size_t j = 0; j < 15; ++j) {
      CHECK(b(i, j) == a(perm[i], perm[j]));
      if (i != j) CHECK(std::abs(r(i, j) - a(i, j)) <= 1e-12 * a(i, j));
    }
  }
}

TEST_CASE("degenerate and invalid inputs") {
  CHECK_THROWS_AS(build_coupling_matrix(config_of({{1, 1, 1}, {1, 1, 1}}), {}), Error);
  try {
    build_coupling_matrix(config_of({{1, 1, 1}, {1, 1, 1}}), {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfig);
  }
  XXZParameters bad;
  bad.c6 = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(CouplingMatrix(2, {0.0, 1.0, 2.0, 0.0}, 0.0), Error);
}

TEST_CASE("subset keeps the listed order") {
  const auto m = build_coupling_matrix(config_of(random_points(6, 1)), {});
  const std::vector<std::size_t> idx{4, 1, 2};
  const auto s = m.subset(idx);
  CHECK(s.n() == 3);
  CHECK(s(0, 1) == m(4, 1));
  CHECK(s(1, 2) == m(1, 2));
  CHECK(s.delta() == m.delta());
}

TEST_CASE("pair matrix elements map to XXZ parameters") {
  const PairXXZ xx = pair_to_xxz({0.0, 0.0, 0.0, 1.0});
  CHECK(xx.j == 2.0);
  CHECK(xx.delta == 0.0);
  CHECK(xx.delta_vdw == 0.0);

  // Operating point: J = 2, delta = -0.73, small Delta_vdW.
  PairMatrixElements e{0.0, 0.0, 0.0, 1.0};
  e.e_du = 0.3;
  e.e_uu = 0.3 - 0.73 - 0.05;
  e.e_dd = 0.3 - 0.73 + 0.05;
  const PairXXZ op = pair_to_xxz(e);
  CHECK(op.delta == doctest::Approx(-0.73).epsilon(1e-14));
  CHECK(std::abs(op.delta_vdw / op.j) < 0.1);

  PairMatrixElements sym{0.4, -1.0, 0.4, 0.25};
  CHECK(pair_to_xxz(sym).delta_vdw == 0.0);
  CHECK_THROWS_AS(pair_to_xxz({1.0, 2.0, 3.0, 0.0}), Error);
}

TEST_CASE("pair Hamiltonian round trip reproduces the matrix elements") {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    PairMatrixElements e{u(g), u(g), u(g), u(g)};
    const PairXXZ p = pair_to_xxz(e);
    const auto h = pair_hamiltonian(p, e.e_du + p.j * p.delta / 4.0);
    CHECK(std::abs(h[0][0] - e.e_uu) < 1e-12);
    CHECK(std::abs(h[1][1] - e.e_du) < 1e-12);
    CHECK(std::abs(h[2][2] - e.e_du) < 1e-12);
    CHECK(std::abs(h[3][3] - e.e_dd) < 1e-12);
    CHECK(std::abs(h[1][2] - e.j_ex) < 1e-12);
    CHECK(std::abs(h[2][1] - e.j_ex) < 1e-12);
    CHECK(h[0][1] == 0.0);
    CHECK(h[0][3] == 0.0);
  }
}

TEST_CASE("coupling matrix text round trip") {
  auto m = build_coupling_matrix(config_of(random_points(7, 2)), {});
  std::stringstream ss;
  write_coupling_matrix(ss, m);
  const auto r = read_coupling_matrix(ss);
  REQUIRE(r.n() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) CHECK(r(i, j) == m(i, j));
  }
  CHECK(r.delta() == m.delta());
}

}  // TEST_SUITE
