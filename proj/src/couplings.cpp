#include "xxz/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "xxz/error.hpp"

namespace xxz {

void XXZParameters::validate() const {
  if (!std::isfinite(c6) || c6 == 0.0) throw Error(ErrorCode::DomainError, "C6 must be finite and nonzero");
  if (!std::isfinite(delta)) throw Error(ErrorCode::DomainError, "delta must be finite");
  if (!std::isfinite(delta_vdw)) throw Error(ErrorCode::DomainError, "Delta_vdW must be finite");
  if (truncation_radius && !(*truncation_radius > 0.0)) {
    throw Error(ErrorCode::DomainError, "truncation radius must be > 0");
  }
}

CouplingMatrix::CouplingMatrix(std::size_t n, std::vector<double> j, double delta)
    : n_(n), j_(std::move(j)), delta_(delta) {
  if (j_.size() != n_ * n_) throw Error(ErrorCode::DimensionMismatch, "coupling matrix size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (j_[i * n_ + i] != 0.0) throw Error(ErrorCode::DomainError, "coupling diagonal must be zero");
    for (std::size_t k = i + 1; k < n_; ++k) {
      if (j_[i * n_ + k] != j_[k * n_ + i]) throw Error(ErrorCode::DomainError, "coupling matrix not symmetric");
    }
  }
  refresh_cache();
}

void CouplingMatrix::refresh_cache() {
  j_max_ = 0.0;
  std::vector<double> row_sums(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < n_; ++k) {
      const double v = j_[i * n_ + k];
      row_sums[i] += v;
      if (k > i) j_max_ = std::max(j_max_, std::abs(v));
    }
  }
  if (n_ == 0) {
    j_mf_median_ = 0.0;
    return;
  }
  std::sort(row_sums.begin(), row_sums.end());
  j_mf_median_ = n_ % 2 == 1 ? row_sums[n_ / 2] : 0.5 * (row_sums[n_ / 2 - 1] + row_sums[n_ / 2]);
}

CouplingMatrix CouplingMatrix::subset(std::span<const std::size_t> indices) const {
  const std::size_t m = indices.size();
  std::vector<double> j(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    if (indices[a] >= n_) throw Error(ErrorCode::IndexOutOfRange, "subset index out of range");
    for (std::size_t b = 0; b < m; ++b) {
      if (a != b) j[a * m + b] = (*this)(indices[a], indices[b]);
    }
  }
  CouplingMatrix out(m, std::move(j), delta_);
  out.ising_ = ising_;
  out.sz_field_ = sz_field_;
  out.c6_ = c6_;
  return out;
}

CouplingMatrix build_coupling_matrix(const SpinConfiguration& config, const XXZParameters& params) {
  params.validate();
  const std::size_t n = config.size();
  std::vector<double> j(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double r = config.distance(a, b);
      if (!(r > 0.0)) throw Error(ErrorCode::DegenerateConfig, "coincident spins");
      if (params.truncation_radius && r > *params.truncation_radius) continue;
      const double r2 = r * r;
      const double v = params.c6 / (r2 * r2 * r2);
      j[a * n + b] = v;
      j[b * n + a] = v;
    }
  }
  CouplingMatrix m(n, std::move(j), params.delta);
  m.set_ising(params.ising);
  m.set_c6(params.c6);
  if (params.include_detuning) m.set_sz_field(-params.delta_vdw);
  return m;
}

PairXXZ pair_to_xxz(const PairMatrixElements& e) {
  if (!std::isfinite(e.e_uu) || !std::isfinite(e.e_du) || !std::isfinite(e.e_dd) || !std::isfinite(e.j_ex)) {
    throw Error(ErrorCode::DomainError, "pair matrix elements must be finite");
  }
  if (e.j_ex == 0.0) throw Error(ErrorCode::ZeroExchange, "exchange element is zero; delta undefined");
  PairXXZ p;
  p.j = 2.0 * e.j_ex;
  p.delta = (e.e_dd + e.e_uu - 2.0 * e.e_du) / p.j;
  p.delta_vdw = (e.e_dd - e.e_uu) / 2.0;
  return p;
}

std::array<std::array<double, 4>, 4> pair_hamiltonian(const PairXXZ& p, double offset) {
  std::array<std::array<double, 4>, 4> h{};
  const double zz = p.j * p.delta / 4.0;
  h[0][0] = zz - p.delta_vdw + offset;  // uu: Sz1 + Sz2 = +1
  h[1][1] = -zz + offset;
  h[2][2] = -zz + offset;
  h[3][3] = zz + p.delta_vdw + offset;  // dd: Sz1 + Sz2 = -1
  h[1][2] = h[2][1] = p.j / 2.0;
  return h;
}

void write_coupling_matrix(std::ostream& os, const CouplingMatrix& m) {
  os << std::setprecision(17);
  os << "# xxzglass coupling matrix\n";
  os << "# convention: MHz (nu); H = sum_{i<j} J_ij (SxSx + SySy + delta SzSz)\n";
  os << "# n: " << m.n() << '\n';
  os << "# delta: " << m.delta() << '\n';
  os << "# c6_MHz(nu)*um^6: " << m.c6() << '\n';
  os << "# ising: " << (m.ising() ? 1 : 0) << '\n';
  os << "# sz_field_MHz(nu): " << m.sz_field() << '\n';
  os << "# columns: i j J_ij_MHz(nu)\n";
  for (std::size_t i = 0; i < m.n(); ++i) {
    for (std::size_t j = i + 1; j < m.n(); ++j) {
      if (m(i, j) != 0.0) os << i << ' ' << j << ' ' << m(i, j) << '\n';
    }
  }
}

CouplingMatrix read_coupling_matrix(std::istream& is) {
  std::size_t n = 0;
  double delta = 0.0, c6 = 0.0, sz = 0.0;
  int ising = 0;
  std::vector<std::tuple<std::size_t, std::size_t, double>> triplets;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line[0] == '#' ? line.substr(1) : line);
    if (line[0] == '#') {
      std::string key;
      ls >> key;
      if (key == "n:") ls >> n;
      else if (key == "delta:") ls >> delta;
      else if (key == "c6_MHz(nu)*um^6:") ls >> c6;
      else if (key == "ising:") ls >> ising;
      else if (key == "sz_field_MHz(nu):") ls >> sz;
      continue;
    }
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(ls >> i >> j >> v) || i >= n || j >= n) throw Error(ErrorCode::IoError, "malformed coupling triplet");
    triplets.emplace_back(i, j, v);
  }
  std::vector<double> mat(n * n, 0.0);
  for (const auto& [i, j, v] : triplets) {
    mat[i * n + j] = v;
    mat[j * n + i] = v;
  }
  CouplingMatrix m(n, std::move(mat), delta);
  m.set_c6(c6);
  m.set_ising(ising != 0);
  m.set_sz_field(sz);
  return m;
}

}  // namespace xxz
