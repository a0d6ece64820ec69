#include "xxz/disorder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "xxz/error.hpp"
#include "xxz/rng.hpp"

namespace xxz {

namespace {

constexpr double kPi = std::numbers::pi;

double sphere_volume(double radius) { return 4.0 / 3.0 * kPi * radius * radius * radius; }

double min_image(double d, double length) { return d - length * std::nearbyint(d / length); }

// Cell list for hard-core rejection tests. Cells are at least R_bl wide so
// only the 27 surrounding cells need checking.
class HardCoreGrid {
 public:
  HardCoreGrid(double radius, const CloudGeometry& geometry)
      : radius_(radius), radius2_(radius * radius), geometry_(geometry) {
    periodic_ = geometry.kind == GeometryKind::UniformBox && geometry.periodic;
    for (int k = 0; k < 3; ++k) {
      if (periodic_) {
        ncell_[k] = std::max<std::int64_t>(1, static_cast<std::int64_t>(geometry.box[k] / radius));
        cell_[k] = geometry.box[k] / static_cast<double>(ncell_[k]);
      } else {
        cell_[k] = radius;
      }
    }
  }

  bool blocked(const Vec3& p) const {
    if (radius_ <= 0.0) return false;
    const auto c = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          std::array<std::int64_t, 3> n{c[0] + dx, c[1] + dy, c[2] + dz};
          if (periodic_) {
            // Skip offsets that alias the same cell when a dimension has
            // fewer than three cells.
            bool dup = false;
            const std::array<std::int64_t, 3> d{dx, dy, dz};
            for (int k = 0; k < 3; ++k) {
              if (ncell_[k] == 1 && d[k] != 0) dup = true;
              if (ncell_[k] == 2 && d[k] == 1) dup = true;
              n[k] = ((n[k] % ncell_[k]) + ncell_[k]) % ncell_[k];
            }
            if (dup) continue;
          }
          const auto it = cells_.find(key(n));
          if (it == cells_.end()) continue;
          for (const Vec3& q : it->second) {
            if (dist2(p, q) < radius2_) return true;
          }
        }
      }
    }
    return false;
  }

  void insert(const Vec3& p) {
    if (radius_ <= 0.0) return;
    cells_[key(cell_of(p))].push_back(p);
  }

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
    const std::array<double, 3> v{p.x, p.y, p.z};
    std::array<std::int64_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
      c[k] = static_cast<std::int64_t>(std::floor(v[k] / cell_[k]));
      if (periodic_) c[k] = ((c[k] % ncell_[k]) + ncell_[k]) % ncell_[k];
    }
    return c;
  }

  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    constexpr std::int64_t off = std::int64_t{1} << 20;
    return (static_cast<std::uint64_t>(c[0] + off) << 42) | (static_cast<std::uint64_t>(c[1] + off) << 21) |
           static_cast<std::uint64_t>(c[2] + off);
  }

  double dist2(const Vec3& a, const Vec3& b) const {
    Vec3 d = a - b;
    if (periodic_) {
      d.x = min_image(d.x, geometry_.box[0]);
      d.y = min_image(d.y, geometry_.box[1]);
      d.z = min_image(d.z, geometry_.box[2]);
    }
    return d.norm2();
  }

  double radius_;
  double radius2_;
  const CloudGeometry& geometry_;
  bool periodic_ = false;
  std::array<double, 3> cell_{};
  std::array<std::int64_t, 3> ncell_{1, 1, 1};
  std::unordered_map<std::uint64_t, std::vector<Vec3>> cells_;
};

double gaussian_equivalent_peak_density(const std::vector<Vec3>& pts) {
  const double n = static_cast<double>(pts.size());
  Vec3 mean;
  for (const Vec3& p : pts) mean = mean + p;
  mean = (1.0 / n) * mean;
  double vx = 0.0, vy = 0.0, vz = 0.0;
  for (const Vec3& p : pts) {
    const Vec3 d = p - mean;
    vx += d.x * d.x;
    vy += d.y * d.y;
    vz += d.z * d.z;
  }
  const double norm = 1.0 / (n - 1.0);
  const double prod = std::sqrt(vx * norm) * std::sqrt(vy * norm) * std::sqrt(vz * norm);
  return n / (std::pow(2.0 * kPi, 1.5) * prod);
}

// Spin-cloud widths when the excitation follows the product of the ground
// cloud and the beam profile (no blockade, no enhancement).
std::array<double, 3> product_widths(const CloudGeometry& g) {
  std::array<double, 3> s = g.cloud_sigma;
  for (int k = 0; k < 2; ++k) {
    s[k] = 1.0 / std::sqrt(1.0 / (g.cloud_sigma[k] * g.cloud_sigma[k]) + 1.0 / (g.laser_sigma * g.laser_sigma));
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// CloudGeometry

void CloudGeometry::validate() const {
  if (!(blockade_radius >= 0.0) || !std::isfinite(blockade_radius)) {
    throw Error(ErrorCode::DomainError, "blockade radius must be >= 0");
  }
  if (kind == GeometryKind::UniformBox) {
    for (double l : box) {
      if (!(l > 0.0) || !std::isfinite(l)) throw Error(ErrorCode::DomainError, "box edges must be > 0");
    }
  } else {
    for (double s : cloud_sigma) {
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::DomainError, "cloud radii must be > 0");
    }
    if (!(laser_sigma > 0.0)) throw Error(ErrorCode::DomainError, "laser radius must be > 0");
    if (!(ground_peak_density > 0.0)) throw Error(ErrorCode::DomainError, "ground density must be > 0");
  }
  if (count.has_value() == peak_density.has_value()) {
    throw Error(ErrorCode::DomainError, "exactly one of count or density must be set");
  }
  if (count && *count < 1) throw Error(ErrorCode::DomainError, "target count must be >= 1");
  if (peak_density && !(*peak_density > 0.0)) throw Error(ErrorCode::DomainError, "density must be > 0");
  if (target_count() < 1) throw Error(ErrorCode::DomainError, "target density yields zero spins");
}

double CloudGeometry::volume() const {
  if (kind == GeometryKind::UniformBox) return box[0] * box[1] * box[2];
  const auto s = product_widths(*this);
  return std::pow(2.0 * kPi, 1.5) * s[0] * s[1] * s[2];
}

std::size_t CloudGeometry::target_count() const {
  if (count) return *count;
  return static_cast<std::size_t>(std::llround(*peak_density * volume()));
}

// ---------------------------------------------------------------------------
// SpinConfiguration

double SpinConfiguration::distance(std::size_t i, std::size_t j) const {
  Vec3 d = positions[i] - positions[j];
  if (geometry.kind == GeometryKind::UniformBox && geometry.periodic) {
    d.x = min_image(d.x, geometry.box[0]);
    d.y = min_image(d.y, geometry.box[1]);
    d.z = min_image(d.z, geometry.box[2]);
  }
  return d.norm();
}

double SpinConfiguration::min_pair_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) best = std::min(best, distance(i, j));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sampling

SpinConfiguration sample_blockaded_box(const CloudGeometry& geometry, std::uint64_t seed,
                                       const BoxSamplingOptions& options) {
  if (geometry.kind != GeometryKind::UniformBox) {
    throw Error(ErrorCode::DomainError, "sample_blockaded_box requires a UniformBox geometry");
  }
  geometry.validate();
  const std::size_t n = geometry.target_count();
  const double rbl = geometry.blockade_radius;
  const double packing = static_cast<double>(n) * sphere_volume(0.5 * rbl) / geometry.volume();
  if (n > 1 && packing >= options.max_packing_fraction) {
    std::ostringstream msg;
    msg << "blockade packing fraction " << packing << " exceeds " << options.max_packing_fraction;
    throw Error(ErrorCode::PackingInfeasible, msg.str());
  }
  const std::size_t limit =
      options.max_consecutive_rejections ? options.max_consecutive_rejections : 10000 * std::max<std::size_t>(n, 1);

  SpinConfiguration out;
  out.geometry = geometry;
  out.seed = seed;
  out.positions.reserve(n);
  Rng rng(derive_seed(seed, {0x626f78}));
  HardCoreGrid grid(rbl, geometry);
  std::size_t rejections = 0;
  while (out.positions.size() < n) {
    const Vec3 p{rng.uniform(0.0, geometry.box[0]), rng.uniform(0.0, geometry.box[1]),
                 rng.uniform(0.0, geometry.box[2])};
    if (grid.blocked(p)) {
      if (++rejections >= limit) {
        throw Error(ErrorCode::PackingInfeasible, "rejection limit reached after " +
                                                      std::to_string(out.positions.size()) + " spins");
      }
      continue;
    }
    rejections = 0;
    grid.insert(p);
    out.positions.push_back(p);
  }
  out.realized_density = static_cast<double>(n) / geometry.volume();
  return out;
}

EnhancementFn sqrt_enhancement(double cap) {
  return [cap](double n_blockade) { return std::clamp(std::sqrt(std::max(n_blockade, 0.0)), 1.0, cap); };
}

SpinConfiguration sample_gaussian_cloud(const CloudGeometry& geometry, double peak_rabi_scale, std::uint64_t seed,
                                        const ExcitationOptions& options) {
  if (geometry.kind != GeometryKind::GaussianCloud) {
    throw Error(ErrorCode::DomainError, "sample_gaussian_cloud requires a GaussianCloud geometry");
  }
  geometry.validate();
  if (!(peak_rabi_scale > 0.0)) throw Error(ErrorCode::DomainError, "peak_rabi_scale must be > 0");
  const std::size_t n = geometry.target_count();
  const double rbl = geometry.blockade_radius;
  const double blockade_volume = sphere_volume(rbl);
  const auto& s = geometry.cloud_sigma;
  const double sl2 = geometry.laser_sigma * geometry.laser_sigma;
  const std::size_t limit =
      options.max_consecutive_blocked ? options.max_consecutive_blocked : 10000 * std::max<std::size_t>(n, 1);

  SpinConfiguration out;
  out.geometry = geometry;
  out.seed = seed;
  out.positions.reserve(n);
  Rng rng(derive_seed(seed, {0x636c6f7564}));
  HardCoreGrid grid(rbl, geometry);
  std::size_t blocked = 0;
  while (out.positions.size() < n) {
    const Vec3 p{rng.normal(0.0, s[0]), rng.normal(0.0, s[1]), rng.normal(0.0, s[2])};
    const double ground = geometry.ground_peak_density *
                          std::exp(-0.5 * (p.x * p.x / (s[0] * s[0]) + p.y * p.y / (s[1] * s[1]) +
                                           p.z * p.z / (s[2] * s[2])));
    const double coupling = std::exp(-0.5 * (p.x * p.x + p.y * p.y) / sl2);
    const double prob = std::min(1.0, peak_rabi_scale * coupling * options.enhancement(ground * blockade_volume));
    if (rng.uniform() >= prob) continue;
    if (grid.blocked(p)) {
      if (++blocked >= limit) {
        throw Error(ErrorCode::TargetUnreachable, "blockade saturated after " +
                                                      std::to_string(out.positions.size()) + " excitations");
      }
      continue;
    }
    blocked = 0;
    grid.insert(p);
    out.positions.push_back(p);
  }
  out.realized_density =
      n >= 4 ? gaussian_equivalent_peak_density(out.positions) : static_cast<double>(n) / geometry.volume();
  return out;
}

SpinConfiguration sample_configuration(const CloudGeometry& geometry, std::uint64_t seed, double peak_rabi_scale) {
  if (geometry.kind == GeometryKind::UniformBox) return sample_blockaded_box(geometry, seed);
  return sample_gaussian_cloud(geometry, peak_rabi_scale, seed);
}

// ---------------------------------------------------------------------------
// Scales and distributions

double wigner_seitz_radius(double density) {
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw Error(ErrorCode::DomainError, "density must be positive");
  }
  return std::cbrt(3.0 / (4.0 * kPi * density));
}

double hertz_density(double r, double a) {
  if (r < 0.0 || !(a > 0.0)) throw Error(ErrorCode::DomainError, "hertz_density needs r >= 0, a > 0");
  const double u = r / a;
  return 3.0 / a * u * u * std::exp(-u * u * u);
}

std::vector<double> Binning::edges() const {
  if (!(hi > lo) || bins == 0 || (log_spaced && !(lo > 0.0))) {
    throw Error(ErrorCode::DomainError, "invalid binning");
  }
  std::vector<double> e(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(bins);
    e[k] = log_spaced ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f;
  }
  e.front() = lo;
  e.back() = hi;
  return e;
}

Binning Binning::default_for(double c6, double a) {
  const double scale = c6 / std::pow(a, 6);
  return Binning{1e-3 * scale, 10.0 * scale, 64, true};
}

double CouplingDistribution::center(std::size_t k) const {
  const double lo = edges[k];
  const double hi = edges[k + 1];
  return lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
}

double CouplingDistribution::integral() const {
  double s = 0.0;
  for (std::size_t k = 0; k < bins(); ++k) s += density[k] * width(k);
  return s;
}

std::vector<double> per_spin_couplings(const SpinConfiguration& config, double c6, Provenance provenance) {
  const std::size_t n = config.size();
  if (n < 2) throw Error(ErrorCode::DomainError, "need at least two spins");
  std::vector<double> acc(n, provenance == Provenance::NearestNeighbor ? 0.0 : 0.0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = config.distance(i, j);
      if (!(r > 0.0)) throw Error(ErrorCode::DegenerateConfig, "coincident spins");
      const double r6 = std::pow(r, 6);
      acc[i] += 1.0 / r6;
      acc[j] += 1.0 / r6;
      nearest[i] = std::min(nearest[i], r);
      nearest[j] = std::min(nearest[j], r);
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = provenance == Provenance::NearestNeighbor ? c6 / std::pow(nearest[i], 6) : c6 * acc[i];
  }
  return out;
}

CouplingDistribution histogram_couplings(std::span<const double> values, const Binning& binning,
                                         Provenance provenance) {
  CouplingDistribution d;
  d.provenance = provenance;
  d.edges = binning.edges();
  d.density.assign(binning.bins, 0.0);
  std::size_t inside = 0;
  for (const double v : values) {
    if (v < d.edges.front() || v >= d.edges.back()) continue;
    const auto it = std::upper_bound(d.edges.begin(), d.edges.end(), v);
    const auto k = static_cast<std::size_t>(it - d.edges.begin()) - 1;
    d.density[k] += 1.0;
    ++inside;
  }
  d.out_of_range_fraction =
      values.empty() ? 0.0 : 1.0 - static_cast<double>(inside) / static_cast<double>(values.size());
  if (inside > 0) {
    for (std::size_t k = 0; k < d.bins(); ++k) d.density[k] /= static_cast<double>(inside) * d.width(k);
  }
  return d;
}

CouplingDistribution coupling_distribution(const SpinConfiguration& config, double c6, Provenance provenance,
                                           std::optional<Binning> binning) {
  const auto values = per_spin_couplings(config, c6, provenance);
  const Binning b = binning ? *binning : Binning::default_for(c6, wigner_seitz_radius(config.realized_density));
  return histogram_couplings(values, b, provenance);
}

CouplingDistribution hertz_coupling_distribution(double a, double c6, const Binning& binning) {
  CouplingDistribution d;
  d.provenance = Provenance::NearestNeighbor;
  d.edges = binning.edges();
  d.density.assign(binning.bins, 0.0);
  // J in [J1, J2]  <=>  r in [(c6/J2)^(1/6), (c6/J1)^(1/6)]; CDF of r is
  // 1 - exp(-(r/a)^3) = 1 - exp(-sqrt(c6 / (J a^6))).
  const double ja = c6 / std::pow(a, 6);
  auto survival_in_j = [&](double j) { return j <= 0.0 ? 0.0 : std::exp(-std::sqrt(ja / j)); };
  double total = 0.0;
  for (std::size_t k = 0; k < d.bins(); ++k) {
    const double mass = survival_in_j(d.edges[k + 1]) - survival_in_j(d.edges[k]);
    d.density[k] = mass;
    total += mass;
  }
  d.out_of_range_fraction = 1.0 - total;
  for (std::size_t k = 0; k < d.bins(); ++k) d.density[k] /= total * d.width(k);
  return d;
}

KlResult kl_divergence(const CouplingDistribution& g, const CouplingDistribution& h, double epsilon) {
  if (g.edges.size() != h.edges.size()) throw Error(ErrorCode::BinningMismatch, "bin counts differ");
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const double tol = 1e-12 * std::max(std::abs(g.edges[k]), std::abs(h.edges[k]));
    if (std::abs(g.edges[k] - h.edges[k]) > tol) throw Error(ErrorCode::BinningMismatch, "bin edges differ");
  }
  KlResult out;
  out.epsilon = epsilon;
  for (std::size_t k = 0; k < g.bins(); ++k) {
    const double gk = g.density[k];
    if (gk <= 0.0) continue;
    double hk = h.density[k];
    if (hk <= 0.0) {
      hk += epsilon;
      ++out.smoothed_bins;
    }
    out.nats += gk * std::log(gk / hk) * g.width(k);
  }
  return out;
}

MeanFieldScale mean_field_scale(const SpinConfiguration& config, double c6) {
  auto values = per_spin_couplings(config, c6, Provenance::MeanField);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return {median, std::pow(c6 / median, 1.0 / 6.0)};
}

std::string to_string(Provenance p) { return p == Provenance::NearestNeighbor ? "nearest_neighbor" : "mean_field"; }

// ---------------------------------------------------------------------------
// Serialization

void write_configuration(std::ostream& os, const SpinConfiguration& config) {
  const auto& g = config.geometry;
  os << std::setprecision(17);
  os << "# xxzglass spin configuration\n";
  if (g.kind == GeometryKind::UniformBox) {
    os << "# geometry: box " << g.box[0] << ' ' << g.box[1] << ' ' << g.box[2] << " um"
       << (g.periodic ? " periodic" : " open") << '\n';
  } else {
    os << "# geometry: gaussian " << g.cloud_sigma[0] << ' ' << g.cloud_sigma[1] << ' ' << g.cloud_sigma[2]
       << " laser " << g.laser_sigma << " um\n";
  }
  os << "# seed: " << config.seed << '\n';
  os << "# blockade_radius_um: " << g.blockade_radius << '\n';
  os << "# realized_density_um^-3: " << config.realized_density << '\n';
  os << "# count: " << config.size() << '\n';
  os << "# columns: index x_um y_um z_um\n";
  for (std::size_t i = 0; i < config.size(); ++i) {
    const Vec3& p = config.positions[i];
    os << i << ' ' << p.x << ' ' << p.y << ' ' << p.z << '\n';
  }
}

SpinConfiguration read_configuration(std::istream& is) {
  SpinConfiguration c;
  c.geometry.count = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string keyword;
      hs >> keyword;
      if (keyword == "geometry:") {
        std::string kind;
        hs >> kind;
        if (kind == "box") {
          c.geometry.kind = GeometryKind::UniformBox;
          std::string unit, mode;
          hs >> c.geometry.box[0] >> c.geometry.box[1] >> c.geometry.box[2] >> unit >> mode;
          c.geometry.periodic = mode == "periodic";
        } else if (kind == "gaussian") {
          c.geometry.kind = GeometryKind::GaussianCloud;
          std::string laser;
          hs >> c.geometry.cloud_sigma[0] >> c.geometry.cloud_sigma[1] >> c.geometry.cloud_sigma[2] >> laser >>
              c.geometry.laser_sigma;
        }
      } else if (keyword == "seed:") {
        hs >> c.seed;
      } else if (keyword == "blockade_radius_um:") {
        hs >> c.geometry.blockade_radius;
      } else if (keyword == "realized_density_um^-3:") {
        hs >> c.realized_density;
      }
      continue;
    }
    std::istringstream row(line);
    std::size_t index = 0;
    Vec3 p;
    if (!(row >> index >> p.x >> p.y >> p.z)) throw Error(ErrorCode::IoError, "malformed configuration row");
    c.positions.push_back(p);
  }
  c.geometry.count = c.positions.size();
  return c;
}

void write_distribution(std::ostream& os, const CouplingDistribution& dist) {
  os << std::setprecision(17);
  os << "# xxzglass coupling distribution\n";
  os << "# provenance: " << to_string(dist.provenance) << '\n';
  os << "# out_of_range_fraction: " << dist.out_of_range_fraction << '\n';
  os << "# columns: bin_left_MHz(nu) bin_right_MHz(nu) density_per_MHz(nu)\n";
  for (std::size_t k = 0; k < dist.bins(); ++k) {
    os << dist.edges[k] << ' ' << dist.edges[k + 1] << ' ' << dist.density[k] << '\n';
  }
}

}  // namespace xxz
