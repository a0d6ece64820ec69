#pragma once

// Random spin configurations with a hard-core (blockade) constraint and the
// statistics used to quantify how disordered they are.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xxz/geometry.hpp"

namespace xxz {

enum class GeometryKind { GaussianCloud, UniformBox };

struct CloudGeometry {
  GeometryKind kind = GeometryKind::UniformBox;

  // GaussianCloud: e^{-1/2} radii of the ground-state cloud and of the
  // two-photon Rabi frequency profile (beam propagates along z, so the
  // profile depends on x and y).
  std::array<double, 3> cloud_sigma{0.0, 0.0, 0.0};
  double laser_sigma = 0.0;
  double ground_peak_density = 0.179;  // um^-3 (1.79e11 cm^-3)

  // UniformBox: edge lengths; optional minimum-image boundaries.
  std::array<double, 3> box{0.0, 0.0, 0.0};
  bool periodic = false;

  // Exactly one of these sets the spin count. For a box, a density target
  // is converted to round(density * volume).
  std::optional<double> peak_density;
  std::optional<std::size_t> count;

  double blockade_radius = 0.0;

  void validate() const;
  std::size_t target_count() const;
  double volume() const;  // box volume; Gaussian-equivalent volume for a cloud
};

struct SpinConfiguration {
  std::vector<Vec3> positions;
  CloudGeometry geometry;
  std::uint64_t seed = 0;
  // Box: N / V. Cloud: Gaussian-equivalent peak density from sample moments.
  double realized_density = 0.0;

  std::size_t size() const { return positions.size(); }
  // Pair distance, honouring minimum-image boundaries when the box is periodic.
  double distance(std::size_t i, std::size_t j) const;
  double min_pair_distance() const;
};

struct BoxSamplingOptions {
  // Abort after this many consecutive rejected draws; 0 means 10^4 * N.
  std::size_t max_consecutive_rejections = 0;
  // Blockade-sphere packing fraction (spheres of radius R_bl/2) above which
  // the request is refused up front.
  double max_packing_fraction = 0.3;
};

SpinConfiguration sample_blockaded_box(const CloudGeometry& geometry, std::uint64_t seed,
                                       const BoxSamplingOptions& options = {});

// Collective enhancement of the single-atom excitation probability as a
// function of the expected number of ground-state atoms inside the blockade
// sphere of the candidate.
using EnhancementFn = std::function<double(double n_blockade)>;

EnhancementFn sqrt_enhancement(double cap);

struct ExcitationOptions {
  EnhancementFn enhancement = sqrt_enhancement(100.0);
  // Abort after this many consecutive blockade rejections; 0 means 10^4 * N.
  std::size_t max_consecutive_blocked = 0;
};

SpinConfiguration sample_gaussian_cloud(const CloudGeometry& geometry, double peak_rabi_scale,
                                        std::uint64_t seed, const ExcitationOptions& options = {});

// Dispatches on geometry.kind.
SpinConfiguration sample_configuration(const CloudGeometry& geometry, std::uint64_t seed,
                                       double peak_rabi_scale = 0.05);

double wigner_seitz_radius(double density);

// Nearest-neighbour distance density of uniformly random points in 3D.
double hertz_density(double r, double a);

enum class Provenance { NearestNeighbor, MeanField };

struct Binning {
  double lo = 0.0;  // MHz (nu)
  double hi = 0.0;
  std::size_t bins = 64;
  bool log_spaced = true;

  std::vector<double> edges() const;
  // 64 log-spaced bins over [1e-3, 10] * C6 / a^6.
  static Binning default_for(double c6, double a);
};

struct CouplingDistribution {
  std::vector<double> edges;    // MHz (nu), size bins + 1
  std::vector<double> density;  // 1/MHz, integrates to 1 over the bins
  Provenance provenance = Provenance::NearestNeighbor;
  double out_of_range_fraction = 0.0;

  std::size_t bins() const { return density.size(); }
  double width(std::size_t k) const { return edges[k + 1] - edges[k]; }
  double center(std::size_t k) const;  // geometric centre for log bins
  double integral() const;
};

// Per-spin couplings that feed the histogram: C6 / min_j r_ij^6 or
// C6 * sum_j r_ij^-6.
std::vector<double> per_spin_couplings(const SpinConfiguration& config, double c6, Provenance provenance);

CouplingDistribution histogram_couplings(std::span<const double> values, const Binning& binning,
                                         Provenance provenance);

CouplingDistribution coupling_distribution(const SpinConfiguration& config, double c6, Provenance provenance,
                                           std::optional<Binning> binning = std::nullopt);

// Reference distribution h(J) of nearest-neighbour couplings for unblockaded
// random points at Wigner-Seitz radius a, integrated exactly per bin.
CouplingDistribution hertz_coupling_distribution(double a, double c6, const Binning& binning);

struct KlResult {
  double nats = 0.0;
  std::size_t smoothed_bins = 0;  // bins with h = 0 < g regularised by epsilon
  double epsilon = 1e-12;
};

KlResult kl_divergence(const CouplingDistribution& g, const CouplingDistribution& h, double epsilon = 1e-12);

struct MeanFieldScale {
  double j_mf = 0.0;     // MHz (nu)
  double a_tilde = 0.0;  // um
};

MeanFieldScale mean_field_scale(const SpinConfiguration& config, double c6);

void write_configuration(std::ostream& os, const SpinConfiguration& config);
SpinConfiguration read_configuration(std::istream& is);
void write_distribution(std::ostream& os, const CouplingDistribution& dist);

std::string to_string(Provenance p);

}  // namespace xxz
