#include "xxz/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "xxz/curve_io.hpp"
#include "xxz/error.hpp"
#include "xxz/parallel.hpp"
#include "xxz/rng.hpp"
#include "xxz/svg_plot.hpp"
#include "xxz/units.hpp"

namespace xxz {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string software_version() { return "0.3.0"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::DTWA: return "dtwa";
    case Method::MeanField: return "mean_field";
    case Method::MACE: return "mace";
    case Method::EmchRadin: return "emch_radin";
    case Method::Fluctuator: return "fluctuator";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Exact, Method::DTWA, Method::MeanField, Method::MACE, Method::EmchRadin,
                   Method::Fluctuator}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown method '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) bad(path + "." + k, "unknown key");
  }
}

double quantity(const json& obj, const std::string& path, const char* key, Dimension dim) {
  const json& v = obj.at(key);
  const std::string p = path + "." + key;
  if (dim == Dimension::Dimensionless) {
    if (!v.is_number()) bad(p, "expected a number");
    return v.get<double>();
  }
  if (!v.is_string()) bad(p, "expected a quantity with an explicit unit, e.g. \"5 um\"");
  try {
    return parse_quantity(v.get<std::string>(), dim);
  } catch (const Error& e) {
    bad(p, e.what());
  }
}

std::optional<double> opt_quantity(const json& obj, const std::string& path, const char* key, Dimension dim) {
  if (!obj.contains(key)) return std::nullopt;
  return quantity(obj, path, key, dim);
}

template <class T>
T get_as(const json& obj, const std::string& path, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(path + "." + key, "wrong type");
  }
}

std::size_t get_count(const json& obj, const std::string& path, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad(path + "." + key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::array<double, 3> triple(const json& obj, const std::string& path, const char* key, Dimension dim) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3) bad(path + "." + key, "expected a list of 3 quantities");
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    json wrap = {{"v", v[k]}};
    out[k] = quantity(wrap, path + "." + key + "[" + std::to_string(k) + "]", "v", dim);
  }
  return out;
}

void parse_geometry(const json& g, ExperimentConfig& c) {
  const std::string p = "geometry";
  allow_keys(g, p, {"kind", "box", "edge", "periodic", "density", "count", "blockade_radius", "cloud_sigma",
                    "laser_sigma", "ground_peak_density", "excitation_probability"});
  const std::string kind = get_as<std::string>(g, p, "kind");
  auto& geo = c.geometry;
  if (kind == "box") {
    geo.kind = GeometryKind::UniformBox;
    if (g.contains("box")) geo.box = triple(g, p, "box", Dimension::Length);
    if (g.contains("edge")) {
      const double l = quantity(g, p, "edge", Dimension::Length);
      geo.box = {l, l, l};
    }
    if (g.contains("periodic")) geo.periodic = get_as<bool>(g, p, "periodic");
  } else if (kind == "gaussian") {
    geo.kind = GeometryKind::GaussianCloud;
    geo.cloud_sigma = triple(g, p, "cloud_sigma", Dimension::Length);
    geo.laser_sigma = quantity(g, p, "laser_sigma", Dimension::Length);
    if (g.contains("ground_peak_density")) {
      geo.ground_peak_density = quantity(g, p, "ground_peak_density", Dimension::Density);
    }
    if (g.contains("excitation_probability")) {
      c.excitation_probability = quantity(g, p, "excitation_probability", Dimension::Dimensionless);
    }
  } else {
    bad(p + ".kind", "expected \"box\" or \"gaussian\"");
  }
  geo.peak_density = opt_quantity(g, p, "density", Dimension::Density);
  if (g.contains("count")) geo.count = get_count(g, p, "count");
  if (g.contains("blockade_radius")) geo.blockade_radius = quantity(g, p, "blockade_radius", Dimension::Length);
}

void parse_times(const json& t, TimeGrid& grid) {
  const std::string p = "times";
  allow_keys(t, p, {"unit", "start", "stop", "points", "spacing"});
  const std::string unit = t.contains("unit") ? get_as<std::string>(t, p, "unit") : "us";
  if (unit == "us") {
    grid.unit = TimeUnit::Microsecond;
  } else if (unit == "wigner_seitz") {
    grid.unit = TimeUnit::WignerSeitz;
  } else {
    bad(p + ".unit", "expected \"us\" or \"wigner_seitz\"");
  }
  const Dimension d = grid.unit == TimeUnit::Microsecond ? Dimension::Time : Dimension::Dimensionless;
  grid.start = t.contains("start") ? quantity(t, p, "start", d) : 0.0;
  grid.stop = quantity(t, p, "stop", d);
  grid.points = get_count(t, p, "points");
  if (t.contains("spacing")) {
    const std::string s = get_as<std::string>(t, p, "spacing");
    if (s != "linear" && s != "log") bad(p + ".spacing", "expected \"linear\" or \"log\"");
    grid.log_spaced = s == "log";
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  allow_keys(j, "config", {"name", "method", "geometry", "xxz", "protocol", "times", "realizations", "trajectories",
                           "block_size", "seed", "workers", "integrator", "krylov", "mace", "fluctuator", "analysis",
                           "output"});
  try {
    if (j.contains("name")) c.name = get_as<std::string>(j, "config", "name");
    if (!j.contains("method")) bad("config.method", "missing");
    c.method = parse_method(get_as<std::string>(j, "config", "method"));
    if (!j.contains("geometry")) bad("config.geometry", "missing");
    parse_geometry(j.at("geometry"), c);
    if (j.contains("xxz")) {
      const json& x = j.at("xxz");
      allow_keys(x, "xxz", {"c6", "delta", "delta_vdw", "include_detuning", "ising", "truncation_radius"});
      if (x.contains("c6")) c.xxz.c6 = quantity(x, "xxz", "c6", Dimension::C6);
      if (x.contains("delta")) c.xxz.delta = quantity(x, "xxz", "delta", Dimension::Dimensionless);
      if (x.contains("delta_vdw")) c.xxz.delta_vdw = quantity(x, "xxz", "delta_vdw", Dimension::Frequency);
      if (x.contains("include_detuning")) c.xxz.include_detuning = get_as<bool>(x, "xxz", "include_detuning");
      if (x.contains("ising")) c.xxz.ising = get_as<bool>(x, "xxz", "ising");
      c.xxz.truncation_radius = opt_quantity(x, "xxz", "truncation_radius", Dimension::Length);
    }
    if (j.contains("protocol")) {
      const json& pr = j.at("protocol");
      allow_keys(pr, "protocol", {"rabi", "detuning", "include_pulses", "first_pulse_duration"});
      if (pr.contains("rabi")) c.protocol.rabi = quantity(pr, "protocol", "rabi", Dimension::Frequency);
      if (pr.contains("detuning")) c.protocol.detuning = quantity(pr, "protocol", "detuning", Dimension::Frequency);
      if (pr.contains("include_pulses")) c.protocol.include_pulses = get_as<bool>(pr, "protocol", "include_pulses");
      c.protocol.first_pulse_duration = opt_quantity(pr, "protocol", "first_pulse_duration", Dimension::Time);
    }
    if (!j.contains("times")) bad("config.times", "missing");
    parse_times(j.at("times"), c.times);
    if (j.contains("realizations")) c.n_realizations = get_count(j, "config", "realizations");
    if (j.contains("trajectories")) c.n_traj = get_count(j, "config", "trajectories");
    if (j.contains("block_size")) c.block_size = get_count(j, "config", "block_size");
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "config", "seed");
    if (j.contains("workers")) c.workers = static_cast<unsigned>(get_count(j, "config", "workers"));
    if (j.contains("integrator")) {
      const json& in = j.at("integrator");
      allow_keys(in, "integrator", {"rtol", "atol"});
      if (in.contains("rtol")) c.integrator.rtol = quantity(in, "integrator", "rtol", Dimension::Dimensionless);
      if (in.contains("atol")) c.integrator.atol = quantity(in, "integrator", "atol", Dimension::Dimensionless);
    }
    if (j.contains("krylov")) {
      const json& k = j.at("krylov");
      allow_keys(k, "krylov", {"tol", "max_dim", "cap"});
      if (k.contains("tol")) c.krylov.tol = quantity(k, "krylov", "tol", Dimension::Dimensionless);
      if (k.contains("max_dim")) c.krylov.max_dim = static_cast<unsigned>(get_count(k, "krylov", "max_dim"));
      if (k.contains("cap")) c.krylov.cap = static_cast<unsigned>(get_count(k, "krylov", "cap"));
    }
    if (j.contains("mace")) {
      const json& m = j.at("mace");
      allow_keys(m, "mace", {"cluster_size"});
      if (m.contains("cluster_size")) c.mace_cluster = static_cast<unsigned>(get_count(m, "mace", "cluster_size"));
    }
    if (j.contains("fluctuator")) {
      const json& f = j.at("fluctuator");
      allow_keys(f, "fluctuator", {"provenance", "mode", "samples"});
      if (f.contains("provenance")) {
        const auto s = get_as<std::string>(f, "fluctuator", "provenance");
        if (s == "nearest_neighbor") c.fluctuator_provenance = Provenance::NearestNeighbor;
        else if (s == "mean_field") c.fluctuator_provenance = Provenance::MeanField;
        else bad("fluctuator.provenance", "expected \"nearest_neighbor\" or \"mean_field\"");
      }
      if (f.contains("mode")) {
        const auto s = get_as<std::string>(f, "fluctuator", "mode");
        if (s == "quadrature") c.fluctuator_mode = FluctuatorMode::Quadrature;
        else if (s == "monte_carlo") c.fluctuator_mode = FluctuatorMode::MonteCarlo;
        else bad("fluctuator.mode", "expected \"quadrature\" or \"monte_carlo\"");
      }
      if (f.contains("samples")) c.fluctuator_samples = get_count(f, "fluctuator", "samples");
    }
    if (j.contains("analysis")) {
      const json& a = j.at("analysis");
      allow_keys(a, "analysis", {"fit", "free_amplitude", "exclude_early", "floor", "collapse_scale"});
      if (a.contains("fit")) c.fit = get_as<bool>(a, "analysis", "fit");
      if (a.contains("free_amplitude")) c.fit_options.free_amplitude = get_as<bool>(a, "analysis", "free_amplitude");
      if (a.contains("exclude_early")) c.fit_options.exclude_early = get_as<bool>(a, "analysis", "exclude_early");
      if (a.contains("floor")) c.fit_options.floor = quantity(a, "analysis", "floor", Dimension::Dimensionless);
      if (a.contains("collapse_scale")) {
        const auto s = get_as<std::string>(a, "analysis", "collapse_scale");
        if (s == "a_tilde") c.collapse_scale = CollapseScale::ATilde;
        else if (s == "a") c.collapse_scale = CollapseScale::A;
        else bad("analysis.collapse_scale", "expected \"a_tilde\" or \"a\"");
      }
    }
    if (j.contains("output")) c.output_dir = get_as<std::string>(j, "config", "output");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const std::string& text) {
  try {
    return json::parse(text).dump();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CloudGeometry ExperimentConfig::resolved_geometry() const {
  CloudGeometry g = geometry;
  if (g.kind == GeometryKind::UniformBox && g.box == std::array<double, 3>{0.0, 0.0, 0.0} && g.count &&
      g.peak_density) {
    if (!(*g.peak_density > 0.0)) throw Error(ErrorCode::ConfigError, "geometry.density must be > 0");
    const double l = std::cbrt(static_cast<double>(*g.count) / *g.peak_density);
    g.box = {l, l, l};
    g.peak_density.reset();
  }
  return g;
}

void ExperimentConfig::validate() const {
  CloudGeometry g;
  try {
    g = resolved_geometry();
    g.validate();
    xxz.validate();
    protocol.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  if (n_realizations < 1) throw Error(ErrorCode::ConfigError, "realizations must be >= 1");
  if (times.points < 1) throw Error(ErrorCode::ConfigError, "times.points must be >= 1");
  if (!(times.stop >= times.start) || times.start < 0.0) {
    throw Error(ErrorCode::ConfigError, "times need 0 <= start <= stop");
  }
  if (times.log_spaced && !(times.start > 0.0)) throw Error(ErrorCode::ConfigError, "log spacing needs start > 0");
  if (times.unit == TimeUnit::WignerSeitz && !(wigner_seitz_scale() > 0.0)) {
    throw Error(ErrorCode::ConfigError, "wigner_seitz time unit needs a density");
  }
  if (!(integrator.rtol > 0.0) || !(integrator.atol > 0.0)) {
    throw Error(ErrorCode::ConfigError, "integrator tolerances must be > 0");
  }
  if (method == Method::DTWA && n_traj < 1) throw Error(ErrorCode::ConfigError, "DTWA requires trajectories >= 1");
  if (block_size < 1) throw Error(ErrorCode::ConfigError, "block_size must be >= 1");
  if (method == Method::Exact && g.target_count() > krylov.cap) {
    throw Error(ErrorCode::ConfigError, "Exact method limited to " + std::to_string(krylov.cap) + " spins, config asks for " +
                                            std::to_string(g.target_count()));
  }
  if (method == Method::MACE && (mace_cluster < 1 || mace_cluster > krylov.cap)) {
    throw Error(ErrorCode::ConfigError, "mace.cluster_size must be in [1, cap]");
  }
  if (method == Method::Fluctuator && fluctuator_mode == FluctuatorMode::MonteCarlo && fluctuator_samples < 1) {
    throw Error(ErrorCode::ConfigError, "fluctuator.samples must be >= 1");
  }
}

double ExperimentConfig::wigner_seitz_scale() const {
  const CloudGeometry g = resolved_geometry();
  double rho = 0.0;
  if (g.peak_density) {
    rho = *g.peak_density;
  } else if (g.count && g.volume() > 0.0) {
    rho = static_cast<double>(*g.count) / g.volume();
  }
  if (!(rho > 0.0)) return 0.0;
  return xxz.c6 / std::pow(wigner_seitz_radius(rho), 6);
}

std::vector<double> ExperimentConfig::time_points() const {
  const double to_us = times.unit == TimeUnit::Microsecond ? 1.0 : 1.0 / angular(wigner_seitz_scale());
  std::vector<double> t(times.points);
  for (std::size_t k = 0; k < times.points; ++k) {
    const double f = times.points == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(times.points - 1);
    t[k] = times.log_spaced ? times.start * std::pow(times.stop / times.start, f)
                            : times.start + f * (times.stop - times.start);
    t[k] *= to_us;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct RealizationOutput {
  bool ok = false;
  ObservableSeries curve;
  double density = 0.0;
  double j_mf = 0.0;
  double j_max = 0.0;
  std::size_t count = 0;
  ConservationReport conservation;
  RealizationFailure failure;
};

std::uint64_t sampling_seed(std::uint64_t realization_seed) { return derive_seed(realization_seed, {1}); }

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

RealizationOutput run_realization(const ExperimentConfig& cfg, const CloudGeometry& geo, std::uint64_t rseed, const std::vector<double>& times, unsigned inner_workers) {
  RealizationOutput out;
  const SpinConfiguration spins = sample_configuration(geo, sampling_seed(rseed), cfg.excitation_probability);
  CouplingMatrix cm = build_coupling_matrix(spins, cfg.xxz);
  out.count = spins.size();
  out.density = spins.realized_density;
  out.j_mf = cm.j_mf_median();
  out.j_max = cm.j_max();
  switch (cfg.method) {
    case Method::Exact: {
      ExactRunOptions o;
      o.krylov = cfg.krylov;
      ExactDiagnostics d;
      out.curve = run_exact(cm, cfg.protocol, times, o, &d);
      out.conservation.quantum_norm_drift = d.max_norm_drift;
      out.conservation.quantum_sz_drift = d.max_sz_drift;
      out.conservation.quantum_energy_drift = d.max_energy_drift;
      break;
    }
    case Method::MACE: {
      MaceOptions o;
      o.cluster_size = cfg.mace_cluster;
      o.krylov = cfg.krylov;
      out.curve = evolve_mace(cm, cfg.protocol, times, o);
      break;
    }
    case Method::DTWA: {
      SemiclassicalOptions o;
      o.n_traj = cfg.n_traj;
      o.seed = derive_seed(rseed, {2});
      o.integrator = cfg.integrator;
      o.workers = inner_workers;
      o.block_size = cfg.block_size;
      SemiclassicalDiagnostics d;
      out.curve = run_dtwa(cm, cfg.protocol, times, o, &d);
      out.conservation.spin_norm_drift = d.max_norm_drift;
      out.conservation.energy_drift = d.max_energy_drift;
      break;
    }
    case Method::MeanField: {
      SemiclassicalDiagnostics d;
      out.curve = run_mean_field(cm, cfg.protocol, times, cfg.integrator, &d);
      out.conservation.spin_norm_drift = d.max_norm_drift;
      out.conservation.energy_drift = d.max_energy_drift;
      break;
    }
    case Method::EmchRadin: {
      cm.set_ising(true);
      out.curve = emch_radin_ising(cm, times);
      break;
    }
    case Method::Fluctuator: {
      // Bins cover every realized coupling: out-of-range spins would drop out
      // of the rate average and bias the curve.
      const std::vector<double> per_spin = per_spin_couplings(spins, cfg.xxz.c6, cfg.fluctuator_provenance);
      const auto [lo, hi] = std::minmax_element(per_spin.begin(), per_spin.end());
      if (per_spin.empty() || !(*lo > 0.0)) throw Error(ErrorCode::DomainError, "fluctuator needs positive couplings");
      const Binning bins{*lo / 1.01, *hi * 1.01, 256, true};
      const CouplingDistribution g = histogram_couplings(per_spin, bins, cfg.fluctuator_provenance);
      FluctuatorOptions o;
      o.mode = cfg.fluctuator_mode;
      o.samples = cfg.fluctuator_samples;
      o.seed = derive_seed(rseed, {3});
      o.fit_curve = false;
      out.curve = fluctuator_model(g, times, o).curve;
      break;
    }
  }
  out.ok = true;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CurveMetadata curve_meta(const ExperimentConfig& cfg, const std::string& hash) {
  CurveMetadata m;
  m["config_hash"] = hash;
  m["method"] = to_string(cfg.method);
  m["name"] = cfg.name;
  m["seed"] = std::to_string(cfg.seed);
  m["realizations"] = std::to_string(cfg.n_realizations);
  if (cfg.method == Method::DTWA) m["trajectories"] = std::to_string(cfg.n_traj);
  m["include_pulses"] = cfg.protocol.include_pulses ? "true" : "false";
  m["rtol"] = num(cfg.integrator.rtol);
  m["atol"] = num(cfg.integrator.atol);
  return m;
}

std::string config_to_json(const ExperimentConfig& c) {
  // Canonical, unit-explicit rendering of the resolved configuration.
  json j;
  j["name"] = c.name;
  j["method"] = to_string(c.method);
  const CloudGeometry g = c.resolved_geometry();
  json geo;
  if (g.kind == GeometryKind::UniformBox) {
    geo["kind"] = "box";
    geo["box"] = {format_quantity(g.box[0], Dimension::Length), format_quantity(g.box[1], Dimension::Length),
                  format_quantity(g.box[2], Dimension::Length)};
    geo["periodic"] = g.periodic;
  } else {
    geo["kind"] = "gaussian";
    geo["cloud_sigma"] = {format_quantity(g.cloud_sigma[0], Dimension::Length),
                          format_quantity(g.cloud_sigma[1], Dimension::Length),
                          format_quantity(g.cloud_sigma[2], Dimension::Length)};
    geo["laser_sigma"] = format_quantity(g.laser_sigma, Dimension::Length);
    geo["ground_peak_density"] = format_quantity(g.ground_peak_density, Dimension::Density);
    geo["excitation_probability"] = c.excitation_probability;
  }
  if (g.peak_density) geo["density"] = format_quantity(*g.peak_density, Dimension::Density);
  if (g.count) geo["count"] = *g.count;
  geo["blockade_radius"] = format_quantity(g.blockade_radius, Dimension::Length);
  j["geometry"] = geo;
  json x = {{"c6", format_quantity(c.xxz.c6, Dimension::C6)},
            {"delta", c.xxz.delta},
            {"delta_vdw", format_quantity(c.xxz.delta_vdw, Dimension::Frequency)},
            {"include_detuning", c.xxz.include_detuning},
            {"ising", c.xxz.ising}};
  if (c.xxz.truncation_radius) x["truncation_radius"] = format_quantity(*c.xxz.truncation_radius, Dimension::Length);
  j["xxz"] = x;
  json pr = {{"rabi", format_quantity(c.protocol.rabi, Dimension::Frequency)},
             {"detuning", format_quantity(c.protocol.detuning, Dimension::Frequency)},
             {"include_pulses", c.protocol.include_pulses}};
  if (c.protocol.first_pulse_duration) {
    pr["first_pulse_duration"] = format_quantity(*c.protocol.first_pulse_duration, Dimension::Time);
  }
  j["protocol"] = pr;
  json t;
  t["unit"] = c.times.unit == TimeUnit::Microsecond ? "us" : "wigner_seitz";
  if (c.times.unit == TimeUnit::Microsecond) {
    t["start"] = format_quantity(c.times.start, Dimension::Time);
    t["stop"] = format_quantity(c.times.stop, Dimension::Time);
  } else {
    t["start"] = c.times.start;
    t["stop"] = c.times.stop;
  }
  t["points"] = c.times.points;
  t["spacing"] = c.times.log_spaced ? "log" : "linear";
  j["times"] = t;
  j["realizations"] = c.n_realizations;
  j["trajectories"] = c.n_traj;
  j["block_size"] = c.block_size;
  j["seed"] = c.seed;
  j["integrator"] = {{"rtol", c.integrator.rtol}, {"atol", c.integrator.atol}};
  j["krylov"] = {{"tol", c.krylov.tol}, {"max_dim", c.krylov.max_dim}, {"cap", c.krylov.cap}};
  j["mace"] = {{"cluster_size", c.mace_cluster}};
  j["fluctuator"] = {
      {"provenance", c.fluctuator_provenance == Provenance::NearestNeighbor ? "nearest_neighbor" : "mean_field"},
      {"mode", c.fluctuator_mode == FluctuatorMode::Quadrature ? "quadrature" : "monte_carlo"},
      {"samples", c.fluctuator_samples}};
  j["analysis"] = {{"fit", c.fit},
                   {"free_amplitude", c.fit_options.free_amplitude},
                   {"exclude_early", c.fit_options.exclude_early},
                   {"floor", c.fit_options.floor},
                   {"collapse_scale", c.collapse_scale == CollapseScale::ATilde ? "a_tilde" : "a"}};
  return j.dump();
}

}  // namespace

SpinConfiguration sample_realization(const ExperimentConfig& cfg, std::size_t r) {
  return sample_configuration(cfg.resolved_geometry(), sampling_seed(realization_seed(cfg, r)), cfg.excitation_probability);
}

std::uint64_t realization_seed(const ExperimentConfig& cfg, std::size_t r) { return derive_seed(cfg.seed, {r}); }

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto wall0 = std::chrono::steady_clock::now();
  cfg.validate();
  const CloudGeometry geo = cfg.resolved_geometry();
  const std::vector<double> times = cfg.time_points();
  const unsigned workers = cfg.workers ? std::max(1u, *cfg.workers) : default_workers();
  const std::size_t nr = cfg.n_realizations;
  const unsigned outer = nr > 1 ? workers : 1;
  const unsigned inner = nr > 1 ? 1 : workers;

  ExperimentResult res;
  RunManifest& man = res.manifest;
  man.config_hash = hex64(fnv1a64(config_to_json(cfg)));
  man.software_version = software_version();
  man.n_traj = cfg.method == Method::DTWA ? cfg.n_traj : 0;
  man.rtol = cfg.integrator.rtol;
  man.atol = cfg.integrator.atol;
  man.method = to_string(cfg.method);
  {
    std::ostringstream p;
    p << "rabi=" << num(cfg.protocol.rabi) << " MHz; detuning=" << num(cfg.protocol.detuning)
      << " MHz; include_pulses=" << (cfg.protocol.include_pulses ? "true" : "false");
    man.protocol = p.str();
  }
  for (std::size_t r = 0; r < nr; ++r) man.seeds.push_back(realization_seed(cfg, r));

  std::vector<RealizationOutput> outs(nr);
  parallel_for(nr, outer, [&](std::size_t r) {
    try {
      outs[r] = run_realization(cfg, geo, man.seeds[r], times, inner);
    } catch (const Error& e) {
      outs[r].ok = false;
      outs[r].failure = RealizationFailure{r, std::string(to_string(e.code())), e.what()};
    }
  });

  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < nr; ++r) {
    if (outs[r].ok) {
      good.push_back(r);
    } else {
      man.failures.push_back(outs[r].failure);
    }
  }
  if (good.empty()) {
    throw Error(ErrorCode::NonConvergence,
                "all " + std::to_string(nr) + " realizations failed; first: " + man.failures.front().message);
  }

  // Fixed reduction order: realization index.
  EnsembleScales& sc = res.scales;
  for (std::size_t r : good) {
    res.realizations.push_back(outs[r].curve);
    sc.density += outs[r].density;
    sc.j_mf += outs[r].j_mf;
    sc.j_max += outs[r].j_max;
    sc.mean_count += static_cast<double>(outs[r].count);
    auto& cons = res.conservation;
    const auto& c = outs[r].conservation;
    cons.spin_norm_drift = std::max(cons.spin_norm_drift, c.spin_norm_drift);
    cons.energy_drift = std::max(cons.energy_drift, c.energy_drift);
    cons.quantum_norm_drift = std::max(cons.quantum_norm_drift, c.quantum_norm_drift);
    cons.quantum_sz_drift = std::max(cons.quantum_sz_drift, c.quantum_sz_drift);
    cons.quantum_energy_drift = std::max(cons.quantum_energy_drift, c.quantum_energy_drift);
  }
  const double ng = static_cast<double>(good.size());
  sc.density /= ng;
  sc.j_mf /= ng;
  sc.j_max /= ng;
  sc.mean_count /= ng;
  if (geo.blockade_radius > 0.0) sc.j_max = cfg.xxz.c6 / std::pow(geo.blockade_radius, 6);
  if (sc.density > 0.0) {
    sc.a = wigner_seitz_radius(sc.density);
    sc.j_ws = cfg.xxz.c6 / std::pow(sc.a, 6);
  }
  if (sc.j_mf > 0.0) sc.a_tilde = std::pow(cfg.xxz.c6 / sc.j_mf, 1.0 / 6.0);

  res.curve = average_curves(res.realizations);
  if (cfg.fit) {
    try {
      const double jm = cfg.method == Method::Fluctuator ? 0.0 : sc.j_max;
      FitOptions fo = cfg.fit_options;
      if (cfg.method == Method::Fluctuator) fo.exclude_early = false;
      res.fit = fit_stretched_exponential(res.curve, jm, fo);
    } catch (const Error& e) {
      res.fit_error = e.what();
    }
  }

  if (!cfg.output_dir.empty()) {
    const fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir / "realizations", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    CurveMetadata meta = curve_meta(cfg, man.config_hash);
    // Ensemble scales let `fit` and `collapse` work from the curve file alone.
    meta["j_max_MHz"] = num(sc.j_max);
    meta["j_mf_MHz"] = num(sc.j_mf);
    meta["j_ws_MHz"] = num(sc.j_ws);
    write_curve_file((dir / "curve.dat").string(), res.curve, meta);
    man.files.push_back("curve.dat");
    for (std::size_t k = 0; k < good.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "realizations/curve_%04zu.dat", good[k]);
      CurveMetadata m = meta;
      m["realization"] = std::to_string(good[k]);
      m["realization_seed"] = std::to_string(man.seeds[good[k]]);
      write_curve_file((dir / name).string(), res.realizations[k], m);
      man.files.push_back(name);
    }
    {
      std::ostringstream s;
      s << "density_um^-3 = " << num(sc.density) << "\n"
        << "mean_count = " << num(sc.mean_count) << "\n"
        << "a_um = " << num(sc.a) << "\n"
        << "j_ws_MHz = " << num(sc.j_ws) << "\n"
        << "j_mf_MHz = " << num(sc.j_mf) << "\n"
        << "a_tilde_um = " << num(sc.a_tilde) << "\n"
        << "j_max_MHz = " << num(sc.j_max) << "\n"
        << "spin_norm_drift = " << num(res.conservation.spin_norm_drift) << "\n"
        << "energy_drift = " << num(res.conservation.energy_drift) << "\n"
        << "quantum_norm_drift = " << num(res.conservation.quantum_norm_drift) << "\n"
        << "quantum_sz_drift = " << num(res.conservation.quantum_sz_drift) << "\n"
        << "quantum_energy_drift = " << num(res.conservation.quantum_energy_drift) << "\n";
      write_text(dir / "scales.txt", s.str());
      man.files.push_back("scales.txt");
    }
    PlotSpec plot;
    plot.title = cfg.name;
    plot.xlabel = "t (us)";
    plot.ylabel = "<S_x>";
    plot.y_range = std::make_pair(-0.05, 0.55);
    plot.series.push_back({to_string(cfg.method), res.curve.times, res.curve.sx, res.curve.sx_err, false, false});
    if (res.fit) {
      std::ostringstream s;
      write_fit(s, *res.fit);
      write_text(dir / "fit.txt", s.str());
      man.files.push_back("fit.txt");
      PlotSeries f;
      f.label = "stretched exp";
      f.dashed = true;
      for (double t : res.curve.times) {
        f.x.push_back(t);
        f.y.push_back(res.fit->evaluate(t));
      }
      plot.series.push_back(std::move(f));
    } else if (res.fit_error) {
      write_text(dir / "fit.txt", "# fit failed: " + *res.fit_error + "\n");
      man.files.push_back("fit.txt");
    }
    {
      std::ofstream os(dir / "curve.svg");
      write_svg(os, plot);
      man.files.push_back("curve.svg");
    }
    man.files.push_back("manifest.json");
    man.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    json mj;
    mj["config_hash"] = man.config_hash;
    mj["software_version"] = man.software_version;
    mj["method"] = man.method;
    mj["protocol"] = man.protocol;
    mj["trajectories"] = man.n_traj;
    mj["rtol"] = man.rtol;
    mj["atol"] = man.atol;
    mj["seed"] = cfg.seed;
    mj["realization_seeds"] = man.seeds;
    mj["failed_realizations"] = man.failures.size();
    json fails = json::array();
    for (const auto& f : man.failures) fails.push_back({{"index", f.index}, {"code", f.code}, {"message", f.message}});
    mj["failures"] = fails;
    mj["files"] = man.files;
    mj["wall_time_s"] = man.wall_time_s;
    mj["config"] = json::parse(config_to_json(cfg));
    write_text(dir / "manifest.json", mj.dump(2) + "\n");
  } else {
    man.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  }
  return res;
}

SweepResult sweep_density(const ExperimentConfig& base, const std::vector<double>& densities) {
  if (densities.empty()) throw Error(ErrorCode::ConfigError, "sweep needs at least one density");
  SweepResult out;
  for (std::size_t k = 0; k < densities.size(); ++k) {
    ExperimentConfig c = base;
    c.geometry.peak_density = densities[k];
    if (c.geometry.kind == GeometryKind::UniformBox && !c.geometry.count) {
      // Fixed box: the density sets the count.
    } else if (c.geometry.kind == GeometryKind::UniformBox) {
      c.geometry.box = {0.0, 0.0, 0.0};  // cube derived from (count, density)
    } else {
      c.geometry.count.reset();
    }
    if (!base.output_dir.empty()) c.output_dir = (fs::path(base.output_dir) / ("rho_" + std::to_string(k))).string();
    c.name = base.name + " rho=" + format_quantity(densities[k], Dimension::Density);
    ExperimentResult r = run_experiment(c);
    SweepRow row;
    row.density = densities[k];
    row.scales = r.scales;
    if (c.geometry.blockade_radius > 0.0 && r.scales.a_tilde > 0.0) {
      row.disorder = std::pow(r.scales.a_tilde / c.geometry.blockade_radius, -3.0);
    }
    row.fit = r.fit;
    out.rows.push_back(row);
    out.runs.push_back(std::move(r));
  }
  if (densities.size() < 2) {
    out.notice = "single density: collapse skipped";
  } else {
    std::vector<ObservableSeries> curves;
    std::vector<double> s_tilde, s_ws;
    for (const auto& r : out.runs) {
      curves.push_back(r.curve);
      s_tilde.push_back(r.scales.j_mf);
      s_ws.push_back(r.scales.j_ws);
    }
    const auto& primary = base.collapse_scale == CollapseScale::ATilde ? s_tilde : s_ws;
    out.collapse = rescale_collapse(curves, primary);
    out.collapse_naive = rescale_collapse(curves, s_ws);
  }
  if (!base.output_dir.empty()) {
    const fs::path dir(base.output_dir);
    std::ostringstream t;
    t << "# density_cm^-3 count a_um a_tilde_um j_ws_MHz j_mf_MHz disorder beta beta_err gamma_per_us\n";
    for (const auto& row : out.rows) {
      t << num(row.density / kPerCubicCm) << ' ' << num(row.scales.mean_count) << ' ' << num(row.scales.a) << ' '
        << num(row.scales.a_tilde) << ' ' << num(row.scales.j_ws) << ' ' << num(row.scales.j_mf) << ' '
        << num(row.disorder) << ' ' << (row.fit ? num(row.fit->beta) : "nan") << ' '
        << (row.fit ? num(row.fit->beta_err()) : "nan") << ' ' << (row.fit ? num(row.fit->gamma) : "nan") << '\n';
    }
    write_text(dir / "beta_table.txt", t.str());
    if (out.collapse) {
      std::ostringstream s;
      write_collapse(s, *out.collapse);
      write_text(dir / "collapse.txt", s.str());
      std::ostringstream n;
      write_collapse(n, *out.collapse_naive);
      write_text(dir / "collapse_naive.txt", n.str());
      PlotSpec plot;
      plot.title = "collapse";
      plot.xlabel = "2 pi J t";
      plot.ylabel = "<S_x>";
      plot.log_x = true;
      for (std::size_t c = 0; c < out.collapse->values.size(); ++c) {
        plot.series.push_back({"rho_" + std::to_string(c), out.collapse->grid, out.collapse->values[c], {}, false,
                               false});
      }
      std::ofstream os(dir / "collapse.svg");
      write_svg(os, plot);
    } else {
      write_text(dir / "collapse.txt", "# " + out.notice + "\n");
    }
  }
  return out;
}

}  // namespace xxz
