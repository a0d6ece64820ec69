// xxzsim: command-line driver for the disordered XXZ relaxation toolkit.
//
// Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xxz/analysis.hpp"
#include "xxz/couplings.hpp"
#include "xxz/curve_io.hpp"
#include "xxz/disorder.hpp"
#include "xxz/error.hpp"
#include "xxz/experiment.hpp"
#include "xxz/readout.hpp"
#include "xxz/svg_plot.hpp"
#include "xxz/units.hpp"

namespace fs = std::filesystem;
using namespace xxz;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "experiment configuration (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override the master seed");
  cmd->add_option("--workers", f.workers, "worker threads (default: XXZ_WORKERS or hardware)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory or file");
}

ExperimentConfig configured(const CommonFlags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (!f.out.empty()) c.output_dir = f.out;
  c.validate();
  return c;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string());
  }
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return os;
}

// Frequency option: either a quantity string ("3.78 MHz") or a curve
// metadata key to fall back on.
double frequency_from(const std::string& text, const CurveMetadata& meta, const char* key) {
  if (!text.empty()) return parse_quantity(text, Dimension::Frequency);
  auto it = meta.find(key);
  if (it == meta.end()) return 0.0;
  return std::stod(it->second);
}

void print_fit(std::ostream& os, const FitResult& f) {
  char line[256];
  std::snprintf(line, sizeof line, "beta = %.4f +- %.4f, gamma = %.6g +- %.2g /us, window [%.4g, %.4g] us, %zu points\n",
                f.beta, f.beta_err(), f.gamma, f.gamma_err(), f.t_min, f.t_max, f.points);
  os << line;
}

int cmd_sample(const CommonFlags& f, bool distributions) {
  const ExperimentConfig c = configured(f);
  const fs::path dir = f.out.empty() ? fs::path(c.output_dir.empty() ? "." : c.output_dir) : fs::path(f.out);
  std::printf("# realization count density_cm^-3 min_distance_um j_mf_MHz a_tilde_um\n");
  for (std::size_t r = 0; r < c.n_realizations; ++r) {
    const SpinConfiguration s = sample_realization(c, r);
    char name[64];
    std::snprintf(name, sizeof name, "configuration_%04zu.txt", r);
    {
      auto os = open_out(dir / name);
      write_configuration(os, s);
    }
    if (distributions) {
      for (Provenance p : {Provenance::NearestNeighbor, Provenance::MeanField}) {
        std::snprintf(name, sizeof name, "distribution_%s_%04zu.txt", to_string(p).c_str(), r);
        auto os = open_out(dir / name);
        write_distribution(os, coupling_distribution(s, c.xxz.c6, p));
      }
    }
    const MeanFieldScale mf = s.size() > 1 ? mean_field_scale(s, c.xxz.c6) : MeanFieldScale{};
    std::printf("%zu %zu %.6g %.6g %.6g %.6g\n", r, s.size(), s.realized_density / kPerCubicCm,
                s.size() > 1 ? s.min_pair_distance() : 0.0, mf.j_mf, mf.a_tilde);
  }
  return 0;
}

void print_scales(const EnsembleScales& s) {
  std::printf("spins %.1f, density %.4g cm^-3, a %.4g um, a_tilde %.4g um, J_mf %.4g MHz, J_max %.4g MHz\n",
              s.mean_count, s.density / kPerCubicCm, s.a, s.a_tilde, s.j_mf, s.j_max);
}

int cmd_evolve(const CommonFlags& f) {
  const ExperimentConfig c = configured(f);
  const ExperimentResult r = run_experiment(c);
  std::printf("%s: %s, %zu/%zu realizations, %.2f s\n", c.name.c_str(), to_string(c.method).c_str(),
              r.realizations.size(), c.n_realizations, r.manifest.wall_time_s);
  print_scales(r.scales);
  for (const auto& fail : r.manifest.failures) {
    std::fprintf(stderr, "realization %zu failed (%s): %s\n", fail.index, fail.code.c_str(), fail.message.c_str());
  }
  if (r.fit) {
    print_fit(std::cout, *r.fit);
  } else if (r.fit_error) {
    std::printf("fit failed: %s\n", r.fit_error->c_str());
  }
  if (c.output_dir.empty()) write_curve(std::cout, r.curve);
  return 0;
}

struct FitFlags {
  std::string curve;
  std::string j_max;
  std::string t_min, t_max;
  bool free_amplitude = false;
  bool unweighted = false;
  bool keep_early = false;
};

int cmd_fit(const CommonFlags& f, const FitFlags& ff) {
  CurveMetadata meta;
  const ObservableSeries curve = read_curve_file(ff.curve, &meta);
  const double j_max = frequency_from(ff.j_max, meta, "j_max_MHz");
  FitOptions o;
  o.free_amplitude = ff.free_amplitude;
  o.use_weights = !ff.unweighted;
  o.exclude_early = !ff.keep_early && j_max > 0.0;
  if (!ff.t_min.empty()) o.t_min = parse_quantity(ff.t_min, Dimension::Time);
  if (!ff.t_max.empty()) o.t_max = parse_quantity(ff.t_max, Dimension::Time);
  const FitResult r = fit_stretched_exponential(curve, j_max, o);
  print_fit(std::cout, r);
  if (!f.out.empty()) {
    auto os = open_out(f.out);
    write_fit(os, r);
  }
  return 0;
}

struct CollapseFlags {
  std::vector<std::string> curves;
  std::vector<std::string> scales;
  std::string key = "j_mf_MHz";
  std::size_t grid_points = 64;
};

int cmd_collapse(const CommonFlags& f, const CollapseFlags& cf) {
  if (!cf.scales.empty() && cf.scales.size() != cf.curves.size()) {
    throw Error(ErrorCode::ConfigError, "--scales needs one entry per curve");
  }
  std::vector<ObservableSeries> curves;
  std::vector<double> scales;
  for (std::size_t k = 0; k < cf.curves.size(); ++k) {
    CurveMetadata meta;
    curves.push_back(read_curve_file(cf.curves[k], &meta));
    const double s = frequency_from(cf.scales.empty() ? std::string() : cf.scales[k], meta, cf.key.c_str());
    if (!(s > 0.0)) throw Error(ErrorCode::ConfigError, cf.curves[k] + ": no energy scale (pass --scales)");
    scales.push_back(s);
  }
  CollapseOptions o;
  o.grid_points = cf.grid_points;
  const CollapseReport rep = rescale_collapse(curves, scales, o);
  std::printf("dispersion = %.6g over [%.4g, %.4g]\n", rep.dispersion, rep.grid.front(), rep.grid.back());
  if (!f.out.empty()) {
    auto os = open_out(f.out);
    write_collapse(os, rep);
  }
  return 0;
}

struct ReadoutFlags {
  std::string curve;
  double n_total = 1000.0;
  double eta = 0.173;
  double aux_rate = 0.007;
  double leakage = 0.0;
  std::size_t phases = 8;
  bool noiseless = false;
};

int cmd_readout(const CommonFlags& f, const ReadoutFlags& rf) {
  const ObservableSeries truth = read_curve_file(rf.curve);
  DetectionModel m;
  m.eta = rf.eta;
  m.aux_rate = rf.aux_rate;
  m.leakage = rf.leakage;
  m.noise = rf.noiseless ? CountingNoise::None : CountingNoise::Poissonian;
  m.validate();
  if (!(rf.n_total > 0.0)) throw Error(ErrorCode::ConfigError, "--n-total must be positive");
  const ReadoutSeries rs = simulate_readout(truth, rf.n_total, m, default_phases(rf.phases), f.seed.value_or(1));
  if (f.out.empty()) {
    write_curve(std::cout, rs.curve);
    return 0;
  }
  const fs::path dir(f.out);
  {
    auto os = open_out(dir / "scans.txt");
    write_phase_scans(os, rs.scans);
  }
  {
    auto os = open_out(dir / "reconstructed.dat");
    write_curve(os, rs.curve, {{"eta", std::to_string(m.eta)}, {"n_total", std::to_string(rf.n_total)}});
  }
  {
    auto os = open_out(dir / "n_aux.txt");
    os << "# t_us N_a\n";
    char line[64];
    for (std::size_t k = 0; k < rs.n_aux.size(); ++k) {
      std::snprintf(line, sizeof line, "%.17g %.17g\n", rs.curve.times[k], rs.n_aux[k]);
      os << line;
    }
  }
  std::printf("%zu time points written to %s\n", rs.scans.size(), dir.string().c_str());
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::vector<std::string>& density_text) {
  const ExperimentConfig c = configured(f);
  std::vector<double> densities;
  for (const auto& d : density_text) densities.push_back(parse_quantity(d, Dimension::Density));
  const SweepResult s = sweep_density(c, densities);
  std::printf("# density_cm^-3 disorder beta beta_err J_mf_MHz a_tilde_um\n");
  for (const auto& row : s.rows) {
    std::printf("%.4g %.4f %.4f %.4f %.5g %.4g\n", row.density / kPerCubicCm, row.disorder,
                row.fit ? row.fit->beta : std::nan(""), row.fit ? row.fit->beta_err() : std::nan(""),
                row.scales.j_mf, row.scales.a_tilde);
  }
  if (s.collapse) {
    std::printf("collapse dispersion %.5f (naive C6/a^6: %.5f)\n", s.collapse->dispersion, s.collapse_naive->dispersion);
  } else {
    std::printf("%s\n", s.notice.c_str());
  }
  return 0;
}

struct PlotFlags {
  std::vector<std::string> curves;
  std::string title;
  std::string column = "sx";
  bool log_x = false;
  bool fit = false;
};

int cmd_plot(const CommonFlags& f, const PlotFlags& pf) {
  if (f.out.empty()) throw Error(ErrorCode::ConfigError, "plot needs --out <file.svg>");
  PlotSpec spec;
  spec.title = pf.title;
  spec.xlabel = "t (us)";
  spec.ylabel = "<S_" + pf.column.substr(1) + ">";
  spec.log_x = pf.log_x;
  for (const auto& path : pf.curves) {
    CurveMetadata meta;
    const ObservableSeries c = read_curve_file(path, &meta);
    PlotSeries s;
    s.label = fs::path(path).parent_path().filename().string();
    if (s.label.empty()) s.label = fs::path(path).stem().string();
    s.x = c.times;
    if (pf.column == "sx") {
      s.y = c.sx, s.err = c.sx_err;
    } else if (pf.column == "sy") {
      s.y = c.sy, s.err = c.sy_err;
    } else {
      s.y = c.sz, s.err = c.sz_err;
    }
    if (pf.log_x) {
      // Drop t = 0 on a log axis.
      while (!s.x.empty() && s.x.front() <= 0.0) {
        s.x.erase(s.x.begin());
        s.y.erase(s.y.begin());
        if (!s.err.empty()) s.err.erase(s.err.begin());
      }
    }
    spec.series.push_back(s);
    if (pf.fit && pf.column == "sx") {
      FitOptions o;
      const double j_max = frequency_from("", meta, "j_max_MHz");
      o.exclude_early = j_max > 0.0;
      const FitResult r = fit_stretched_exponential(c, j_max, o);
      PlotSeries fs_;
      fs_.label = s.label + " fit";
      fs_.dashed = true;
      for (double t : s.x) {
        fs_.x.push_back(t);
        fs_.y.push_back(r.evaluate(t));
      }
      spec.series.push_back(std::move(fs_));
    }
  }
  auto os = open_out(f.out);
  write_svg(os, spec);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disordered XXZ spin relaxation: sampling, evolution, readout and analysis"};
  app.set_version_flag("--version", software_version());
  app.require_subcommand(1);

  CommonFlags common;
  bool distributions = false;
  FitFlags ff;
  CollapseFlags cf;
  ReadoutFlags rf;
  PlotFlags pf;
  std::vector<std::string> densities;

  auto* sample = app.add_subcommand("sample", "sample spin configurations for every realization");
  add_common(sample, common, true);
  sample->add_flag("--distributions", distributions, "also write coupling histograms");

  auto* evolve = app.add_subcommand("evolve", "run the configured method over all realizations");
  add_common(evolve, common, true);

  auto* fit = app.add_subcommand("fit", "fit a stretched exponential to a curve file");
  add_common(fit, common, false);
  fit->add_option("curve", ff.curve, "curve file")->required()->check(CLI::ExistingFile);
  fit->add_option("--j-max", ff.j_max, "early-time cutoff coupling, e.g. '3.78 MHz' (default: curve metadata)");
  fit->add_option("--t-min", ff.t_min, "explicit window start, e.g. '0.5 us'");
  fit->add_option("--t-max", ff.t_max, "explicit window end");
  fit->add_flag("--free-amplitude", ff.free_amplitude, "fit the amplitude as well");
  fit->add_flag("--unweighted", ff.unweighted, "ignore standard errors");
  fit->add_flag("--keep-early", ff.keep_early, "do not exclude t < 1/J_max");

  auto* collapse = app.add_subcommand("collapse", "rescale curves by energy scales and measure their dispersion");
  add_common(collapse, common, false);
  collapse->add_option("curves", cf.curves, "curve files")->required()->expected(2, -1)->check(CLI::ExistingFile);
  collapse->add_option("--scales", cf.scales, "one frequency per curve, e.g. '0.05 MHz'");
  collapse->add_option("--scale-key", cf.key, "curve metadata key used when --scales is absent")
      ->check(CLI::IsMember({"j_mf_MHz", "j_ws_MHz"}));
  collapse->add_option("--grid-points", cf.grid_points, "shared grid size")->check(CLI::Range(2, 100000));

  auto* readout = app.add_subcommand("readout-sim", "pass a curve through the detection chain and invert it");
  add_common(readout, common, false);
  readout->add_option("curve", rf.curve, "true magnetization curve")->required()->check(CLI::ExistingFile);
  readout->add_option("--n-total", rf.n_total, "spins per shot");
  readout->add_option("--eta", rf.eta, "detection efficiency");
  readout->add_option("--aux-rate", rf.aux_rate, "auxiliary population growth, 1/us");
  readout->add_option("--leakage", rf.leakage, "fraction of down atoms surviving the depump");
  readout->add_option("--phases", rf.phases, "phases per scan")->check(CLI::Range(4, 4096));
  readout->add_flag("--noiseless", rf.noiseless, "disable Poisson counting noise");

  auto* sweep = app.add_subcommand("sweep", "run the configuration at several densities and compare");
  add_common(sweep, common, true);
  sweep->add_option("--densities", densities, "spin densities, e.g. '1.25e8 cm^-3'")->required();

  auto* plot = app.add_subcommand("plot", "render curve files to SVG");
  add_common(plot, common, false);
  plot->add_option("curves", pf.curves, "curve files")->required()->check(CLI::ExistingFile);
  plot->add_option("--title", pf.title);
  plot->add_option("--column", pf.column)->check(CLI::IsMember({"sx", "sy", "sz"}));
  plot->add_flag("--log-x", pf.log_x);
  plot->add_flag("--fit", pf.fit, "overlay stretched-exponential fits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sample) return cmd_sample(common, distributions);
    if (*evolve) return cmd_evolve(common);
    if (*fit) return cmd_fit(common, ff);
    if (*collapse) return cmd_collapse(common, cf);
    if (*readout) return cmd_readout(common, rf);
    if (*sweep) return cmd_sweep(common, densities);
    if (*plot) return cmd_plot(common, pf);
  } catch (const Error& e) {
    std::fprintf(stderr, "xxzsim: %s\n", e.what());
    return e.is_config_error() ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "xxzsim: %s\n", e.what());
    return kExitConfig;
  }
  return 0;
}
