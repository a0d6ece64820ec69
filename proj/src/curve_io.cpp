#include "xxz/curve_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xxz/error.hpp"
#include "xxz/protocol.hpp"

namespace xxz {

void ObservableSeries::allocate(bool with_entropy) {
  const std::size_t n = times.size();
  for (auto* v : {&sx, &sy, &sz, &sx_err, &sy_err, &sz_err}) v->assign(n, 0.0);
  if (with_entropy) {
    entropy.assign(n, 0.0);
    entropy_err.assign(n, 0.0);
  } else {
    entropy.clear();
    entropy_err.clear();
  }
}

ObservableSeries average_curves(const std::vector<ObservableSeries>& curves) {
  if (curves.empty()) throw Error(ErrorCode::DomainError, "no curves to average");
  const ObservableSeries& first = curves.front();
  bool entropy = first.has_entropy();
  for (const auto& c : curves) {
    if (c.times != first.times) throw Error(ErrorCode::DimensionMismatch, "curves use different time grids");
    entropy = entropy && c.has_entropy();
  }
  if (curves.size() == 1) {
    return first;
  }
  ObservableSeries out;
  out.times = first.times;
  out.allocate(entropy);
  const double n = static_cast<double>(curves.size());
  auto reduce = [&](auto member, std::vector<double>& mean, std::vector<double>& err) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      double s = 0.0;
      for (const auto& c : curves) s += (c.*member)[k];
      const double m = s / n;
      double v = 0.0;
      for (const auto& c : curves) v += ((c.*member)[k] - m) * ((c.*member)[k] - m);
      mean[k] = m;
      err[k] = std::sqrt(v / (n - 1.0) / n);
    }
  };
  reduce(&ObservableSeries::sx, out.sx, out.sx_err);
  reduce(&ObservableSeries::sy, out.sy, out.sy_err);
  reduce(&ObservableSeries::sz, out.sz, out.sz_err);
  if (entropy) reduce(&ObservableSeries::entropy, out.entropy, out.entropy_err);
  return out;
}

void RamseyProtocol::validate() const {
  if (include_pulses && !(rabi > 0.0)) throw Error(ErrorCode::ConfigError, "Rabi frequency must be > 0");
  if (!(rabi >= 0.0)) throw Error(ErrorCode::ConfigError, "Rabi frequency must be >= 0");
  if (first_pulse_duration && !(*first_pulse_duration >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "pulse duration must be >= 0");
  }
  if (!std::isfinite(detuning)) throw Error(ErrorCode::ConfigError, "detuning must be finite");
}

void write_curve(std::ostream& os, const ObservableSeries& c, const CurveMetadata& meta) {
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << '\n';
  const bool ent = c.has_entropy();
  os << "# t_us Sx Sx_err Sy Sy_err Sz Sz_err" << (ent ? " S2 S2_err" : "") << '\n';
  char buf[32];
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double cols[9] = {c.times[k], c.sx[k],  c.sx_err[k], c.sy[k], c.sy_err[k],
                            c.sz[k],    c.sz_err[k], ent ? c.entropy[k] : 0.0, ent ? c.entropy_err[k] : 0.0};
    const int ncol = ent ? 9 : 7;
    for (int q = 0; q < ncol; ++q) {
      std::snprintf(buf, sizeof buf, "%.17g", cols[q]);
      os << (q ? " " : "") << buf;
    }
    os << '\n';
  }
}

ObservableSeries read_curve(std::istream& is, CurveMetadata* meta) {
  ObservableSeries c;
  std::string line, last_comment;
  std::size_t lineno = 0;
  int ncol = -1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      last_comment = line;
      if (meta) {
        const auto colon = line.find(": ");
        if (colon != std::string::npos) {
          const std::size_t start = line.find_first_not_of("# ");
          (*meta)[line.substr(start, colon - start)] = line.substr(colon + 2);
        }
      }
      continue;
    }
    if (ncol < 0) {
      std::istringstream hs(last_comment.substr(last_comment.empty() ? 0 : 1));
      std::vector<std::string> names;
      for (std::string w; hs >> w;) names.push_back(w);
      static const std::vector<std::string> base{"t_us", "Sx", "Sx_err", "Sy", "Sy_err", "Sz", "Sz_err"};
      if (names.size() < 7 || !std::equal(base.begin(), base.end(), names.begin())) {
        throw Error(ErrorCode::IoError, "curve header must name columns t_us Sx Sx_err Sy Sy_err Sz Sz_err");
      }
      ncol = static_cast<int>(names.size());
      if (ncol != 7 && !(ncol == 9 && names[7] == "S2" && names[8] == "S2_err")) {
        throw Error(ErrorCode::IoError, "unsupported curve columns");
      }
    }
    std::istringstream ls(line);
    double v[9] = {};
    for (int q = 0; q < ncol; ++q) {
      std::string tok;
      if (!(ls >> tok)) throw Error(ErrorCode::IoError, "short curve row at line " + std::to_string(lineno));
      try {
        std::size_t used = 0;
        v[q] = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "bad number '" + tok + "' at line " + std::to_string(lineno));
      }
    }
    c.times.push_back(v[0]);
    c.sx.push_back(v[1]);
    c.sx_err.push_back(v[2]);
    c.sy.push_back(v[3]);
    c.sy_err.push_back(v[4]);
    c.sz.push_back(v[5]);
    c.sz_err.push_back(v[6]);
    if (ncol == 9) {
      c.entropy.push_back(v[7]);
      c.entropy_err.push_back(v[8]);
    }
  }
  return c;
}

void write_curve_file(const std::string& path, const ObservableSeries& curve, const CurveMetadata& meta) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_curve(os, curve, meta);
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

ObservableSeries read_curve_file(const std::string& path, CurveMetadata* meta) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path);
  return read_curve(is, meta);
}

}  // namespace xxz
