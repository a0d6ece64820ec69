#include "xxz/units.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "xxz/error.hpp"

namespace xxz {

namespace {

struct UnitInfo {
  Dimension dim;
  double scale;  // multiply parsed number by this to get internal units
};

const std::map<std::string, UnitInfo, std::less<>>& unit_table() {
  static const std::map<std::string, UnitInfo, std::less<>> table = {
      {"um", {Dimension::Length, 1.0}},
      {"nm", {Dimension::Length, 1e-3}},
      {"mm", {Dimension::Length, 1e3}},
      {"us", {Dimension::Time, 1.0}},
      {"ns", {Dimension::Time, 1e-3}},
      {"ms", {Dimension::Time, 1e3}},
      {"s", {Dimension::Time, 1e6}},
      {"Hz", {Dimension::Frequency, 1e-6}},
      {"kHz", {Dimension::Frequency, 1e-3}},
      {"MHz", {Dimension::Frequency, 1.0}},
      {"GHz", {Dimension::Frequency, 1e3}},
      {"um^-3", {Dimension::Density, 1.0}},
      {"cm^-3", {Dimension::Density, kPerCubicCm}},
      {"MHz*um^6", {Dimension::C6, 1.0}},
      {"GHz*um^6", {Dimension::C6, 1e3}},
      {"rad", {Dimension::Angle, 1.0}},
      {"deg", {Dimension::Angle, std::numbers::pi / 180.0}},
  };
  return table;
}

// Normalizes the micro sign variants and the middle dot so "μm", "µm" and
// "MHz·μm^6" are accepted alongside plain ASCII.
std::string normalize_unit(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == 0xCE && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xBC) {
      out.push_back('u');  // U+03BC
      ++i;
    } else if (c == 0xC2 && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xB5) {
      out.push_back('u');  // U+00B5
      ++i;
    } else if (c == 0xC2 && i + 1 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0xB7) {
      out.push_back('*');  // U+00B7
      ++i;
    } else if (c == ' ') {
      out.push_back('*');
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::Length: return "length";
    case Dimension::Time: return "time";
    case Dimension::Frequency: return "frequency";
    case Dimension::Density: return "density";
    case Dimension::C6: return "C6";
    case Dimension::Angle: return "angle";
    case Dimension::Dimensionless: return "dimensionless";
  }
  return "?";
}

double parse_quantity(std::string_view text, Dimension expected) {
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || !std::isfinite(value)) {
    throw Error(ErrorCode::ConfigError, "cannot parse number in '" + std::string(text) + "'");
  }
  const std::string_view rest = trim(std::string_view(ptr, s.data() + s.size() - ptr));
  if (expected == Dimension::Dimensionless) {
    if (!rest.empty()) {
      throw Error(ErrorCode::ConfigError, "unexpected unit in dimensionless '" + std::string(text) + "'");
    }
    return value;
  }
  if (rest.empty()) {
    throw Error(ErrorCode::ConfigError, "missing " + std::string(to_string(expected)) +
                                            " unit in '" + std::string(text) + "'");
  }
  const std::string unit = normalize_unit(rest);
  const auto& table = unit_table();
  const auto it = table.find(unit);
  if (it == table.end()) {
    throw Error(ErrorCode::ConfigError, "unknown unit '" + std::string(rest) + "'");
  }
  if (it->second.dim != expected) {
    throw Error(ErrorCode::ConfigError, "unit '" + std::string(rest) + "' is a " +
                                            std::string(to_string(it->second.dim)) + ", expected " +
                                            std::string(to_string(expected)));
  }
  return value * it->second.scale;
}

std::string format_quantity(double value, Dimension d) {
  const char* unit = "";
  switch (d) {
    case Dimension::Length: unit = " um"; break;
    case Dimension::Time: unit = " us"; break;
    case Dimension::Frequency: unit = " MHz"; break;
    case Dimension::Density: unit = " um^-3"; break;
    case Dimension::C6: unit = " MHz*um^6"; break;
    case Dimension::Angle: unit = " rad"; break;
    case Dimension::Dimensionless: break;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g%s", value, unit);
  return buf;
}

}  // namespace xxz
