#pragma once

// Internal unit system used across the library:
//   length     micrometre (um)
//   time       microsecond (us)
//   frequency  MHz, ordinary frequency nu (NOT angular)
//   density    um^-3
//   C6         MHz * um^6
//
// Every coupling, Rabi frequency and detuning is stored as nu. The factor
// 2*pi is applied exactly once, where an equation of motion or propagator
// is formed (see angular()).

#include <numbers>
#include <string>
#include <string_view>

namespace xxz {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// nu [MHz] -> omega [rad/us]
constexpr double angular(double frequency_mhz) { return kTwoPi * frequency_mhz; }

// 1 cm^-3 expressed in um^-3.
inline constexpr double kPerCubicCm = 1e-12;

enum class Dimension { Length, Time, Frequency, Density, C6, Angle, Dimensionless };

std::string_view to_string(Dimension d);

// Parses "<number> <unit>" strictly. Unknown or missing units, or a unit of
// the wrong dimension, raise Error(ConfigError). Dimensionless quantities
// must not carry a unit. Returns the value in internal units.
double parse_quantity(std::string_view text, Dimension expected);

// Formats a value in internal units with its canonical unit label.
std::string format_quantity(double value, Dimension d);

}  // namespace xxz
