#pragma once

#include <numbers>
#include <optional>

namespace xxz {

// Uniform microwave drive: H_ext = sum_i (Omega sin(phi) Sx - Omega cos(phi) Sy + Delta Sz).
// Frequencies in MHz (nu).
struct ExternalField {
  double rabi = 0.0;
  double detuning = 0.0;
  double phase = 0.0;
};

// Ramsey sequence: pi/2 pulse (phase 0) from all-down, free evolution for t
// with the detuning on, readout pulse with phase phi, measurement of Sz.
// With include_pulses false both pulses are ideal instantaneous rotations and
// the initial state is the x-polarized product state.
struct RamseyProtocol {
  double rabi = 3.0;      // MHz (nu)
  double detuning = 0.0;  // MHz (nu)
  std::optional<double> first_pulse_duration;  // us; default quarter Rabi period
  bool include_pulses = false;

  double pulse_duration() const {
    return first_pulse_duration ? *first_pulse_duration : 0.25 / rabi;
  }
  double readout_duration() const { return 0.25 / rabi; }

  ExternalField pulse_field(double phase) const { return {rabi, detuning, phase}; }
  ExternalField free_field() const { return {0.0, detuning, 0.0}; }

  void validate() const;
};

}  // namespace xxz
