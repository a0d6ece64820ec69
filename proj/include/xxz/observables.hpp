#pragma once

#include <cstddef>
#include <vector>

namespace xxz {

// Time series of ensemble-mean magnetization components (spin-1/2 units)
// with standard errors. Entropy columns are present only for exact runs.
struct ObservableSeries {
  std::vector<double> times;  // us
  std::vector<double> sx, sy, sz;
  std::vector<double> sx_err, sy_err, sz_err;
  std::vector<double> entropy, entropy_err;  // mean Renyi-2 entropy (bits)

  std::size_t size() const { return times.size(); }
  bool has_entropy() const { return !entropy.empty(); }

  // Sizes every column to times.size(), zero-filled.
  void allocate(bool with_entropy);
};

// Mean and standard error of a set of curves on identical time grids.
// Curves are combined in the given order (deterministic reduction).
ObservableSeries average_curves(const std::vector<ObservableSeries>& curves);

}  // namespace xxz
