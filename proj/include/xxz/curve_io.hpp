#pragma once

// Plain-text curve files. Layout:
//   # key: value            (any number of metadata lines)
//   # t_us Sx Sx_err Sy Sy_err Sz Sz_err [S2 S2_err]
//   <rows, %.17g>
// The last comment line before the first row names the columns.

#include <iosfwd>
#include <map>
#include <string>

#include "xxz/observables.hpp"

namespace xxz {

using CurveMetadata = std::map<std::string, std::string>;

void write_curve(std::ostream& os, const ObservableSeries& curve, const CurveMetadata& meta = {});
ObservableSeries read_curve(std::istream& is, CurveMetadata* meta = nullptr);

void write_curve_file(const std::string& path, const ObservableSeries& curve, const CurveMetadata& meta = {});
ObservableSeries read_curve_file(const std::string& path, CurveMetadata* meta = nullptr);

}  // namespace xxz
