#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homlab/coeff.hpp"
#include "homlab/field.hpp"

namespace homlab {

/// Grid-file payload. Layout on disk (little-endian):
///   "HGLB" | u16 version | u8 d | u8 m | u32 N_k for k = 1..d |
///   u32 name length | UTF-8 name | f64 values
/// Values are row-major with x1 fastest and the component index innermost:
///   index = ((i_d * N_{d-1} + ...) * N_1 + i_1) * m + alpha.
struct GridData {
  std::string name;
  int d = 0;
  int m = 0;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

inline constexpr std::uint16_t kGridFileVersion = 1;

void write_grid_file(const std::string& path, const GridData& grid);
GridData read_grid_file(const std::string& path);

/// Node values of a field on its structured grid; inactive L-shape nodes
/// are written as NaN.
GridData grid_from_field(const FEField& field, const std::string& name);

/// Periodic coefficient from a sampled grid with (d*m)^2 components per
/// node (row-major Q), evaluated by periodic multilinear interpolation.
CoefficientField sampled_coefficient(const GridData& grid);

}  // namespace homlab
