#include "homlab/gridfile.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

namespace homlab {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::ofstream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(bytes[k], bytes[sizeof(T) - 1 - k]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ValidationError("grid-file " + path + " is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(bytes[k], bytes[sizeof(T) - 1 - k]);
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

std::size_t expected_values(const GridData& g) {
  std::size_t n = static_cast<std::size_t>(g.m);
  for (auto k : g.dims) n *= k;
  return n;
}

}  // namespace

void write_grid_file(const std::string& path, const GridData& grid) {
  if (grid.d < 1 || grid.d > 255 || grid.m < 1 || grid.m > 255 ||
      static_cast<int>(grid.dims.size()) != grid.d) {
    throw ValidationError("grid-file header out of range");
  }
  if (grid.values.size() != expected_values(grid)) {
    throw ValidationError("grid-file body length does not match its header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out.write("HGLB", 4);
  put<std::uint16_t>(out, kGridFileVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(grid.d));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(grid.m));
  for (auto n : grid.dims) put<std::uint32_t>(out, n);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.name.size()));
  out.write(grid.name.data(), static_cast<std::streamsize>(grid.name.size()));
  for (double v : grid.values) put<double>(out, v);
  if (!out) throw ValidationError("failed writing " + path);
}

GridData read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open grid-file " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HGLB", 4) != 0) {
    throw ValidationError(path + " is not a grid-file (bad magic)");
  }
  const auto version = get<std::uint16_t>(in, path);
  if (version != kGridFileVersion) {
    throw ValidationError("unsupported grid-file version " + std::to_string(version));
  }
  GridData g;
  g.d = get<std::uint8_t>(in, path);
  g.m = get<std::uint8_t>(in, path);
  if (g.d < 1 || g.m < 1) throw ValidationError("grid-file with zero dimension or components");
  for (int k = 0; k < g.d; ++k) g.dims.push_back(get<std::uint32_t>(in, path));
  const auto len = get<std::uint32_t>(in, path);
  if (len > (1u << 20)) throw ValidationError("grid-file name too long");
  g.name.resize(len);
  if (len > 0 && !in.read(g.name.data(), len)) throw ValidationError(path + " is truncated");
  const std::size_t n = expected_values(g);
  g.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) g.values[k] = get<double>(in, path);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path + " has trailing bytes");
  }
  return g;
}

GridData grid_from_field(const FEField& field, const std::string& name) {
  const Mesh& mesh = field.mesh();
  GridData g;
  g.name = name;
  g.d = mesh.dim();
  g.m = field.components();
  const int e = mesh.grid_extent();
  g.dims.assign(g.d, static_cast<std::uint32_t>(e));
  const int ey = g.d == 1 ? 1 : e;
  g.values.assign(static_cast<std::size_t>(e) * ey * g.m, std::numeric_limits<double>::quiet_NaN());
  for (int j = 0; j < ey; ++j) {
    for (int i = 0; i < e; ++i) {
      const Index node = mesh.node_at(i, j);
      if (node < 0) continue;
      for (int a = 0; a < g.m; ++a) {
        g.values[(static_cast<std::size_t>(j) * e + i) * g.m + a] = field(node, a);
      }
    }
  }
  return g;
}

CoefficientField sampled_coefficient(const GridData& grid) {
  const int d = grid.d;
  if (d < 1 || d > 2) throw ValidationError("sampled coefficient needs d in {1, 2}");
  const int dm = static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid.m))));
  if (dm * dm != grid.m || dm % d != 0) {
    throw ValidationError("sampled coefficient needs (d*m)^2 components per node");
  }
  const int m = dm / d;
  for (auto n : grid.dims) {
    if (n < 1) throw ValidationError("sampled coefficient with an empty axis");
  }
  for (double v : grid.values) {
    if (!std::isfinite(v)) throw ValidationError("sampled coefficient contains non-finite values");
  }
  auto data = std::make_shared<const GridData>(grid);
  bool symmetric = true;
  const std::size_t nodes = grid.values.size() / grid.m;
  for (std::size_t s = 0; s < nodes && symmetric; ++s) {
    for (int r = 0; r < dm; ++r)
      for (int c = 0; c < dm; ++c)
        symmetric = symmetric && grid.values[s * grid.m + r * dm + c] ==
                                     grid.values[s * grid.m + c * dm + r];
  }
  auto eval = [data, d, m, dm](const Point& y) {
    const int n0 = static_cast<int>(data->dims[0]);
    const int n1 = d == 2 ? static_cast<int>(data->dims[1]) : 1;
    const double s0 = y[0] * n0;
    const int i0 = static_cast<int>(std::floor(s0));
    const double t0 = s0 - i0;
    double s1 = 0.0;
    int j0 = 0;
    double t1 = 0.0;
    if (d == 2) {
      s1 = y[1] * n1;
      j0 = static_cast<int>(std::floor(s1));
      t1 = s1 - j0;
    }
    CoeffTensor t(d, m);
    for (int b = 0; b < (d == 2 ? 2 : 1); ++b)
      for (int a = 0; a < 2; ++a) {
        const int ii = (i0 + a) % n0;
        const int jj = (j0 + b) % n1;
        const double w = (a ? t0 : 1.0 - t0) * (d == 2 ? (b ? t1 : 1.0 - t1) : 1.0);
        if (w == 0.0) continue;
        const std::size_t base = (static_cast<std::size_t>(jj) * n0 + ii) * data->m;
        for (int r = 0; r < dm; ++r)
          for (int c = 0; c < dm; ++c) t.flat(r, c) += w * data->values[base + r * dm + c];
      }
    return t;
  };
  const EllipticityClass cls = EllipticityClass::legendre_hadamard;
  CoefficientField field(grid.name.empty() ? "grid-file" : grid.name, d, m, eval,
                         Smoothness::smooth_periodic, symmetric, cls);
  const EllipticityReport rep = check_ellipticity(field, 8 * static_cast<int>(grid.dims[0]) > 256
                                                             ? 256
                                                             : std::max(8, 8 * static_cast<int>(grid.dims[0])));
  if (!rep.legendre_hadamard_pass) {
    throw ValidationError("sampled coefficient violates the Legendre-Hadamard condition");
  }
  if (rep.legendre_pass) {
    return CoefficientField(field.name(), d, m, eval, Smoothness::smooth_periodic, symmetric,
                            EllipticityClass::legendre);
  }
  return field;
}

}  // namespace homlab
