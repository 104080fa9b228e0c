#pragma once

// Cell-centred uniform grids on a box with homogeneous Neumann boundary.
//
// Derivatives are collocated central differences. Ghost cells mirror the
// field (even extension), so the normal derivative vanishes at the boundary;
// `div` mirrors fluxes oddly and is exactly the negative adjoint of `grad`
// under the cell-volume-weighted inner product.
//
// Cells are stored row-major: axis 0 varies slowest.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kwc::grid {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Grid {
 public:
  Grid(std::vector<int> dims, std::vector<double> spacing);
  /// Same spacing on every axis.
  static Grid uniform(std::vector<int> dims, double h);

  int dimN() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<double>& spacing() const { return h_; }
  std::size_t ncells() const { return ncells_; }
  double cell_volume() const { return vol_; }
  double domain_volume() const { return vol_ * static_cast<double>(ncells_); }
  double h_min() const;
  std::size_t stride(int axis) const { return strides_[axis]; }
  /// Per-axis cell index of a flat index.
  int coord(std::size_t cell, int axis) const {
    return static_cast<int>((cell / strides_[axis]) % static_cast<std::size_t>(dims_[axis]));
  }
  /// Cell-centre coordinate along `axis`, origin at the domain corner.
  double center(std::size_t cell, int axis) const { return (coord(cell, axis) + 0.5) * h_[axis]; }

  bool operator==(const Grid& o) const { return dims_ == o.dims_ && h_ == o.h_; }

 private:
  std::vector<int> dims_;
  std::vector<double> h_;
  std::vector<std::size_t> strides_;
  std::size_t ncells_ = 0;
  double vol_ = 0.0;
};

/// ncomp values per cell; ncomp = 1 is a scalar field, ncomp = M a vector field.
struct Field {
  Grid grid;
  int ncomp;
  std::vector<double> data;

  Field(Grid g, int ncomp, double fill = 0.0);
  std::span<double> at(std::size_t cell) { return {data.data() + cell * ncomp, static_cast<std::size_t>(ncomp)}; }
  std::span<const double> at(std::size_t cell) const {
    return {data.data() + cell * ncomp, static_cast<std::size_t>(ncomp)};
  }
};

/// Per-cell ncomp x N matrix of partial derivatives, entry (a, d) at
/// a * N + d.
struct GradField {
  Grid grid;
  int ncomp;
  std::vector<double> data;

  GradField(Grid g, int ncomp);
  std::size_t block() const { return static_cast<std::size_t>(ncomp) * grid.dimN(); }
  std::span<double> at(std::size_t cell) { return {data.data() + cell * block(), block()}; }
  std::span<const double> at(std::size_t cell) const { return {data.data() + cell * block(), block()}; }
};

/// Order field eta (ncomp 1) and orientation field u (ncomp M) on one grid.
struct FieldPair {
  Field eta;
  Field u;

  FieldPair(Field eta, Field u);
  const Grid& grid() const { return eta.grid; }
  int M() const { return u.ncomp; }
};

GradField grad(const Field& f);
Field div(const GradField& F);
Field laplacian(const Field& f);
/// Central difference along one axis.
Field partial(const Field& f, int axis);

double inner(const Field& a, const Field& b);
double inner(const GradField& a, const GradField& b);
double norm_L2(const Field& f);
double integrate(const Field& f);

/// L2 distance on the product space: sqrt(|eta_a - eta_b|^2 + |u_a - u_b|^2).
double distance(const FieldPair& a, const FieldPair& b);

struct InitialSpec {
  std::string kind = "constant";   // constant | bicrystal | random-cap | vortex
  std::uint64_t seed = 1;
  double eta_value = 1.0;          // constant kind
  // bicrystal: grains left/right of the mid-plane normal to axis 0
  double grain_a_angle = 0.0;
  std::vector<double> grain_a_axis;
  double grain_b_angle = 0.0;
  std::vector<double> grain_b_axis;
  double interface_width = 0.05;
  double eta_min = 0.5;
  // random-cap
  double cap_r = 0.5;
  double sigma = 0.3;
  int smoothing_sweeps = 4;
};

/// Orientation of one bicrystal grain. For M = 4 the angle/axis pair is a
/// rotation (hemisphere quaternion); otherwise the point reached from the
/// north pole along (0, axis) by geodesic distance `angle`.
std::vector<double> grain_orientation(int M, double angle, const std::vector<double>& axis);

FieldPair make_initial(const InitialSpec& spec, const Grid& grid, int M);

/// Header `dims=<d1>x<d2>[x<d3>] M=<M> h=<h1>,...` then little-endian
/// float64 values: eta block, then u block with M entries per cell.
void write_snapshot(const std::filesystem::path& path, const FieldPair& U);
FieldPair read_snapshot(const std::filesystem::path& path);

}  // namespace kwc::grid
