#include "kwc/grid.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "kwc/rotrep.hpp"

namespace kwc::grid {

Grid::Grid(std::vector<int> dims, std::vector<double> spacing) : dims_(std::move(dims)), h_(std::move(spacing)) {
  if (dims_.empty() || dims_.size() > 3) throw GridError("grid must have 1, 2 or 3 axes");
  if (h_.size() != dims_.size()) throw GridError("one spacing per axis required");
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (dims_[a] < 2) throw GridError("each axis needs at least 2 cells");
    if (!(h_[a] > 0.0) || !std::isfinite(h_[a])) throw GridError("grid spacing must be positive");
  }
  strides_.assign(dims_.size(), 1);
  for (int a = static_cast<int>(dims_.size()) - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * dims_[a + 1];
  ncells_ = strides_[0] * dims_[0];
  vol_ = 1.0;
  for (double h : h_) vol_ *= h;
}

Grid Grid::uniform(std::vector<int> dims, double h) {
  std::vector<double> spacing(dims.size(), h);
  return Grid(std::move(dims), std::move(spacing));
}

double Grid::h_min() const { return *std::min_element(h_.begin(), h_.end()); }

Field::Field(Grid g, int n, double fill) : grid(std::move(g)), ncomp(n) {
  if (ncomp < 1) throw GridError("field needs at least one component");
  data.assign(grid.ncells() * ncomp, fill);
}

GradField::GradField(Grid g, int n) : grid(std::move(g)), ncomp(n) {
  data.assign(grid.ncells() * block(), 0.0);
}

FieldPair::FieldPair(Field e, Field v) : eta(std::move(e)), u(std::move(v)) {
  if (!(eta.grid == u.grid)) throw GridError("eta and u live on different grids");
  if (eta.ncomp != 1) throw GridError("order field must be scalar");
}

namespace {

// Visits every cell as (cell, index along `axis`) without per-cell division.
template <class Fn>
void for_each_along(const Grid& g, int axis, Fn&& fn) {
  const std::size_t s = g.stride(axis);
  const int n = g.dims()[axis];
  const std::size_t outer = g.ncells() / (s * n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (int i = 0; i < n; ++i) {
      const std::size_t base = (o * n + i) * s;
      for (std::size_t j = 0; j < s; ++j) fn(base + j, i);
    }
  }
}

}  // namespace

GradField grad(const Field& f) {
  const Grid& g = f.grid;
  const int N = g.dimN();
  const int nc = f.ncomp;
  GradField out(g, nc);
  const std::size_t b = out.block();
  for (int d = 0; d < N; ++d) {
    const std::size_t s = g.stride(d);
    const int last = g.dims()[d] - 1;
    const double inv = 0.5 / g.spacing()[d];
    for_each_along(g, d, [&](std::size_t c, int i) {
      const double* lo = f.data.data() + (i > 0 ? c - s : c) * nc;
      const double* hi = f.data.data() + (i < last ? c + s : c) * nc;
      double* dst = out.data.data() + c * b + d;
      for (int a = 0; a < nc; ++a) dst[a * N] = (hi[a] - lo[a]) * inv;
    });
  }
  return out;
}

Field div(const GradField& F) {
  const Grid& g = F.grid;
  const int N = g.dimN();
  const int nc = F.ncomp;
  const std::size_t b = F.block();
  Field out(g, nc);
  for (int d = 0; d < N; ++d) {
    const std::size_t s = g.stride(d);
    const int last = g.dims()[d] - 1;
    const double inv = 0.5 / g.spacing()[d];
    for_each_along(g, d, [&](std::size_t c, int i) {
      const double* self = F.data.data() + c * b + d;
      const double* lo = F.data.data() + (c - s) * b + d;
      const double* hi = F.data.data() + (c + s) * b + d;
      double* dst = out.data.data() + c * nc;
      for (int a = 0; a < nc; ++a) {
        // Odd mirror of the flux: zero normal flux through the boundary.
        const double flo = i > 0 ? lo[a * N] : -self[a * N];
        const double fhi = i < last ? hi[a * N] : -self[a * N];
        dst[a] += (fhi - flo) * inv;
      }
    });
  }
  return out;
}

Field laplacian(const Field& f) { return div(grad(f)); }

Field partial(const Field& f, int axis) {
  const Grid& g = f.grid;
  if (axis < 0 || axis >= g.dimN()) throw GridError("axis out of range");
  const int nc = f.ncomp;
  Field out(g, nc);
  const std::size_t s = g.stride(axis);
  const int last = g.dims()[axis] - 1;
  const double inv = 0.5 / g.spacing()[axis];
  for_each_along(g, axis, [&](std::size_t c, int i) {
    const std::size_t lo = i > 0 ? c - s : c;
    const std::size_t hi = i < last ? c + s : c;
    for (int a = 0; a < nc; ++a) out.data[c * nc + a] = (f.data[hi * nc + a] - f.data[lo * nc + a]) * inv;
  });
  return out;
}

namespace {
template <class A, class B>
void check_compatible(const A& a, const B& b) {
  if (!(a.grid == b.grid) || a.ncomp != b.ncomp) throw GridError("fields live on different grids or shapes");
}
}  // namespace

double inner(const Field& a, const Field& b) {
  check_compatible(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s * a.grid.cell_volume();
}

double inner(const GradField& a, const GradField& b) {
  check_compatible(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s * a.grid.cell_volume();
}

double norm_L2(const Field& f) { return std::sqrt(inner(f, f)); }

double integrate(const Field& f) {
  double s = 0.0;
  for (double x : f.data) s += x;
  return s * f.grid.cell_volume();
}

double distance(const FieldPair& a, const FieldPair& b) {
  check_compatible(a.eta, b.eta);
  check_compatible(a.u, b.u);
  double s = 0.0;
  for (std::size_t i = 0; i < a.eta.data.size(); ++i) s += std::pow(a.eta.data[i] - b.eta.data[i], 2);
  for (std::size_t i = 0; i < a.u.data.size(); ++i) s += std::pow(a.u.data[i] - b.u.data[i], 2);
  return std::sqrt(s * a.grid().cell_volume());
}

// ---------------------------------------------------------------------------
// Initial data

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::span<double> v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

// Great-circle interpolation from a (t = 0) to b (t = 1).
std::vector<double> slerp(const std::vector<double>& a, const std::vector<double>& b, double t) {
  const double c = std::clamp(dot(a, b), -1.0, 1.0);
  const double omega = std::acos(c);
  std::vector<double> out(a.size());
  if (omega < 1e-12) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1 - t) * a[i] + t * b[i];
  } else {
    const double wa = std::sin((1 - t) * omega) / std::sin(omega);
    const double wb = std::sin(t * omega) / std::sin(omega);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  }
  normalize(out);
  return out;
}

FieldPair constant_pair(const Grid& grid, int M, double eta) {
  Field u(grid, M);
  for (std::size_t c = 0; c < grid.ncells(); ++c) u.at(c)[0] = 1.0;
  return FieldPair(Field(grid, 1, eta), std::move(u));
}

FieldPair make_bicrystal(const InitialSpec& spec, const Grid& grid, int M) {
  if (!(spec.interface_width > 0.0)) throw GridError("bicrystal interface width must be positive");
  if (!(spec.eta_min >= 0.0 && spec.eta_min <= 1.0)) throw GridError("bicrystal eta_min must lie in [0, 1]");
  const auto a = grain_orientation(M, spec.grain_a_angle, spec.grain_a_axis);
  const auto b = grain_orientation(M, spec.grain_b_angle, spec.grain_b_axis);
  const double mid = 0.5 * grid.dims()[0] * grid.spacing()[0];
  // Identical grains have no boundary, hence no order dip.
  const double depth = dot(a, b) < 1.0 - 1e-15 ? 1.0 - spec.eta_min : 0.0;
  FieldPair U = constant_pair(grid, M, 1.0);
  for (std::size_t c = 0; c < grid.ncells(); ++c) {
    const double z = (grid.center(c, 0) - mid) / spec.interface_width;
    const double th = std::tanh(z);
    const auto p = slerp(a, b, 0.5 * (1.0 + th));
    std::copy(p.begin(), p.end(), U.u.at(c).begin());
    U.eta.data[c] = 1.0 - depth * (1.0 - th * th);
  }
  return U;
}

FieldPair make_random_cap(const InitialSpec& spec, const Grid& grid, int M) {
  if (!(spec.cap_r > 0.0 && spec.cap_r < 1.0)) throw GridError("cap parameter r must lie in (0, 1)");
  const double radius = std::acos(spec.cap_r);
  if (!(spec.sigma > 0.0) || spec.sigma >= radius) {
    throw GridError("random-cap sigma must lie in (0, arccos r) = (0, " + std::to_string(radius) + ")");
  }
  if (spec.smoothing_sweeps < 0) throw GridError("smoothing sweeps must be nonnegative");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, spec.sigma);
  const auto pole = rotrep::SpherePoint::north_pole(M);
  FieldPair U = constant_pair(grid, M, 1.0);
  std::vector<double> v(static_cast<std::size_t>(M));
  for (std::size_t c = 0; c < grid.ncells(); ++c) {
    v[0] = 0.0;
    for (int k = 1; k < M; ++k) v[k] = normal(rng);
    const double len = std::sqrt(dot(v, v));
    if (len > radius) {
      for (double& x : v) x *= radius / len;
    }
    const auto p = rotrep::exp_map(pole, v);
    std::copy(p.coords().begin(), p.coords().end(), U.u.at(c).begin());
  }
  // Neighbour averaging keeps the cap: a mean of cap points has first
  // coordinate >= r and norm <= 1.
  for (int sweep = 0; sweep < spec.smoothing_sweeps; ++sweep) {
    Field next = U.u;
    for (std::size_t c = 0; c < grid.ncells(); ++c) {
      auto dst = next.at(c);
      for (int d = 0; d < grid.dimN(); ++d) {
        const int i = grid.coord(c, d);
        const std::size_t s = grid.stride(d);
        if (i > 0) {
          for (int k = 0; k < M; ++k) dst[k] += U.u.data[(c - s) * M + k];
        }
        if (i < grid.dims()[d] - 1) {
          for (int k = 0; k < M; ++k) dst[k] += U.u.data[(c + s) * M + k];
        }
      }
      normalize(dst);
    }
    U.u = std::move(next);
  }
  for (std::size_t c = 0; c < grid.ncells(); ++c) {
    auto p = U.u.at(c);
    if (p[0] < spec.cap_r) {
      // Rounding only: push back onto the cap boundary.
      p[0] = spec.cap_r;
      double tail = 0.0;
      for (int k = 1; k < M; ++k) tail += p[k] * p[k];
      const double scale = tail > 0 ? std::sqrt((1 - spec.cap_r * spec.cap_r) / tail) : 0.0;
      for (int k = 1; k < M; ++k) p[k] *= scale;
    }
  }
  return U;
}

// Planar vortex in the (u1, u2) components around the domain centre.
FieldPair make_vortex(const Grid& grid, int M) {
  if (grid.dimN() < 2) throw GridError("vortex initial data needs at least 2 space dimensions");
  FieldPair U = constant_pair(grid, M, 1.0);
  const double cx = 0.5 * grid.dims()[0] * grid.spacing()[0];
  const double cy = 0.5 * grid.dims()[1] * grid.spacing()[1];
  for (std::size_t c = 0; c < grid.ncells(); ++c) {
    const double x = grid.center(c, 0) - cx;
    const double y = grid.center(c, 1) - cy;
    const double r = std::hypot(x, y);
    auto p = U.u.at(c);
    p[0] = x / r;
    p[1] = y / r;
  }
  return U;
}

}  // namespace

std::vector<double> grain_orientation(int M, double angle, const std::vector<double>& axis) {
  std::vector<double> ax = axis;
  if (ax.empty()) {
    ax.assign(static_cast<std::size_t>(M - 1), 0.0);
    ax.back() = 1.0;
  }
  if (static_cast<int>(ax.size()) != M - 1) throw GridError("grain axis needs M - 1 components");
  const double n = std::sqrt(dot(ax, ax));
  if (!(n > 0.0)) throw GridError("grain axis must be nonzero");
  for (double& x : ax) x /= n;
  if (M == 4) {
    const auto q = rotrep::axisangle_to_quat({angle, {ax[0], ax[1], ax[2]}});
    return {q[0], q[1], q[2], q[3]};
  }
  std::vector<double> v(static_cast<std::size_t>(M), 0.0);
  for (int k = 1; k < M; ++k) v[k] = angle * ax[k - 1];
  const auto p = rotrep::exp_map(rotrep::SpherePoint::north_pole(M), v);
  return {p.coords().begin(), p.coords().end()};
}

FieldPair make_initial(const InitialSpec& spec, const Grid& grid, int M) {
  if (M < 2) throw GridError("target dimension M must exceed 1");
  if (spec.kind == "constant") {
    if (!(spec.eta_value >= 0.0 && spec.eta_value <= 1.0)) throw GridError("constant eta must lie in [0, 1]");
    return constant_pair(grid, M, spec.eta_value);
  }
  if (spec.kind == "bicrystal") return make_bicrystal(spec, grid, M);
  if (spec.kind == "random-cap") return make_random_cap(spec, grid, M);
  if (spec.kind == "vortex") return make_vortex(grid, M);
  throw GridError("unknown initial-data kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void put_le(std::ostream& os, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_le(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw GridError("snapshot truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const FieldPair& U) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw GridError("cannot open snapshot for writing: " + path.string());
  const Grid& g = U.grid();
  os << "dims=";
  for (int d = 0; d < g.dimN(); ++d) os << (d ? "x" : "") << g.dims()[d];
  os << " M=" << U.M() << " h=";
  for (int d = 0; d < g.dimN(); ++d) os << (d ? "," : "") << format_double(g.spacing()[d]);
  os << '\n';
  for (double x : U.eta.data) put_le(os, x);
  for (double x : U.u.data) put_le(os, x);
  if (!os) throw GridError("snapshot write failed: " + path.string());
}

FieldPair read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw GridError("cannot open snapshot: " + path.string());
  std::string header;
  std::getline(is, header);
  std::istringstream hs(header);
  std::string dims_tok, m_tok, h_tok;
  hs >> dims_tok >> m_tok >> h_tok;
  if (dims_tok.rfind("dims=", 0) != 0 || m_tok.rfind("M=", 0) != 0 || h_tok.rfind("h=", 0) != 0) {
    throw GridError("malformed snapshot header: " + header);
  }
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) parts.push_back(item);
    return parts;
  };
  std::vector<int> dims;
  for (const auto& p : split(dims_tok.substr(5), 'x')) dims.push_back(std::stoi(p));
  std::vector<double> h;
  for (const auto& p : split(h_tok.substr(2), ',')) {
    double x = 0.0;
    auto res = std::from_chars(p.data(), p.data() + p.size(), x);
    if (res.ec != std::errc()) throw GridError("malformed spacing in snapshot header");
    h.push_back(x);
  }
  const int M = std::stoi(m_tok.substr(2));
  Grid g(dims, h);
  Field eta(g, 1);
  Field u(g, M);
  for (double& x : eta.data) x = get_le(is);
  for (double& x : u.data) x = get_le(is);
  return FieldPair(std::move(eta), std::move(u));
}

}  // namespace kwc::grid
