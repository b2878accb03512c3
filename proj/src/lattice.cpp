#include "sublab/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

#include "sublab/errors.hpp"

static_assert(std::endian::native == std::endian::little, "binary layouts assume a little-endian host");

namespace sublab {

Box::Box(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box corners have different dimensions");
  if (lower.empty()) throw DomainError("box must have at least one axis");
  for (std::size_t k = 0; k < lower.size(); ++k)
    if (!(lower[k] < upper[k])) throw DomainError("box needs lower < upper on every axis");
}

Box Box::centered(std::span<const double> center, std::span<const double> half_widths) {
  if (center.size() != half_widths.size()) throw DimensionMismatch("box center and half widths differ in size");
  std::vector<double> lo(center.size()), hi(center.size());
  for (std::size_t k = 0; k < center.size(); ++k) {
    lo[k] = center[k] - half_widths[k];
    hi[k] = center[k] + half_widths[k];
  }
  return Box(std::move(lo), std::move(hi));
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < dim(); ++k)
    if (x[k] < lower[k] || x[k] > upper[k]) return false;
  return true;
}

double Box::min_half_width() const {
  double m = half_width(0);
  for (std::size_t k = 1; k < dim(); ++k) m = std::min(m, half_width(k));
  return m;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < dim(); ++k) v *= upper[k] - lower[k];
  return v;
}

Lattice::Lattice(Box box, std::vector<std::size_t> dims) : box_(std::move(box)), dims_(std::move(dims)) {
  if (dims_.size() != box_.dim()) throw DimensionMismatch("lattice dims and box dimension differ");
  const std::size_t n = dims_.size();
  spacing_.resize(n);
  strides_.resize(n);
  size_ = 1;
  for (std::size_t k = n; k-- > 0;) {
    if (dims_[k] < 2) throw DomainError("lattice needs at least 2 nodes per axis");
    spacing_[k] = (box_.upper[k] - box_.lower[k]) / static_cast<double>(dims_[k] - 1);
    strides_[k] = size_;
    size_ *= dims_[k];
  }
}

Lattice Lattice::around(std::span<const double> center, std::span<const std::size_t> half_counts,
                        std::span<const double> spacing) {
  const std::size_t n = center.size();
  if (half_counts.size() != n || spacing.size() != n) throw DimensionMismatch("Lattice::around: size mismatch");
  std::vector<double> lo(n), hi(n);
  std::vector<std::size_t> dims(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (half_counts[k] < 1 || !(spacing[k] > 0.0)) throw DomainError("Lattice::around: empty axis");
    double w = static_cast<double>(half_counts[k]) * spacing[k];
    lo[k] = center[k] - w;
    hi[k] = center[k] + w;
    dims[k] = 2 * half_counts[k] + 1;
  }
  Lattice lat(Box(std::move(lo), std::move(hi)), std::move(dims));
  // Keep the requested spacing bit-exact rather than the recomputed quotient.
  for (std::size_t k = 0; k < n; ++k) lat.spacing_[k] = spacing[k];
  return lat;
}

double Lattice::coordinate(std::size_t axis, std::size_t i) const {
  if (i + 1 == dims_[axis]) return box_.upper[axis];
  return box_.lower[axis] + static_cast<double>(i) * spacing_[axis];
}

void Lattice::unravel(std::size_t index, std::size_t* multi) const {
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    multi[k] = index / strides_[k];
    index %= strides_[k];
  }
}

std::size_t Lattice::ravel(const std::size_t* multi) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) idx += multi[k] * strides_[k];
  return idx;
}

void Lattice::point(std::size_t index, double* x) const {
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    std::size_t i = index / strides_[k];
    index %= strides_[k];
    x[k] = coordinate(k, i);
  }
}

std::vector<double> Lattice::point(std::size_t index) const {
  std::vector<double> x(dim());
  point(index, x.data());
  return x;
}

bool Lattice::is_boundary(std::size_t index) const {
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    std::size_t i = index / strides_[k];
    index %= strides_[k];
    if (i == 0 || i + 1 == dims_[k]) return true;
  }
  return false;
}

std::size_t Lattice::nearest(std::span<const double> x) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    double s = std::round((x[k] - box_.lower[k]) / spacing_[k]);
    s = std::clamp(s, 0.0, static_cast<double>(dims_[k] - 1));
    idx += static_cast<std::size_t>(s) * strides_[k];
  }
  return idx;
}

double Lattice::quadrature_weight(std::size_t index) const {
  double w = 1.0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    std::size_t i = index / strides_[k];
    index %= strides_[k];
    w *= (i == 0 || i + 1 == dims_[k]) ? 0.5 * spacing_[k] : spacing_[k];
  }
  return w;
}

std::vector<double> Lattice::quadrature_weights() const {
  std::vector<double> w(size_);
  for (std::size_t i = 0; i < size_; ++i) w[i] = quadrature_weight(i);
  return w;
}

GridFunction::GridFunction(Lattice lattice, double fill) : lattice_(std::move(lattice)) {
  values_.assign(lattice_.size(), fill);
}

GridFunction::GridFunction(Lattice lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_.size()) throw DimensionMismatch("value count does not match the lattice");
}

GridFunction GridFunction::sample(const Lattice& lattice, const std::function<double(std::span<const double>)>& f) {
  GridFunction g(lattice);
  std::vector<double> x(lattice.dim());
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    lattice.point(i, x.data());
    g.values_[i] = f(x);
  }
  return g;
}

double GridFunction::interpolate(std::span<const double> x) const {
  const std::size_t n = lattice_.dim();
  if (x.size() < n) throw DimensionMismatch("interpolation point has too few coordinates");
  std::size_t base = 0;
  double frac[16];
  std::size_t step[16];
  if (n > 16) throw DomainError("interpolation supports at most 16 axes");
  const Box& box = lattice_.box();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(x[k] >= box.lower[k] && x[k] <= box.upper[k])) throw DomainError("interpolation point outside the box");
    double s = (x[k] - box.lower[k]) / lattice_.spacing(k);
    double cell = std::floor(s);
    double last = static_cast<double>(lattice_.dims()[k] - 2);
    if (cell > last) cell = last;
    if (cell < 0.0) cell = 0.0;
    frac[k] = s - cell;
    base += static_cast<std::size_t>(cell) * lattice_.stride(k);
    step[k] = lattice_.stride(k);
  }
  double sum = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (std::size_t k = 0; k < n; ++k) {
      if (corner & (std::size_t{1} << k)) {
        w *= frac[k];
        idx += step[k];
      } else {
        w *= 1.0 - frac[k];
      }
    }
    if (w != 0.0) sum += w * values_[idx];
  }
  return sum;
}

double GridFunction::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += lattice_.quadrature_weight(i) * values_[i];
  return s;
}

double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }

bool GridFunction::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

SpaceTimeGridFunction::SpaceTimeGridFunction(std::vector<GridFunction> slices, double t0, double tau)
    : slices_(std::move(slices)), t0_(t0), tau_(tau) {
  if (slices_.size() < 2) throw DomainError("space-time function needs at least 2 slices");
  if (!(tau_ > 0.0)) throw DomainError("time step must be positive");
  for (const auto& s : slices_)
    if (!(s.lattice() == slices_.front().lattice())) throw DimensionMismatch("slices live on different lattices");
}

namespace {

void header(std::ostream& out, std::size_t n, std::span<const std::string> names, bool with_time) {
  std::vector<std::string> fallback;
  if (names.size() < n) {
    static const char* xyz[] = {"x", "y", "z"};
    for (std::size_t k = 0; k < n; ++k) fallback.push_back(n <= 3 ? xyz[k] : "x" + std::to_string(k + 1));
    names = fallback;
  }
  if (with_time) out << "t,";
  for (std::size_t k = 0; k < n; ++k) out << names[k] << ',';
  out << "value\n";
}

void number(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void rows(std::ostream& out, const GridFunction& u, const double* t) {
  const Lattice& lat = u.lattice();
  std::vector<double> x(lat.dim());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat.point(i, x.data());
    if (t) {
      number(out, *t);
      out << ',';
    }
    for (double c : x) {
      number(out, c);
      out << ',';
    }
    number(out, u[i]);
    out << '\n';
  }
}

}  // namespace

void write_csv(std::ostream& out, const GridFunction& u, std::span<const std::string> names) {
  header(out, u.lattice().dim(), names, false);
  rows(out, u, nullptr);
}

void write_csv(std::ostream& out, const SpaceTimeGridFunction& u, std::span<const std::string> names) {
  header(out, u.lattice().dim(), names, true);
  for (std::size_t k = 0; k < u.slice_count(); ++k) {
    double t = u.time(k);
    rows(out, u.slice(k), &t);
  }
}

namespace binary {

void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ConfigError("truncated binary file");
  return v;
}

double read_f64(std::istream& in) { return read_raw<double>(in); }
std::uint32_t read_u32(std::istream& in) { return read_raw<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_raw<std::uint64_t>(in); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0) throw ConfigError(std::string("binary file lacks magic ") + magic);
  if (read_u32(in) != 1) throw ConfigError("unsupported binary format version");
}

void write_lattice(std::ostream& out, const Lattice& lattice) {
  write_u32(out, static_cast<std::uint32_t>(lattice.dim()));
  for (std::size_t d : lattice.dims()) write_u64(out, d);
  for (double v : lattice.box().lower) write_f64(out, v);
  for (double v : lattice.box().upper) write_f64(out, v);
}

Lattice read_lattice(std::istream& in) {
  std::uint32_t n = read_u32(in);
  if (n == 0 || n > 16) throw ConfigError("binary file has an implausible dimension");
  std::vector<std::size_t> dims(n);
  std::vector<double> lo(n), hi(n);
  for (auto& d : dims) d = read_u64(in);
  for (auto& v : lo) v = read_f64(in);
  for (auto& v : hi) v = read_f64(in);
  return Lattice(Box(lo, hi), dims);
}

}  // namespace binary

namespace {

void write_values(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_values(std::istream& in, std::size_t count) {
  std::vector<double> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ConfigError("truncated binary file");
  return v;
}

}  // namespace

void write_binary(std::ostream& out, const GridFunction& u) {
  out.write("SLGF", 4);
  binary::write_u32(out, 1);
  binary::write_lattice(out, u.lattice());
  write_values(out, u.values());
}

GridFunction read_grid_function(std::istream& in) {
  binary::expect_magic(in, "SLGF");
  Lattice lat = binary::read_lattice(in);
  auto v = read_values(in, lat.size());
  return GridFunction(std::move(lat), std::move(v));
}

void write_binary(std::ostream& out, const SpaceTimeGridFunction& u) {
  out.write("SLST", 4);
  binary::write_u32(out, 1);
  binary::write_lattice(out, u.lattice());
  binary::write_u64(out, u.slice_count());
  binary::write_f64(out, u.t0());
  binary::write_f64(out, u.tau());
  for (const auto& s : u.slices()) write_values(out, s.values());
}

SpaceTimeGridFunction read_space_time(std::istream& in) {
  binary::expect_magic(in, "SLST");
  Lattice lat = binary::read_lattice(in);
  std::uint64_t count = binary::read_u64(in);
  double t0 = binary::read_f64(in);
  double tau = binary::read_f64(in);
  std::vector<GridFunction> slices;
  for (std::uint64_t k = 0; k < count; ++k) slices.emplace_back(lat, read_values(in, lat.size()));
  return SpaceTimeGridFunction(std::move(slices), t0, tau);
}

}  // namespace sublab
