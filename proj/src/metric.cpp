#include "sublab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <queue>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "sublab/errors.hpp"

namespace sublab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- exponential map ------------------------------------------------------

class FrozenField {
 public:
  FrozenField(const EpsilonFamily& family, std::vector<double> coef)
      : eval_(family.extended_evaluator()), n_(family.dim()), coef_(std::move(coef)),
        buf_(family.dim() * family.extended_size()) {}

  bool is_zero() const {
    return std::all_of(coef_.begin(), coef_.end(), [](double c) { return c == 0.0; });
  }

  void operator()(const double* y, double* dy) {
    eval_.evaluate(std::span<const double>(y, n_), buf_.data());
    std::fill(dy, dy + n_, 0.0);
    for (std::size_t j = 0; j < coef_.size(); ++j) {
      if (coef_[j] == 0.0) continue;
      for (std::size_t k = 0; k < n_; ++k) dy[k] += coef_[j] * buf_[j * n_ + k];
    }
  }

  std::vector<double> integrate(std::span<const double> x, int steps) {
    std::vector<double> y(x.begin(), x.end()), k1(n_), k2(n_), k3(n_), k4(n_), tmp(n_);
    const double dt = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
      (*this)(y.data(), k1.data());
      for (std::size_t k = 0; k < n_; ++k) tmp[k] = y[k] + 0.5 * dt * k1[k];
      (*this)(tmp.data(), k2.data());
      for (std::size_t k = 0; k < n_; ++k) tmp[k] = y[k] + 0.5 * dt * k2[k];
      (*this)(tmp.data(), k3.data());
      for (std::size_t k = 0; k < n_; ++k) tmp[k] = y[k] + dt * k3[k];
      (*this)(tmp.data(), k4.data());
      for (std::size_t k = 0; k < n_; ++k) y[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    for (double c : y)
      if (!std::isfinite(c)) throw NonFiniteState("exp_map: flow left the finite range");
    return y;
  }

 private:
  const FieldEvaluator& eval_;
  std::size_t n_;
  std::vector<double> coef_;
  std::vector<double> buf_;
};

std::vector<double> flow_coefficients(const EpsilonFamily& family, const IndexTuple& index,
                                      std::span<const double> v, std::span<const double> u) {
  if (u.size() != family.dim()) throw DimensionMismatch("exp_map: u must have n entries");
  if (index.indices.size() != family.dim()) throw DimensionMismatch("exp_map: index tuple must have n entries");
  std::vector<double> coef(family.extended_size(), 0.0);
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (!std::isfinite(u[j])) throw NonFiniteState("exp_map: non-finite u");
    coef[static_cast<std::size_t>(index.indices[j])] = u[j];
  }
  if (!v.empty()) {
    auto rest = complement(family, index);
    if (v.size() != rest.size()) throw DimensionMismatch("exp_map: v must have one entry per complementary field");
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::isfinite(v[k])) throw NonFiniteState("exp_map: non-finite v");
      coef[static_cast<std::size_t>(rest[k])] = v[k];
    }
  }
  return coef;
}

constexpr double kFlowTolerance = 1e-10;

// Doubles the RK4 step count until the Richardson estimate is below tolerance.
int choose_steps(FrozenField& field, std::span<const double> x, std::vector<double>* result) {
  int steps = 4;
  std::vector<double> coarse = field.integrate(x, steps);
  while (steps < (1 << 22)) {
    std::vector<double> fine = field.integrate(x, 2 * steps);
    double err = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) err = std::max(err, std::abs(fine[k] - coarse[k]) / 15.0);
    if (err < kFlowTolerance) {
      if (result) *result = std::move(fine);
      return 2 * steps;
    }
    coarse = std::move(fine);
    steps *= 2;
  }
  throw ConvergenceFailure("exp_map: step doubling did not reach the tolerance", steps);
}

Eigen::MatrixXd jacobian_matrix(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index,
                                std::span<const double> v, std::span<const double> u) {
  const std::size_t n = family.dim();
  FrozenField base(family, flow_coefficients(family, index, v, u));
  int steps = base.is_zero() ? 8 : choose_steps(base, x, nullptr);
  // Perturbed flows reuse the base step count so the difference quotient
  // does not mix discretizations.
  Eigen::MatrixXd jac(n, n);
  std::vector<double> up(u.begin(), u.end());
  const double root = std::cbrt(std::numeric_limits<double>::epsilon());
  for (std::size_t j = 0; j < n; ++j) {
    double h = root * std::max(std::abs(u[j]), 1.0);
    up[j] = u[j] + h;
    FrozenField fp(family, flow_coefficients(family, index, v, up));
    auto plus = fp.integrate(x, steps);
    up[j] = u[j] - h;
    FrozenField fm(family, flow_coefficients(family, index, v, up));
    auto minus = fm.integrate(x, steps);
    up[j] = u[j];
    for (std::size_t k = 0; k < n; ++k) jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
        (plus[k] - minus[k]) / (2.0 * h);
  }
  return jac;
}

}  // namespace

std::vector<double> exp_map(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index,
                            std::span<const double> v, std::span<const double> u) {
  if (x.size() != family.dim()) throw DimensionMismatch("exp_map: x must have n entries");
  FrozenField field(family, flow_coefficients(family, index, v, u));
  if (field.is_zero()) return {x.begin(), x.end()};
  std::vector<double> out;
  choose_steps(field, x, &out);
  return out;
}

double exp_jacobian(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index,
                    std::span<const double> v, std::span<const double> u) {
  return jacobian_matrix(family, x, index, v, u).fullPivLu().determinant();
}

JacobianReport jacobian_bound_check(const EpsilonFamily& family, std::span<const double> x, double r, double c1,
                                    double c2, std::size_t samples, std::uint64_t seed) {
  if (!(c1 > 0 && c1 < 1 && c2 > 0 && c2 < 1)) throw DomainError("jacobian_bound_check: C1, C2 must lie in (0, 1)");
  if (samples == 0) throw DomainError("jacobian_bound_check: need at least one sample");
  JacobianReport rep;
  rep.index = best_index(family, x, r);
  rep.lambda = lambda_det(family, x, rep.index);
  const auto rest = complement(family, rep.index);
  const auto& deg = family.degrees_eps();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> u(family.dim()), v(rest.size());
  rep.min_ratio = kInf;
  rep.max_ratio = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < u.size(); ++j)
      u[j] = c1 * std::pow(r, deg[static_cast<std::size_t>(rep.index.indices[j])]) * unit(rng);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = c2 * std::pow(r, deg[static_cast<std::size_t>(rest[k])]) * unit(rng);
    double ratio = std::abs(exp_jacobian(family, x, rep.index, v, u)) / std::abs(rep.lambda);
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  rep.samples = samples;
  rep.pass = rep.min_ratio >= 0.25 && rep.max_ratio <= 4.0;
  return rep;
}

// --- move costs -------------------------------------------------------------

double loop_constant(int degree) {
  if (degree < 2) throw DomainError("loop_constant: degree must be >= 2");
  // Degree 2: the isoperimetric loop, length 2 sqrt(pi A) for area A.
  // Higher degrees: a loop of two degree-(d-1) loops joined by generator legs.
  double k = 2.0 * std::sqrt(std::numbers::pi);
  for (int d = 3; d <= degree; ++d) {
    double dd = d;
    k = 2.0 * std::pow(k, 1.0 - 1.0 / dd) * std::pow(dd - 1.0, 1.0 / dd) * dd / (dd - 1.0);
  }
  return k;
}

namespace {

constexpr int kMaxDim = 8;
constexpr int kMaxCols = 24;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxCols, kMaxCols>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxCols, 1>;

struct LineProblem {
  const Vec* a0;  // c-residual at z = 0
  const Vec* b;   // c-residual slope
  const Vec* w0;
  const Vec* dir;
  const double* kappa;
  const int* degrees;
};

double power_root(double w, int d) {
  w = std::abs(w);
  return d == 2 ? std::sqrt(w) : std::pow(w, 1.0 / d);
}

double line_value(const LineProblem& lp, double z) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lp.a0->size(); ++i) {
    double c = (*lp.a0)(i) - (*lp.b)(i) * z;
    s += c * c;
  }
  double f = std::sqrt(s);
  for (Eigen::Index k = 0; k < lp.w0->size(); ++k)
    f += lp.kappa[k] * power_root((*lp.w0)(k) + (*lp.dir)(k) * z, lp.degrees[k]);
  return f;
}

// Global minimum of the line function: it is smooth between the points where
// some w_k vanishes, so each such piece is searched by golden section within
// the range where no single term alone exceeds the value at z = 0.
double line_minimize(const LineProblem& lp, double* zbest) {
  double best = line_value(lp, 0.0);
  double arg = 0.0;
  double lo = -kInf, hi = kInf;
  double breaks[kMaxCols + 2];
  int nb = 0;
  for (Eigen::Index k = 0; k < lp.w0->size(); ++k) {
    double nk = (*lp.dir)(k);
    if (nk == 0.0) continue;
    double reach = std::pow(best / lp.kappa[k], lp.degrees[k]);
    double w = (*lp.w0)(k);
    double a = (-w - reach) / nk, b = (-w + reach) / nk;
    lo = std::max(lo, std::min(a, b));
    hi = std::min(hi, std::max(a, b));
    breaks[nb++] = -w / nk;
  }
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    if (zbest) *zbest = 0.0;
    return best;
  }
  double pts[kMaxCols + 4];
  int np = 0;
  pts[np++] = lo;
  pts[np++] = hi;
  pts[np++] = 0.0;
  for (int i = 0; i < nb; ++i)
    if (breaks[i] > lo && breaks[i] < hi) pts[np++] = breaks[i];
  std::sort(pts, pts + np);
  constexpr double g = 0.3819660112501051;
  for (int i = 0; i < np; ++i) {
    double v = line_value(lp, pts[i]);
    if (v < best) best = v, arg = pts[i];
  }
  for (int i = 0; i + 1 < np; ++i) {
    double a = pts[i], b = pts[i + 1];
    if (!(b > a)) continue;
    double x1 = a + g * (b - a), x2 = b - g * (b - a);
    double f1 = line_value(lp, x1), f2 = line_value(lp, x2);
    for (int it = 0; it < 48 && (b - a) > 1e-9 * (hi - lo); ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = a + g * (b - a);
        f1 = line_value(lp, x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = b - g * (b - a);
        f2 = line_value(lp, x2);
      }
    }
    if (f1 < best) best = f1, arg = x1;
    if (f2 < best) best = f2, arg = x2;
  }
  if (zbest) *zbest = arg;
  return best;
}

// Moore-Penrose pseudoinverse of f and the projector onto range(f)^perp.
void pseudo_inverse(const Mat& f, Mat& fp, Mat& perp) {
  const Eigen::Index n = f.rows(), p = f.cols();
  perp.setIdentity(n, n);
  if (p == 0) {
    fp.resize(0, n);
    return;
  }
  if (p <= n) {
    Mat gram = f.transpose() * f;
    Eigen::LDLT<Mat> ldlt(gram);
    auto d = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-13 * d.maxCoeff()) {
      fp = ldlt.solve(f.transpose());
      if (p == n) perp.setZero(n, n);
      else perp.noalias() -= f * fp;
      return;
    }
  } else {
    Mat gram = f * f.transpose();
    Eigen::LDLT<Mat> ldlt(gram);
    auto d = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-13 * d.maxCoeff()) {
      fp = ldlt.solve(f).transpose();
      perp.setZero(n, n);
      return;
    }
  }
  Eigen::JacobiSVD<Mat> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  double cut = 1e-12 * (s.size() ? s(0) : 0.0);
  fp.setZero(p, n);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) <= cut) continue;
    fp.noalias() += svd.matrixV().col(i) * (svd.matrixU().col(i).transpose() / s(i));
    perp.noalias() -= svd.matrixU().col(i) * svd.matrixU().col(i).transpose();
  }
}


// Semi-Lagrangian relaxation: node b may be reached from the off-lattice
// point b - P delta, where P delta is the part of a stencil offset realizable
// by the frame at b, at cost |F^+ delta|; the value there is interpolated.
// Offsets are projected both on the full rescaled frame and on the
// generators alone. Values only decrease; sweeps alternate direction.
void relax_by_interpolation(const EpsilonFamily& family, GridFunction& d, const std::vector<int>& offsets,
                            int max_sweeps) {
  const Lattice& lat = d.lattice();
  const Box& box = lat.box();
  const std::size_t n = lat.dim();
  const std::size_t moves = offsets.size() / n;
  const std::size_t p = family.size();
  const std::size_t m = family.generator_count();
  const FieldEvaluator& eval = family.rescaled_evaluator();
  std::vector<double> buf(n * p), pb(n), q(n), delta(n);

  // Per node: up to two (projector, pseudoinverse) pairs.
  Mat f, fp[2], perp[2];
  unsigned transverse[2] = {0, 0};
  double dmax = 0.0;
  for (double v : d.values()) dmax = std::max(dmax, v);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t step = 0; step < lat.size(); ++step) {
      std::size_t b = sweep % 2 == 0 ? step : lat.size() - 1 - step;
      double& db = d[b];
      if (db == 0.0) continue;
      lat.point(b, pb.data());
      eval.evaluate(pb, buf.data());
      int variants = 0;
      for (int pass = 0; pass < 2; ++pass) {
        std::size_t cols = pass == 0 ? p : m;
        if (pass == 1 && (m == p || family.epsilon() == 0.0)) break;
        f.resize(static_cast<Eigen::Index>(n), 0);
        std::size_t kept = 0;
        for (std::size_t j = 0; j < cols; ++j) {
          bool zero = true;
          for (std::size_t k = 0; k < n; ++k) zero = zero && buf[j * n + k] == 0.0;
          if (zero) continue;
          f.conservativeResize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kept + 1));
          for (std::size_t k = 0; k < n; ++k)
            f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(kept)) = buf[j * n + k];
          ++kept;
        }
        if (kept == 0) continue;
        pseudo_inverse(f, fp[variants], perp[variants]);
        // A full-rank frame realizes every offset exactly; those moves end on
        // nodes and are already priced by the Dijkstra pass.
        if (perp[variants].cwiseAbs().maxCoeff() < 1e-12) continue;
        // Axes whose unit step projects to under half a cell on every axis
        // only produce near-duplicate moves.
        unsigned mask = 0;
        for (std::size_t k = 0; k < n; ++k) {
          bool tiny = true;
          for (std::size_t i = 0; i < n && tiny; ++i) {
            double e = (i == k ? 1.0 : 0.0) - perp[variants](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            tiny = std::abs(e) * lat.spacing(k) < 0.5 * lat.spacing(i);
          }
          if (tiny) mask |= 1u << k;
        }
        transverse[variants] = mask;
        ++variants;
      }
      double best = db;
      for (int v = 0; v < variants; ++v) {
        for (std::size_t s = 0; s < moves; ++s) {
          bool skip = false;
          for (std::size_t k = 0; k < n; ++k) {
            skip = skip || ((transverse[v] >> k) & 1u && offsets[s * n + k] != 0);
            delta[k] = offsets[s * n + k] * lat.spacing(k);
          }
          if (skip) continue;
          double c2 = 0.0;
          for (Eigen::Index i = 0; i < fp[v].rows(); ++i) {
            double c = 0.0;
            for (std::size_t k = 0; k < n; ++k) c += fp[v](i, static_cast<Eigen::Index>(k)) * delta[k];
            c2 += c * c;
          }
          if (c2 == 0.0) continue;
          double cost = std::sqrt(c2);
          if (cost >= best) continue;
          bool inside = true;
          for (std::size_t k = 0; k < n && inside; ++k) {
            double proj = delta[k];
            for (std::size_t j = 0; j < n; ++j)
              proj -= perp[v](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * delta[j];
            q[k] = pb[k] - proj;
            inside = q[k] >= box.lower[k] && q[k] <= box.upper[k];
          }
          if (!inside) continue;
          double cand = d.interpolate(q) + cost;
          if (cand < best) best = cand;
        }
      }
      if (best < db) {
        change = std::max(change, db - best);
        db = best;
      }
    }
    if (change <= 1e-9 * dmax) break;
  }
}

}  // namespace

MoveCost::MoveCost(const EpsilonFamily& family)
    : dim_(family.dim()), generators_(family.generator_count()),
      scaled_brackets_(family.epsilon() > 0.0 && family.size() > family.generator_count()),
      rescaled_(family.rescaled_evaluator()) {
  if (dim_ > static_cast<std::size_t>(kMaxDim) || family.extended_size() > static_cast<std::size_t>(kMaxCols))
    throw DomainError("distance fields support at most 8 dimensions and 24 extended fields");
  std::vector<PolyVectorField> hi;
  for (std::size_t i = generators_; i < family.size(); ++i) {
    hi.push_back(family.table()[i].field);
    degrees_.push_back(family.table()[i].degree);
    kappa_.push_back(loop_constant(family.table()[i].degree));
  }
  brackets_ = FieldEvaluator(hi);
}

double MoveCost::operator()(std::span<const double> mid, std::span<const double> delta) const {
  const std::size_t n = dim_;
  double d[kMaxDim];
  // The cost of -delta is the mirror problem of delta; solving a canonical
  // sign makes edge costs exactly symmetric.
  bool flip = false;
  for (std::size_t k = 0; k < n; ++k)
    if (delta[k] != 0.0) {
      flip = delta[k] < 0.0;
      break;
    }
  for (std::size_t k = 0; k < n; ++k) d[k] = flip ? -delta[k] : delta[k];

  double fbuf[kMaxDim * kMaxCols];
  double gbuf[kMaxDim * kMaxCols];
  rescaled_.evaluate(mid, fbuf);
  if (brackets_.count()) brackets_.evaluate(mid, gbuf);

  // Compact away identically vanishing columns.
  const std::size_t p = rescaled_.count();
  std::size_t cols = 0;
  std::size_t gen_cols = 0;
  for (std::size_t j = 0; j < p; ++j) {
    bool zero = true;
    for (std::size_t k = 0; k < n; ++k) zero = zero && fbuf[j * n + k] == 0.0;
    if (zero) continue;
    if (cols != j) std::memmove(fbuf + cols * n, fbuf + j * n, n * sizeof(double));
    ++cols;
    if (j < generators_) gen_cols = cols;
  }
  double best = solve(fbuf, cols, gbuf, d);
  // The epsilon = 0 move set (generators plus bracket loops) is always
  // available, so the epsilon field never exceeds the epsilon = 0 one.
  if (scaled_brackets_ && gen_cols < cols) best = std::min(best, solve(fbuf, gen_cols, gbuf, d));
  return best;
}

double MoveCost::solve(const double* fcols, std::size_t fcount, const double* gcols, const double* delta) const {
  const Eigen::Index n = static_cast<Eigen::Index>(dim_);
  const Eigen::Index q = static_cast<Eigen::Index>(degrees_.size());
  Mat f(n, static_cast<Eigen::Index>(fcount));
  for (Eigen::Index j = 0; j < f.cols(); ++j)
    for (Eigen::Index k = 0; k < n; ++k) f(k, j) = fcols[j * n + k];
  Mat g(n, q);
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index k = 0; k < n; ++k) g(k, j) = gcols[j * n + k];
  Vec d(n);
  for (Eigen::Index k = 0; k < n; ++k) d(k) = delta[k];

  Mat fp, perp;
  pseudo_inverse(f, fp, perp);
  const double scale = d.norm();
  const double tol = 1e-10 * scale;
  Vec r0 = perp * d;

  if (q == 0) {
    if (r0.norm() > tol) return kInf;
    return (fp * d).norm();
  }

  Mat m = perp * g;
  Vec w0(q);
  Mat null_space(q, 0);
  if (q == 1) {
    double mn = m.col(0).norm();
    if (mn > 1e-9 * g.col(0).norm()) {
      w0(0) = m.col(0).dot(r0) / (mn * mn);
      if ((r0 - m.col(0) * w0(0)).norm() > tol) return kInf;
    } else {
      if (r0.norm() > tol) return kInf;
      w0(0) = 0.0;
      null_space.setOnes(1, 1);
    }
  } else {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV | Eigen::ComputeThinU);
    svd.setThreshold(1e-9);
    w0 = svd.solve(r0);
    if ((m * w0 - r0).norm() > tol) return kInf;
    Eigen::Index rank = svd.rank();
    null_space = svd.matrixV().rightCols(q - rank);
  }

  Vec a0 = fp * (d - g * w0);
  const Eigen::Index free_dims = null_space.cols();
  if (free_dims == 0) {
    double c = a0.norm();
    for (Eigen::Index k = 0; k < q; ++k) c += kappa_[static_cast<std::size_t>(k)] * power_root(w0(k), degrees_[static_cast<std::size_t>(k)]);
    return c;
  }

  Mat fg = fp * g;
  if (free_dims == 1) {
    Vec dir = null_space.col(0);
    Vec b = fg * dir;
    LineProblem lp{&a0, &b, &w0, &dir, kappa_.data(), degrees_.data()};
    return line_minimize(lp, nullptr);
  }

  // Several free directions: coordinate descent along the null-space basis.
  double best = kInf;
  for (int sweep = 0; sweep < 12; ++sweep) {
    double before = best;
    for (Eigen::Index j = 0; j < free_dims; ++j) {
      Vec dir = null_space.col(j);
      Vec b = fg * dir;
      LineProblem lp{&a0, &b, &w0, &dir, kappa_.data(), degrees_.data()};
      double z = 0.0;
      best = line_minimize(lp, &z);
      w0 += dir * z;
      a0 -= b * z;
    }
    if (before - best <= 1e-12 * best) break;
  }
  return best;
}

// --- distance fields --------------------------------------------------------

double DistanceField::value_at(std::span<const double> y) const {
  if (!lattice().box().contains(y)) return kInf;
  return values.interpolate(y);
}

double DistanceField::boundary_min() const {
  double m = kInf;
  const Lattice& lat = lattice();
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (lat.is_boundary(i)) m = std::min(m, values[i]);
  return m;
}

DistanceField distance_field(const EpsilonFamily& family, std::span<const double> origin, const Lattice& lattice,
                             int move_budget, int relax_sweeps) {
  const std::size_t n = lattice.dim();
  if (n != family.dim() || origin.size() != n) throw DimensionMismatch("distance_field: dimension mismatch");
  if (move_budget < 1) throw DomainError("distance_field: move_budget must be >= 1");
  if (!lattice.box().contains(origin)) throw DomainError("distance_field: origin outside the box");
  const MoveCost cost(family);

  // Stencil: every offset with |o_k| <= budget, including non-primitive ones,
  // since one long bracket loop is cheaper than several short ones.
  std::vector<int> offsets;
  std::vector<long> flat;
  {
    std::vector<int> o(n, -move_budget);
    while (true) {
      bool zero = std::all_of(o.begin(), o.end(), [](int c) { return c == 0; });
      if (!zero) {
        long f = 0;
        for (std::size_t k = 0; k < n; ++k) f += o[k] * static_cast<long>(lattice.stride(k));
        offsets.insert(offsets.end(), o.begin(), o.end());
        flat.push_back(f);
      }
      std::size_t k = n;
      while (k > 0 && o[k - 1] == move_budget) o[--k] = -move_budget;
      if (k == 0) break;
      ++o[k - 1];
    }
  }
  const std::size_t moves = flat.size();

  std::vector<double> dist(lattice.size(), kInf);
  std::vector<char> done(lattice.size(), 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  std::vector<double> pa(n), pb(n), mid(n), delta(n);
  std::vector<std::size_t> ma(n), mb(n);

  const std::size_t start = lattice.nearest(origin);
  lattice.point(start, pa.data());
  if (std::equal(pa.begin(), pa.end(), origin.begin())) {
    dist[start] = 0.0;
    heap.emplace(0.0, start);
  } else {
    // Off-lattice origin: seed the surrounding stencil with direct moves.
    lattice.unravel(start, ma.data());
    for (std::size_t s = 0; s <= moves; ++s) {
      bool inside = true;
      for (std::size_t k = 0; k < n; ++k) {
        long i = static_cast<long>(ma[k]) + (s < moves ? offsets[s * n + k] : 0);
        inside = inside && i >= 0 && i < static_cast<long>(lattice.dims()[k]);
        mb[k] = static_cast<std::size_t>(std::max(i, 0L));
      }
      if (!inside) continue;
      std::size_t b = lattice.ravel(mb.data());
      lattice.point(b, pb.data());
      for (std::size_t k = 0; k < n; ++k) {
        delta[k] = pb[k] - origin[k];
        mid[k] = 0.5 * (pb[k] + origin[k]);
      }
      double c = cost(mid, delta);
      if (c < dist[b]) {
        dist[b] = c;
        heap.emplace(c, b);
      }
    }
  }

  auto relax = [&](double da, const long* o) {
    for (std::size_t k = 0; k < n; ++k) {
      long i = static_cast<long>(ma[k]) + o[k];
      if (i < 0 || i >= static_cast<long>(lattice.dims()[k])) return;
      mb[k] = static_cast<std::size_t>(i);
    }
    std::size_t b = lattice.ravel(mb.data());
    if (done[b]) return;
    for (std::size_t k = 0; k < n; ++k) {
      pb[k] = lattice.coordinate(k, mb[k]);
      delta[k] = pb[k] - pa[k];
      mid[k] = 0.5 * (pa[k] + pb[k]);
    }
    double c = da + cost(mid, delta);
    if (c < dist[b]) {
      dist[b] = c;
      heap.emplace(c, b);
    }
  };

  std::vector<long> o(n);
  while (!heap.empty()) {
    auto [da, a] = heap.top();
    heap.pop();
    if (done[a]) continue;
    done[a] = 1;
    lattice.unravel(a, ma.data());
    lattice.point(a, pa.data());
    for (std::size_t s = 0; s < moves; ++s) {
      for (std::size_t k = 0; k < n; ++k) o[k] = offsets[s * n + k];
      relax(da, o.data());
    }
  }
  std::size_t unreached = static_cast<std::size_t>(std::count(done.begin(), done.end(), 0));
  if (unreached)
    throw DisconnectedField("distance_field: " + std::to_string(unreached) + " of " +
                            std::to_string(lattice.size()) + " nodes unreachable with move budget " +
                            std::to_string(move_budget));

  GridFunction values(lattice, std::move(dist));
  if (relax_sweeps > 0) relax_by_interpolation(family, values, offsets, relax_sweeps);

  DistanceField field;
  field.origin.assign(origin.begin(), origin.end());
  field.epsilon = family.epsilon();
  field.move_budget = move_budget;
  field.values = std::move(values);
  return field;
}

DistanceField distance_field(const EpsilonFamily& family, std::span<const double> origin, const Box& box, double h,
                             int move_budget, int relax_sweeps) {
  if (!(h > 0.0)) throw DomainError("distance_field: h must be positive");
  std::vector<std::size_t> dims(box.dim());
  std::vector<double> upper(box.dim());
  for (std::size_t k = 0; k < box.dim(); ++k) {
    double steps = std::floor((box.upper[k] - box.lower[k]) / h + 1e-9);
    if (steps < 1) throw DomainError("distance_field: h exceeds the box width");
    dims[k] = static_cast<std::size_t>(steps) + 1;
    upper[k] = box.lower[k] + steps * h;
  }
  return distance_field(family, origin, Lattice(Box(box.lower, upper), dims), move_budget, relax_sweeps);
}

void write_binary(std::ostream& out, const DistanceField& field) {
  out.write("SLDF", 4);
  binary::write_u32(out, 1);
  binary::write_lattice(out, field.lattice());
  for (double c : field.origin) binary::write_f64(out, c);
  binary::write_f64(out, field.epsilon);
  binary::write_u32(out, static_cast<std::uint32_t>(field.move_budget));
  const auto& v = field.values.values();
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

DistanceField read_distance_field(std::istream& in) {
  binary::expect_magic(in, "SLDF");
  Lattice lat = binary::read_lattice(in);
  DistanceField field;
  field.origin.resize(lat.dim());
  for (auto& c : field.origin) c = binary::read_f64(in);
  field.epsilon = binary::read_f64(in);
  field.move_budget = static_cast<int>(binary::read_u32(in));
  std::vector<double> v(lat.size());
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw ConfigError("truncated distance field file");
  field.values = GridFunction(std::move(lat), std::move(v));
  return field;
}

namespace {

Lattice window_lattice(std::span<const double> x, std::span<const double> half_widths, std::size_t nodes) {
  const std::size_t half = std::max<std::size_t>(1, (nodes - 1) / 2);
  std::vector<std::size_t> counts(x.size(), half);
  std::vector<double> h(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) h[k] = half_widths[k] / static_cast<double>(half);
  return Lattice::around(x, counts, h);
}

}  // namespace

Lattice fit_window(const EpsilonFamily& family, std::span<const double> x, double r, const WindowOptions& opts) {
  if (!(r > 0.0)) throw DomainError("fit_window: r must be positive");
  const std::size_t n = family.dim();
  Eigen::MatrixXd frame = family.extended_frame(x);
  const auto& deg = family.degrees_eps();
  std::vector<double> hw(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < frame.cols(); ++j)
      hw[k] += std::abs(frame(static_cast<Eigen::Index>(k), j)) * std::pow(r, deg[static_cast<std::size_t>(j)]);
    hw[k] *= opts.nsw_margin;
    if (hw[k] == 0.0) hw[k] = r;
  }
  std::vector<double> extent(n, 0.0);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Lattice coarse = window_lattice(x, hw, opts.coarse_nodes);
    DistanceField field = distance_field(family, x, coarse, opts.move_budget, opts.relax_sweeps);
    if (field.boundary_min() < r) {
      for (double& w : hw) w *= 2.0;
      continue;
    }
    std::vector<double> p(n);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      if (!(field.values[i] < r)) continue;
      coarse.point(i, p.data());
      for (std::size_t k = 0; k < n; ++k) extent[k] = std::max(extent[k], std::abs(p[k] - x[k]));
    }
    for (std::size_t k = 0; k < n; ++k) extent[k] = opts.fit_margin * (extent[k] + coarse.spacing(k));
    return window_lattice(x, extent, opts.fine_nodes);
  }
  throw BallEscapesBox("fit_window: ball does not fit in any trial window");
}

// --- volumes ----------------------------------------------------------------

VolumeEstimate ball_volume(const DistanceField& field, double r, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw DomainError("ball_volume: need at least one sample");
  if (field.boundary_min() < r)
    throw BallEscapesBox("ball of radius " + std::to_string(r) + " reaches the boundary of the distance-field box");
  const Lattice& lat = field.lattice();
  const Box& box = lat.box();
  const std::size_t n = lat.dim();
  constexpr std::size_t chunk = 65536;
  std::size_t hits = 0;
  std::vector<double> y(n);
  const double below_one = std::nextafter(1.0, 0.0);
  for (std::size_t c = 0; c * chunk < samples; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    std::mt19937_64 rng(seq);
    std::size_t count = std::min(chunk, samples - c * chunk);
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t k = 0; k < n; ++k) {
        double t = std::min(std::generate_canonical<double, 53>(rng), below_one);
        y[k] = box.lower[k] + t * (box.upper[k] - box.lower[k]);
      }
      if (field.values.interpolate(y) < r) ++hits;
    }
  }
  const double vol = box.volume();
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  VolumeEstimate est;
  est.mean = vol * frac;
  est.half_width = 1.96 * vol * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples));
  est.samples = samples;
  return est;
}

double ball_volume_quadrature(const DistanceField& field, double r) {
  if (field.boundary_min() < r)
    throw BallEscapesBox("ball of radius " + std::to_string(r) + " reaches the boundary of the distance-field box");
  const Lattice& lat = field.lattice();
  double v = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (field.values[i] < r) v += lat.quadrature_weight(i);
  return v;
}

DistanceField fitted_field(const EpsilonFamily& family, std::span<const double> x, double r,
                           const WindowOptions& opts) {
  Lattice lat = fit_window(family, x, r, opts);
  for (int attempt = 0; attempt < 6; ++attempt) {
    DistanceField field = distance_field(family, x, lat, opts.move_budget, opts.relax_sweeps);
    if (field.boundary_min() >= r) return field;
    std::vector<double> hw(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) hw[k] = 1.25 * lat.box().half_width(k);
    lat = window_lattice(x, hw, opts.fine_nodes);
  }
  throw BallEscapesBox("ball of radius " + std::to_string(r) + " keeps escaping the fitted window");
}

BallMeasurement measure_ball(const EpsilonFamily& family, std::span<const double> x, double r, std::size_t samples,
                             std::uint64_t seed, const WindowOptions& opts) {
  DistanceField field = fitted_field(family, x, r, opts);
  VolumeEstimate v = ball_volume(field, r, samples, seed);
  return {std::move(field), v};
}

DoublingResult doubling_ratio(const EpsilonFamily& family, std::span<const double> x, double r,
                              std::size_t samples, std::uint64_t seed, const WindowOptions& opts) {
  DoublingResult res;
  res.small = measure_ball(family, x, r, samples, seed, opts).volume;
  res.large = measure_ball(family, x, 2.0 * r, samples, seed, opts).volume;
  if (!(res.small.mean > 0.0)) throw DegenerateRatio("doubling_ratio: empty small ball");
  res.ratio = res.large.mean / res.small.mean;
  double rs = res.small.half_width / res.small.mean, rl = res.large.half_width / res.large.mean;
  res.half_width = res.ratio * std::sqrt(rs * rs + rl * rl);
  return res;
}

// --- inclusion / sandwich ---------------------------------------------------

InclusionReport ball_inclusion_check(const EpsilonFamily& family, std::span<const double> x, double r, double c1,
                                     double c2, std::size_t samples, const DistanceField& field,
                                     std::uint64_t seed) {
  if (!(c1 > 0 && c1 < 1 && c2 > 0 && c2 < 1)) throw DomainError("ball_inclusion_check: C1, C2 must lie in (0, 1)");
  const Lattice& lat = field.lattice();
  for (std::size_t k = 0; k < lat.dim(); ++k)
    if (lat.spacing(k) > r / 20.0)
      throw DomainError("ball_inclusion_check: resolution too coarse (h > r/20 on axis " + std::to_string(k) + ")");
  const std::size_t n = family.dim();
  IndexTuple index = best_index(family, x, r);
  const auto& deg = family.degrees_eps();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  InclusionReport rep;
  std::vector<double> u(n);
  std::span<const double> no_v;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < n; ++j)
      u[j] = c1 * std::pow(r, deg[static_cast<std::size_t>(index.indices[j])]) * unit(rng);
    auto y = exp_map(family, x, index, no_v, u);
    double d = field.value_at(y);
    rep.inner_max_distance = std::max(rep.inner_max_distance, d / r);
    ++rep.inner_samples;
    if (!(d <= r)) ++rep.inner_failures;
  }

  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (field.values[i] < r) inside.push_back(i);
  std::shuffle(inside.begin(), inside.end(), rng);
  if (inside.size() > samples) inside.resize(samples);
  std::vector<double> bound(n);
  for (std::size_t j = 0; j < n; ++j) bound[j] = c1 / c2 * std::pow(r, deg[static_cast<std::size_t>(index.indices[j])]);
  for (std::size_t node : inside) {
    auto target = lat.point(node);
    std::fill(u.begin(), u.end(), 0.0);
    bool hit = false;
    for (int it = 0; it < 30 && !hit; ++it) {
      auto y = exp_map(family, x, index, no_v, u);
      Eigen::VectorXd res(static_cast<Eigen::Index>(n));
      hit = true;
      for (std::size_t k = 0; k < n; ++k) {
        res(static_cast<Eigen::Index>(k)) = y[k] - target[k];
        hit = hit && std::abs(y[k] - target[k]) <= lat.spacing(k);
      }
      if (hit) break;
      Eigen::MatrixXd jac = jacobian_matrix(family, x, index, no_v, u);
      Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-res);
      for (std::size_t j = 0; j < n; ++j)
        u[j] = std::clamp(u[j] + step(static_cast<Eigen::Index>(j)), -bound[j], bound[j]);
    }
    ++rep.outer_samples;
    if (!hit) ++rep.outer_failures;
  }
  return rep;
}

double spread(std::span<const double> values) {
  if (values.empty()) return 1.0;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*lo > 0.0)) return kInf;
  return *hi / *lo;
}

SandwichReport nsw_sandwich_check(const CommutatorTable& table, std::span<const double> x,
                                  std::span<const double> radii, std::span<const double> epsilons,
                                  std::size_t samples, std::uint64_t seed, double max_spread,
                                  double max_regime_spread, const WindowOptions& opts) {
  SandwichReport rep;
  std::vector<double> all, small_eps, large_eps;
  for (double eps : epsilons) {
    EpsilonFamily family = rescale(table, eps);
    for (double r : radii) {
      SandwichRow row;
      row.epsilon = eps;
      row.r = r;
      auto m = measure_ball(family, x, r, samples, seed, opts);
      row.volume = m.volume.mean;
      row.ci = m.volume.half_width;
      row.lambda = volume_polynomial(family, x, r);
      row.ratio = row.volume / row.lambda;
      rep.rows.push_back(row);
      all.push_back(row.ratio);
      (eps < r ? small_eps : large_eps).push_back(row.ratio);
    }
  }
  rep.spread = spread(all);
  rep.spread_small_eps = spread(small_eps);
  rep.spread_large_eps = spread(large_eps);
  rep.pass = rep.spread <= max_spread && rep.spread_small_eps <= max_regime_spread &&
             rep.spread_large_eps <= max_regime_spread;
  return rep;
}

}  // namespace sublab
