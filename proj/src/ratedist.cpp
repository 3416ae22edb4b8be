#include "psilab/ratedist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psilab {

namespace {
constexpr double kLn2 = std::numbers::ln2;
}

DistortionMeasure::DistortionMeasure(int nx, int ny, std::vector<double> table)
    : nx_(nx), ny_(ny), d_(std::move(table)) {
  if (nx_ < 1 || ny_ < 1) fail(Errc::config, "distortion table must be nonempty");
  if (static_cast<long>(d_.size()) != static_cast<long>(nx_) * ny_)
    fail(Errc::config, "distortion table size mismatch");
  for (double v : d_)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::config, "distortion entries must be finite and >= 0");
  if (nx_ == ny_) {
    for (int x = 0; x < nx_; ++x)
      if (at(x, x) != 0.0) fail(Errc::config, "square distortion tables must have a zero diagonal");
  }
}

DistortionMeasure DistortionMeasure::hamming(int n) {
  std::vector<double> t(static_cast<size_t>(n) * n, 1.0);
  for (int i = 0; i < n; ++i) t[static_cast<size_t>(i) * n + i] = 0.0;
  return DistortionMeasure(n, n, std::move(t));
}

double DistortionMeasure::min_positive() const {
  double best = std::numeric_limits<double>::infinity();
  for (double v : d_)
    if (v > 0.0) best = std::min(best, v);
  return best;
}

bool DistortionMeasure::off_diagonal_positive() const {
  if (nx_ != ny_) return false;
  for (int x = 0; x < nx_; ++x)
    for (int y = 0; y < ny_; ++y)
      if (x != y && at(x, y) == 0.0) return false;
  return true;
}

double block_distortion(const DistortionMeasure& d, std::span<const int> s, std::span<const int> t) {
  if (s.size() != t.size()) fail(Errc::length_mismatch, "blocks must have equal length");
  double acc = 0.0;
  for (size_t i = 0; i < s.size(); ++i) acc += d.at(s[i], t[i]);
  return acc;
}

DistortionMeasure block_measure(const DistortionMeasure& d, int T) {
  if (T < 1) fail(Errc::config, "block width must be >= 1");
  const long nx = ipow_checked(d.nx(), T, 1L << 12, Errc::cap_exceeded, "|X|^T exceeds the block-measure cap");
  const long ny = ipow_checked(d.ny(), T, 1L << 12, Errc::cap_exceeded, "|Y|^T exceeds the block-measure cap");
  if (nx * ny > (1L << 24)) fail(Errc::cap_exceeded, "block distortion table exceeds cap");
  std::vector<double> table(static_cast<size_t>(nx) * ny, 0.0);
  std::vector<int> s(T), t(T);
  for (long cs = 0; cs < nx; ++cs) {
    long v = cs;
    for (int i = T - 1; i >= 0; --i) {
      s[i] = static_cast<int>(v % d.nx());
      v /= d.nx();
    }
    for (long ct = 0; ct < ny; ++ct) {
      long w = ct;
      for (int i = T - 1; i >= 0; --i) {
        t[i] = static_cast<int>(w % d.ny());
        w /= d.ny();
      }
      table[static_cast<size_t>(cs) * ny + ct] = block_distortion(d, s, t);
    }
  }
  return DistortionMeasure(static_cast<int>(nx), static_cast<int>(ny), std::move(table));
}

namespace {

// Explicit-table kernel A_ij = exp(s d_ij) for arbitrary measures.
class DenseKernel {
 public:
  explicit DenseKernel(const DistortionMeasure& d, bool parallel)
      : d_(d), parallel_(parallel), a_(static_cast<size_t>(d.nx()) * d.ny()) {}

  long nx() const { return d_.nx(); }
  long ny() const { return d_.ny(); }

  void set_slope(double s) {
    const auto& table = d_.table();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel_)
#endif
    for (long i = 0; i < static_cast<long>(a_.size()); ++i) a_[i] = std::exp(s * table[i]);
  }

  void forward(const std::vector<double>& q, std::vector<double>& c) const {
    const long cols = ny();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel_)
#endif
    for (long i = 0; i < nx(); ++i) {
      double acc = 0.0;
      const double* row = a_.data() + i * cols;
      for (long j = 0; j < cols; ++j) acc += q[j] * row[j];
      c[i] = acc;
    }
  }

  void backward(const std::vector<double>& r, std::vector<double>& g) const {
    const long cols = ny();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel_)
#endif
    for (long j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (long i = 0; i < nx(); ++i) acc += r[i] * a_[i * cols + j];
      g[j] = acc;
    }
  }

  // u_i = sum_j A_ij d_ij q_j.
  void weighted(const std::vector<double>& q, std::vector<double>& u) const {
    const long cols = ny();
    const auto& table = d_.table();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel_)
#endif
    for (long i = 0; i < nx(); ++i) {
      double acc = 0.0;
      for (long j = 0; j < cols; ++j) acc += q[j] * a_[i * cols + j] * table[i * cols + j];
      u[i] = acc;
    }
  }

  bool channel_entry(double) const { return true; }
  double kernel_at(long i, long j) const { return a_[i * ny() + j]; }

 private:
  const DistortionMeasure& d_;
  bool parallel_;
  std::vector<double> a_;
};

// Kronecker kernel for additive block distortion: exp(s d_T) factorizes as
// the T-fold tensor power of the per-letter kernel, so a matvec costs
// O(T S^{T+1}) instead of O(S^{2T}).
class BlockKernel {
 public:
  BlockKernel(const DistortionMeasure& per_letter, int T, bool parallel)
      : d_(per_letter),
        T_(T),
        sx_(per_letter.nx()),
        sy_(per_letter.ny()),
        parallel_(parallel),
        e_(static_cast<size_t>(sx_) * sy_),
        f_(static_cast<size_t>(sx_) * sy_) {
    if (sx_ != sy_) fail(Errc::config, "block kernel needs matching alphabets");
    nx_ = ipow(sx_, T_);
  }

  long nx() const { return nx_; }
  long ny() const { return nx_; }

  void set_slope(double s) {
    for (int i = 0; i < sx_; ++i)
      for (int j = 0; j < sy_; ++j) {
        const double dij = d_.at(i, j);
        e_[static_cast<size_t>(i) * sy_ + j] = std::exp(s * dij);
        f_[static_cast<size_t>(i) * sy_ + j] = std::exp(s * dij) * dij;
      }
  }

  void forward(const std::vector<double>& q, std::vector<double>& c) const {
    c = q;
    for (int mode = 0; mode < T_; ++mode) apply_mode(e_, c, mode, false);
  }

  void backward(const std::vector<double>& r, std::vector<double>& g) const {
    g = r;
    for (int mode = 0; mode < T_; ++mode) apply_mode(e_, g, mode, true);
  }

  // d_T is a sum over positions, so the weighted contraction is a sum of T
  // products that swap the plain kernel for the weighted one at one mode.
  void weighted(const std::vector<double>& q, std::vector<double>& u) const {
    std::vector<double> term;
    std::fill(u.begin(), u.end(), 0.0);
    for (int heavy = 0; heavy < T_; ++heavy) {
      term = q;
      for (int mode = 0; mode < T_; ++mode) apply_mode(mode == heavy ? f_ : e_, term, mode, false);
      for (long i = 0; i < nx_; ++i) u[i] += term[i];
    }
  }

  double kernel_at(long i, long j) const {
    double v = 1.0;
    for (int mode = T_ - 1; mode >= 0; --mode) {
      v *= e_[static_cast<size_t>(i % sx_) * sy_ + (j % sy_)];
      i /= sx_;
      j /= sy_;
    }
    return v;
  }

 private:
  // Contract the S x S matrix along one tensor mode (transpose = adjoint).
  void apply_mode(const std::vector<double>& m, std::vector<double>& v, int mode, bool transpose) const {
    const long stride = ipow(sx_, T_ - 1 - mode);
    const long outer = ipow(sx_, mode);
    const int S = sx_;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) collapse(2) if (parallel_ && outer * stride > 1024)
#endif
    for (long o = 0; o < outer; ++o) {
      for (long in = 0; in < stride; ++in) {
        const long base = o * S * stride + in;
        double x[64];
        for (int s = 0; s < S; ++s) x[s] = v[base + s * stride];
        for (int i = 0; i < S; ++i) {
          double acc = 0.0;
          for (int s = 0; s < S; ++s)
            acc += (transpose ? m[static_cast<size_t>(s) * S + i] : m[static_cast<size_t>(i) * S + s]) * x[s];
          v[base + i * stride] = acc;
        }
      }
    }
  }

  const DistortionMeasure& d_;
  int T_;
  int sx_, sy_;
  bool parallel_;
  long nx_ = 0;
  std::vector<double> e_;
  std::vector<double> f_;
};

struct ParametricPoint {
  double distortion = 0.0;
  double rate_nats = 0.0;
  long iterations = 0;
};

// Alternating minimization at a fixed slope s <= 0. Parallel loops write
// disjoint elements with serial inner sums; cross-element reductions are
// serial, so results do not depend on the thread count.
template <class Kernel>
class Solver {
 public:
  Solver(std::span<const double> p, Kernel kernel, const BAOptions& opt)
      : p_(p),
        kernel_(std::move(kernel)),
        opt_(opt),
        q_(kernel_.ny(), 1.0 / static_cast<double>(kernel_.ny())),
        c_(kernel_.nx()),
        r_(kernel_.nx()),
        growth_(kernel_.ny()),
        u_(kernel_.nx()) {}

  ParametricPoint solve(double s) {
    kernel_.set_slope(s);
    const long ny = kernel_.ny();
    const long nx = kernel_.nx();

    // Restore a sliver of support: coordinates driven to zero at the
    // previous slope cannot regrow under multiplicative updates, but may be
    // needed at this one. The sliver must stay far below the gap tolerance:
    // near a support-transition slope, re-injected mass drains only like
    // 1/t and floors the gap at its own scale.
    {
      const double mix = 1e-12;
      double mass = 0.0;
      for (double& v : q_) {
        v = (1.0 - mix) * v + mix / static_cast<double>(ny);
        mass += v;
      }
      for (double& v : q_) v /= mass;
    }

    // The certified optimality gap is max_j ln growth_j at the current q;
    // it is valid whatever update rule follows, so the update may be
    // over-relaxed (growth^alpha) to speed up the slow boundary modes.
    // alpha backs off to 1 whenever the gap stops shrinking. At support
    // transitions the gap decays only like 1/t; once progress flatlines the
    // looser stall tolerance is accepted (the gap stays a certified bound).
    long iters = 0;
    double gap = std::numeric_limits<double>::infinity();
    double last_gap = gap;
    double checkpoint = gap;
    double alpha = 1.0;
    while (true) {
      if (++iters > opt_.max_iterations)
        fail(Errc::not_converged, "alternating minimization exceeded the iteration cap");
      kernel_.forward(q_, c_);
      for (long i = 0; i < nx; ++i) r_[i] = p_[i] == 0.0 ? 0.0 : p_[i] / c_[i];
      kernel_.backward(r_, growth_);
      gap = 0.0;
      for (long j = 0; j < ny; ++j)
        if (growth_[j] > 0.0) gap = std::max(gap, std::log(growth_[j]));
      if (gap <= opt_.tol_nats) break;
      if (iters % 1024 == 0) {
        if (gap > 0.97 * checkpoint && gap <= opt_.stall_tol_nats) break;
        checkpoint = gap;
      }
      alpha = gap <= last_gap ? std::min(alpha * 1.1, 1.9) : 1.0;
      last_gap = gap;
      double mass = 0.0;
      if (alpha == 1.0) {
        for (long j = 0; j < ny; ++j) mass += (q_[j] *= growth_[j]);
      } else {
        for (long j = 0; j < ny; ++j)
          mass += (q_[j] *= growth_[j] > 0.0 ? std::pow(growth_[j], alpha) : 0.0);
      }
      for (double& v : q_) v /= mass;
    }

    // Parametric (D, R) at the converged q.
    kernel_.forward(q_, c_);
    kernel_.weighted(q_, u_);
    double distortion = 0.0, objective = 0.0;
    for (long i = 0; i < nx; ++i) {
      if (p_[i] == 0.0) continue;
      distortion += p_[i] * (u_[i] / c_[i]);
      objective -= p_[i] * std::log(c_[i]);
    }
    return ParametricPoint{distortion, s * distortion + objective, iters};
  }

  // W(j|i) = q_j A_ij / c_i, materialized only when small enough.
  std::vector<double> test_channel() const {
    const long nx = kernel_.nx(), ny = kernel_.ny();
    if (nx * ny > (1L << 24)) return {};
    std::vector<double> w(static_cast<size_t>(nx) * ny, 0.0);
    for (long i = 0; i < nx; ++i) {
      double ci = 0.0;
      for (long j = 0; j < ny; ++j) ci += q_[j] * kernel_.kernel_at(i, j);
      if (ci == 0.0) continue;
      for (long j = 0; j < ny; ++j)
        w[static_cast<size_t>(i) * ny + j] = q_[j] * kernel_.kernel_at(i, j) / ci;
    }
    return w;
  }

 private:
  std::span<const double> p_;
  Kernel kernel_;
  BAOptions opt_;
  std::vector<double> q_;
  std::vector<double> c_;
  std::vector<double> r_;
  std::vector<double> growth_;
  std::vector<double> u_;
};

struct RateDistortionShape {
  double d_floor = 0.0;
  double d_max = 0.0;
  long j_star = 0;
};

// Feasibility landmarks of the constraint set: the least achievable E[d] and
// the distortion of the best deterministic reproduction.
template <class DistAt>
RateDistortionShape constraint_shape(std::span<const double> p, long nx, long ny, DistAt dist) {
  RateDistortionShape s;
  for (long i = 0; i < nx; ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (long j = 0; j < ny; ++j) m = std::min(m, dist(i, j));
    s.d_floor += p[i] * m;
  }
  s.d_max = std::numeric_limits<double>::infinity();
  for (long j = 0; j < ny; ++j) {
    double v = 0.0;
    for (long i = 0; i < nx; ++i) v += p[i] * dist(i, j);
    if (v < s.d_max) {
      s.d_max = v;
      s.j_star = j;
    }
  }
  return s;
}

template <class Kernel>
RDPoint drive_to_target(std::span<const double> p, Kernel kernel, double target,
                        const RateDistortionShape& shape, double min_positive_d,
                        const BAOptions& opt) {
  RDPoint point;
  point.target_distortion = target;
  if (target < shape.d_floor - 1e-12)
    fail(Errc::d_infeasible, "target distortion below the minimum achievable value");
  const long nx = kernel.nx(), ny = kernel.ny();
  if (target >= shape.d_max - 1e-12) {
    point.achieved_distortion = shape.d_max;
    point.rate_bits = 0.0;
    point.slope = 0.0;
    if (nx * ny <= (1L << 24)) {
      point.test_channel.assign(static_cast<size_t>(nx) * ny, 0.0);
      for (long i = 0; i < nx; ++i)
        point.test_channel[static_cast<size_t>(i) * ny + shape.j_star] = 1.0;
    }
    return point;
  }

  Solver<Kernel> solver(p, std::move(kernel), opt);
  const double s_floor = -700.0 / (std::isfinite(min_positive_d) ? min_positive_d : 1.0);

  // Bracket: D(s) is non-decreasing in s; expand s_lo until the target is
  // enclosed, then bisect from the feasible (D <= target) side. q is
  // warm-started across evaluations. The slope-scaled acceptance bounds the
  // rate error |s| |D - target| without chasing D to machine precision.
  const double d_tol = std::max(1e-12, 1e-11 * (1.0 + target));
  const double rate_tol = std::max(1e-7, 10.0 * opt.tol_nats);
  const auto close_enough = [&](double s, double dist) {
    const double miss = target - dist;
    return miss <= d_tol || std::fabs(s) * miss <= rate_tol;
  };
  long iterations = 0;
  double s_lo = -1.0;
  ParametricPoint lo = solver.solve(s_lo);
  iterations += lo.iterations;
  while (lo.distortion > target + d_tol && s_lo > s_floor) {
    s_lo = std::max(s_floor, s_lo * 2.0);
    lo = solver.solve(s_lo);
    iterations += lo.iterations;
  }
  std::vector<double> w_lo = solver.test_channel();
  double s_hi = 0.0;
  double d_hi = shape.d_max;
  double r_hi = 0.0;

  for (int step = 0; step < 200; ++step) {
    if (lo.distortion <= target + d_tol && close_enough(s_lo, lo.distortion)) break;
    if (s_hi - s_lo < 1e-13 * (1.0 + std::fabs(s_lo))) break;
    const double s_mid = 0.5 * (s_lo + s_hi);
    const ParametricPoint mid = solver.solve(s_mid);
    iterations += mid.iterations;
    if (mid.distortion > target + d_tol) {
      s_hi = s_mid;
      d_hi = mid.distortion;
      r_hi = mid.rate_nats;
    } else {
      s_lo = s_mid;
      lo = mid;
      w_lo = solver.test_channel();
      if (close_enough(s_lo, lo.distortion)) break;
    }
  }

  double rate_nats = lo.rate_nats;
  if (!close_enough(s_lo, lo.distortion) && d_hi > lo.distortion) {
    // The bracket straddles a linear segment of R(D); interpolate along it.
    const double slope = (r_hi - lo.rate_nats) / (d_hi - lo.distortion);
    rate_nats = lo.rate_nats + slope * (target - lo.distortion);
  }

  point.achieved_distortion = lo.distortion;
  point.rate_bits = std::max(0.0, rate_nats / kLn2);
  point.slope = s_lo / kLn2;
  point.iterations = iterations;
  point.test_channel = std::move(w_lo);
  return point;
}

void validate_source_law(std::span<const double> law) {
  double mass = 0.0;
  for (double v : law) {
    if (!(v >= 0.0)) fail(Errc::config, "source law entries must be >= 0");
    mass += v;
  }
  if (std::fabs(mass - 1.0) > 1e-9) fail(Errc::config, "source law must sum to 1");
}

}  // namespace

RDPoint blahut_arimoto(std::span<const double> source_law, const DistortionMeasure& d,
                       double target_distortion, const BAOptions& opt) {
  if (static_cast<int>(source_law.size()) != d.nx()) fail(Errc::config, "source law size mismatch");
  validate_source_law(source_law);
  if (!(target_distortion >= 0.0)) fail(Errc::config, "target distortion must be >= 0");
  const auto shape = constraint_shape(source_law, d.nx(), d.ny(),
                                      [&](long i, long j) { return d.at(static_cast<int>(i), static_cast<int>(j)); });
  return drive_to_target(source_law, DenseKernel(d, opt.parallel), target_distortion, shape,
                         d.min_positive(), opt);
}

RDPoint blahut_arimoto_block(std::span<const double> block_law, const DistortionMeasure& per_letter,
                             int T, double block_target, const BAOptions& opt) {
  if (T < 1) fail(Errc::config, "block width must be >= 1");
  if (per_letter.nx() != per_letter.ny())
    fail(Errc::config, "block solver needs matching alphabets");
  if (per_letter.nx() > 64) fail(Errc::cap_exceeded, "per-letter alphabet too large for the block solver");
  const long n = ipow_checked(per_letter.nx(), T, 1L << 22, Errc::cap_exceeded,
                              "|X|^T exceeds the block solver cap");
  if (static_cast<long>(block_law.size()) != n) fail(Errc::config, "source law size mismatch");
  validate_source_law(block_law);
  if (!(block_target >= 0.0)) fail(Errc::config, "target distortion must be >= 0");

  // Additivity gives the feasibility landmarks letter by letter.
  const int S = per_letter.nx();
  BlockKernel kernel(per_letter, T, opt.parallel);
  const auto shape = constraint_shape(block_law, n, n, [&](long i, long j) {
    double acc = 0.0;
    for (int mode = 0; mode < T; ++mode) {
      acc += per_letter.at(static_cast<int>(i % S), static_cast<int>(j % S));
      i /= S;
      j /= S;
    }
    return acc;
  });
  return drive_to_target(block_law, std::move(kernel), block_target, shape,
                         per_letter.min_positive(), opt);
}

RDPoint rd_vector_source(const MarkovSource& src, int T, double distortion_per_letter,
                         const DistortionMeasure& per_letter, const BAOptions& opt,
                         const EnumerationCaps& caps) {
  if (T < 1) fail(Errc::config, "T must be >= 1");
  if (per_letter.nx() != src.alphabet_size())
    fail(Errc::config, "distortion table does not match the source alphabet");
  if (distortion_per_letter == 0.0) {
    // Lossless corner: block entropy per letter. Needs d > 0 off the
    // diagonal, otherwise R(0) can be smaller than the entropy.
    if (!per_letter.off_diagonal_positive())
      fail(Errc::zero_distortion_ambiguous,
           "D = 0 entropy path requires strictly positive off-diagonal distortion");
    RDPoint point;
    point.per_letter = true;
    point.target_distortion = 0.0;
    point.achieved_distortion = 0.0;
    point.rate_bits = block_entropy_bits(src, T) / T;
    point.slope = -std::numeric_limits<double>::infinity();
    const long n = ipow(src.alphabet_size(), T);
    if (n * n <= (1L << 24)) {
      point.test_channel.assign(static_cast<size_t>(n) * n, 0.0);
      for (long i = 0; i < n; ++i) point.test_channel[static_cast<size_t>(i) * n + i] = 1.0;
    }
    return point;
  }
  const CylinderLaw law = marginal_law(src, T, caps);
  RDPoint block =
      blahut_arimoto_block(law.probabilities(), per_letter, T, T * distortion_per_letter, opt);
  block.per_letter = true;
  block.target_distortion /= T;
  block.achieved_distortion /= T;
  block.rate_bits /= T;
  return block;
}

std::vector<RDPoint> rd_limit_estimate(const MarkovSource& src, double distortion_per_letter,
                                       const std::vector<int>& T_list,
                                       const DistortionMeasure& per_letter, const BAOptions& opt,
                                       const EnumerationCaps& caps) {
  std::vector<RDPoint> out;
  out.reserve(T_list.size());
  for (int T : T_list)
    out.push_back(rd_vector_source(src, T, distortion_per_letter, per_letter, opt, caps));
  return out;
}

std::vector<RDPoint> rd_curve(std::span<const double> source_law, const DistortionMeasure& d,
                              int n_points, const BAOptions& opt) {
  if (n_points < 2) fail(Errc::config, "need at least two curve points");
  double d_max = std::numeric_limits<double>::infinity();
  for (int j = 0; j < d.ny(); ++j) {
    double v = 0.0;
    for (int i = 0; i < d.nx(); ++i) v += source_law[i] * d.at(i, j);
    d_max = std::min(d_max, v);
  }
  std::vector<RDPoint> out;
  out.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double target = d_max * i / (n_points - 1);
    out.push_back(blahut_arimoto(source_law, d, target, opt));
  }
  return out;
}

}  // namespace psilab
