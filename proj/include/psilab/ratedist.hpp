#pragma once

#include <span>
#include <vector>

#include "psilab/chain.hpp"

namespace psilab {

/// Single-letter distortion table d(x, y) >= 0 on X x Y. Square tables must
/// have a zero diagonal.
class DistortionMeasure {
 public:
  DistortionMeasure(int nx, int ny, std::vector<double> table);
  static DistortionMeasure hamming(int n);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double at(int x, int y) const { return d_[static_cast<size_t>(x) * ny_ + y]; }
  std::span<const double> table() const { return d_; }
  /// Smallest strictly positive entry (infinity if none).
  double min_positive() const;
  bool off_diagonal_positive() const;

 private:
  int nx_, ny_;
  std::vector<double> d_;
};

/// Additive block distortion d_T(s, t) = sum_i d(s_i, t_i).
double block_distortion(const DistortionMeasure& d, std::span<const int> s, std::span<const int> t);

/// The additive T-fold extension materialized on word codes.
DistortionMeasure block_measure(const DistortionMeasure& d, int T);

struct RDPoint {
  double target_distortion = 0.0;    // requested D (block units unless noted)
  double achieved_distortion = 0.0;  // E d of the returned test channel, <= target + 1e-9
  double rate_bits = 0.0;
  double slope = 0.0;  // dR/dD of the parametric solution, in bits per distortion unit
  long iterations = 0;
  std::vector<double> test_channel;  // W(t|s), nx x ny row-major
  bool per_letter = false;           // distortion/rate normalized by T
};

struct BAOptions {
  double tol_nats = 1e-8;       // alternating-minimization gap target
  double stall_tol_nats = 1e-6; // accepted certified gap when progress flatlines
  long max_iterations = 1000000;
  bool parallel = true;
};

/// R(D) of a finite source by alternating minimization with a slope-parameter
/// bisection to hit the target distortion. Rates in bits.
RDPoint blahut_arimoto(std::span<const double> source_law, const DistortionMeasure& d,
                       double target_distortion, const BAOptions& opt = {});

/// Same solver on the T-block source with the additive extension of a
/// per-letter measure. Exploits the Kronecker factorization of exp(s d_T),
/// so one iteration costs O(T |X|^{T+1}) instead of O(|X|^{2T}). The test
/// channel is materialized only when small enough.
RDPoint blahut_arimoto_block(std::span<const double> block_law, const DistortionMeasure& per_letter,
                             int T, double block_target, const BAOptions& opt = {});

/// Per-letter rate of the T-block source at per-letter distortion D:
/// (1/T) R_{X^T}(T D) on the stationary T-window law. D = 0 short-circuits to
/// block entropy, which requires d > 0 off the diagonal.
RDPoint rd_vector_source(const MarkovSource& src, int T, double distortion_per_letter,
                         const DistortionMeasure& per_letter, const BAOptions& opt = {},
                         const EnumerationCaps& caps = {});

/// Finite-T table approaching the per-letter rate-distortion limit.
std::vector<RDPoint> rd_limit_estimate(const MarkovSource& src, double distortion_per_letter,
                                       const std::vector<int>& T_list,
                                       const DistortionMeasure& per_letter,
                                       const BAOptions& opt = {}, const EnumerationCaps& caps = {});

/// n_points rate–distortion pairs on [0, D_max], ordered by D.
std::vector<RDPoint> rd_curve(std::span<const double> source_law, const DistortionMeasure& d,
                              int n_points, const BAOptions& opt = {});

}  // namespace psilab
