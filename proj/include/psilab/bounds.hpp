#pragma once

#include <vector>

#include "psilab/chain.hpp"
#include "psilab/ratedist.hpp"

namespace psilab {

/// One row of the achievable-rate accounting at parameters (T, tau, beta, D).
/// R_bound = ((1 - lambda - beta) / (T + tau)) * R_{X^T}((T + tau) D') with
/// D' = D / (1 - lambda - beta). The four terms decompose the gap between
/// R_bound and a finite-T proxy of the per-letter rate-distortion limit.
struct BoundReport {
  int T = 0;
  int tau = 0;
  double beta = 0.0;
  double D = 0.0;
  double lambda = 0.0;
  double Dprime = 0.0;
  double rd_block_bits = 0.0;  // R_{X^T}((T + tau) D'), block units
  double R_bound_bits = 0.0;
  bool feasible = false;
  // Gap decomposition (bits); T4 is relative to the finite proxy_T proxy.
  double T1 = 0.0, T2 = 0.0, T3 = 0.0, T4 = 0.0;
  double eps_T = 0.0;      // measured |T2| + |T3| + |T4|
  double gap_bound = 0.0;  // (lambda + beta) log2|X| + eps_T
  double gap_actual = 0.0; // |R_bound - proxy|
  int proxy_T = 0;
  double proxy_bits = 0.0;  // (1/proxy_T) R_{X^proxy_T}(proxy_T D')
};

struct GoodSlotCount {
  long N = 0;
  bool clamped = false;  // formula exceeded k (possible only at lambda = beta = 0)
  double fraction = 0.0; // N / k
};

/// Good-slot count N = floor((1 - lambda - beta) k) + 1, clamped to k and
/// flagged when the formula overshoots.
GoodSlotCount good_slot_count(long k, double lambda, double beta);

/// Achievable-rate bound for a channel that carries the source within
/// per-letter distortion D. Requires a first-order source (block first).
BoundReport achievable_rate(const MarkovSource& src, double D, int T, int tau, double beta,
                            const DistortionMeasure& per_letter, const BAOptions& opt = {},
                            const EnumerationCaps& caps = {});

/// achievable_rate plus the four-term convergence decomposition against the
/// finite-T proxy at proxy_T.
BoundReport term_decomposition(const MarkovSource& src, double D, int T, int tau, double beta,
                               int proxy_T, const DistortionMeasure& per_letter,
                               const BAOptions& opt = {}, const EnumerationCaps& caps = {});

/// (K / a)(a' - a): the increment bound for a convex non-increasing f with
/// f(0) <= K, evaluated between 0 < a < a'.
double convex_gap_bound(double K, double a, double a_prime);

/// Grid of term decompositions; infeasible rows are flagged, not dropped.
/// The proxy uses the largest T in T_list.
std::vector<BoundReport> convergence_sweep(const MarkovSource& src, double D,
                                           const std::vector<int>& T_list,
                                           const std::vector<int>& tau_list,
                                           const std::vector<double>& beta_list,
                                           const DistortionMeasure& per_letter,
                                           const BAOptions& opt = {},
                                           const EnumerationCaps& caps = {});

}  // namespace psilab
