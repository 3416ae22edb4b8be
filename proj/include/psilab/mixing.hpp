#pragma once

#include <vector>

#include "psilab/chain.hpp"

namespace psilab {

/// The mixing sequence lambda_tau = psi(tau), tau = 0..tau_max.
struct MixingProfile {
  int tau_max = 0;
  std::vector<double> lambdas;
};

struct DecompositionReport {
  int t = 0, tau = 0, T = 0;
  Word prefix;
  double prefix_probability = 0.0;
  double lambda = 0.0;
  double max_identity_error = 0.0;
  bool skipped = false;  // zero-probability prefix, not decomposed
  CylinderLaw conditional;
  CylinderLaw marginal;
  CylinderLaw residual;
};

struct CesaroReport {
  double average = 0.0;
  double target = 0.0;
  double gap = 0.0;
};

struct BlockedPsi {
  double psi_parent = 0.0;
  double psi_block = 0.0;
};

/// psi-mixing coefficient of a first-order chain at gap tau, as the maximal
/// relative deviation of the (tau+1)-step transition from the stationary law:
/// max over supported (i, j) of |P^(tau+1)(i,j) / pi_j - 1|. Order-m sources
/// must be blocked to first order before calling. Validated against
/// psi_brute_force, which enumerates events directly.
double psi_markov(const MarkovSource& src, int tau);

/// Exact supremum of |P(A and B) / (P(A) P(B)) - 1| over all nonempty
/// positive-probability subsets A of X^t and B of X^T, the windows separated
/// by gap tau. Subset enumeration is capped via caps.max_subset_atoms.
double psi_brute_force(const MarkovSource& src, int tau, int t, int T,
                       const EnumerationCaps& caps = {}, bool parallel = true);

/// Slow direct-summation reference for psi_brute_force; test/bench use only.
double psi_brute_force_reference(const MarkovSource& src, int tau, int t, int T,
                                 const EnumerationCaps& caps = {});

/// lambda_tau := psi(tau) for tau = 0..tau_max.
MixingProfile lambda_profile(const MarkovSource& src, int tau_max);

/// The residual law P' that makes the conditional window law an exact mixture
/// (1 - lambda) P_T + lambda P'. Returns P_T by convention when lambda ~ 0.
CylinderLaw residual_distribution(const MarkovSource& src, const Word& prefix, int tau, int T,
                                  const EnumerationCaps& caps = {});

/// Mixture decomposition check for every prefix in X^t; zero-probability
/// prefixes are skipped and flagged.
std::vector<DecompositionReport> verify_decomposition(const MarkovSource& src, int t, int tau,
                                                      int T, const EnumerationCaps& caps = {});

/// Cesaro-average independence diagnostic:
/// (1/N) sum_tau P(X_1^t = a, X_{tau+1}^{tau+T} = b) versus P(a) P(b).
/// Overlapping windows (tau < t) are handled by exact joint evaluation.
CesaroReport ergodic_cesaro_check(const MarkovSource& src, const Word& a, const Word& b, int N,
                                  const EnumerationCaps& caps = {});

/// psi of the parent chain and of its L-block process at the same gap tau
/// (block gaps span more parent steps, so psi_block <= psi_parent).
BlockedPsi blocked_psi_comparison(const MarkovSource& src, int L, int tau,
                                  const EnumerationCaps& caps = {});

}  // namespace psilab
