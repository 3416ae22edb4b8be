#include "psilab/mixing.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psilab {

namespace {

// Dense (tau+1)-step transition matrix of the first-order chain.
std::vector<double> matrix_power_rows(const MarkovSource& src, int steps) {
  const int S = src.alphabet_size();
  if (static_cast<long>(S) * S > (1L << 22)) fail(Errc::cap_exceeded, "chain too large for matrix powers");
  std::vector<double> acc(static_cast<size_t>(S) * S, 0.0), base(static_cast<size_t>(S) * S);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) base[static_cast<size_t>(i) * S + j] = src.transition(i, j);
  acc = base;
  std::vector<double> tmp(static_cast<size_t>(S) * S);
  for (int s = 1; s < steps; ++s) {
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < S; ++j) {
        double v = 0.0;
        for (int k = 0; k < S; ++k)
          v += acc[static_cast<size_t>(i) * S + k] * base[static_cast<size_t>(k) * S + j];
        tmp[static_cast<size_t>(i) * S + j] = v;
      }
    }
    acc.swap(tmp);
  }
  return acc;
}

void require_first_order(const MarkovSource& src, const char* who) {
  if (src.order() != 1)
    fail(Errc::config, std::string(who) + " requires a first-order chain; block the source first");
}

// Classification restricted to the stationary support (null states are
// invisible to the process).
void require_mixing_chain(const MarkovSource& src) {
  const int S = src.alphabet_size();
  const auto& pi = src.stationary_histories();
  std::vector<int> keep;
  for (int i = 0; i < S; ++i)
    if (pi[i] > 0.0) keep.push_back(i);
  std::vector<std::vector<double>> sub(keep.size(), std::vector<double>(keep.size(), 0.0));
  for (size_t a = 0; a < keep.size(); ++a) {
    double row_sum = 0.0;
    for (size_t b = 0; b < keep.size(); ++b) {
      sub[a][b] = src.transition(keep[a], keep[b]);
      row_sum += sub[a][b];
    }
    // Support is closed under the transition, so the restricted rows are
    // stochastic up to rounding.
    for (size_t b = 0; b < keep.size(); ++b) sub[a][b] /= row_sum;
  }
  const ClassificationReport rep = classify_transition(sub);
  if (!rep.irreducible) fail(Errc::not_irreducible, "chain is not irreducible on its support");
  if (!rep.aperiodic) fail(Errc::not_aperiodic, "chain is periodic");
}

struct AtomTable {
  std::vector<Word> words;
  std::vector<double> prob;
};

AtomTable positive_atoms_prefix(const MarkovSource& src, int t, const EnumerationCaps& caps) {
  const long total = ipow_checked(src.alphabet_size(), t, caps.max_states, Errc::cap_exceeded,
                                  "|X|^t exceeds the enumeration cap");
  AtomTable out;
  CylinderLaw scratch(src.alphabet_size(), t, std::vector<double>(total, 0.0));
  for (long c = 0; c < total; ++c) {
    Word w = scratch.decode(c);
    const double p = cylinder_probability(src, w);
    if (p > 0.0) {
      out.words.push_back(std::move(w));
      out.prob.push_back(p);
    }
  }
  return out;
}

}  // namespace

double psi_markov(const MarkovSource& src, int tau) {
  require_first_order(src, "psi_markov");
  if (tau < 0) fail(Errc::config, "tau must be >= 0");
  require_mixing_chain(src);
  const int S = src.alphabet_size();
  const auto& pi = src.stationary_histories();
  const std::vector<double> stepped = matrix_power_rows(src, tau + 1);
  double best = 0.0;
  for (int i = 0; i < S; ++i) {
    if (pi[i] == 0.0) continue;
    for (int j = 0; j < S; ++j) {
      if (pi[j] == 0.0) continue;
      best = std::max(best, std::fabs(stepped[static_cast<size_t>(i) * S + j] / pi[j] - 1.0));
    }
  }
  return best;
}

double psi_brute_force(const MarkovSource& src, int tau, int t, int T, const EnumerationCaps& caps,
                       bool parallel) {
  (void)parallel;
  if (tau < 0 || t < 1 || T < 1) fail(Errc::config, "need tau >= 0, t >= 1, T >= 1");
  const AtomTable a = positive_atoms_prefix(src, t, caps);
  const CylinderLaw lawT = marginal_law(src, T, caps);
  std::vector<long> b_codes;
  std::vector<double> pb;
  for (long c = 0; c < lawT.size(); ++c) {
    if (lawT.at(c) > 0.0) {
      b_codes.push_back(c);
      pb.push_back(lawT.at(c));
    }
  }
  const int nA = static_cast<int>(a.words.size());
  const int nB = static_cast<int>(b_codes.size());
  if (nA > caps.max_subset_atoms || nB > caps.max_subset_atoms)
    fail(Errc::cap_exceeded, "positive-probability atom count exceeds the subset cap");

  // Joint table J[a][b] = P(prefix = a, window after gap = b).
  std::vector<double> joint(static_cast<size_t>(nA) * nB);
  for (int ia = 0; ia < nA; ++ia) {
    const CylinderLaw cond = conditional_law(src, a.words[ia], tau, T, caps);
    for (int ib = 0; ib < nB; ++ib)
      joint[static_cast<size_t>(ia) * nB + ib] = a.prob[ia] * cond.at(b_codes[ib]);
  }

  const long maskA_count = 1L << nA;
  const long maskB_count = 1L << nB;

  // Subset sums of the B marginal, shared across A subsets.
  std::vector<double> pb_sum(maskB_count, 0.0);
  for (long mask = 1; mask < maskB_count; ++mask) {
    const long lb = mask & -mask;
    pb_sum[mask] = pb_sum[mask ^ lb] + pb[static_cast<int>(std::countr_zero(static_cast<unsigned long>(lb)))];
  }

  double best = 0.0;
#ifdef _OPENMP
#pragma omp parallel if (parallel)
#endif
  {
    std::vector<double> row(nB);
    std::vector<double> sums(maskB_count);
    double local = 0.0;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (long maskA = 1; maskA < maskA_count; ++maskA) {
      double pa_sum = 0.0;
      std::fill(row.begin(), row.end(), 0.0);
      for (int ia = 0; ia < nA; ++ia) {
        if (!(maskA >> ia & 1)) continue;
        pa_sum += a.prob[ia];
        for (int ib = 0; ib < nB; ++ib) row[ib] += joint[static_cast<size_t>(ia) * nB + ib];
      }
      sums[0] = 0.0;
      for (long maskB = 1; maskB < maskB_count; ++maskB) {
        const long lb = maskB & -maskB;
        sums[maskB] =
            sums[maskB ^ lb] + row[static_cast<int>(std::countr_zero(static_cast<unsigned long>(lb)))];
        const double ratio = sums[maskB] / (pa_sum * pb_sum[maskB]);
        local = std::max(local, std::fabs(ratio - 1.0));
      }
    }
#ifdef _OPENMP
#pragma omp critical
#endif
    best = std::max(best, local);
  }
  return best;
}

double psi_brute_force_reference(const MarkovSource& src, int tau, int t, int T,
                                 const EnumerationCaps& caps) {
  const AtomTable a = positive_atoms_prefix(src, t, caps);
  const CylinderLaw lawT = marginal_law(src, T, caps);
  std::vector<long> b_codes;
  std::vector<double> pb;
  for (long c = 0; c < lawT.size(); ++c) {
    if (lawT.at(c) > 0.0) {
      b_codes.push_back(c);
      pb.push_back(lawT.at(c));
    }
  }
  const int nA = static_cast<int>(a.words.size());
  const int nB = static_cast<int>(b_codes.size());
  if (nA > caps.max_subset_atoms || nB > caps.max_subset_atoms)
    fail(Errc::cap_exceeded, "positive-probability atom count exceeds the subset cap");
  std::vector<double> joint(static_cast<size_t>(nA) * nB);
  for (int ia = 0; ia < nA; ++ia) {
    const CylinderLaw cond = conditional_law(src, a.words[ia], tau, T, caps);
    for (int ib = 0; ib < nB; ++ib)
      joint[static_cast<size_t>(ia) * nB + ib] = a.prob[ia] * cond.at(b_codes[ib]);
  }
  double best = 0.0;
  for (long maskA = 1; maskA < (1L << nA); ++maskA) {
    for (long maskB = 1; maskB < (1L << nB); ++maskB) {
      double pa = 0.0, pbs = 0.0, pj = 0.0;
      for (int ia = 0; ia < nA; ++ia) {
        if (!(maskA >> ia & 1)) continue;
        pa += a.prob[ia];
        for (int ib = 0; ib < nB; ++ib)
          if (maskB >> ib & 1) pj += joint[static_cast<size_t>(ia) * nB + ib];
      }
      for (int ib = 0; ib < nB; ++ib)
        if (maskB >> ib & 1) pbs += pb[ib];
      best = std::max(best, std::fabs(pj / (pa * pbs) - 1.0));
    }
  }
  return best;
}

MixingProfile lambda_profile(const MarkovSource& src, int tau_max) {
  if (tau_max < 0) fail(Errc::config, "tau_max must be >= 0");
  MixingProfile prof{tau_max, {}};
  prof.lambdas.reserve(tau_max + 1);
  for (int tau = 0; tau <= tau_max; ++tau) prof.lambdas.push_back(psi_markov(src, tau));
  return prof;
}

namespace {

// Shared by residual_distribution and verify_decomposition once lambda and
// the window law are in hand.
CylinderLaw residual_from(const MarkovSource& src, const CylinderLaw& marginal,
                          const CylinderLaw& conditional, double lambda) {
  if (lambda < 1e-12) return marginal;  // exact mixture holds with any residual
  std::vector<double> r(conditional.size());
  // Cancellation in (cond - (1-lambda) p) / lambda grows as lambda shrinks;
  // the negativity tolerance scales accordingly.
  const double neg_tol = std::max(1e-12, 64.0 * DBL_EPSILON / lambda);
  double sum = 0.0;
  for (long c = 0; c < conditional.size(); ++c) {
    double v = (conditional.at(c) - (1.0 - lambda) * marginal.at(c)) / lambda;
    if (v < 0.0) {
      if (v < -neg_tol)
        throw std::logic_error("residual entry is negative beyond tolerance: lambda too small");
      v = 0.0;
    }
    r[c] = v;
    sum += v;
  }
  if (sum <= 0.0) throw std::logic_error("residual law has no mass");
  for (double& v : r) v /= sum;
  return CylinderLaw(src.alphabet_size(), conditional.horizon(), std::move(r));
}

}  // namespace

CylinderLaw residual_distribution(const MarkovSource& src, const Word& prefix, int tau, int T,
                                  const EnumerationCaps& caps) {
  const double lambda = psi_markov(src, tau);
  const CylinderLaw marginal = marginal_law(src, T, caps);
  if (lambda < 1e-12) {
    if (cylinder_probability(src, prefix) == 0.0)
      fail(Errc::zero_probability_prefix, "conditioning prefix has probability zero");
    return marginal;
  }
  const CylinderLaw cond = conditional_law(src, prefix, tau, T, caps);
  return residual_from(src, marginal, cond, lambda);
}

std::vector<DecompositionReport> verify_decomposition(const MarkovSource& src, int t, int tau,
                                                      int T, const EnumerationCaps& caps) {
  if (t < 1 || T < 1 || tau < 0) fail(Errc::config, "need t >= 1, T >= 1, tau >= 0");
  const double lambda = psi_markov(src, tau);
  const CylinderLaw marginal = marginal_law(src, T, caps);
  const long prefixes = ipow_checked(src.alphabet_size(), t, caps.max_states, Errc::cap_exceeded,
                                     "|X|^t exceeds the enumeration cap");
  CylinderLaw codec(src.alphabet_size(), t, std::vector<double>(prefixes, 0.0));

  std::vector<DecompositionReport> reports;
  reports.reserve(prefixes);
  for (long c = 0; c < prefixes; ++c) {
    Word prefix = codec.decode(c);
    const double pp = cylinder_probability(src, prefix);
    if (pp == 0.0) {
      reports.push_back(DecompositionReport{t, tau, T, std::move(prefix), 0.0, lambda, 0.0, true,
                                            marginal, marginal, marginal});
      continue;
    }
    CylinderLaw cond = conditional_law(src, prefix, tau, T, caps);
    CylinderLaw residual = residual_from(src, marginal, cond, lambda);
    double err = 0.0;
    for (long b = 0; b < cond.size(); ++b) {
      const double rebuilt = (1.0 - lambda) * marginal.at(b) + lambda * residual.at(b);
      err = std::max(err, std::fabs(rebuilt - cond.at(b)));
    }
    reports.push_back(DecompositionReport{t, tau, T, std::move(prefix), pp, lambda, err, false,
                                          std::move(cond), marginal, std::move(residual)});
  }
  return reports;
}

CesaroReport ergodic_cesaro_check(const MarkovSource& src, const Word& a, const Word& b, int N,
                                  const EnumerationCaps& caps) {
  (void)caps;
  if (a.empty() || b.empty() || N < 1) fail(Errc::config, "need nonempty words and N >= 1");
  const int t = static_cast<int>(a.size());
  const int T = static_cast<int>(b.size());
  const double target = cylinder_probability(src, a) * cylinder_probability(src, b);
  double acc = 0.0;
  for (int tau = 0; tau < N; ++tau) {
    // Joint window [1, max(t, tau+T)]; overlapping constraints must agree.
    const int n = std::max(t, tau + T);
    std::vector<int> pattern(n, -1);
    bool consistent = true;
    for (int i = 0; i < t; ++i) pattern[i] = a[i];
    for (int i = 0; i < T && consistent; ++i) {
      int& slot = pattern[tau + i];
      if (slot >= 0 && slot != b[i]) consistent = false;
      slot = b[i];
    }
    if (!consistent) continue;
    acc += constrained_probability(src, pattern);
  }
  const double average = acc / N;
  return CesaroReport{average, target, std::fabs(average - target)};
}

BlockedPsi blocked_psi_comparison(const MarkovSource& src, int L, int tau,
                                  const EnumerationCaps& caps) {
  const double parent = psi_markov(src, tau);
  const MarkovSource blocked = block_process(src, L, caps);
  const double block = psi_markov(blocked, tau);
  return BlockedPsi{parent, block};
}

}  // namespace psilab
