#include "psilab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "psilab/mixing.hpp"

namespace psilab {

namespace {

// R_{X^T}(block_target) in bits (block units). block_target == 0 uses the
// exact entropy corner.
double rd_block_bits(const MarkovSource& src, int T, double block_target,
                     const DistortionMeasure& per_letter, const BAOptions& opt,
                     const EnumerationCaps& caps) {
  if (block_target == 0.0) {
    if (!per_letter.off_diagonal_positive())
      fail(Errc::zero_distortion_ambiguous,
           "D = 0 entropy path requires strictly positive off-diagonal distortion");
    return block_entropy_bits(src, T);
  }
  const CylinderLaw law = marginal_law(src, T, caps);
  return blahut_arimoto_block(law.probabilities(), per_letter, T, block_target, opt).rate_bits;
}

// Memoizes block RD values across a sweep; one entry per (T, target) pair.
class RdCache {
 public:
  RdCache(const MarkovSource& src, const DistortionMeasure& per_letter, const BAOptions& opt,
          const EnumerationCaps& caps)
      : src_(src), per_letter_(per_letter), opt_(opt), caps_(caps) {}

  double get(int T, double block_target) {
    const auto key = std::make_pair(T, block_target);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double v = rd_block_bits(src_, T, block_target, per_letter_, opt_, caps_);
    cache_.emplace(key, v);
    return v;
  }

 private:
  const MarkovSource& src_;
  const DistortionMeasure& per_letter_;
  BAOptions opt_;
  EnumerationCaps caps_;
  std::map<std::pair<int, double>, double> cache_;
};

BoundReport report_for(const MarkovSource& src, double D, int T, int tau, double beta, int proxy_T,
                       RdCache& cache) {
  if (D < 0.0) fail(Errc::config, "distortion must be >= 0");
  if (T < 1 || tau < 0 || !(beta >= 0.0)) fail(Errc::config, "need T >= 1, tau >= 0, beta >= 0");
  BoundReport rep;
  rep.T = T;
  rep.tau = tau;
  rep.beta = beta;
  rep.D = D;
  rep.lambda = psi_markov(src, tau);
  rep.proxy_T = proxy_T;
  if (rep.lambda + beta >= 1.0) {
    rep.feasible = false;
    return rep;
  }
  rep.feasible = true;
  const double keep = 1.0 - rep.lambda - beta;
  rep.Dprime = D / keep;
  rep.rd_block_bits = cache.get(T, (T + tau) * rep.Dprime);
  rep.R_bound_bits = keep / (T + tau) * rep.rd_block_bits;

  if (proxy_T >= 1) {
    const double r_same = cache.get(T, T * rep.Dprime);
    rep.proxy_bits = cache.get(proxy_T, proxy_T * rep.Dprime) / proxy_T;
    rep.T1 = -(rep.lambda + beta) / (T + tau) * rep.rd_block_bits;
    rep.T2 = (1.0 / (T + tau) - 1.0 / T) * rep.rd_block_bits;
    rep.T3 = (rep.rd_block_bits - r_same) / T;
    rep.T4 = r_same / T - rep.proxy_bits;
    rep.eps_T = std::fabs(rep.T2) + std::fabs(rep.T3) + std::fabs(rep.T4);
    rep.gap_bound = (rep.lambda + beta) * std::log2(src.alphabet_size()) + rep.eps_T;
    rep.gap_actual = std::fabs(rep.R_bound_bits - rep.proxy_bits);
  }
  return rep;
}

}  // namespace

GoodSlotCount good_slot_count(long k, double lambda, double beta) {
  if (k < 1) fail(Errc::config, "need k >= 1");
  if (!(lambda >= 0.0) || !(beta >= 0.0) || lambda + beta >= 1.0)
    fail(Errc::infeasible_parameters, "need lambda + beta < 1");
  GoodSlotCount out;
  // Nudged floor so representable parameters behave as exact rationals
  // (e.g. (1 - 0.16 - 0.04) * 10 must floor to 8, not 7).
  out.N = static_cast<long>(std::floor((1.0 - lambda - beta) * k + 1e-9)) + 1;
  if (out.N > k) {
    out.N = k;
    out.clamped = true;
  }
  out.fraction = static_cast<double>(out.N) / static_cast<double>(k);
  return out;
}

BoundReport achievable_rate(const MarkovSource& src, double D, int T, int tau, double beta,
                            const DistortionMeasure& per_letter, const BAOptions& opt,
                            const EnumerationCaps& caps) {
  RdCache cache(src, per_letter, opt, caps);
  BoundReport rep = report_for(src, D, T, tau, beta, /*proxy_T=*/0, cache);
  if (!rep.feasible) fail(Errc::infeasible_parameters, "lambda + beta >= 1");
  return rep;
}

BoundReport term_decomposition(const MarkovSource& src, double D, int T, int tau, double beta,
                               int proxy_T, const DistortionMeasure& per_letter,
                               const BAOptions& opt, const EnumerationCaps& caps) {
  if (proxy_T < 1) fail(Errc::config, "proxy_T must be >= 1");
  RdCache cache(src, per_letter, opt, caps);
  BoundReport rep = report_for(src, D, T, tau, beta, proxy_T, cache);
  if (!rep.feasible) fail(Errc::infeasible_parameters, "lambda + beta >= 1");
  return rep;
}

double convex_gap_bound(double K, double a, double a_prime) {
  if (!(K >= 0.0)) fail(Errc::bad_interval, "K must be >= 0");
  if (!(0.0 < a) || !(a <= a_prime)) fail(Errc::bad_interval, "need 0 < a <= a'");
  return K / a * (a_prime - a);
}

std::vector<BoundReport> convergence_sweep(const MarkovSource& src, double D,
                                           const std::vector<int>& T_list,
                                           const std::vector<int>& tau_list,
                                           const std::vector<double>& beta_list,
                                           const DistortionMeasure& per_letter,
                                           const BAOptions& opt, const EnumerationCaps& caps) {
  if (T_list.empty() || tau_list.empty() || beta_list.empty())
    fail(Errc::config, "sweep lists must be nonempty");
  const int proxy_T = *std::max_element(T_list.begin(), T_list.end());
  std::vector<int> Ts = T_list;
  std::vector<int> taus = tau_list;
  std::vector<double> betas = beta_list;
  std::sort(Ts.begin(), Ts.end());
  std::sort(taus.begin(), taus.end());
  std::sort(betas.begin(), betas.end());

  RdCache cache(src, per_letter, opt, caps);
  std::vector<BoundReport> rows;
  rows.reserve(Ts.size() * taus.size() * betas.size());
  for (int T : Ts)
    for (int tau : taus)
      for (double beta : betas) rows.push_back(report_for(src, D, T, tau, beta, proxy_T, cache));
  return rows;
}

}  // namespace psilab
