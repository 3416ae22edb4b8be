#pragma once

#include <span>
#include <string>
#include <vector>

#include "psilab/errors.hpp"

namespace psilab {

/// A word over the source alphabet, as symbol indices.
using Word = std::vector<int>;

/// Caps that keep brute-force enumerations desk-scale. Overridable per call.
struct EnumerationCaps {
  long max_states = 1L << 20;  // ceiling on |X|^n for materialized window laws
  int max_subset_atoms = 12;   // per-side atom budget for subset enumeration
};

/// base^exp with an overflow/cap guard.
long ipow_checked(int base, int exp, long cap, Errc code, const char* what);
long ipow(int base, int exp);

/// Dense probability law over X^n. Index = base-|X| encoding of the word,
/// first symbol most significant.
class CylinderLaw {
 public:
  CylinderLaw(int alphabet, int horizon, std::vector<double> probs);

  int alphabet() const { return alphabet_; }
  int horizon() const { return horizon_; }
  long size() const { return static_cast<long>(p_.size()); }
  double at(long code) const { return p_[code]; }
  double at(const Word& w) const { return p_[encode(w)]; }
  std::span<const double> probabilities() const { return p_; }

  long encode(std::span<const int> w) const;
  Word decode(long code) const;

  /// 0.5 * L1 distance.
  double total_variation(const CylinderLaw& other) const;
  /// Throws unless entries are >= -tol and the mass is 1 within tol.
  void validate(double tol = 1e-12) const;

 private:
  int alphabet_;
  int horizon_;
  std::vector<double> p_;
};

struct ClassificationReport {
  bool irreducible = false;
  bool aperiodic = false;
  int period = 1;
  int recurrent_classes = 0;
};

/// Finite-state stationary source of a given Markov order. Transition rows
/// are indexed by the base-|X| code of the length-m history; the stationary
/// law lives on histories and is solved (or supplied) at construction.
class MarkovSource {
 public:
  static MarkovSource first_order(std::vector<std::string> symbols,
                                  const std::vector<std::vector<double>>& rows);
  static MarkovSource order_m(std::vector<std::string> symbols, int order,
                              const std::vector<std::vector<double>>& history_rows,
                              const EnumerationCaps& caps = {});

  int alphabet_size() const { return alphabet_; }
  int order() const { return order_; }
  long history_count() const { return hist_count_; }
  const std::vector<std::string>& symbols() const { return symbols_; }

  double transition(long history_code, int next) const {
    return transition_[history_code * alphabet_ + next];
  }
  std::span<const double> transition_row(long history_code) const {
    return {transition_.data() + history_code * alphabet_, static_cast<size_t>(alphabet_)};
  }
  /// Law of X_1^m (the stationary law on histories).
  const std::vector<double>& stationary_histories() const { return stationary_; }
  /// Marginal of the stationary history law on its first |w| coordinates, |w| <= m.
  double prefix_marginal(std::span<const int> w) const;

  /// Sequential-generation state: the last min(m, consumed) symbols.
  struct Context {
    int length = 0;
    long code = 0;
  };
  Context context_of(std::span<const int> word) const;
  Context advance(Context ctx, int symbol) const;
  /// P(next = symbol | context). Contexts shorter than the order condition on
  /// the stationary prefix marginals.
  double step_probability(Context ctx, int symbol) const;
  void step_distribution(Context ctx, std::span<double> out) const;

 private:
  MarkovSource(std::vector<std::string> symbols, int order, std::vector<double> transition,
               std::vector<double> stationary);

  int alphabet_;
  int order_;
  long hist_count_;
  long hist_shift_;  // |X|^(m-1), used when advancing a full context
  std::vector<std::string> symbols_;
  std::vector<double> transition_;  // hist_count_ x alphabet_
  std::vector<double> stationary_;  // over histories
  std::vector<std::vector<double>> prefix_marginals_;  // [j] = law of X_1^j, j = 0..m

  friend MarkovSource block_process(const MarkovSource&, int, const EnumerationCaps&);
};

/// Unique stationary law of a row-stochastic matrix, by linear solve of
/// pi P = pi with normalization. Throws NotIrreducible when more than one
/// recurrent class exists (the stationary law is then not unique).
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition);

/// Graph-theoretic classification of a transition table: strong connectivity
/// and gcd of cycle lengths (over recurrent classes).
ClassificationReport classify_transition(const std::vector<std::vector<double>>& transition);
/// Same, applied to the induced first-order chain on histories.
ClassificationReport check_irreducible_aperiodic(const MarkovSource& src);

/// Stationary law of the T-window X_1^T.
CylinderLaw marginal_law(const MarkovSource& src, int T, const EnumerationCaps& caps = {});

/// Law of the T-window that starts `gap` positions after the prefix:
/// P(X_{t+gap+1}^{t+gap+T} = . | X_1^t = prefix).
CylinderLaw conditional_law(const MarkovSource& src, const Word& prefix, int gap, int T,
                            const EnumerationCaps& caps = {});

/// P(X_1^n = word); zero is allowed.
double cylinder_probability(const MarkovSource& src, std::span<const int> word);

/// P(the window X_1^n matches `pattern`), where -1 entries are unconstrained.
double constrained_probability(const MarkovSource& src, std::span<const int> pattern);

/// The process of L-blocks Z_t = X_{(t-1)L+1}^{tL} as a source on X^L.
/// First-order whenever L >= order.
MarkovSource block_process(const MarkovSource& src, int L, const EnumerationCaps& caps = {});

/// H(X_1^T) in bits, by the chain rule (exact, no enumeration).
double block_entropy_bits(const MarkovSource& src, int T);

}  // namespace psilab
