#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psilab/chain.hpp"
#include "psilab/ratedist.hpp"
#include "psilab/simulate.hpp"

namespace psilab {

/// Per-letter DMC c(y|x); the n-fold use is the product channel.
class MemorylessChannel {
 public:
  MemorylessChannel(int nx, int ny, std::vector<double> rows);
  static MemorylessChannel bsc(double crossover);
  static MemorylessChannel noiseless(int n);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::span<const double> row(int x) const { return {rows_.data() + static_cast<size_t>(x) * ny_, static_cast<size_t>(ny_)}; }
  int transmit(int x, class Rng& rng) const;

 private:
  int nx_, ny_;
  std::vector<double> rows_;
};

struct DirectCheckResult {
  long trials = 0;
  long exceed = 0;
  double omega = 0.0;  // empirical P((1/n) d^n(X^n, Y^n) > D)
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Monte Carlo estimate of the end-to-end excess-distortion frequency of a
/// channel fed directly with the source.
DirectCheckResult direct_communication_check(const MarkovSource& src, const MemorylessChannel& chan,
                                             const DistortionMeasure& d, double D, int n,
                                             long trials, std::uint64_t seed, bool parallel = true);

enum class TrialOutcome { correct, erasure, confusion };

/// Threshold decoding of one transmitted codeword against an explicit
/// codebook: accept the unique codeword whose average block distortion with
/// the channel output over the first `required_good` good A slots is at most
/// per_slot_threshold. Fewer good slots than required is an erasure. The
/// min_distortion option decodes to the distortion minimizer instead.
TrialOutcome run_trial(const MemorylessChannel& chan, const SlotSchedule& sched,
                       const SlotFlags& flags, const std::vector<Word>& codebook, int message,
                       double per_slot_threshold, long required_good, const DistortionMeasure& d,
                       std::uint64_t seed, bool min_distortion = false);

/// P(a fresh random codeword meets the total good-slot distortion threshold
/// against channel output y), computed exactly from the T-window law by
/// per-slot value convolution. Used to treat codebooks too large to
/// materialize: the number of threshold-passing impostors is then drawn from
/// its exact ensemble law.
double random_codeword_pass_probability(const CylinderLaw& window_law,
                                        const DistortionMeasure& per_letter,
                                        const std::vector<Word>& good_slot_outputs,
                                        double total_threshold);

struct CodesimConfig {
  int T = 1;
  int tau = 0;
  double beta = 0.1;
  double D = 0.0;            // per-letter distortion the channel must meet
  double rate_bits = 0.5;    // bits per channel use
  long trials = 1000;
  long batch = 100;          // codebook/flag redraw cadence
  long codebook_cap = 1L << 16;  // explicit decoding above this size switches to ensemble accounting
  bool min_distortion = false;
  std::uint64_t seed = 1;
};

struct ErrorCurveRow {
  long k = 0;
  long n = 0;
  long N_good = 0;  // required good slots
  long trials = 0;
  long correct = 0;
  long erasure = 0;
  long confusion = 0;
  long own_excess = 0;  // transmitted codeword's own good-slot distortion above threshold
  double error_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Decoding error rate versus k at a fixed rate, with Wilson 95% intervals.
std::vector<ErrorCurveRow> error_curve(const MarkovSource& src, const MemorylessChannel& chan,
                                       const DistortionMeasure& per_letter,
                                       const CodesimConfig& config, const std::vector<long>& k_list,
                                       bool parallel = true, const EnumerationCaps& caps = {});

/// Wilson score interval for a binomial proportion at 95% confidence.
void wilson_interval(long successes, long trials, double& low, double& high);

}  // namespace psilab
