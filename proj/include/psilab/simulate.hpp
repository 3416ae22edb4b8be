#pragma once

#include <cstdint>
#include <vector>

#include "psilab/chain.hpp"

namespace psilab {

/// Half-open index range [begin, end) into a generated sequence.
struct SlotRange {
  int begin = 0;
  int end = 0;
  int width() const { return end - begin; }
};

/// Alternating T-wide A slots and tau-wide B slots, k pairs, n = (T+tau)k.
struct SlotSchedule {
  int T = 0;
  int tau = 0;
  int k = 0;
  int n = 0;
  std::vector<SlotRange> a;
  std::vector<SlotRange> b;
};

struct SlotFlags {
  std::vector<std::uint8_t> flags;  // flags[0] == 1 always
  double lambda = 0.0;
};

SlotSchedule build_schedule(int T, int tau, int k);

/// C_1 = 1; C_2..C_k i.i.d. with P(1) = 1 - lambda. Deterministic in seed.
SlotFlags draw_flags(int k, double lambda, std::uint64_t seed);

/// One realization of the slot-based sampler. Generation order is
/// A_1, A_2, B_1, A_3, B_2, ..., A_k, B_{k-1}, B_k: good A slots draw the
/// unconditional T-window law, bad A slots draw the residual law given the
/// contiguous prefix (gap = the unfilled B slot), and B slots are bridge
/// fills conditioned on both flanks. flags.lambda must equal psi(tau).
Word simulate_sequence(const MarkovSource& src, const SlotSchedule& sched, const SlotFlags& flags,
                       std::uint64_t seed, const EnumerationCaps& caps = {});

/// The law of the sampler output for a fixed flag vector, marginalized
/// analytically over all draws.
CylinderLaw exact_simulated_law_given_flags(const MarkovSource& src, const SlotSchedule& sched,
                                            const SlotFlags& flags, const EnumerationCaps& caps = {});

/// The law of the sampler output with flags marginalized out. Equals the
/// stationary n-window law of the source; tests assert TV <= 1e-10.
CylinderLaw exact_simulated_law(const MarkovSource& src, const SlotSchedule& sched,
                                const EnumerationCaps& caps = {});

/// M independent sampler outputs sharing one flag vector.
std::vector<Word> generate_codebook(const MarkovSource& src, const SlotSchedule& sched,
                                    const SlotFlags& flags, long M, std::uint64_t seed,
                                    const EnumerationCaps& caps = {}, bool parallel = true);

}  // namespace psilab
