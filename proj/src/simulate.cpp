#include "psilab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "psilab/mixing.hpp"
#include "psilab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psilab {

SlotSchedule build_schedule(int T, int tau, int k) {
  if (T < 1 || tau < 0 || k < 1) fail(Errc::config, "need T >= 1, tau >= 0, k >= 1");
  SlotSchedule s;
  s.T = T;
  s.tau = tau;
  s.k = k;
  s.n = (T + tau) * k;
  s.a.reserve(k);
  s.b.reserve(k);
  for (int i = 0; i < k; ++i) {
    const int start = i * (T + tau);
    s.a.push_back({start, start + T});
    s.b.push_back({start + T, start + T + tau});
  }
  return s;
}

SlotFlags draw_flags(int k, double lambda, std::uint64_t seed) {
  if (k < 1) fail(Errc::config, "need k >= 1");
  if (!(lambda >= 0.0) || lambda > 1.0)
    fail(Errc::infeasible_parameters, "flag probability requires 0 <= lambda <= 1");
  SlotFlags f;
  f.lambda = lambda;
  f.flags.assign(k, 1);
  Rng rng = Rng::derive(seed, {0xF1A65ULL});
  for (int i = 1; i < k; ++i) f.flags[i] = rng.bernoulli(1.0 - lambda) ? 1 : 0;
  return f;
}

namespace {

struct ContextKey {
  int length;
  long code;
  bool operator<(const ContextKey& o) const {
    return length != o.length ? length < o.length : code < o.code;
  }
};

// Sampler state for one schedule: the T-window law plus residual laws cached
// per conditioning context (the conditional depends on the prefix only
// through its trailing context).
class SlotSampler {
 public:
  SlotSampler(const MarkovSource& src, const SlotSchedule& sched, double lambda,
              const EnumerationCaps& caps)
      : src_(src),
        sched_(sched),
        lambda_(lambda),
        caps_(caps),
        window_(marginal_law(src, sched.T, caps)) {}

  const CylinderLaw& window_law() const { return window_; }

  const CylinderLaw& residual_for(std::span<const int> prefix) {
    const MarkovSource::Context ctx = src_.context_of(prefix);
    const ContextKey key{ctx.length, ctx.code};
    auto it = residual_cache_.find(key);
    if (it != residual_cache_.end()) return it->second;
    Word w(prefix.begin(), prefix.end());
    CylinderLaw res = residual_distribution(src_, w, sched_.tau, sched_.T, caps_);
    return residual_cache_.emplace(key, std::move(res)).first->second;
  }

 private:
  const MarkovSource& src_;
  const SlotSchedule& sched_;
  double lambda_;
  EnumerationCaps caps_;
  CylinderLaw window_;
  std::map<ContextKey, CylinderLaw> residual_cache_;
};

void place_window(const CylinderLaw& law, long code, std::span<int> out) {
  Word w = law.decode(code);
  std::copy(w.begin(), w.end(), out.begin());
}

double right_block_probability(const MarkovSource& src, MarkovSource::Context ctx,
                               std::span<const int> right) {
  double p = 1.0;
  for (int s : right) {
    p *= src.step_probability(ctx, s);
    if (p == 0.0) return 0.0;
    ctx = src.advance(ctx, s);
  }
  return p;
}

// Backward bridge weight: probability of the fixed right block given the
// context, with `remaining` free positions still to fill in between.
double bridge_beta(const MarkovSource& src, MarkovSource::Context ctx, int remaining,
                   std::span<const int> right, std::map<std::pair<int, ContextKey>, double>& memo) {
  if (remaining == 0) return right_block_probability(src, ctx, right);
  const std::pair<int, ContextKey> key{remaining, {ctx.length, ctx.code}};
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  double acc = 0.0;
  for (int y = 0; y < src.alphabet_size(); ++y) {
    const double p = src.step_probability(ctx, y);
    if (p == 0.0) continue;
    acc += p * bridge_beta(src, src.advance(ctx, y), remaining - 1, right, memo);
  }
  memo.emplace(key, acc);
  return acc;
}

void fill_bridge(const MarkovSource& src, std::span<int> fill, MarkovSource::Context ctx,
                 std::span<const int> right, Rng& rng) {
  std::map<std::pair<int, ContextKey>, double> memo;
  const int S = src.alphabet_size();
  std::vector<double> weights(S);
  for (int j = 0; j < static_cast<int>(fill.size()); ++j) {
    const int remaining = static_cast<int>(fill.size()) - j - 1;
    double total = 0.0;
    for (int y = 0; y < S; ++y) {
      const double p = src.step_probability(ctx, y);
      weights[y] =
          p == 0.0 ? 0.0 : p * bridge_beta(src, src.advance(ctx, y), remaining, right, memo);
      total += weights[y];
    }
    if (total <= 0.0) throw std::logic_error("bridge fill has no admissible symbol");
    for (double& w : weights) w /= total;
    const int y = rng.sample(weights);
    fill[j] = y;
    ctx = src.advance(ctx, y);
  }
}

void fill_forward(const MarkovSource& src, std::span<int> fill, MarkovSource::Context ctx,
                  Rng& rng) {
  std::vector<double> weights(src.alphabet_size());
  for (int j = 0; j < static_cast<int>(fill.size()); ++j) {
    src.step_distribution(ctx, weights);
    const int y = rng.sample(weights);
    fill[j] = y;
    ctx = src.advance(ctx, y);
  }
}

// One realization. RNG streams are derived per generation-order slot index,
// so a shared flag vector plus distinct seeds yields independent codewords.
Word simulate_with(SlotSampler& sampler, const MarkovSource& src, const SlotSchedule& sched,
                   const SlotFlags& flags, std::uint64_t seed) {
  Word x(sched.n, -1);
  long stream = 0;
  auto slot_rng = [&]() { return Rng::derive(seed, {static_cast<std::uint64_t>(stream++)}); };

  {
    Rng rng = slot_rng();
    const long code = rng.sample(sampler.window_law().probabilities());
    place_window(sampler.window_law(), code, std::span<int>(x).subspan(sched.a[0].begin, sched.T));
  }
  for (int i = 1; i < sched.k; ++i) {
    {
      // A slot: conditioned on the contiguous prefix through the previous A
      // slot; the B gap in between is still unfilled.
      Rng rng = slot_rng();
      const std::span<const int> prefix(x.data(), static_cast<size_t>(sched.a[i - 1].end));
      const CylinderLaw& law = flags.flags[i] ? sampler.window_law() : sampler.residual_for(prefix);
      const long code = rng.sample(law.probabilities());
      place_window(law, code, std::span<int>(x).subspan(sched.a[i].begin, sched.T));
    }
    if (sched.tau > 0) {
      // B slot: bridge between the prefix and the block just placed.
      Rng rng = slot_rng();
      const MarkovSource::Context ctx =
          src.context_of(std::span<const int>(x.data(), static_cast<size_t>(sched.a[i - 1].end)));
      fill_bridge(src, std::span<int>(x).subspan(sched.b[i - 1].begin, sched.tau), ctx,
                  std::span<const int>(x.data() + sched.a[i].begin, static_cast<size_t>(sched.T)),
                  rng);
    }
  }
  if (sched.tau > 0) {
    // Trailing B slot: forward fill from everything generated.
    Rng rng = slot_rng();
    const MarkovSource::Context ctx = src.context_of(
        std::span<const int>(x.data(), static_cast<size_t>(sched.b[sched.k - 1].begin)));
    fill_forward(src, std::span<int>(x).subspan(sched.b[sched.k - 1].begin, sched.tau), ctx, rng);
  }
  return x;
}

void check_flags(const SlotSchedule& sched, const SlotFlags& flags, double lambda) {
  if (static_cast<int>(flags.flags.size()) != sched.k)
    fail(Errc::config_mismatch, "flag vector length does not match the schedule");
  if (flags.flags[0] != 1) fail(Errc::config_mismatch, "the first slot flag must be 1");
  if (std::fabs(flags.lambda - lambda) > 1e-12)
    fail(Errc::inconsistent_lambda, "flag lambda does not match psi(tau) of the source");
  if (lambda > 1.0)
    fail(Errc::infeasible_parameters, "psi(tau) > 1: the mixture is not samplable at this gap");
}

}  // namespace

Word simulate_sequence(const MarkovSource& src, const SlotSchedule& sched, const SlotFlags& flags,
                       std::uint64_t seed, const EnumerationCaps& caps) {
  const double lambda = psi_markov(src, sched.tau);
  check_flags(sched, flags, lambda);
  SlotSampler sampler(src, sched, lambda, caps);
  return simulate_with(sampler, src, sched, flags, seed);
}

std::vector<Word> generate_codebook(const MarkovSource& src, const SlotSchedule& sched,
                                    const SlotFlags& flags, long M, std::uint64_t seed,
                                    const EnumerationCaps& caps, bool parallel) {
  (void)parallel;
  if (M < 1) fail(Errc::config, "need M >= 1");
  const double lambda = psi_markov(src, sched.tau);
  check_flags(sched, flags, lambda);
  std::vector<Word> book(M);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (long m = 0; m < M; ++m) {
    SlotSampler sampler(src, sched, lambda, caps);
    book[m] = simulate_with(sampler, src, sched, flags,
                            Rng::mix(seed, 0xC0DEULL + static_cast<std::uint64_t>(m)));
  }
  return book;
}

namespace {

// Probability that the sampler emits `word` under a fixed flag vector: the
// product of per-slot conditionals in generation order. B factors are ratios
// of exact window probabilities (fill given both flanks).
double word_probability_given_flags(const MarkovSource& src, const SlotSchedule& sched,
                                    const SlotFlags& flags, SlotSampler& sampler,
                                    std::span<const int> word) {
  const int T = sched.T;
  double prob = sampler.window_law().at(
      sampler.window_law().encode(std::span<const int>(word.data() + sched.a[0].begin, T)));
  if (prob == 0.0) return 0.0;

  for (int i = 1; i < sched.k && prob > 0.0; ++i) {
    const std::span<const int> prefix(word.data(), static_cast<size_t>(sched.a[i - 1].end));
    const std::span<const int> a_block(word.data() + sched.a[i].begin, static_cast<size_t>(T));
    const CylinderLaw& law = flags.flags[i] ? sampler.window_law() : sampler.residual_for(prefix);
    prob *= law.at(law.encode(a_block));
    if (prob == 0.0) return 0.0;

    if (sched.tau > 0) {
      const int upto = sched.a[i].end;
      const double numer = cylinder_probability(src, std::span<const int>(word.data(), upto));
      std::vector<int> pattern(word.begin(), word.begin() + upto);
      for (int p = sched.b[i - 1].begin; p < sched.b[i - 1].end; ++p) pattern[p] = -1;
      const double denom = constrained_probability(src, pattern);
      prob *= denom == 0.0 ? 0.0 : numer / denom;
    }
  }
  if (prob > 0.0 && sched.tau > 0) {
    const double full = cylinder_probability(src, word);
    const double head =
        cylinder_probability(src, std::span<const int>(word.data(), sched.b[sched.k - 1].begin));
    prob *= head == 0.0 ? 0.0 : full / head;
  }
  return prob;
}

}  // namespace

CylinderLaw exact_simulated_law_given_flags(const MarkovSource& src, const SlotSchedule& sched,
                                            const SlotFlags& flags, const EnumerationCaps& caps) {
  const double lambda = psi_markov(src, sched.tau);
  check_flags(sched, flags, lambda);
  const long total = ipow_checked(src.alphabet_size(), sched.n, caps.max_states, Errc::cap_exceeded,
                                  "|X|^n exceeds the enumeration cap");
  SlotSampler sampler(src, sched, lambda, caps);
  std::vector<double> law(total);
  CylinderLaw codec(src.alphabet_size(), sched.n, std::vector<double>(total, 0.0));
  for (long c = 0; c < total; ++c) {
    Word w = codec.decode(c);
    law[c] = word_probability_given_flags(src, sched, flags, sampler, w);
  }
  return CylinderLaw(src.alphabet_size(), sched.n, std::move(law));
}

CylinderLaw exact_simulated_law(const MarkovSource& src, const SlotSchedule& sched,
                                const EnumerationCaps& caps) {
  const double lambda = psi_markov(src, sched.tau);
  if (lambda > 1.0)
    fail(Errc::infeasible_parameters, "psi(tau) > 1: the mixture is not samplable at this gap");
  const long total = ipow_checked(src.alphabet_size(), sched.n, caps.max_states, Errc::cap_exceeded,
                                  "|X|^n exceeds the enumeration cap");
  if (sched.k > 20) fail(Errc::cap_exceeded, "too many flag vectors to marginalize");
  const long flag_vectors = 1L << (sched.k - 1);

  std::vector<double> law(total, 0.0);
  SlotSampler sampler(src, sched, lambda, caps);
  CylinderLaw codec(src.alphabet_size(), sched.n, std::vector<double>(total, 0.0));
  for (long fv = 0; fv < flag_vectors; ++fv) {
    SlotFlags flags;
    flags.lambda = lambda;
    flags.flags.assign(sched.k, 1);
    double weight = 1.0;
    for (int i = 1; i < sched.k; ++i) {
      const bool good = fv >> (i - 1) & 1;
      flags.flags[i] = good ? 1 : 0;
      weight *= good ? 1.0 - lambda : lambda;
    }
    if (weight == 0.0) continue;
    for (long c = 0; c < total; ++c) {
      Word w = codec.decode(c);
      const double p = word_probability_given_flags(src, sched, flags, sampler, w);
      if (p != 0.0) law[c] += weight * p;
    }
  }
  return CylinderLaw(src.alphabet_size(), sched.n, std::move(law));
}

}  // namespace psilab
