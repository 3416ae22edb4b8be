#include "psilab/codesim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "psilab/bounds.hpp"
#include "psilab/mixing.hpp"
#include "psilab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psilab {

MemorylessChannel::MemorylessChannel(int nx, int ny, std::vector<double> rows)
    : nx_(nx), ny_(ny), rows_(std::move(rows)) {
  if (nx_ < 1 || ny_ < 1) fail(Errc::config, "channel must be nonempty");
  if (static_cast<long>(rows_.size()) != static_cast<long>(nx_) * ny_)
    fail(Errc::config, "channel table size mismatch");
  for (int x = 0; x < nx_; ++x) {
    double sum = 0.0;
    for (int y = 0; y < ny_; ++y) {
      const double v = rows_[static_cast<size_t>(x) * ny_ + y];
      if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::config, "channel entries must be finite and >= 0");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12) fail(Errc::config, "channel row does not sum to 1");
  }
}

MemorylessChannel MemorylessChannel::bsc(double crossover) {
  if (!(crossover >= 0.0) || crossover > 1.0) fail(Errc::config, "crossover must be in [0, 1]");
  return MemorylessChannel(2, 2, {1.0 - crossover, crossover, crossover, 1.0 - crossover});
}

MemorylessChannel MemorylessChannel::noiseless(int n) {
  std::vector<double> rows(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) rows[static_cast<size_t>(i) * n + i] = 1.0;
  return MemorylessChannel(n, n, std::move(rows));
}

int MemorylessChannel::transmit(int x, Rng& rng) const { return rng.sample(row(x)); }

void wilson_interval(long successes, long trials, double& low, double& high) {
  if (trials <= 0) {
    low = high = 0.0;
    return;
  }
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = phat + z * z / (2.0 * n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n));
  low = successes == 0 ? 0.0 : std::max(0.0, (center - half) / denom);
  high = successes == trials ? 1.0 : std::min(1.0, (center + half) / denom);
}

DirectCheckResult direct_communication_check(const MarkovSource& src, const MemorylessChannel& chan,
                                             const DistortionMeasure& d, double D, int n,
                                             long trials, std::uint64_t seed, bool parallel) {
  (void)parallel;
  if (n < 1 || trials < 1) fail(Errc::config, "need n >= 1 and trials >= 1");
  if (chan.nx() != src.alphabet_size() || d.nx() != src.alphabet_size() || d.ny() != chan.ny())
    fail(Errc::config_mismatch, "source, channel and distortion shapes do not line up");
  long exceed = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : exceed) if (parallel)
#endif
  for (long t = 0; t < trials; ++t) {
    Rng rng = Rng::derive(seed, {0xD13EC7ULL, static_cast<std::uint64_t>(t)});
    MarkovSource::Context ctx;
    std::vector<double> step(src.alphabet_size());
    double dist = 0.0;
    for (int i = 0; i < n; ++i) {
      src.step_distribution(ctx, step);
      const int x = rng.sample(step);
      ctx = src.advance(ctx, x);
      const int y = chan.transmit(x, rng);
      dist += d.at(x, y);
    }
    if (dist / n > D) ++exceed;
  }
  DirectCheckResult res;
  res.trials = trials;
  res.exceed = exceed;
  res.omega = static_cast<double>(exceed) / static_cast<double>(trials);
  wilson_interval(exceed, trials, res.ci_low, res.ci_high);
  return res;
}

namespace {

std::vector<int> good_slot_indices(const SlotFlags& flags) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(flags.flags.size()); ++i)
    if (flags.flags[i]) idx.push_back(i);
  return idx;
}

}  // namespace

TrialOutcome run_trial(const MemorylessChannel& chan, const SlotSchedule& sched,
                       const SlotFlags& flags, const std::vector<Word>& codebook, int message,
                       double per_slot_threshold, long required_good, const DistortionMeasure& d,
                       std::uint64_t seed, bool min_distortion) {
  if (codebook.empty() || message < 0 || message >= static_cast<int>(codebook.size()))
    fail(Errc::config_mismatch, "message index outside the codebook");
  for (const Word& w : codebook)
    if (static_cast<int>(w.size()) != sched.n) fail(Errc::config_mismatch, "codeword length != n");
  const std::vector<int> good = good_slot_indices(flags);
  if (static_cast<long>(good.size()) < required_good) return TrialOutcome::erasure;

  const Word& sent = codebook[message];
  Rng rng = Rng::derive(seed, {0xC4A27ULL});
  Word received(sched.n);
  for (int i = 0; i < sched.n; ++i) received[i] = chan.transmit(sent[i], rng);

  const double tol = 1e-12 * (1.0 + std::fabs(per_slot_threshold));
  int best = -1;
  double best_dist = 0.0;
  int accepted = 0, accepted_idx = -1;
  for (int w = 0; w < static_cast<int>(codebook.size()); ++w) {
    double total = 0.0;
    for (long g = 0; g < required_good; ++g) {
      const SlotRange& r = sched.a[good[g]];
      total += block_distortion(
          d, std::span<const int>(codebook[w].data() + r.begin, static_cast<size_t>(sched.T)),
          std::span<const int>(received.data() + r.begin, static_cast<size_t>(sched.T)));
    }
    const double avg = total / static_cast<double>(required_good);
    if (best < 0 || avg < best_dist) {
      best = w;
      best_dist = avg;
    }
    if (avg <= per_slot_threshold + tol) {
      ++accepted;
      accepted_idx = w;
    }
  }
  if (min_distortion) return best == message ? TrialOutcome::correct : TrialOutcome::confusion;
  if (accepted == 0) return TrialOutcome::erasure;
  if (accepted == 1) return accepted_idx == message ? TrialOutcome::correct : TrialOutcome::confusion;
  return TrialOutcome::confusion;
}

namespace {

// Sorted (value, probability) support of a discrete distortion distribution.
// Mass above the threshold is collapsed into one saturating bucket, which
// keeps convolution supports small without changing the tail probability.
struct ValuePmf {
  std::vector<double> value;
  std::vector<double> prob;
};

constexpr double kValueMergeTol = 1e-9;

ValuePmf saturate(const std::map<double, double>& acc, double threshold) {
  ValuePmf out;
  double overflow = 0.0;
  for (const auto& [v, p] : acc) {
    if (v > threshold + kValueMergeTol) {
      overflow += p;
      continue;
    }
    if (!out.value.empty() && v - out.value.back() < kValueMergeTol) {
      out.prob.back() += p;
    } else {
      out.value.push_back(v);
      out.prob.push_back(p);
    }
  }
  if (overflow > 0.0) {
    out.value.push_back(threshold + 1.0);
    out.prob.push_back(overflow);
  }
  return out;
}

ValuePmf convolve(const ValuePmf& a, const ValuePmf& b, double threshold) {
  std::map<double, double> acc;
  for (size_t i = 0; i < a.value.size(); ++i)
    for (size_t j = 0; j < b.value.size(); ++j) {
      const double v = std::min(a.value[i] + b.value[j], threshold + 1.0);
      acc[v] += a.prob[i] * b.prob[j];
    }
  return saturate(acc, threshold);
}

// Number of impostors passing the threshold: Binomial(M-1, q) by inversion
// while M-1 is exactly representable, else Poisson((M-1) q), whose distance
// from the binomial is O((M-1) q^2) and negligible in that regime.
long sample_impostor_count(double rate_exponent, double q, Rng& rng) {
  if (q <= 0.0) return 0;
  if (q >= 1.0 - 1e-12) return 1000000;
  const double mu = std::exp2(rate_exponent) * q;
  if (mu > 30.0) return 1000000;
  const double u = rng.next_double();
  long j = 0;
  if (rate_exponent <= 53.0) {
    const double n = std::exp2(rate_exponent) - 1.0;
    double p = std::exp(n * std::log1p(-q));
    double cum = p;
    while (u >= cum && j < static_cast<long>(n)) {
      p *= (n - j) / (j + 1.0) * (q / (1.0 - q));
      ++j;
      cum += p;
    }
    return j;
  }
  double p = std::exp(-mu), cum = p;
  while (u >= cum && j < 10000) {
    ++j;
    p *= mu / static_cast<double>(j);
    cum += p;
  }
  return j;
}

}  // namespace

double random_codeword_pass_probability(const CylinderLaw& window_law,
                                        const DistortionMeasure& per_letter,
                                        const std::vector<Word>& good_slot_outputs,
                                        double total_threshold) {
  std::map<long, ValuePmf> slot_cache;
  ValuePmf total{{0.0}, {1.0}};
  for (const Word& y : good_slot_outputs) {
    const long code = window_law.encode(y);
    auto it = slot_cache.find(code);
    if (it == slot_cache.end()) {
      std::map<double, double> acc;
      for (long s = 0; s < window_law.size(); ++s) {
        const double p = window_law.at(s);
        if (p == 0.0) continue;
        acc[block_distortion(per_letter, window_law.decode(s), y)] += p;
      }
      it = slot_cache.emplace(code, saturate(acc, total_threshold)).first;
    }
    total = convolve(total, it->second, total_threshold);
    if (total.value.size() > 200000) fail(Errc::cap_exceeded, "distortion support too large to convolve");
  }
  double pass = 0.0;
  const double tol = 1e-12 * (1.0 + std::fabs(total_threshold));
  for (size_t i = 0; i < total.value.size(); ++i)
    if (total.value[i] <= total_threshold + tol) pass += total.prob[i];
  return std::min(1.0, pass);
}

std::vector<ErrorCurveRow> error_curve(const MarkovSource& src, const MemorylessChannel& chan,
                                       const DistortionMeasure& per_letter,
                                       const CodesimConfig& config, const std::vector<long>& k_list,
                                       bool parallel, const EnumerationCaps& caps) {
  (void)parallel;
  if (config.trials < 1 || config.batch < 1) fail(Errc::config, "need trials >= 1 and batch >= 1");
  if (chan.nx() != src.alphabet_size())
    fail(Errc::config_mismatch, "channel input alphabet does not match the source");
  const double lambda = psi_markov(src, config.tau);
  if (lambda + config.beta >= 1.0) fail(Errc::infeasible_parameters, "lambda + beta >= 1");
  const double per_slot_threshold =
      (config.T + config.tau) * config.D / (1.0 - lambda - config.beta);

  std::vector<ErrorCurveRow> rows;
  for (long k : k_list) {
    const SlotSchedule sched = build_schedule(config.T, config.tau, static_cast<int>(k));
    const GoodSlotCount gsc = good_slot_count(k, lambda, config.beta);
    const long exponent = static_cast<long>(std::floor(sched.n * config.rate_bits + 1e-9));
    if (exponent > 1000) fail(Errc::cap_exceeded, "nR too large for ensemble accounting");
    const bool literal = exponent <= 62 && (1L << exponent) <= config.codebook_cap;
    const long M_literal = literal ? (1L << exponent) : 0;
    const double total_threshold = per_slot_threshold * static_cast<double>(gsc.N);

    const CylinderLaw window = marginal_law(src, config.T, caps);
    long tally_correct = 0, tally_erasure = 0, tally_confusion = 0, tally_excess = 0;
    const long batches = (config.trials + config.batch - 1) / config.batch;
    for (long batch = 0; batch < batches; ++batch) {
      const long batch_trials = std::min(config.batch, config.trials - batch * config.batch);
      const SlotFlags flags = draw_flags(
          static_cast<int>(k), lambda,
          Rng::mix(config.seed, Rng::mix(static_cast<std::uint64_t>(k),
                                         0xF1A6000ULL + static_cast<std::uint64_t>(batch))));
      const std::vector<int> good = good_slot_indices(flags);
      const bool enough_good = static_cast<long>(good.size()) >= gsc.N;

      long corr = 0, eras = 0, conf = 0, exc = 0;
      if (literal) {
        const std::vector<Word> codebook = generate_codebook(
            src, sched, flags, M_literal,
            Rng::mix(config.seed, Rng::mix(static_cast<std::uint64_t>(k),
                                           0xB00C000ULL + static_cast<std::uint64_t>(batch))),
            caps, parallel);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : corr, eras, conf, exc) if (parallel)
#endif
        for (long t = 0; t < batch_trials; ++t) {
          Rng trial_rng = Rng::derive(config.seed, {static_cast<std::uint64_t>(k),
                                                    static_cast<std::uint64_t>(batch),
                                                    static_cast<std::uint64_t>(t)});
          const int message =
              static_cast<int>(trial_rng.next_u64() % static_cast<std::uint64_t>(M_literal));
          const std::uint64_t noise_seed = trial_rng.next_u64();
          const TrialOutcome out = run_trial(chan, sched, flags, codebook, message,
                                             per_slot_threshold, gsc.N, per_letter, noise_seed,
                                             config.min_distortion);
          if (out == TrialOutcome::correct) ++corr;
          else if (out == TrialOutcome::erasure) ++eras;
          else ++conf;
          if (enough_good) {
            // Own-codeword excess over the good slots, replaying the same
            // noise stream run_trial consumed.
            Rng noise = Rng::derive(noise_seed, {0xC4A27ULL});
            Word rx(sched.n);
            for (int i = 0; i < sched.n; ++i) rx[i] = chan.transmit(codebook[message][i], noise);
            double own = 0.0;
            for (long g = 0; g < gsc.N; ++g) {
              const SlotRange& r = sched.a[good[g]];
              own += block_distortion(per_letter,
                                      std::span<const int>(codebook[message].data() + r.begin,
                                                           static_cast<size_t>(sched.T)),
                                      std::span<const int>(rx.data() + r.begin,
                                                           static_cast<size_t>(sched.T)));
            }
            if (own / gsc.N > per_slot_threshold) ++exc;
          }
        }
      } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : corr, eras, conf, exc) if (parallel)
#endif
        for (long t = 0; t < batch_trials; ++t) {
          const std::uint64_t trial_seed =
              Rng::mix(config.seed, Rng::mix(static_cast<std::uint64_t>(k),
                                             Rng::mix(static_cast<std::uint64_t>(batch),
                                                      static_cast<std::uint64_t>(t))));
          if (!enough_good) {
            ++eras;
            continue;
          }
          Word sent;
          {
            std::vector<Word> one = generate_codebook(src, sched, flags, 1,
                                                      Rng::mix(trial_seed, 0x7245ULL), caps, false);
            sent = std::move(one[0]);
          }
          Rng noise = Rng::derive(trial_seed, {0xC4A27ULL});
          Word rx(sched.n);
          for (int i = 0; i < sched.n; ++i) rx[i] = chan.transmit(sent[i], noise);

          double own = 0.0;
          std::vector<Word> outputs;
          outputs.reserve(gsc.N);
          for (long g = 0; g < gsc.N; ++g) {
            const SlotRange& r = sched.a[good[g]];
            outputs.emplace_back(rx.begin() + r.begin, rx.begin() + r.begin + sched.T);
            own += block_distortion(per_letter,
                                    std::span<const int>(sent.data() + r.begin,
                                                         static_cast<size_t>(sched.T)),
                                    std::span<const int>(rx.data() + r.begin,
                                                         static_cast<size_t>(sched.T)));
          }
          const double tol = 1e-12 * (1.0 + std::fabs(total_threshold));
          const bool own_pass = own <= total_threshold + tol;
          if (!own_pass) ++exc;

          const double q =
              random_codeword_pass_probability(window, per_letter, outputs, total_threshold);
          Rng impostor_rng = Rng::derive(trial_seed, {0x1A905ULL});
          const long impostors =
              sample_impostor_count(static_cast<double>(exponent), q, impostor_rng);
          if (impostors == 0) {
            if (own_pass) ++corr;
            else ++eras;
          } else {
            ++conf;
          }
        }
      }
      tally_correct += corr;
      tally_erasure += eras;
      tally_confusion += conf;
      tally_excess += exc;
    }

    ErrorCurveRow row;
    row.k = k;
    row.n = sched.n;
    row.N_good = gsc.N;
    row.trials = config.trials;
    row.correct = tally_correct;
    row.erasure = tally_erasure;
    row.confusion = tally_confusion;
    row.own_excess = tally_excess;
    const long errors = config.trials - tally_correct;
    row.error_rate = static_cast<double>(errors) / static_cast<double>(config.trials);
    wilson_interval(errors, config.trials, row.ci_low, row.ci_high);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace psilab
