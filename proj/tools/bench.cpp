// Serial-versus-parallel timings for the heavy kernels: subset-supremum
// mixing coefficients, alternating minimization, and Monte Carlo decoding.
#include <chrono>
#include <cmath>
#include <cstdio>

#include "psilab/bounds.hpp"
#include "psilab/codesim.hpp"
#include "psilab/mixing.hpp"
#include "psilab/ratedist.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace psilab;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

MarkovSource bench_chain() {
  return MarkovSource::first_order({"0", "1"}, {{0.7, 0.3}, {0.3, 0.7}});
}

void report(const char* name, double serial_ms, double parallel_ms, double check) {
  std::printf("%-28s %10.1f ms %10.1f ms %8.2fx   (%.6g)\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, check);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "baseline", "tuned", "speedup");

  const MarkovSource chain = bench_chain();

  {
    // Subset supremum over 2^16 x 2^8 subset pairs, repeated.
    EnumerationCaps caps;
    caps.max_subset_atoms = 16;
    const int reps = 10;
    double serial = 0.0, parallel = 0.0;
    double t0 = now_ms();
    for (int r = 0; r < reps; ++r) serial = psi_brute_force(chain, 1, 4, 3, caps, false);
    double t1 = now_ms();
    for (int r = 0; r < reps; ++r) parallel = psi_brute_force(chain, 1, 4, 3, caps, true);
    double t2 = now_ms();
    if (serial != parallel) std::printf("MISMATCH psi: %.17g vs %.17g\n", serial, parallel);
    report("psi subset supremum", t1 - t0, t2 - t1, serial);
  }
  {
    // Alternating minimization on the T = 8 block source (256 x 256): the
    // dense-table solver versus the Kronecker-factorized kernel.
    const int T = 8;
    const CylinderLaw law = marginal_law(chain, T);
    const DistortionMeasure ham = DistortionMeasure::hamming(2);
    const DistortionMeasure dT = block_measure(ham, T);
    BAOptions opt;
    opt.tol_nats = 1e-7;
    double t0 = now_ms();
    const RDPoint a = blahut_arimoto(law.probabilities(), dT, 0.15 * T, opt);
    double t1 = now_ms();
    const RDPoint b = blahut_arimoto_block(law.probabilities(), ham, T, 0.15 * T, opt);
    double t2 = now_ms();
    if (std::fabs(a.rate_bits - b.rate_bits) > 1e-9)
      std::printf("MISMATCH ba: %.17g vs %.17g\n", a.rate_bits, b.rate_bits);
    report("dense vs kronecker solver", t1 - t0, t2 - t1, b.rate_bits);
  }
  {
    // Ensemble-mode decoding trials on a BSC.
    const MemorylessChannel chan = MemorylessChannel::bsc(0.02);
    const DistortionMeasure d = DistortionMeasure::hamming(2);
    CodesimConfig cfg;
    cfg.T = 8;
    cfg.tau = 0;
    cfg.beta = 0.1;
    cfg.D = 0.05;
    cfg.rate_bits = 0.5;
    cfg.trials = 400;
    cfg.seed = 7;
    MarkovSource iid = MarkovSource::first_order({"0", "1"}, {{0.5, 0.5}, {0.5, 0.5}});
    double t0 = now_ms();
    const auto serial = error_curve(iid, chan, d, cfg, {32}, false);
    double t1 = now_ms();
    const auto parallel = error_curve(iid, chan, d, cfg, {32}, true);
    double t2 = now_ms();
    if (serial[0].correct != parallel[0].correct)
      std::printf("MISMATCH codesim: %ld vs %ld\n", serial[0].correct, parallel[0].correct);
    report("monte carlo decoding", t1 - t0, t2 - t1, serial[0].error_rate);
  }
  return 0;
}
