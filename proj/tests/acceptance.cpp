// Acceptance suite: one pass/fail line per criterion. All tolerances and
// parameter grids are fixed here; the process exits nonzero if any line
// fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "psilab/bounds.hpp"
#include "psilab/cli.hpp"
#include "psilab/codesim.hpp"
#include "psilab/io.hpp"
#include "psilab/mixing.hpp"
#include "psilab/ratedist.hpp"
#include "psilab/simulate.hpp"

using namespace psilab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int id, const std::string& name, double limit_seconds,
               const std::function<std::string()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool threw = false;
  try {
    detail = body();
  } catch (const std::exception& e) {
    threw = true;
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = !threw && detail.empty() && seconds < limit_seconds;
  if (!ok) ++failures;
  std::printf("[%s] %d. %s (%.1f s, limit %.0f s)%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              seconds, limit_seconds, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

MarkovSource symmetric_chain(double p) {
  return MarkovSource::first_order({"0", "1"}, {{1.0 - p, p}, {p, 1.0 - p}});
}

MarkovSource three_state() {
  return MarkovSource::first_order({"a", "b", "c"},
                                   {{0.5, 0.3, 0.2}, {0.2, 0.6, 0.2}, {0.3, 0.3, 0.4}});
}

std::vector<MarkovSource> criterion_chains() {
  std::vector<MarkovSource> chains;
  chains.push_back(symmetric_chain(0.1));
  chains.push_back(symmetric_chain(0.3));
  chains.push_back(symmetric_chain(0.45));
  chains.push_back(three_state());
  return chains;
}

double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

std::string psi_oracle_equivalence() {
  std::ostringstream bad;
  for (const auto& chain : criterion_chains()) {
    for (int tau = 0; tau <= 3; ++tau) {
      const double closed = psi_markov(chain, tau);
      for (int t = 1; t <= 2; ++t) {
        for (int T = 1; T <= 2; ++T) {
          const double brute = psi_brute_force(chain, tau, t, T);
          if (brute > closed + 1e-9)
            bad << " brute>closed at tau=" << tau << " t=" << t << " T=" << T;
          if (t == 1 && T == 1 && std::fabs(brute - closed) > 1e-9)
            bad << " inequality at singleton windows tau=" << tau;
        }
      }
    }
  }
  return bad.str();
}

std::string decomposition_validity() {
  std::ostringstream bad;
  for (const auto& chain : criterion_chains()) {
    for (int t = 1; t <= 3; ++t) {
      for (int tau = 0; tau <= 2; ++tau) {
        for (int T = 1; T <= 2; ++T) {
          for (const auto& rep : verify_decomposition(chain, t, tau, T)) {
            if (rep.skipped) continue;
            if (rep.max_identity_error > 1e-12)
              bad << " reconstruction error " << rep.max_identity_error << " at t=" << t
                  << " tau=" << tau << " T=" << T;
            try {
              rep.residual.validate(1e-10);
            } catch (const std::exception&) {
              bad << " invalid residual at t=" << t << " tau=" << tau << " T=" << T;
            }
          }
        }
      }
    }
  }
  return bad.str();
}

std::string simulation_exactness() {
  std::ostringstream bad;
  const auto src = symmetric_chain(0.3);
  const int cases[3][3] = {{2, 1, 2}, {1, 1, 3}, {3, 1, 1}};
  for (const auto& c : cases) {
    const SlotSchedule sched = build_schedule(c[0], c[1], c[2]);
    const double tv = exact_simulated_law(src, sched).total_variation(marginal_law(src, sched.n));
    if (tv > 1e-10)
      bad << " TV=" << tv << " at (T,tau,k)=(" << c[0] << "," << c[1] << "," << c[2] << ")";
  }
  return bad.str();
}

std::string rd_oracle() {
  std::ostringstream bad;
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  for (double p : {0.3, 0.5}) {
    const std::vector<double> law{1.0 - p, p};
    const double pm = std::min(p, 1.0 - p);
    for (int i = 1; i <= 10; ++i) {
      const double D = 0.9 * pm * i / 10.0;
      const double want = h2(p) - h2(D);
      const RDPoint point = blahut_arimoto(law, ham, D);
      if (std::fabs(point.rate_bits - want) > 1e-4)
        bad << " |R-oracle|=" << std::fabs(point.rate_bits - want) << " at p=" << p << " D=" << D;
    }
  }
  for (double p : {0.3, 0.5}) {
    const auto chain = symmetric_chain(p);
    for (int T = 1; T <= 6; ++T) {
      const double want = (1.0 + (T - 1) * h2(p)) / T;
      const RDPoint point = rd_vector_source(chain, T, 0.0, ham);
      if (std::fabs(point.rate_bits - want) > 1e-9)
        bad << " |R-entropy|=" << std::fabs(point.rate_bits - want) << " at p=" << p << " T=" << T;
    }
  }
  return bad.str();
}

std::string envelope_grid() {
  std::ostringstream bad;
  const auto src = symmetric_chain(0.3);
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  for (double D : {0.0, 0.05}) {
    const auto rows = convergence_sweep(src, D, {2, 4, 8}, {1, 2}, {0.02, 0.05}, ham);
    for (const auto& r : rows) {
      if (!r.feasible) {
        bad << " unexpected infeasible row";
        continue;
      }
      const double e1 = (r.lambda + r.beta) * 1.0;  // log2|X| = 1
      const double e23 = static_cast<double>(r.tau) / r.T;
      if (std::fabs(r.T1) > e1 + 1e-9) bad << " |T1| envelope broken at T=" << r.T;
      if (std::fabs(r.T2) > e23 + 1e-9) bad << " |T2| envelope broken at T=" << r.T;
      if (std::fabs(r.T3) > e23 + 1e-9) bad << " |T3| envelope broken at T=" << r.T;
      const double budget = e1 + std::fabs(r.T2) + std::fabs(r.T3) + std::fabs(r.T4) + 1e-9;
      if (r.gap_actual > budget)
        bad << " gap " << r.gap_actual << " > budget " << budget << " at T=" << r.T
            << " tau=" << r.tau << " beta=" << r.beta << " D=" << D;
    }
  }
  return bad.str();
}

std::string achievability_monte_carlo() {
  std::ostringstream bad;
  const auto src = MarkovSource::first_order({"0", "1"}, {{0.5, 0.5}, {0.5, 0.5}});
  const MemorylessChannel chan = MemorylessChannel::bsc(0.02);
  const DistortionMeasure ham = DistortionMeasure::hamming(2);

  CodesimConfig cfg;
  cfg.T = 8;
  cfg.tau = 0;
  cfg.beta = 0.1;
  cfg.D = 0.05;
  cfg.rate_bits = 0.5;
  cfg.trials = 2000;
  cfg.seed = 1;

  const auto rows = error_curve(src, chan, ham, cfg, {32, 64, 128});
  const auto& k32 = rows[0];
  const auto& k64 = rows[1];
  const auto& k128 = rows[2];
  if (k64.error_rate >= 0.1) bad << " error " << k64.error_rate << " at k=64";
  if (k128.ci_low > k32.ci_high)
    bad << " error grew with k beyond CI overlap (" << k128.ci_low << " > " << k32.ci_high << ")";

  CodesimConfig control = cfg;
  control.rate_bits = 0.95;
  const auto neg = error_curve(src, chan, ham, control, {64});
  if (neg[0].error_rate < 0.5) bad << " negative control error " << neg[0].error_rate << " < 0.5";
  return bad.str();
}

std::string blocking_comparison() {
  std::ostringstream bad;
  const auto src = symmetric_chain(0.3);
  const double expected[3] = {0.4, 0.064, 0.01024};
  const MarkovSource blocked = block_process(src, 2);
  for (int tau = 0; tau <= 2; ++tau) {
    const auto cmp = blocked_psi_comparison(src, 2, tau);
    if (cmp.psi_block > cmp.psi_parent + 1e-9) bad << " psi grew under blocking at tau=" << tau;
    if (std::fabs(cmp.psi_block - expected[tau]) > 1e-9)
      bad << " psi_block=" << cmp.psi_block << " expected " << expected[tau] << " at tau=" << tau;
    const double brute = psi_brute_force(blocked, tau, 1, 1);
    if (std::fabs(brute - cmp.psi_block) > 1e-9) bad << " brute oracle disagrees at tau=" << tau;
  }
  return bad.str();
}

std::string reproducibility() {
  std::ostringstream bad;
  const fs::path data = fs::path(PSILAB_SOURCE_DIR) / "data";
  const fs::path root = "acceptance_tmp";
  fs::remove_all(root);

  const std::string p03 = (data / "p03.json").string();
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"psi",
       {"--seed", "3", "psi", "--chain", p03, "--tau-max", "3", "--brute", "1", "1",
        "--decomposition", "2", "--decomposition-tau", "1", "--decomposition-T", "1"}},
      {"simulate",
       {"--seed", "3", "simulate", "--chain", p03, "--T", "2", "--tau", "1", "--k", "3",
        "--codebook", "4", "--exact-check"}},
      {"rd", {"--seed", "3", "rd", "--chain", p03, "--T", "2", "--curve", "6"}},
      {"bound",
       {"--seed", "3", "bound", "--chain", p03, "--D", "0.05", "--T", "4", "--tau", "1", "--beta",
        "0.04", "--proxy-T", "4"}},
      {"sweep",
       {"--seed", "3", "sweep", "--chain", p03, "--D", "0", "--T-list", "2,4", "--tau-list", "1,2",
        "--beta-list", "0.02"}},
      {"codesim",
       {"--seed", "3", "codesim", "--config", (data / "codesim_small.json").string()}},
  };
  for (const auto& [name, args] : commands) {
    for (int pass = 1; pass <= 2; ++pass) {
      const fs::path out = root / (name + "_" + std::to_string(pass));
      fs::create_directories(out);
      std::vector<std::string> full = args;
      full.push_back("--out-dir");
      full.push_back(out.string());
      if (cli_main(full) != 0) {
        bad << " " << name << " exited nonzero";
        break;
      }
    }
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(root / (name + "_1"))) {
      const std::string file = entry.path().filename().string();
      if (file == "manifest.json") continue;
      if (read_text_file(entry.path()) != read_text_file(root / (name + "_2") / file))
        bad << " " << name << "/" << file << " differs between runs";
      ++compared;
    }
    if (compared == 0) bad << " " << name << " produced no data files";
  }
  return bad.str();
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion(1, "psi oracle equivalence (brute force vs closed form)", 10.0, psi_oracle_equivalence);
  criterion(2, "mixture decomposition validity and reconstruction", 10.0, decomposition_validity);
  criterion(3, "slot sampler law equals the stationary window law", 30.0, simulation_exactness);
  criterion(4, "rate-distortion oracle (closed form and entropy corner)", 30.0, rd_oracle);
  criterion(5, "convergence-term envelopes on the (T, tau, beta) grid", 120.0, envelope_grid);
  criterion(6, "random-coding achievability monte carlo", 600.0, achievability_monte_carlo);
  criterion(7, "blocking shrinks psi with the expected block values", 10.0, blocking_comparison);
  criterion(8, "CLI reruns are bitwise reproducible", 120.0, reproducibility);
  if (failures)
    std::printf("%d criterion(s) FAILED\n", failures);
  else
    std::printf("all criteria passed\n");
  return failures == 0 ? 0 : 1;
}
