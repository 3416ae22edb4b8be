#include <cmath>

#include "doctest.h"
#include "psilab/mixing.hpp"
#include "psilab/rng.hpp"

using namespace psilab;

namespace {

MarkovSource symmetric_chain(double p) {
  return MarkovSource::first_order({"0", "1"}, {{1.0 - p, p}, {p, 1.0 - p}});
}

MarkovSource three_state() {
  return MarkovSource::first_order({"a", "b", "c"},
                                   {{0.5, 0.3, 0.2}, {0.2, 0.6, 0.2}, {0.3, 0.3, 0.4}});
}

MarkovSource iid_uniform() { return symmetric_chain(0.5); }

// Irreducible, aperiodic, with a zero-probability two-step prefix "00".
MarkovSource forbidden_prefix_chain() {
  return MarkovSource::first_order({"0", "1"}, {{0.0, 1.0}, {0.5, 0.5}});
}

}  // namespace

TEST_CASE("psi closed form on symmetric chains: (1 - 2p)^(tau+1)") {
  const auto src = symmetric_chain(0.3);
  CHECK(psi_markov(src, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(psi_markov(src, 1) == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(psi_markov(src, 2) == doctest::Approx(0.064).epsilon(1e-12));

  const auto iid = iid_uniform();
  for (int tau = 0; tau <= 4; ++tau) CHECK(psi_markov(iid, tau) <= 1e-12);

  const auto flat3 = MarkovSource::first_order(
      {"a", "b", "c"}, {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  CHECK(psi_markov(flat3, 0) <= 1e-12);
  CHECK(psi_markov(flat3, 3) <= 1e-12);
}

TEST_CASE("psi rejects unusable chains") {
  CHECK_THROWS_AS(psi_markov(MarkovSource::order_m({"0", "1"}, 2,
                                                   {{0.9, 0.1}, {0.4, 0.6}, {0.7, 0.3}, {0.2, 0.8}}),
                             0),
                  Error);
  const auto cyc = MarkovSource::first_order({"a", "b", "c"},
                                             {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  try {
    psi_markov(cyc, 0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_aperiodic);
  }
}

TEST_CASE("brute-force psi equals the closed form at t = T = 1 and never exceeds it") {
  const auto src = symmetric_chain(0.3);
  CHECK(psi_brute_force(src, 0, 1, 1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(psi_brute_force(src, 2, 2, 2) == doctest::Approx(0.064).epsilon(1e-10));

  const auto iid = iid_uniform();
  CHECK(psi_brute_force(iid, 1, 2, 2) <= 1e-12);

  for (const auto& chain : {symmetric_chain(0.1), symmetric_chain(0.3), symmetric_chain(0.45),
                            three_state(), forbidden_prefix_chain()}) {
    for (int tau = 0; tau <= 4; ++tau) {
      const double closed = psi_markov(chain, tau);
      for (int t = 1; t <= 2; ++t) {
        for (int T = 1; T <= 2; ++T) {
          const double brute = psi_brute_force(chain, tau, t, T);
          CHECK(brute <= closed + 1e-9);
          if (t == 1 && T == 1) CHECK(std::fabs(brute - closed) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("parallel and serial subset kernels agree exactly") {
  EnumerationCaps caps;
  caps.max_subset_atoms = 16;
  for (const auto& chain : {symmetric_chain(0.3), three_state()}) {
    for (int tau : {0, 2}) {
      const double par = psi_brute_force(chain, tau, 2, 2, caps, true);
      const double ser = psi_brute_force(chain, tau, 2, 2, caps, false);
      const double ref = psi_brute_force_reference(chain, tau, 2, 2, caps);
      CHECK(par == ser);
      CHECK(std::fabs(par - ref) <= 1e-15);
    }
  }
  // A larger instance through the lowbit kernel against the direct reference.
  const double a = psi_brute_force(symmetric_chain(0.3), 1, 3, 2, caps);
  const double b = psi_brute_force_reference(symmetric_chain(0.3), 1, 3, 2, caps);
  CHECK(std::fabs(a - b) <= 1e-12);
}

TEST_CASE("subset atom cap") {
  EnumerationCaps caps;
  caps.max_subset_atoms = 4;
  CHECK_THROWS_AS(psi_brute_force(three_state(), 0, 2, 1, caps), Error);
}

TEST_CASE("lambda profile") {
  const auto prof = lambda_profile(symmetric_chain(0.3), 2);
  REQUIRE(prof.lambdas.size() == 3);
  CHECK(prof.lambdas[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(prof.lambdas[1] == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(prof.lambdas[2] == doctest::Approx(0.064).epsilon(1e-12));

  for (double l : lambda_profile(iid_uniform(), 5).lambdas) CHECK(l <= 1e-12);
  // Profile decays monotonically for these chains.
  const auto p3 = lambda_profile(three_state(), 6);
  for (size_t i = 1; i < p3.lambdas.size(); ++i) CHECK(p3.lambdas[i] <= p3.lambdas[i - 1] + 1e-12);
}

TEST_CASE("residual distribution") {
  const auto src = symmetric_chain(0.3);
  const CylinderLaw r0 = residual_distribution(src, Word{0}, 0, 1);
  CHECK(r0.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r0.at(1) == doctest::Approx(0.0).epsilon(1e-12));
  const CylinderLaw r1 = residual_distribution(src, Word{1}, 0, 1);
  CHECK(r1.at(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r1.at(1) == doctest::Approx(1.0).epsilon(1e-12));

  // lambda ~ 0 convention: the marginal itself.
  const auto iid = iid_uniform();
  const CylinderLaw r = residual_distribution(iid, Word{0, 1}, 1, 2);
  CHECK(r.total_variation(marginal_law(iid, 2)) <= 1e-12);

  CHECK_THROWS_AS(residual_distribution(forbidden_prefix_chain(), Word{0, 0}, 0, 1), Error);
}

TEST_CASE("mixture decomposition reconstructs the conditional law") {
  for (const auto& chain : {symmetric_chain(0.1), symmetric_chain(0.3), symmetric_chain(0.45),
                            three_state()}) {
    for (int t = 1; t <= 3; ++t) {
      for (int tau = 0; tau <= 2; ++tau) {
        for (int T = 1; T <= 2; ++T) {
          const auto reports = verify_decomposition(chain, t, tau, T);
          for (const auto& rep : reports) {
            REQUIRE_FALSE(rep.skipped);
            CHECK(rep.max_identity_error <= 1e-12);
            rep.residual.validate(1e-10);
          }
        }
      }
    }
  }
}

TEST_CASE("decomposition is exact for independent chains") {
  const auto reports = verify_decomposition(iid_uniform(), 2, 1, 2);
  for (const auto& rep : reports) {
    CHECK_FALSE(rep.skipped);
    CHECK(rep.max_identity_error <= 1e-12);
    // lambda ~ 0: the residual defaults to the marginal itself.
    CHECK(rep.residual.total_variation(rep.marginal) <= 1e-12);
  }
}

TEST_CASE("decomposition skips zero-probability prefixes") {
  const auto src = forbidden_prefix_chain();
  const auto reports = verify_decomposition(src, 2, 0, 1);
  int skipped = 0;
  for (const auto& rep : reports) {
    if (rep.skipped) {
      ++skipped;
      CHECK(rep.prefix == Word{0, 0});
    } else {
      CHECK(rep.max_identity_error <= 1e-12);
      rep.residual.validate(1e-10);
    }
  }
  CHECK(skipped == 1);
}

TEST_CASE("set ratios are convex combinations of word ratios") {
  // |P(A and B) / (P(A) P(B)) - 1| <= psi(tau) for random subset pairs.
  const auto src = three_state();
  const int t = 2, T = 2;
  const CylinderLaw lawT = marginal_law(src, T);
  CylinderLaw codec(src.alphabet_size(), t, std::vector<double>(9, 0.0));
  Rng rng(20240517);
  for (int tau = 0; tau <= 3; ++tau) {
    const double psi = psi_markov(src, tau);
    for (int rep = 0; rep < 200; ++rep) {
      double pa = 0.0, pb = 0.0, pj = 0.0;
      std::vector<Word> a_words;
      std::vector<long> b_codes;
      for (long c = 0; c < 9; ++c)
        if (rng.bernoulli(0.5)) a_words.push_back(codec.decode(c));
      for (long c = 0; c < lawT.size(); ++c)
        if (rng.bernoulli(0.5)) b_codes.push_back(c);
      if (a_words.empty() || b_codes.empty()) continue;
      for (const Word& w : a_words) {
        const double pw = cylinder_probability(src, w);
        if (pw == 0.0) continue;
        pa += pw;
        const CylinderLaw cond = conditional_law(src, w, tau, T);
        for (long bc : b_codes) pj += pw * cond.at(bc);
      }
      for (long bc : b_codes) pb += lawT.at(bc);
      if (pa == 0.0 || pb == 0.0) continue;
      CHECK(std::fabs(pj / (pa * pb) - 1.0) <= psi + 1e-9);
      // Sandwich: (1 - psi) P(A) P(B) <= P(A and B) <= (1 + psi) P(A) P(B).
      CHECK(pj >= (1.0 - psi) * pa * pb - 1e-12);
      CHECK(pj <= (1.0 + psi) * pa * pb + 1e-12);
    }
  }
}

TEST_CASE("cesaro independence diagnostic") {
  const auto src = symmetric_chain(0.3);

  SUBCASE("exact sum with overlap handling and the accounting envelope") {
    const int N = 64;
    const auto rep = ergodic_cesaro_check(src, Word{0}, Word{0}, N);
    CHECK(rep.target == doctest::Approx(0.25).epsilon(1e-12));
    // Direct oracle: overlap term + pair joints.
    double acc = 0.5;
    for (int tau = 1; tau < N; ++tau) {
      const CylinderLaw cond = conditional_law(src, Word{0}, tau - 1, 1);
      acc += 0.5 * cond.at(0);
    }
    CHECK(rep.average == doctest::Approx(acc / N).epsilon(1e-12));
    // Envelope (C + (t + sum lambda) P(a) P(b)) / N with C the overlap mass.
    double lambda_sum = 0.0;
    for (int u = 0; u + 1 < N; ++u) lambda_sum += psi_markov(src, u);
    const double envelope = (0.5 + (1.0 + lambda_sum) * 0.25) / N;
    CHECK(rep.gap <= envelope);
  }

  SUBCASE("independent chains contribute zero gap beyond the overlap") {
    const auto iid = iid_uniform();
    const auto rep = ergodic_cesaro_check(iid, Word{0}, Word{1}, 32);
    // Only tau = 0 deviates (the windows collide and disagree).
    CHECK(rep.average == doctest::Approx((31.0 * 0.25) / 32).epsilon(1e-12));
  }

  SUBCASE("zero-probability word short-circuits") {
    const auto rep = ergodic_cesaro_check(forbidden_prefix_chain(), Word{0, 0}, Word{1}, 16);
    CHECK(rep.average == 0.0);
    CHECK(rep.target == 0.0);
    CHECK(rep.gap == 0.0);
  }

  SUBCASE("gap shrinks with N") {
    const auto r16 = ergodic_cesaro_check(src, Word{0}, Word{0}, 16);
    const auto r256 = ergodic_cesaro_check(src, Word{0}, Word{0}, 256);
    CHECK(r256.gap < r16.gap);
  }
}

TEST_CASE("blocking can only shrink psi") {
  const auto src = symmetric_chain(0.3);

  const auto l1 = blocked_psi_comparison(src, 1, 2);
  CHECK(l1.psi_parent == doctest::Approx(l1.psi_block).epsilon(1e-12));

  const auto t0 = blocked_psi_comparison(src, 2, 0);
  CHECK(t0.psi_parent == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(t0.psi_block == doctest::Approx(0.4).epsilon(1e-12));

  const auto t1 = blocked_psi_comparison(src, 2, 1);
  CHECK(t1.psi_parent == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(t1.psi_block == doctest::Approx(0.064).epsilon(1e-12));

  for (const auto& chain : {symmetric_chain(0.1), symmetric_chain(0.45), three_state()}) {
    for (int L : {2, 3}) {
      for (int tau = 0; tau <= 3; ++tau) {
        const auto cmp = blocked_psi_comparison(chain, L, tau);
        CHECK(cmp.psi_block <= cmp.psi_parent + 1e-9);
      }
    }
  }

  // The blocked brute force agrees with the blocked closed form.
  const MarkovSource blocked = block_process(src, 2);
  for (int tau = 0; tau <= 2; ++tau) {
    const double closed = psi_markov(blocked, tau);
    const double brute = psi_brute_force(blocked, tau, 1, 1);
    CHECK(std::fabs(closed - brute) <= 1e-9);
  }
}
