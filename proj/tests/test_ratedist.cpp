#include <cmath>

#include "doctest.h"
#include "psilab/ratedist.hpp"

using namespace psilab;

namespace {

double h2(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// Closed form for a Bernoulli(p) source under Hamming distortion.
double binary_rd(double p, double D) {
  const double pm = std::min(p, 1.0 - p);
  if (D >= pm) return 0.0;
  return h2(p) - h2(D);
}

MarkovSource symmetric_chain(double p) {
  return MarkovSource::first_order({"0", "1"}, {{1.0 - p, p}, {p, 1.0 - p}});
}

MarkovSource bernoulli_source(double p) {
  return MarkovSource::first_order({"0", "1"}, {{1.0 - p, p}, {1.0 - p, p}});
}

}  // namespace

TEST_CASE("distortion measures") {
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  CHECK(block_distortion(ham, Word{0, 1}, Word{0, 1}) == 0.0);
  CHECK(block_distortion(ham, Word{0, 0}, Word{0, 1}) == 1.0);

  const DistortionMeasure weighted(2, 2, {0.0, 2.0, 3.0, 0.0});
  CHECK(block_distortion(weighted, Word{0, 1}, Word{1, 0}) == 5.0);

  CHECK_THROWS_AS(block_distortion(ham, Word{0}, Word{0, 1}), Error);
  // Square tables need a zero diagonal.
  CHECK_THROWS_AS(DistortionMeasure(2, 2, {0.1, 1.0, 1.0, 0.0}), Error);

  const DistortionMeasure dT = block_measure(ham, 2);
  CHECK(dT.at(0b01, 0b10) == 2.0);
  CHECK(dT.at(0b01, 0b11) == 1.0);
  CHECK(dT.at(0b01, 0b01) == 0.0);
}

TEST_CASE("blahut-arimoto against the binary closed form") {
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  const std::vector<double> uniform{0.5, 0.5};

  SUBCASE("rate is zero at and beyond D_max") {
    const RDPoint p = blahut_arimoto(uniform, ham, 0.5);
    CHECK(p.rate_bits == 0.0);
    CHECK(p.achieved_distortion <= 0.5 + 1e-9);
  }

  SUBCASE("uniform source at D = 0.1") {
    const RDPoint p = blahut_arimoto(uniform, ham, 0.1);
    CHECK(std::fabs(p.rate_bits - (1.0 - h2(0.1))) <= 1e-6);
    CHECK(p.achieved_distortion <= 0.1 + 1e-9);
  }

  SUBCASE("biased source at D = 0.1") {
    const std::vector<double> p03{0.7, 0.3};
    const RDPoint p = blahut_arimoto(p03, ham, 0.1);
    CHECK(std::fabs(p.rate_bits - binary_rd(0.3, 0.1)) <= 1e-6);
  }

  SUBCASE("ten-point grids for p in {0.3, 0.5} within 1e-4 bits") {
    for (double p : {0.3, 0.5}) {
      const std::vector<double> law{1.0 - p, p};
      const double pm = std::min(p, 1.0 - p);
      for (int i = 1; i <= 10; ++i) {
        const double D = 0.9 * pm * i / 10.0;
        const RDPoint point = blahut_arimoto(law, ham, D);
        CHECK(std::fabs(point.rate_bits - binary_rd(p, D)) <= 1e-4);
      }
    }
  }

  SUBCASE("test channel satisfies the distortion constraint") {
    const std::vector<double> law{0.7, 0.3};
    for (double D : {0.02, 0.1, 0.2}) {
      const RDPoint p = blahut_arimoto(law, ham, D);
      double ed = 0.0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) ed += law[i] * p.test_channel[i * 2 + j] * ham.at(i, j);
      CHECK(ed <= D + 1e-9);
      CHECK(std::fabs(ed - p.achieved_distortion) <= 1e-9);
    }
  }

  SUBCASE("serial and parallel solves are bitwise identical") {
    BAOptions serial;
    serial.parallel = false;
    const RDPoint a = blahut_arimoto(uniform, ham, 0.13);
    const RDPoint b = blahut_arimoto(uniform, ham, 0.13, serial);
    CHECK(a.rate_bits == b.rate_bits);
    CHECK(a.achieved_distortion == b.achieved_distortion);
  }
}

TEST_CASE("infeasible targets are rejected") {
  // Rectangular measure with a strictly positive floor.
  const DistortionMeasure d(2, 1, {0.3, 0.5});
  const std::vector<double> law{0.5, 0.5};
  CHECK_THROWS_AS(blahut_arimoto(law, d, 0.1), Error);
  try {
    blahut_arimoto(law, d, 0.1);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::d_infeasible);
  }
  // At the floor itself the rate collapses to the trivial point.
  const RDPoint p = blahut_arimoto(law, d, 0.4);
  CHECK(p.rate_bits == 0.0);
}

TEST_CASE("iteration cap raises not_converged") {
  BAOptions opt;
  opt.max_iterations = 0;
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  CHECK_THROWS_AS(blahut_arimoto(std::vector<double>{0.5, 0.5}, ham, 0.1, opt), Error);
}

TEST_CASE("vector source rate per letter") {
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  const double h03 = h2(0.3);

  SUBCASE("entropy corner at D = 0") {
    const auto src = symmetric_chain(0.3);
    CHECK(rd_vector_source(src, 1, 0.0, ham).rate_bits == doctest::Approx(1.0).epsilon(1e-12));
    const RDPoint p4 = rd_vector_source(src, 4, 0.0, ham);
    CHECK(p4.rate_bits == doctest::Approx((1.0 + 3.0 * h03) / 4.0).epsilon(1e-12));
    for (int T = 1; T <= 6; ++T) {
      const RDPoint p = rd_vector_source(src, T, 0.0, ham);
      CHECK(std::fabs(p.rate_bits - (1.0 + (T - 1) * h03) / T) <= 1e-9);
    }
  }

  SUBCASE("zero-distortion ambiguity is detected") {
    const DistortionMeasure degenerate(2, 2, {0.0, 0.0, 1.0, 0.0});
    CHECK_THROWS_AS(rd_vector_source(symmetric_chain(0.3), 1, 0.0, degenerate), Error);
  }

  SUBCASE("memoryless sources are T-independent") {
    const auto iid = bernoulli_source(0.5);
    const double want = 1.0 - h2(0.1);
    for (int T : {1, 2, 3}) {
      const RDPoint p = rd_vector_source(iid, T, 0.1, ham);
      CHECK(std::fabs(p.rate_bits - want) <= 1e-5);
      CHECK(p.per_letter);
    }
  }

  SUBCASE("T = 2 product law matches the closed form on a grid") {
    for (double p : {0.3, 0.5}) {
      const auto src = bernoulli_source(p);
      for (double D : {0.05, 0.1, 0.2}) {
        const RDPoint point = rd_vector_source(src, 2, D, ham);
        CHECK(std::fabs(point.rate_bits - binary_rd(p, D)) <= 1e-4);
      }
    }
  }

  SUBCASE("per-letter normalization consistency at T = 1") {
    const auto src = symmetric_chain(0.3);
    const RDPoint via_vector = rd_vector_source(src, 1, 0.1, ham);
    const RDPoint direct = blahut_arimoto(marginal_law(src, 1).probabilities(), ham, 0.1);
    CHECK(std::fabs(via_vector.rate_bits - direct.rate_bits) <= 1e-12);
  }
}

TEST_CASE("finite-T table decreases toward the process rate") {
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  const auto src = symmetric_chain(0.3);

  SUBCASE("D = 0: block entropies decrease toward the entropy rate") {
    const auto points = rd_limit_estimate(src, 0.0, {1, 2, 3, 4, 5, 6}, ham);
    for (size_t i = 1; i < points.size(); ++i)
      CHECK(points[i].rate_bits <= points[i - 1].rate_bits + 1e-12);
    CHECK(points.back().rate_bits > h2(0.3));
  }

  SUBCASE("D = 0.05: non-increasing within tolerance") {
    const auto points = rd_limit_estimate(src, 0.05, {1, 2, 3, 4}, ham);
    for (size_t i = 1; i < points.size(); ++i)
      CHECK(points[i].rate_bits <= points[i - 1].rate_bits + 1e-6);
  }

  SUBCASE("i.i.d. source gives a constant sequence") {
    const auto points = rd_limit_estimate(bernoulli_source(0.3), 0.1, {1, 2, 3}, ham);
    for (size_t i = 1; i < points.size(); ++i)
      CHECK(std::fabs(points[i].rate_bits - points[0].rate_bits) <= 1e-5);
  }
}

TEST_CASE("rate-distortion curves") {
  const DistortionMeasure ham = DistortionMeasure::hamming(2);
  const std::vector<double> uniform{0.5, 0.5};
  const auto curve = rd_curve(uniform, ham, 11);
  REQUIRE(curve.size() == 11);

  SUBCASE("matches the closed form pointwise") {
    for (const RDPoint& p : curve)
      CHECK(std::fabs(p.rate_bits - binary_rd(0.5, p.target_distortion)) <= 1e-4);
  }

  SUBCASE("endpoints") {
    CHECK(std::fabs(curve.front().rate_bits - 1.0) <= 1e-6);  // D = 0: the source entropy
    CHECK(curve.back().rate_bits == 0.0);                     // D = D_max
  }

  SUBCASE("ordered by D, rate non-increasing, convex") {
    for (size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].target_distortion > curve[i - 1].target_distortion);
      CHECK(curve[i].rate_bits <= curve[i - 1].rate_bits + 1e-9);
    }
    for (size_t i = 1; i + 1 < curve.size(); ++i) {
      const double mid = 0.5 * (curve[i - 1].rate_bits + curve[i + 1].rate_bits);
      CHECK(curve[i].rate_bits <= mid + 1e-9);
    }
  }

  SUBCASE("ternary alphabet keeps the curve shape") {
    // Support transitions stall the solver into the certified 1e-6-nat
    // regime, so the shape tolerances here are wider than the binary case.
    const std::vector<double> law{0.32142857142857145, 0.42857142857142855, 0.25};
    const auto c3 = rd_curve(law, DistortionMeasure::hamming(3), 9);
    double entropy = 0.0;
    for (double v : law) entropy -= v * std::log2(v);
    CHECK(std::fabs(c3.front().rate_bits - entropy) <= 1e-5);
    CHECK(c3.back().rate_bits == 0.0);
    for (size_t i = 1; i < c3.size(); ++i) CHECK(c3[i].rate_bits <= c3[i - 1].rate_bits + 3e-6);
    for (size_t i = 1; i + 1 < c3.size(); ++i) {
      const double mid = 0.5 * (c3[i - 1].rate_bits + c3[i + 1].rate_bits);
      CHECK(c3[i].rate_bits <= mid + 3e-6);
    }
  }
}
