#include <doctest.h>

#include <cmath>

#include "qkd/entropy.hpp"
#include "qkd/integrate.hpp"
#include "qkd/quadrature.hpp"

using namespace qkd;

namespace {

SourceModel sm1() { return SourceModel::make(1.0); }

IntegrationSpec small_spec(std::uint64_t seed = 9, long long n = 1 << 14) {
  IntegrationSpec s;
  s.seed = seed;
  s.n_points = n;
  return s;
}

}  // namespace

TEST_CASE("unit kernel integrates to one") {
  Region xp = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.0, 0.9}, 1.0);
  Estimate e = region_pair_expect(sm1(), {xp}, {xp},
                                  [](const BlochOutput&, const BlochOutput&) { return 1.0; },
                                  small_spec());
  CHECK(e.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.std_err < 1e-12);
}

TEST_CASE("embedded smooth phase integral is spectrally exact") {
  // sin^2 average over the relay phase, handled by Gauss-Legendre
  double v = 0.0;
  const QuadratureRule& rule = gauss_legendre(64);
  for (int i = 0; i < 64; ++i) {
    double phi = M_PI * (rule.nodes[i] + 1.0);
    v += 0.5 * rule.weights[i] * std::sin(phi) * std::sin(phi);  // weights sum to 2
  }
  CHECK(v == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("separable kernel factorizes into one-sided expectations") {
  Region za = make_region(StateLabel::ZH, 0.05, 0.3, 0.3, {0.0, 0.9}, 1.0);
  Region xb = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.3, 0.8}, 1.0);
  auto f = [](const BlochOutput& b) { return b.mu * b.mu; };
  auto g = [](const BlochOutput& b) { return std::cos(sector_theta(b)); };

  Estimate joint = region_pair_expect(
      sm1(), {za}, {xb},
      [&](const BlochOutput& a, const BlochOutput& b) { return f(a) * g(b); },
      small_spec(21, 1 << 16));

  // oracle: two independent one-sided integrations at different seeds
  Estimate left = region_pair_expect(
      sm1(), {za}, {xb}, [&](const BlochOutput& a, const BlochOutput&) { return f(a); },
      small_spec(22, 1 << 16));
  Estimate right = region_pair_expect(
      sm1(), {za}, {xb}, [&](const BlochOutput&, const BlochOutput& b) { return g(b); },
      small_spec(23, 1 << 16));

  double sigma = std::sqrt(joint.std_err * joint.std_err +
                           left.std_err * left.std_err + right.std_err * right.std_err) +
                 1e-9;
  CHECK(std::abs(joint.value - left.value * right.value) < 3.0 * sigma);
}

TEST_CASE("estimates are deterministic in the seed") {
  Region xp = make_region(StateLabel::XPlus, 0.05, 0.2, 0.2, {0.0, 0.9}, 1.0);
  ChannelParams ch;
  ch.dark_prob = 1e-6;
  auto a = region_pair_observables(sm1(), {xp}, {xp}, ch, small_spec(5, 1 << 12));
  auto b = region_pair_observables(sm1(), {xp}, {xp}, ch, small_spec(5, 1 << 12));
  CHECK(a.gain.value == b.gain.value);
  CHECK(a.gain.std_err == b.gain.std_err);
  CHECK(a.p_pair.value == b.p_pair.value);
  auto c = region_pair_observables(sm1(), {xp}, {xp}, ch, small_spec(6, 1 << 12));
  CHECK(a.gain.value != c.gain.value);
}

TEST_CASE("standard error shrinks at least like n^(-1/2)") {
  // doubling n three times twice over; the per-run error estimate from 8
  // replicates is itself noisy, so compare the endpoints
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.0, 0.9}, 1.0);
  auto kernel = [](const BlochOutput& a, const BlochOutput& b) {
    return std::exp(-a.mu - b.mu) * std::cos(3.0 * a.phi_hv);
  };
  Estimate lo = region_pair_expect(sm1(), {zh}, {zh}, kernel, small_spec(31, 1 << 12));
  Estimate hi = region_pair_expect(sm1(), {zh}, {zh}, kernel, small_spec(31, 1 << 18));
  CHECK(hi.std_err < 0.25 * lo.std_err);  // 64x points: at least 4x better
}

TEST_CASE("pair probability matches the closed-form region probabilities") {
  SourceModel sm = sm1();
  Region xp = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.0, 0.8}, 1.0);
  Region zh = make_region(StateLabel::ZH, 0.04, 0.3, 0.3, {0.2, 0.8}, 1.0);
  ChannelParams ch;
  auto obs = region_pair_observables(sm, {xp}, {zh}, ch, small_spec(8, 1 << 16));
  double expect = region_probability(sm, xp) * region_probability(sm, zh);
  CHECK(obs.p_pair.value == doctest::Approx(expect).epsilon(0.02));
  CHECK(std::abs(obs.p_pair.value - expect) < 4.0 * obs.p_pair.std_err + 1e-12);
}

TEST_CASE("degenerate region is rejected") {
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.5, 0.5}, 1.0);
  CHECK_THROWS(region_pair_expect(sm1(), {zh}, {zh},
                                  [](const BlochOutput&, const BlochOutput&) { return 1.0; },
                                  small_spec()));
}

TEST_CASE("factorization: constant yield") {
  Region a = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.0, 0.5}, 1.0);
  Region b = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.5, 0.9}, 1.0);
  auto y = [](double, double, double, double) { return 0.37; };
  FactorizationResult r = factorization_check(sm1(), a, b, y, 1, 2, small_spec(41, 1 << 15));
  RegionWeights wa = region_weights(sm1(), a, 1);
  RegionWeights wb = region_weights(sm1(), b, 2);
  CHECK(r.rhs == doctest::Approx(0.37 * wa.poisson[1] * wb.poisson[2]).epsilon(1e-9));
  CHECK(std::abs(r.lhs.value - r.rhs) < 3.0 * r.lhs.std_err + 1e-9);
}

TEST_CASE("factorization: angular yield across sector bins") {
  // Y = cos^2(theta_a) * (2 + cos(theta_b)) exercises the weight quotient
  auto y = [](double ta, double, double tb, double) {
    return std::cos(ta) * std::cos(ta) * (2.0 + std::cos(tb)) / 3.0;
  };
  for (int n : {0, 1, 2}) {
    Region a = make_region(StateLabel::XPlus, 0.05, 0.35, 0.3, {0.1, 0.5}, 1.0);
    Region b = make_region(StateLabel::XPlus, 0.05, 0.35, 0.3, {0.5, 0.9}, 1.0);
    FactorizationResult r =
        factorization_check(sm1(), a, b, y, n, 1, small_spec(43 + n, 1 << 16));
    CHECK(std::abs(r.lhs.value - r.rhs) < 3.0 * r.lhs.std_err + 1e-9);
  }
}

TEST_CASE("factorization: zero-photon weights are flat") {
  // n = m = 0 reduces the quotient to a plain region average
  Region a = make_region(StateLabel::ZH, 0.05, 0.3, 0.3, {0.0, 0.9}, 1.0);
  auto y = [](double ta, double, double tb, double) { return 1.0 + ta + tb; };
  FactorizationResult r = factorization_check(sm1(), a, a, y, 0, 0, small_spec(51, 1 << 14));
  // flat-weight quotient computed directly
  const QuadratureRule& rule = gauss_legendre(48);
  double mean = 0.0;
  for (int i = 0; i < 48; ++i) {
    double t = 0.025 + 0.025 * rule.nodes[i];
    mean += 0.5 * rule.weights[i] * (1.0 + t);  // one-sided average of (1 + theta)
  }
  double expect = 2.0 * mean - 1.0;  // E[1 + ta + tb] with independent sides
  RegionWeights w = region_weights(sm1(), a, 0);
  CHECK(r.rhs == doctest::Approx(w.poisson[0] * w.poisson[0] * expect).epsilon(1e-9));
}
