#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qkd/entropy.hpp"
#include "qkd/rng.hpp"
#include "qkd/source.hpp"

#include "oracles/quad2d.hpp"

using namespace qkd;

namespace {

ArmSample draw(std::uint64_t& st, double mu_max) {
  return sample_arm({to_unit_double(splitmix64(st)), to_unit_double(splitmix64(st)),
                     to_unit_double(splitmix64(st)), to_unit_double(splitmix64(st))},
                    mu_max);
}

// closed-form argmax of sqrt(x(m-x)) e^x on [0, m]
double arm_gain_argmax(double m) {
  return 0.5 * ((m - 1.0) + std::sqrt((m - 1.0) * (m - 1.0) + 2.0 * m));
}

}  // namespace

TEST_CASE("raw density at the symmetric point") {
  ArmSample s{0.5, 0.5, 1.0, 2.0};
  // (1/pi^2) * 2 * 2 * (1/2pi)
  CHECK(raw_density(s, 1.0) == doctest::Approx(2.0 / std::pow(M_PI, 3)).epsilon(1e-12));
}

TEST_CASE("raw density boundary is rejected") {
  CHECK_THROWS_AS(raw_density({0.0, 0.5, 0, 0}, 1.0), std::domain_error);
  CHECK_THROWS_AS(raw_density({0.5, 1.0, 0, 0}, 1.0), std::domain_error);
}

TEST_CASE("arcsine marginal normalizes to one") {
  // integrate the mu_h marginal with the smoothing substitution x = sin^2
  double total = quad2d::adaptive_1d(
      [](double u) { return 1.0; }, 0.0, 1.0, 1e-12);  // substituted variable is uniform
  CHECK(total == doctest::Approx(1.0));
  // and directly, stopping short of the endpoints
  double direct = quad2d::adaptive_1d(
      [](double x) { return 1.0 / (M_PI * std::sqrt(x * (1.0 - x))); }, 1e-10, 1.0 - 1e-10,
      1e-10);
  CHECK(direct == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("raw density against an empirical histogram") {
  // windowed density estimate from inverse-CDF samples around (0.1, 0.3)
  const double mu_max = 1.0;
  const int n = 10'000'000;
  const double wh = 0.005, wv = 0.005;
  std::uint64_t st = 42;
  long hits_h = 0, hits_v = 0;
  for (int i = 0; i < n; ++i) {
    ArmSample s = draw(st, mu_max);
    if (std::abs(s.mu_h - 0.1) < wh) ++hits_h;
    if (std::abs(s.mu_v - 0.3) < wv) ++hits_v;
  }
  double ph = hits_h / (2.0 * wh * n);
  double pv = hits_v / (2.0 * wv * n);
  double analytic = raw_density({0.1, 0.3, 0, 0}, mu_max) * 2.0 * M_PI;  // phase part off
  CHECK(ph * pv == doctest::Approx(analytic).epsilon(0.02));
}

TEST_CASE("sample_arm endpoints and median") {
  ArmSample z = sample_arm({0, 0, 0, 0}, 1.0);
  CHECK(z.mu_h == 0.0);
  CHECK(z.mu_v == 0.0);
  CHECK(z.phi_h == 0.0);
  ArmSample m = sample_arm({0.5, 0.5, 0.5, 0.5}, 2.0);
  CHECK(m.mu_h == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.mu_v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.phi_h == doctest::Approx(M_PI));
}

TEST_CASE("sample_arm empirical mean is mu_max/2") {
  const int n = 1'000'000;
  std::uint64_t st = 7;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += draw(st, 1.0).mu_h;
  double mean = acc / n;
  double sigma = std::sqrt(0.125) / std::sqrt(double(n));  // arcsine variance mu_max^2/8
  CHECK(std::abs(mean - 0.5) < 3.0 * sigma);
}

TEST_CASE("modulation acceptance vanishes on the axes and peaks at one") {
  SourceModel sm = SourceModel::make(1.0);
  CHECK(modulation_acceptance(sm, 0.0, 0.4) == 0.0);
  CHECK(modulation_acceptance(sm, 0.4, 0.0) == 0.0);
  double xs = arm_gain_argmax(1.0);
  CHECK(modulation_acceptance(sm, xs, xs) == doctest::Approx(1.0).epsilon(1e-10));
  // golden-section constant agrees with the closed-form stationary point
  std::uint64_t st = 3;
  for (int i = 0; i < 1000; ++i) {
    ArmSample s = draw(st, 1.0);
    CHECK(modulation_acceptance(sm, s) <= 1.0);
  }
}

TEST_CASE("accepted samples follow the exponential law (two-sample KS)") {
  // mu_h marginal of the accepted ensemble vs inverse-CDF samples of
  // p(x) = e^x / (e - 1) on [0, 1]
  const int want = 200'000;
  std::uint64_t st = 11;
  SourceModel sm = SourceModel::make(1.0);
  std::vector<double> accepted;
  accepted.reserve(want);
  while (int(accepted.size()) < want) {
    ArmSample s = draw(st, 1.0);
    if (to_unit_double(splitmix64(st)) < modulation_acceptance(sm, s))
      accepted.push_back(s.mu_h);
  }
  std::vector<double> reference(want);
  for (int i = 0; i < want; ++i) {
    double u = to_unit_double(splitmix64(st));
    reference[std::size_t(i)] = std::log(1.0 + u * (M_E - 1.0));
  }
  std::sort(accepted.begin(), accepted.end());
  std::sort(reference.begin(), reference.end());
  // two-sample KS statistic
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < accepted.size() && j < reference.size()) {
    if (accepted[i] <= reference[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(double(i) / accepted.size() - double(j) / reference.size()));
  }
  double ne = double(want) / 2.0;
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
  CHECK(p > 0.01);
}

TEST_CASE("to_bloch poles, equator, and direct evaluation") {
  CHECK(to_bloch({0.4, 0.0, 0.1, 0.2}).theta_hv == doctest::Approx(0.0));
  CHECK(to_bloch({0.2, 0.2, 0.0, 0.0}).theta_hv == doctest::Approx(0.5 * M_PI));
  BlochOutput b = to_bloch({0.1, 0.3, 0.3, 0.5});
  CHECK(b.phi_hv == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(b.theta_hv == doctest::Approx(2.0 * M_PI / 3.0).epsilon(1e-12));
  CHECK(b.mu == doctest::Approx(0.4));
  CHECK_THROWS_AS(to_bloch({0.0, 0.0, 0.0, 0.0}), std::domain_error);
}

TEST_CASE("to_bloch round-trips through arm intensities") {
  std::uint64_t st = 5;
  for (int i = 0; i < 1000; ++i) {
    ArmSample s = draw(st, 1.0);
    if (s.mu_h + s.mu_v <= 0.0) continue;
    BlochOutput b = to_bloch(s);
    double mu_h, mu_v;
    bloch_to_arms(b, mu_h, mu_v);
    CHECK(mu_h == doctest::Approx(s.mu_h).epsilon(1e-12));
    CHECK(mu_v == doctest::Approx(s.mu_v).epsilon(1e-12));
  }
}

TEST_CASE("region membership follows the sector geometry") {
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.0, 0.99}, 1.0);
  BlochOutput inside = to_bloch({0.5, 0.5 * std::tan(0.01), 0.0, 0.0});
  CHECK(region_contains(zh, inside));
  BlochOutput outside = to_bloch({0.5, 0.5 * std::tan(0.06), 0.0, 0.0});
  CHECK_FALSE(region_contains(zh, outside));
  // closed outer angular bound
  BlochOutput boundary = to_bloch({0.5, 0.5 * std::tan(0.05), 0.0, 0.0});
  CHECK(region_contains(zh, boundary));

  Region xp = make_region(StateLabel::XPlus, 0.05, 0.2, 0.2, {0.0, 0.99}, 1.0);
  BlochOutput xin = to_bloch({0.3, 0.3, 0.0, 0.1});
  CHECK(region_contains(xp, xin));
  BlochOutput xout = to_bloch({0.3, 0.3, 0.0, 0.25});
  CHECK_FALSE(region_contains(xp, xout));

  // radial window is half-open: (r_lo, r_hi]
  Region bin = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.2, 0.4}, 1.0);
  BlochOutput at_hi = to_bloch({0.4, 0.0, 0.0, 0.0});
  CHECK(region_contains(bin, at_hi));
  BlochOutput at_lo = to_bloch({0.2, 0.0, 0.0, 0.0});
  CHECK_FALSE(region_contains(bin, at_lo));
}

TEST_CASE("region weights: completeness over all photon numbers") {
  SourceModel sm = SourceModel::make(1.0);
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.0, 0.99}, 1.0);
  RegionWeights w = region_weights(sm, zh, 40);
  double sum = 0.0;
  for (double v : w.poisson) sum += v;
  CHECK(sum + w.tail == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.tail < 1e-12);
  for (double v : w.poisson) CHECK(v >= 0.0);
}

TEST_CASE("region weights: point-bin limit reduces to Poisson ratios") {
  SourceModel sm = SourceModel::make(1.0);
  Region thin = make_region(StateLabel::ZH, 1e-5, 0.2, 0.2, {0.6, 0.6 + 1e-6}, 1.0);
  RegionWeights w = region_weights(sm, thin, 10);
  // at theta ~ 0 the total intensity equals the radius
  double mu0 = 0.6;
  for (int n = 0; n <= 10; ++n)
    CHECK(w.poisson[std::size_t(n)] ==
          doctest::Approx(poisson_pmf(mu0, n)).epsilon(1e-4));
}

TEST_CASE("region weights against a 2-D adaptive quadrature oracle") {
  SourceModel sm = SourceModel::make(1.0);
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.0, 0.5}, 1.0);
  RegionWeights w = region_weights(sm, zh, 3);

  // oracle: integrate the modulated measure and the Poisson numerators over
  // the sector by adaptive quadrature, independent of the closed forms
  auto mass = quad2d::integrate(
      [&](double r, double th) { return r * std::exp(r * (std::cos(th) + std::sin(th))); },
      0.0, 0.5, 0.0, 0.05, 1e-10);
  auto p1 = quad2d::integrate(
      [&](double r, double th) {
        double mu = r * (std::cos(th) + std::sin(th));
        return r * std::exp(mu) * poisson_pmf(mu, 1);
      },
      0.0, 0.5, 0.0, 0.05, 1e-10);
  CHECK(w.poisson[1] == doctest::Approx(p1 / mass).epsilon(1e-8));
  CHECK(w.p_s == doctest::Approx(sm.mod_norm * mass).epsilon(1e-8));
}

TEST_CASE("region probability matches a Monte Carlo of the physical pipeline") {
  // raw sampling + acceptance + membership should reproduce p_s
  SourceModel sm = SourceModel::make(1.0);
  Region xp = make_region(StateLabel::XPlus, 0.05, 0.3, 0.3, {0.0, 0.8}, 1.0);
  Region xm = make_region(StateLabel::XMinus, 0.05, 0.3, 0.3, {0.0, 0.8}, 1.0);
  double p = region_probability(sm, xp) + region_probability(sm, xm);
  const int n = 4'000'000;
  std::uint64_t st = 17;
  long hits = 0;
  for (int i = 0; i < n; ++i) {
    ArmSample s = draw(st, 1.0);
    if (to_unit_double(splitmix64(st)) >= modulation_acceptance(sm, s)) continue;
    if (s.mu_h + s.mu_v <= 0.0) continue;
    BlochOutput b = to_bloch(s);
    if (region_contains(xp, b) || region_contains(xm, b)) ++hits;
  }
  double mc = double(hits) / n;
  double sigma = std::sqrt(p * (1.0 - p) / n);
  CHECK(std::abs(mc - p) < 4.0 * sigma + 1e-9);
}

TEST_CASE("ring subregions partition the Z window") {
  Region zh = make_region(StateLabel::ZH, 0.05, 0.2, 0.2, {0.0, 0.99}, 1.0);
  SourceModel sm = SourceModel::make(1.0);
  double total = 0.0;
  for (int k = 0; k < 7; ++k) total += region_probability(sm, ring_subregion(zh, k, 7));
  CHECK(total == doctest::Approx(region_probability(sm, zh)).epsilon(1e-10));
}
