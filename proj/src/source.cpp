#include "qkd/source.hpp"

#include <cmath>
#include <stdexcept>

#include "qkd/entropy.hpp"
#include "qkd/quadrature.hpp"

namespace qkd {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_2pi(double x) {
  x = std::fmod(x, kTwoPi);
  return x < 0.0 ? x + kTwoPi : x;
}

// sqrt(x (mu_max - x)) e^x, the per-arm factor of q_mu / (C pi^2).
double arm_factor(double x, double mu_max) {
  double t = x * (mu_max - x);
  return t <= 0.0 ? 0.0 : std::sqrt(t) * std::exp(x);
}

// Golden-section maximum of arm_factor on [0, mu_max].
double arm_factor_max(double mu_max) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = mu_max;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (arm_factor(c, mu_max) > arm_factor(d, mu_max))
      b = d;
    else
      a = c;
    c = b - gr * (b - a);
    d = a + gr * (b - a);
    if (b - a < 1e-14 * mu_max) break;
  }
  return arm_factor(0.5 * (a + b), mu_max);
}

}  // namespace

SourceModel SourceModel::make(double mu_max) {
  if (mu_max <= 0.0) throw std::invalid_argument("mu_max must be positive");
  SourceModel sm;
  sm.mu_max = mu_max;
  // q_mu factorizes over the arms, so its maximum sits on the diagonal.
  double g = arm_factor_max(mu_max);
  sm.mod_norm = 1.0 / (M_PI * M_PI * g * g);
  return sm;
}

Region make_region(StateLabel label, double delta_z, double delta_xy, double delta_phi,
                   IntensityBin bin, double mu_max) {
  Region r;
  r.label = label;
  r.mu_max = mu_max;
  r.r_lo = bin.t_lo * mu_max;
  r.r_hi = bin.t_hi * mu_max;
  switch (label) {
    case StateLabel::ZH:
      r.theta_lo = 0.0;
      r.theta_hi = delta_z;
      r.phi_center = 0.0;
      r.phi_half = M_PI;
      break;
    case StateLabel::ZV:
      r.theta_lo = 0.5 * M_PI - delta_z;
      r.theta_hi = 0.5 * M_PI;
      r.phi_center = 0.0;
      r.phi_half = M_PI;
      break;
    case StateLabel::XPlus:
      r.theta_lo = 0.25 * M_PI - delta_xy;
      r.theta_hi = 0.25 * M_PI + delta_xy;
      r.phi_center = 0.0;
      r.phi_half = delta_phi;
      break;
    case StateLabel::XMinus:
      r.theta_lo = 0.25 * M_PI - delta_xy;
      r.theta_hi = 0.25 * M_PI + delta_xy;
      r.phi_center = M_PI;
      r.phi_half = delta_phi;
      break;
  }
  return r;
}

Region ring_subregion(const Region& z_region, int ring, int ring_count) {
  if (ring < 0 || ring >= ring_count) throw std::out_of_range("ring index");
  Region r = z_region;
  double w = (z_region.theta_hi - z_region.theta_lo) / ring_count;
  if (z_region.label == StateLabel::ZV) {
    // count rings outward from the mu_v axis
    r.theta_hi = z_region.theta_hi - ring * w;
    r.theta_lo = r.theta_hi - w;
  } else {
    r.theta_lo = z_region.theta_lo + ring * w;
    r.theta_hi = r.theta_lo + w;
  }
  return r;
}

double raw_density(const ArmSample& s, double mu_max) {
  double th = s.mu_h * (mu_max - s.mu_h);
  double tv = s.mu_v * (mu_max - s.mu_v);
  if (th <= 0.0 || tv <= 0.0)
    throw std::domain_error("raw_density: non-integrable point on the intensity boundary");
  return 1.0 / (M_PI * M_PI * std::sqrt(th) * std::sqrt(tv)) / kTwoPi;
}

ArmSample sample_arm(const std::array<double, 4>& u, double mu_max) {
  ArmSample s;
  double sh = std::sin(0.5 * M_PI * u[0]);
  double sv = std::sin(0.5 * M_PI * u[1]);
  s.mu_h = mu_max * sh * sh;
  s.mu_v = mu_max * sv * sv;
  s.phi_h = kTwoPi * u[2];
  s.phi_v = kTwoPi * u[3];
  return s;
}

double modulation_acceptance(const SourceModel& sm, double mu_h, double mu_v) {
  double q = sm.mod_norm * M_PI * M_PI * arm_factor(mu_h, sm.mu_max) * arm_factor(mu_v, sm.mu_max);
  return q < 1.0 ? q : 1.0;  // guard rounding at the maximum
}

BlochOutput to_bloch(const ArmSample& s) {
  double mu = s.mu_h + s.mu_v;
  if (mu <= 0.0) throw std::domain_error("to_bloch: vacuum sample, undefined polarization");
  BlochOutput b;
  b.mu = mu;
  b.theta_hv = 2.0 * std::acos(std::sqrt(std::min(1.0, s.mu_h / mu)));
  b.phi_hv = wrap_2pi(s.phi_v - s.phi_h);
  b.phi_global = s.phi_h;
  return b;
}

void bloch_to_arms(const BlochOutput& b, double& mu_h, double& mu_v) {
  double c = std::cos(0.5 * b.theta_hv);
  mu_h = b.mu * c * c;
  mu_v = b.mu - mu_h;
}

bool region_contains(const Region& r, const BlochOutput& b) {
  constexpr double eps = 1e-12;  // closed bounds, tolerant of coordinate roundoff
  double mu_h, mu_v;
  bloch_to_arms(b, mu_h, mu_v);
  double rad = std::hypot(mu_h, mu_v);
  double theta = std::atan2(mu_v, mu_h);
  if (theta < r.theta_lo - eps || theta > r.theta_hi + eps) return false;
  if (!(rad > r.r_lo + eps && rad <= r.r_hi + eps)) return false;
  if (r.phi_half < M_PI) {
    double d = std::abs(wrap_2pi(b.phi_hv - r.phi_center));
    d = std::min(d, kTwoPi - d);
    if (d > r.phi_half + eps) return false;
  }
  return true;
}

namespace {

// closed radial integrals over (r_lo, r_hi]:
//   int r^(n+1) dr  and  int r e^(a r) dr = ((a r - 1) e^(a r)) / a^2
double radial_power(const Region& g, int n) {
  return (std::pow(g.r_hi, n + 2) - std::pow(g.r_lo, n + 2)) / double(n + 2);
}

double radial_exp(const Region& g, double a) {
  auto prim = [a](double r) { return (a * r - 1.0) * std::exp(a * r) / (a * a); };
  return prim(g.r_hi) - prim(g.r_lo);
}

}  // namespace

RegionWeights region_weights(const SourceModel& sm, const Region& region, int n_cut,
                             int quad_nodes) {
  if (region.theta_hi <= region.theta_lo || region.r_hi <= region.r_lo)
    throw std::invalid_argument("region_weights: degenerate region");

  // mass = int_theta int_r r e^{r(cos+sin)}; the Poisson numerators reduce to
  // powers because the modulated e^{+mu} cancels the Poisson e^{-mu} exactly.
  double mass = integrate_gl(
      [&](double th) { return radial_exp(region, std::cos(th) + std::sin(th)); },
      region.theta_lo, region.theta_hi, quad_nodes);
  if (mass <= 0.0) throw std::domain_error("region_weights: degenerate region");

  RegionWeights w;
  w.p_s = sm.mod_norm * mass * (region.phi_half >= M_PI ? 1.0 : region.phi_half / M_PI);
  w.poisson.resize(n_cut + 1);
  double acc = 0.0;
  for (int n = 0; n <= n_cut; ++n) {
    double ang = integrate_gl(
        [&](double th) { return std::pow(std::cos(th) + std::sin(th), n); },
        region.theta_lo, region.theta_hi, quad_nodes);
    w.poisson[n] = radial_power(region, n) * ang / std::exp(log_factorial(n)) / mass;
    acc += w.poisson[n];
  }
  w.tail = std::max(0.0, 1.0 - acc);
  return w;
}

double region_probability(const SourceModel& sm, const Region& region, int quad_nodes) {
  double mass = integrate_gl(
      [&](double th) { return radial_exp(region, std::cos(th) + std::sin(th)); },
      region.theta_lo, region.theta_hi, quad_nodes);
  return sm.mod_norm * mass * (region.phi_half >= M_PI ? 1.0 : region.phi_half / M_PI);
}

namespace {

// Arcsine CDF on [0, mu_max] in the substituted variable: the raw law is
// uniform in u with mu = mu_max sin^2(pi u / 2).
double arcsine_u(double mu, double mu_max) {
  if (mu <= 0.0) return 0.0;
  if (mu >= mu_max) return 1.0;
  return 2.0 / M_PI * std::asin(std::sqrt(mu / mu_max));
}

}  // namespace

double raw_z_probability(double delta_z, double mu_max, int quad_nodes) {
  // P(mu_v <= mu_h tan(delta_z)) for one cap; the two caps mirror each other
  double tan_d = std::tan(delta_z);
  double cap = integrate_gl(
      [&](double u) {
        double mu_h = mu_max * std::pow(std::sin(0.5 * M_PI * u), 2);
        return arcsine_u(mu_h * tan_d, mu_max);
      },
      0.0, 1.0, quad_nodes);
  return 2.0 * cap;
}

RegionWeights raw_z_weights(double theta_lo, double theta_hi, double mu_max, int n_cut,
                            int quad_nodes) {
  if (theta_hi <= theta_lo) throw std::invalid_argument("raw_z_weights: empty window");
  double tan_lo = std::tan(theta_lo), tan_hi = std::tan(theta_hi);
  const QuadratureRule& rule = gauss_legendre(quad_nodes);
  RegionWeights w;
  w.poisson.assign(n_cut + 1, 0.0);
  double mass = 0.0;
  for (int i = 0; i < quad_nodes; ++i) {
    double uh = 0.5 * (rule.nodes[i] + 1.0);
    double wh = 0.5 * rule.weights[i];
    double mu_h = mu_max * std::pow(std::sin(0.5 * M_PI * uh), 2);
    double v_lo = arcsine_u(mu_h * tan_lo, mu_max);
    double v_hi = arcsine_u(mu_h * tan_hi, mu_max);
    if (v_hi <= v_lo) continue;
    for (int j = 0; j < quad_nodes; ++j) {
      double uv = v_lo + (v_hi - v_lo) * 0.5 * (rule.nodes[j] + 1.0);
      double wv = (v_hi - v_lo) * 0.5 * rule.weights[j] * wh;
      double mu = mu_h + mu_max * std::pow(std::sin(0.5 * M_PI * uv), 2);
      mass += wv;
      for (int n = 0; n <= n_cut; ++n) w.poisson[n] += wv * poisson_pmf(mu, n);
    }
  }
  w.p_s = mass;  // one cap; phases unconstrained
  double acc = 0.0;
  for (int n = 0; n <= n_cut; ++n) acc += (w.poisson[n] /= mass);
  w.tail = std::max(0.0, 1.0 - acc);
  return w;
}

}  // namespace qkd
