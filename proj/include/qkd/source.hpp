#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace qkd {

// One emission of the four-laser passive source, described by the locally
// monitored arm intensities and phases.
struct ArmSample {
  double mu_h = 0.0;
  double mu_v = 0.0;
  double phi_h = 0.0;
  double phi_v = 0.0;
};

// Bloch-sphere coordinates of an emission: mu = mu_h + mu_v,
// theta_hv = 2 acos(sqrt(mu_h/mu)), phi_hv = phi_v - phi_h (mod 2pi).
struct BlochOutput {
  double mu = 0.0;
  double theta_hv = 0.0;
  double phi_hv = 0.0;
  double phi_global = 0.0;
};

enum class StateLabel { ZH, ZV, XPlus, XMinus };
enum class Basis { Z, X };

inline Basis basis_of(StateLabel l) {
  return (l == StateLabel::ZH || l == StateLabel::ZV) ? Basis::Z : Basis::X;
}
inline int bit_of(StateLabel l) {
  return (l == StateLabel::ZH || l == StateLabel::XPlus) ? 0 : 1;
}

// Intensity window as fractions of mu_max.
struct IntensityBin {
  double t_lo = 0.0;
  double t_hi = 1.0;
};

// Source constants fixed once per mu_max. mod_norm is the constant C of the
// modulated postselection q_mu, chosen so that max q_mu = 1 over the domain.
struct SourceModel {
  double mu_max = 1.0;
  double mod_norm = 0.0;

  static SourceModel make(double mu_max);
};

// A postselection window. Geometry lives in the (mu_h, mu_v) plane in polar
// form: r = hypot(mu_h, mu_v), theta = atan2(mu_v, mu_h) in [0, pi/2].
// Z windows are sectors hugging an axis, X windows straddle the diagonal and
// additionally constrain the relative phase phi_hv. Radial windows are
// half-open (r_lo, r_hi]; angular bounds are closed.
struct Region {
  StateLabel label = StateLabel::ZH;
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  double phi_center = 0.0;  // azimuth window center; half-width pi = no cut
  double phi_half = 0.0;
  double r_lo = 0.0;  // absolute units, not fractions
  double r_hi = 0.0;
  double mu_max = 1.0;
};

// Region probability and region-averaged Poisson weights under the modulated
// source distribution. p_s is unconditional per emitted pulse (the modulated
// postselection acceptance is included). poisson[n] + tail sums to 1.
struct RegionWeights {
  double p_s = 0.0;
  std::vector<double> poisson;
  double tail = 0.0;
};

Region make_region(StateLabel label, double delta_z, double delta_xy, double delta_phi,
                   IntensityBin bin, double mu_max);

// k-th of ring_count equal polar-angle subdivisions of a Z window.
Region ring_subregion(const Region& z_region, int ring, int ring_count);

// Raw (pre-postselection) density of (mu_h, mu_v, phi_hv): product of two
// arcsine laws and a uniform phase. Only defined strictly inside the domain.
double raw_density(const ArmSample& s, double mu_max);

// Inverse-CDF realization of the raw law: mu = mu_max sin^2(pi u / 2) per arm,
// phases 2 pi u. Deterministic in u.
ArmSample sample_arm(const std::array<double, 4>& u, double mu_max);

// Modulated-postselection keep probability q_mu, in [0, 1] with max 1.
double modulation_acceptance(const SourceModel& sm, double mu_h, double mu_v);
inline double modulation_acceptance(const SourceModel& sm, const ArmSample& s) {
  return modulation_acceptance(sm, s.mu_h, s.mu_v);
}

BlochOutput to_bloch(const ArmSample& s);

// (mu_h, mu_v) of a Bloch point: mu_h = mu cos^2(theta_hv/2).
void bloch_to_arms(const BlochOutput& b, double& mu_h, double& mu_v);

bool region_contains(const Region& r, const BlochOutput& b);

// Polar angle of the state in the (mu_h, mu_v) plane.
inline double sector_theta(const BlochOutput& b) {
  double c = std::cos(0.5 * b.theta_hv);
  double mu_h = b.mu * c * c;
  return std::atan2(b.mu - mu_h, mu_h);
}

// Density of retained signals in polar coordinates, without the constant C:
// rho(r, theta) = r exp(r (cos theta + sin theta)). The full measure is
// mod_norm * rho dr dtheta * dphi/(2pi).
inline double modulated_polar_weight(double r, double theta) {
  return r * std::exp(r * (std::cos(theta) + std::sin(theta)));
}

RegionWeights region_weights(const SourceModel& sm, const Region& region, int n_cut,
                             int quad_nodes = 64);

// P_S alone (same as region_weights(...).p_s but cheaper).
double region_probability(const SourceModel& sm, const Region& region, int quad_nodes = 64);

// Key-side statistics. The raw key ensemble keeps every emission whose
// sector angle falls in a Z window — the modulated discard and the decoy
// intensity bins exist only to decouple the parameter-estimation data, so
// they are not charged to key rounds.

// Probability that one emission lands in either Z cap (both caps, all
// intensities) under the raw arcsine law.
double raw_z_probability(double delta_z, double mu_max, int quad_nodes = 96);

// Raw-ensemble Poisson weights over one Z cap restricted to sector angles
// (theta_lo, theta_hi] within [0, delta_z]; pass 0, delta_z for the full cap.
RegionWeights raw_z_weights(double theta_lo, double theta_hi, double mu_max, int n_cut,
                            int quad_nodes = 96);

}  // namespace qkd
