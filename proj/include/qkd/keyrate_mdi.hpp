#pragma once

#include <functional>

#include "qkd/channel.hpp"
#include "qkd/decoy.hpp"
#include "qkd/integrate.hpp"
#include "qkd/source.hpp"

namespace qkd {

// Protocol-level knobs of the passive MDI pipeline. delta_z and t3 are left
// out: they are the optimized variables.
struct MdiConfig {
  double mu_max = 0.6;  // peak per-arm intensity of the four-laser source
  double delta_xy = 0.2;
  double delta_phi = 0.2;
  double f_ec = 1.16;
  int n_cut = 6;
  double k_sigma = 3.0;
  bool gain_weighted_ec = true;  // false: EC term exactly as printed, no gain factor
  int ring_count = 1;            // >1 enables the small-ring reconciliation split
};

// Default detector efficiency of the MDI relay (folded into the channel
// transmittance together with the fiber loss).
inline constexpr double kMdiDetectorEfficiency = 0.2;

struct KeyRateComponents {
  double p_z_a = 0.0, p_z_b = 0.0;
  double p1_z_a = 0.0, p1_z_b = 0.0;
  double y11_lower = 0.0, e11_upper = 0.0;
  double q_z = 0.0, e_z = 0.0;
  double ec_cost = 0.0;      // reconciliation term inside the braces
  double x_fraction = 0.0;   // per-user retained X fraction, all decoy bins
};

struct KeyRateResult {
  double rate = 0.0;
  double distance_km = 0.0;
  KeyRateComponents components;
  double delta_z = 0.0, t3 = 0.0, f_ec = 1.16;
  bool lp_infeasible = false;
};

// Asymptotic key rate of the passive protocol at fixed postselection
// parameters. Rings come from cfg.ring_count (1 = plain reconciliation).
KeyRateResult passive_rate(const MdiConfig& cfg, double delta_z, double t3,
                           const ChannelParams& ch, const IntegrationSpec& spec);

// Same rate with the Z windows split into ring_count polar rings for the
// reconciliation term; never below passive_rate up to integration error.
KeyRateResult small_ring_rate(const MdiConfig& cfg, double delta_z, double t3, int ring_count,
                              const ChannelParams& ch, const IntegrationSpec& spec);

struct GridSpec {
  double lo = 0.0, hi = 0.0;
  int n = 1;

  double at(int i) const { return n <= 1 ? lo : lo + (hi - lo) * i / double(n - 1); }
};

// Exhaustive grid argmax; ties break toward the smaller first coordinate.
// Exposed as a template so the search logic is testable on stub functions.
template <typename F>
std::pair<double, double> grid_argmax(const F& f, const GridSpec& g1, const GridSpec& g2,
                                      double* best_value = nullptr) {
  double best = -kLpInf;
  std::pair<double, double> arg{g1.at(0), g2.at(0)};
  for (int i = 0; i < g1.n; ++i)
    for (int j = 0; j < g2.n; ++j) {
      double v = f(g1.at(i), g2.at(j));
      if (v > best + 1e-15) {
        best = v;
        arg = {g1.at(i), g2.at(j)};
      }
    }
  if (best_value) *best_value = best;
  return arg;
}

// Grid optimization over (delta_z, t3).
KeyRateResult optimize_passive(const MdiConfig& cfg, const GridSpec& delta_z_grid,
                               const GridSpec& t3_grid, const ChannelParams& ch,
                               const IntegrationSpec& spec);

// Active three-decoy baseline driven through the same relay model with exact
// BB84 states at fixed intensities (signal mu > nu > omega).
struct ActiveMdiResult {
  double rate = 0.0;
  double distance_km = 0.0;
  double mu = 0.0, nu = 0.0, omega = 0.0;
  double y11_lower = 0.0, e11_upper = 0.0;
  double q_z = 0.0, e_z = 0.0;
  bool lp_infeasible = false;
};

ActiveMdiResult active_rate(const ChannelParams& ch, double mu, double nu, double omega,
                            double f_ec, int n_cut = 6, int phase_nodes = 64);

ActiveMdiResult optimize_active(const ChannelParams& ch, double f_ec,
                                const std::vector<double>& mu_grid,
                                const std::vector<double>& nu_grid,
                                const std::vector<double>& omega_grid, int n_cut = 6);

// Per-user probability that an emission is retained as an X-basis signal
// (both azimuth windows, all decoy bins up to t3). Closed-form quadrature.
double x_basis_retained_fraction(const MdiConfig& cfg, double t3);

}  // namespace qkd
