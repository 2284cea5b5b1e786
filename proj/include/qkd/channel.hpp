#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <utility>

#include "qkd/source.hpp"

namespace qkd {

struct RotationSpec {
  Eigen::Vector3d axis{0.0, 1.0, 0.0};
  double angle = 0.0;
};

// Fiber + relay parameters for the two-user MDI link. Transmittance per arm
// is 10^(-alpha L / 10) * eta_d.
struct ChannelParams {
  double alpha_db_per_km = 0.2;
  double length_a_km = 0.0;
  double length_b_km = 0.0;
  double eta_d = 1.0;
  double dark_prob = 1e-6;
  RotationSpec misalign_a{};
  RotationSpec misalign_b{};

  double transmittance_a() const {
    return std::pow(10.0, -alpha_db_per_km * length_a_km / 10.0) * eta_d;
  }
  double transmittance_b() const {
    return std::pow(10.0, -alpha_db_per_km * length_b_km / 10.0) * eta_d;
  }
};

// Fixed misalignment with pure-state error probability err_prob per user.
// Opposite senses for the two users so the errors add at the relay.
ChannelParams make_mdi_channel(double distance_km, double dark_prob, double misalign_total,
                               double alpha_db_per_km = 0.2, double eta_d = 1.0);

enum class Announcement { PsiMinus, PsiPlus, Fail };

// Detector pattern bit layout: bit0 = 1H, bit1 = 1V, bit2 = 2H, bit3 = 2V.
Announcement classify_pattern(unsigned mask);

// Rodrigues rotation of a unit Bloch vector about a unit axis.
Eigen::Vector3d rotate_bloch(const Eigen::Vector3d& s, const Eigen::Vector3d& axis, double gamma);

// Two coherent fields on a 50:50 splitter. Returns (mu_c, mu_d) with
// mu_c = mu1/2 + mu2/2 - sqrt(mu1 mu2) sin(phi1 - phi2); energy conserved.
std::pair<double, double> interfere(double mu1, double phi1, double mu2, double phi2);

// Threshold detector: 1 - (1 - p_d) e^(-lambda).
double click_prob(double lambda, double dark_prob);

// Mean photon numbers at the four relay detectors for one phase slice.
struct RelayIntensities {
  double d1h = 0.0, d1v = 0.0, d2h = 0.0, d2v = 0.0;
};

// One user's state as seen at the relay input: H/V leg intensities (already
// rotated and attenuated) plus the rotated relative phase.
struct RelayInput {
  double mu_h = 0.0;
  double mu_v = 0.0;
  double phi_hv = 0.0;
};

// Decompose an emitted state into its relay input under a channel side.
RelayInput propagate(const BlochOutput& b, const RotationSpec& misalign, double transmittance);

// Interfere the H legs at relative phase phi_r and the V legs at
// phi_r + phi_hv_a - phi_hv_b.
RelayIntensities relay_intensities(const RelayInput& a, const RelayInput& b, double phi_r);

// Probabilities of the 16 click patterns (independent threshold detectors).
std::array<double, 16> pair_event_probs(const RelayIntensities& lam, double dark_prob);

struct GainQber {
  double q_minus = 0.0;
  double qe_minus = 0.0;
  double q_plus = 0.0;
  double qe_plus = 0.0;

  double gain() const { return q_minus + q_plus; }
  double err_gain() const { return qe_minus + qe_plus; }
};

// Per-pulse-pair gain and error-gain for both Bell announcements, averaged
// over the random inter-user phase phi_r by Gauss-Legendre. Error rule from
// the sifting table: Z expects anti-correlated bits under either
// announcement; X expects anti-correlation under psi- and correlation
// under psi+.
GainQber pair_gain_qber(StateLabel label_a, const BlochOutput& a, StateLabel label_b,
                        const BlochOutput& b, const ChannelParams& ch, int phase_nodes = 64);

}  // namespace qkd
