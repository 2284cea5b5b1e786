#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qkd/integrate.hpp"

namespace qkd::cka {

using Complex = std::complex<double>;

// Four-user twin-field CKA network with fully passive two-laser sources.
// loss_db is the end-to-end communication loss (user - relay - user); each
// arm carries half of it.
struct CkaParams {
  int n_users = 4;
  int m_slices = 8;
  double mu_max = 0.2;   // peak output intensity; the mean over a uniform phase pair is mu_max/2
  double loss_db = 0.0;
  double p_d = 1e-8;
  double eta_d = 1.0;
  int n_bar = 2;         // photon cutoff of the phase-error formula
  int decoy_bins = 2;
  int cut_x = 2;         // intra-user slice mismatch threshold
  int cut_y = 2;         // inter-user mean mismatch threshold
  int tail_terms = 12;   // tail window of the phase-error remainder
  double k_sigma = 3.0;
  long long pe_points = 1 << 14;  // QMC points per decoy cell

  int n_detectors() const {
    int d = 1;
    while (d < n_users) d <<= 1;
    return d;
  }
  double arm_transmittance() const {
    return std::pow(10.0, -(loss_db / 2.0) / 10.0) * eta_d;
  }
  // Amplitude of the equivalent perfect source: alpha^2 = mean output
  // intensity of the passive source over the key-generation ensemble.
  double alpha() const { return std::sqrt(0.5 * mu_max); }
  double slice_half_width() const { return M_PI / m_slices; }
};

// A full assignment of both slice indices for every user (1-based, length
// 2 n_users, ordered k_{11}, k_{12}, k_{21}, k_{22}, ...).
struct SliceCombo {
  std::vector<int> k;
};

// Local interference of the two source lasers. Output intensity
// mu = mu_max cos^2((phi1-phi2)/2). Output phase convention: the phase of
// cos((phi1-phi2)/2) e^{i(phi1+phi2)/2}, i.e. the mean phase plus pi whenever
// the interference cosine is negative, so the sifting phase always equals the
// physical amplitude phase. Inputs are reduced mod 2pi first.
std::pair<double, double> passive_output(double phi1, double phi2, double mu_max);

// Same interference as a complex amplitude (what the relay actually sees).
Complex passive_amplitude(double phi1, double phi2, double mu_max);

// Hadamard-type relay: A_j = N_D^{-1/2} sum_i (-1)^(j.i) alpha_i with the
// binary dot product of the index vectors. Missing inputs are vacuum.
std::vector<Complex> bsnet_amplitudes(const std::vector<Complex>& alpha, int n_detectors);

// Probability of the exclusive single-click event per detector.
std::vector<double> single_click_probs(const std::vector<Complex>& amps, double p_d);

// Photon-number yield tensor over m in [0, n_max]^(n_users), flattened.
struct YieldTensor {
  int n_users = 0;
  int n_max = 0;
  std::vector<double> y;

  static YieldTensor zeros(int users, int n_max);
  std::size_t index(const std::vector<int>& m) const;
  double at(const std::vector<int>& m) const { return y[index(m)]; }
  double& at(const std::vector<int>& m) { return y[index(m)]; }
};

// Exact single-click yields of the lossy Hadamard relay for Fock inputs
// (identical for every detector): binomial thinning per user, bosonic
// bunching of the survivors onto one port, dark counts elsewhere.
YieldTensor exact_yields(const CkaParams& params);

// Decoy cell = one intensity-bin index per user.
using Cell = std::vector<int>;

// PE-round gain per detector for one decoy cell: intensities from the
// arcsine law restricted to each user's bin, phases independent uniform.
std::vector<Estimate> pe_gain(const Cell& cell, const CkaParams& params,
                              const IntegrationSpec& spec);

// Region-averaged Poisson weight <P(n)> for one intensity bin.
double pe_weight(const CkaParams& params, int bin, int n, int quad_nodes = 64);

// Per-detector upper-bound tensors from the two-decoy linear program.
struct CkaLpResult {
  std::vector<YieldTensor> upper;  // one per detector
  bool feasible = true;
};
CkaLpResult cka_lp(const std::vector<Cell>& cells,
                   const std::vector<std::vector<Estimate>>& gains, const CkaParams& params);

// Through-port probability of the local splitter for phase offsets
// (phi1, phi2): |t|^2 with t = (1 + e^{i(pi/2 + phi2 - phi1)}) / 2. A photon
// passes with this probability, so P(m|n) is binomial in it.
inline double local_channel_transmission(double phi1, double phi2) {
  double c = std::cos(0.5 * (0.5 * M_PI + phi2 - phi1));
  return c * c;
}

// Local-channel photon-number transition matrix, averaged over the slice
// width: column-stochastic, upper triangular in (m <= n).
struct TransitionMatrix {
  int n_max = 0;
  std::vector<double> t;  // (n_max+1)^2, t[m * (n_max+1) + n] = P(m | n)

  double at(int m, int n) const { return t[std::size_t(m) * (n_max + 1) + n]; }
};
TransitionMatrix transition_matrix(double delta_phi, int n_max, int quad_nodes = 32);

// Convolve the externally estimated yields with the per-user local channels:
// Ybar_n = sum_{m <= n} prod_i T_i(m_i | n_i) Ybar_m, clipped to [0, 1].
YieldTensor correct_yields(const YieldTensor& y, const std::vector<TransitionMatrix>& t_users);

// Numerator of the phase-error bound (the bound itself is numerator / Pr).
double phase_error_numerator(const YieldTensor& y_corrected, const std::vector<double>& alphas,
                             int n_bar, int tail_terms);
double phase_error_bound(double numerator, double pr_kg);

// Key-generation statistics of one slice combo: single-click probability per
// detector and the effective pairwise QBER (reference user 0 vs user i).
// Error model: signal-driven clicks whose pairwise interference sign differs
// from the slice-midpoint recipe, plus dark-driven clicks at weight 1/2;
// min(Q, 1-Q) encodes the per-bucket flip recipe.
struct KgStats {
  std::vector<double> pr;                   // [detector]
  std::vector<std::vector<double>> qber;    // [detector][pair i-1]
};
KgStats kg_statistics(const SliceCombo& combo, const CkaParams& params,
                      const IntegrationSpec& spec);

bool branch_filter(const SliceCombo& combo, int cut_x, int cut_y, int m_slices);

enum class YieldMode { TwoDecoyLp, Exact };

struct CkaRateResult {
  double rate = 0.0;
  long long combos_kept = 0;    // after branch cutting (full count over all rotations)
  long long combos_total = 0;   // M^(2 n_users)
  bool lp_infeasible = false;
};

// Conference key rate: averages max(0, sum_j Pr(Omega_j|KG,k) r_j(k)) over
// kept combos. Uses the exact invariance under a global slice rotation
// (k_{A1} pinned, result scaled by M) unless exhaustive is set.
CkaRateResult total_rate(const CkaParams& params, const IntegrationSpec& spec, YieldMode mode,
                         bool exhaustive = false);

// Active twin-field CKA baseline: deterministic 0/pi phase encoding at fixed
// per-user amplitude, phase-randomized two-decoy parameter estimation.
struct ActiveCkaConfig {
  std::vector<double> decoy_intensities;  // per-user decoy set (same for all users)
};
double active_cka_rate(const CkaParams& params, const std::vector<double>& alphas,
                       const ActiveCkaConfig& cfg, const IntegrationSpec& spec);

}  // namespace qkd::cka
