#include "qkd/keyrate_mdi.hpp"

#include <algorithm>
#include <cmath>

#include "qkd/entropy.hpp"
#include "qkd/rng.hpp"

namespace qkd {

namespace {

IntegrationSpec derived(const IntegrationSpec& spec, std::uint64_t tag, long long n_points = 0) {
  IntegrationSpec s = spec;
  s.seed = hash_combine(spec.seed, tag);
  if (n_points > 0) s.n_points = n_points;
  return s;
}

RegionSet z_set(const MdiConfig& cfg, double delta_z, IntensityBin bin) {
  return {make_region(StateLabel::ZH, delta_z, cfg.delta_xy, cfg.delta_phi, bin, cfg.mu_max),
          make_region(StateLabel::ZV, delta_z, cfg.delta_xy, cfg.delta_phi, bin, cfg.mu_max)};
}

RegionSet x_set(const MdiConfig& cfg, double delta_z, IntensityBin bin) {
  return {make_region(StateLabel::XPlus, delta_z, cfg.delta_xy, cfg.delta_phi, bin, cfg.mu_max),
          make_region(StateLabel::XMinus, delta_z, cfg.delta_xy, cfg.delta_phi, bin, cfg.mu_max)};
}

std::vector<IntensityBin> decoy_bins(double t3) {
  return {{0.0, t3 / 3.0}, {t3 / 3.0, 2.0 * t3 / 3.0}, {2.0 * t3 / 3.0, t3}};
}

}  // namespace

double x_basis_retained_fraction(const MdiConfig& cfg, double t3) {
  SourceModel sm = SourceModel::make(cfg.mu_max);
  IntensityBin all{0.0, t3};
  double p = 0.0;
  for (const Region& g : x_set(cfg, 0.0, all)) p += region_probability(sm, g);
  return p;
}

KeyRateResult passive_rate(const MdiConfig& cfg, double delta_z, double t3,
                           const ChannelParams& ch, const IntegrationSpec& spec) {
  SourceModel sm = SourceModel::make(cfg.mu_max);
  std::vector<IntensityBin> bins = decoy_bins(t3);
  const int nb = int(bins.size());

  KeyRateResult res;
  res.distance_km = ch.length_a_km + ch.length_b_km;
  res.delta_z = delta_z;
  res.t3 = t3;
  res.f_ec = cfg.f_ec;

  // Poisson region weights depend on the angular window and the radial bin
  // only; both users share them.
  std::vector<RegionWeights> wz(nb), wx(nb);
  for (int i = 0; i < nb; ++i) {
    wz[i] = region_weights(
        sm, make_region(StateLabel::ZH, delta_z, cfg.delta_xy, cfg.delta_phi, bins[i], cfg.mu_max),
        cfg.n_cut);
    wx[i] = region_weights(
        sm,
        make_region(StateLabel::XPlus, delta_z, cfg.delta_xy, cfg.delta_phi, bins[i], cfg.mu_max),
        cfg.n_cut);
  }

  std::vector<DecoyObservation> z_obs, x_obs;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      RegionPairObservables oz = region_pair_observables(
          sm, z_set(cfg, delta_z, bins[i]), z_set(cfg, delta_z, bins[j]), ch,
          derived(spec, hash_combine(0x5a, i * 16 + j)));
      z_obs.push_back({i, j, Basis::Z, oz.gain, oz.err_gain, wz[i], wz[j]});
      RegionPairObservables ox = region_pair_observables(
          sm, x_set(cfg, delta_z, bins[i]), x_set(cfg, delta_z, bins[j]), ch,
          derived(spec, hash_combine(0x58, i * 16 + j)));
      x_obs.push_back({i, j, Basis::X, ox.gain, ox.err_gain, wx[i], wx[j]});
    }

  DecoyLp z_lp = build_lp(z_obs, cfg.n_cut, cfg.k_sigma);
  DecoyLp x_lp = build_lp(x_obs, cfg.n_cut, cfg.k_sigma);
  YieldBounds bounds = solve_bounds(z_lp, x_lp);

  // Key rounds keep the raw Z sectors over the full intensity range; the
  // modulated discard and the decoy bins only shape the estimation data.
  double p_z = raw_z_probability(delta_z, cfg.mu_max);
  RegionWeights wkey = raw_z_weights(0.0, delta_z, cfg.mu_max, cfg.n_cut);

  const int K = std::max(1, cfg.ring_count);
  RawZObservables key = raw_z_observables(delta_z, cfg.mu_max, K, ch, derived(spec, 0x2f00));
  double q_z = key.gain.value;
  double e_z = q_z > 0.0 ? std::clamp(key.err_gain.value / q_z, 0.0, 1.0) : 0.0;

  KeyRateComponents& c = res.components;
  c.p_z_a = c.p_z_b = p_z;
  c.p1_z_a = c.p1_z_b = wkey.poisson[1];
  c.y11_lower = bounds.y11_lower;
  c.e11_upper = bounds.e11_upper;
  c.q_z = q_z;
  c.e_z = e_z;
  c.x_fraction = x_basis_retained_fraction(cfg, t3);
  res.lp_infeasible = !bounds.feasible;

  // Reconciliation cost inside the braces.
  double ec = 0.0;
  if (!cfg.gain_weighted_ec) {
    ec = cfg.f_ec * binary_entropy(e_z);  // formula as printed; no ring split
  } else if (K <= 1) {
    ec = cfg.f_ec * q_z * binary_entropy(e_z);
  } else {
    // Small-ring split: per ring pair, conditional probability times gain
    // times entropy of the ring-pair error rate. Jensen on the concave
    // entropy makes this never exceed the pooled cost.
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l) {
        double frac = key.ring_prob[k] * key.ring_prob[l];
        double q = key.ring_gain[k][l].value;
        if (frac <= 0.0 || q <= 0.0) continue;
        double e = std::clamp(key.ring_err_gain[k][l].value / q, 0.0, 1.0);
        ec += cfg.f_ec * frac * q * binary_entropy(e);
      }
  }
  c.ec_cost = ec;

  if (res.lp_infeasible) {
    res.rate = 0.0;
    return res;
  }
  double priv = c.p1_z_a * c.p1_z_b * bounds.y11_lower *
                (1.0 - binary_entropy(std::min(bounds.e11_upper, 0.5)));
  res.rate = std::max(0.0, p_z * p_z * (priv - ec));
  return res;
}

KeyRateResult small_ring_rate(const MdiConfig& cfg, double delta_z, double t3, int ring_count,
                              const ChannelParams& ch, const IntegrationSpec& spec) {
  MdiConfig c = cfg;
  c.ring_count = std::max(1, ring_count);
  c.gain_weighted_ec = true;
  return passive_rate(c, delta_z, t3, ch, spec);
}

KeyRateResult optimize_passive(const MdiConfig& cfg, const GridSpec& delta_z_grid,
                               const GridSpec& t3_grid, const ChannelParams& ch,
                               const IntegrationSpec& spec) {
  KeyRateResult best;
  best.rate = -1.0;
  for (int i = 0; i < delta_z_grid.n; ++i)
    for (int j = 0; j < t3_grid.n; ++j) {
      IntegrationSpec cell = derived(spec, hash_combine(0xce11, i * 256 + j));
      KeyRateResult r = passive_rate(cfg, delta_z_grid.at(i), t3_grid.at(j), ch, cell);
      if (r.rate > best.rate + 1e-15) best = r;  // ties keep the smaller delta_z
    }
  return best;
}

namespace {

BlochOutput bb84_state(StateLabel l, double mu) {
  BlochOutput b;
  b.mu = mu;
  switch (l) {
    case StateLabel::ZH: b.theta_hv = 0.0; b.phi_hv = 0.0; break;
    case StateLabel::ZV: b.theta_hv = M_PI; b.phi_hv = 0.0; break;
    case StateLabel::XPlus: b.theta_hv = 0.5 * M_PI; b.phi_hv = 0.0; break;
    case StateLabel::XMinus: b.theta_hv = 0.5 * M_PI; b.phi_hv = M_PI; break;
  }
  return b;
}

// Bit-averaged gain and error-gain for one basis and intensity pair.
GainQber active_pair(Basis basis, double mu_a, double mu_b, const ChannelParams& ch,
                     int phase_nodes) {
  const StateLabel z[2] = {StateLabel::ZH, StateLabel::ZV};
  const StateLabel x[2] = {StateLabel::XPlus, StateLabel::XMinus};
  const StateLabel* lab = basis == Basis::Z ? z : x;
  GainQber sum;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      GainQber g = pair_gain_qber(lab[a], bb84_state(lab[a], mu_a), lab[b],
                                  bb84_state(lab[b], mu_b), ch, phase_nodes);
      sum.q_minus += 0.25 * g.q_minus;
      sum.qe_minus += 0.25 * g.qe_minus;
      sum.q_plus += 0.25 * g.q_plus;
      sum.qe_plus += 0.25 * g.qe_plus;
    }
  return sum;
}

RegionWeights poisson_weights(double mu, int n_cut) {
  RegionWeights w;
  w.p_s = 1.0;
  w.poisson.resize(n_cut + 1);
  double acc = 0.0;
  for (int n = 0; n <= n_cut; ++n) acc += (w.poisson[n] = poisson_pmf(mu, n));
  w.tail = std::max(0.0, 1.0 - acc);
  return w;
}

}  // namespace

ActiveMdiResult active_rate(const ChannelParams& ch, double mu, double nu, double omega,
                            double f_ec, int n_cut, int phase_nodes) {
  const double intens[3] = {mu, nu, omega};
  std::vector<RegionWeights> w(3);
  for (int i = 0; i < 3; ++i) w[i] = poisson_weights(intens[i], n_cut);

  std::vector<DecoyObservation> z_obs, x_obs;
  GainQber signal;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      GainQber gz = active_pair(Basis::Z, intens[i], intens[j], ch, phase_nodes);
      GainQber gx = active_pair(Basis::X, intens[i], intens[j], ch, phase_nodes);
      if (i == 0 && j == 0) signal = gz;
      z_obs.push_back({i, j, Basis::Z, {gz.gain(), 0.0, 1}, {gz.err_gain(), 0.0, 1}, w[i], w[j]});
      x_obs.push_back({i, j, Basis::X, {gx.gain(), 0.0, 1}, {gx.err_gain(), 0.0, 1}, w[i], w[j]});
    }
  // tiny relaxation absorbs quadrature roundoff in the equality rows
  for (auto* v : {&z_obs, &x_obs})
    for (DecoyObservation& o : *v) {
      o.gain.std_err = 1e-12;
      o.err_gain.std_err = 1e-12;
    }

  DecoyLp z_lp = build_lp(z_obs, n_cut, 1.0);
  DecoyLp x_lp = build_lp(x_obs, n_cut, 1.0);
  YieldBounds bounds = solve_bounds(z_lp, x_lp);

  ActiveMdiResult res;
  res.distance_km = ch.length_a_km + ch.length_b_km;
  res.mu = mu;
  res.nu = nu;
  res.omega = omega;
  res.y11_lower = bounds.y11_lower;
  res.e11_upper = bounds.e11_upper;
  res.q_z = signal.gain();
  res.e_z = res.q_z > 0.0 ? signal.err_gain() / res.q_z : 0.0;
  res.lp_infeasible = !bounds.feasible;
  if (res.lp_infeasible) return res;

  double q11 = poisson_pmf(mu, 1) * poisson_pmf(mu, 1) * bounds.y11_lower;
  res.rate = std::max(0.0, q11 * (1.0 - binary_entropy(std::min(bounds.e11_upper, 0.5))) -
                               f_ec * res.q_z * binary_entropy(res.e_z));
  return res;
}

ActiveMdiResult optimize_active(const ChannelParams& ch, double f_ec,
                                const std::vector<double>& mu_grid,
                                const std::vector<double>& nu_grid,
                                const std::vector<double>& omega_grid, int n_cut) {
  ActiveMdiResult best;
  best.rate = -1.0;
  for (double mu : mu_grid)
    for (double nu : nu_grid)
      for (double om : omega_grid) {
        if (!(om < nu && nu < mu)) continue;
        ActiveMdiResult r = active_rate(ch, mu, nu, om, f_ec, n_cut);
        if (r.rate > best.rate) best = r;
      }
  return best;
}

}  // namespace qkd
