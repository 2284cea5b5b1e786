#include "qkd/integrate.hpp"

#include <cmath>
#include <stdexcept>

#include "qkd/entropy.hpp"
#include "qkd/quadrature.hpp"
#include "qkd/rng.hpp"

namespace qkd {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Uniform sampler over the box hull of a region set in (theta, r, phi)
// coordinates, with the modulated density carried as a per-sample weight
// rho = r e^{r (cos+sin)}. Four uniforms per user: sector pick, theta, r, phi.
struct SetSampler {
  const RegionSet* set;
  std::vector<double> box;  // box volume of each sector (theta x r x phi)
  double total_box = 0.0;

  explicit SetSampler(const RegionSet& s) : set(&s) {
    if (s.empty()) throw std::invalid_argument("empty region set");
    for (const Region& g : s) {
      double v = (g.theta_hi - g.theta_lo) * (g.r_hi - g.r_lo) * 2.0 *
                 (g.phi_half >= M_PI ? M_PI : g.phi_half);
      if (v <= 0.0) throw std::invalid_argument("degenerate region");
      box.push_back(v);
      total_box += v;
    }
  }

  struct Draw {
    BlochOutput bloch;
    StateLabel label;
    double weight;  // rho(r, theta); box volume applied separately
  };

  Draw draw(const double* u) const {
    // pick a sector proportionally to its box volume
    double pick = u[0] * total_box;
    std::size_t idx = 0;
    while (idx + 1 < box.size() && pick > box[idx]) pick -= box[idx], ++idx;
    const Region& g = (*set)[idx];

    double theta = g.theta_lo + u[1] * (g.theta_hi - g.theta_lo);
    double r = g.r_lo + u[2] * (g.r_hi - g.r_lo);
    double half = g.phi_half >= M_PI ? M_PI : g.phi_half;
    double phi = g.phi_center + (2.0 * u[3] - 1.0) * half;
    phi = std::fmod(phi + kTwoPi, kTwoPi);

    double mu_h = r * std::cos(theta), mu_v = r * std::sin(theta);
    Draw d;
    d.bloch.mu = mu_h + mu_v;
    d.bloch.theta_hv = 2.0 * std::acos(std::sqrt(std::min(1.0, mu_h / d.bloch.mu)));
    d.bloch.phi_hv = phi;
    d.bloch.phi_global = 0.0;
    d.label = g.label;
    d.weight = modulated_polar_weight(r, theta);
    return d;
  }
};

struct Accumulator {
  double w = 0.0, wq = 0.0, wqe = 0.0, wqm = 0.0, wqem = 0.0, wqp = 0.0, wqep = 0.0;
};

Estimate ratio_estimate(const std::vector<double>& num, const std::vector<double>& den,
                        long long n_used) {
  // per-replicate ratios; mean and standard error over replicates
  std::vector<double> r(num.size());
  for (std::size_t i = 0; i < num.size(); ++i)
    r[i] = den[i] > 0.0 ? num[i] / den[i] : 0.0;
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= double(r.size());
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= double(r.size()) * double(r.size() - 1);
  return {mean, std::sqrt(var), n_used};
}

Estimate mean_estimate(const std::vector<double>& vals, double scale, long long n_used) {
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= double(vals.size());
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= double(vals.size()) * double(vals.size() - 1);
  return {mean * scale, std::sqrt(var) * scale, n_used};
}

void fill_point(SequenceKind kind, const KroneckerSequence& seq, std::uint64_t seed_rep,
                std::uint64_t k, int dim, double* u) {
  if (kind == SequenceKind::LowDiscrepancy) {
    seq.point(k, u);
  } else {
    for (int d = 0; d < dim; ++d) u[d] = counter_uniform(seed_rep, k, std::uint32_t(d));
  }
}

}  // namespace

RegionPairObservables region_pair_observables(const SourceModel& sm, const RegionSet& set_a,
                                              const RegionSet& set_b, const ChannelParams& ch,
                                              const IntegrationSpec& spec) {
  SetSampler sa(set_a), sb(set_b);
  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, spec.n_points / reps);
  constexpr int kDim = 8;

  std::vector<Accumulator> acc(reps);
  double sw = 0.0, sw2 = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = hash_combine(spec.seed, 0x5eedULL + rep);
    KroneckerSequence seq(kDim, rep_seed);
    double u[kDim];
    for (long long k = 0; k < per_rep; ++k) {
      fill_point(spec.sequence, seq, rep_seed, std::uint64_t(k), kDim, u);
      auto da = sa.draw(u);
      auto db = sb.draw(u + 4);
      double w = da.weight * db.weight;
      GainQber g = pair_gain_qber(da.label, da.bloch, db.label, db.bloch, ch, spec.phase_nodes);
      Accumulator& a = acc[rep];
      a.w += w;
      a.wqm += w * g.q_minus;
      a.wqem += w * g.qe_minus;
      a.wqp += w * g.q_plus;
      a.wqep += w * g.qe_plus;
      a.wq += w * g.gain();
      a.wqe += w * g.err_gain();
      sw += w;
      sw2 += w * w;
    }
  }
  double ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  if (ess < 100.0)
    throw std::runtime_error("region too small for requested accuracy (effective samples < 100)");

  const long long n_used = per_rep * reps;
  auto col = [&](double Accumulator::* f) {
    std::vector<double> v(reps);
    for (int i = 0; i < reps; ++i) v[i] = acc[i].*f;
    return v;
  };
  std::vector<double> den = col(&Accumulator::w);

  RegionPairObservables out;
  // unconditional pair probability: mod_norm^2 * mean(rho_a rho_b) * boxes / (2pi)^2
  double scale = sm.mod_norm * sm.mod_norm * sa.total_box * sb.total_box /
                 (kTwoPi * kTwoPi) / double(per_rep);
  out.p_pair = mean_estimate(den, scale, n_used);
  out.gain = ratio_estimate(col(&Accumulator::wq), den, n_used);
  out.err_gain = ratio_estimate(col(&Accumulator::wqe), den, n_used);
  out.gain_minus = ratio_estimate(col(&Accumulator::wqm), den, n_used);
  out.err_gain_minus = ratio_estimate(col(&Accumulator::wqem), den, n_used);
  out.gain_plus = ratio_estimate(col(&Accumulator::wqp), den, n_used);
  out.err_gain_plus = ratio_estimate(col(&Accumulator::wqep), den, n_used);
  return out;
}

Estimate region_pair_expect(const SourceModel& sm, const RegionSet& set_a, const RegionSet& set_b,
                            const std::function<double(const BlochOutput&, const BlochOutput&)>& f,
                            const IntegrationSpec& spec) {
  (void)sm;
  SetSampler sa(set_a), sb(set_b);
  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, spec.n_points / reps);
  constexpr int kDim = 8;

  std::vector<double> num(reps, 0.0), den(reps, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = hash_combine(spec.seed, 0x5eedULL + rep);
    KroneckerSequence seq(kDim, rep_seed);
    double u[kDim];
    for (long long k = 0; k < per_rep; ++k) {
      fill_point(spec.sequence, seq, rep_seed, std::uint64_t(k), kDim, u);
      auto da = sa.draw(u);
      auto db = sb.draw(u + 4);
      double w = da.weight * db.weight;
      num[rep] += w * f(da.bloch, db.bloch);
      den[rep] += w;
    }
  }
  return ratio_estimate(num, den, per_rep * reps);
}

RawZObservables raw_z_observables(double delta_z, double mu_max, int ring_count,
                                  const ChannelParams& ch, const IntegrationSpec& spec) {
  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, spec.n_points / reps);
  const int K = std::max(1, ring_count);
  constexpr int kDim = 8;  // per user: cap pick, u_h, in-cap fraction, phi_hv

  // one user's draw: importance weight g(u_h) = arcsine CDF of the cap edge
  auto draw_user = [&](const double* u, BlochOutput& b, int& bit, int& ring, double& w) {
    bool zv = u[0] >= 0.5;  // mirror cap: swap the arms afterwards
    double mu_h = mu_max * std::pow(std::sin(0.5 * M_PI * u[1]), 2);
    double edge = mu_h <= 0.0 ? 0.0
                              : 2.0 / M_PI *
                                    std::asin(std::sqrt(
                                        std::min(1.0, mu_h * std::tan(delta_z) / mu_max)));
    double uv = u[2] * edge;
    double mu_v = mu_max * std::pow(std::sin(0.5 * M_PI * uv), 2);
    w = edge;
    double theta = std::atan2(mu_v, mu_h);
    ring = std::min(K - 1, int(theta / (delta_z / K)));
    if (zv) std::swap(mu_h, mu_v);
    bit = zv ? 1 : 0;
    double mu = mu_h + mu_v;
    if (mu <= 0.0) {
      w = 0.0;
      b = {};
      return;
    }
    b.mu = mu;
    b.theta_hv = 2.0 * std::acos(std::sqrt(std::min(1.0, mu_h / mu)));
    b.phi_hv = kTwoPi * u[3];
    b.phi_global = 0.0;
  };

  struct Cell {
    double w = 0.0, wq = 0.0, wqe = 0.0;
  };
  std::vector<Cell> pooled(reps);
  std::vector<std::vector<std::vector<Cell>>> rings(
      reps, std::vector<std::vector<Cell>>(K, std::vector<Cell>(K)));
  std::vector<std::vector<double>> ring_w(reps, std::vector<double>(K, 0.0));

  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = hash_combine(spec.seed, 0x4a3ULL + rep);
    KroneckerSequence seq(kDim, rep_seed);
    double u[kDim];
    for (long long k = 0; k < per_rep; ++k) {
      fill_point(spec.sequence, seq, rep_seed, std::uint64_t(k), kDim, u);
      BlochOutput ba, bb;
      int bit_a, bit_b, ra, rb;
      double wa, wb;
      draw_user(u, ba, bit_a, ra, wa);
      draw_user(u + 4, bb, bit_b, rb, wb);
      double w = wa * wb;
      if (w <= 0.0) continue;
      GainQber g = pair_gain_qber(bit_a ? StateLabel::ZV : StateLabel::ZH, ba,
                                  bit_b ? StateLabel::ZV : StateLabel::ZH, bb, ch,
                                  spec.phase_nodes);
      pooled[rep].w += w;
      pooled[rep].wq += w * g.gain();
      pooled[rep].wqe += w * g.err_gain();
      Cell& c = rings[rep][ra][rb];
      c.w += w;
      c.wq += w * g.gain();
      c.wqe += w * g.err_gain();
      ring_w[rep][ra] += wa;
    }
  }

  const long long n_used = per_rep * reps;
  auto ratio = [&](auto num, auto den) {
    std::vector<double> nv(reps), dv(reps);
    for (int r = 0; r < reps; ++r) {
      nv[r] = num(r);
      dv[r] = den(r);
    }
    return ratio_estimate(nv, dv, n_used);
  };

  RawZObservables out;
  out.gain = ratio([&](int r) { return pooled[r].wq; }, [&](int r) { return pooled[r].w; });
  out.err_gain =
      ratio([&](int r) { return pooled[r].wqe; }, [&](int r) { return pooled[r].w; });
  out.ring_prob.assign(K, 0.0);
  double ring_norm = 0.0;
  for (int r = 0; r < reps; ++r)
    for (int k = 0; k < K; ++k) ring_norm += ring_w[r][k];
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int r = 0; r < reps; ++r) acc += ring_w[r][k];
    out.ring_prob[k] = ring_norm > 0.0 ? acc / ring_norm : 0.0;
  }
  out.ring_gain.assign(K, std::vector<Estimate>(K));
  out.ring_err_gain.assign(K, std::vector<Estimate>(K));
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      out.ring_gain[a][b] =
          ratio([&](int r) { return rings[r][a][b].wq; }, [&](int r) { return rings[r][a][b].w; });
      out.ring_err_gain[a][b] =
          ratio([&](int r) { return rings[r][a][b].wqe; }, [&](int r) { return rings[r][a][b].w; });
    }
  return out;
}

FactorizationResult factorization_check(const SourceModel& sm, const Region& region_a,
                                        const Region& region_b, const SyntheticYield& yield,
                                        int n, int m, const IntegrationSpec& spec) {
  // lhs: joint expectation of P_n P_m Y under the modulated law
  auto kernel = [&](const BlochOutput& a, const BlochOutput& b) {
    return poisson_pmf(a.mu, n) * poisson_pmf(b.mu, m) *
           yield(sector_theta(a), a.phi_hv, sector_theta(b), b.phi_hv);
  };
  FactorizationResult res;
  res.lhs = region_pair_expect(sm, {region_a}, {region_b}, kernel, spec);

  // rhs: <P_n><P_m> times the trigonometric-weight yield quotient, which is
  // independent of the radial decoy windows.
  RegionWeights wa = region_weights(sm, region_a, n);
  RegionWeights wb = region_weights(sm, region_b, m);

  auto quotient = [&](const Region& ga, const Region& gb) {
    const int nodes = 48;
    const QuadratureRule& rule = gauss_legendre(nodes);
    auto map1 = [&](const Region& g, int i, double& x, double& w) {
      x = 0.5 * (g.theta_hi + g.theta_lo) + 0.5 * (g.theta_hi - g.theta_lo) * rule.nodes[i];
      w = 0.5 * (g.theta_hi - g.theta_lo) * rule.weights[i];
    };
    auto phimap = [&](const Region& g, int i, double& x, double& w) {
      double half = g.phi_half >= M_PI ? M_PI : g.phi_half;
      x = g.phi_center + half * rule.nodes[i];
      w = half * rule.weights[i];
    };
    double num = 0.0, den = 0.0;
    for (int ia = 0; ia < nodes; ++ia) {
      double ta, wta;
      map1(ga, ia, ta, wta);
      double wna = std::pow(std::cos(ta) + std::sin(ta), n);
      for (int ib = 0; ib < nodes; ++ib) {
        double tb, wtb;
        map1(gb, ib, tb, wtb);
        double wnb = std::pow(std::cos(tb) + std::sin(tb), m);
        double inner = 0.0, norm = 0.0;
        for (int pa = 0; pa < nodes; ++pa) {
          double fa, wfa;
          phimap(ga, pa, fa, wfa);
          for (int pb = 0; pb < nodes; ++pb) {
            double fb, wfb;
            phimap(gb, pb, fb, wfb);
            inner += wfa * wfb * yield(ta, fa, tb, fb);
            norm += wfa * wfb;
          }
        }
        num += wta * wtb * wna * wnb * inner / norm;
        den += wta * wtb * wna * wnb;
      }
    }
    return num / den;
  };
  res.rhs = wa.poisson[n] * wb.poisson[m] * quotient(region_a, region_b);
  return res;
}

}  // namespace qkd
