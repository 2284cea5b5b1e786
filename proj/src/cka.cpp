#include "qkd/cka.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "qkd/entropy.hpp"
#include "qkd/quadrature.hpp"
#include "qkd/rng.hpp"
#include "qkd/simplex.hpp"

namespace qkd::cka {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_2pi(double x) {
  x = std::fmod(x, kTwoPi);
  return x < 0.0 ? x + kTwoPi : x;
}

int popcount_parity(unsigned a) { return __builtin_popcount(a) & 1; }

double slice_mid(int slice, int m) { return kTwoPi * (slice - 0.5) / m; }

}  // namespace

std::pair<double, double> passive_output(double phi1, double phi2, double mu_max) {
  phi1 = wrap_2pi(phi1);
  phi2 = wrap_2pi(phi2);
  double c = std::cos(0.5 * (phi1 - phi2));
  double mu = mu_max * c * c;
  double phi = 0.5 * (phi1 + phi2);
  if (c < 0.0) phi += M_PI;
  return {mu, wrap_2pi(phi)};
}

Complex passive_amplitude(double phi1, double phi2, double mu_max) {
  phi1 = wrap_2pi(phi1);
  phi2 = wrap_2pi(phi2);
  double c = std::cos(0.5 * (phi1 - phi2));
  return std::sqrt(mu_max) * c * std::polar(1.0, 0.5 * (phi1 + phi2));
}

std::vector<Complex> bsnet_amplitudes(const std::vector<Complex>& alpha, int n_detectors) {
  if (int(alpha.size()) > n_detectors)
    throw std::invalid_argument("more inputs than network ports");
  std::vector<Complex> out(n_detectors);
  const double norm = 1.0 / std::sqrt(double(n_detectors));
  for (int j = 0; j < n_detectors; ++j) {
    Complex acc = 0.0;
    for (int i = 0; i < int(alpha.size()); ++i)
      acc += popcount_parity(unsigned(i) & unsigned(j)) ? -alpha[i]
                                                        : alpha[i];
    out[j] = norm * acc;
  }
  return out;
}

std::vector<double> single_click_probs(const std::vector<Complex>& amps, double p_d) {
  const int nd = int(amps.size());
  std::vector<double> click(nd);
  for (int j = 0; j < nd; ++j)
    click[j] = 1.0 - (1.0 - p_d) * std::exp(-std::norm(amps[j]));
  std::vector<double> out(nd);
  for (int j = 0; j < nd; ++j) {
    double pr = click[j];
    for (int k = 0; k < nd; ++k)
      if (k != j) pr *= 1.0 - click[k];
    out[j] = pr;
  }
  return out;
}

YieldTensor YieldTensor::zeros(int users, int n_max) {
  YieldTensor t;
  t.n_users = users;
  t.n_max = n_max;
  std::size_t sz = 1;
  for (int i = 0; i < users; ++i) sz *= std::size_t(n_max + 1);
  t.y.assign(sz, 0.0);
  return t;
}

std::size_t YieldTensor::index(const std::vector<int>& m) const {
  std::size_t idx = 0;
  for (int i = n_users - 1; i >= 0; --i) idx = idx * std::size_t(n_max + 1) + std::size_t(m[i]);
  return idx;
}

namespace {

// iterate all m in [0, n_max]^users; returns false when exhausted
bool next_multi(std::vector<int>& m, int n_max) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (++m[i] <= n_max) return true;
    m[i] = 0;
  }
  return false;
}

double binom(int n, int k) {
  return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

}  // namespace

YieldTensor exact_yields(const CkaParams& params) {
  const int nd = params.n_detectors();
  const double eta = params.arm_transmittance();
  const double pd = params.p_d;
  YieldTensor t = YieldTensor::zeros(params.n_users, params.n_bar);

  std::vector<int> m(std::size_t(params.n_users), 0);
  do {
    // sum over survivor counts s <= m (independent thinning per user); all
    // survivors must bunch onto the one clicking port
    std::vector<int> s(std::size_t(params.n_users), 0);
    double y = 0.0;
    bool more = true;
    while (more) {
      bool ok = true;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] > m[i]) ok = false;
      if (ok) {
        int total = 0;
        double thin = 1.0;
        double log_bunch = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          thin *= binom(m[i], s[i]) * std::pow(eta, s[i]) * std::pow(1.0 - eta, m[i] - s[i]);
          total += s[i];
          log_bunch -= log_factorial(s[i]);
        }
        log_bunch += log_factorial(total) - total * std::log(double(nd));
        double term = thin * std::exp(log_bunch);
        y += total >= 1 ? term : term * pd;
      }
      more = false;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (++s[i] <= m[i]) { more = true; break; }
        s[i] = 0;
      }
      if (!more) break;
    }
    t.at(m) = y * std::pow(1.0 - pd, nd - 1);
  } while (next_multi(m, params.n_bar));
  return t;
}

namespace {

// arcsine-law sampling of one user's intensity restricted to a bin, via the
// smooth substitution mu = mu_max sin^2(x)
struct ArcsineBin {
  double x_lo, x_hi;
  ArcsineBin(const CkaParams& p, int bin) {
    double lo = double(bin) / p.decoy_bins, hi = double(bin + 1) / p.decoy_bins;
    x_lo = std::asin(std::sqrt(lo));
    x_hi = std::asin(std::sqrt(hi));
  }
  double draw(double u, double mu_max) const {
    double x = x_lo + u * (x_hi - x_lo);
    double s = std::sin(x);
    return mu_max * s * s;
  }
};

}  // namespace

double pe_weight(const CkaParams& params, int bin, int n, int quad_nodes) {
  ArcsineBin b(params, bin);
  double val = integrate_gl(
      [&](double x) {
        double s = std::sin(x);
        return poisson_pmf(params.mu_max * s * s, n);
      },
      b.x_lo, b.x_hi, quad_nodes);
  return val / (b.x_hi - b.x_lo);
}

std::vector<Estimate> pe_gain(const Cell& cell, const CkaParams& params,
                              const IntegrationSpec& spec) {
  if (int(cell.size()) != params.n_users) throw std::invalid_argument("cell size");
  const int nu = params.n_users, nd = params.n_detectors();
  const double eta = params.arm_transmittance();
  std::vector<ArcsineBin> bins;
  for (int i = 0; i < nu; ++i) bins.emplace_back(params, cell[i]);

  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, params.pe_points / reps);
  const int dim = 2 * nu;
  std::vector<std::vector<double>> acc(nd,
                                       std::vector<double>(reps, 0.0));
  std::vector<double> u(dim);
  std::vector<Complex> amps(nu);
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = hash_combine(spec.seed, 0xbe5ULL + rep);
    KroneckerSequence seq(dim, rep_seed);
    for (long long k = 0; k < per_rep; ++k) {
      if (spec.sequence == SequenceKind::LowDiscrepancy)
        seq.point(std::uint64_t(k), u.data());
      else
        for (int d = 0; d < dim; ++d)
          u[d] = counter_uniform(rep_seed, std::uint64_t(k), std::uint32_t(d));
      for (int i = 0; i < nu; ++i) {
        double mu = bins[i].draw(u[2 * i], params.mu_max);
        amps[i] =
            std::polar(std::sqrt(eta * mu), kTwoPi * u[2 * i + 1]);
      }
      std::vector<double> pr = single_click_probs(bsnet_amplitudes(amps, nd), params.p_d);
      for (int j = 0; j < nd; ++j) acc[j][rep] += pr[j];
    }
  }
  std::vector<Estimate> out(nd);
  for (int j = 0; j < nd; ++j) {
    double mean = 0.0;
    for (double v : acc[j]) mean += v / per_rep;
    mean /= reps;
    double var = 0.0;
    for (double v : acc[j]) {
      double d = v / per_rep - mean;
      var += d * d;
    }
    var /= double(reps) * double(reps - 1);
    out[j] = {mean, std::sqrt(var), per_rep * reps};
  }
  return out;
}

CkaLpResult cka_lp(const std::vector<Cell>& cells,
                   const std::vector<std::vector<Estimate>>& gains, const CkaParams& params) {
  const int nu = params.n_users, nd = params.n_detectors();
  const int n_max = params.n_bar;
  YieldTensor proto = YieldTensor::zeros(nu, n_max);
  const int nv = int(proto.y.size());

  // per-bin Poisson weights (same for every user)
  std::vector<std::vector<double>> w(std::size_t(params.decoy_bins));
  for (int b = 0; b < params.decoy_bins; ++b) {
    w[b].resize(std::size_t(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) w[b][n] = pe_weight(params, b, n);
  }

  LinearProgram lp;
  lp.objective = Eigen::VectorXd::Zero(nv);
  lp.constraints = Eigen::MatrixXd::Zero(int(cells.size()), nv);
  lp.row_lo.resize(int(cells.size()));
  lp.row_hi.resize(int(cells.size()));
  lp.var_lo = Eigen::VectorXd::Zero(nv);
  lp.var_hi = Eigen::VectorXd::Ones(nv);

  std::vector<double> covered(cells.size(), 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<int> m(nu, 0);
    do {
      double prod = 1.0;
      for (int i = 0; i < nu; ++i)
        prod *= w[cells[c][i]][m[i]];
      lp.constraints(int(c), int(proto.index(m))) = prod;
      covered[c] += prod;
    } while (next_multi(m, n_max));
  }

  CkaLpResult res;
  for (int j = 0; j < nd; ++j) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Estimate& g = gains[c][j];
      double slack = std::max(0.0, 1.0 - covered[c]);
      lp.row_lo[int(c)] = g.value - params.k_sigma * g.std_err - slack;
      lp.row_hi[int(c)] = g.value + params.k_sigma * g.std_err;
    }
    YieldTensor up = YieldTensor::zeros(nu, n_max);
    for (int v = 0; v < nv; ++v) {
      lp.objective.setZero();
      lp.objective[v] = -1.0;  // maximize
      LpSolution s = solve_lp(lp);
      if (s.status == LpStatus::Infeasible) {
        res.feasible = false;
        res.upper.assign(nd, YieldTensor::zeros(nu, n_max));
        return res;
      }
      if (s.status != LpStatus::Optimal)
        throw std::runtime_error("cka decoy LP: solver failed");
      up.y[v] = std::min(1.0, s.x[v]);
    }
    res.upper.push_back(std::move(up));
  }
  return res;
}

TransitionMatrix transition_matrix(double delta_phi, int n_max, int quad_nodes) {
  TransitionMatrix t;
  t.n_max = n_max;
  t.t.assign(std::size_t(n_max + 1) * std::size_t(n_max + 1), 0.0);
  const QuadratureRule& rule = gauss_legendre(quad_nodes);
  double wsum = 0.0;
  for (int i = 0; i < quad_nodes; ++i)
    for (int j = 0; j < quad_nodes; ++j) {
      double p1 = delta_phi * rule.nodes[i];
      double p2 = delta_phi * rule.nodes[j];
      double wt = rule.weights[i] * rule.weights[j];
      wsum += wt;
      double p = local_channel_transmission(p1, p2);
      for (int n = 0; n <= n_max; ++n)
        for (int mm = 0; mm <= n; ++mm)
          t.t[std::size_t(mm) * std::size_t(n_max + 1) + std::size_t(n)] +=
              wt * binom(n, mm) * std::pow(p, mm) * std::pow(1.0 - p, n - mm);
    }
  for (double& v : t.t) v /= wsum;
  return t;
}

YieldTensor correct_yields(const YieldTensor& y, const std::vector<TransitionMatrix>& t_users) {
  if (int(t_users.size()) != y.n_users) throw std::invalid_argument("one matrix per user");
  YieldTensor out = YieldTensor::zeros(y.n_users, y.n_max);
  std::vector<int> n(std::size_t(y.n_users), 0);
  do {
    double acc = 0.0;
    std::vector<int> m(std::size_t(y.n_users), 0);
    bool more = true;
    while (more) {
      bool ok = true;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] > n[i]) ok = false;
      if (ok) {
        double prod = 1.0;
        for (std::size_t i = 0; i < m.size(); ++i) prod *= t_users[i].at(m[i], n[i]);
        acc += prod * y.at(m);
      }
      more = false;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (++m[i] <= n[i]) { more = true; break; }
        m[i] = 0;
      }
    }
    out.at(n) = std::clamp(acc, 0.0, 1.0);
  } while (next_multi(n, y.n_max));
  return out;
}

namespace {

double coeff_c(double alpha, int n, int parity) {
  if ((n + parity) & 1) return 0.0;
  return std::exp(-0.5 * alpha * alpha + n * std::log(alpha) - 0.5 * log_factorial(n));
}

// sum over n with lo <= |n|_1 <= hi of prod_i c_{i, n_i}^{(v_i)} * f(n)
template <typename F>
double sum_photon_vectors(const std::vector<double>& alphas, unsigned v, int lo, int hi,
                          const F& f) {
  const int users = int(alphas.size());
  std::vector<int> n(users, 0);
  double total = 0.0;
  // depth-first over users with running sum
  std::function<void(int, int, double)> rec = [&](int user, int used, double prod) {
    if (prod == 0.0) return;
    if (user == users) {
      if (used >= lo) total += prod * f(n);
      return;
    }
    for (int ni = 0; ni + used <= hi; ++ni) {
      n[user] = ni;
      rec(user + 1, used + ni,
          prod * coeff_c(alphas[user], ni, int(v >> user & 1u)));
    }
    n[user] = 0;
  };
  rec(0, 0, 1.0);
  return total;
}

}  // namespace

double phase_error_numerator(const YieldTensor& y_corrected, const std::vector<double>& alphas,
                             int n_bar, int tail_terms) {
  const int users = int(alphas.size());
  double num = 0.0;
  for (unsigned v = 0; v < (1u << users); ++v) {
    if (__builtin_popcount(v) & 1) continue;  // even-parity vectors only
    double s = sum_photon_vectors(alphas, v, 0, n_bar, [&](const std::vector<int>& n) {
      return std::sqrt(std::max(0.0, y_corrected.at(n)));
    });
    double tail = tail_terms > 0
                      ? sum_photon_vectors(alphas, v, n_bar + 2, n_bar + tail_terms,
                                           [](const std::vector<int>&) { return 1.0; })
                      : 0.0;
    num += (s + tail) * (s + tail);
  }
  return num;
}

double phase_error_bound(double numerator, double pr_kg) {
  if (pr_kg <= 0.0) throw std::domain_error("phase_error_bound: empty bucket");
  return std::clamp(numerator / pr_kg, 0.0, 0.5);
}

bool branch_filter(const SliceCombo& combo, int cut_x, int cut_y, int m_slices) {
  const int users = int(combo.k.size()) / 2;
  auto circ_int = [m_slices](int a, int b) {
    int d = std::abs(a - b) % m_slices;
    return std::min(d, m_slices - d);
  };
  std::vector<double> mean(users);
  for (int i = 0; i < users; ++i) {
    int k1 = combo.k[2 * i], k2 = combo.k[2 * i + 1];
    if (circ_int(k1, k2) > cut_x) return false;
    // circular midpoint along the shorter arc
    double m12 = 0.5 * (k1 + k2);
    if (std::abs(k1 - k2) > m_slices - std::abs(k1 - k2)) m12 += 0.5 * m_slices;
    mean[i] = std::fmod(m12, double(m_slices));
  }
  for (int i = 0; i < users; ++i)
    for (int j = i + 1; j < users; ++j) {
      double d = std::abs(mean[i] - mean[j]);
      d = std::min(d, m_slices - d);
      if (d > cut_y + 1e-12) return false;
    }
  return true;
}

KgStats kg_statistics(const SliceCombo& combo, const CkaParams& params,
                      const IntegrationSpec& spec) {
  const int nu = params.n_users, nd = params.n_detectors();
  if (int(combo.k.size()) != 2 * nu) throw std::invalid_argument("combo size");
  const double half = params.slice_half_width();
  const double eta = params.arm_transmittance();

  // midpoint amplitudes fix the per-combo bits and the pairwise recipes
  std::vector<Complex> mid_amp(nu);
  for (int i = 0; i < nu; ++i)
    mid_amp[i] =
        passive_amplitude(slice_mid(combo.k[2 * i], params.m_slices),
                          slice_mid(combo.k[2 * i + 1], params.m_slices), 1.0);
  std::vector<std::vector<int>> recipe(nd, std::vector<int>(nu, +1));
  for (int j = 0; j < nd; ++j)
    for (int i = 1; i < nu; ++i) {
      double g = std::real(mid_amp[0] * std::conj(mid_amp[i]));
      if (popcount_parity(unsigned(i) & unsigned(j))) g = -g;
      recipe[j][i] = g < 0.0 ? -1 : +1;
    }

  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, spec.n_points / reps);
  const int dim = 2 * nu;
  std::vector<std::vector<double>> pr_acc(nd,
                                          std::vector<double>(reps, 0.0));
  std::vector<std::vector<std::vector<double>>> err_acc(
      nd, std::vector<std::vector<double>>(
                           nu, std::vector<double>(reps, 0.0)));

  std::vector<double> u(dim);
  std::vector<Complex> amps(nu);
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = hash_combine(spec.seed, 0x269ULL + rep);
    KroneckerSequence seq(dim, rep_seed);
    for (long long k = 0; k < per_rep; ++k) {
      if (spec.sequence == SequenceKind::LowDiscrepancy)
        seq.point(std::uint64_t(k), u.data());
      else
        for (int d = 0; d < dim; ++d)
          u[d] = counter_uniform(rep_seed, std::uint64_t(k), std::uint32_t(d));
      for (int i = 0; i < nu; ++i) {
        double p1 =
            slice_mid(combo.k[2 * i], params.m_slices) + half * (2.0 * u[2 * i] - 1.0);
        double p2 = slice_mid(combo.k[2 * i + 1], params.m_slices) +
                    half * (2.0 * u[2 * i + 1] - 1.0);
        amps[i] = std::sqrt(eta) * passive_amplitude(p1, p2, params.mu_max);
      }
      std::vector<Complex> det = bsnet_amplitudes(amps, nd);
      // decompose the exclusive click: signal part vs pure dark part
      std::vector<double> novac(nd), noclick(nd);
      for (int j = 0; j < nd; ++j) {
        double lam = std::norm(det[j]);
        novac[j] = std::exp(-lam);  // no-photon probability
        noclick[j] = (1.0 - params.p_d) * novac[j];
      }
      for (int j = 0; j < nd; ++j) {
        double others = 1.0;
        for (int o = 0; o < nd; ++o)
          if (o != j) others *= noclick[o];
        double p_sig = (1.0 - novac[j]) * others;
        double p_dark = novac[j] * params.p_d * others;
        pr_acc[j][rep] += p_sig + p_dark;
        for (int i = 1; i < nu; ++i) {
          double g = std::real(amps[0] * std::conj(amps[i]));
          if (popcount_parity(unsigned(i) & unsigned(j))) g = -g;
          int actual = g < 0.0 ? -1 : +1;
          double e = 0.5 * p_dark;
          if (actual != recipe[j][i]) e += p_sig;
          err_acc[j][i][rep] += e;
        }
      }
    }
  }

  KgStats out;
  out.pr.resize(nd);
  out.qber.assign(nd, std::vector<double>(std::size_t(nu - 1), 0.0));
  for (int j = 0; j < nd; ++j) {
    double pr = 0.0;
    for (double v : pr_acc[j]) pr += v;
    pr /= double(reps) * double(per_rep);
    out.pr[j] = pr;
    for (int i = 1; i < nu; ++i) {
      double err = 0.0;
      for (double v : err_acc[j][i]) err += v;
      err /= double(reps) * double(per_rep);
      double q = pr > 0.0 ? std::clamp(err / pr, 0.0, 1.0) : 0.0;
      out.qber[j][i - 1] = std::min(q, 1.0 - q);
    }
  }
  return out;
}

namespace {

std::vector<Cell> all_cells(const CkaParams& params) {
  std::vector<Cell> cells;
  Cell c(std::size_t(params.n_users), 0);
  while (true) {
    cells.push_back(c);
    std::size_t i = 0;
    for (; i < c.size(); ++i) {
      if (++c[i] < params.decoy_bins) break;
      c[i] = 0;
    }
    if (i == c.size()) break;
  }
  return cells;
}

struct DecoyStage {
  std::vector<double> numerator;  // per detector
  bool infeasible = false;
};

DecoyStage decoy_stage(const CkaParams& params, const IntegrationSpec& spec, YieldMode mode) {
  DecoyStage st;
  const int nd = params.n_detectors();
  std::vector<YieldTensor> upper;
  if (mode == YieldMode::Exact) {
    upper.assign(nd, exact_yields(params));
  } else {
    std::vector<Cell> cells = all_cells(params);
    std::vector<std::vector<Estimate>> gains;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      IntegrationSpec cs = spec;
      cs.seed = hash_combine(spec.seed, 0xdec0ULL + c);
      gains.push_back(pe_gain(cells[c], params, cs));
    }
    CkaLpResult lp = cka_lp(cells, gains, params);
    if (!lp.feasible) {
      st.infeasible = true;
      st.numerator.assign(nd, 1.0);
      return st;
    }
    upper = std::move(lp.upper);
  }

  std::vector<TransitionMatrix> t(std::size_t(params.n_users),
                                  transition_matrix(params.slice_half_width(), params.n_bar));
  std::vector<double> alphas(std::size_t(params.n_users), params.alpha());
  st.numerator.resize(nd);
  for (int j = 0; j < nd; ++j) {
    YieldTensor corr = correct_yields(upper[j], t);
    st.numerator[j] =
        phase_error_numerator(corr, alphas, params.n_bar, params.tail_terms);
  }
  return st;
}

}  // namespace

CkaRateResult total_rate(const CkaParams& params, const IntegrationSpec& spec, YieldMode mode,
                         bool exhaustive) {
  const int nu = params.n_users, nd = params.n_detectors(), m = params.m_slices;
  DecoyStage stage = decoy_stage(params, spec, mode);

  CkaRateResult res;
  res.lp_infeasible = stage.infeasible;
  res.combos_total = 1;
  for (int i = 0; i < 2 * nu; ++i) res.combos_total *= m;

  // Adding one slice (mod M) to all indices is an exact symmetry, so k_{A1}
  // can be pinned to 1 and the class counted M times.
  SliceCombo combo;
  combo.k.assign(2 * nu, 1);
  const std::size_t lowest = exhaustive ? 0 : 1;
  double sum = 0.0;
  long long kept = 0;
  bool done = false;
  while (!done) {
    if (branch_filter(combo, params.cut_x, params.cut_y, m)) {
      ++kept;
      IntegrationSpec cs = spec;
      std::uint64_t h = 0xc0b0ULL;
      for (int v : combo.k) h = hash_combine(h, std::uint64_t(v));
      cs.seed = hash_combine(spec.seed, h);
      KgStats kg = kg_statistics(combo, params, cs);
      double term = 0.0;
      for (int j = 0; j < nd; ++j) {
        double pr = kg.pr[j];
        if (pr <= 0.0) continue;
        double qz = phase_error_bound(stage.numerator[j], pr);
        double worst = 0.0;
        for (double q : kg.qber[j]) worst = std::max(worst, binary_entropy(q));
        term += pr * (1.0 - binary_entropy(qz) - worst);
      }
      sum += std::max(0.0, term);
    }
    done = true;
    for (std::size_t i = lowest; i < combo.k.size(); ++i) {
      if (++combo.k[i] <= m) {
        done = false;
        break;
      }
      combo.k[i] = 1;
    }
  }
  if (!exhaustive) {
    sum *= m;
    kept *= m;
  }
  res.rate = sum / double(res.combos_total);
  res.combos_kept = kept;
  return res;
}

double active_cka_rate(const CkaParams& params, const std::vector<double>& alphas,
                       const ActiveCkaConfig& cfg, const IntegrationSpec& spec) {
  const int nu = params.n_users, nd = params.n_detectors();
  const double eta = params.arm_transmittance();

  // key generation: deterministic 0/pi encoding, bits uniform
  std::vector<double> pr_kg(nd, 0.0);
  std::vector<std::vector<double>> err(nd, std::vector<double>(nu, 0.0));
  std::vector<Complex> amps(nu);
  const double bit_w = 1.0 / double(1 << nu);
  for (unsigned bits = 0; bits < (1u << nu); ++bits) {
    for (int i = 0; i < nu; ++i)
      amps[i] =
          std::sqrt(eta) * alphas[i] * ((bits >> i & 1u) ? -1.0 : 1.0);
    std::vector<double> pr = single_click_probs(bsnet_amplitudes(amps, nd), params.p_d);
    for (int j = 0; j < nd; ++j) {
      pr_kg[j] += bit_w * pr[j];
      for (int i = 1; i < nu; ++i) {
        int rel = int(bits & 1u) ^ int(bits >> i & 1u);            // x0 xor xi
        int expect = popcount_parity(unsigned(i) & unsigned(j));   // 1 means anti-correlated
        if (rel != expect) err[j][i] += bit_w * pr[j];
      }
    }
  }

  // parameter estimation: phase-randomized decoys at fixed intensities
  const auto& decoys = cfg.decoy_intensities;
  std::vector<Cell> cells;
  Cell c(nu, 0);
  while (true) {
    cells.push_back(c);
    std::size_t i = 0;
    for (; i < c.size(); ++i) {
      if (++c[i] < int(decoys.size())) break;
      c[i] = 0;
    }
    if (i == c.size()) break;
  }

  YieldTensor proto = YieldTensor::zeros(nu, params.n_bar);
  LinearProgram lp;
  const int nv = int(proto.y.size());
  lp.objective = Eigen::VectorXd::Zero(nv);
  lp.constraints = Eigen::MatrixXd::Zero(int(cells.size()), nv);
  lp.row_lo.resize(int(cells.size()));
  lp.row_hi.resize(int(cells.size()));
  lp.var_lo = Eigen::VectorXd::Zero(nv);
  lp.var_hi = Eigen::VectorXd::Ones(nv);

  const int reps = std::max(2, spec.replicates);
  const long long per_rep = std::max<long long>(1, params.pe_points / reps);
  for (std::size_t cc = 0; cc < cells.size(); ++cc) {
    // gain by QMC over the random phases
    std::vector<double> rep_mean(reps, 0.0);
    for (int rep = 0; rep < reps; ++rep) {
      std::uint64_t rep_seed = hash_combine(spec.seed, 0xac7eULL + 131 * cc + rep);
      KroneckerSequence seq(nu, rep_seed);
      std::vector<double> u(nu);
      for (long long k = 0; k < per_rep; ++k) {
        if (spec.sequence == SequenceKind::LowDiscrepancy)
          seq.point(std::uint64_t(k), u.data());
        else
          for (int d = 0; d < nu; ++d)
            u[d] = counter_uniform(rep_seed, std::uint64_t(k), std::uint32_t(d));
        for (int i = 0; i < nu; ++i)
          amps[i] = std::polar(
              std::sqrt(eta * decoys[cells[cc][i]]),
              kTwoPi * u[i]);
        // only detector 0 is needed: phase-randomized gains are j-independent
        rep_mean[rep] +=
            single_click_probs(bsnet_amplitudes(amps, nd), params.p_d)[0];
      }
      rep_mean[rep] /= double(per_rep);
    }
    double mean = 0.0;
    for (double v : rep_mean) mean += v;
    mean /= reps;
    double var = 0.0;
    for (double v : rep_mean) var += (v - mean) * (v - mean);
    var /= double(reps) * double(reps - 1);
    double sd = std::sqrt(var);

    double covered = 0.0;
    std::vector<int> mvec(nu, 0);
    do {
      double prod = 1.0;
      for (int i = 0; i < nu; ++i)
        prod *= poisson_pmf(decoys[cells[cc][i]],
                            mvec[i]);
      lp.constraints(int(cc), int(proto.index(mvec))) = prod;
      covered += prod;
    } while (next_multi(mvec, params.n_bar));
    lp.row_lo[int(cc)] = mean - params.k_sigma * sd - std::max(0.0, 1.0 - covered);
    lp.row_hi[int(cc)] = mean + params.k_sigma * sd;
  }

  YieldTensor upper = YieldTensor::zeros(nu, params.n_bar);
  for (int v = 0; v < nv; ++v) {
    lp.objective.setZero();
    lp.objective[v] = -1.0;
    LpSolution s = solve_lp(lp);
    if (s.status == LpStatus::Infeasible) return 0.0;
    if (s.status != LpStatus::Optimal) throw std::runtime_error("active CKA LP failed");
    upper.y[v] = std::min(1.0, s.x[v]);
  }

  const double num = phase_error_numerator(upper, alphas, params.n_bar, params.tail_terms);
  double rate = 0.0;
  for (int j = 0; j < nd; ++j) {
    if (pr_kg[j] <= 0.0) continue;
    double qz = phase_error_bound(num, pr_kg[j]);
    double worst = 0.0;
    for (int i = 1; i < nu; ++i) {
      double q = std::clamp(err[j][i] / pr_kg[j], 0.0, 1.0);
      worst = std::max(worst, binary_entropy(std::min(q, 1.0 - q)));
    }
    rate += pr_kg[j] * (1.0 - binary_entropy(qz) - worst);
  }
  return std::max(0.0, rate);
}

}  // namespace qkd::cka
