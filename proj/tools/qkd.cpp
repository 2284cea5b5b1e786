// qkd: key-rate simulation driver.
//
//   qkd run --config scenario.json [--seed N] [--samples N] [--threads N] [--out file.csv]
//
// Emits one CSV row per sweep point, appending and flushing as points
// complete so long sweeps can be resumed by truncation. Exit codes:
// 0 success, 1 configuration error, 2 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "qkd/cka.hpp"
#include "qkd/keyrate_mdi.hpp"
#include "qkd/rng.hpp"

using nlohmann::json;

namespace {

enum class Kind { MdiPassive, MdiActive, CkaPassiveLp, CkaPassiveExact, CkaActive };

struct Scenario {
  Kind kind = Kind::MdiPassive;
  std::vector<double> sweep;
  std::uint64_t seed = 1;
  long long samples = 1 << 13;
  int threads = 0;
  json overrides;
};

Kind parse_kind(const std::string& s) {
  if (s == "MDI_PASSIVE") return Kind::MdiPassive;
  if (s == "MDI_ACTIVE") return Kind::MdiActive;
  if (s == "CKA_PASSIVE_LP") return Kind::CkaPassiveLp;
  if (s == "CKA_PASSIVE_EXACT") return Kind::CkaPassiveExact;
  if (s == "CKA_ACTIVE") return Kind::CkaActive;
  throw std::invalid_argument("unknown scenario kind: " + s);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// Runs tasks 0..n-1 on a small pool; results are committed in index order by
// the caller, so thread count never changes the output.
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& task) {
  if (threads <= 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) task(i);
    });
  for (auto& th : pool) th.join();
}

struct MdiOverrides {
  qkd::MdiConfig cfg;
  qkd::GridSpec dz{0.01, 0.05, 11};
  qkd::GridSpec t3{0.1, 0.99, 10};
  double dark = 1e-6;
  double misalign = 0.01;
  double alpha_db = 0.2;
  double eta_d = qkd::kMdiDetectorEfficiency;
};

MdiOverrides mdi_overrides(const json& ov) {
  MdiOverrides o;
  o.cfg.mu_max = get_or(ov, "mu_max", o.cfg.mu_max);
  o.cfg.delta_xy = get_or(ov, "delta_xy", o.cfg.delta_xy);
  o.cfg.delta_phi = get_or(ov, "delta_phi", o.cfg.delta_phi);
  o.cfg.f_ec = get_or(ov, "f_ec", o.cfg.f_ec);
  o.cfg.n_cut = get_or(ov, "n_cut", o.cfg.n_cut);
  o.cfg.k_sigma = get_or(ov, "k_sigma", o.cfg.k_sigma);
  o.cfg.gain_weighted_ec = get_or(ov, "gain_weighted_ec", o.cfg.gain_weighted_ec);
  o.cfg.ring_count = get_or(ov, "rings", o.cfg.ring_count);
  o.dark = get_or(ov, "pd", o.dark);
  o.misalign = get_or(ov, "misalign_total", o.misalign);
  o.alpha_db = get_or(ov, "alpha_db_per_km", o.alpha_db);
  o.eta_d = get_or(ov, "eta_d", o.eta_d);
  if (ov.contains("delta_z_grid")) {
    auto g = ov.at("delta_z_grid");
    o.dz = {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<int>()};
  }
  if (ov.contains("t3_grid")) {
    auto g = ov.at("t3_grid");
    o.t3 = {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<int>()};
  }
  return o;
}

qkd::cka::CkaParams cka_overrides(const json& ov) {
  qkd::cka::CkaParams p;
  p.n_users = get_or(ov, "n_users", p.n_users);
  p.m_slices = get_or(ov, "m_slices", p.m_slices);
  p.mu_max = get_or(ov, "mu_max", p.mu_max);
  p.p_d = get_or(ov, "pd", p.p_d);
  p.eta_d = get_or(ov, "eta_d", p.eta_d);
  p.n_bar = get_or(ov, "n_bar", p.n_bar);
  p.decoy_bins = get_or(ov, "decoy_bins", p.decoy_bins);
  p.cut_x = get_or(ov, "x", p.cut_x);
  p.cut_y = get_or(ov, "y", p.cut_y);
  p.k_sigma = get_or(ov, "k_sigma", p.k_sigma);
  p.tail_terms = get_or(ov, "tail_terms", p.tail_terms);
  p.pe_points = get_or(ov, "pe_points", p.pe_points);
  return p;
}

int run_scenario(const Scenario& sc, std::ostream& out) {
  const int threads =
      sc.threads > 0 ? sc.threads : int(std::max(1u, std::thread::hardware_concurrency()));
  const int n = int(sc.sweep.size());
  std::vector<std::string> rows(n);
  std::vector<char> ready(n, 0);
  std::mutex commit_mu;
  int committed = 0;
  std::atomic<bool> failed{false};

  // Rows are flushed in sweep order as soon as every earlier point is done,
  // so the file is append-only and identical for any thread count.
  auto commit = [&](int i) {
    std::lock_guard<std::mutex> lock(commit_mu);
    ready[i] = 1;
    while (committed < n && ready[committed]) {
      out << rows[committed] << "\n";
      out.flush();
      ++committed;
    }
  };

  auto run_point = [&](int i, const std::function<std::string(double, qkd::IntegrationSpec)>& f) {
    qkd::IntegrationSpec spec;
    spec.seed = qkd::hash_combine(sc.seed, std::uint64_t(i));
    spec.n_points = sc.samples;
    try {
      rows[i] = f(sc.sweep[i], spec);
    } catch (const std::exception& e) {
      std::cerr << "point " << sc.sweep[i] << " failed: " << e.what() << "\n";
      failed = true;
    }
    commit(i);
  };

  switch (sc.kind) {
    case Kind::MdiPassive: {
      MdiOverrides o = mdi_overrides(sc.overrides);
      out << "distance_km,rate,rate_plain,rate_ec_paper,delta_z,t3,y11_lower,e11_upper,q_z,e_z,"
             "p_z,p1_z,x_fraction,rings,lp_flag\n";
      out.flush();
      parallel_for(n, threads, [&](int i) {
        run_point(i, [&](double dist, qkd::IntegrationSpec spec) {
          qkd::ChannelParams ch =
              qkd::make_mdi_channel(dist, o.dark, o.misalign, o.alpha_db, o.eta_d);
          qkd::MdiConfig plain_cfg = o.cfg;
          plain_cfg.ring_count = 1;
          qkd::KeyRateResult best = qkd::optimize_passive(plain_cfg, o.dz, o.t3, ch, spec);
          qkd::KeyRateResult ring = best;
          if (o.cfg.ring_count > 1)
            ring = qkd::small_ring_rate(o.cfg, best.delta_z, best.t3, o.cfg.ring_count, ch, spec);
          qkd::MdiConfig paper_cfg = plain_cfg;
          paper_cfg.gain_weighted_ec = false;
          qkd::KeyRateResult paper =
              qkd::passive_rate(paper_cfg, best.delta_z, best.t3, ch, spec);
          const auto& c = ring.components;
          std::ostringstream os;
          os << fmt(dist) << ',' << fmt(ring.rate) << ',' << fmt(best.rate) << ','
             << fmt(paper.rate) << ',' << fmt(best.delta_z) << ',' << fmt(best.t3) << ','
             << fmt(c.y11_lower) << ',' << fmt(c.e11_upper) << ',' << fmt(c.q_z) << ','
             << fmt(c.e_z) << ',' << fmt(c.p_z_a) << ',' << fmt(c.p1_z_a) << ','
             << fmt(c.x_fraction) << ',' << o.cfg.ring_count << ','
             << (ring.lp_infeasible ? 1 : 0);
          return os.str();
        });
      });
      break;
    }
    case Kind::MdiActive: {
      MdiOverrides o = mdi_overrides(sc.overrides);
      out << "distance_km,rate,mu,nu,omega,y11_lower,e11_upper,q_z,e_z,lp_flag\n";
      out.flush();
      std::vector<double> mu_grid = get_or(sc.overrides, "mu_grid",
                                           std::vector<double>{0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
      std::vector<double> nu_grid =
          get_or(sc.overrides, "nu_grid", std::vector<double>{0.02, 0.05, 0.1});
      std::vector<double> om_grid =
          get_or(sc.overrides, "omega_grid", std::vector<double>{0.002, 0.005});
      parallel_for(n, threads, [&](int i) {
        run_point(i, [&](double dist, qkd::IntegrationSpec) {
          qkd::ChannelParams ch =
              qkd::make_mdi_channel(dist, o.dark, o.misalign, o.alpha_db, o.eta_d);
          qkd::ActiveMdiResult r =
              qkd::optimize_active(ch, o.cfg.f_ec, mu_grid, nu_grid, om_grid, o.cfg.n_cut);
          std::ostringstream os;
          os << fmt(dist) << ',' << fmt(r.rate) << ',' << fmt(r.mu) << ',' << fmt(r.nu) << ','
             << fmt(r.omega) << ',' << fmt(r.y11_lower) << ',' << fmt(r.e11_upper) << ','
             << fmt(r.q_z) << ',' << fmt(r.e_z) << ',' << (r.lp_infeasible ? 1 : 0);
          return os.str();
        });
      });
      break;
    }
    default: {
      qkd::cka::CkaParams base = cka_overrides(sc.overrides);
      out << "loss_db,r_passive_lp,r_passive_exact,r_active,combos_kept,combos_total\n";
      out.flush();
      parallel_for(n, threads, [&](int i) {
        run_point(i, [&](double loss, qkd::IntegrationSpec spec) {
          qkd::cka::CkaParams p = base;
          p.loss_db = loss;
          std::ostringstream os;
          os << fmt(loss) << ',';
          long long kept = 0, total = 0;
          if (sc.kind == Kind::CkaPassiveLp) {
            auto r = qkd::cka::total_rate(p, spec, qkd::cka::YieldMode::TwoDecoyLp);
            kept = r.combos_kept;
            total = r.combos_total;
            os << fmt(r.rate) << ",,";
          } else if (sc.kind == Kind::CkaPassiveExact) {
            auto r = qkd::cka::total_rate(p, spec, qkd::cka::YieldMode::Exact);
            kept = r.combos_kept;
            total = r.combos_total;
            os << ',' << fmt(r.rate) << ',';
          } else {
            std::vector<double> alphas(p.n_users, p.alpha());
            qkd::cka::ActiveCkaConfig acfg;
            acfg.decoy_intensities = get_or(
                sc.overrides, "active_decoys",
                std::vector<double>{0.125 * p.mu_max, 0.5 * p.mu_max});
            double r = qkd::cka::active_cka_rate(p, alphas, acfg, spec);
            total = 1;
            os << ",," << fmt(r);
          }
          os << ',' << kept << ',' << total;
          return os.str();
        });
      });
      break;
    }
  }
  return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"passive QKD / CKA key-rate simulator"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "evaluate a sweep scenario");

  std::string config_path, out_path = "-";
  std::uint64_t seed = 0;
  long long samples = 0;
  int threads = 0;
  run->add_option("--config", config_path, "scenario JSON file")->required();
  run->add_option("--seed", seed, "override scenario seed");
  run->add_option("--samples", samples, "override QMC sample count");
  run->add_option("--threads", threads, "worker thread count");
  run->add_option("--out", out_path, "output CSV path ('-' = stdout)");

  CLI11_PARSE(app, argc, argv);

  Scenario sc;
  try {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    json j = json::parse(in);
    sc.kind = parse_kind(j.at("kind").get<std::string>());
    sc.sweep = j.at("sweep").get<std::vector<double>>();
    sc.seed = get_or(j, "seed", std::uint64_t(1));
    sc.samples = get_or(j, "samples", (long long)(1 << 13));
    sc.threads = get_or(j, "threads", 0);
    if (j.contains("overrides")) sc.overrides = j.at("overrides");
    if (seed != 0) sc.seed = seed;
    if (samples != 0) sc.samples = samples;
    if (threads != 0) sc.threads = threads;
    if (sc.sweep.empty()) throw std::runtime_error("sweep must be nonempty");
    for (std::size_t i = 1; i < sc.sweep.size(); ++i)
      if (sc.sweep[i] <= sc.sweep[i - 1])
        throw std::runtime_error("sweep must be strictly increasing");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (out_path == "-") return run_scenario(sc, std::cout);
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "config error: cannot open output " << out_path << "\n";
      return 1;
    }
    return run_scenario(sc, out);
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
