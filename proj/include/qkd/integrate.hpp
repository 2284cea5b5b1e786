#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qkd/channel.hpp"
#include "qkd/source.hpp"

namespace qkd {

enum class SequenceKind { LowDiscrepancy, PseudoRandom };

struct IntegrationSpec {
  long long n_points = 1 << 18;
  std::uint64_t seed = 1;
  double target_rel_err = 1e-3;
  SequenceKind sequence = SequenceKind::LowDiscrepancy;
  int replicates = 8;  // randomized shifts for the error estimate
  int phase_nodes = 64;
};

struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
  long long n_used = 0;
};

// Region-pair observables of the seven-dimensional expectation: joint
// postselection probability plus conditional gain / error-gain per Bell
// announcement. The seventh dimension (inter-user phase) is handled
// spectrally inside the channel kernel.
struct RegionPairObservables {
  Estimate p_pair;
  Estimate gain;       // psi- + psi+
  Estimate err_gain;   // psi- + psi+
  Estimate gain_minus, err_gain_minus;
  Estimate gain_plus, err_gain_plus;
};

// A postselection target: one or two sectors sharing a basis (the two Z caps,
// or the two X azimuth windows). Bits are taken from the sector labels.
using RegionSet = std::vector<Region>;

RegionPairObservables region_pair_observables(const SourceModel& sm, const RegionSet& set_a,
                                              const RegionSet& set_b, const ChannelParams& ch,
                                              const IntegrationSpec& spec);

// Conditional expectation of an arbitrary kernel f(bloch_a, bloch_b) over the
// modulated region-restricted law (used by tests and the factorization check).
Estimate region_pair_expect(const SourceModel& sm, const RegionSet& set_a, const RegionSet& set_b,
                            const std::function<double(const BlochOutput&, const BlochOutput&)>& f,
                            const IntegrationSpec& spec);

// Both sides of the decoy decoupling identity for a synthetic yield:
// lhs = <P_n P_m Y> over the joint modulated law (QMC); rhs =
// <P_n><P_m> Y_mix with Y_mix the (sin+cos)^n-weighted sector quotient
// (deterministic quadrature).
struct FactorizationResult {
  Estimate lhs;
  double rhs = 0.0;
};

using SyntheticYield = std::function<double(double theta_a, double phi_a, double theta_b,
                                            double phi_b)>;  // sector angles

FactorizationResult factorization_check(const SourceModel& sm, const Region& region_a,
                                        const Region& region_b, const SyntheticYield& yield,
                                        int n, int m, const IntegrationSpec& spec);

// Key-round observables: gain and error-gain of the raw (unmodulated) Z
// ensemble, pooled over both caps and all four bit pairings, plus the same
// quantities resolved over ring_count equal polar-angle rings per side.
struct RawZObservables {
  Estimate gain;
  Estimate err_gain;
  std::vector<double> ring_prob;                   // per-ring share of one cap
  std::vector<std::vector<Estimate>> ring_gain;    // [ring_a][ring_b]
  std::vector<std::vector<Estimate>> ring_err_gain;
};

RawZObservables raw_z_observables(double delta_z, double mu_max, int ring_count,
                                  const ChannelParams& ch, const IntegrationSpec& spec);

}  // namespace qkd
