#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "brw/model.hpp"

namespace brw {

//============================================================
// Generation-by-generation simulation of the branching random
// walk: additive martingale W_n, derivative martingale Z_n,
// minimum position, truncated martingale, and persisted replica
// samples of the limit estimate Zhat = Z_{n_stop}.
//============================================================

// Stamped into artifact metadata; never a timestamp, so identical
// configs write byte-identical files.
inline constexpr const char* kCodeVersion = "1.0.0";

struct Pruning {
  // Drop a child with position above min(barrier, generation minimum +
  // window) and add e^{-S}(1 + |S|) to the pruned-mass bound, an upper
  // proxy for the subtree's expected contribution to later W and Z.
  // The absolute barrier keeps W/Z exact up to the bound but leaves the
  // population near 2^n, so it only suits shallow runs; the window keeps
  // the population of order e^{window} and suits deep runs.
  double barrier = 15.0;
  double window = std::numeric_limits<double>::infinity();
  std::size_t particle_cap = 10'000'000;

  static Pruning none() {
    return {std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(), 10'000'000};
  }
};

struct MartingaleRecord {
  std::size_t n = 0;
  double w = 0.0;        // sum of e^{-S(u)}
  double z = 0.0;        // sum of e^{-S(u)} S(u)
  double min_pos = 0.0;  // +inf when the population is extinct
  std::size_t particle_count = 0;
  double pruned_mass_bound = 0.0;  // cumulative up to this generation
};

// Records at the requested generations (sorted, may include 0).  The
// trajectory is a pure function of (seed, replica): generation g draws
// from the stream keyed (seed, replica, 2^16 + g).
std::vector<MartingaleRecord> evolve(const OffspringLaw& law,
                                     const std::vector<std::size_t>& checkpoints,
                                     const Pruning& pruning, std::uint64_t seed,
                                     std::uint64_t replica);

// Convenience: one record per generation 0..n_max.
std::vector<MartingaleRecord> evolve_all(const OffspringLaw& law,
                                         std::size_t n_max,
                                         const Pruning& pruning,
                                         std::uint64_t seed,
                                         std::uint64_t replica);

struct ReplicaRecord {
  std::size_t replica_id = 0;
  std::uint64_t seed = 0;
  std::size_t n_stop = 0;
  double z_hat = 0.0;  // Z_{n_stop}; kept even when negative
  double w_n = 0.0;
  double z_n = 0.0;
  double min_pos = 0.0;
  double pruned_mass_bound = 0.0;
};

struct EmpiricalSample {
  std::string law;  // descriptor: builtin kind name
  std::size_t n_stop = 0;
  std::uint64_t seed = 0;
  Pruning pruning;
  std::vector<ReplicaRecord> replicas;

  std::string jsonl() const;          // one replica per line
  std::string metadata_json() const;  // sidecar: law, pruning, seed, version

  static ReplicaRecord parse_line(const std::string& line);
};

// Zhat = Z_{n_stop} per replica.  Replica ids listed in `skip` (sorted)
// are omitted, which is how resumed runs avoid recomputation.  Replicas
// are independent and run on `threads` workers; records land in a
// replica-ordered vector, so output is identical for any thread count.
EmpiricalSample estimate_Z(const OffspringLaw& law, std::size_t n_stop,
                           std::size_t replicas, const Pruning& pruning,
                           std::uint64_t seed,
                           const std::vector<std::size_t>& skip = {},
                           std::size_t threads = 1);

struct TruncatedRecord {
  std::size_t n = 0;
  double d = 0.0;     // sum over surviving lines of e^{-S(u)} R(S(u)+alpha)
  bool alive = true;  // no particle killed below -alpha so far
};

// BRW killed below -alpha (a killed particle takes its subtree with it).
// R is the strict descending ladder renewal function of the spine walk.
std::vector<TruncatedRecord> truncated_trajectory(
    const OffspringLaw& law, double alpha, std::size_t n_max,
    const std::function<double(double)>& R, const Pruning& pruning,
    std::uint64_t seed, std::uint64_t replica);

struct FixpointReport {
  double ks = 0.0;
  std::size_t n1 = 0, n2 = 0;
};

// Two-sample KS between Zhat replicas and the smoothing-transform image
// sum_{|u|=k} e^{-S(u)} Zhat^{(u)} built from a fresh generation-k front
// with independent Zhat copies attached.
FixpointReport fixpoint_check(const OffspringLaw& law, std::size_t k,
                              std::size_t n_stop, std::size_t replicas,
                              const Pruning& pruning, std::uint64_t seed,
                              std::size_t threads = 1);

}  // namespace brw
