#include "brw/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "brw/rng.hpp"
#include "brw/stats.hpp"
#include "json.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kGenBase = 1ull << 16;
constexpr std::uint64_t kFrontReplicaBase = 1ull << 40;
constexpr std::uint64_t kChildReplicaBase = 1ull << 41;
constexpr std::size_t kMaxFront = 4096;

// One generation: every particle in `cur` births its brood; children
// above the absolute barrier are dropped at birth, then the relative
// window (if finite) trims against the new generation's minimum.
void step_generation(const OffspringLaw& law, const std::vector<double>& cur,
                     std::vector<double>& next, const Pruning& pruning,
                     Stream& stream, Neumaier& pruned,
                     std::vector<double>& brood) {
  next.clear();
  next.reserve(cur.size() * 2 + 8);
  const double barrier = pruning.barrier;

  const auto push_child = [&](double pos) {
    if (pos > barrier)
      pruned.add(std::exp(-pos) * (1.0 + std::abs(pos)));
    else
      next.push_back(pos);
  };

  switch (law.kind) {
    case OffspringKind::binary_gaussian: {
      const double sd = std::sqrt(law.var);
      for (const double parent : cur) {
        double z0, z1;
        stream.next_normal_pair(z0, z1);
        push_child(parent + law.mean + sd * z0);
        push_child(parent + law.mean + sd * z1);
        if (next.size() > pruning.particle_cap) break;
      }
      break;
    }
    case OffspringKind::lattice_bernoulli: {
      for (const double parent : cur) {
        if (stream.next_bernoulli(law.p_down)) push_child(parent - 1.0);
        push_child(parent + 1.0);
        if (stream.next_bernoulli(law.p_up_extra)) push_child(parent + 1.0);
        if (next.size() > pruning.particle_cap) break;
      }
      break;
    }
    case OffspringKind::custom: {
      for (const double parent : cur) {
        law.sample(stream, brood);
        for (const double d : brood) push_child(parent + d);
        if (next.size() > pruning.particle_cap) break;
      }
      break;
    }
  }
  if (next.size() > pruning.particle_cap)
    throw std::runtime_error(
        "evolve: population cap " + std::to_string(pruning.particle_cap) +
        " exceeded");

  if (std::isfinite(pruning.window) && !next.empty()) {
    const double cut =
        *std::min_element(next.begin(), next.end()) + pruning.window;
    std::size_t keep = 0;
    for (const double pos : next) {
      if (pos > cut)
        pruned.add(std::exp(-pos) * (1.0 + std::abs(pos)));
      else
        next[keep++] = pos;
    }
    next.resize(keep);
  }
}

MartingaleRecord make_record(std::size_t n, const std::vector<double>& cur,
                             double pruned_bound) {
  MartingaleRecord rec;
  rec.n = n;
  rec.particle_count = cur.size();
  rec.pruned_mass_bound = pruned_bound;
  if (cur.empty()) {
    rec.min_pos = std::numeric_limits<double>::infinity();
    return rec;
  }
  Neumaier w, z;
  double mn = cur.front();
  for (const double pos : cur) {
    const double weight = std::exp(-pos);
    w.add(weight);
    z.add(weight * pos);
    mn = std::min(mn, pos);
  }
  rec.w = w.value();
  rec.z = z.value();
  rec.min_pos = mn;
  return rec;
}

// Runs fn(i) for i in [0, n) on the requested number of workers; any
// exception is rethrown on the calling thread.  Work items write to
// disjoint slots, so scheduling never affects results.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Non-finite values (extinct replicas have min_pos = +inf) become null.
std::string fmt_json(double v) { return std::isfinite(v) ? fmt(v) : "null"; }

}  // namespace

std::vector<MartingaleRecord> evolve(const OffspringLaw& law,
                                     const std::vector<std::size_t>& checkpoints,
                                     const Pruning& pruning, std::uint64_t seed,
                                     std::uint64_t replica) {
  if (checkpoints.empty())
    throw std::invalid_argument("evolve: no checkpoints requested");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1])
      throw std::invalid_argument("evolve: checkpoints must increase");
  if (pruning.particle_cap == 0)
    throw std::invalid_argument("evolve: particle cap must be positive");

  std::vector<MartingaleRecord> records;
  records.reserve(checkpoints.size());
  std::vector<double> cur{0.0}, next, brood;
  Neumaier pruned;
  std::size_t next_ck = 0;
  if (checkpoints[next_ck] == 0) {
    records.push_back(make_record(0, cur, 0.0));
    ++next_ck;
  }
  for (std::size_t g = 1; g <= checkpoints.back(); ++g) {
    Stream stream(seed, replica, kGenBase + g);
    try {
      step_generation(law, cur, next, pruning, stream, pruned, brood);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " (replica " +
                               std::to_string(replica) + ", generation " +
                               std::to_string(g) + ")");
    }
    cur.swap(next);
    if (g == checkpoints[next_ck]) {
      records.push_back(make_record(g, cur, pruned.value()));
      ++next_ck;
    }
  }
  return records;
}

std::vector<MartingaleRecord> evolve_all(const OffspringLaw& law,
                                         std::size_t n_max,
                                         const Pruning& pruning,
                                         std::uint64_t seed,
                                         std::uint64_t replica) {
  std::vector<std::size_t> all(n_max + 1);
  for (std::size_t i = 0; i <= n_max; ++i) all[i] = i;
  return evolve(law, all, pruning, seed, replica);
}

EmpiricalSample estimate_Z(const OffspringLaw& law, std::size_t n_stop,
                           std::size_t replicas, const Pruning& pruning,
                           std::uint64_t seed,
                           const std::vector<std::size_t>& skip,
                           std::size_t threads) {
  EmpiricalSample sample;
  sample.law = law.name.empty() ? "custom" : law.name;
  sample.n_stop = n_stop;
  sample.seed = seed;
  sample.pruning = pruning;

  std::vector<std::size_t> skip_sorted = skip;
  std::sort(skip_sorted.begin(), skip_sorted.end());
  std::vector<std::size_t> todo;
  todo.reserve(replicas);
  for (std::size_t r = 0; r < replicas; ++r)
    if (!std::binary_search(skip_sorted.begin(), skip_sorted.end(), r))
      todo.push_back(r);

  sample.replicas.resize(todo.size());
  const std::vector<std::size_t> checkpoints{n_stop};
  parallel_for(todo.size(), threads, [&](std::size_t i) {
    const std::size_t r = todo[i];
    const auto recs = evolve(law, checkpoints, pruning, seed, r);
    const MartingaleRecord& rec = recs.back();
    sample.replicas[i] = {r,     seed,        n_stop,      rec.z,
                          rec.w, rec.z,       rec.min_pos, rec.pruned_mass_bound};
  });
  return sample;
}

std::string EmpiricalSample::jsonl() const {
  std::string out;
  for (const auto& r : replicas) {
    out += "{\"replica_id\":" + std::to_string(r.replica_id) +
           ",\"seed\":" + std::to_string(r.seed) +
           ",\"n_stop\":" + std::to_string(r.n_stop) +
           ",\"Z_hat\":" + fmt_json(r.z_hat) + ",\"W_n\":" + fmt_json(r.w_n) +
           ",\"Z_n\":" + fmt_json(r.z_n) +
           ",\"min_pos\":" + fmt_json(r.min_pos) +
           ",\"pruned_mass_bound\":" + fmt_json(r.pruned_mass_bound) + "}\n";
  }
  return out;
}

std::string EmpiricalSample::metadata_json() const {
  const auto opt = [](double v) {
    return std::isfinite(v) ? fmt(v) : std::string("null");
  };
  std::string out = "{\"law\":\"" + law + "\"";
  out += ",\"n_stop\":" + std::to_string(n_stop);
  out += ",\"seed\":" + std::to_string(seed);
  out += ",\"pruning\":{\"barrier\":" + opt(pruning.barrier) +
         ",\"window\":" + opt(pruning.window) +
         ",\"particle_cap\":" + std::to_string(pruning.particle_cap) + "}";
  out += ",\"code_version\":\"";
  out += kCodeVersion;
  out += "\"}\n";
  return out;
}

ReplicaRecord EmpiricalSample::parse_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  ReplicaRecord r;
  r.replica_id = j.at("replica_id").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_stop = j.at("n_stop").get<std::size_t>();
  const auto num = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::infinity()
                       : v.get<double>();
  };
  r.z_hat = num("Z_hat");
  r.w_n = num("W_n");
  r.z_n = num("Z_n");
  r.min_pos = num("min_pos");
  r.pruned_mass_bound = num("pruned_mass_bound");
  return r;
}

std::vector<TruncatedRecord> truncated_trajectory(
    const OffspringLaw& law, double alpha, std::size_t n_max,
    const std::function<double(double)>& R, const Pruning& pruning,
    std::uint64_t seed, std::uint64_t replica) {
  if (!(alpha >= 0.0))
    throw std::invalid_argument("truncated_trajectory: alpha must be >= 0");
  if (!R) throw std::invalid_argument("truncated_trajectory: R required");

  std::vector<TruncatedRecord> records;
  records.reserve(n_max + 1);
  std::vector<double> cur{0.0}, next, brood;
  Neumaier pruned;
  bool alive = true;

  const auto emit = [&](std::size_t n) {
    Neumaier d;
    for (const double pos : cur) d.add(std::exp(-pos) * R(pos + alpha));
    records.push_back({n, d.value(), alive});
  };

  emit(0);
  for (std::size_t g = 1; g <= n_max; ++g) {
    Stream stream(seed, replica, kGenBase + g);
    step_generation(law, cur, next, pruning, stream, pruned, brood);
    // Killing below -alpha removes the particle and its future subtree.
    std::size_t keep = 0;
    for (const double pos : next) {
      if (pos < -alpha)
        alive = false;
      else
        next[keep++] = pos;
    }
    next.resize(keep);
    cur.swap(next);
    emit(g);
  }
  return records;
}

FixpointReport fixpoint_check(const OffspringLaw& law, std::size_t k,
                              std::size_t n_stop, std::size_t replicas,
                              const Pruning& pruning, std::uint64_t seed,
                              std::size_t threads) {
  if (k < 1) throw std::invalid_argument("fixpoint_check: k must be >= 1");
  if (replicas < 1000)
    throw std::invalid_argument("fixpoint_check: needs at least 10^3 replicas");

  // Reject non-branching laws: the smoothing transform is degenerate.
  double mean_count = law.mean_count;
  if (mean_count <= 0.0) {
    Stream probe(seed, kFrontReplicaBase, 0);
    std::vector<double> brood;
    double total = 0.0;
    for (int i = 0; i < 512; ++i) {
      law.sample(probe, brood);
      total += static_cast<double>(brood.size());
    }
    mean_count = total / 512.0;
  }
  if (mean_count <= 1.0 + 1e-9)
    throw std::invalid_argument(
        "fixpoint_check: law is not supercritical (E N <= 1)");

  const std::vector<std::size_t> stop{n_stop};
  std::vector<double> direct(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    direct[r] = evolve(law, stop, pruning, seed, r).back().z;
  });

  std::vector<double> transformed(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    // Fresh k-generation front, independent of both samples above.
    std::vector<double> cur{0.0}, next, brood;
    Neumaier pruned;
    for (std::size_t g = 1; g <= k; ++g) {
      Stream stream(seed, kFrontReplicaBase + r, kGenBase + g);
      step_generation(law, cur, next, Pruning::none(), stream, pruned, brood);
      cur.swap(next);
    }
    if (cur.size() > kMaxFront)
      throw std::runtime_error("fixpoint_check: generation-k front too large");
    Neumaier sum;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const std::uint64_t child = kChildReplicaBase + r * kMaxFront + j;
      const double z_child = evolve(law, stop, pruning, seed, child).back().z;
      sum.add(std::exp(-cur[j]) * z_child);
    }
    transformed[r] = sum.value();
  });

  std::sort(direct.begin(), direct.end());
  std::sort(transformed.begin(), transformed.end());
  FixpointReport rep;
  rep.ks = ks_two_sample(direct, transformed);
  rep.n1 = direct.size();
  rep.n2 = transformed.size();
  return rep;
}

}  // namespace brw
