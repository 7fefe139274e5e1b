#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "brw/config.hpp"
#include "brw/lambert.hpp"
#include "brw/model.hpp"
#include "brw/potential.hpp"
#include "brw/sim.hpp"
#include "brw/stable.hpp"
#include "brw/stats.hpp"
#include "brw/tail.hpp"
#include "brw/walk.hpp"

namespace brw {

namespace {

constexpr double kEulerGamma = 0.57721566490153286;
// Offsets the fluct stage's base seed so its trajectories are
// independent of the simulate stage's replica streams.
constexpr std::uint64_t kFluctSeedOffset = 1000003;

using KV = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string pass_fail(bool ok) { return ok ? "pass" : "fail"; }

std::string provenance_line(const ExperimentConfig& cfg) {
  return "# provenance=" + cfg.hash + "\n";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename into " + path);
}

std::string sample_path(const ExperimentConfig& cfg) {
  return cfg.out_dir + "/sample.jsonl";
}

void finish_manifest(const ExperimentConfig& cfg, const std::string& command,
                     const std::string& law_name, KV rows, int exit_code) {
  KV kv = {{"manifest_version", "1"},
           {"command", command},
           {"config_hash", cfg.hash},
           {"code_version", kCodeVersion},
           {"law", law_name}};
  kv.insert(kv.end(), rows.begin(), rows.end());
  kv.emplace_back("exit", std::to_string(exit_code));
  write_manifest(cfg.out_dir + "/manifest_" + command + ".txt", kv);
}

// First line of a sample file: the config hash spliced into the sample
// metadata, so every cross-stage consumer can verify provenance.
std::string sample_header(const ExperimentConfig& cfg,
                          const OffspringLaw& law, const Pruning& pruning) {
  EmpiricalSample meta;
  meta.law = law.name;
  meta.n_stop = cfg.n_stop;
  meta.seed = cfg.seed;
  meta.pruning = pruning;
  return "{\"config_hash\":\"" + cfg.hash + "\"," +
         meta.metadata_json().substr(1);
}

Pruning pruning_from(const ExperimentConfig& cfg) {
  Pruning p;
  p.barrier = cfg.barrier;
  p.window = cfg.window;
  p.particle_cap = cfg.particle_cap;
  return p;
}

struct LoadedSample {
  std::vector<ReplicaRecord> records;
  std::vector<double> z_hat;
};

LoadedSample read_sample(const ExperimentConfig& cfg, const std::string& who) {
  const std::string path = sample_path(cfg);
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error(who + ": missing prerequisite sample file " +
                             path + "; run the simulate command first");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(who + ": sample file " + path + " is empty");
  const auto meta = nlohmann::json::parse(line);
  if (meta.value("config_hash", "") != cfg.hash)
    throw std::runtime_error(who + ": sample file " + path +
                             " was produced under a different config "
                             "(hash mismatch)");
  LoadedSample out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.records.push_back(EmpiricalSample::parse_line(line));
    out.z_hat.push_back(out.records.back().z_hat);
  }
  if (out.records.empty())
    throw std::runtime_error(who + ": sample file " + path +
                             " holds no replicas");
  return out;
}

//------------------------------------------------------------
// calibrate: closed-form law construction plus the Monte Carlo gate on
// the two boundary-case equations.  Nonzero exit when either estimate
// is off by more than three standard errors.
//------------------------------------------------------------
int cmd_calibrate(const ExperimentConfig& cfg) {
  const OffspringLaw law = cfg.make_law();
  const BoundaryReport rep =
      verify_conditions(law, cfg.calibration_draws, cfg.seed);

  const bool m1_ok = std::abs(rep.m1.value - 1.0) <= 3.0 * rep.m1.se;
  const bool drift_ok = std::abs(rep.drift.value) <= 3.0 * rep.drift.se;
  const bool ok = m1_ok && drift_ok && rep.all_finite;

  std::ostringstream csv;
  csv.precision(10);
  csv << provenance_line(cfg) << "quantity,estimate,se,target\n";
  const auto row = [&](const char* name, const Estimate& e, double target) {
    csv << name << ',' << e.value << ',' << e.se << ',' << target << '\n';
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row("m1_hat", rep.m1, 1.0);
  row("drift_hat", rep.drift, 0.0);
  row("sigma2_hat", rep.sigma2, law.sigma2);
  row("mean_count_hat", rep.mean_count, law.mean_count);
  row("w1_log2", rep.w1_log2, nan);
  row("wtilde_log1", rep.wtilde_log1, nan);
  row("w1p_log3", rep.w1p_log3, nan);
  row("wtilde_log2", rep.wtilde_log2, nan);
  row("w1m_log3_ind", rep.w1m_log3_ind, nan);
  row("mom3_neg", rep.mom3_neg, nan);
  write_file_atomic(cfg.out_dir + "/calibrate.csv", csv.str());

  const int code = ok ? 0 : 1;
  finish_manifest(cfg, "calibrate", law.name,
                  {{"rows.calibrate", "10"},
                   {"value.m1", fmt(rep.m1.value)},
                   {"value.m1_se", fmt(rep.m1.se)},
                   {"value.drift", fmt(rep.drift.value)},
                   {"value.drift_se", fmt(rep.drift.se)},
                   {"value.sigma2", fmt(rep.sigma2.value)},
                   {"check.normalization", pass_fail(m1_ok)},
                   {"check.zero_drift", pass_fail(drift_ok)},
                   {"check.moments_finite", pass_fail(rep.all_finite)}},
                  code);
  std::printf("calibrate %s: m1 = %.6f (se %.2g), drift = %.6f (se %.2g) -> %s\n",
              law.name.c_str(), rep.m1.value, rep.m1.se, rep.drift.value,
              rep.drift.se, ok ? "boundary case holds" : "GATE FAILED");
  return code;
}

//------------------------------------------------------------
// simulate: persist replicas of (Zhat, W_n, Z_n) as JSONL behind a
// provenance header.  --resume appends exactly the missing replicas,
// byte-identical to what a full run would have written.
//------------------------------------------------------------
int cmd_simulate(const ExperimentConfig& cfg, std::size_t threads,
                 bool resume) {
  const OffspringLaw law = cfg.make_law();
  const Pruning pruning = pruning_from(cfg);
  const std::string path = sample_path(cfg);
  const std::string header = sample_header(cfg, law, pruning);

  std::size_t have = 0;
  if (resume) {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string line;
      if (!std::getline(in, line) || line + "\n" != header)
        throw std::runtime_error(
            "simulate --resume: existing " + path +
            " does not match this config; refusing to append");
      while (std::getline(in, line))
        if (!line.empty()) ++have;
      if (have > cfg.replicas)
        throw std::runtime_error(
            "simulate --resume: existing file already holds " +
            std::to_string(have) + " replicas > configured " +
            std::to_string(cfg.replicas));
    }
  }

  std::size_t appended = 0;
  if (!resume || have == 0) {
    const EmpiricalSample s = estimate_Z(law, cfg.n_stop, cfg.replicas,
                                         pruning, cfg.seed, {}, threads);
    write_file_atomic(path, header + s.jsonl());
    appended = cfg.replicas;
  } else if (have < cfg.replicas) {
    std::vector<std::size_t> skip(have);
    for (std::size_t i = 0; i < have; ++i) skip[i] = i;
    const EmpiricalSample s = estimate_Z(law, cfg.n_stop, cfg.replicas,
                                         pruning, cfg.seed, skip, threads);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path);
    out << s.jsonl();
    appended = cfg.replicas - have;
  }

  finish_manifest(cfg, "simulate", law.name,
                  {{"rows.sample", std::to_string(cfg.replicas)},
                   {"rows.appended", std::to_string(appended)},
                   {"value.n_stop", std::to_string(cfg.n_stop)},
                   {"value.barrier", fmt(cfg.barrier)}},
                  0);
  std::printf("simulate %s: %zu replicas at n_stop=%zu -> %s (%zu new)\n",
              law.name.c_str(), cfg.replicas, cfg.n_stop, path.c_str(),
              appended);
  return 0;
}

//------------------------------------------------------------
// tail: survival curves with bootstrap errors, the additive constant,
// Laplace-transform profile, Durrett-Liggett functional, Tauberian
// table.  Exit 1 only when the exact integration-by-parts identity is
// violated (a code defect, not a statistical verdict).
//------------------------------------------------------------
int cmd_tail(const ExperimentConfig& cfg) {
  const OffspringLaw law = cfg.make_law();
  const LoadedSample sample = read_sample(cfg, "tail");
  const auto& z = sample.z_hat;

  TailReport rep = tail_curves(z, cfg.x_grid, cfg.bootstrap_reps, cfg.seed);
  CEstimate ce = estimate_c(z, cfg.c_window, 2 * cfg.bootstrap_reps, cfg.seed);
  LaplaceProfile prof = laplace_profile(z, cfg.profile_grid, cfg.s_grid);
  GCurve gc = g_profile(law, z, cfg.profile_grid, cfg.g_draws, cfg.seed);

  const double z_max = *std::max_element(z.begin(), z.end());
  std::vector<double> t_keep;
  for (double t : cfg.t_grid)
    if (t <= z_max) t_keep.push_back(t);
  TauberianTable tb;
  if (!t_keep.empty()) tb = tauberian_check(z, t_keep);

  bool identity_ok = true;
  bool h_monotone = true;
  for (std::size_t i = 0; i < rep.x.size(); ++i) {
    const double slack =
        std::abs(rep.gstar[i] - rep.H[i] - rep.x[i] * rep.survival[i]);
    if (slack > rep.quadrature_error + std::abs(rep.negative_mean) + 1e-9)
      identity_ok = false;
    if (i && rep.H[i] < rep.H[i - 1]) h_monotone = false;
  }
  bool g_floor = true, exg_monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gc.x.size(); ++i) {
    if (gc.g[i] < -3.0 * gc.g_se[i]) g_floor = false;
    const double v = std::exp(-gc.x[i]) * gc.g[i];
    if (v > prev + 3.0 * std::exp(-gc.x[i]) * gc.g_se[i] + 1e-12)
      exg_monotone = false;
    prev = v;
  }
  bool offsets_shrink = true;
  for (std::size_t i = 1; i < tb.rows.size(); ++i)
    if (std::abs(tb.rows[i].offset) >= std::abs(tb.rows[i - 1].offset))
      offsets_shrink = false;

  write_file_atomic(cfg.out_dir + "/tail_curves.csv",
                    provenance_line(cfg) + rep.csv());
  write_file_atomic(cfg.out_dir + "/laplace.csv",
                    provenance_line(cfg) + prof.csv());
  write_file_atomic(cfg.out_dir + "/gcurve.csv",
                    provenance_line(cfg) + gc.csv());
  write_file_atomic(cfg.out_dir + "/tauberian.csv",
                    provenance_line(cfg) + tb.csv());

  const int code = identity_ok ? 0 : 1;
  finish_manifest(
      cfg, "tail", law.name,
      {{"rows.sample", std::to_string(z.size())},
       {"rows.tail_curves", std::to_string(rep.x.size())},
       {"rows.dropped_x", std::to_string(rep.dropped_x.size())},
       {"rows.tauberian", std::to_string(tb.rows.size())},
       {"value.c_hat", fmt(ce.c_hat)},
       {"value.c_se", fmt(ce.se)},
       {"value.c_lo", fmt(ce.lo)},
       {"value.c_hi", fmt(ce.hi)},
       {"value.c_flatness", fmt(ce.flatness)},
       {"value.negative_fraction", fmt(rep.negative_fraction)},
       {"value.negative_mean", fmt(rep.negative_mean)},
       {"value.clipped_fraction", fmt(prof.clipped_fraction)},
       {"check.identity_bound", pass_fail(identity_ok)},
       {"check.h_nondecreasing", pass_fail(h_monotone)},
       {"check.c_window_flat", pass_fail(ce.flat)},
       {"check.g_nonnegative_3se", pass_fail(g_floor)},
       {"check.exg_nonincreasing_3se", pass_fail(exg_monotone)},
       {"check.tauberian_offsets_shrink", pass_fail(offsets_shrink)}},
      code);
  std::printf("tail: %zu replicas, c_hat = %.4f (se %.4f, flat=%s), "
              "identity %s\n",
              z.size(), ce.c_hat, ce.se, ce.flat ? "yes" : "no",
              identity_ok ? "holds" : "VIOLATED");
  return code;
}

//------------------------------------------------------------
// potential: renewal tables, the occupation-identity check, ruin
// probabilities against the killed walk, and the dRi classifier demos.
//------------------------------------------------------------
double ind05(double w) { return w >= 0.0 && w <= 5.0 ? 1.0 : 0.0; }

// Unit triangles of half-width 1/64 at every integer >= 1: integrable
// but with upper cell sums bounded away from the lower ones.
double spikes(double x) {
  const double n = std::round(x);
  if (n < 1.0) return 0.0;
  const double d = std::abs(x - n);
  const double hw = 1.0 / 64.0;
  return d < hw ? 1.0 - d / hw : 0.0;
}

int cmd_potential(const ExperimentConfig& cfg) {
  const OffspringLaw law = cfg.make_law();
  const SpineLaw spine = spine_law(law);
  const bool lattice = spine.kind == SpineLaw::Kind::lattice_pm1;

  std::vector<double> grid;
  for (double x = 0.5; x <= 20.0; x += 0.5) grid.push_back(x);
  const auto mode = lattice ? RenewalTable::Mode::exact_lattice
                            : RenewalTable::Mode::empirical;
  LadderConfig lc;
  // Ladder epochs of a centred walk have infinite mean, so the truncated
  // epochs cost ~sqrt(per_epoch_cap) steps each; budget accordingly.
  lc.total_step_budget = 2000000000;
  const RenewalTable rt =
      renewal_tables(spine, grid, 200000, cfg.seed, mode, lc);
  write_file_atomic(cfg.out_dir + "/renewal.csv",
                    provenance_line(cfg) + rt.csv());

  IdentityConfig idc;
  idc.draws = 100000;
  idc.seed = cfg.seed;
  const IdentityReport idr = renewal_identity_check(spine, ind05, 5.0, 3.0, idc);
  // For the +-1 lattice both routes are exact, so the gap must vanish;
  // otherwise it is a Monte Carlo comparison.
  const bool identity_ok = lattice ? std::abs(idr.gap) < 1e-8
                                   : std::abs(idr.gap) <= 3.0 * idr.se;

  std::ostringstream csv;
  csv.precision(10);
  csv << provenance_line(cfg) << "block,name,value,se,expected\n";
  csv << "identity,lhs," << idr.lhs.value << ',' << idr.lhs.se << ",nan\n";
  csv << "identity,rhs," << idr.rhs.value << ',' << idr.rhs.se << ",nan\n";
  csv << "identity,gap," << idr.gap << ',' << idr.se << ",0\n";

  bool passage_ok = true;
  std::size_t censored = 0;
  for (double y : {9.0, 19.0, 39.0}) {
    const auto recs = passage_times(spine, 3.0, y, 20000, cfg.seed);
    MeanVar mv;
    for (const auto& r : recs) {
      mv.add(r.sigma_first ? 1.0 : 0.0);
      censored += r.censored ? 1 : 0;
    }
    const double scaled = y * mv.mean;
    const double se = y * mv.se();
    const double expected = lattice
                                ? 3.0 * y / (y + 1.0)
                                : std::numeric_limits<double>::quiet_NaN();
    if (lattice && std::abs(scaled - expected) > 3.0 * se) passage_ok = false;
    csv << "passage,y_" << y << ',' << scaled << ',' << se << ',' << expected
        << '\n';
  }

  const DriReport dexp = dri_classify([](double x) { return std::exp(-x); },
                                      {0.5, 0.25, 0.125, 0.0625}, 30.0,
                                      TailRule::exp_dominated(1.0));
  const DriReport dspike =
      dri_classify(spikes, {0.5, 0.25}, 32.0, TailRule::hard_cutoff());
  const bool dri_ok = dexp.verdict == DriVerdict::dri &&
                      dspike.verdict == DriVerdict::not_dri;
  csv << "dri,exp_verdict," << (dexp.verdict == DriVerdict::dri ? 1 : 0)
      << ",nan,1\n";
  csv << "dri,exp_integral_low," << dexp.integral_low << ",nan,nan\n";
  csv << "dri,exp_integral_high," << dexp.integral_high << ",nan,nan\n";
  csv << "dri,spike_verdict,"
      << (dspike.verdict == DriVerdict::not_dri ? 1 : 0) << ",nan,1\n";
  write_file_atomic(cfg.out_dir + "/potential.csv", csv.str());

  const int code = (identity_ok && dri_ok) ? 0 : 1;
  finish_manifest(cfg, "potential", law.name,
                  {{"rows.renewal", std::to_string(rt.grid.size())},
                   {"rows.censored_paths", std::to_string(censored)},
                   {"value.identity_lhs", fmt(idr.lhs.value)},
                   {"value.identity_rhs", fmt(idr.rhs.value)},
                   {"value.identity_gap", fmt(idr.gap)},
                   {"check.identity", pass_fail(identity_ok)},
                   {"check.passage_gambler_ruin",
                    lattice ? pass_fail(passage_ok) : "n/a"},
                   {"check.dri_exp", pass_fail(dexp.verdict == DriVerdict::dri)},
                   {"check.dri_spike",
                    pass_fail(dspike.verdict == DriVerdict::not_dri)}},
                  code);
  std::printf("potential %s: identity gap %.3g (%s), dri demos %s\n",
              law.name.c_str(), idr.gap, identity_ok ? "ok" : "FAIL",
              dri_ok ? "ok" : "FAIL");
  return code;
}

//------------------------------------------------------------
// fluct: the 1-stable fluctuation experiment, with the tail constant
// taken from the persisted sample and the location decomposition
// exposed in both manifest and stdout.
//------------------------------------------------------------
int cmd_fluct(const ExperimentConfig& cfg, std::size_t threads) {
  const OffspringLaw law = cfg.make_law();
  const LoadedSample sample = read_sample(cfg, "fluct");
  const CEstimate ce =
      estimate_c(sample.z_hat, cfg.c_window, 2 * cfg.bootstrap_reps, cfg.seed);

  FluctuationConfig fc;
  fc.replicas = cfg.fluct_replicas;
  fc.deep_factor = cfg.deep_factor;
  fc.barrier = cfg.barrier;
  fc.sensitivity_replicas = cfg.sensitivity_replicas;
  fc.seed = cfg.seed + kFluctSeedOffset;
  fc.threads = threads;
  fc.c_hat_override = ce.c_hat;
  const FluctuationReport rep = fluctuation_experiment(law, cfg.n_list, fc);

  write_file_atomic(cfg.out_dir + "/fluct.csv",
                    provenance_line(cfg) + rep.csv());

  bool ks_decreasing = true, skew_positive = true;
  for (std::size_t j = 0; j < rep.rows.size(); ++j) {
    if (j && !(rep.rows[j].ks < rep.rows[j - 1].ks)) ks_decreasing = false;
    if (!(rep.rows[j].skewness > 0.0)) skew_positive = false;
  }

  KV kv = {{"rows.fluct", std::to_string(rep.rows.size())},
           {"value.c_hat", fmt(rep.c_hat)},
           {"value.one_minus_gamma", fmt(1.0 - kEulerGamma)},
           {"value.location_scale", fmt(rep.location_scale)},
           {"value.target_a", fmt(rep.target.a)},
           {"value.target_b", fmt(rep.target.b)},
           {"value.target_beta", fmt(rep.target.beta)},
           {"value.sigma2", fmt(rep.sigma2)},
           {"value.deep_n", std::to_string(rep.deep_n)},
           {"value.deep_sensitivity", fmt(rep.deep_sensitivity)}};
  for (const auto& row : rep.rows) {
    const std::string p = "value.n" + std::to_string(row.n) + "_";
    kv.emplace_back(p + "ks", fmt(row.ks));
    kv.emplace_back(p + "ks_locfree", fmt(row.ks_locfree));
    kv.emplace_back(p + "skewness", fmt(row.skewness));
    kv.emplace_back(p + "survivors", std::to_string(row.replicas));
  }
  kv.emplace_back("check.ks_decreasing", pass_fail(ks_decreasing));
  kv.emplace_back("check.skew_positive", pass_fail(skew_positive));
  finish_manifest(cfg, "fluct", law.name, kv, 0);

  std::printf("fluct %s: a = (c_hat + 1 - gamma)*sqrt(2/(pi*sigma^2)) = "
              "(%.4f + %.4f)*%.4f = %.4f, b = %.4f, beta = 1\n",
              law.name.c_str(), rep.c_hat, 1.0 - kEulerGamma,
              rep.location_scale, rep.target.a, rep.target.b);
  for (const auto& row : rep.rows)
    std::printf("  n=%-5zu ks=%.4f ks_locfree=%.4f skew=%+.3f survivors=%zu\n",
                row.n, row.ks, row.ks_locfree, row.skewness, row.replicas);
  return 0;
}

//------------------------------------------------------------
// stable-selftest: the sample/cdf/fit triangle on five seed triples.
//------------------------------------------------------------
int cmd_stable_selftest(const ExperimentConfig& cfg) {
  const std::vector<StableTriple> triples = {{0, 1, 0},
                                             {0, 1, 1},
                                             {2, 1, 0},
                                             {1, 2, 0.5},
                                             {-1, 0.5, 1}};
  const std::size_t draws = 1000000;
  bool all_ok = true;

  std::ostringstream csv;
  csv.precision(10);
  csv << provenance_line(cfg)
      << "a,b,beta,fit_a,fit_b,fit_beta,ci_cover,cf_supgap,ks\n";
  KV kv;
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const StableTriple& tr = triples[k];
    const auto s = sample(tr, draws, cfg.seed + k);

    // empirical CF against the analytic formula on |t| <= 5
    double supgap = 0.0;
    for (double t = -5.0; t <= 5.0; t += 0.5) {
      if (t == 0.0) continue;
      std::complex<double> acc{0.0, 0.0};
      for (double x : s) acc += std::polar(1.0, t * x);
      supgap = std::max(
          supgap, std::abs(acc / static_cast<double>(draws) - cf(tr, t)));
    }

    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const double ks = ks_against_cdf(sorted, tr);

    const FitResult f = fit(s, cfg.seed + 100 + k);
    const bool cover = f.a_lo <= tr.a && tr.a <= f.a_hi && f.b_lo <= tr.b &&
                       tr.b <= f.b_hi && f.beta_lo <= tr.beta &&
                       tr.beta <= f.beta_hi;
    const bool ok = cover && supgap < 0.01 && ks < 0.005;
    all_ok = all_ok && ok;

    csv << tr.a << ',' << tr.b << ',' << tr.beta << ',' << f.triple.a << ','
        << f.triple.b << ',' << f.triple.beta << ',' << (cover ? 1 : 0) << ','
        << supgap << ',' << ks << '\n';
    const std::string p = "check.triple" + std::to_string(k);
    kv.emplace_back(p, pass_fail(ok));
  }
  write_file_atomic(cfg.out_dir + "/stable_selftest.csv", csv.str());

  const int code = all_ok ? 0 : 1;
  kv.emplace_back("check.all", pass_fail(all_ok));
  finish_manifest(cfg, "stable-selftest", "none", kv, code);
  std::printf("stable-selftest: %s\n", all_ok ? "all triples recovered"
                                              : "FAILED");
  return code;
}

//------------------------------------------------------------
// lambert-selftest: residuals on random admissible inputs plus the
// asymptotic-gap trend.
//------------------------------------------------------------
int cmd_lambert_selftest(const ExperimentConfig& cfg) {
  Stream st(cfg.seed, 0, 0);
  bool residuals_ok = true, brackets_ok = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double a = st.next_uniform(1.1, 5.0);
    const double b = st.next_uniform(0.0, a * std::log(a));
    const double eps = st.next_uniform(1e-8, 0.9 / std::exp(1.0));
    const LambertRoots r = solve_roots(a, b, eps);
    worst = std::max({worst, r.residual1, r.residual2});
    if (r.residual1 >= 1e-10 || r.residual2 >= 1e-10) residuals_ok = false;
    if (!(r.y1 > b / a && r.y1 < b / a + 1.0 && r.y1 < r.y2))
      brackets_ok = false;
  }
  const auto gaps = asymptotic_gap(1.0, 0.0, {1e-2, 1e-4, 1e-6});
  const bool trend_ok =
      gaps[1].gap < gaps[0].gap && gaps[2].gap < gaps[1].gap;

  std::ostringstream csv;
  csv.precision(10);
  csv << provenance_line(cfg) << "eps,y2,asymptotic_y2,gap\n";
  for (const auto& g : gaps)
    csv << g.eps << ',' << g.y2 << ',' << g.asymptotic_y2 << ',' << g.gap
        << '\n';
  write_file_atomic(cfg.out_dir + "/lambert_selftest.csv", csv.str());

  const bool ok = residuals_ok && brackets_ok && trend_ok;
  const int code = ok ? 0 : 1;
  finish_manifest(cfg, "lambert-selftest", "none",
                  {{"value.worst_residual", fmt(worst)},
                   {"check.residuals", pass_fail(residuals_ok)},
                   {"check.brackets", pass_fail(brackets_ok)},
                   {"check.gap_trend", pass_fail(trend_ok)}},
                  code);
  std::printf("lambert-selftest: worst residual %.3g, gap trend %s\n", worst,
              trend_ok ? "decreasing" : "NOT DECREASING");
  return code;
}

std::size_t resolve_threads(long flag_value) {
  if (flag_value > 0) return static_cast<std::size_t>(flag_value);
  if (const char* env = std::getenv("BRWLAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"boundary-case branching random walk laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  long threads_flag = 0;
  bool resume = false;

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"calibrate", "verify the boundary-case normalization of the law"},
      {"simulate", "persist replicas of the derivative martingale"},
      {"tail", "tail curves, additive constant, transform profiles"},
      {"potential", "renewal tables, occupation identity, ruin, dRi"},
      {"fluct", "1-stable fluctuation experiment"},
      {"stable-selftest", "sample/cdf/fit triangle on seed triples"},
      {"lambert-selftest", "two-root solver residuals and gap trend"}};
  for (const auto& [name, desc] : subs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "experiment config file")
        ->required();
    sub->add_option("--threads", threads_flag,
                    "worker threads (results are thread-count independent)");
    if (name == "simulate")
      sub->add_flag("--resume", resume,
                    "append missing replicas to an existing sample file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const ExperimentConfig cfg = load_config(config_path);
    std::filesystem::create_directories(cfg.out_dir);
    const std::size_t threads = resolve_threads(threads_flag);

    if (app.got_subcommand("calibrate")) return cmd_calibrate(cfg);
    if (app.got_subcommand("simulate"))
      return cmd_simulate(cfg, threads, resume);
    if (app.got_subcommand("tail")) return cmd_tail(cfg);
    if (app.got_subcommand("potential")) return cmd_potential(cfg);
    if (app.got_subcommand("fluct")) return cmd_fluct(cfg, threads);
    if (app.got_subcommand("stable-selftest")) return cmd_stable_selftest(cfg);
    if (app.got_subcommand("lambert-selftest"))
      return cmd_lambert_selftest(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

}  // namespace brw
