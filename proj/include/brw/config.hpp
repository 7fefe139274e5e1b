#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "brw/model.hpp"

namespace brw {

//============================================================
// Experiment configuration: nested dotted key = value text.
// '#' starts a comment; blank lines are skipped; every key must be
// known (silent misconfiguration would invalidate a run) and may
// appear at most once.  law.kind and simulate.seed are mandatory --
// there is no wall-clock seeding anywhere.
//============================================================

struct ExperimentConfig {
  // law section
  std::string law_kind;  // binary_gaussian | lattice_bernoulli
  LawOverrides overrides;

  // simulate section
  std::size_t n_stop = 20;
  std::size_t replicas = 100000;
  double barrier = 15.0;
  double window = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  std::size_t particle_cap = 10000000;
  std::size_t calibration_draws = 1000000;

  // analysis section (defaults match the pinned experiment grids)
  std::vector<double> x_grid;        // tail survival grid
  std::vector<double> c_window;      // empty = automatic quantile window
  std::size_t bootstrap_reps = 200;
  std::vector<double> profile_grid;  // D and G abscissae
  std::vector<double> s_grid;        // Laplace transform arguments
  std::vector<double> t_grid;        // Tauberian comparison points
  std::size_t g_draws = 50000;

  // fluct section
  std::vector<std::size_t> n_list = {64, 256, 1024};
  std::size_t deep_factor = 8;
  std::size_t fluct_replicas = 2000;
  std::size_t sensitivity_replicas = 1000;

  // output section
  std::string out_dir = "out";

  std::string raw;   // exact file contents (the hashed bytes)
  std::string hash;  // fnv1a64 of raw, zero-padded hex

  OffspringLaw make_law() const;
};

// Throws std::invalid_argument naming the offending key / line; the
// message starts with "config:".
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

std::string fnv1a64_hex(const std::string& data);

// Single structured text record (key=value per line, fixed order),
// written atomically via rename.  No timestamps: identical runs must
// produce byte-identical artifacts.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& kv);

int cli_main(int argc, char** argv);

}  // namespace brw
