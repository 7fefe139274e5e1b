#include "brw/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace brw {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& what, std::size_t line) {
  throw std::invalid_argument("config: " + what + " (line " +
                              std::to_string(line) + ")");
}

double parse_double(const std::string& v, const std::string& key,
                    std::size_t line) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail("invalid value for " + key, line);
  }
  if (used != v.size()) fail("invalid value for " + key, line);
  return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key,
                        std::size_t line) {
  // stoull would wrap "-4" silently, so reject any sign up front
  if (v.empty() || v[0] == '-' || v[0] == '+')
    fail("invalid value for " + key, line);
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    fail("invalid value for " + key, line);
  }
  if (used != v.size()) fail("invalid value for " + key, line);
  return out;
}

std::vector<double> parse_list(const std::string& v, const std::string& key,
                               std::size_t line) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail("empty list entry in " + key, line);
    out.push_back(parse_double(item, key, line));
  }
  if (out.empty()) fail("empty list for " + key, line);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.raw = text;
  cfg.hash = fnv1a64_hex(text);

  bool has_seed = false;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string full_line;
  std::size_t line_no = 0;
  while (std::getline(in, full_line)) {
    ++line_no;
    const auto hash_pos = full_line.find('#');
    std::string line = trim(hash_pos == std::string::npos
                                ? full_line
                                : full_line.substr(0, hash_pos));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key", line_no);
    if (val.empty()) fail("empty value for " + key, line_no);
    if (!seen.insert(key).second) fail("duplicate key " + key, line_no);

    if (key == "law.kind") {
      cfg.law_kind = val;
    } else if (key == "law.mean") {
      cfg.overrides.mean = parse_double(val, key, line_no);
    } else if (key == "law.var") {
      cfg.overrides.var = parse_double(val, key, line_no);
    } else if (key == "law.p_down") {
      cfg.overrides.p_down = parse_double(val, key, line_no);
    } else if (key == "law.p_up_extra") {
      cfg.overrides.p_up_extra = parse_double(val, key, line_no);
    } else if (key == "law.c0") {
      cfg.overrides.c0 = parse_double(val, key, line_no);
    } else if (key == "simulate.n_stop") {
      cfg.n_stop = parse_u64(val, key, line_no);
    } else if (key == "simulate.replicas") {
      cfg.replicas = parse_u64(val, key, line_no);
    } else if (key == "simulate.barrier") {
      cfg.barrier = parse_double(val, key, line_no);
    } else if (key == "simulate.window") {
      cfg.window = parse_double(val, key, line_no);
    } else if (key == "simulate.seed") {
      cfg.seed = parse_u64(val, key, line_no);
      has_seed = true;
    } else if (key == "simulate.particle_cap") {
      cfg.particle_cap = parse_u64(val, key, line_no);
    } else if (key == "simulate.calibration_draws") {
      cfg.calibration_draws = parse_u64(val, key, line_no);
    } else if (key == "analysis.x_grid") {
      cfg.x_grid = parse_list(val, key, line_no);
    } else if (key == "analysis.c_window") {
      cfg.c_window = parse_list(val, key, line_no);
    } else if (key == "analysis.bootstrap_reps") {
      cfg.bootstrap_reps = parse_u64(val, key, line_no);
    } else if (key == "analysis.profile_grid") {
      cfg.profile_grid = parse_list(val, key, line_no);
    } else if (key == "analysis.s_grid") {
      cfg.s_grid = parse_list(val, key, line_no);
    } else if (key == "analysis.t_grid") {
      cfg.t_grid = parse_list(val, key, line_no);
    } else if (key == "analysis.g_draws") {
      cfg.g_draws = parse_u64(val, key, line_no);
    } else if (key == "fluct.n_list") {
      cfg.n_list.clear();
      for (double v : parse_list(val, key, line_no)) {
        if (v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
          fail("fluct.n_list entries must be positive integers", line_no);
        cfg.n_list.push_back(static_cast<std::size_t>(v));
      }
    } else if (key == "fluct.deep_factor") {
      cfg.deep_factor = parse_u64(val, key, line_no);
    } else if (key == "fluct.replicas") {
      cfg.fluct_replicas = parse_u64(val, key, line_no);
    } else if (key == "fluct.sensitivity_replicas") {
      cfg.sensitivity_replicas = parse_u64(val, key, line_no);
    } else if (key == "output.dir") {
      cfg.out_dir = val;
    } else {
      fail("unknown key " + key, line_no);
    }
  }

  if (cfg.law_kind.empty())
    throw std::invalid_argument("config: missing required key law.kind");
  if (!has_seed)
    throw std::invalid_argument("config: missing required key simulate.seed");

  // default grids for the pinned experiments
  if (cfg.x_grid.empty()) {
    for (double x = 1; x <= 20; x += 1) cfg.x_grid.push_back(x);
    for (double x = 25; x <= 50; x += 5) cfg.x_grid.push_back(x);
  }
  if (cfg.profile_grid.empty())
    for (double x = -8; x <= 12; x += 0.5) cfg.profile_grid.push_back(x);
  if (cfg.s_grid.empty())
    for (double s = 0; s <= 3.0; s += 0.25) cfg.s_grid.push_back(s);
  if (cfg.t_grid.empty()) cfg.t_grid = {10, 16, 25, 40, 50};
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("config: cannot open file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

OffspringLaw ExperimentConfig::make_law() const {
  return make_builtin_law(law_kind, overrides);
}

std::string fnv1a64_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& kv) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("manifest: cannot write " + tmp);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("manifest: cannot rename into " + path);
}

}  // namespace brw
