#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <vector>

#include "zorl/agent.hpp"
#include "zorl/baselines.hpp"
#include "zorl/common.hpp"
#include "zorl/environments.hpp"
#include "zorl/run_record.hpp"

namespace zorl {

namespace fs = std::filesystem;

inline constexpr const char* kCsvHeader =
    "run_id,env,algo,seed,t,raw_reward,cum_raw_reward,episode_index,"
    "active_cell_count,max_level";

/// Shortest text that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Flat sectioned `key = value` text: `[section]` headers, `#` comments.
class IniFile {
 public:
  static IniFile parse(std::istream& in) {
    IniFile ini;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError("line " + std::to_string(lineno) +
                            ": unterminated section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        ini.sections_[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) {
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      }
      ini.sections_[section][key] = trim(line.substr(eq + 1));
    }
    return ini;
  }

  static IniFile load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  std::vector<std::string> sections() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : sections_) out.push_back(name);
    return out;
  }

  /// Reads and consumes a key; `unconsumed` reports leftovers as errors.
  std::optional<std::string> take(const std::string& section,
                                  const std::string& key) {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return std::nullopt;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return std::nullopt;
    std::string v = kit->second;
    sit->second.erase(kit);
    return v;
  }

  template <class T>
  void read(const std::string& section, const std::string& key, T& out) {
    auto v = take(section, key);
    if (!v) return;
    std::istringstream ss(*v);
    T parsed{};
    if constexpr (std::is_same_v<T, bool>) {
      ss >> std::boolalpha >> parsed;
      if (ss.fail()) {
        ss.clear();
        ss.str(*v);
        ss >> std::noboolalpha >> parsed;
      }
    } else {
      ss >> parsed;
    }
    if (ss.fail() || !(ss >> std::ws).eof()) {
      throw ConfigError("bad value '" + *v + "' for key " + section + "." + key);
    }
    out = parsed;
  }

  void check_consumed() const {
    for (const auto& [section, keys] : sections_) {
      if (!keys.empty()) {
        throw ConfigError("unknown key " + section + "." + keys.begin()->first);
      }
    }
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct RunSpec {
  std::string env;
  std::string algo;
  std::uint64_t seed = 0;

  std::string run_id() const { return env + "-" + algo + "-s" + std::to_string(seed); }
};

/// Everything needed to execute a run matrix.
struct RunConfig {
  std::vector<RunSpec> runs;
  std::uint64_t horizon = 20000;
  std::string out_dir = "results";
  unsigned parallelism = 1;
  bool write_splits = true;
  AgentConfig zorl;
  BaselineConfig ucrl2;
  BaselineConfig rviq;
  std::map<std::string, EnvSpec> envs;

  void validate() const {
    if (horizon < 1) throw ConfigError("run.horizon must be at least 1");
    if (runs.empty()) throw ConfigError("run matrix is empty");
    std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
    for (const auto& r : runs) {
      if (!seen.emplace(r.env, r.algo, r.seed).second) {
        throw ConfigError("duplicate seed " + std::to_string(r.seed) + " for " +
                          r.env + "/" + r.algo);
      }
      if (r.algo != "zorl" && r.algo != "ucrl2" && r.algo != "rviq") {
        throw ConfigError("unknown algo '" + r.algo + "' in run.algos");
      }
    }
  }
};

namespace detail {

inline void read_agent(IniFile& ini, AgentConfig& c) {
  const std::string s = "zorl";
  ini.read(s, "delta", c.delta);
  ini.read(s, "lipschitz_r", c.lipschitz_r);
  ini.read(s, "alpha", c.alpha);
  ini.read(s, "c_v", c.c_v);
  ini.read(s, "lipschitz_p", c.lipschitz_p);
  ini.read(s, "c_a", c.c_a);
  ini.read(s, "c_eta", c.c_eta);
  ini.read(s, "span_bound", c.span_bound);
  ini.read(s, "c_h", c.c_h);
  ini.read(s, "c1", c.c1);
  ini.read(s, "kappa1", c.kappa1);
  ini.read(s, "max_depth", c.max_depth);
  if (auto m = ini.take(s, "mode")) {
    if (*m == "practical") c.mode = AgentConfig::Mode::kPractical;
    else if (*m == "theoretical") c.mode = AgentConfig::Mode::kTheoretical;
    else throw ConfigError("bad value '" + *m + "' for key zorl.mode");
  }
  if (auto m = ini.take(s, "span_mode")) {
    if (*m == "fixed") c.span_mode = AgentConfig::SpanMode::kFixed;
    else if (*m == "formula") c.span_mode = AgentConfig::SpanMode::kFormula;
    else throw ConfigError("bad value '" + *m + "' for key zorl.span_mode");
  }
  if (auto m = ini.take(s, "stopping")) {
    if (*m == "full") c.stopping = StoppingRule::kFull;
    else if (*m == "increment") c.stopping = StoppingRule::kIncrement;
    else throw ConfigError("bad value '" + *m + "' for key zorl.stopping");
  }
}

inline void read_baseline(IniFile& ini, const std::string& s, BaselineConfig& c) {
  ini.read(s, "delta", c.delta);
  ini.read(s, "grid_level", c.grid_level);
  if (s == "ucrl2") {
    ini.read(s, "c_conf", c.c_conf);
    ini.read(s, "c_reward", c.c_reward);
  } else {
    ini.read(s, "step_scale", c.step_scale);
  }
}

inline void read_env(IniFile& ini, const std::string& name, EnvSpec& e) {
  const std::string s = "env." + name;
  ini.read(s, "noise_std", e.noise_std);
  ini.read(s, "noise_mean", e.noise_mean);
  if (auto init = ini.take(s, "initial_state")) {
    std::vector<double> x;
    for (const auto& item : split_list(*init)) {
      try {
        x.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad value '" + *init + "' for key " + s + ".initial_state");
      }
    }
    if (x.size() != e.initial_state.size()) {
      throw ConfigError("wrong dimension for key " + s + ".initial_state");
    }
    e.initial_state = x;
  }
}

}  // namespace detail

/// Builds a RunConfig from the flat config format.
inline RunConfig parse_run_config(IniFile ini) {
  RunConfig cfg;
  if (!ini.has_section("run")) throw ConfigError("missing [run] section");
  ini.read("run", "horizon", cfg.horizon);
  ini.read("run", "parallelism", cfg.parallelism);
  ini.read("run", "write_splits", cfg.write_splits);
  if (auto out = ini.take("run", "out")) cfg.out_dir = *out;
  const auto envs = split_list(ini.take("run", "envs").value_or(""));
  const auto algos = split_list(ini.take("run", "algos").value_or(""));
  const auto seed_text = ini.take("run", "seeds").value_or("");
  if (envs.empty()) throw ConfigError("missing key run.envs");
  if (algos.empty()) throw ConfigError("missing key run.algos");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seed_text)) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("bad value '" + seed_text + "' for key run.seeds");
    }
  }
  if (seeds.empty()) throw ConfigError("missing key run.seeds");

  detail::read_agent(ini, cfg.zorl);
  detail::read_baseline(ini, "ucrl2", cfg.ucrl2);
  detail::read_baseline(ini, "rviq", cfg.rviq);
  for (const auto& name : envs) {
    EnvSpec e = make_env(name);
    detail::read_env(ini, name, e);
    cfg.envs[name] = e;
  }
  for (const auto& section : ini.sections()) {
    if (section.rfind("env.", 0) == 0 && !cfg.envs.count(section.substr(4))) {
      throw ConfigError("section [" + section + "] names an environment not in run.envs");
    }
  }
  ini.check_consumed();

  for (const auto& e : envs)
    for (const auto& a : algos)
      for (auto s : seeds) cfg.runs.push_back({e, a, s});
  cfg.zorl.horizon = cfg.ucrl2.horizon = cfg.rviq.horizon = cfg.horizon;
  cfg.validate();
  cfg.zorl.validate();
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(IniFile::load(path));
}

/// Executes one run and returns its step log.
inline RunResult execute_run(const RunConfig& cfg, const RunSpec& spec) {
  const EnvSpec& env = cfg.envs.at(spec.env);
  if (spec.algo == "zorl") {
    AgentConfig c = cfg.zorl;
    c.seed = spec.seed;
    return run_zorl(env, c);
  }
  BaselineConfig c = spec.algo == "ucrl2" ? cfg.ucrl2 : cfg.rviq;
  c.seed = spec.seed;
  const GridSpec grid(env.dims, c.grid_level);
  return spec.algo == "ucrl2" ? run_ucrl2(env, grid, c) : run_rviq(env, grid, c);
}

inline std::vector<RunRecord> to_records(const RunSpec& spec, const RunResult& r) {
  std::vector<RunRecord> out;
  out.reserve(r.steps.size());
  double cum = 0.0;
  for (const auto& s : r.steps) {
    cum += s.raw_reward;
    out.push_back({spec.run_id(), spec.env, spec.algo, spec.seed, s.t,
                   s.raw_reward, cum, s.episode, s.active_cells, s.max_level});
  }
  return out;
}

inline void write_record(std::ostream& os, const RunRecord& r) {
  os << r.run_id << ',' << r.env << ',' << r.algo << ',' << r.seed << ',' << r.t
     << ',' << format_double(r.raw_reward) << ','
     << format_double(r.cum_raw_reward) << ',' << r.episode_index << ','
     << r.active_cell_count << ',' << r.max_level << '\n';
}

inline void write_csv(const fs::path& path, const std::vector<RunRecord>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kCsvHeader << '\n';
  for (const auto& r : rows) write_record(os, r);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline std::vector<RunRecord> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw std::runtime_error(path.string() + ": unexpected CSV header");
  }
  std::vector<RunRecord> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error(path.string() + ": bad row " + line);
    rows.push_back({f[0], f[1], f[2], std::stoull(f[3]), std::stoull(f[4]),
                    std::stod(f[5]), std::stod(f[6]), std::stoull(f[7]),
                    std::stoull(f[8]), std::stoi(f[9])});
  }
  return rows;
}

struct SummaryRow {
  std::string env;
  std::string algo;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_final = 0.0;
  double std_final = 0.0;
};

/// Mean and sample standard deviation of final cumulative raw reward per
/// (env, algo), in first-appearance order.
inline std::vector<SummaryRow> summarize_records(
    const std::vector<RunRecord>& rows,
    const std::set<std::string>& failed_runs = {}) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> finals;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.env, r.algo);
    if (!finals.count(key)) order.push_back(key);
    finals[key][r.run_id] = r.cum_raw_reward;
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    SummaryRow s{key.first, key.second};
    const auto& runs = finals[key];
    s.runs = runs.size();
    double sum = 0.0;
    for (const auto& [id, v] : runs) {
      sum += v;
      s.failed += failed_runs.count(id);
    }
    s.mean_final = sum / static_cast<double>(s.runs);
    double ss = 0.0;
    for (const auto& [id, v] : runs) ss += (v - s.mean_final) * (v - s.mean_final);
    s.std_final = s.runs > 1 ? std::sqrt(ss / static_cast<double>(s.runs - 1)) : 0.0;
    out.push_back(s);
  }
  return out;
}

inline void print_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << std::left << std::setw(18) << "env" << std::setw(8) << "algo"
     << std::right << std::setw(6) << "runs" << std::setw(8) << "failed"
     << std::setw(18) << "mean_final" << std::setw(14) << "std_final" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(18) << r.env << std::setw(8) << r.algo
       << std::right << std::setw(6) << r.runs << std::setw(8) << r.failed
       << std::setw(18) << std::fixed << std::setprecision(4) << r.mean_final
       << std::setw(14) << r.std_final << '\n';
    os.unsetf(std::ios::floatfield);
  }
}

inline void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "env,algo,runs,failed,mean_final_cum_raw_reward,std_final_cum_raw_reward\n";
  for (const auto& r : rows) {
    os << r.env << ',' << r.algo << ',' << r.runs << ',' << r.failed << ','
       << format_double(r.mean_final) << ',' << format_double(r.std_final) << '\n';
  }
}

struct MatrixOutcome {
  std::vector<SummaryRow> summary;
  std::vector<RunResult> results;  // in RunConfig::runs order
  std::set<std::string> failed_runs;
};

/// Runs every (env, algo, seed) triple on a worker pool, writes one CSV per
/// run under <out>/runs, then merges them into <out>/merged.csv and writes
/// <out>/summary.csv.
inline MatrixOutcome run_matrix(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  fs::create_directories(out / "runs");

  MatrixOutcome outcome;
  outcome.results.resize(cfg.runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string io_error;

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfg.runs.size();) {
      const RunSpec& spec = cfg.runs[i];
      RunResult r;
      try {
        r = execute_run(cfg, spec);
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
      try {
        write_csv(out / "runs" / (spec.run_id() + ".csv"), to_records(spec, r));
        if (cfg.write_splits && spec.algo == "zorl") {
          std::ofstream os(out / "runs" / (spec.run_id() + ".splits.csv"),
                           std::ios::binary);
          os << "t,level,visits\n";
          for (const auto& s : r.splits) {
            os << s.t << ',' << s.level << ',' << s.visits << '\n';
          }
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (io_error.empty()) io_error = e.what();
      }
      outcome.results[i] = std::move(r);
    }
  };
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(cfg.parallelism,
                                      static_cast<unsigned>(cfg.runs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (!io_error.empty()) throw std::runtime_error(io_error);

  std::vector<RunRecord> merged;
  for (std::size_t i = 0; i < cfg.runs.size(); ++i) {
    const auto rows = read_csv(out / "runs" / (cfg.runs[i].run_id() + ".csv"));
    merged.insert(merged.end(), rows.begin(), rows.end());
    if (outcome.results[i].failed) outcome.failed_runs.insert(cfg.runs[i].run_id());
  }
  write_csv(out / "merged.csv", merged);
  outcome.summary = summarize_records(merged, outcome.failed_runs);
  // Failed runs may have no rows at all; still report them.
  for (const auto& spec : cfg.runs) {
    if (!outcome.failed_runs.count(spec.run_id())) continue;
    const bool listed = std::any_of(
        outcome.summary.begin(), outcome.summary.end(), [&](const SummaryRow& s) {
          return s.env == spec.env && s.algo == spec.algo;
        });
    if (!listed) outcome.summary.push_back({spec.env, spec.algo, 1, 1, 0.0, 0.0});
  }
  write_summary(out / "summary.csv", outcome.summary);
  return outcome;
}

/// Summary of an output directory written by run_matrix.
inline std::vector<SummaryRow> summarize_dir(const fs::path& dir) {
  const fs::path merged = dir / "merged.csv";
  if (!fs::exists(merged)) throw std::runtime_error("no merged.csv in " + dir.string());
  return summarize_records(read_csv(merged));
}

}  // namespace zorl
