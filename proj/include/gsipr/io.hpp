#pragma once

#include "gsipr/bench.hpp"
#include "gsipr/verify.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsipr {

using json = nlohmann::json;

enum class Format { Csv, Json };

inline Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw std::invalid_argument("unknown format '" + s + "' (expected csv|json)");
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that round-trips the double exactly (17 significant digits max).
inline std::string fmt_double(double v) {
  char buf[32];
  for (int prec = 12; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

// ---------------------------------------------------------------------------
// Ensemble descriptor and configuration
// ---------------------------------------------------------------------------

inline json ensemble_to_json(const Ensemble& e) {
  require(is_builtin(e.entry), "only built-in ensembles have a descriptor");
  return json{{"field", to_string(e.field)}, {"entry", entry_name(e.entry)}};
}

inline Ensemble ensemble_from_json(const json& j) {
  return Ensemble{parse_field(j.at("field").get<std::string>()), parse_entry(j.at("entry").get<std::string>())};
}

/// Full configuration echo, without the thread count.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["field"] = to_string(c.ensemble.field);
  j["ensemble"] = entry_name(c.ensemble.entry);
  j["d"] = c.d;
  j["ratios"] = c.ratio_grid;
  j["trials"] = c.trial_count();
  j["success_threshold"] = c.success_threshold;
  j["max_iters"] = c.max_iters;
  j["power_iters"] = c.power_iters;
  j["spike_factor"] = c.spike_factor;
  j["base_seed"] = c.base_seed;
  return j;
}

/// Applies the keys present in j on top of c.
inline void apply_config_json(const json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known = {"kind",      "field",       "ensemble",     "d",
                                                 "ratios",    "trials",      "success_threshold",
                                                 "max_iters", "power_iters", "spike_factor", "base_seed",
                                                 "seed"};
  require(j.is_object(), "config: top level must be an object");
  for (const auto& [k, v] : j.items())
    require(std::find(known.begin(), known.end(), k) != known.end(), "config: unknown key '" + k + "'");
  if (j.contains("kind")) c.kind = parse_kind(j["kind"].get<std::string>());
  if (j.contains("field")) c.ensemble.field = parse_field(j["field"].get<std::string>());
  if (j.contains("ensemble")) c.ensemble.entry = parse_entry(j["ensemble"].get<std::string>());
  if (j.contains("d")) c.d = j["d"].get<std::size_t>();
  if (j.contains("ratios")) c.ratio_grid = j["ratios"].get<std::vector<double>>();
  if (j.contains("trials")) c.trials = j["trials"].get<int>();
  if (j.contains("success_threshold")) c.success_threshold = j["success_threshold"].get<double>();
  if (j.contains("max_iters")) c.max_iters = j["max_iters"].get<int>();
  if (j.contains("power_iters")) c.power_iters = j["power_iters"].get<int>();
  if (j.contains("spike_factor")) c.spike_factor = j["spike_factor"].get<double>();
  if (j.contains("base_seed")) c.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("seed")) c.base_seed = j["seed"].get<std::uint64_t>();
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

inline const char* kTableHeader = "ratio,n,trials,gsi_init_error,si_init_error,success_rate";

inline std::string table_to_csv(const ResultTable& t) {
  std::ostringstream os;
  os << kTableHeader << "\n";
  for (const auto& r : t.rows) {
    os << fmt_double(r.ratio) << ',' << r.n << ',' << r.trials << ',' << fmt_double(r.gsi_init_error) << ','
       << fmt_opt(r.si_init_error) << ',' << fmt_opt(r.success_rate) << "\n";
  }
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline ResultTable table_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kTableHeader) throw IoError("result CSV: unexpected header");
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  };
  ResultTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw IoError("result CSV: expected 6 fields, got " + std::to_string(f.size()));
    t.rows.push_back({std::stod(f[0]), static_cast<std::size_t>(std::stoull(f[1])), std::stoi(f[2]), std::stod(f[3]),
                      opt(f[4]), opt(f[5])});
  }
  return t;
}

inline json row_to_json(const ResultRow& r) {
  json j;
  j["ratio"] = r.ratio;
  j["n"] = r.n;
  j["trials"] = r.trials;
  j["gsi_init_error"] = r.gsi_init_error;
  j["si_init_error"] = r.si_init_error ? json(*r.si_init_error) : json(nullptr);
  j["success_rate"] = r.success_rate ? json(*r.success_rate) : json(nullptr);
  return j;
}

inline json table_to_json(const ResultTable& t, const ExperimentConfig& cfg) {
  json rows = json::array();
  for (const auto& r : t.rows) rows.push_back(row_to_json(r));
  json meta = config_to_json(cfg);
  meta["paired_measurements"] = true;
  return json{{"metadata", meta}, {"rows", rows}};
}

inline ResultTable table_from_json(const json& j) {
  auto opt = [](const json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  ResultTable t;
  for (const auto& r : j.at("rows")) {
    t.rows.push_back({r.at("ratio").get<double>(), r.at("n").get<std::size_t>(), r.at("trials").get<int>(),
                      r.at("gsi_init_error").get<double>(), opt(r.at("si_init_error")), opt(r.at("success_rate"))});
  }
  return t;
}

inline std::string records_to_csv(const std::vector<TrialRecord>& recs) {
  std::ostringstream os;
  os << "ratio,trial_index,seed,init_rel_error,si_rel_error,final_rel_error,iterations,success,wall_time\n";
  for (const auto& r : recs) {
    os << fmt_double(r.ratio) << ',' << r.trial_index << ',' << r.seed << ',' << fmt_double(r.init_rel_error) << ','
       << fmt_opt(r.si_rel_error) << ',' << fmt_opt(r.final_rel_error) << ',' << r.iterations << ','
       << (r.success ? 1 : 0) << ',' << fmt_double(r.wall_time) << "\n";
  }
  return os.str();
}

inline json report_to_json(const ResidualReport& r) {
  json comps = json::array();
  for (const auto& c : r.components)
    comps.push_back({{"name", c.name}, {"residual", c.residual}, {"std_error", c.std_error},
                     {"tolerance", c.tolerance}, {"pass", c.pass}});
  return json{{"estimator", r.estimator}, {"sample_count", r.sample_count}, {"residual", r.residual},
              {"tolerance", r.tolerance}, {"pass", r.pass}, {"components", comps}};
}

inline std::string reports_to_csv(const std::vector<ResidualReport>& reports) {
  std::ostringstream os;
  os << "estimator,component,sample_count,residual,std_error,tolerance,pass\n";
  for (const auto& r : reports)
    for (const auto& c : r.components)
      os << r.estimator << ",\"" << c.name << "\"," << r.sample_count << ',' << fmt_double(c.residual) << ','
         << fmt_double(c.std_error) << ',' << fmt_double(c.tolerance) << ',' << (c.pass ? 1 : 0) << "\n";
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Writes a result table. JSON carries a metadata object echoing the config.
inline void export_table(const ResultTable& t, const ExperimentConfig& cfg, const std::string& path, Format fmt) {
  write_text_file(path, fmt == Format::Csv ? table_to_csv(t) : table_to_json(t, cfg).dump(2) + "\n");
}

}  // namespace gsipr
