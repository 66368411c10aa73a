#pragma once

// Command implementations behind the cqlva executable. Each returns a process
// exit code: 0 ok, 2 query/plan error, 3 input or runtime error.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqlva/engine/execute.hpp"
#include "cqlva/eval.hpp"
#include "cqlva/ingest.hpp"
#include "cqlva/query/render.hpp"

namespace cqlva::app {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitQuery = 2;
inline constexpr int kExitRuntime = 3;

enum class OutputFormat { Jsonl, Table };

struct RunOptions {
  std::string query;  // path
  std::vector<std::string> traces;
  std::optional<double> fps;
  bool flip_y = false;
  double image_height = 0;
  std::optional<std::string> window;  // "kind,size,hop"; only for queries without WINDOW
  std::optional<double> rate;
  std::optional<std::int64_t> quantum;
  std::optional<std::string> config;  // engine key=value file
  std::optional<std::string> out;
  std::optional<std::string> stats;
  OutputFormat format = OutputFormat::Jsonl;
  bool header = true;
};

struct EvalOptions {
  std::string results;
  std::string gt;
  std::string task;
  std::optional<std::string> variant;
  std::optional<std::string> out;
  OutputFormat format = OutputFormat::Table;
};

struct GenOptions {
  std::string spec;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

struct BenchOptions {
  std::string config;  // JSON
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  OutputFormat format = OutputFormat::Table;
};

struct ParseCheckOptions {
  std::string query;
  std::vector<std::string> traces;  // optional: plan against real schemas
  std::optional<std::string> window;
};

// -- helpers ------------------------------------------------------------------------------

inline std::optional<OutputFormat> parse_format(std::string_view s) {
  std::string f = lowercase(s);
  if (f == "jsonl" || f == "json") return OutputFormat::Jsonl;
  if (f == "table") return OutputFormat::Table;
  return std::nullopt;
}

/// "TIME,100,50", "tuple,10" (hop defaults to size).
inline WindowSpec parse_window_flag(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  std::string p;
  while (std::getline(ss, p, ',')) parts.push_back(p);
  if (parts.size() < 2 || parts.size() > 3)
    throw Error(ErrorCode::ConfigError, "--window expects kind,size[,hop], got '" + std::string(text) + "'");
  std::string kind = lowercase(parts[0]);
  WindowKind k;
  if (kind == "time") k = WindowKind::Time;
  else if (kind == "tuple") k = WindowKind::Tuple;
  else throw Error(ErrorCode::ConfigError, "window kind must be TIME or TUPLE");
  double size = 0, hop = 0;
  try {
    size = std::stod(parts[1]);
    hop = parts.size() == 3 ? std::stod(parts[2]) : size;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "window size and hop must be numbers");
  }
  return WindowSpec::make(k, size, hop);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f << text;
}

inline std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Rows as an aligned table; columns from the first row.
inline std::string rows_table(const std::vector<engine::ResultRow>& rows) {
  std::vector<std::string> cols{"window"};
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().fields.items()) cols.push_back(k);
  std::vector<std::vector<std::string>> cells{cols};
  for (const auto& r : rows) {
    std::vector<std::string> line{std::to_string(r.window)};
    for (std::size_t c = 1; c < cols.size(); ++c) {
      auto it = r.fields.find(cols[c]);
      line.push_back(it == r.fields.end() ? "" : it->is_string() ? it->get<std::string>() : it->dump());
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> w(cols.size(), 0);
  for (const auto& l : cells)
    for (std::size_t c = 0; c < l.size(); ++c) w[c] = std::max(w[c], l[c].size());
  std::string out;
  for (const auto& l : cells) {
    std::string line;
    for (std::size_t c = 0; c < l.size(); ++c) line += (c ? "  " : "") + l[c] + std::string(w[c] - l[c].size(), ' ');
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

inline void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
  if (path) write_file(*path, text);
  else out << text;
}

inline ReaderOptions reader_options(std::optional<double> fps, bool flip_y, double image_height) {
  ReaderOptions r;
  if (fps) r.fps = *fps;
  r.flip_y = flip_y;
  r.image_height = image_height;
  return r;
}

// -- commands ------------------------------------------------------------------------------

inline int run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<RRelation> traces;
  std::string query;
  engine::EngineConfig config;
  try {
    query = read_file(o.query);
    auto ropts = reader_options(o.fps, o.flip_y, o.image_height);
    for (const auto& p : o.traces) traces.push_back(read_trace(p, ropts));
    if (o.config) config = engine::load_config(*o.config);
    if (o.rate) config.rate = *o.rate;
    if (o.quantum) config.quantum = *o.quantum;
    config.validate();
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }

  std::optional<plan::QueryPlan> qp;
  try {
    plan::PlanOptions popts;
    if (o.window) popts.window = parse_window_flag(*o.window);
    std::vector<const RRelation*> ptrs;
    for (const auto& t : traces) ptrs.push_back(&t);
    qp = engine::prepare(query, ptrs, popts);
  } catch (const Error& e) {
    err << o.query << ": " << e.what() << "\n";
    return kExitQuery;
  }

  try {
    engine::Pipeline p(std::move(*qp), config);
    auto rows = p.run(traces);
    std::string text;
    if (o.format == OutputFormat::Table) {
      text = rows_table(rows);
    } else {
      if (o.header) {
        json h;
        h["header"] = {{"query", o.query}, {"traces", o.traces}, {"created", utc_now()}};
        text = h.dump() + "\n";
      }
      text += engine::to_jsonl(rows);
    }
    emit(o.out, text, out);
    std::optional<std::string> stats_path = o.stats;
    if (!stats_path && o.out) stats_path = *o.out + ".stats.json";
    if (stats_path) write_file(*stats_path, p.stats().to_json().dump(2) + "\n");
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

inline int evaluate(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  auto task = eval::parse_task(o.task);
  if (!task) {
    err << "unknown task '" << o.task << "' (pairs, count, direction)\n";
    return kExitUsage;
  }
  try {
    auto rows = eval::read_results(o.results);
    json gt = eval::detail::parse_json(read_file(o.gt), o.gt);
    std::string variant = o.variant.value_or(gt.is_object() ? gt.value("variant", std::string("accuracy")) : "accuracy");
    auto rep = eval::evaluate(rows, gt, *task, variant);
    out << (o.format == OutputFormat::Table ? rep.to_text() : rep.to_json().dump()) << "\n";
    if (o.out) write_file(*o.out, rep.to_json().dump(2) + "\n");
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

inline int gen(const GenOptions& o, std::ostream& out, std::ostream& err) {
  try {
    SynthSpec spec = load_synth_spec(o.spec);
    RRelation rel = generate(spec, o.seed);
    if (o.out) write_trace(rel, *o.out);
    else out << write_trace_text(rel, TraceFormat::Jsonl);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

/// {"variants":[{"name":..,"query":..}], "traces":[..] | "synth":{..}, "seed":n,
///  "repetitions":n, "fps":x, "window":"TIME,100,100", "rate":x, "quantum":n}
inline int bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<eval::BenchCase> cases;
  std::vector<RRelation> traces;
  int reps = 3;
  engine::EngineConfig config;
  plan::PlanOptions popts;
  try {
    json cfg = eval::detail::parse_json(read_file(o.config), o.config);
    auto fail = [](const std::string& m) { throw Error(ErrorCode::SpecError, m); };
    if (!cfg.is_object() || !cfg.contains("variants") || !cfg["variants"].is_array())
      fail("bench config needs a \"variants\" array");
    for (const auto& v : cfg["variants"]) {
      if (!v.is_object() || !v.contains("name") || !(v.contains("query") || v.contains("query_file")))
        fail("each variant needs a name and a query");
      std::string q = v.contains("query") ? v["query"].get<std::string>() : read_file(v["query_file"].get<std::string>());
      cases.push_back({v["name"].get<std::string>(), q});
    }
    reps = cfg.value("repetitions", reps);
    auto ropts = reader_options(cfg.contains("fps") ? std::optional(cfg["fps"].get<double>()) : std::nullopt, false, 0);
    if (cfg.contains("traces")) {
      for (const auto& p : cfg["traces"]) traces.push_back(read_trace(p.get<std::string>(), ropts));
    } else if (cfg.contains("synth")) {
      std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{0}));
      traces.push_back(generate(parse_synth_spec(cfg["synth"]), seed));
    } else {
      fail("bench config needs \"traces\" or \"synth\"");
    }
    if (cfg.contains("window")) popts.window = parse_window_flag(cfg["window"].get<std::string>());
    config.rate = cfg.value("rate", 0.0);
    config.quantum = cfg.value("quantum", config.quantum);
    config.validate();
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  } catch (const json::exception& e) {
    err << "SPEC_ERROR: malformed bench config: " << e.what() << "\n";
    return kExitRuntime;
  }
  try {
    auto rows = eval::bench(cases, traces, reps, config, popts);
    std::string text = o.format == OutputFormat::Table ? eval::bench_table(rows) : eval::bench_json(rows).dump(2) + "\n";
    emit(o.out, text, out);
  } catch (const Error& e) {
    bool query_error = e.code() == ErrorCode::SyntaxError || e.code() == ErrorCode::UnknownIdentifier ||
                       e.code() == ErrorCode::UnknownColumn || e.code() == ErrorCode::IllegalColumnKind ||
                       e.code() == ErrorCode::SchemaMismatch;
    err << e.what() << "\n";
    return query_error ? kExitQuery : kExitRuntime;
  }
  return kExitOk;
}

/// Parses and plans; prints the normalized query and the operator tree.
inline int parse_check(const ParseCheckOptions& o, std::ostream& out, std::ostream& err) {
  std::string text;
  std::vector<RRelation> traces;
  try {
    text = read_file(o.query);
    for (const auto& p : o.traces) traces.push_back(read_trace(p));
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitRuntime;
  }
  try {
    ast::SelectStmt stmt = query::parse(text);
    auto names = plan::source_names(stmt);
    plan::Catalog catalog;
    for (std::size_t i = 0; i < names.size(); ++i)
      catalog.add(names[i], i < traces.size() ? traces[i].schema : trace_schema());
    plan::PlanOptions popts;
    if (o.window) popts.window = parse_window_flag(*o.window);
    auto qp = plan::plan(stmt, catalog, popts);
    out << query::render(stmt) << "\n" << qp.describe();
  } catch (const Error& e) {
    err << o.query << ": " << e.what() << "\n";
    return kExitQuery;
  }
  return kExitOk;
}

}  // namespace cqlva::app
