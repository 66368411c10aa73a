#pragma once

// Accuracy against ground-truth files, plus a small benchmark runner.
//
// Ground truth formats:
//   pairs      {"left_universe":[1,2,3,5], "right_universe":[1,3], "positives":[[1,1],[3,3]]}
//   count      {"counts":[3,2,...]}                       (index = window)
//   direction  {"directions":{"1":"NE","2":"E"}}          (one window, or the whole stream)
//              {"windows":[{"1":"NE"},{"1":"N"}]}         (index = window)

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqlva/engine/execute.hpp"
#include "cqlva/error.hpp"
#include "cqlva/operators.hpp"

namespace cqlva::eval {

using json = nlohmann::ordered_json;
using ObjectId = std::int64_t;
using ObjectPair = std::pair<ObjectId, ObjectId>;

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Reduced fraction; compares exactly.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational of(std::uint64_t n, std::uint64_t d) {
    if (d == 0) throw Error(ErrorCode::EmptyConfusion, "fraction with zero denominator");
    std::uint64_t g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;

  /// "80.0%", "62.5%", "93.75%": one decimal at least, more only when that
  /// makes the figure exact; two decimals when nothing short is exact.
  std::string percent() const {
    double p = 100.0 * value();
    auto fixed = [p](int digits) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(digits) << p;
      return os.str();
    };
    for (int digits = 1; digits <= 4; ++digits) {
      std::string s = fixed(digits);
      if (std::abs(std::stod(s) - p) <= 1e-12 * std::max(1.0, p)) return s + "%";
    }
    return fixed(2) + "%";
  }
};

/// (tp + tn) / total, exactly.
inline Rational accuracy_exact(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(ErrorCode::EmptyConfusion, "no outcomes to score");
  return Rational::of(c.tp + c.tn, c.total());
}

inline double accuracy(const ConfusionCounts& c) { return accuracy_exact(c).value(); }

// -- pair tasks -----------------------------------------------------------------------

struct PairGroundTruth {
  std::set<ObjectId> left_universe;
  std::set<ObjectId> right_universe;
  std::set<ObjectPair> positives;

  PairGroundTruth() = default;
  PairGroundTruth(std::set<ObjectId> left, std::set<ObjectId> right, std::set<ObjectPair> pos)
      : left_universe(std::move(left)), right_universe(std::move(right)), positives(std::move(pos)) {
    for (const auto& p : positives) check(p);
  }

  std::uint64_t universe_size() const noexcept { return left_universe.size() * right_universe.size(); }

  void check(const ObjectPair& p) const {
    if (!left_universe.count(p.first) || !right_universe.count(p.second))
      throw Error(ErrorCode::PairOutsideUniverse,
                  "(" + std::to_string(p.first) + ", " + std::to_string(p.second) + ") is outside the universe");
  }
};

inline ConfusionCounts confusion_pairs(const std::set<ObjectPair>& result, const PairGroundTruth& gt) {
  ConfusionCounts c;
  for (const auto& p : result) {
    gt.check(p);
    if (gt.positives.count(p)) ++c.tp;
    else ++c.fp;
  }
  c.fn = gt.positives.size() - c.tp;
  c.tn = gt.universe_size() - c.tp - c.fp - c.fn;
  return c;
}

namespace detail {

inline ObjectId object_id(const ScalarValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v); d && *d == static_cast<double>(static_cast<ObjectId>(*d)))
    return static_cast<ObjectId>(*d);
  throw Error(ErrorCode::FormatMismatch, "pair key " + to_display(v) + " is not an object id");
}

}  // namespace detail

inline ConfusionCounts confusion_pairs(const std::vector<JoinPair>& result, const PairGroundTruth& gt) {
  std::set<ObjectPair> s;
  for (const auto& p : result) s.emplace(detail::object_id(p.left_key), detail::object_id(p.right_key));
  return confusion_pairs(s, gt);
}

// -- count and direction tasks ------------------------------------------------------------

struct CountScore {
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  Rational accuracy() const { return Rational::of(correct, total); }
};

inline CountScore count_eval(const std::vector<std::int64_t>& predicted, const std::vector<std::int64_t>& truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::IndexMismatch, std::to_string(predicted.size()) + " predicted window(s) vs " +
                                              std::to_string(truth.size()) + " in the ground truth");
  if (truth.empty()) throw Error(ErrorCode::EmptyConfusion, "no windows to score");
  CountScore s;
  s.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) s.correct += predicted[i] == truth[i];
  return s;
}

using DirectionMap = std::map<ObjectId, Direction8>;

/// Correct label: TP. Wrong label, or an object the truth does not list: FP.
/// Object listed in the truth but not predicted: FN. There are no negatives.
inline ConfusionCounts direction_eval(const DirectionMap& predicted, const DirectionMap& truth) {
  ConfusionCounts c;
  for (const auto& [oid, d] : predicted) {
    auto it = truth.find(oid);
    if (it != truth.end() && it->second == d) ++c.tp;
    else ++c.fp;
  }
  for (const auto& [oid, d] : truth)
    if (!predicted.count(oid)) ++c.fn;
  return c;
}

inline ConfusionCounts direction_eval(const std::vector<DirectionMap>& predicted,
                                      const std::vector<DirectionMap>& truth) {
  if (predicted.size() != truth.size())
    throw Error(ErrorCode::IndexMismatch, std::to_string(predicted.size()) + " predicted window(s) vs " +
                                              std::to_string(truth.size()) + " in the ground truth");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) c += direction_eval(predicted[i], truth[i]);
  return c;
}

// -- ground truth files ----------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void format_fail(const std::string& msg) { throw Error(ErrorCode::FormatMismatch, msg); }

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    format_fail(what + " is not valid JSON: " + e.what());
  }
}

inline std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ObjectId json_id(const json& j) {
  if (j.is_number_integer()) return j.get<ObjectId>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    std::size_t used = 0;
    try {
      ObjectId v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  format_fail("expected an object id, found " + j.dump());
}

inline DirectionMap direction_map(const json& j) {
  if (!j.is_object()) format_fail("direction map must be an object of oid -> direction");
  DirectionMap m;
  for (const auto& [k, v] : j.items()) {
    auto d = v.is_string() ? parse_direction(v.get<std::string>()) : std::nullopt;
    if (!d) format_fail("bad direction for object " + k + ": " + v.dump());
    m[json_id(json(k))] = *d;
  }
  return m;
}

}  // namespace detail

inline PairGroundTruth pair_gt_from_json(const json& j) {
  using detail::format_fail;
  if (!j.is_object() || !j.contains("left_universe") || !j.contains("right_universe") || !j.contains("positives"))
    format_fail("pair ground truth needs left_universe, right_universe and positives");
  std::set<ObjectId> l, r;
  std::set<ObjectPair> pos;
  for (const auto& x : j["left_universe"]) l.insert(detail::json_id(x));
  for (const auto& x : j["right_universe"]) r.insert(detail::json_id(x));
  for (const auto& p : j["positives"]) {
    if (!p.is_array() || p.size() != 2) format_fail("a positive pair is [left, right]");
    pos.emplace(detail::json_id(p[0]), detail::json_id(p[1]));
  }
  return {std::move(l), std::move(r), std::move(pos)};
}

inline std::vector<std::int64_t> count_gt_from_json(const json& j) {
  if (!j.is_object() || !j.contains("counts") || !j["counts"].is_array())
    detail::format_fail("count ground truth needs a \"counts\" array");
  std::vector<std::int64_t> out;
  for (const auto& x : j["counts"]) {
    if (!x.is_number_integer()) detail::format_fail("counts must be integers");
    out.push_back(x.get<std::int64_t>());
  }
  return out;
}

inline std::vector<DirectionMap> direction_gt_from_json(const json& j) {
  if (j.is_object() && j.contains("directions")) return {detail::direction_map(j["directions"])};
  if (j.is_object() && j.contains("windows") && j["windows"].is_array()) {
    std::vector<DirectionMap> out;
    for (const auto& w : j["windows"]) out.push_back(detail::direction_map(w));
    return out;
  }
  detail::format_fail("direction ground truth needs \"directions\" or \"windows\"");
}

// -- result files ------------------------------------------------------------------------------

/// Reads JSONL result rows, skipping a leading {"header":...} line.
inline std::vector<engine::ResultRow> read_results_text(const std::string& text) {
  std::vector<engine::ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = detail::parse_json(line, "result line");
    if (!j.is_object()) detail::format_fail("result line is not an object");
    if (j.contains("header")) continue;
    engine::ResultRow r;
    if (auto it = j.find("window"); it != j.end()) {
      if (!it->is_number_unsigned() && !it->is_number_integer()) detail::format_fail("window must be an integer");
      r.window = it->get<std::size_t>();
      j.erase("window");
    }
    r.fields = std::move(j);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<engine::ResultRow> read_results(const std::string& path) {
  return read_results_text(detail::slurp(path));
}

/// Pairs from "left"/"right", else from the first two integer fields.
inline std::set<ObjectPair> pairs_from_rows(const std::vector<engine::ResultRow>& rows) {
  std::set<ObjectPair> out;
  for (const auto& r : rows) {
    if (r.fields.contains("left") && r.fields.contains("right") && r.fields["left"].is_number_integer() &&
        r.fields["right"].is_number_integer()) {
      out.emplace(r.fields["left"].get<ObjectId>(), r.fields["right"].get<ObjectId>());
      continue;
    }
    std::vector<ObjectId> ids;
    for (const auto& [k, v] : r.fields.items())
      if (v.is_number_integer() && ids.size() < 2) ids.push_back(v.get<ObjectId>());
    if (ids.size() != 2) detail::format_fail("result row has no pair of object ids: " + r.fields.dump());
    out.emplace(ids[0], ids[1]);
  }
  return out;
}

/// One count per window (the first numeric field); windows must be 0..n-1.
inline std::vector<std::int64_t> counts_from_rows(const std::vector<engine::ResultRow>& rows) {
  std::map<std::size_t, std::int64_t> by_window;
  for (const auto& r : rows) {
    std::optional<std::int64_t> v;
    for (const auto& [k, x] : r.fields.items())
      if (x.is_number()) {
        v = x.get<std::int64_t>();
        break;
      }
    if (!v) detail::format_fail("result row has no count: " + r.fields.dump());
    if (!by_window.emplace(r.window, *v).second)
      throw Error(ErrorCode::IndexMismatch, "window " + std::to_string(r.window) + " has two counts");
  }
  std::vector<std::int64_t> out;
  for (const auto& [w, v] : by_window) {
    if (w != out.size()) throw Error(ErrorCode::IndexMismatch, "no count for window " + std::to_string(out.size()));
    out.push_back(v);
  }
  return out;
}

/// Directions per window. The object id is the first integer field; the
/// direction is the first string field that names one.
inline std::vector<DirectionMap> directions_from_rows(const std::vector<engine::ResultRow>& rows,
                                                      std::size_t window_count) {
  std::vector<DirectionMap> out(window_count);
  for (const auto& r : rows) {
    std::optional<ObjectId> id;
    std::optional<Direction8> dir;
    for (const auto& [k, v] : r.fields.items()) {
      if (!id && v.is_number_integer()) id = v.get<ObjectId>();
      if (!dir && v.is_string()) dir = parse_direction(v.get<std::string>());
    }
    if (!id || !dir) detail::format_fail("result row has no object direction: " + r.fields.dump());
    if (r.window >= window_count)
      throw Error(ErrorCode::IndexMismatch, "result window " + std::to_string(r.window) + " has no ground truth");
    out[r.window][*id] = *dir;
  }
  return out;
}

// -- reports ------------------------------------------------------------------------------------

enum class Task { Pairs, Count, Direction };

inline std::optional<Task> parse_task(std::string_view s) {
  std::string t = lowercase(s);
  if (t == "pairs") return Task::Pairs;
  if (t == "count") return Task::Count;
  if (t == "direction") return Task::Direction;
  return std::nullopt;
}

inline constexpr std::string_view to_string(Task t) {
  switch (t) {
    case Task::Pairs: return "pairs";
    case Task::Count: return "count";
    case Task::Direction: return "direction";
  }
  return "?";
}

struct AccuracyReport {
  Task task = Task::Pairs;
  std::string variant;  // which ground truth was used, e.g. "Acc(vce)"
  std::optional<ConfusionCounts> counts;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
  Rational accuracy;

  json to_json() const {
    json j;
    j["task"] = std::string(to_string(task));
    j["variant"] = variant;
    if (counts) j["counts"] = {{"tp", counts->tp}, {"fp", counts->fp}, {"fn", counts->fn}, {"tn", counts->tn}};
    j["correct"] = correct;
    j["total"] = total;
    j["accuracy"] = accuracy.value();
    j["accuracy_exact"] = std::to_string(accuracy.num) + "/" + std::to_string(accuracy.den);
    j["accuracy_percent"] = accuracy.percent();
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << (variant.empty() ? "accuracy" : variant) << " [" << to_string(task) << "]: " << accuracy.percent();
    if (counts) os << "  (TP=" << counts->tp << ", FP=" << counts->fp << ", FN=" << counts->fn << ", TN=" << counts->tn << ")";
    else os << "  (" << correct << "/" << total << " windows)";
    return os.str();
  }
};

inline AccuracyReport report_from_counts(Task task, const ConfusionCounts& c, std::string variant) {
  AccuracyReport r;
  r.task = task;
  r.variant = std::move(variant);
  r.counts = c;
  r.correct = c.tp + c.tn;
  r.total = c.total();
  r.accuracy = accuracy_exact(c);
  return r;
}

/// Scores result rows against a ground-truth document for `task`.
inline AccuracyReport evaluate(const std::vector<engine::ResultRow>& rows, const json& gt, Task task,
                               std::string variant = {}) {
  switch (task) {
    case Task::Pairs:
      return report_from_counts(task, confusion_pairs(pairs_from_rows(rows), pair_gt_from_json(gt)), variant);
    case Task::Count: {
      CountScore s = count_eval(counts_from_rows(rows), count_gt_from_json(gt));
      AccuracyReport r;
      r.task = task;
      r.variant = std::move(variant);
      r.correct = s.correct;
      r.total = s.total;
      r.accuracy = s.accuracy();
      return r;
    }
    case Task::Direction: {
      auto truth = direction_gt_from_json(gt);
      return report_from_counts(task, direction_eval(directions_from_rows(rows, truth.size()), truth), variant);
    }
  }
  throw Error(ErrorCode::FormatMismatch, "unknown task");
}

// -- benchmark ------------------------------------------------------------------------------------

struct BenchCase {
  std::string name;
  std::string query;
};

struct BenchRow {
  std::string variant;
  std::uint64_t tuples = 0;  // input tuples over all traces
  double median_seconds = 0;
  std::uint64_t comparisons = 0;
  std::size_t rows = 0;
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Runs each case `repetitions` times, one after another.
inline std::vector<BenchRow> bench(const std::vector<BenchCase>& cases, const std::vector<RRelation>& traces,
                                   int repetitions, const engine::EngineConfig& config = {},
                                   const plan::PlanOptions& options = {}) {
  if (repetitions < 1) throw Error(ErrorCode::ConfigError, "repetitions must be at least 1");
  std::uint64_t tuples = 0;
  for (const auto& t : traces) tuples += t.size();
  std::vector<BenchRow> out;
  for (const auto& c : cases) {
    BenchRow row;
    row.variant = c.name;
    row.tuples = tuples;
    std::vector<double> times;
    for (int i = 0; i < repetitions; ++i) {
      auto ex = engine::execute(c.query, traces, config, options);
      times.push_back(ex.stats.wall_seconds);
      row.comparisons = ex.stats.total_comparisons();
      row.rows = ex.rows.size();
    }
    row.median_seconds = median(times);
    out.push_back(std::move(row));
  }
  return out;
}

inline json bench_json(const std::vector<BenchRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"variant", r.variant},
                   {"tuples", r.tuples},
                   {"median_seconds", r.median_seconds},
                   {"smatch_comparisons", r.comparisons},
                   {"rows", r.rows}});
  return arr;
}

inline std::string bench_table(const std::vector<BenchRow>& rows) {
  std::vector<std::vector<std::string>> cells{{"variant", "tuples", "median_s", "smatch_comparisons", "rows"}};
  for (const auto& r : rows) {
    std::ostringstream t;
    t << std::fixed << std::setprecision(6) << r.median_seconds;
    cells.push_back({r.variant, std::to_string(r.tuples), t.str(), std::to_string(r.comparisons),
                     std::to_string(r.rows)});
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::string cell = row[k];
      if (k == 0) cell += std::string(width[k] - cell.size(), ' ');
      else cell = std::string(width[k] - cell.size(), ' ') + cell;
      out += (k ? "  " : "") + cell;
    }
    out += "\n";
  }
  return out;
}

}  // namespace cqlva::eval
