#pragma once

// Executes a query plan as a chain of stages joined by bounded queues.
// Feeder threads push tuples into the source queues; the calling thread runs
// a round-robin scheduler that gives every stage a quantum per round.
// Results depend only on the plan and the input traces: windows are cut by
// key, never by arrival time, and binary stages pair windows by index.

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqlva/engine/queue.hpp"
#include "cqlva/error.hpp"
#include "cqlva/model.hpp"
#include "cqlva/operators.hpp"
#include "cqlva/query/planner.hpp"
#include "cqlva/windows.hpp"

namespace cqlva::engine {

using json = nlohmann::ordered_json;

// -- configuration -----------------------------------------------------------------

struct EngineConfig {
  std::int64_t queue_capacity = 1024;
  std::int64_t quantum = 256;
  double rate = 0;                        // tuples/s per source; 0 = unthrottled
  std::map<std::size_t, double> source_rates;  // per-source override, by binding index
  double watchdog_seconds = 10;

  double rate_for(std::size_t source) const {
    auto it = source_rates.find(source);
    return it == source_rates.end() ? rate : it->second;
  }

  void validate() const {
    if (queue_capacity <= 0) throw Error(ErrorCode::ConfigError, "queue_capacity must be positive");
    if (quantum <= 0) throw Error(ErrorCode::ConfigError, "quantum must be positive");
    auto check_rate = [](double r) {
      if (!(r >= 0) || !std::isfinite(r))
        throw Error(ErrorCode::ConfigError, "rate must be a finite non-negative number (0 = unthrottled)");
    };
    check_rate(rate);
    for (const auto& [_, r] : source_rates) check_rate(r);
    if (!(watchdog_seconds > 0)) throw Error(ErrorCode::ConfigError, "watchdog_seconds must be positive");
  }
};

/// key = value lines; '#' starts a comment. Keys: queue_capacity, quantum,
/// rate, rate.<source index>, watchdog_seconds.
inline EngineConfig parse_config(std::string_view text, EngineConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    Position pos{lineno, 1};
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key = value", pos);
    std::string key = lowercase(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "'" + key + "' needs a number, got '" + value + "'", pos);
    }
    if (key == "queue_capacity") base.queue_capacity = static_cast<std::int64_t>(v);
    else if (key == "quantum") base.quantum = static_cast<std::int64_t>(v);
    else if (key == "rate") base.rate = v;
    else if (key == "watchdog_seconds") base.watchdog_seconds = v;
    else if (key.rfind("rate.", 0) == 0) {
      try {
        base.source_rates[std::stoul(key.substr(5))] = v;
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "bad per-source rate key '" + key + "'", pos);
      }
    } else {
      throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'", pos);
    }
  }
  base.validate();
  return base;
}

inline EngineConfig load_config(const std::string& path, EngineConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// -- queue items ---------------------------------------------------------------------

struct PairsResult {
  std::vector<JoinPair> pairs;
  Arrable left;
  Arrable right;
};

struct EquiResult {
  std::vector<EquiJoinRow> rows;
  RRelation left;
  RRelation right;
};

struct Table {
  std::vector<json> rows;
};

using Payload = std::variant<RRelation, Arrable, PairsResult, EquiResult, Table>;

/// One closed window's worth of data. Shared, never mutated after creation.
struct Batch {
  std::size_t window = 0;
  std::shared_ptr<const Payload> payload;
};

struct EndOfStream {};

using Item = std::variant<VTuple, Batch, EndOfStream>;
using Queue = BoundedQueue<Item>;

/// Rows, elements, pairs or table rows, depending on the payload.
inline std::uint64_t item_count(const Payload& p) {
  return std::visit(
      [](const auto& v) -> std::uint64_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, RRelation>) return v.rows.size();
        else if constexpr (std::is_same_v<T, Arrable>) return v.element_count();
        else if constexpr (std::is_same_v<T, PairsResult>) return v.pairs.size();
        else if constexpr (std::is_same_v<T, EquiResult>) return v.rows.size();
        else return v.rows.size();
      },
      p);
}

// -- statistics ------------------------------------------------------------------------

struct StageCounters {
  std::string name;
  std::atomic<std::uint64_t> tuples_in{0};
  std::atomic<std::uint64_t> tuples_out{0};
  std::atomic<std::uint64_t> smatch_comparisons{0};
  std::atomic<std::uint64_t> windows{0};
  mutable std::mutex mu;
  std::vector<double> window_seconds;

  void record_window(double seconds) {
    std::lock_guard lock(mu);
    window_seconds.push_back(seconds);
    windows.fetch_add(1);
  }
};

struct StageStats {
  std::string name;
  std::uint64_t tuples_in = 0;
  std::uint64_t tuples_out = 0;
  std::uint64_t smatch_comparisons = 0;
  std::uint64_t windows = 0;
  double wall_seconds = 0;
  std::vector<double> window_seconds;
};

struct StatsSnapshot {
  std::vector<StageStats> stages;
  double wall_seconds = 0;  // whole run

  std::uint64_t total_comparisons() const {
    std::uint64_t n = 0;
    for (const auto& s : stages) n += s.smatch_comparisons;
    return n;
  }

  json to_json() const {
    json out;
    out["wall_seconds"] = wall_seconds;
    out["smatch_comparisons"] = total_comparisons();
    json arr = json::array();
    for (const auto& s : stages) {
      arr.push_back({{"stage", s.name},
                     {"tuples_in", s.tuples_in},
                     {"tuples_out", s.tuples_out},
                     {"smatch_comparisons", s.smatch_comparisons},
                     {"windows", s.windows},
                     {"wall_seconds", s.wall_seconds},
                     {"window_seconds", s.window_seconds}});
    }
    out["stages"] = std::move(arr);
    return out;
  }
};

// -- stages -------------------------------------------------------------------------------

class Stage {
 public:
  Stage(const plan::PlanNode& node, std::string name) : node_(node) { counters.name = std::move(name); }
  virtual ~Stage() = default;

  std::vector<Queue*> inputs;
  Queue* output = nullptr;  // null for the root: emitted items go to `results`
  std::vector<Batch>* results = nullptr;
  StageCounters counters;

  bool finished() const noexcept { return eos_emitted_ && outbox_.empty(); }

  /// Handles up to `quantum` input items. Input is taken only while the
  /// outbox is empty, so a full downstream queue stalls this stage.
  std::size_t step(std::size_t quantum) {
    std::size_t progress = drain();
    for (std::size_t k = 0; k < quantum && outbox_.empty() && !finished(); ++k) {
      bool got = false;
      for (std::size_t i = 0; i < inputs.size() && !got; ++i) {
        std::size_t in = (next_input_ + i) % inputs.size();
        if (input_done_.size() < inputs.size()) input_done_.resize(inputs.size(), false);
        if (input_done_[in]) continue;
        if (auto item = inputs[in]->try_pop()) {
          next_input_ = (in + 1) % inputs.size();
          if (std::holds_alternative<EndOfStream>(*item)) input_done_[in] = true;
          consume(in, std::move(*item));
          got = true;
          ++progress;
        }
      }
      if (!got) break;
      progress += drain();
    }
    return progress;
  }

 protected:
  const plan::PlanNode& node_;

  virtual void consume(std::size_t input, Item item) = 0;

  void emit(Item item) {
    if (const auto* b = std::get_if<Batch>(&item)) counters.tuples_out.fetch_add(item_count(*b->payload));
    if (std::holds_alternative<VTuple>(item)) counters.tuples_out.fetch_add(1);
    if (std::holds_alternative<EndOfStream>(item)) eos_emitted_ = true;
    outbox_.push_back(std::move(item));
  }

  void emit_batch(std::size_t window, Payload p) {
    emit(Batch{window, std::make_shared<const Payload>(std::move(p))});
  }

  bool all_inputs_done() const {
    return input_done_.size() == inputs.size() &&
           std::all_of(input_done_.begin(), input_done_.end(), [](bool b) { return b; });
  }

 private:
  std::deque<Item> outbox_;
  std::vector<bool> input_done_;
  std::size_t next_input_ = 0;
  bool eos_emitted_ = false;

  std::size_t drain() {
    std::size_t n = 0;
    while (!outbox_.empty()) {
      if (output) {
        if (!output->try_push(outbox_.front())) break;
      } else if (const auto* b = std::get_if<Batch>(&outbox_.front())) {
        results->push_back(*b);
      }
      outbox_.pop_front();
      ++n;
    }
    return n;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class SourceStage : public Stage {
 public:
  using Stage::Stage;

 protected:
  void consume(std::size_t, Item item) override {
    if (std::holds_alternative<VTuple>(item)) counters.tuples_in.fetch_add(1);
    emit(std::move(item));
  }
};

class WindowStage : public Stage {
 public:
  WindowStage(const plan::PlanNode& node, std::string name, Schema source_schema)
      : Stage(node, std::move(name)), schema_(std::move(source_schema)) {
    if (node.window) manager_.emplace(*node.window);
  }

 protected:
  void consume(std::size_t, Item item) override {
    if (auto* t = std::get_if<VTuple>(&item)) {
      counters.tuples_in.fetch_add(1);
      if (!manager_) {
        open_[0].rows.push_back(std::move(*t));
        return;
      }
      double key = manager_->spec().kind == WindowKind::Time ? t->ts : static_cast<double>(ordinal_++);
      for (std::size_t w : manager_->assign(key)) open_[w].rows.push_back(*t);
      for (const auto& w : manager_->close_windows(key)) close(w.index);
      return;
    }
    if (std::holds_alternative<EndOfStream>(item)) {
      if (manager_) {
        for (const auto& w : manager_->flush()) close(w.index);
      } else {
        close(0);
      }
      emit(EndOfStream{});
    }
  }

 private:
  Schema schema_;  // the source's, whatever the output projection
  std::optional<WindowManager> manager_;
  std::map<std::size_t, RRelation> open_;
  std::size_t ordinal_ = 0;

  void close(std::size_t index) {
    RRelation rel;
    if (auto it = open_.find(index); it != open_.end()) {
      rel = std::move(it->second);
      open_.erase(it);
    }
    rel.schema = schema_;
    counters.record_window(0);
    emit_batch(index, std::move(rel));
  }
};

class UnaryStage : public Stage {
 public:
  using Stage::Stage;

 protected:
  void consume(std::size_t, Item item) override {
    if (std::holds_alternative<EndOfStream>(item)) {
      emit(EndOfStream{});
      return;
    }
    const Batch& b = std::get<Batch>(item);
    counters.tuples_in.fetch_add(item_count(*b.payload));
    auto t0 = Clock::now();
    ComparisonCounter cmp;
    Payload out = apply(*b.payload, cmp);
    counters.smatch_comparisons.fetch_add(cmp.value);
    counters.record_window(seconds_since(t0));
    emit_batch(b.window, std::move(out));
  }

 private:
  Payload apply(const Payload& in, ComparisonCounter& cmp) const {
    const plan::PlanNode& n = node_;
    switch (n.kind) {
      case plan::NodeKind::Select:
        if (const auto* rel = std::get_if<RRelation>(&in)) return select(*rel, *n.predicate, &cmp);
        return select(std::get<Arrable>(in), *n.predicate, &cmp);
      case plan::NodeKind::R2A: return r2a(std::get<RRelation>(in), n.gba, n.aoa);
      case plan::NodeKind::Cct: return cct(std::get<Arrable>(in), n.cct_option, n.gap);
      case plan::NodeKind::Aggregate: return aggregate_row(in);
      case plan::NodeKind::Direction: {
        Table t;
        for (const auto& row : direction(std::get<Arrable>(in), n.direction)) {
          json r;
          r[n.key_name] = scalar_json(row.key);
          r[n.direction_name] = std::string(to_string(row.direction));
          t.rows.push_back(std::move(r));
        }
        return t;
      }
      default: throw Error(ErrorCode::ConfigError, "stage kind has no unary form");
    }
  }

  Table aggregate_row(const Payload& in) const {
    json row;
    for (const auto& a : node_.aggregates) {
      std::optional<ScalarValue> v;
      if (const auto* rel = std::get_if<RRelation>(&in)) v = aggregate(*rel, a.fn, a.column);
      else if (const auto* ar = std::get_if<Arrable>(&in)) v = aggregate(*ar, a.fn, a.column);
      else v = static_cast<std::int64_t>(item_count(in));
      row[a.name] = v ? scalar_json(*v) : json(nullptr);
    }
    return Table{{std::move(row)}};
  }

 public:
  static json scalar_json(const ScalarValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return std::get<std::string>(v);
  }
};

class JoinStage : public Stage {
 public:
  using Stage::Stage;

 protected:
  void consume(std::size_t input, Item item) override {
    if (std::holds_alternative<EndOfStream>(item)) {
      eos_[input] = true;
    } else {
      const Batch& b = std::get<Batch>(item);
      pending_[input][b.window] = b.payload;
    }
    pair_ready();
    if (eos_[0] && eos_[1] && pending_[0].empty() && pending_[1].empty()) emit(EndOfStream{});
  }

 private:
  std::map<std::size_t, std::shared_ptr<const Payload>> pending_[2];
  bool eos_[2] = {false, false};

  void pair_ready() {
    for (;;) {
      std::optional<std::size_t> next;
      for (int s = 0; s < 2; ++s) {
        if (pending_[s].empty()) continue;
        std::size_t w = pending_[s].begin()->first;
        bool ready = pending_[1 - s].count(w) || eos_[1 - s];
        if (ready && (!next || w < *next)) next = w;
      }
      if (!next) return;
      auto take = [&](int s) -> std::shared_ptr<const Payload> {
        auto it = pending_[s].find(*next);
        if (it == pending_[s].end()) return nullptr;
        auto p = it->second;
        pending_[s].erase(it);
        return p;
      };
      auto l = take(0);
      auto r = take(1);
      join(*next, l, r);
    }
  }

  void join(std::size_t window, const std::shared_ptr<const Payload>& l,
            const std::shared_ptr<const Payload>& r) {
    const plan::PlanNode& n = node_;
    auto t0 = Clock::now();
    if (n.shape == plan::Shape::EquiRows) {
      EquiResult res;
      if (l) res.left = std::get<RRelation>(*l);
      if (r) res.right = std::get<RRelation>(*r);
      counters.tuples_in.fetch_add(res.left.size() + res.right.size());
      res.rows = hash_equi_join(res.left, res.right, *n.equi_column);
      counters.record_window(seconds_since(t0));
      emit_batch(window, std::move(res));
      return;
    }
    PairsResult res;
    if (l) res.left = std::get<Arrable>(*l);
    if (r) res.right = std::get<Arrable>(*r);
    counters.tuples_in.fetch_add(res.left.element_count() + res.right.element_count());
    ComparisonCounter cmp;
    switch (n.join_kind) {
      case ast::JoinKind::Nested: res.pairs = nl_join(res.left, res.right, n.join_cond, &cmp); break;
      case ast::JoinKind::Consecutive: res.pairs = cjoin(res.left, res.right, n.join_cond, &cmp); break;
      case ast::JoinKind::Cct:
        res.pairs = cct_join(res.left, res.right, n.join_cond, n.cct_option, &cmp);
        break;
    }
    counters.smatch_comparisons.fetch_add(cmp.value);
    counters.record_window(seconds_since(t0));
    emit_batch(window, std::move(res));
  }
};

}  // namespace detail

// -- result rendering -------------------------------------------------------------------

namespace detail {

inline json bb_json(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

inline json column_json(const TupleView& t, ColumnId c) {
  switch (c) {
    case ColumnId::Bb: return bb_json(*t.bb);
    case ColumnId::Fv: return t.fv->values;
    default: return UnaryStage::scalar_json(t.scalar(c));
  }
}

inline json tuple_json(const TupleView& t) {
  json r;
  r["fid"] = t.fid;
  r["oid"] = t.oid;
  r["label"] = *t.label;
  r["ts"] = t.ts;
  r["bb"] = bb_json(*t.bb);
  r["fv"] = t.fv->values;
  return r;
}

inline const ArrableRow* find_row(const Arrable& ar, const ScalarValue& key) {
  for (const auto& row : ar.rows)
    if (scalar_equal(row.key, key)) return &row;
  return nullptr;
}

}  // namespace detail

/// One output row, tagged with its window index.
struct ResultRow {
  std::size_t window = 0;
  json fields;

  std::string to_jsonl() const {
    json line;
    line["window"] = window;
    for (const auto& [k, v] : fields.items()) line[k] = v;
    return line.dump();
  }
};

inline std::vector<ResultRow> render_batch(const plan::PlanNode& root, const Batch& batch) {
  using namespace detail;
  std::vector<ResultRow> out;
  const auto& proj = root.projection;
  auto push = [&](json j) { out.push_back({batch.window, std::move(j)}); };

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RRelation>) {
          for (const auto& t : p.rows) {
            TupleView v = TupleView::of(t);
            if (proj.empty()) {
              push(tuple_json(v));
              continue;
            }
            json r;
            for (const auto& o : proj) r[o.name] = column_json(v, o.column);
            push(std::move(r));
          }
        } else if constexpr (std::is_same_v<T, Arrable>) {
          for (const auto& row : p.rows) {
            json r;
            if (proj.empty()) {
              r["key"] = UnaryStage::scalar_json(row.key);
              for (ColumnId c : {ColumnId::Fid, ColumnId::Oid, ColumnId::Label, ColumnId::Ts, ColumnId::Bb,
                                 ColumnId::Fv}) {
                json arr = json::array();
                for (std::size_t i = 0; i < row.size(); ++i) arr.push_back(column_json(row.at(i), c));
                r[std::string(column_name(c))] = std::move(arr);
              }
            } else {
              for (const auto& o : proj) {
                if (o.key) {
                  r[o.name] = UnaryStage::scalar_json(row.key);
                  continue;
                }
                json arr = json::array();
                for (std::size_t i = 0; i < row.size(); ++i) arr.push_back(column_json(row.at(i), o.column));
                r[o.name] = std::move(arr);
              }
            }
            push(std::move(r));
          }
        } else if constexpr (std::is_same_v<T, PairsResult>) {
          for (const auto& pr : p.pairs) {
            json r;
            if (proj.empty()) {
              r["left"] = UnaryStage::scalar_json(pr.left_key);
              r["right"] = UnaryStage::scalar_json(pr.right_key);
              r["score"] = pr.score;
            } else {
              for (const auto& o : proj) {
                const ScalarValue& key = o.side == 0 ? pr.left_key : pr.right_key;
                if (o.key) {
                  r[o.name] = UnaryStage::scalar_json(key);
                  continue;
                }
                const ArrableRow* row = find_row(o.side == 0 ? p.left : p.right, key);
                std::size_t w = o.side == 0 ? pr.left_witness : pr.right_witness;
                r[o.name] = column_json(row->at(w), o.column);
              }
            }
            push(std::move(r));
          }
        } else if constexpr (std::is_same_v<T, EquiResult>) {
          for (const auto& er : p.rows) {
            TupleView lv = TupleView::of(p.left.rows[er.left_index]);
            TupleView rv = TupleView::of(p.right.rows[er.right_index]);
            json r;
            if (proj.empty()) {
              r["left"] = tuple_json(lv);
              r["right"] = tuple_json(rv);
            } else {
              for (const auto& o : proj) r[o.name] = column_json(o.side == 0 ? lv : rv, o.column);
            }
            push(std::move(r));
          }
        } else {
          for (const auto& row : p.rows) push(row);
        }
      },
      *batch.payload);
  return out;
}

// -- pipeline ---------------------------------------------------------------------------------

class Pipeline {
 public:
  Pipeline(plan::QueryPlan plan, EngineConfig config)
      : plan_(std::make_unique<plan::QueryPlan>(std::move(plan))), config_(std::move(config)) {
    config_.validate();
    build();
  }

  std::size_t stage_count() const noexcept { return stages_.size(); }
  const plan::QueryPlan& plan() const noexcept { return *plan_; }

  /// Runs to completion. `sources[i]` feeds every leaf bound to plan().sources[i].
  std::vector<ResultRow> run(const std::vector<const RRelation*>& sources) {
    if (ran_) throw Error(ErrorCode::ConfigError, "a pipeline runs once");
    ran_ = true;
    if (sources.size() != plan_->sources.size())
      throw Error(ErrorCode::ConfigError, "query reads " + std::to_string(plan_->sources.size()) +
                                              " source(s), got " + std::to_string(sources.size()));
    auto t0 = detail::Clock::now();
    start_feeders(sources);
    try {
      schedule();
    } catch (...) {
      stop_feeders();
      throw;
    }
    stop_feeders();
    wall_seconds_ = detail::seconds_since(t0);

    std::vector<ResultRow> rows;
    const plan::PlanNode& root = plan_->at(plan_->root);
    for (const auto& b : results_)
      for (auto& r : render_batch(root, b)) rows.push_back(std::move(r));
    return rows;
  }

  std::vector<ResultRow> run(const std::vector<RRelation>& sources) {
    std::vector<const RRelation*> ptrs;
    for (const auto& s : sources) ptrs.push_back(&s);
    return run(ptrs);
  }

  /// Consistent copy of every counter, in plan-node order.
  StatsSnapshot stats() const {
    StatsSnapshot snap;
    snap.wall_seconds = wall_seconds_;
    for (const auto& st : stages_) {
      const auto& c = st->counters;
      StageStats s;
      s.name = c.name;
      s.tuples_in = c.tuples_in.load();
      s.tuples_out = c.tuples_out.load();
      s.smatch_comparisons = c.smatch_comparisons.load();
      s.windows = c.windows.load();
      {
        std::lock_guard lock(c.mu);
        s.window_seconds = c.window_seconds;
      }
      for (double w : s.window_seconds) s.wall_seconds += w;
      snap.stages.push_back(std::move(s));
    }
    return snap;
  }

 private:
  std::unique_ptr<plan::QueryPlan> plan_;
  EngineConfig config_;
  std::vector<std::unique_ptr<Stage>> stages_;
  std::vector<std::unique_ptr<Queue>> queues_;
  std::vector<Queue*> feed_queues_;             // one per Source stage
  std::vector<std::size_t> feed_source_index_;  // binding index per feed queue
  std::vector<Batch> results_;
  std::vector<std::thread> feeders_;
  std::atomic<bool> stop_{false};
  bool ran_ = false;
  double wall_seconds_ = 0;

  void build() {
    auto capacity = static_cast<std::size_t>(config_.queue_capacity);
    for (std::size_t i = 0; i < plan_->nodes.size(); ++i) {
      const plan::PlanNode& n = plan_->nodes[i];
      std::string name = std::to_string(i) + ":" + std::string(plan::to_string(n.kind));
      if (!n.detail.empty()) name += "[" + n.detail + "]";
      std::unique_ptr<Stage> st;
      switch (n.kind) {
        case plan::NodeKind::Source: st = std::make_unique<detail::SourceStage>(n, name); break;
        case plan::NodeKind::Window:
          st = std::make_unique<detail::WindowStage>(n, name, plan_->nodes[n.inputs.at(0)].schema);
          break;
        case plan::NodeKind::Join: st = std::make_unique<detail::JoinStage>(n, name); break;
        default: st = std::make_unique<detail::UnaryStage>(n, name); break;
      }
      stages_.push_back(std::move(st));
    }
    // One queue per edge, plus one per source leaf for its feeder.
    for (std::size_t i = 0; i < plan_->nodes.size(); ++i) {
      const plan::PlanNode& n = plan_->nodes[i];
      if (n.kind == plan::NodeKind::Source) {
        queues_.push_back(std::make_unique<Queue>(capacity));
        stages_[i]->inputs.push_back(queues_.back().get());
        feed_queues_.push_back(queues_.back().get());
        feed_source_index_.push_back(n.source_index);
      }
      for (std::size_t child : n.inputs) {
        queues_.push_back(std::make_unique<Queue>(capacity));
        stages_[child]->output = queues_.back().get();
        stages_[i]->inputs.push_back(queues_.back().get());
      }
    }
    stages_[plan_->root]->results = &results_;
  }

  void start_feeders(const std::vector<const RRelation*>& sources) {
    for (std::size_t s = 0; s < sources.size(); ++s) {
      std::vector<Queue*> targets;
      for (std::size_t k = 0; k < feed_queues_.size(); ++k)
        if (feed_source_index_[k] == s) targets.push_back(feed_queues_[k]);
      double rate = config_.rate_for(s);
      feeders_.emplace_back([this, rel = sources[s], targets, rate] {
        auto start = detail::Clock::now();
        for (std::size_t i = 0; i < rel->rows.size() && !stop_; ++i) {
          if (rate > 0)
            std::this_thread::sleep_until(start + std::chrono::duration_cast<detail::Clock::duration>(
                                                      std::chrono::duration<double>(i / rate)));
          for (Queue* q : targets)
            if (!q->push(Item{rel->rows[i]})) return;
        }
        for (Queue* q : targets)
          if (!q->push(Item{EndOfStream{}})) return;
      });
    }
  }

  void stop_feeders() {
    stop_ = true;
    for (auto& q : queues_) q->close();
    for (auto& t : feeders_)
      if (t.joinable()) t.join();
    feeders_.clear();
  }

  void schedule() {
    auto quantum = static_cast<std::size_t>(config_.quantum);
    auto last_progress = detail::Clock::now();
    for (;;) {
      std::size_t progress = 0;
      bool all_done = true;
      for (auto& st : stages_) {
        progress += st->step(quantum);
        all_done = all_done && st->finished();
      }
      if (all_done) return;
      if (progress > 0) {
        last_progress = detail::Clock::now();
        continue;
      }
      if (detail::seconds_since(last_progress) > config_.watchdog_seconds)
        throw Error(ErrorCode::QueueStall, "no stage made progress for " +
                                               to_display(ScalarValue{config_.watchdog_seconds}) + " s");
      std::this_thread::sleep_for(std::chrono::microseconds(50));
    }
  }
};

/// Writes result rows as JSON lines.
inline std::string to_jsonl(const std::vector<ResultRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.to_jsonl() + "\n";
  return out;
}

}  // namespace cqlva::engine
