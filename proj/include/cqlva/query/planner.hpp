#pragma once

// Turns a parsed statement into an operator tree. The tree follows the query
// as written: a Window sits on every source leaf, R2A sits directly above
// its input, and nothing is reordered beyond pushing filters on a base
// relation below the R2A that consumes it.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"
#include "cqlva/operators.hpp"
#include "cqlva/predicate.hpp"
#include "cqlva/query/ast.hpp"
#include "cqlva/query/render.hpp"
#include "cqlva/similarity.hpp"
#include "cqlva/windows.hpp"

namespace cqlva::plan {

enum class NodeKind { Source, Window, Select, R2A, Cct, Join, Aggregate, Direction };

inline constexpr std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Source: return "Source";
    case NodeKind::Window: return "Window";
    case NodeKind::Select: return "Select";
    case NodeKind::R2A: return "R2A";
    case NodeKind::Cct: return "CCT";
    case NodeKind::Join: return "Join";
    case NodeKind::Aggregate: return "Aggregate";
    case NodeKind::Direction: return "Direction";
  }
  return "?";
}

/// What flows out of a node for each window.
enum class Shape { Relation, Arrable, Pairs, EquiRows, Table };

inline constexpr std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Relation: return "relation";
    case Shape::Arrable: return "arrable";
    case Shape::Pairs: return "pairs";
    case Shape::EquiRows: return "equi-rows";
    case Shape::Table: return "table";
  }
  return "?";
}

/// One output field. `side` is 0/1 below a join and -1 otherwise. For
/// arrables and pairs, `key` selects the group key; other columns read the
/// element (pairs: the witness element).
struct OutputItem {
  std::string name;
  int side = -1;
  ColumnId column = ColumnId::Oid;
  bool key = false;
};

struct AggItem {
  AggFn fn = AggFn::CountStar;
  std::optional<ColumnId> column;
  std::string name;
};

struct PlanNode {
  NodeKind kind = NodeKind::Source;
  std::vector<std::size_t> inputs;
  Shape shape = Shape::Relation;
  Schema schema = trace_schema();

  std::string source_name;  // Source
  std::size_t source_index = 0;
  std::optional<WindowSpec> window;  // Window; unset = one window over the whole stream
  std::optional<Predicate> predicate;  // Select
  ColumnId gba = ColumnId::Oid;  // R2A (also carried by every arrable-shaped node)
  ColumnId aoa = ColumnId::Fid;
  CctOption cct_option = CctOption::First;  // Cct, and CCTJOIN's compression
  std::int64_t gap = 1;
  ast::JoinKind join_kind = ast::JoinKind::Nested;  // Join
  JoinCondition join_cond;
  std::optional<ColumnId> equi_column;
  std::vector<AggItem> aggregates;  // Aggregate
  DirectionOptions direction;  // Direction
  std::string key_name = "oid";
  std::string direction_name = "direction";

  std::vector<OutputItem> projection;  // empty = every column
  std::string detail;                  // human-readable parameters
};

struct QueryPlan {
  std::vector<PlanNode> nodes;
  std::size_t root = 0;
  /// Distinct source names in binding order (lowercased).
  std::vector<std::string> sources;

  const PlanNode& at(std::size_t i) const { return nodes.at(i); }

  /// Indented tree, root first.
  std::string describe() const {
    std::ostringstream out;
    describe_node(out, root, 0);
    return out.str();
  }

  /// Kinds from the first leaf up to the root along input 0.
  std::vector<NodeKind> spine() const {
    std::vector<NodeKind> out;
    std::size_t n = root;
    for (;;) {
      out.push_back(nodes[n].kind);
      if (nodes[n].inputs.empty()) break;
      n = nodes[n].inputs.front();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  void describe_node(std::ostringstream& out, std::size_t n, int depth) const {
    const PlanNode& node = nodes[n];
    out << std::string(depth * 2, ' ') << to_string(node.kind);
    if (!node.detail.empty()) out << '[' << node.detail << ']';
    out << " -> " << to_string(node.shape);
    if (!node.projection.empty()) {
      out << " (";
      for (std::size_t i = 0; i < node.projection.size(); ++i)
        out << (i ? ", " : "") << node.projection[i].name;
      out << ')';
    }
    out << '\n';
    for (std::size_t c : node.inputs) describe_node(out, c, depth + 1);
  }
};

/// Schemas of the named streams a query may read.
class Catalog {
 public:
  void add(std::string_view name, Schema schema) { schemas_[lowercase(name)] = std::move(schema); }
  const Schema* find(std::string_view name) const {
    auto it = schemas_.find(lowercase(name));
    return it == schemas_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, Schema> schemas_;
};

struct PlanOptions {
  /// Used when the statement has no WINDOW clause. Unset: whole stream.
  std::optional<WindowSpec> window;
};

// -- predicate text, for plan descriptions -------------------------------------

inline std::string describe(const Predicate& p) {
  return std::visit(
      [](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, pred::Compare>) {
          std::string lit = std::holds_alternative<std::string>(n.literal)
                                ? "\"" + std::get<std::string>(n.literal) + "\""
                                : to_display(n.literal);
          std::string col(column_name(n.column));
          if (n.offset != 0) col += (n.offset > 0 ? "+" : "") + to_display(ScalarValue{n.offset});
          return col + " " + std::string(to_string(n.op)) + " " + lit;
        } else if constexpr (std::is_same_v<T, pred::BBTest>) {
          return "bb matches pattern";
        } else if constexpr (std::is_same_v<T, pred::ProbeMatch>) {
          return "fv sMatch(" + to_display(ScalarValue{n.cond.th}) + ", " +
                 std::string(to_string(n.cond.metric)) + ") probe";
        } else if constexpr (std::is_same_v<T, pred::And> || std::is_same_v<T, pred::Or>) {
          const char* sep = std::is_same_v<T, pred::And> ? " AND " : " OR ";
          std::string s = "(";
          for (std::size_t i = 0; i < n.children.size(); ++i)
            s += (i ? sep : "") + describe(n.children[i]);
          return s + ")";
        } else {
          return "NOT " + describe(n.child.at(0));
        }
      },
      p.node);
}

// -- AST helpers -------------------------------------------------------------------

namespace detail {

inline void collect_sources(const ast::SelectStmt& s, std::vector<std::string>& out);

inline void collect_sources(const ast::Source& src, std::vector<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ast::NamedSource>) {
          std::string name = lowercase(n.name);
          if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        } else if constexpr (std::is_same_v<T, ast::R2ACall> || std::is_same_v<T, ast::CctCall>) {
          collect_sources(*n.input, out);
        } else if constexpr (std::is_same_v<T, ast::SubQuery>) {
          collect_sources(*n.stmt, out);
        } else {
          collect_sources(*n.left, out);
          collect_sources(*n.right, out);
        }
      },
      src.node);
}

inline void collect_sources(const ast::SelectStmt& s, std::vector<std::string>& out) {
  collect_sources(s.from, out);
}

/// Names of base relations reachable without crossing a subquery.
inline void base_names(const ast::Source& src, std::set<std::string>& out) {
  if (const auto* n = std::get_if<ast::NamedSource>(&src.node)) out.insert(lowercase(n->name));
  else if (const auto* r = std::get_if<ast::R2ACall>(&src.node)) base_names(*r->input, out);
  else if (const auto* c = std::get_if<ast::CctCall>(&src.node)) base_names(*c->input, out);
  else if (const auto* j = std::get_if<ast::JoinSource>(&src.node)) {
    base_names(*j->left, out);
    base_names(*j->right, out);
  }
}

/// Names that address a source's own output.
inline std::set<std::string> top_names(const ast::Source& src) {
  std::set<std::string> out;
  if (!src.alias.empty()) out.insert(lowercase(src.alias));
  else if (const auto* n = std::get_if<ast::NamedSource>(&src.node)) out.insert(lowercase(n->name));
  return out;
}

inline void qualifiers(const ast::Operand& o, std::set<std::string>& out, bool& unqualified) {
  if (const auto* c = std::get_if<ast::ColumnRef>(&o.value)) {
    if (c->qualifier.empty()) unqualified = true;
    else out.insert(lowercase(c->qualifier));
  }
}

inline void qualifiers(const ast::BoolExpr& e, std::set<std::string>& out, bool& unqualified) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ast::Comparison> || std::is_same_v<T, ast::SMatchTest>) {
          qualifiers(n.lhs, out, unqualified);
          qualifiers(n.rhs, out, unqualified);
        } else if constexpr (std::is_same_v<T, ast::BBMatchTest>) {
          if (n.column.qualifier.empty()) unqualified = true;
          else out.insert(lowercase(n.column.qualifier));
        } else if constexpr (std::is_same_v<T, ast::NotExpr>) {
          qualifiers(*n.child, out, unqualified);
        } else {
          for (const auto& c : n.children) qualifiers(c, out, unqualified);
        }
      },
      e.node);
}

inline void conjuncts(const ast::BoolExpr& e, std::vector<ast::BoolExpr>& out) {
  if (const auto* a = std::get_if<ast::AndExpr>(&e.node)) {
    for (const auto& c : a->children) conjuncts(c, out);
  } else {
    out.push_back(e);
  }
}

inline CmpOp flip(CmpOp op) {
  switch (op) {
    case CmpOp::Lt: return CmpOp::Gt;
    case CmpOp::Le: return CmpOp::Ge;
    case CmpOp::Gt: return CmpOp::Lt;
    case CmpOp::Ge: return CmpOp::Le;
    default: return op;
  }
}

inline std::string display_name(const ast::ColumnRef& c) { return query::detail::render(c); }

}  // namespace detail

/// Distinct base-relation names in order of first appearance. Traces bind to
/// sources in this order.
inline std::vector<std::string> source_names(const ast::SelectStmt& stmt) {
  std::vector<std::string> out;
  detail::collect_sources(stmt, out);
  return out;
}

// -- planner -----------------------------------------------------------------------

class Planner {
 public:
  Planner(const Catalog& catalog, PlanOptions options) : catalog_(catalog), options_(std::move(options)) {}

  QueryPlan run(const ast::SelectStmt& stmt) {
    plan_.sources = source_names(stmt);
    Planned top = plan_statement(stmt, options_.window);
    plan_.root = top.node;
    return std::move(plan_);
  }

 private:
  struct Planned {
    std::size_t node = 0;
    std::set<std::string> names;               // qualifiers that address this output
    std::vector<std::set<std::string>> sides;  // per join side, when shape is Pairs/EquiRows
  };

  using Pending = std::map<std::string, std::vector<ast::BoolExpr>>;

  const Catalog& catalog_;
  PlanOptions options_;
  QueryPlan plan_;

  PlanNode& node(std::size_t i) { return plan_.nodes[i]; }

  std::size_t add(PlanNode n) {
    plan_.nodes.push_back(std::move(n));
    return plan_.nodes.size() - 1;
  }

  /// A node of the same shape stacked on `input`, inheriting its schema,
  /// grouping and output projection.
  PlanNode stacked(NodeKind kind, std::size_t input) {
    const PlanNode& in = node(input);
    PlanNode n;
    n.kind = kind;
    n.inputs = {input};
    n.shape = in.shape;
    n.schema = in.schema;
    n.gba = in.gba;
    n.aoa = in.aoa;
    n.projection = in.projection;
    return n;
  }

  [[noreturn]] static void mismatch(const std::string& msg, Position pos = {}) {
    throw Error(ErrorCode::SchemaMismatch, msg, pos);
  }

  // -- column resolution --

  ColumnId resolve(const ast::ColumnRef& ref, const Schema& schema,
                   const std::set<std::string>& names) const {
    if (!ref.qualifier.empty() && !names.count(lowercase(ref.qualifier)))
      throw Error(ErrorCode::UnknownIdentifier, "unknown source '" + ref.qualifier + "'", ref.pos);
    const Column* c = schema.find(ref.name);
    if (!c) throw Error(ErrorCode::UnknownColumn, "unknown column '" + ref.name + "'", ref.pos);
    return c->id;
  }

  int side_of(const ast::ColumnRef& ref, const Planned& p) const {
    if (ref.qualifier.empty())
      mismatch("column '" + ref.name + "' must be qualified below a join", ref.pos);
    std::string q = lowercase(ref.qualifier);
    int found = -1;
    for (std::size_t s = 0; s < p.sides.size(); ++s) {
      if (!p.sides[s].count(q)) continue;
      if (found >= 0) mismatch("'" + ref.qualifier + "' names both join inputs", ref.pos);
      found = static_cast<int>(s);
    }
    if (found < 0)
      throw Error(ErrorCode::UnknownIdentifier, "unknown source '" + ref.qualifier + "'", ref.pos);
    return found;
  }

  // -- predicates over a single input --

  static ScalarValue scalar_literal(const ast::Literal& l, Position pos) {
    if (const auto* i = std::get_if<std::int64_t>(&l)) return *i;
    if (const auto* d = std::get_if<double>(&l)) return *d;
    if (const auto* s = std::get_if<std::string>(&l)) return *s;
    mismatch("a vector literal can only be an sMatch probe", pos);
  }

  Predicate to_predicate(const ast::BoolExpr& e, const Schema& schema, const std::set<std::string>& names) {
    return std::visit(
        [&](const auto& n) -> Predicate {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ast::Comparison>) {
            const auto* lc = std::get_if<ast::ColumnRef>(&n.lhs.value);
            const auto* rc = std::get_if<ast::ColumnRef>(&n.rhs.value);
            if (lc && rc) mismatch("column-to-column comparisons need a join", n.lhs.pos);
            if (!lc && !rc) mismatch("comparison without a column", n.lhs.pos);
            const ast::Operand& col = lc ? n.lhs : n.rhs;
            const ast::Operand& lit = lc ? n.rhs : n.lhs;
            CmpOp op = lc ? n.op : detail::flip(n.op);
            ColumnId id = resolve(std::get<ast::ColumnRef>(col.value), schema, names);
            require_legal(op_kind(op), schema.require(column_name(id)));
            return Predicate::compare(id, op, scalar_literal(std::get<ast::Literal>(lit.value), lit.pos),
                                      col.offset);
          } else if constexpr (std::is_same_v<T, ast::SMatchTest>) {
            const auto* lc = std::get_if<ast::ColumnRef>(&n.lhs.value);
            const auto* rc = std::get_if<ast::ColumnRef>(&n.rhs.value);
            if (lc && rc) mismatch("sMatch between two columns needs a join", n.lhs.pos);
            if (!lc && !rc) mismatch("sMatch without a column", n.lhs.pos);
            const ast::Operand& col = lc ? n.lhs : n.rhs;
            const ast::Operand& lit = lc ? n.rhs : n.lhs;
            ColumnId id = resolve(std::get<ast::ColumnRef>(col.value), schema, names);
            require_legal(OpKind::SMatch, schema.require(column_name(id)));
            const auto* vec = std::get_if<ast::VectorLiteral>(&std::get<ast::Literal>(lit.value));
            if (!vec) mismatch("sMatch needs a feature-vector probe", lit.pos);
            return Predicate::probe(match_condition(n), FeatureVector{*vec});
          } else if constexpr (std::is_same_v<T, ast::BBMatchTest>) {
            ColumnId id = resolve(n.column, schema, names);
            require_legal(OpKind::BBPattern, schema.require(column_name(id)));
            return Predicate::bb(n.pattern);
          } else if constexpr (std::is_same_v<T, ast::AndExpr>) {
            std::vector<Predicate> ps;
            for (const auto& c : n.children) ps.push_back(to_predicate(c, schema, names));
            return Predicate::all(std::move(ps));
          } else if constexpr (std::is_same_v<T, ast::OrExpr>) {
            std::vector<Predicate> ps;
            for (const auto& c : n.children) ps.push_back(to_predicate(c, schema, names));
            return Predicate::any(std::move(ps));
          } else {
            return Predicate::negate(to_predicate(*n.child, schema, names));
          }
        },
        e.node);
  }

  static MatchCondition match_condition(const ast::SMatchTest& t) {
    return MatchCondition::make(t.metric.value_or(Metric::Cosine), t.th, t.polarity);
  }

  std::size_t add_select(std::size_t input, const std::vector<ast::BoolExpr>& exprs,
                         const std::set<std::string>& names) {
    Shape shape = node(input).shape;
    if (shape != Shape::Relation && shape != Shape::Arrable)
      mismatch("a filter here would apply to " + std::string(to_string(shape)) + " output");
    std::vector<Predicate> ps;
    for (const auto& e : exprs) ps.push_back(to_predicate(e, node(input).schema, names));
    Predicate p = ps.size() == 1 ? std::move(ps.front()) : Predicate::all(std::move(ps));
    check_predicate(p, node(input).schema);
    PlanNode n = stacked(NodeKind::Select, input);
    n.detail = describe(p);
    n.predicate = std::move(p);
    return add(std::move(n));
  }

  // -- sources --

  Planned plan_source(const ast::Source& src, Pending& pending, const std::optional<WindowSpec>& window) {
    Planned out = std::visit(
        [&](const auto& n) -> Planned {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ast::NamedSource>) return plan_named(n, src.pos, pending, window);
          else if constexpr (std::is_same_v<T, ast::R2ACall>) return plan_r2a(n, src.pos, pending, window);
          else if constexpr (std::is_same_v<T, ast::CctCall>) return plan_cct(n, src.pos, pending, window);
          else if constexpr (std::is_same_v<T, ast::SubQuery>) return plan_statement(*n.stmt, window);
          else return plan_join(n, src.pos, {}, pending, window);
        },
        src.node);
    if (!src.alias.empty()) out.names.insert(lowercase(src.alias));
    return out;
  }

  Planned plan_named(const ast::NamedSource& n, Position pos, Pending& pending,
                     const std::optional<WindowSpec>& window) {
    std::string name = lowercase(n.name);
    const Schema* schema = catalog_.find(name);
    if (!schema) throw Error(ErrorCode::UnknownIdentifier, "unknown stream '" + n.name + "'", pos);

    PlanNode s;
    s.kind = NodeKind::Source;
    s.schema = *schema;
    s.source_name = name;
    s.source_index = static_cast<std::size_t>(
        std::find(plan_.sources.begin(), plan_.sources.end(), name) - plan_.sources.begin());
    s.detail = n.name;
    std::size_t id = add(std::move(s));

    PlanNode w = stacked(NodeKind::Window, id);
    w.window = window;
    w.detail = window ? std::string(to_string(window->kind)) + " " + to_display(ScalarValue{window->size}) +
                            " hop " + to_display(ScalarValue{window->hop})
                      : "whole stream";
    id = add(std::move(w));

    Planned out{id, {name}, {}};
    auto it = pending.find(name);
    if (it != pending.end()) {
      id = add_select(id, it->second, out.names);
      pending.erase(it);
      out.node = id;
    }
    return out;
  }

  Planned plan_r2a(const ast::R2ACall& call, Position pos, Pending& pending,
                   const std::optional<WindowSpec>& window) {
    Planned in = plan_source(*call.input, pending, window);
    const PlanNode& input = node(in.node);
    if (input.shape != Shape::Relation) mismatch("R2A needs a relation input", pos);
    ColumnId gba = resolve(call.gba, input.schema, in.names);
    ColumnId aoa = resolve(call.aoa, input.schema, in.names);
    require_legal(OpKind::GroupOrOrder, input.schema.require(column_name(gba)));
    require_legal(OpKind::GroupOrOrder, input.schema.require(column_name(aoa)));

    PlanNode n = stacked(NodeKind::R2A, in.node);
    n.shape = Shape::Arrable;
    n.gba = gba;
    n.aoa = aoa;
    n.projection.clear();
    n.detail = "gba=" + std::string(column_name(gba)) + ", aoa=" + std::string(column_name(aoa));
    in.node = add(std::move(n));
    return in;
  }

  Planned plan_cct(const ast::CctCall& call, Position pos, Pending& pending,
                   const std::optional<WindowSpec>& window) {
    Planned in = plan_source(*call.input, pending, window);
    if (node(in.node).shape != Shape::Arrable) mismatch("CCT needs an arrable input", pos);
    std::int64_t gap = call.gap.value_or(1);
    if (gap < 0) throw Error(ErrorCode::ConfigError, "CCT gap must be non-negative", pos);
    PlanNode n = stacked(NodeKind::Cct, in.node);
    n.cct_option = call.option;
    n.gap = gap;
    n.detail = std::string(to_string(call.option)) + (gap != 1 ? ", gap " + std::to_string(gap) : "");
    in.node = add(std::move(n));
    return in;
  }

  // -- joins --

  Planned plan_join(const ast::JoinSource& j, Position pos, const std::vector<ast::BoolExpr>& where,
                    Pending& pending, const std::optional<WindowSpec>& window) {
    std::set<std::string> names[2];
    const ast::Source* side_src[2] = {&*j.left, &*j.right};
    std::set<std::string> base[2];
    for (int s = 0; s < 2; ++s) {
      detail::base_names(*side_src[s], base[s]);
      names[s] = detail::top_names(*side_src[s]);
      names[s].insert(base[s].begin(), base[s].end());
    }
    auto side_of_quals = [&](const std::set<std::string>& quals, bool unqualified) -> int {
      if (unqualified) mismatch("columns must be qualified below a join", pos);
      int side = -1;
      for (const auto& q : quals) {
        int s = names[0].count(q) ? 0 : (names[1].count(q) ? 1 : -1);
        if (s < 0) throw Error(ErrorCode::UnknownIdentifier, "unknown source '" + q + "'", pos);
        if (names[0].count(q) && names[1].count(q)) mismatch("'" + q + "' names both join inputs", pos);
        if (side >= 0 && side != s) return 2;
        side = s;
      }
      return side;
    };

    // Classify every conjunct of ON and of the enclosing WHERE.
    std::vector<ast::BoolExpr> all;
    detail::conjuncts(j.on, all);
    std::size_t on_count = all.size();
    all.insert(all.end(), where.begin(), where.end());

    Pending side_pending[2];
    std::vector<ast::BoolExpr> side_top[2];
    std::vector<ast::BoolExpr> cross;
    for (std::size_t k = 0; k < all.size(); ++k) {
      std::set<std::string> quals;
      bool unq = false;
      detail::qualifiers(all[k], quals, unq);
      int s = side_of_quals(quals, unq);
      if (s == 2) {
        if (k >= on_count) mismatch("WHERE conditions across both join inputs belong in ON", pos);
        cross.push_back(all[k]);
        continue;
      }
      if (s < 0) mismatch("join condition without columns", pos);
      std::set<std::string> top = detail::top_names(*side_src[s]);
      bool to_base = std::all_of(quals.begin(), quals.end(),
                                 [&](const std::string& q) { return base[s].count(q) && !top.count(q); });
      if (to_base && quals.size() == 1) side_pending[s][*quals.begin()].push_back(all[k]);
      else side_top[s].push_back(all[k]);
    }
    for (auto& [name, exprs] : pending) {
      for (int s = 0; s < 2; ++s)
        if (base[s].count(name)) side_pending[s][name] = exprs;
    }
    pending.clear();

    Planned side[2];
    for (int s = 0; s < 2; ++s) {
      side[s] = plan_source(*side_src[s], side_pending[s], window);
      if (!side_pending[s].empty()) mismatch("filter on '" + side_pending[s].begin()->first + "' has no source", pos);
      if (!side_top[s].empty()) side[s].node = add_select(side[s].node, side_top[s], side[s].names);
    }

    const PlanNode& l = node(side[0].node);
    const PlanNode& r = node(side[1].node);
    PlanNode n;
    n.kind = NodeKind::Join;
    n.inputs = {side[0].node, side[1].node};
    n.join_kind = j.kind;
    n.cct_option = j.option.value_or(CctOption::Both);
    n.gba = l.gba;
    n.aoa = l.aoa;

    Planned out;
    out.sides = {side[0].names, side[1].names};

    // Cross-side conjuncts become the join condition.
    JoinCondition cond;
    std::vector<std::pair<ColumnId, ColumnId>> equalities;
    for (const auto& e : cross) {
      if (const auto* t = std::get_if<ast::SMatchTest>(&e.node)) {
        const auto* lc = std::get_if<ast::ColumnRef>(&t->lhs.value);
        const auto* rc = std::get_if<ast::ColumnRef>(&t->rhs.value);
        if (!lc || !rc || t->lhs.offset != 0 || t->rhs.offset != 0)
          mismatch("a join sMatch compares two feature-vector columns", t->lhs.pos);
        if (cond.match) mismatch("a join takes a single sMatch condition", t->lhs.pos);
        if (side_of(*lc, out) == 1) std::swap(lc, rc);
        ColumnId a = resolve(*lc, l.schema, side[0].names);
        ColumnId b = resolve(*rc, r.schema, side[1].names);
        require_legal(OpKind::SMatch, l.schema.require(column_name(a)));
        require_legal(OpKind::SMatch, r.schema.require(column_name(b)));
        cond.match = match_condition(*t);
      } else if (const auto* c = std::get_if<ast::Comparison>(&e.node)) {
        const auto* lc = std::get_if<ast::ColumnRef>(&c->lhs.value);
        const auto* rc = std::get_if<ast::ColumnRef>(&c->rhs.value);
        if (!lc || !rc) mismatch("a join comparison needs a column from each input", c->lhs.pos);
        CmpOp op = c->op;
        double loff = c->lhs.offset, roff = c->rhs.offset;
        if (side_of(*lc, out) == 1) {
          std::swap(lc, rc);
          std::swap(loff, roff);
          op = detail::flip(op);
        }
        ColumnId a = resolve(*lc, l.schema, side[0].names);
        ColumnId b = resolve(*rc, r.schema, side[1].names);
        const Column& ca = l.schema.require(column_name(a));
        const Column& cb = r.schema.require(column_name(b));
        if (op == CmpOp::Eq) {
          require_legal(OpKind::EqualityJoin, ca);
          require_legal(OpKind::EqualityJoin, cb);
        }
        cond.terms.push_back({a, op, b, loff - roff});
        if (op == CmpOp::Eq && a == b && loff == roff) equalities.push_back({a, b});
      } else {
        mismatch("join conditions combine sMatch and comparisons with AND only", pos);
      }
    }

    if (l.shape == Shape::Relation && r.shape == Shape::Relation) {
      if (j.kind != ast::JoinKind::Nested)
        mismatch(std::string(ast::to_string(j.kind)) + " needs arrable inputs (use R2A)", pos);
      if (cond.match || cond.terms.size() != 1 || equalities.size() != 1)
        mismatch("a join of relations takes a single equality on one scalar column", pos);
      n.shape = Shape::EquiRows;
      n.equi_column = equalities.front().first;
      n.detail = "hash on " + std::string(column_name(*n.equi_column));
    } else if (l.shape == Shape::Arrable && r.shape == Shape::Arrable) {
      if (j.kind != ast::JoinKind::Nested && !cond.match)
        throw Error(ErrorCode::IllegalColumnKind,
                    std::string(ast::to_string(j.kind)) + " needs an sMatch condition on feature vectors", pos);
      if (!cond.match && cond.terms.empty()) mismatch("join without a condition", pos);
      check_join(l.schema, r.schema, cond);
      n.shape = Shape::Pairs;
      n.detail = std::string(ast::to_string(j.kind));
      if (j.kind == ast::JoinKind::Cct) n.detail += "(" + std::string(to_string(n.cct_option)) + ")";
      if (cond.match)
        n.detail += " sMatch(" + to_display(ScalarValue{cond.match->th}) + ", " +
                    std::string(to_string(cond.match->metric)) + ")";
    } else {
      mismatch("join inputs must both be relations or both be arrables", pos);
    }
    n.join_cond = std::move(cond);
    out.node = add(std::move(n));
    return out;
  }

  // -- statements --

  Planned plan_statement(const ast::SelectStmt& stmt, std::optional<WindowSpec> window) {
    if (stmt.window) {
      const auto& w = *stmt.window;
      window = WindowSpec::make(w.kind, w.size, w.hop.value_or(w.size));
    }

    std::vector<ast::BoolExpr> where;
    if (stmt.where) detail::conjuncts(*stmt.where, where);

    Planned in;
    Pending pending;
    if (const auto* j = std::get_if<ast::JoinSource>(&stmt.from.node)) {
      in = plan_join(*j, stmt.from.pos, where, pending, window);
      if (!stmt.from.alias.empty()) in.names.insert(lowercase(stmt.from.alias));
    } else {
      std::set<std::string> base;
      detail::base_names(stmt.from, base);
      std::set<std::string> top = detail::top_names(stmt.from);
      std::vector<ast::BoolExpr> above;
      for (const auto& e : where) {
        std::set<std::string> quals;
        bool unq = false;
        detail::qualifiers(e, quals, unq);
        bool to_base = !unq && quals.size() == 1 && base.count(*quals.begin()) && !top.count(*quals.begin());
        if (to_base) pending[*quals.begin()].push_back(e);
        else above.push_back(e);
      }
      in = plan_source(stmt.from, pending, window);
      if (!pending.empty())
        throw Error(ErrorCode::UnknownIdentifier, "unknown source '" + pending.begin()->first + "'");
      std::set<std::string> names = in.names;
      names.insert(base.begin(), base.end());
      in.names = names;
      if (!above.empty()) in.node = add_select(in.node, above, in.names);
    }
    return plan_items(stmt, in);
  }

  Planned plan_items(const ast::SelectStmt& stmt, Planned in) {
    using Kind = ast::SelectItem::Kind;
    bool star = false, agg = false, dir = false, cols = false;
    for (const auto& it : stmt.items) {
      star |= it.kind == Kind::Star;
      agg |= it.kind == Kind::Aggregate;
      dir |= it.kind == Kind::Direction;
      cols |= it.kind == Kind::Column;
    }
    Position pos = stmt.items.front().pos;
    if (star && stmt.items.size() > 1) mismatch("'*' cannot be combined with other items", pos);
    if (agg && (dir || cols)) mismatch("aggregates cannot be mixed with other items", pos);
    if (star) return in;
    if (agg) return plan_aggregate(stmt, in);
    if (dir) return plan_direction(stmt, in);
    return plan_projection(stmt, in);
  }

  Planned plan_aggregate(const ast::SelectStmt& stmt, Planned in) {
    const PlanNode& input = node(in.node);
    PlanNode n;
    n.kind = NodeKind::Aggregate;
    n.inputs = {in.node};
    n.shape = Shape::Table;
    n.schema = Schema{};
    for (const auto& it : stmt.items) {
      AggItem a;
      a.fn = it.fn;
      if (it.fn != AggFn::CountStar) {
        if (input.shape != Shape::Relation && input.shape != Shape::Arrable)
          mismatch("only count(*) applies to " + std::string(to_string(input.shape)) + " output", it.pos);
        a.column = resolve(it.column, input.schema, in.names);
        const Column& c = input.schema.require(column_name(*a.column));
        require_legal(it.fn == AggFn::Count ? OpKind::Count : OpKind::Arithmetic, c);
        a.name = std::string(to_string(it.fn)) + "(" + detail::display_name(it.column) + ")";
      } else {
        if (input.shape == Shape::Table) mismatch("count(*) over an aggregate result", it.pos);
        a.name = "count(*)";
      }
      if (!it.alias.empty()) a.name = it.alias;
      n.detail += (n.detail.empty() ? "" : ", ") + a.name;
      n.aggregates.push_back(std::move(a));
    }
    in.node = add(std::move(n));
    in.sides.clear();
    return in;
  }

  Planned plan_direction(const ast::SelectStmt& stmt, Planned in) {
    const PlanNode& input = node(in.node);
    if (input.shape != Shape::Arrable) mismatch("Direction needs an arrable input (use R2A)", stmt.items.front().pos);
    PlanNode n;
    n.kind = NodeKind::Direction;
    n.inputs = {in.node};
    n.shape = Shape::Table;
    n.schema = Schema{};
    n.key_name = std::string(column_name(input.gba));
    bool seen = false;
    for (const auto& it : stmt.items) {
      if (it.kind == ast::SelectItem::Kind::Direction) {
        if (seen) mismatch("one Direction item per query", it.pos);
        seen = true;
        ColumnId id = resolve(it.column, input.schema, in.names);
        require_legal(OpKind::Direction, input.schema.require(column_name(id)));
        n.direction.epsilon = it.epsilon.value_or(0);
        if (!it.alias.empty()) n.direction_name = it.alias;
      } else {
        ColumnId id = resolve(it.column, input.schema, in.names);
        if (id != input.gba) mismatch("only the grouping column can accompany Direction", it.pos);
        n.key_name = it.alias.empty() ? detail::display_name(it.column) : it.alias;
      }
    }
    n.detail = "eps " + to_display(ScalarValue{n.direction.epsilon});
    in.node = add(std::move(n));
    return in;
  }

  Planned plan_projection(const ast::SelectStmt& stmt, Planned in) {
    PlanNode& target = node(in.node);
    std::vector<OutputItem> items;
    Schema narrowed;
    narrowed.fv_dim = target.schema.fv_dim;
    for (const auto& it : stmt.items) {
      OutputItem o;
      o.name = it.alias.empty() ? detail::display_name(it.column) : it.alias;
      switch (target.shape) {
        case Shape::Relation:
        case Shape::Arrable: {
          o.column = resolve(it.column, target.schema, in.names);
          o.key = target.shape == Shape::Arrable && o.column == target.gba;
          const Column& c = target.schema.require(column_name(o.column));
          if (std::find(narrowed.columns.begin(), narrowed.columns.end(), c) == narrowed.columns.end())
            narrowed.columns.push_back(c);
          break;
        }
        case Shape::Pairs:
        case Shape::EquiRows: {
          o.side = side_of(it.column, in);
          const PlanNode& side = node(target.inputs[o.side]);
          o.column = resolve(it.column, side.schema, in.sides[o.side]);
          o.key = target.shape == Shape::Pairs && o.column == side.gba;
          if (target.shape == Shape::Pairs && !o.key && column_kind(o.column) != ColumnKind::ScalarNumeric &&
              column_kind(o.column) != ColumnKind::Categorical)
            mismatch("join output can carry scalar columns only", it.pos);
          break;
        }
        case Shape::Table: mismatch("select a subquery's aggregate with '*'", it.pos);
      }
      items.push_back(std::move(o));
    }
    target.projection = std::move(items);
    if (target.shape == Shape::Relation || target.shape == Shape::Arrable) target.schema = narrowed;
    return in;
  }
};

inline QueryPlan plan(const ast::SelectStmt& stmt, const Catalog& catalog, PlanOptions options = {}) {
  return Planner(catalog, std::move(options)).run(stmt);
}

}  // namespace cqlva::plan
