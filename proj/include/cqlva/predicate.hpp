#pragma once

// Row/element predicates: scalar comparisons, bounding-box patterns and
// sMatch against a probe vector, combined with AND/OR/NOT.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"
#include "cqlva/similarity.hpp"

namespace cqlva {

/// Counts sMatch evaluations. Every operator that calls smatch takes one.
struct ComparisonCounter {
  std::uint64_t value = 0;
  void add(std::uint64_t n = 1) noexcept { value += n; }
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

inline constexpr std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

inline bool apply_cmp(CmpOp op, std::weak_ordering o) {
  switch (op) {
    case CmpOp::Eq: return o == 0;
    case CmpOp::Ne: return o != 0;
    case CmpOp::Lt: return o < 0;
    case CmpOp::Le: return o <= 0;
    case CmpOp::Gt: return o > 0;
    case CmpOp::Ge: return o >= 0;
  }
  return false;
}

inline constexpr OpKind op_kind(CmpOp op) {
  return (op == CmpOp::Eq || op == CmpOp::Ne) ? OpKind::Compare : OpKind::OrderCompare;
}

/// One component of a bounding-box pattern: wildcard, exact value or closed range.
struct BBComponent {
  struct Any {
    friend bool operator==(Any, Any) = default;
  };
  struct Range {
    double lo;
    double hi;
    friend bool operator==(const Range&, const Range&) = default;
  };
  std::variant<Any, double, Range> spec = Any{};

  static BBComponent wildcard() { return {}; }
  static BBComponent exact(double v) { return {v}; }
  static BBComponent range(double lo, double hi) {
    if (!(lo <= hi)) throw Error(ErrorCode::ConfigError, "bounding-box range with lo > hi");
    return {Range{lo, hi}};
  }

  bool matches(double v) const {
    if (std::holds_alternative<Any>(spec)) return true;
    if (const auto* e = std::get_if<double>(&spec)) return v == *e;
    const auto& r = std::get<Range>(spec);
    return r.lo <= v && v <= r.hi;
  }

  friend bool operator==(const BBComponent&, const BBComponent&) = default;
};

/// Pattern over (x, y, w, h).
struct BBPattern {
  std::array<BBComponent, 4> parts;

  bool matches(const BoundingBox& b) const {
    return parts[0].matches(b.x) && parts[1].matches(b.y) && parts[2].matches(b.w) &&
           parts[3].matches(b.h);
  }

  friend bool operator==(const BBPattern&, const BBPattern&) = default;
};

struct Predicate;

namespace pred {

/// column (+ offset) <op> literal
struct Compare {
  ColumnId column;
  CmpOp op;
  ScalarValue literal;
  double offset = 0;
};

struct BBTest {
  ColumnId column = ColumnId::Bb;
  BBPattern pattern;
};

/// sMatch of the feature-vector column against a fixed probe vector.
struct ProbeMatch {
  ColumnId column = ColumnId::Fv;
  MatchCondition cond;
  FeatureVector probe;
};

struct And {
  std::vector<Predicate> children;
};
struct Or {
  std::vector<Predicate> children;
};
struct Not {
  std::vector<Predicate> child;  // exactly one
};

}  // namespace pred

struct Predicate {
  std::variant<pred::Compare, pred::BBTest, pred::ProbeMatch, pred::And, pred::Or, pred::Not> node;

  static Predicate compare(ColumnId c, CmpOp op, ScalarValue lit, double offset = 0) {
    return {pred::Compare{c, op, std::move(lit), offset}};
  }
  static Predicate bb(BBPattern p) { return {pred::BBTest{ColumnId::Bb, p}}; }
  static Predicate probe(MatchCondition cond, FeatureVector v) {
    return {pred::ProbeMatch{ColumnId::Fv, cond, std::move(v)}};
  }
  static Predicate all(std::vector<Predicate> ps) { return {pred::And{std::move(ps)}}; }
  static Predicate any(std::vector<Predicate> ps) { return {pred::Or{std::move(ps)}}; }
  static Predicate negate(Predicate p) { return {pred::Not{{std::move(p)}}}; }
};

inline ScalarValue shifted(const ScalarValue& v, double offset) {
  if (offset == 0) return v;
  return as_double(v) + offset;
}

inline bool evaluate(const Predicate& p, const TupleView& t, ComparisonCounter* counter = nullptr) {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, pred::Compare>) {
          return apply_cmp(n.op, compare_scalar(shifted(t.scalar(n.column), n.offset), n.literal));
        } else if constexpr (std::is_same_v<T, pred::BBTest>) {
          return n.pattern.matches(*t.bb);
        } else if constexpr (std::is_same_v<T, pred::ProbeMatch>) {
          if (counter) counter->add();
          return smatch(n.cond, *t.fv, n.probe).matched;
        } else if constexpr (std::is_same_v<T, pred::And>) {
          for (const auto& c : n.children)
            if (!evaluate(c, t, counter)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, pred::Or>) {
          for (const auto& c : n.children)
            if (evaluate(c, t, counter)) return true;
          return false;
        } else {
          return !evaluate(n.child.at(0), t, counter);
        }
      },
      p.node);
}

/// Type rules for a predicate against a schema; raised before any data flows.
inline void check_predicate(const Predicate& p, const Schema& schema) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        auto column = [&](ColumnId id) -> const Column& {
          return schema.require(column_name(id));
        };
        if constexpr (std::is_same_v<T, pred::Compare>) {
          const Column& c = column(n.column);
          require_legal(op_kind(n.op), c);
          if (n.offset != 0) require_legal(OpKind::Arithmetic, c);
          bool numeric_col = c.kind == ColumnKind::ScalarNumeric;
          if (numeric_col != is_numeric(n.literal))
            throw Error(ErrorCode::SchemaMismatch,
                        "comparison between " + c.name + " and a literal of another type");
        } else if constexpr (std::is_same_v<T, pred::BBTest>) {
          require_legal(OpKind::BBPattern, column(n.column));
        } else if constexpr (std::is_same_v<T, pred::ProbeMatch>) {
          require_legal(OpKind::SMatch, column(n.column));
          if (n.probe.dim() == 0)
            throw Error(ErrorCode::EmptyFeatureVector, "sMatch probe vector is empty");
          if (schema.fv_dim && *schema.fv_dim != n.probe.dim())
            throw Error(ErrorCode::DimensionMismatch, "probe dimension differs from the trace's");
        } else if constexpr (std::is_same_v<T, pred::Not>) {
          for (const auto& c : n.child) check_predicate(c, schema);
        } else {
          for (const auto& c : n.children) check_predicate(c, schema);
        }
      },
      p.node);
}

}  // namespace cqlva
