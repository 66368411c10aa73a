#pragma once

// Syntax tree of a CQL-VA statement. Equality is structural and ignores
// source positions.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"
#include "cqlva/operators.hpp"
#include "cqlva/predicate.hpp"
#include "cqlva/similarity.hpp"
#include "cqlva/windows.hpp"

namespace cqlva::ast {

/// Owning pointer with value semantics, for recursive nodes.
template <typename T>
class Box {
 public:
  Box() : p_(std::make_unique<T>()) {}
  Box(T value) : p_(std::make_unique<T>(std::move(value))) {}  // NOLINT(google-explicit-constructor)
  Box(const Box& o) : p_(std::make_unique<T>(*o.p_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& o) {
    if (this != &o) p_ = std::make_unique<T>(*o.p_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  T& operator*() { return *p_; }
  const T& operator*() const { return *p_; }
  T* operator->() { return p_.get(); }
  const T* operator->() const { return p_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a.p_ == *b.p_; }

 private:
  std::unique_ptr<T> p_;
};

struct ColumnRef {
  std::string qualifier;  // empty when unqualified
  std::string name;       // as written, e.g. "oid" or "[FV]"
  Position pos;

  friend bool operator==(const ColumnRef& a, const ColumnRef& b) {
    return a.qualifier == b.qualifier && a.name == b.name;
  }
};

using VectorLiteral = std::vector<double>;
using Literal = std::variant<std::int64_t, double, std::string, VectorLiteral>;

/// A column (optionally shifted by a constant) or a literal.
struct Operand {
  std::variant<ColumnRef, Literal> value;
  double offset = 0;
  Position pos;

  friend bool operator==(const Operand& a, const Operand& b) {
    return a.value == b.value && a.offset == b.offset;
  }
};

struct Comparison {
  Operand lhs;
  CmpOp op;
  Operand rhs;
  friend bool operator==(const Comparison&, const Comparison&) = default;
};

/// lhs sMatch(th [, metric [, polarity]]) rhs
struct SMatchTest {
  Operand lhs;
  double th = 0;
  std::optional<Metric> metric;
  std::optional<Polarity> polarity;
  Operand rhs;
  friend bool operator==(const SMatchTest&, const SMatchTest&) = default;
};

/// column MATCHES BBOX(c1, c2, c3, c4)
struct BBMatchTest {
  ColumnRef column;
  BBPattern pattern;
  friend bool operator==(const BBMatchTest&, const BBMatchTest&) = default;
};

struct BoolExpr;

struct AndExpr {
  std::vector<BoolExpr> children;
  friend bool operator==(const AndExpr&, const AndExpr&) = default;
};
struct OrExpr {
  std::vector<BoolExpr> children;
  friend bool operator==(const OrExpr&, const OrExpr&) = default;
};
struct NotExpr {
  Box<BoolExpr> child;
  friend bool operator==(const NotExpr&, const NotExpr&) = default;
};

struct BoolExpr {
  std::variant<Comparison, SMatchTest, BBMatchTest, AndExpr, OrExpr, NotExpr> node;
  friend bool operator==(const BoolExpr&, const BoolExpr&) = default;
};

struct SelectItem {
  enum class Kind { Star, Column, Aggregate, Direction };
  Kind kind = Kind::Column;
  ColumnRef column;                // Column, Aggregate (unless count(*)), Direction
  AggFn fn = AggFn::CountStar;     // Aggregate
  std::optional<double> epsilon;   // Direction
  std::string alias;
  Position pos;

  friend bool operator==(const SelectItem& a, const SelectItem& b) {
    return a.kind == b.kind && a.column == b.column && a.fn == b.fn && a.epsilon == b.epsilon &&
           a.alias == b.alias;
  }
};

struct WindowClause {
  WindowKind kind = WindowKind::Time;
  double size = 0;
  std::optional<double> hop;
  friend bool operator==(const WindowClause&, const WindowClause&) = default;
};

struct SelectStmt;
struct Source;

enum class JoinKind { Nested, Consecutive, Cct };

inline constexpr std::string_view to_string(JoinKind k) {
  switch (k) {
    case JoinKind::Nested: return "JOIN";
    case JoinKind::Consecutive: return "CJOIN";
    case JoinKind::Cct: return "CCTJOIN";
  }
  return "?";
}

struct NamedSource {
  std::string name;
  friend bool operator==(const NamedSource&, const NamedSource&) = default;
};

struct R2ACall {
  Box<Source> input;
  ColumnRef gba;
  ColumnRef aoa;
  friend bool operator==(const R2ACall&, const R2ACall&) = default;
};

struct CctCall {
  Box<Source> input;
  CctOption option = CctOption::First;
  std::optional<std::int64_t> gap;
  friend bool operator==(const CctCall&, const CctCall&) = default;
};

struct SubQuery {
  Box<SelectStmt> stmt;
  friend bool operator==(const SubQuery&, const SubQuery&) = default;
};

struct JoinSource {
  Box<Source> left;
  JoinKind kind = JoinKind::Nested;
  std::optional<CctOption> option;  // CCTJOIN(option)
  Box<Source> right;
  BoolExpr on;
  friend bool operator==(const JoinSource&, const JoinSource&) = default;
};

struct Source {
  std::variant<NamedSource, R2ACall, CctCall, SubQuery, JoinSource> node;
  std::string alias;
  Position pos;

  friend bool operator==(const Source& a, const Source& b) {
    return a.node == b.node && a.alias == b.alias;
  }
};

struct SelectStmt {
  std::vector<SelectItem> items;
  Source from;
  std::optional<BoolExpr> where;
  std::optional<WindowClause> window;
  friend bool operator==(const SelectStmt&, const SelectStmt&) = default;
};

}  // namespace cqlva::ast
