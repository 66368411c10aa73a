#pragma once

// R++ tuples, column kinds, relations and arrables.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "cqlva/error.hpp"

namespace cqlva {

/// Lower-left corner plus extent, in pixels.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct FeatureVector {
  std::vector<double> values;

  FeatureVector() = default;
  FeatureVector(std::initializer_list<double> v) : values(v) {}
  explicit FeatureVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const noexcept { return values.size(); }
  std::span<const double> view() const noexcept { return values; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// One detected object in one frame.
struct VTuple {
  std::int64_t fid = 0;
  std::int64_t oid = 0;
  std::string label;
  BoundingBox bb;
  FeatureVector fv;
  double ts = 0;

  friend bool operator==(const VTuple&, const VTuple&) = default;
};

enum class ColumnKind { ScalarNumeric, Categorical, BboxVector, FeatureVector, DirectionEnum };

inline constexpr std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::ScalarNumeric: return "SCALAR_NUMERIC";
    case ColumnKind::Categorical: return "CATEGORICAL";
    case ColumnKind::BboxVector: return "BBOX_VECTOR";
    case ColumnKind::FeatureVector: return "FEATURE_VECTOR";
    case ColumnKind::DirectionEnum: return "DIRECTION_ENUM";
  }
  return "?";
}

/// The six attributes every trace carries.
enum class ColumnId { Fid, Oid, Label, Bb, Fv, Ts };

inline constexpr std::string_view column_name(ColumnId id) {
  switch (id) {
    case ColumnId::Fid: return "fid";
    case ColumnId::Oid: return "oid";
    case ColumnId::Label: return "label";
    case ColumnId::Bb: return "bb";
    case ColumnId::Fv: return "fv";
    case ColumnId::Ts: return "ts";
  }
  return "?";
}

inline constexpr ColumnKind column_kind(ColumnId id) {
  switch (id) {
    case ColumnId::Fid:
    case ColumnId::Oid:
    case ColumnId::Ts: return ColumnKind::ScalarNumeric;
    case ColumnId::Label: return ColumnKind::Categorical;
    case ColumnId::Bb: return ColumnKind::BboxVector;
    case ColumnId::Fv: return ColumnKind::FeatureVector;
  }
  return ColumnKind::ScalarNumeric;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Resolves a column spelling ("fid", "[FV]", "BB", ...) to a trace column.
inline std::optional<ColumnId> parse_column_id(std::string_view name) {
  std::string n = lowercase(name);
  if (n.size() >= 2 && n.front() == '[' && n.back() == ']') n = n.substr(1, n.size() - 2);
  if (n == "fid") return ColumnId::Fid;
  if (n == "oid") return ColumnId::Oid;
  if (n == "label") return ColumnId::Label;
  if (n == "bb" || n == "bbox") return ColumnId::Bb;
  if (n == "fv") return ColumnId::Fv;
  if (n == "ts") return ColumnId::Ts;
  return std::nullopt;
}

struct Column {
  std::string name;
  ColumnKind kind;
  ColumnId id;

  friend bool operator==(const Column&, const Column&) = default;
};

struct Schema {
  std::vector<Column> columns;
  /// When set, every feature vector must have exactly this dimension.
  std::optional<std::size_t> fv_dim;

  const Column* find(std::string_view name) const {
    auto id = parse_column_id(name);
    if (!id) return nullptr;
    for (const auto& c : columns)
      if (c.id == *id) return &c;
    return nullptr;
  }

  const Column& require(std::string_view name) const {
    if (const Column* c = find(name)) return *c;
    throw Error(ErrorCode::UnknownColumn, "unknown column '" + std::string(name) + "'");
  }

  bool has(ColumnId id) const {
    return std::any_of(columns.begin(), columns.end(), [id](const Column& c) { return c.id == id; });
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

/// fid, oid, label, bb, fv, ts.
inline Schema trace_schema(std::optional<std::size_t> fv_dim = std::nullopt) {
  Schema s;
  for (ColumnId id : {ColumnId::Fid, ColumnId::Oid, ColumnId::Label, ColumnId::Bb, ColumnId::Fv,
                      ColumnId::Ts})
    s.columns.push_back({std::string(column_name(id)), column_kind(id), id});
  s.fv_dim = fv_dim;
  return s;
}

/// Scalar attribute value (group keys, comparison literals).
using ScalarValue = std::variant<std::int64_t, double, std::string>;

inline bool is_numeric(const ScalarValue& v) { return !std::holds_alternative<std::string>(v); }

inline double as_double(const ScalarValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nan("");
}

/// Total order: numbers (compared by value) before strings.
inline std::weak_ordering compare_scalar(const ScalarValue& a, const ScalarValue& b) {
  bool an = is_numeric(a), bn = is_numeric(b);
  if (an != bn) return an ? std::weak_ordering::less : std::weak_ordering::greater;
  if (!an) return std::get<std::string>(a) <=> std::get<std::string>(b);
  if (std::holds_alternative<std::int64_t>(a) && std::holds_alternative<std::int64_t>(b))
    return std::get<std::int64_t>(a) <=> std::get<std::int64_t>(b);
  double x = as_double(a), y = as_double(b);
  if (x < y) return std::weak_ordering::less;
  if (y < x) return std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

inline bool scalar_equal(const ScalarValue& a, const ScalarValue& b) {
  return compare_scalar(a, b) == std::weak_ordering::equivalent;
}

struct ScalarLess {
  bool operator()(const ScalarValue& a, const ScalarValue& b) const {
    return compare_scalar(a, b) == std::weak_ordering::less;
  }
};

/// Hash consistent with scalar_equal (1 and 1.0 collide).
struct ScalarHash {
  std::size_t operator()(const ScalarValue& v) const {
    if (!is_numeric(v)) return std::hash<std::string>{}(std::get<std::string>(v));
    double x = as_double(v);
    return std::hash<double>{}(x == 0.0 ? 0.0 : x);
  }
};

struct ScalarEq {
  bool operator()(const ScalarValue& a, const ScalarValue& b) const { return scalar_equal(a, b); }
};

inline std::string to_display(const ScalarValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    return std::string(buf, ptr);
  }
  return std::get<std::string>(v);
}

/// Read-only view of one detection, whether it lives in a relation row or
/// at some position inside an arrable row.
struct TupleView {
  std::int64_t fid;
  std::int64_t oid;
  const std::string* label;
  const BoundingBox* bb;
  const FeatureVector* fv;
  double ts;

  static TupleView of(const VTuple& t) { return {t.fid, t.oid, &t.label, &t.bb, &t.fv, t.ts}; }

  ScalarValue scalar(ColumnId id) const {
    switch (id) {
      case ColumnId::Fid: return fid;
      case ColumnId::Oid: return oid;
      case ColumnId::Ts: return ts;
      case ColumnId::Label: return *label;
      default:
        throw Error(ErrorCode::IllegalColumnKind,
                    std::string(column_name(id)) + " is not a scalar column");
    }
  }

  VTuple materialize() const { return {fid, oid, *label, *bb, *fv, ts}; }
};

struct RRelation {
  Schema schema = trace_schema();
  std::vector<VTuple> rows;
  std::string source_id;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
};

/// Canonical stream order.
inline bool stream_order_less(const VTuple& a, const VTuple& b) {
  return std::tie(a.ts, a.fid, a.oid) < std::tie(b.ts, b.fid, b.oid);
}

inline void sort_canonical(RRelation& rel) {
  std::stable_sort(rel.rows.begin(), rel.rows.end(), stream_order_less);
}

/// One group of an arrable: parallel vectors sorted on the ordering attribute.
struct ArrableRow {
  ScalarValue key;
  std::vector<std::int64_t> fids;
  std::vector<std::int64_t> oids;
  std::vector<double> tss;
  std::vector<BoundingBox> bbs;
  std::vector<FeatureVector> fvs;
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return fids.size(); }
  bool empty() const noexcept { return fids.empty(); }

  bool consistent() const noexcept {
    std::size_t n = fids.size();
    return oids.size() == n && tss.size() == n && bbs.size() == n && fvs.size() == n &&
           labels.size() == n;
  }

  TupleView at(std::size_t i) const {
    return {fids[i], oids[i], &labels[i], &bbs[i], &fvs[i], tss[i]};
  }

  void push_back(const TupleView& t) {
    fids.push_back(t.fid);
    oids.push_back(t.oid);
    tss.push_back(t.ts);
    bbs.push_back(*t.bb);
    fvs.push_back(*t.fv);
    labels.push_back(*t.label);
  }

  friend bool operator==(const ArrableRow& a, const ArrableRow& b) {
    return scalar_equal(a.key, b.key) && a.fids == b.fids && a.oids == b.oids && a.tss == b.tss &&
           a.bbs == b.bbs && a.fvs == b.fvs && a.labels == b.labels;
  }
};

struct Arrable {
  ColumnId gba = ColumnId::Oid;
  ColumnId aoa = ColumnId::Fid;
  Schema schema = trace_schema();
  std::vector<ArrableRow> rows;
  std::string source_id;

  /// Number of groups.
  std::size_t group_count() const noexcept { return rows.size(); }

  std::size_t element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
  }

  friend bool operator==(const Arrable&, const Arrable&) = default;
};

/// Flattens an arrable back into relation rows (group order, then element order).
inline std::vector<VTuple> flatten(const Arrable& ar) {
  std::vector<VTuple> out;
  out.reserve(ar.element_count());
  for (const auto& row : ar.rows)
    for (std::size_t i = 0; i < row.size(); ++i) out.push_back(row.at(i).materialize());
  return out;
}

inline bool all_finite(const BoundingBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h);
}

inline void validate_tuple(const VTuple& t, const Schema& schema = trace_schema()) {
  if (!all_finite(t.bb) || !std::isfinite(t.ts))
    throw Error(ErrorCode::NonFiniteValue, "non-finite bounding box or timestamp");
  if (t.bb.w < 0 || t.bb.h < 0)
    throw Error(ErrorCode::NegativeDimension, "bounding box with negative width or height");
  if (t.fv.dim() == 0) throw Error(ErrorCode::EmptyFeatureVector, "feature vector has no values");
  for (double v : t.fv.values)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite feature value");
  if (t.fid < 0 || t.oid < 0 || t.ts < 0)
    throw Error(ErrorCode::NonFiniteValue, "fid, oid and ts must be non-negative");
  if (schema.fv_dim && t.fv.dim() != *schema.fv_dim)
    throw Error(ErrorCode::DimensionMismatch, "feature vector has dimension " +
                                                  std::to_string(t.fv.dim()) + ", schema expects " +
                                                  std::to_string(*schema.fv_dim));
}

// -- operator/kind legality ---------------------------------------------------

/// Column uses that the type rules govern.
enum class OpKind {
  SMatch,          // similarity match
  Compare,         // =, != with a literal or another column
  OrderCompare,    // <, <=, >, >=
  Arithmetic,      // sum, avg, min, max, and col + constant
  Count,           // count(col)
  BBPattern,       // bounding-box pattern select
  EqualityJoin,    // equi-join / hash join key
  GroupOrOrder,    // R2A gba / aoa
  Direction,       // Direction(col)
  Project,
};

inline constexpr std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::SMatch: return "sMatch";
    case OpKind::Compare: return "compare";
    case OpKind::OrderCompare: return "order-compare";
    case OpKind::Arithmetic: return "arithmetic";
    case OpKind::Count: return "count";
    case OpKind::BBPattern: return "bb-pattern";
    case OpKind::EqualityJoin: return "equality-join";
    case OpKind::GroupOrOrder: return "R2A";
    case OpKind::Direction: return "Direction";
    case OpKind::Project: return "project";
  }
  return "?";
}

/// Total legality table over (operator, column kind).
inline constexpr bool is_legal(OpKind op, ColumnKind kind) {
  switch (op) {
    case OpKind::SMatch: return kind == ColumnKind::FeatureVector;
    case OpKind::Compare:
    case OpKind::EqualityJoin:
      return kind == ColumnKind::ScalarNumeric || kind == ColumnKind::Categorical ||
             kind == ColumnKind::DirectionEnum;
    case OpKind::OrderCompare: return kind == ColumnKind::ScalarNumeric || kind == ColumnKind::Categorical;
    case OpKind::Arithmetic: return kind == ColumnKind::ScalarNumeric;
    case OpKind::Count:
    case OpKind::Project: return true;
    case OpKind::BBPattern:
    case OpKind::Direction: return kind == ColumnKind::BboxVector;
    case OpKind::GroupOrOrder: return kind == ColumnKind::ScalarNumeric || kind == ColumnKind::Categorical;
  }
  return false;
}

inline void require_legal(OpKind op, const Column& column) {
  if (!is_legal(op, column.kind))
    throw Error(ErrorCode::IllegalColumnKind, std::string(to_string(op)) + " cannot be applied to " +
                                                  column.name + " (" +
                                                  std::string(to_string(column.kind)) + ")");
}

inline void kind_check(OpKind op, std::string_view column, const Schema& schema) {
  require_legal(op, schema.require(column));
}

}  // namespace cqlva
