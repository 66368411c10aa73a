#pragma once

// Window-at-a-time operators over relations and arrables: R2A, CCT, select,
// project, the three similarity joins, hash equi-join, Direction and
// aggregates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/model.hpp"
#include "cqlva/predicate.hpp"
#include "cqlva/similarity.hpp"

namespace cqlva {

// -- R2A ----------------------------------------------------------------------

/// Groups on `gba` and orders each group on `aoa` (ties: fid, then input
/// order). Groups come out in ascending key order.
inline Arrable r2a(const RRelation& rel, ColumnId gba, ColumnId aoa) {
  require_legal(OpKind::GroupOrOrder, rel.schema.require(column_name(gba)));
  require_legal(OpKind::GroupOrOrder, rel.schema.require(column_name(aoa)));

  std::vector<std::size_t> idx(rel.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i, ColumnId c) { return TupleView::of(rel.rows[i]).scalar(c); };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (auto o = compare_scalar(key(a, gba), key(b, gba)); o != 0) return o < 0;
    if (auto o = compare_scalar(key(a, aoa), key(b, aoa)); o != 0) return o < 0;
    return rel.rows[a].fid < rel.rows[b].fid;
  });

  Arrable out;
  out.gba = gba;
  out.aoa = aoa;
  out.schema = rel.schema;
  out.source_id = rel.source_id;
  for (std::size_t i : idx) {
    ScalarValue k = key(i, gba);
    if (out.rows.empty() || !scalar_equal(out.rows.back().key, k)) {
      out.rows.emplace_back();
      out.rows.back().key = std::move(k);
    }
    out.rows.back().push_back(TupleView::of(rel.rows[i]));
  }
  return out;
}

// -- CCT ----------------------------------------------------------------------

enum class CctOption { First, Last, Both };

inline constexpr std::string_view to_string(CctOption o) {
  switch (o) {
    case CctOption::First: return "first";
    case CctOption::Last: return "last";
    case CctOption::Both: return "both";
  }
  return "?";
}

inline std::optional<CctOption> parse_cct_option(std::string_view s) {
  std::string l = lowercase(s);
  if (l == "first") return CctOption::First;
  if (l == "last") return CctOption::Last;
  if (l == "both") return CctOption::Both;
  return std::nullopt;
}

/// Inclusive index range of a maximal consecutive-frame run.
struct Run {
  std::size_t start_index;
  std::size_t end_index;

  friend bool operator==(const Run&, const Run&) = default;
};

/// Splits a row into maximal runs: successive elements stay in one run while
/// their fid difference is in [0, gap_threshold].
inline std::vector<Run> find_runs(const ArrableRow& row, std::int64_t gap_threshold = 1) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!runs.empty()) {
      std::int64_t d = row.fids[i] - row.fids[i - 1];
      if (d >= 0 && d <= gap_threshold) {
        runs.back().end_index = i;
        continue;
      }
    }
    runs.push_back({i, i});
  }
  return runs;
}

/// Element positions CCT keeps for one row.
inline std::vector<std::size_t> cct_positions(const ArrableRow& row, CctOption option,
                                              std::int64_t gap_threshold = 1) {
  std::vector<std::size_t> keep;
  for (const Run& r : find_runs(row, gap_threshold)) {
    if (option != CctOption::Last) keep.push_back(r.start_index);
    if (option == CctOption::Last || (option == CctOption::Both && r.end_index != r.start_index))
      keep.push_back(r.end_index);
  }
  return keep;
}

inline ArrableRow subset(const ArrableRow& row, const std::vector<std::size_t>& positions) {
  ArrableRow out;
  out.key = row.key;
  for (std::size_t p : positions) out.push_back(row.at(p));
  return out;
}

inline Arrable cct(const Arrable& ar, CctOption option = CctOption::First,
                   std::int64_t gap_threshold = 1) {
  if (gap_threshold < 0) throw Error(ErrorCode::ConfigError, "CCT gap threshold must be >= 0");
  Arrable out = ar;
  for (auto& row : out.rows) row = subset(row, cct_positions(row, option, gap_threshold));
  return out;
}

// -- select / project -----------------------------------------------------------

inline RRelation select(const RRelation& rel, const Predicate& p, ComparisonCounter* counter = nullptr) {
  check_predicate(p, rel.schema);
  RRelation out;
  out.schema = rel.schema;
  out.source_id = rel.source_id;
  for (const auto& t : rel.rows)
    if (evaluate(p, TupleView::of(t), counter)) out.rows.push_back(t);
  return out;
}

/// Element-level filter; groups left empty are dropped.
inline Arrable select(const Arrable& ar, const Predicate& p, ComparisonCounter* counter = nullptr) {
  check_predicate(p, ar.schema);
  Arrable out = ar;
  out.rows.clear();
  for (const auto& row : ar.rows) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (evaluate(p, row.at(i), counter)) keep.push_back(i);
    if (!keep.empty()) out.rows.push_back(subset(row, keep));
  }
  return out;
}

/// Narrows the schema to `columns` (in the given order). Row data is kept;
/// consumers read only the schema's columns.
inline RRelation project(const RRelation& rel, const std::vector<std::string>& columns) {
  RRelation out;
  out.source_id = rel.source_id;
  out.schema.fv_dim = rel.schema.fv_dim;
  out.schema.columns.clear();
  for (const auto& name : columns) {
    const Column& c = rel.schema.require(name);
    out.schema.columns.push_back(c);
  }
  out.rows = rel.rows;
  return out;
}

// -- joins ----------------------------------------------------------------------

/// left.column (+ offset) <op> right.column, evaluated per element pair.
struct ScalarJoinTerm {
  ColumnId left;
  CmpOp op;
  ColumnId right;
  double left_offset = 0;
};

struct JoinCondition {
  std::optional<MatchCondition> match;  // on the fv columns of both sides
  std::vector<ScalarJoinTerm> terms;

  static JoinCondition similarity(MatchCondition m) { return {m, {}}; }
};

/// One matched object pair. Keys are the group keys (the oids for
/// gba = oid); witnesses index into the input rows.
struct JoinPair {
  ScalarValue left_key;
  ScalarValue right_key;
  std::size_t left_witness = 0;
  std::size_t right_witness = 0;
  double score = 0;
};

inline void check_join(const Schema& left, const Schema& right, const JoinCondition& cond) {
  if (cond.match) {
    require_legal(OpKind::SMatch, left.require("fv"));
    require_legal(OpKind::SMatch, right.require("fv"));
  }
  for (const auto& t : cond.terms) {
    const Column& l = left.require(column_name(t.left));
    const Column& r = right.require(column_name(t.right));
    require_legal(op_kind(t.op), l);
    require_legal(op_kind(t.op), r);
    if (t.left_offset != 0) require_legal(OpKind::Arithmetic, l);
    if (l.kind != r.kind)
      throw Error(ErrorCode::SchemaMismatch, "join compares " + l.name + " with " + r.name);
  }
}

namespace detail {

inline bool elements_match(const JoinCondition& cond, const TupleView& l, const TupleView& r,
                           ComparisonCounter* counter, double& score) {
  for (const auto& t : cond.terms)
    if (!apply_cmp(t.op, compare_scalar(shifted(l.scalar(t.left), t.left_offset), r.scalar(t.right))))
      return false;
  score = 1.0;
  if (!cond.match) return true;
  if (counter) counter->add();
  MatchResult m = smatch(*cond.match, *l.fv, *r.fv);
  score = m.score;
  return m.matched;
}

/// Shared driver. With `first_match_only`, a group pair stops at its first
/// matching element pair; otherwise every element pair is evaluated.
inline std::vector<JoinPair> group_join(const Arrable& left, const Arrable& right,
                                        const JoinCondition& cond, bool first_match_only,
                                        ComparisonCounter* counter) {
  check_join(left.schema, right.schema, cond);
  std::vector<JoinPair> out;
  for (const auto& lrow : left.rows) {
    for (const auto& rrow : right.rows) {
      std::optional<JoinPair> found;
      for (std::size_t i = 0; i < lrow.size() && !(found && first_match_only); ++i) {
        for (std::size_t j = 0; j < rrow.size(); ++j) {
          double score = 0;
          if (elements_match(cond, lrow.at(i), rrow.at(j), counter, score) && !found) {
            found = JoinPair{lrow.key, rrow.key, i, j, score};
            if (first_match_only) break;
          }
        }
      }
      if (found) out.push_back(std::move(*found));
    }
  }
  return out;
}

}  // namespace detail

/// Nested-loop join: all element pairs of all group pairs are compared; one
/// JoinPair per matching group pair, witnessed by its first match.
inline std::vector<JoinPair> nl_join(const Arrable& left, const Arrable& right,
                                     const JoinCondition& cond, ComparisonCounter* counter = nullptr) {
  return detail::group_join(left, right, cond, false, counter);
}

/// Consecutive join: a group pair is abandoned as soon as one element pair matches.
inline std::vector<JoinPair> cjoin(const Arrable& left, const Arrable& right,
                                   const JoinCondition& cond, ComparisonCounter* counter = nullptr) {
  if (!cond.match)
    throw Error(ErrorCode::IllegalColumnKind, "cJoin needs an sMatch condition on feature vectors");
  return detail::group_join(left, right, cond, true, counter);
}

/// CCT on both inputs, then a nested-loop join. Witnesses refer to positions
/// in the uncompressed inputs.
inline std::vector<JoinPair> cct_join(const Arrable& left, const Arrable& right,
                                      const JoinCondition& cond, CctOption option = CctOption::Both,
                                      ComparisonCounter* counter = nullptr,
                                      std::int64_t gap_threshold = 1) {
  if (!cond.match)
    throw Error(ErrorCode::IllegalColumnKind, "cctJoin needs an sMatch condition on feature vectors");
  auto compress = [&](const Arrable& ar, std::vector<std::vector<std::size_t>>& maps) {
    Arrable out = ar;
    for (std::size_t g = 0; g < ar.rows.size(); ++g) {
      maps.push_back(cct_positions(ar.rows[g], option, gap_threshold));
      out.rows[g] = subset(ar.rows[g], maps.back());
    }
    return out;
  };
  std::vector<std::vector<std::size_t>> lmap, rmap;
  Arrable lc = compress(left, lmap);
  Arrable rc = compress(right, rmap);
  auto pairs = nl_join(lc, rc, cond, counter);

  std::map<ScalarValue, std::size_t, ScalarLess> lpos, rpos;
  for (std::size_t g = 0; g < left.rows.size(); ++g) lpos[left.rows[g].key] = g;
  for (std::size_t g = 0; g < right.rows.size(); ++g) rpos[right.rows[g].key] = g;
  for (auto& p : pairs) {
    p.left_witness = lmap[lpos.at(p.left_key)][p.left_witness];
    p.right_witness = rmap[rpos.at(p.right_key)][p.right_witness];
  }
  return pairs;
}

struct EquiJoinRow {
  std::size_t left_index;
  std::size_t right_index;

  friend bool operator==(const EquiJoinRow&, const EquiJoinRow&) = default;
};

/// Hash equi-join on a scalar column. Output follows left order, then right
/// order within a key.
inline std::vector<EquiJoinRow> hash_equi_join(const RRelation& left, const RRelation& right,
                                               ColumnId column) {
  require_legal(OpKind::EqualityJoin, left.schema.require(column_name(column)));
  require_legal(OpKind::EqualityJoin, right.schema.require(column_name(column)));

  auto key = [&](const VTuple& t) { return TupleView::of(t).scalar(column); };
  std::unordered_map<ScalarValue, std::vector<std::size_t>, ScalarHash, ScalarEq> table;
  for (std::size_t j = 0; j < right.rows.size(); ++j) table[key(right.rows[j])].push_back(j);

  std::vector<EquiJoinRow> out;
  for (std::size_t i = 0; i < left.rows.size(); ++i) {
    auto it = table.find(key(left.rows[i]));
    if (it == table.end()) continue;
    for (std::size_t j : it->second) out.push_back({i, j});
  }
  return out;
}

// -- Direction --------------------------------------------------------------------

enum class Direction8 { N, S, E, W, NE, NW, SE, SW, Stationary };

inline constexpr std::string_view to_string(Direction8 d) {
  switch (d) {
    case Direction8::N: return "N";
    case Direction8::S: return "S";
    case Direction8::E: return "E";
    case Direction8::W: return "W";
    case Direction8::NE: return "NE";
    case Direction8::NW: return "NW";
    case Direction8::SE: return "SE";
    case Direction8::SW: return "SW";
    case Direction8::Stationary: return "STATIONARY";
  }
  return "?";
}

inline std::optional<Direction8> parse_direction(std::string_view s) {
  for (auto d : {Direction8::N, Direction8::S, Direction8::E, Direction8::W, Direction8::NE,
                 Direction8::NW, Direction8::SE, Direction8::SW, Direction8::Stationary})
    if (lowercase(to_string(d)) == lowercase(s)) return d;
  return std::nullopt;
}

/// Sign rule over the displacement (dx, dy); |component| <= epsilon counts as 0.
inline Direction8 classify_direction(double dx, double dy, double epsilon = 0) {
  int sx = std::abs(dx) <= epsilon ? 0 : (dx > 0 ? 1 : -1);
  int sy = std::abs(dy) <= epsilon ? 0 : (dy > 0 ? 1 : -1);
  static constexpr Direction8 table[3][3] = {
      // sy = -1          sy = 0            sy = +1
      {Direction8::SW, Direction8::W, Direction8::NW},          // sx = -1
      {Direction8::S, Direction8::Stationary, Direction8::N},   // sx = 0
      {Direction8::SE, Direction8::E, Direction8::NE},          // sx = +1
  };
  return table[sx + 1][sy + 1];
}

enum class DirectionAnchor { LowerLeft, Center };

struct DirectionOptions {
  double epsilon = 0;
  DirectionAnchor anchor = DirectionAnchor::LowerLeft;
};

struct DirectionRow {
  ScalarValue key;
  Direction8 direction;
};

/// Net direction per group from its first and last bounding boxes.
inline std::vector<DirectionRow> direction(const Arrable& ar, DirectionOptions opts = {}) {
  require_legal(OpKind::Direction, ar.schema.require("bb"));
  std::vector<DirectionRow> out;
  out.reserve(ar.rows.size());
  for (const auto& row : ar.rows) {
    if (row.empty())
      throw Error(ErrorCode::EmptyRow, "Direction over an empty group " + to_display(row.key));
    const BoundingBox& a = row.bbs.front();
    const BoundingBox& b = row.bbs.back();
    double dx = b.x - a.x, dy = b.y - a.y;
    if (opts.anchor == DirectionAnchor::Center) {
      dx += (b.w - a.w) / 2;
      dy += (b.h - a.h) / 2;
    }
    out.push_back({row.key, classify_direction(dx, dy, opts.epsilon)});
  }
  return out;
}

// -- aggregates -------------------------------------------------------------------

enum class AggFn { CountStar, Count, Sum, Avg, Min, Max };

inline constexpr std::string_view to_string(AggFn f) {
  switch (f) {
    case AggFn::CountStar:
    case AggFn::Count: return "count";
    case AggFn::Sum: return "sum";
    case AggFn::Avg: return "avg";
    case AggFn::Min: return "min";
    case AggFn::Max: return "max";
  }
  return "?";
}

inline std::size_t group_count(const Arrable& ar) { return ar.group_count(); }

namespace detail {

template <typename Each>
std::optional<ScalarValue> fold(AggFn fn, std::size_t n, Each&& each) {
  if (fn == AggFn::Count) return static_cast<std::int64_t>(n);
  if (n == 0) return std::nullopt;
  double acc = fn == AggFn::Min ? INFINITY : (fn == AggFn::Max ? -INFINITY : 0.0);
  bool all_int = true;
  for (std::size_t i = 0; i < n; ++i) {
    ScalarValue v = each(i);
    all_int = all_int && std::holds_alternative<std::int64_t>(v);
    double x = as_double(v);
    if (fn == AggFn::Min) acc = std::min(acc, x);
    else if (fn == AggFn::Max) acc = std::max(acc, x);
    else acc += x;
  }
  if (fn == AggFn::Avg) return acc / static_cast<double>(n);
  if (all_int) return static_cast<std::int64_t>(acc);
  return acc;
}

}  // namespace detail

/// count(*) counts rows; the others run over a column (nullopt = NULL for
/// an empty input).
inline std::optional<ScalarValue> aggregate(const RRelation& rel, AggFn fn,
                                            std::optional<ColumnId> column = {}) {
  if (fn == AggFn::CountStar) return static_cast<std::int64_t>(rel.size());
  if (!column) throw Error(ErrorCode::SchemaMismatch, "aggregate needs a column");
  const Column& c = rel.schema.require(column_name(*column));
  require_legal(fn == AggFn::Count ? OpKind::Count : OpKind::Arithmetic, c);
  return detail::fold(fn, rel.size(),
                      [&](std::size_t i) { return TupleView::of(rel.rows[i]).scalar(*column); });
}

/// Over an arrable, count(*) is the number of groups; column aggregates run
/// over every element.
inline std::optional<ScalarValue> aggregate(const Arrable& ar, AggFn fn,
                                            std::optional<ColumnId> column = {}) {
  if (fn == AggFn::CountStar) return static_cast<std::int64_t>(ar.group_count());
  if (!column) throw Error(ErrorCode::SchemaMismatch, "aggregate needs a column");
  const Column& c = ar.schema.require(column_name(*column));
  require_legal(fn == AggFn::Count ? OpKind::Count : OpKind::Arithmetic, c);
  if (fn == AggFn::Count) return static_cast<std::int64_t>(ar.element_count());
  std::vector<TupleView> views;
  views.reserve(ar.element_count());
  for (const auto& row : ar.rows)
    for (std::size_t i = 0; i < row.size(); ++i) views.push_back(row.at(i));
  return detail::fold(fn, views.size(), [&](std::size_t i) { return views[i].scalar(*column); });
}

}  // namespace cqlva
