#pragma once

// Test-only reference implementations and random generators. The oracles are
// written independently of the library (different algorithms, long double
// arithmetic, brute-force enumeration) so they can freeze expected values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cqlva/model.hpp"
#include "cqlva/operators.hpp"

namespace testing_support {

using namespace cqlva;

/// The code of the Error `f` throws; nullopt when it returns normally.
inline std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// -- random generation -----------------------------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::int64_t integer(std::int64_t lo, std::int64_t hi) {  // inclusive
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return real(0, 1) < p; }

  /// Non-negative, not all zero.
  std::vector<double> vec(std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = coin(0.3) ? 0.0 : real(0, 1);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; })) v[integer(0, dim - 1)] = 1;
    return v;
  }

  /// A row of n elements with increasing fids (random gaps) and random vectors
  /// drawn from a small palette so that matches actually happen.
  ArrableRow row(std::int64_t key, std::size_t n, const std::vector<std::vector<double>>& palette) {
    ArrableRow r;
    r.key = key;
    std::int64_t fid = integer(0, 3);
    for (std::size_t i = 0; i < n; ++i) {
      VTuple t;
      t.fid = fid;
      t.oid = key;
      t.label = "person";
      t.ts = static_cast<double>(fid) / 10;
      t.bb = {real(0, 100), real(0, 100), 10, 10};
      t.fv.values = palette[static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(palette.size()) - 1))];
      r.push_back(TupleView::of(t));
      fid += coin(0.7) ? 1 : integer(2, 5);
    }
    return r;
  }

  Arrable arrable(std::size_t max_groups, std::size_t max_elems, std::size_t dim,
                  const std::vector<std::vector<double>>& palette) {
    Arrable ar;
    ar.schema = trace_schema(dim);
    auto groups = static_cast<std::size_t>(integer(1, static_cast<std::int64_t>(max_groups)));
    for (std::size_t g = 0; g < groups; ++g)
      ar.rows.push_back(row(static_cast<std::int64_t>(g + 1), static_cast<std::size_t>(integer(1, max_elems)), palette));
    return ar;
  }

  std::vector<std::vector<double>> palette(std::size_t n, std::size_t dim) {
    std::vector<std::vector<double>> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back(vec(dim));
    return p;
  }

  /// A valid trace: frames in order, unique oids per frame, ts = fid / 10.
  RRelation trace(std::int64_t frames, std::int64_t max_oid, std::size_t dim) {
    RRelation rel;
    rel.schema = trace_schema(dim);
    static const char* labels[] = {"person", "car", "bike"};
    for (std::int64_t f = 0; f < frames; ++f)
      for (std::int64_t o = 0; o <= max_oid; ++o) {
        if (!coin(0.6)) continue;
        VTuple t;
        t.fid = f;
        t.oid = o;
        t.label = labels[integer(0, 2)];
        t.ts = static_cast<double>(f) / 10;
        t.bb = {real(-50, 500), real(-50, 500), real(0, 80), real(0, 80)};
        t.fv.values = vec(dim);
        rel.rows.push_back(std::move(t));
      }
    return rel;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// -- oracles --------------------------------------------------------------------------------

namespace oracle {

inline long double dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

inline long double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double c = dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
  return c < 0 ? 0 : c;
}

/// Half the distance between the unit vectors.
inline long double euclid_unit(const std::vector<double>& a, const std::vector<double>& b) {
  long double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b)), s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    long double d = a[i] / na - b[i] / nb;
    s += d * d;
  }
  return std::sqrt(s) / 2;
}

/// Run boundaries by marking every break position first, then cutting.
inline std::vector<std::vector<std::int64_t>> runs(const std::vector<std::int64_t>& fids, std::int64_t gap = 1) {
  std::vector<bool> breaks(fids.size(), false);
  for (std::size_t i = 1; i < fids.size(); ++i) {
    std::int64_t d = fids[i] - fids[i - 1];
    breaks[i] = d < 0 || d > gap;
  }
  std::vector<std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < fids.size(); ++i) {
    if (i == 0 || breaks[i]) out.emplace_back();
    out.back().push_back(fids[i]);
  }
  return out;
}

/// Retained fids: "first", "last" or "both" of every run.
inline std::vector<std::int64_t> cct_fids(const std::vector<std::int64_t>& fids, const std::string& option,
                                          std::int64_t gap = 1) {
  std::vector<std::int64_t> out;
  for (const auto& r : runs(fids, gap)) {
    if (option == "first") out.push_back(r.front());
    else if (option == "last") out.push_back(r.back());
    else {
      out.push_back(r.front());
      if (r.size() > 1) out.push_back(r.back());
    }
  }
  return out;
}

using KeyPair = std::pair<std::int64_t, std::int64_t>;

inline std::int64_t key_of(const ScalarValue& v) { return std::get<std::int64_t>(v); }

/// Every element pair of every group pair, cosine at least th.
inline std::set<KeyPair> pair_set(const Arrable& l, const Arrable& r, double th) {
  std::set<KeyPair> out;
  for (const auto& lr : l.rows)
    for (const auto& rr : r.rows)
      for (const auto& a : lr.fvs)
        for (const auto& b : rr.fvs)
          if (cosine(a.values, b.values) >= th) out.emplace(key_of(lr.key), key_of(rr.key));
  return out;
}

inline std::string compass(double dx, double dy) {
  if (dx == 0 && dy == 0) return "STATIONARY";
  std::string s;
  if (dy > 0) s += "N";
  if (dy < 0) s += "S";
  if (dx > 0) s += "E";
  if (dx < 0) s += "W";
  return s;
}

/// Window indices containing key, by scanning every plausible index.
inline std::vector<std::size_t> windows_containing(double size, double hop, double origin, double key) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < 100000; ++i) {
    double start = origin + static_cast<double>(i) * hop;
    if (start > key) break;
    if (key < start + size) out.push_back(i);
  }
  return out;
}

struct Counts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

/// Classifies every pair of the universe product one at a time.
inline Counts confusion(const std::set<std::int64_t>& lu, const std::set<std::int64_t>& ru,
                        const std::set<KeyPair>& positives, const std::set<KeyPair>& result) {
  Counts c;
  for (auto l : lu)
    for (auto r : ru) {
      bool p = positives.count({l, r}) > 0, e = result.count({l, r}) > 0;
      if (p && e) ++c.tp;
      else if (!p && e) ++c.fp;
      else if (p && !e) ++c.fn;
      else ++c.tn;
    }
  return c;
}

}  // namespace oracle

// -- fixtures -------------------------------------------------------------------------------

inline std::vector<double> unit_vec(std::size_t dim, std::size_t axis) {
  std::vector<double> v(dim, 0.0);
  v[axis] = 1.0;
  return v;
}

inline VTuple tuple(std::int64_t fid, std::int64_t oid, std::vector<double> fv, std::string label = "person",
                    BoundingBox bb = {10, 20, 30, 20}, double fps = 10) {
  VTuple t;
  t.fid = fid;
  t.oid = oid;
  t.label = std::move(label);
  t.bb = bb;
  t.fv.values = std::move(fv);
  t.ts = static_cast<double>(fid) / fps;
  return t;
}

/// Builds a trace from (oid -> fids) with a fixed vector per object.
inline RRelation trace_of(const std::map<std::int64_t, std::pair<std::vector<std::int64_t>, std::vector<double>>>& objs,
                          double fps = 10) {
  std::vector<VTuple> rows;
  for (const auto& [oid, spec] : objs)
    for (auto f : spec.first) rows.push_back(tuple(f, oid, spec.second, "person", {10, 20, 30, 20}, fps));
  std::sort(rows.begin(), rows.end(), [](const VTuple& a, const VTuple& b) {
    return std::tie(a.fid, a.oid) < std::tie(b.fid, b.oid);
  });
  RRelation rel;
  rel.schema = trace_schema(rows.empty() ? std::nullopt : std::optional(rows.front().fv.dim()));
  rel.rows = std::move(rows);
  return rel;
}

inline std::vector<std::int64_t> range_fids(std::int64_t lo, std::int64_t hi) {  // [lo, hi]
  std::vector<std::int64_t> v;
  for (auto f = lo; f <= hi; ++f) v.push_back(f);
  return v;
}

/// The robustness fixture: left oids 1,2,3,5 and right oids 1,3 with
/// vectors chosen so cosine >= 0.9 pairs (2,1), (3,3) and (5,3) while the
/// truth is (1,1), (3,3).
inline RRelation robustness_left(std::int64_t frames = 6) {
  auto v5 = unit_vec(8, 2);
  v5[3] = 0.1;
  return trace_of({{1, {range_fids(0, frames - 1), unit_vec(8, 0)}},
                   {2, {range_fids(0, frames - 1), unit_vec(8, 1)}},
                   {3, {range_fids(0, frames - 1), unit_vec(8, 2)}},
                   {5, {range_fids(0, frames - 1), v5}}});
}

inline RRelation robustness_right(std::int64_t frames = 6) {
  return trace_of({{1, {range_fids(0, frames - 1), unit_vec(8, 1)}}, {3, {range_fids(0, frames - 1), unit_vec(8, 2)}}});
}

/// One unmatched object with a vector orthogonal to everything else.
inline RRelation noise_trace(std::size_t axis, std::int64_t frames = 6) {
  return trace_of({{0, {range_fids(0, frames - 1), unit_vec(8, axis)}}});
}

}  // namespace testing_support
