#include <gtest/gtest.h>

#include <set>

#include "cqlva/operators.hpp"
#include "support.hpp"

using namespace cqlva;
using testing_support::code_of;
using testing_support::Gen;
using testing_support::range_fids;
using testing_support::trace_of;
using testing_support::tuple;
using testing_support::unit_vec;
namespace oracle = testing_support::oracle;

namespace {

std::vector<std::int64_t> fids_of(const Arrable& ar, std::int64_t key) {
  for (const auto& row : ar.rows)
    if (scalar_equal(row.key, ScalarValue{key})) return row.fids;
  return {};
}

std::set<oracle::KeyPair> keys(const std::vector<JoinPair>& ps) {
  std::set<oracle::KeyPair> s;
  for (const auto& p : ps) s.emplace(oracle::key_of(p.left_key), oracle::key_of(p.right_key));
  return s;
}

Arrable single_row(std::int64_t key, const std::vector<std::vector<double>>& vecs, std::int64_t first_fid = 0) {
  RRelation rel;
  rel.schema = trace_schema(vecs.front().size());
  for (std::size_t i = 0; i < vecs.size(); ++i) rel.rows.push_back(tuple(first_fid + static_cast<std::int64_t>(i), key, vecs[i]));
  return r2a(rel, ColumnId::Oid, ColumnId::Fid);
}

JoinCondition cosine_at_least(double th) { return JoinCondition::similarity(MatchCondition::make(Metric::Cosine, th)); }

// oid 1 in frames 1..11, oid 2 in frames 2 and 13.
Arrable cct_example() {
  auto v = unit_vec(4, 0);
  return r2a(trace_of({{1, {range_fids(1, 11), v}}, {2, {{2, 13}, v}}}), ColumnId::Oid, ColumnId::Fid);
}

}  // namespace

// -- R2A --

TEST(R2A, GroupsAndOrders) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(2, 1, {1}), tuple(1, 1, {1}), tuple(2, 2, {1})};
  Arrable ar = r2a(rel, ColumnId::Oid, ColumnId::Fid);
  ASSERT_EQ(ar.rows.size(), 2u);
  EXPECT_EQ(fids_of(ar, 1), (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(fids_of(ar, 2), (std::vector<std::int64_t>{2}));
}

TEST(R2A, OrdersOnTimestamp) {
  // oid 1 over frames 1..4, oid 2 in frame 2 only; grouped on oid, ordered on ts.
  auto v = unit_vec(2, 0);
  Arrable ar = r2a(trace_of({{1, {range_fids(1, 4), v}}, {2, {{2}, v}}}), ColumnId::Oid, ColumnId::Ts);
  ASSERT_EQ(ar.rows.size(), 2u);
  EXPECT_EQ(ar.rows[0].tss, (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
  EXPECT_EQ(ar.rows[1].fids, (std::vector<std::int64_t>{2}));
  EXPECT_EQ(ar.group_count(), 2u);
}

TEST(R2A, EmptyRelationGivesEmptyArrable) {
  EXPECT_TRUE(r2a(RRelation{}, ColumnId::Oid, ColumnId::Fid).rows.empty());
}

TEST(R2A, VectorColumnsCannotGroup) {
  EXPECT_EQ(code_of([] { r2a(RRelation{}, ColumnId::Fv, ColumnId::Fid); }), ErrorCode::IllegalColumnKind);
  EXPECT_EQ(code_of([] { r2a(RRelation{}, ColumnId::Oid, ColumnId::Bb); }), ErrorCode::IllegalColumnKind);
}

// -- CCT --

TEST(Cct, BothKeepsRunEnds) {
  Arrable out = cct(cct_example(), CctOption::Both);
  EXPECT_EQ(fids_of(out, 1), (std::vector<std::int64_t>{1, 11}));
  EXPECT_EQ(fids_of(out, 2), (std::vector<std::int64_t>{2, 13}));
}

TEST(Cct, FirstKeepsRunStartsAndAgreesWithRunOracle) {
  Arrable in = cct_example();
  Arrable out = cct(in, CctOption::First);
  EXPECT_EQ(fids_of(out, 1), (std::vector<std::int64_t>{1}));
  EXPECT_EQ(fids_of(out, 2), (std::vector<std::int64_t>{2, 13}));
  EXPECT_EQ(fids_of(out, 1), oracle::cct_fids(fids_of(in, 1), "first"));
  EXPECT_EQ(fids_of(out, 2), oracle::cct_fids(fids_of(in, 2), "first"));
}

TEST(Cct, SingletonRunIsUnchanged) {
  Arrable in = single_row(7, {{1.0}}, 5);
  for (auto opt : {CctOption::First, CctOption::Last, CctOption::Both})
    EXPECT_EQ(fids_of(cct(in, opt), 7), (std::vector<std::int64_t>{5}));
}

TEST(Cct, GapThresholdMergesShortGaps) {
  Arrable in = cct_example();
  EXPECT_EQ(fids_of(cct(in, CctOption::First, 11), 2), (std::vector<std::int64_t>{2}));
  EXPECT_EQ(code_of([&] { cct(in, CctOption::First, -1); }), ErrorCode::ConfigError);
}

TEST(Cct, FirstCountsDisjointAppearances) {
  auto out = cct(cct_example(), CctOption::First);
  EXPECT_EQ(aggregate(out, AggFn::Count, ColumnId::Fid), ScalarValue{std::int64_t{3}});
  EXPECT_EQ(fids_of(out, 2).size(), 2u);
}

// Property: CCT matches the run oracle, is idempotent, never grows a row,
// and FIRST leaves one element per run.
TEST(CctProperty, MatchesOracleAndIsIdempotent) {
  Gen g(5);
  const std::pair<CctOption, const char*> opts[] = {
      {CctOption::First, "first"}, {CctOption::Last, "last"}, {CctOption::Both, "both"}};
  for (int iter = 0; iter < 500; ++iter) {
    auto pal = g.palette(3, 4);
    Arrable ar = g.arrable(5, 20, 4, pal);
    for (const auto& [opt, name] : opts) {
      Arrable once = cct(ar, opt);
      ASSERT_EQ(once.rows.size(), ar.rows.size());
      for (std::size_t r = 0; r < ar.rows.size(); ++r) {
        ASSERT_EQ(once.rows[r].fids, oracle::cct_fids(ar.rows[r].fids, name));
        ASSERT_LE(once.rows[r].size(), ar.rows[r].size());
        ASSERT_TRUE(once.rows[r].consistent());
        if (opt == CctOption::First) {
          ASSERT_EQ(once.rows[r].size(), oracle::runs(ar.rows[r].fids).size());
        }
      }
      Arrable twice = cct(once, opt);
      for (std::size_t r = 0; r < ar.rows.size(); ++r) ASSERT_EQ(twice.rows[r].fids, once.rows[r].fids) << name;
    }
  }
}

// -- select / project --

TEST(Select, LabelEquality) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 1, {1}, "person"), tuple(0, 2, {1}, "car"), tuple(1, 1, {1}, "person")};
  RRelation out = select(rel, Predicate::compare(ColumnId::Label, CmpOp::Eq, std::string("person")));
  ASSERT_EQ(out.rows.size(), 2u);
  for (const auto& t : out.rows) EXPECT_EQ(t.label, "person");
}

TEST(Select, BoundingBoxRange) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 1, {1}, "person", {10, 20, 30, 20}), tuple(0, 2, {1}, "person", {500, 20, 30, 20})};
  BBPattern p{{BBComponent::range(0, 100), BBComponent::wildcard(), BBComponent::wildcard(), BBComponent::wildcard()}};
  RRelation out = select(rel, Predicate::bb(p));
  ASSERT_EQ(out.rows.size(), 1u);
  EXPECT_EQ(out.rows[0].oid, 1);
}

TEST(Select, ProbeKeepsExactMatches) {
  RRelation rel;
  rel.schema = trace_schema(3);
  rel.rows = {tuple(0, 1, {1, 0, 0}), tuple(0, 2, {0, 1, 0}), tuple(1, 1, {1, 0, 0})};
  ComparisonCounter cmp;
  RRelation out = select(rel, Predicate::probe(MatchCondition::make(Metric::Cosine, 0.85), FeatureVector{{1, 0, 0}}), &cmp);
  ASSERT_EQ(out.rows.size(), 2u);
  EXPECT_EQ(cmp.value, 3u);
}

TEST(Select, ArrableDropsEmptiedGroups) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 1, {1}, "person"), tuple(0, 2, {1}, "car"), tuple(1, 1, {1}, "car")};
  Arrable out = select(r2a(rel, ColumnId::Oid, ColumnId::Fid),
                       Predicate::compare(ColumnId::Label, CmpOp::Eq, std::string("person")));
  ASSERT_EQ(out.rows.size(), 1u);
  EXPECT_EQ(out.rows[0].fids, (std::vector<std::int64_t>{0}));
}

TEST(Select, IllegalKinds) {
  RRelation rel;
  EXPECT_EQ(code_of([&] { select(rel, Predicate::compare(ColumnId::Fv, CmpOp::Eq, std::int64_t{1})); }),
            ErrorCode::IllegalColumnKind);
  EXPECT_EQ(code_of([&] { select(rel, Predicate::compare(ColumnId::Label, CmpOp::Lt, std::string("a"), 1.0)); }),
            ErrorCode::IllegalColumnKind);
}

TEST(Project, NarrowsSchemaAndKeepsOrder) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 3, {1}), tuple(1, 1, {1}), tuple(2, 2, {1})};
  RRelation out = project(rel, {"oid"});
  ASSERT_EQ(out.schema.columns.size(), 1u);
  EXPECT_EQ(out.schema.columns[0].name, "oid");
  std::vector<std::int64_t> oids;
  for (const auto& t : out.rows) oids.push_back(t.oid);
  EXPECT_EQ(oids, (std::vector<std::int64_t>{3, 1, 2}));
}

TEST(Project, AllColumnsIsIdentity) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 3, {1})};
  std::vector<std::string> all;
  for (const auto& c : rel.schema.columns) all.push_back(c.name);
  RRelation out = project(rel, all);
  EXPECT_EQ(out.rows, rel.rows);
  EXPECT_EQ(out.schema.columns.size(), rel.schema.columns.size());
}

TEST(Project, UnknownColumn) {
  EXPECT_EQ(code_of([] { project(RRelation{}, {"speed"}); }), ErrorCode::UnknownColumn);
}

// -- joins --

TEST(NlJoin, SelfJoinFindsEveryDiagonalPair) {
  RRelation rel = trace_of({{1, {range_fids(0, 4), unit_vec(4, 0)}},
                            {2, {range_fids(0, 4), unit_vec(4, 1)}},
                            {3, {range_fids(0, 4), unit_vec(4, 2)}},
                            {4, {range_fids(0, 4), unit_vec(4, 3)}}});
  Arrable ar = r2a(rel, ColumnId::Oid, ColumnId::Fid);
  auto pairs = keys(nl_join(ar, ar, cosine_at_least(0.99)));
  EXPECT_EQ(pairs, (std::set<oracle::KeyPair>{{1, 1}, {2, 2}, {3, 3}, {4, 4}}));
}

TEST(NlJoin, OrthogonalGroupsDoNotPair) {
  EXPECT_TRUE(nl_join(single_row(1, {{1, 0}}), single_row(9, {{0, 1}}), cosine_at_least(0.5)).empty());
}

TEST(NlJoin, WitnessIsTheMatchingElement) {
  // a=[1,0] and b=[0,1] on the left; only b matches c=[0,1].
  auto pairs = nl_join(single_row(1, {{1, 0}, {0, 1}}), single_row(2, {{0, 1}}), cosine_at_least(0.9));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].left_witness, 1u);
  EXPECT_EQ(pairs[0].right_witness, 0u);
  EXPECT_EQ(oracle::key_of(pairs[0].left_key), 1);
  EXPECT_EQ(oracle::key_of(pairs[0].right_key), 2);
}

TEST(NlJoin, EvaluatesEveryElementPair) {
  std::vector<std::vector<double>> same(100, {1.0, 2.0});
  ComparisonCounter nl, c;
  nl_join(single_row(1, same), single_row(2, same), cosine_at_least(0.9), &nl);
  cjoin(single_row(1, same), single_row(2, same), cosine_at_least(0.9), &c);
  EXPECT_EQ(nl.value, 10000u);
  EXPECT_EQ(c.value, 1u);
}

TEST(NlJoin, ScalarTermsFilterElementPairs) {
  // Left element at ts must satisfy ts + 0.3 <= right ts.
  Arrable l = single_row(1, {{1, 0}, {1, 0}}, 0);  // ts 0.0, 0.1
  Arrable r = single_row(2, {{1, 0}}, 3);           // ts 0.3
  JoinCondition cond = cosine_at_least(0.5);
  cond.terms.push_back({ColumnId::Ts, CmpOp::Le, ColumnId::Ts, 0.3});
  auto pairs = nl_join(l, r, cond);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].left_witness, 0u);
}

TEST(CJoin, NeedsSimilarityCondition) {
  Arrable a = single_row(1, {{1, 0}});
  EXPECT_EQ(code_of([&] { cjoin(a, a, JoinCondition{}); }), ErrorCode::IllegalColumnKind);
  EXPECT_EQ(code_of([&] { cct_join(a, a, JoinCondition{}); }), ErrorCode::IllegalColumnKind);
}

TEST(CctJoin, MissesMidRunOnlyMatch) {
  // Left run of three; only the middle element matches the right vector.
  Arrable l = single_row(1, {{1, 0, 0}, {0, 1, 0}, {1, 0, 0}});
  Arrable r = single_row(2, {{0, 1, 0}});
  auto cond = cosine_at_least(0.9);
  EXPECT_EQ(keys(cjoin(l, r, cond)), oracle::pair_set(l, r, 0.9));
  EXPECT_EQ(keys(cjoin(l, r, cond)).size(), 1u);
  EXPECT_TRUE(cct_join(l, r, cond).empty());
}

TEST(CctJoin, FirstElementMatchesAgreeWithCJoin) {
  Arrable l = single_row(1, {{0, 1}, {1, 0}, {1, 0}});
  Arrable r = single_row(2, {{0, 1}, {1, 1}});
  auto cond = cosine_at_least(0.99);
  EXPECT_EQ(keys(cct_join(l, r, cond)), keys(cjoin(l, r, cond)));
}

TEST(CctJoin, WitnessesPointIntoUncompressedRows) {
  Arrable l = single_row(1, {{1, 0}, {1, 0}, {0, 1}});  // one run; BOTH keeps 0 and 2
  Arrable r = single_row(2, {{0, 1}});
  auto pairs = cct_join(l, r, cosine_at_least(0.9));
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].left_witness, 2u);
}

// Property: on random small instances cJoin finds exactly nl_join's pairs
// (and the oracle's), cctJoin finds a subset, and the counters are ordered.
TEST(JoinProperty, PairSetsAndComparisonCounts) {
  Gen g(17);
  for (int iter = 0; iter < 300; ++iter) {
    auto dim = static_cast<std::size_t>(g.integer(2, 6));
    auto pal = g.palette(static_cast<std::size_t>(g.integer(2, 6)), dim);
    Arrable l = g.arrable(6, 8, dim, pal), r = g.arrable(6, 8, dim, pal);
    double th = g.real(0.3, 1.0);
    auto cond = cosine_at_least(th);
    ComparisonCounter cn, cc, ct;
    auto nl = keys(nl_join(l, r, cond, &cn));
    auto cj = keys(cjoin(l, r, cond, &cc));
    auto ctj = keys(cct_join(l, r, cond, CctOption::Both, &ct));
    ASSERT_EQ(nl, oracle::pair_set(l, r, th));
    ASSERT_EQ(cj, nl);
    for (const auto& p : ctj) ASSERT_TRUE(cj.count(p));
    ASSERT_LE(cc.value, cn.value);
    ASSERT_LE(ct.value, cn.value);
    std::uint64_t runs_l = 0, runs_r = 0;
    for (const auto& row : l.rows) runs_l += oracle::runs(row.fids).size();
    for (const auto& row : r.rows) runs_r += oracle::runs(row.fids).size();
    ASSERT_LE(ct.value, 4 * runs_l * runs_r);
  }
}

TEST(HashEquiJoin, JoinsOnLabel) {
  RRelation l, r;
  l.schema = r.schema = trace_schema(1);
  l.rows = {tuple(0, 1, {1}, "person"), tuple(0, 2, {1}, "person"), tuple(0, 3, {1}, "car")};
  r.rows = {tuple(0, 7, {1}, "person"), tuple(0, 8, {1}, "person"), tuple(1, 7, {1}, "person")};
  auto rows = hash_equi_join(l, r, ColumnId::Label);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows.front(), (EquiJoinRow{0, 0}));
  EXPECT_EQ(rows[1], (EquiJoinRow{0, 1}));
  EXPECT_EQ(rows.back(), (EquiJoinRow{1, 2}));
}

TEST(HashEquiJoin, DisjointKeysGiveNothing) {
  RRelation l, r;
  l.schema = r.schema = trace_schema(1);
  l.rows = {tuple(0, 1, {1})};
  r.rows = {tuple(0, 2, {1})};
  EXPECT_TRUE(hash_equi_join(l, r, ColumnId::Oid).empty());
}

TEST(HashEquiJoin, FeatureVectorKeyIsIllegal) {
  EXPECT_EQ(code_of([] { hash_equi_join(RRelation{}, RRelation{}, ColumnId::Fv); }), ErrorCode::IllegalColumnKind);
  EXPECT_EQ(code_of([] { hash_equi_join(RRelation{}, RRelation{}, ColumnId::Bb); }), ErrorCode::IllegalColumnKind);
}

// -- Direction --

namespace {

Arrable two_boxes(BoundingBox a, BoundingBox b) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(0, 1, {1}, "person", a), tuple(1, 1, {1}, "person", b)};
  return r2a(rel, ColumnId::Oid, ColumnId::Fid);
}

}  // namespace

TEST(Direction, NorthEast) {
  EXPECT_EQ(direction(two_boxes({10, 20, 30, 20}, {13, 23, 29, 19}))[0].direction, Direction8::NE);
}

TEST(Direction, SameBoxIsStationary) {
  EXPECT_EQ(direction(two_boxes({10, 20, 30, 20}, {10, 20, 30, 20}))[0].direction, Direction8::Stationary);
}

TEST(Direction, StraightUpIsNorth) {
  EXPECT_EQ(direction(two_boxes({0, 0, 5, 5}, {0, 10, 5, 5}))[0].direction, Direction8::N);
}

TEST(Direction, AllNineSignCells) {
  for (int sx = -1; sx <= 1; ++sx)
    for (int sy = -1; sy <= 1; ++sy)
      EXPECT_EQ(std::string(to_string(classify_direction(sx * 2.5, sy * 0.5))), oracle::compass(sx, sy))
          << sx << "," << sy;
}

TEST(Direction, EpsilonZeroesSmallComponents) {
  EXPECT_EQ(classify_direction(0.4, 3, 0.5), Direction8::N);
  EXPECT_EQ(classify_direction(0.4, 0.5, 0.5), Direction8::Stationary);
}

TEST(Direction, EmptyRowIsAnError) {
  Arrable ar;
  ar.rows.emplace_back();
  ar.rows.back().key = std::int64_t{1};
  EXPECT_EQ(code_of([&] { direction(ar); }), ErrorCode::EmptyRow);
}

TEST(Direction, NeedsBoundingBoxColumn) {
  Arrable ar;
  ar.schema.columns.clear();
  EXPECT_EQ(code_of([&] { direction(ar); }), ErrorCode::UnknownColumn);
}

// Property: translation and positive scaling of the displacement leave the
// direction unchanged, and the result follows the sign oracle.
TEST(DirectionProperty, TranslationAndScalingInvariance) {
  Gen g(23);
  for (int iter = 0; iter < 2000; ++iter) {
    auto pick = [&] {
      int s = static_cast<int>(g.integer(-1, 1));
      return s * g.real(0.5, 200);
    };
    double dx = pick(), dy = pick();
    BoundingBox a{g.real(-500, 500), g.real(-500, 500), g.real(0, 50), g.real(0, 50)};
    BoundingBox b{a.x + dx, a.y + dy, g.real(0, 50), g.real(0, 50)};
    Direction8 d = direction(two_boxes(a, b))[0].direction;
    ASSERT_EQ(std::string(to_string(d)), oracle::compass(b.x - a.x, b.y - a.y));
    double tx = g.real(-1000, 1000), ty = g.real(-1000, 1000);
    BoundingBox at{a.x + tx, a.y + ty, a.w, a.h}, bt{b.x + tx, b.y + ty, b.w, b.h};
    ASSERT_EQ(direction(two_boxes(at, bt))[0].direction, d);
    double k = g.real(0.01, 100);
    ASSERT_EQ(classify_direction(dx * k, dy * k), classify_direction(dx, dy));
  }
}

// -- aggregates --

TEST(Aggregate, GroupCount) {
  auto v = unit_vec(2, 0);
  Arrable ar = r2a(trace_of({{1, {{0}, v}}, {2, {{0}, v}}, {3, {{1}, v}}}), ColumnId::Oid, ColumnId::Fid);
  EXPECT_EQ(group_count(ar), 3u);
  EXPECT_EQ(aggregate(ar, AggFn::CountStar), ScalarValue{std::int64_t{3}});
  EXPECT_EQ(group_count(Arrable{}), 0u);
  EXPECT_EQ(aggregate(Arrable{}, AggFn::CountStar), ScalarValue{std::int64_t{0}});
}

TEST(Aggregate, ScalarFunctions) {
  RRelation rel;
  rel.schema = trace_schema(1);
  rel.rows = {tuple(1, 4, {1}), tuple(2, 6, {1}), tuple(3, 8, {1})};
  EXPECT_EQ(aggregate(rel, AggFn::Sum, ColumnId::Oid), ScalarValue{std::int64_t{18}});
  EXPECT_EQ(aggregate(rel, AggFn::Avg, ColumnId::Oid), ScalarValue{6.0});
  EXPECT_EQ(aggregate(rel, AggFn::Min, ColumnId::Fid), ScalarValue{std::int64_t{1}});
  EXPECT_EQ(aggregate(rel, AggFn::Max, ColumnId::Ts), ScalarValue{0.3});
  EXPECT_EQ(aggregate(rel, AggFn::Count, ColumnId::Label), ScalarValue{std::int64_t{3}});
  EXPECT_FALSE(aggregate(RRelation{}, AggFn::Avg, ColumnId::Oid).has_value());
}

TEST(Aggregate, ArithmeticOnVectorsIsIllegal) {
  EXPECT_EQ(code_of([] { aggregate(RRelation{}, AggFn::Avg, ColumnId::Fv); }), ErrorCode::IllegalColumnKind);
  EXPECT_EQ(code_of([] { aggregate(RRelation{}, AggFn::Sum, ColumnId::Label); }), ErrorCode::IllegalColumnKind);
}
