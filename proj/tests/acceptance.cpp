// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "cqlva/engine/execute.hpp"
#include "cqlva/eval.hpp"
#include "cqlva/ingest.hpp"
#include "cqlva/query/parser.hpp"
#include "cqlva/query/render.hpp"
#include "cqlva/windows.hpp"
#include "support.hpp"

using namespace cqlva;
namespace ts = testing_support;
namespace oracle = testing_support::oracle;

namespace {

/// Thrown by `require` with a short explanation of what went wrong.
struct Failed {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failed{why};
}

int failures = 0;

void criterion(const char* id, const char* what, const std::function<void()>& body) {
  std::string detail;
  try {
    body();
  } catch (const Failed& f) {
    detail = f.why;
  } catch (const std::exception& e) {
    detail = std::string("unexpected exception: ") + e.what();
  }
  if (detail.empty()) {
    std::cout << "[PASS] " << id << " " << what << "\n";
  } else {
    ++failures;
    std::cout << "[FAIL] " << id << " " << what << ": " << detail << "\n";
  }
  std::cout.flush();
}

std::string sample(const std::string& name) {
  std::ifstream in(std::string(CQLVA_SAMPLES_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string with_join(const std::string& join) {
  std::string q = sample("q3_join.cqlva");
  q.replace(q.find("cJoin"), 5, join);
  return q;
}

eval::ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  eval::ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  c.tn = tn;
  return c;
}

std::string show(const eval::ConfusionCounts& c) {
  return "TP=" + std::to_string(c.tp) + " FP=" + std::to_string(c.fp) + " FN=" + std::to_string(c.fn) +
         " TN=" + std::to_string(c.tn);
}

std::set<eval::ObjectId> oids(const RRelation& r) {
  std::set<eval::ObjectId> s;
  for (const auto& t : r.rows) s.insert(t.oid);
  return s;
}

/// Objects walking across the frame for the whole trace, one basis vector each.
RRelation walkers(std::int64_t objects, std::int64_t frames, std::size_t dim = 16) {
  SynthSpec s;
  s.frames = frames;
  s.fps = 10;
  s.fv_dim = dim;
  for (std::int64_t i = 0; i < objects; ++i) {
    SynthObject o;
    o.oid = i;
    o.label = i % 4 == 3 ? "car" : "person";
    o.bb = {static_cast<double>(30 * i), 50, 20, 40};
    o.vx = i % 2 ? 1.5 : -1;
    o.vy = i % 3 ? 0.5 : -0.25;
    o.fv = ts::unit_vec(dim, static_cast<std::size_t>(i) % dim);
    s.objects.push_back(o);
  }
  return generate(s, 7);
}

plan::PlanOptions time_window(double size, double hop) { return {WindowSpec::make(WindowKind::Time, size, hop)}; }

double seconds(const std::function<void()>& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fids(const std::vector<std::int64_t>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "}";
}

}  // namespace

int main() {
  criterion("AC1", "accuracy golden values", [] {
    struct Case {
      eval::ConfusionCounts c;
      std::int64_t num, den;
      const char* text;
    };
    for (const auto& k : {Case{counts(1, 2, 1, 11), 4, 5, "80.0%"}, Case{counts(1, 2, 1, 4), 5, 8, "62.5%"},
                          Case{counts(4, 0, 0, 12), 1, 1, "100.0%"}}) {
      auto a = eval::accuracy_exact(k.c);
      require(a == eval::Rational::of(k.num, k.den), show(k.c) + " gives " + a.percent());
      require(a.percent() == k.text, show(k.c) + " prints " + a.percent());
    }
  });

  criterion("AC2", "self-join identity at 10 objects x 200 frames", [] {
    RRelation r = walkers(10, 200);
    std::set<eval::ObjectPair> identity;
    for (auto o : oids(r)) identity.emplace(o, o);
    eval::PairGroundTruth gt(oids(r), oids(r), identity);
    double t = seconds([&] {
      for (const char* join : {"JOIN", "cJoin", "CCTJOIN"}) {
        auto ex = engine::execute(with_join(join), std::vector<RRelation>{r, r});
        auto c = eval::confusion_pairs(eval::pairs_from_rows(ex.rows), gt);
        require(eval::accuracy_exact(c) == eval::Rational::of(1, 1), std::string(join) + ": " + show(c));
      }
    });
    require(t < 5, "took " + std::to_string(t) + " s");
  });

  criterion("AC3", "noise objects move 62.5% to 80.0%", [] {
    RRelation l = ts::robustness_left(), r = ts::robustness_right();
    RRelation l2 = concat_traces(l, ts::noise_trace(4), 6), r2 = concat_traces(r, ts::noise_trace(5), 4);
    for (const char* join : {"JOIN", "cJoin", "CCTJOIN"}) {
      auto score = [&](const RRelation& a, const RRelation& b) {
        auto ex = engine::execute(with_join(join), std::vector<RRelation>{a, b});
        return eval::confusion_pairs(eval::pairs_from_rows(ex.rows),
                                     eval::PairGroundTruth(oids(a), oids(b), {{1, 1}, {3, 3}}));
      };
      auto before = score(l, r), after = score(l2, r2);
      require(before == counts(1, 2, 1, 4), std::string(join) + " before: " + show(before));
      require(after == counts(1, 2, 1, 11), std::string(join) + " after: " + show(after));
      require(eval::accuracy_exact(before).percent() == "62.5%" && eval::accuracy_exact(after).percent() == "80.0%",
              std::string(join) + ": accuracy text");
    }
  });

  criterion("AC4", "join equivalence on 200 random instances", [] {
    ts::Gen g(2024);
    double t = seconds([&] {
      for (int iter = 0; iter < 200; ++iter) {
        auto dim = static_cast<std::size_t>(g.integer(2, 6));
        auto pal = g.palette(static_cast<std::size_t>(g.integer(2, 6)), dim);
        Arrable l = g.arrable(6, 8, dim, pal), r = g.arrable(6, 8, dim, pal);
        double th = g.real(0.3, 1.0);
        auto cond = JoinCondition::similarity(MatchCondition::make(Metric::Cosine, th));
        auto keys = [](const std::vector<JoinPair>& ps) {
          std::set<oracle::KeyPair> s;
          for (const auto& p : ps) s.emplace(oracle::key_of(p.left_key), oracle::key_of(p.right_key));
          return s;
        };
        auto nl = keys(nl_join(l, r, cond)), cj = keys(cjoin(l, r, cond)), ct = keys(cct_join(l, r, cond));
        require(nl == oracle::pair_set(l, r, th), "nl_join disagrees with the brute-force oracle");
        require(cj == nl, "cjoin pairs differ from nl_join at instance " + std::to_string(iter));
        require(std::includes(cj.begin(), cj.end(), ct.begin(), ct.end()),
                "cct_join pair outside cjoin at instance " + std::to_string(iter));
      }
    });
    require(t < 30, "took " + std::to_string(t) + " s");
  });

  criterion("AC5", "comparison dominance at 50 groups x 100 elements", [] {
    std::map<std::int64_t, std::pair<std::vector<std::int64_t>, std::vector<double>>> objs;
    for (std::int64_t o = 1; o <= 50; ++o) objs[o] = {ts::range_fids(0, 99), {0.6, 0.8, 0.0}};
    Arrable ar = r2a(ts::trace_of(objs), ColumnId::Oid, ColumnId::Fid);
    auto cond = JoinCondition::similarity(MatchCondition::make(Metric::Cosine, 0.9));
    ComparisonCounter nl, cj, ct;
    auto pn = nl_join(ar, ar, cond, &nl);
    auto pc = cjoin(ar, ar, cond, &cj);
    auto pt = cct_join(ar, ar, cond, CctOption::Both, &ct);
    require(pn.size() == 2500 && pc.size() == 2500 && pt.size() == 2500, "every group pair should match");
    std::string c = " (nl " + std::to_string(nl.value) + ", cjoin " + std::to_string(cj.value) + ", cct " +
                    std::to_string(ct.value) + ")";
    require(cj.value * 100 <= nl.value, "cjoin above nl/100" + c);
    require(ct.value <= 4u * 50u * 50u, "cct_join above 4*50*50" + c);
    require(cj.value * 10 <= nl.value && ct.value * 10 <= nl.value, "ratio under 10x" + c);
  });

  criterion("AC6", "doubling the trace doubles tuples_in, wall time at most 3x", [] {
    RRelation small = walkers(20, 2000, 4), big = walkers(20, 4000, 4);
    require(big.rows.size() == 2 * small.rows.size(), "generated traces are not 1:2");
    for (const char* q : {"q1_search.cqlva", "q2_count.cqlva", "q4_direction.cqlva"}) {
      std::string text = sample(q);
      auto run = [&](const RRelation& r) {
        return engine::execute(text, std::vector<RRelation>{r}, {}, time_window(10, 10));
      };
      auto a = run(small), b = run(big);
      require(a.stats.stages.size() == b.stats.stages.size(), std::string(q) + ": plans differ");
      for (std::size_t i = 0; i < a.stats.stages.size(); ++i)
        require(b.stats.stages[i].tuples_in == 2 * a.stats.stages[i].tuples_in,
                std::string(q) + " " + a.stats.stages[i].name + ": " + std::to_string(a.stats.stages[i].tuples_in) +
                    " then " + std::to_string(b.stats.stages[i].tuples_in));
      std::vector<double> ta, tb;
      for (int rep = 0; rep < 5; ++rep) {
        ta.push_back(seconds([&] { run(small); }));
        tb.push_back(seconds([&] { run(big); }));
      }
      double ratio = eval::median(tb) / eval::median(ta);
      require(ratio <= 3, std::string(q) + ": time ratio " + std::to_string(ratio));
    }
  });

  criterion("AC7", "CCT keeps run ends", [] {
    auto v = ts::unit_vec(4, 0);
    Arrable in = r2a(ts::trace_of({{1, {ts::range_fids(1, 11), v}}, {2, {{2, 13}, v}}}), ColumnId::Oid,
                     ColumnId::Fid);
    const std::pair<CctOption, const char*> opts[] = {{CctOption::Both, "both"}, {CctOption::First, "first"}};
    const std::vector<std::int64_t> expect[2][2] = {{{1, 11}, {2, 13}}, {{1}, {2, 13}}};
    for (int k = 0; k < 2; ++k) {
      Arrable out = cct(in, opts[k].first);
      require(out.rows.size() == 2, "groups lost");
      for (int g = 0; g < 2; ++g) {
        require(out.rows[g].fids == expect[k][g],
                std::string(opts[k].second) + " row " + std::to_string(g) + " kept " + fids(out.rows[g].fids));
        require(out.rows[g].fids == oracle::cct_fids(in.rows[g].fids, opts[k].second), "oracle disagrees");
      }
    }
  });

  criterion("AC8", "direction cells and invariance on 5000 boxes", [] {
    for (int sx = -1; sx <= 1; ++sx)
      for (int sy = -1; sy <= 1; ++sy) {
        std::string got(to_string(classify_direction(sx * 3.0, sy * 0.75)));
        require(got == oracle::compass(sx, sy), "cell (" + std::to_string(sx) + "," + std::to_string(sy) + ") gave " + got);
      }
    ts::Gen g(808);
    auto one = [](BoundingBox a, BoundingBox b) {
      RRelation rel;
      rel.schema = trace_schema(1);
      rel.rows = {ts::tuple(0, 1, {1}, "person", a), ts::tuple(1, 1, {1}, "person", b)};
      return direction(r2a(rel, ColumnId::Oid, ColumnId::Fid))[0].direction;
    };
    for (int iter = 0; iter < 5000; ++iter) {
      auto pick = [&] { return static_cast<double>(g.integer(-1, 1)) * g.real(0.5, 300); };
      double dx = pick(), dy = pick();
      BoundingBox a{g.real(-500, 500), g.real(-500, 500), g.real(0, 50), g.real(0, 50)};
      BoundingBox b{a.x + dx, a.y + dy, g.real(0, 50), g.real(0, 50)};
      Direction8 d = one(a, b);
      require(std::string(to_string(d)) == oracle::compass(b.x - a.x, b.y - a.y), "sign rule broken");
      double tx = g.real(-1000, 1000), ty = g.real(-1000, 1000);
      require(one({a.x + tx, a.y + ty, a.w, a.h}, {b.x + tx, b.y + ty, b.w, b.h}) == d, "not translation invariant");
      double k = g.real(0.01, 100);
      require(classify_direction(dx * k, dy * k) == classify_direction(dx, dy), "not scale invariant");
    }
  });

  criterion("AC9", "count, join and direction queries parse, plan and run", [] {
    RRelation r;
    r.schema = trace_schema(4);
    for (std::int64_t f = 0; f < 40; ++f) {
      r.rows.push_back(ts::tuple(f, 1, ts::unit_vec(4, 0), "person", {static_cast<double>(f), 0, 5, 5}));
      r.rows.push_back(ts::tuple(f, 2, ts::unit_vec(4, 1), "person", {100, static_cast<double>(f), 5, 5}));
      r.rows.push_back(ts::tuple(f, 3, ts::unit_vec(4, 2), "car"));
    }
    for (const char* f : {"q2_count.cqlva", "q3_join.cqlva", "q4_direction.cqlva"}) {
      auto a = query::parse(sample(f));
      require(query::parse(query::render(a)) == a, std::string(f) + ": render round trip differs");
    }
    auto q2 = engine::execute(sample("q2_count.cqlva"), std::vector<RRelation>{r});
    require(q2.rows.size() == 1 && q2.rows[0].fields["count(*)"] == 2, "count query: " + engine::to_jsonl(q2.rows));
    auto q3 = engine::execute(sample("q3_join.cqlva"), std::vector<RRelation>{r, r});
    require(q3.rows.size() == 3, "join query: " + engine::to_jsonl(q3.rows));
    for (const auto& row : q3.rows) require(row.fields["AR1.oid"] == row.fields["AR2.oid"], "join paired distinct objects");
    auto q4 = engine::execute(sample("q4_direction.cqlva"), std::vector<RRelation>{r});
    require(q4.rows.size() == 2 && q4.rows[0].fields["direction"] == "E" && q4.rows[1].fields["direction"] == "N",
            "direction query: " + engine::to_jsonl(q4.rows));
    for (const char* bad : {"SELECT avg([FV]) FROM R1", "SELECT R1.oid FROM R1 JOIN R2 ON R1.[FV] = R2.[FV]"}) {
      auto code = ts::code_of([&] {
        RRelation e;
        e.schema = trace_schema(4);
        auto stmt = query::parse(bad);
        std::vector<const RRelation*> srcs(plan::source_names(stmt).size(), &e);
        engine::prepare(bad, srcs);
      });
      require(code == ErrorCode::IllegalColumnKind, std::string("not rejected: ") + bad);
    }
  });

  criterion("AC10", "identical result files across rates and quanta", [] {
    RRelation r = walkers(3, 20, 4);
    auto dir = std::filesystem::temp_directory_path() / ("cqlva_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    for (double rate : {0.0, 100.0})
      for (int quantum : {1, 256}) {
        engine::EngineConfig c;
        c.rate = rate;
        c.quantum = quantum;
        auto ex = engine::execute(with_join("cJoin"), std::vector<RRelation>{r, r}, c, time_window(0.5, 0.25));
        auto path = dir / ("rate" + std::to_string(static_cast<int>(rate)) + "_q" + std::to_string(quantum) + ".jsonl");
        std::ofstream(path, std::ios::binary) << engine::to_jsonl(ex.rows);
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files.push_back(ss.str());
      }
    std::filesystem::remove_all(dir);
    require(!files[0].empty(), "no result rows");
    for (std::size_t i = 1; i < files.size(); ++i) require(files[i] == files[0], "file " + std::to_string(i) + " differs");
  });

  criterion("AC11", "window accounting over [0, 300)", [] {
    auto stream = [](double size, double hop, std::vector<std::size_t>& during, std::vector<std::size_t>& flushed) {
      WindowManager m(WindowSpec::make(WindowKind::Time, size, hop, 0.0));
      std::size_t most = 0;
      for (int t = 0; t < 300; ++t) {
        most = std::max(most, m.assign(t).size());
        for (const auto& w : m.close_windows(t)) during.push_back(w.index);
      }
      for (const auto& w : m.close_windows(300)) during.push_back(w.index);
      for (const auto& w : m.flush()) flushed.push_back(w.index);
      return most;
    };
    std::vector<std::size_t> d1, f1, d2, f2;
    stream(100, 100, d1, f1);
    require(d1.size() + f1.size() == 3, "disjoint windows closed " + std::to_string(d1.size() + f1.size()));
    std::size_t most = stream(100, 50, d2, f2);
    require(d2 == std::vector<std::size_t>{0, 1, 2, 3, 4}, std::to_string(d2.size()) + " full rolling windows");
    require(f2 == std::vector<std::size_t>{5}, std::to_string(f2.size()) + " partial windows flushed");
    require(most <= 2, "a tuple fell in " + std::to_string(most) + " windows");
  });

  return failures == 0 ? 0 : 1;
}
