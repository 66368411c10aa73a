#pragma once

// Query text in, result rows and counters out. Traces bind positionally to
// the query's base relations in order of first appearance.

#include <string>
#include <string_view>
#include <vector>

#include "cqlva/engine/pipeline.hpp"
#include "cqlva/query/parser.hpp"
#include "cqlva/query/planner.hpp"

namespace cqlva::engine {

struct Execution {
  plan::QueryPlan plan;
  std::vector<ResultRow> rows;
  StatsSnapshot stats;
};

/// Parses and plans without running; the catalog comes from the traces.
inline plan::QueryPlan prepare(std::string_view query, const std::vector<const RRelation*>& traces,
                               const plan::PlanOptions& options = {}) {
  ast::SelectStmt stmt = query::parse(query);
  auto names = plan::source_names(stmt);
  if (names.size() != traces.size())
    throw Error(ErrorCode::SchemaMismatch, "query reads " + std::to_string(names.size()) + " relation(s) but " +
                                               std::to_string(traces.size()) + " trace(s) were given");
  plan::Catalog catalog;
  for (std::size_t i = 0; i < names.size(); ++i) catalog.add(names[i], traces[i]->schema);
  return plan::plan(stmt, catalog, options);
}

inline Execution execute(std::string_view query, const std::vector<const RRelation*>& traces,
                         const EngineConfig& config = {}, const plan::PlanOptions& options = {}) {
  Pipeline p(prepare(query, traces, options), config);
  Execution ex{p.plan(), {}, {}};
  ex.rows = p.run(traces);
  ex.stats = p.stats();
  return ex;
}

inline Execution execute(std::string_view query, const std::vector<RRelation>& traces,
                         const EngineConfig& config = {}, const plan::PlanOptions& options = {}) {
  std::vector<const RRelation*> ptrs;
  for (const auto& t : traces) ptrs.push_back(&t);
  return execute(query, ptrs, config, options);
}

}  // namespace cqlva::engine
