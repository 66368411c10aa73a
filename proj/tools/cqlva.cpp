#include <iostream>

#include <CLI11.hpp>

#include "cqlva/app.hpp"

namespace {

cqlva::app::OutputFormat to_format(const std::string& s) {
  auto f = cqlva::app::parse_format(s);
  return f ? *f : cqlva::app::OutputFormat::Jsonl;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cqlva::app;
  CLI::App cli{"Continuous queries over video-analytics traces"};
  cli.require_subcommand(1);

  RunOptions run_o;
  std::string run_format = "jsonl";
  bool no_header = false;
  auto* run = cli.add_subcommand("run", "execute a query over trace files");
  run->add_option("--query,-q", run_o.query, "query file")->required();
  run->add_option("--trace,-t", run_o.traces, "trace file, repeatable; order binds to the query's relations")
      ->required();
  run->add_option("--fps", run_o.fps, "frames per second for traces without ts");
  run->add_flag("--flip-y", run_o.flip_y, "input boxes have a top-left origin");
  run->add_option("--image-height", run_o.image_height, "frame height used by --flip-y");
  run->add_option("--window", run_o.window, "kind,size[,hop] for queries without a WINDOW clause");
  run->add_option("--rate", run_o.rate, "feed rate in tuples per second (0 = unthrottled)");
  run->add_option("--quantum", run_o.quantum, "items a stage may take per scheduling turn");
  run->add_option("--config", run_o.config, "engine settings file (key = value)");
  run->add_option("--out,-o", run_o.out, "result file (default: stdout)");
  run->add_option("--stats", run_o.stats, "stats file (default: <out>.stats.json)");
  run->add_option("--format", run_format, "jsonl or table")->check(CLI::IsMember({"jsonl", "table"}));
  run->add_flag("--no-header", no_header, "omit the header line");

  EvalOptions eval_o;
  std::string eval_format = "table";
  auto* ev = cli.add_subcommand("eval", "score a result file against ground truth");
  ev->add_option("--results,-r", eval_o.results, "result file from run")->required();
  ev->add_option("--gt", eval_o.gt, "ground truth JSON")->required();
  ev->add_option("--task", eval_o.task, "pairs, count or direction")->required();
  ev->add_option("--variant", eval_o.variant, "report label, e.g. Acc(vce)");
  ev->add_option("--out,-o", eval_o.out, "also write the report as JSON");
  ev->add_option("--format", eval_format, "jsonl or table")->check(CLI::IsMember({"jsonl", "json", "table"}));

  GenOptions gen_o;
  auto* gen = cli.add_subcommand("gen", "generate a synthetic trace");
  gen->add_option("--spec", gen_o.spec, "synthetic trace spec (JSON)")->required();
  gen->add_option("--seed", gen_o.seed, "random seed");
  gen->add_option("--out,-o", gen_o.out, "trace file; .csv selects CSV (default: JSONL on stdout)");

  BenchOptions bench_o;
  std::string bench_format = "table";
  auto* bench = cli.add_subcommand("bench", "time query variants on the same traces");
  bench->add_option("--config", bench_o.config, "bench config (JSON)")->required();
  bench->add_option("--seed", bench_o.seed, "seed for a synthetic trace");
  bench->add_option("--out,-o", bench_o.out, "report file (default: stdout)");
  bench->add_option("--format", bench_format, "jsonl or table")->check(CLI::IsMember({"jsonl", "json", "table"}));

  ParseCheckOptions pc_o;
  auto* pc = cli.add_subcommand("parse-check", "parse and plan a query, print the operator tree");
  pc->add_option("--query,-q", pc_o.query, "query file")->required();
  pc->add_option("--trace,-t", pc_o.traces, "trace files to take schemas from");
  pc->add_option("--window", pc_o.window, "kind,size[,hop] for queries without a WINDOW clause");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*run) {
    run_o.format = to_format(run_format);
    run_o.header = !no_header;
    return cqlva::app::run(run_o, std::cout, std::cerr);
  }
  if (*ev) {
    eval_o.format = to_format(eval_format);
    return evaluate(eval_o, std::cout, std::cerr);
  }
  if (*gen) return cqlva::app::gen(gen_o, std::cout, std::cerr);
  if (*bench) {
    bench_o.format = to_format(bench_format);
    return cqlva::app::bench(bench_o, std::cout, std::cerr);
  }
  return parse_check(pc_o, std::cout, std::cerr);
}
