#include "mcpflow/taint_engine.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace mcpflow {

std::string to_string(PathDirection d) { return d == PathDirection::request_side ? "request_side" : "return_side"; }

std::string CandidatePath::root_cause() const {
  std::string last = steps.size() >= 2 ? steps[steps.size() - 2].rule : std::string(rule::seed);
  return last + "/" + sink.rule_id;
}

std::vector<SinkTarget> sink_targets(const Program &program, const AnalysisScope &scope,
                                     const std::vector<SinkSite> &sinks) {
  std::vector<SinkTarget> out;
  for (const auto &s : sinks) {
    if (!scope.active(program, s.stmt)) continue;
    SinkTarget t;
    t.stmt = s.stmt;
    t.procedure = program.stmt(s.stmt).procedure;
    t.rule_id = s.rule_id;
    for (const auto &v : s.operands(program))
      if (!v.is_literal() && !v.function) t.operands.push_back(Location::of(v));
    for (const auto &v : s.bound_operands(program))
      if (!v.is_literal() && !v.function) t.bound.push_back(Location::of(v));
    t.op = s;
    if (!t.operands.empty() || !t.bound.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<SinkTarget> sink_targets(const Program &program, const std::vector<ReturnSink> &sinks) {
  std::vector<SinkTarget> out;
  for (const auto &r : sinks) {
    SinkTarget t;
    t.stmt = r.stmt;
    t.procedure = program.stmt(r.stmt).procedure;
    t.rule_id = "return";
    if (!r.value.is_literal() && !r.value.function) t.operands.push_back(Location::of(r.value));
    t.ret = r;
    out.push_back(std::move(t));
  }
  return out;
}

PathBuildResult intersect_and_build_paths(const Program &program, const PathContext &ctx,
                                          const ReachRegion &backward, PathDirection direction,
                                          const std::vector<TaintSeed> &seeds,
                                          const std::vector<SinkTarget> &sinks, const EngineLimits &limits) {
  PathBuildResult result;
  const ReachRegion &fwd = *ctx.forward;
  const std::uint8_t bit = direction == PathDirection::request_side ? kReqBit : kExtBit;
  const TaintLabel want = direction == PathDirection::request_side ? TaintLabel::req : TaintLabel::ext;
  const std::size_t n = fwd.facts.size();

  std::vector<char> in_both(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    in_both[i] = (fwd.labels[i] & bit) && !backward.related(fwd.facts[i].first, fwd.facts[i].second).empty();

  std::vector<std::vector<std::size_t>> out_edges(n), in_edges(n);
  for (std::size_t e = 0; e < fwd.edges.size(); ++e) {
    const FlowEdge &fe = fwd.edges[e];
    if (fe.from >= n || fe.to >= n || !in_both[fe.from] || !in_both[fe.to]) continue;
    out_edges[fe.from].push_back(e);
    in_edges[fe.to].push_back(e);
  }
  auto edge_order = [&](std::size_t a, std::size_t b) {
    const FlowEdge &x = fwd.edges[a], &y = fwd.edges[b];
    return std::tie(x.stmt, x.rule, x.to) < std::tie(y.stmt, y.rule, y.to);
  };
  for (auto &v : out_edges) std::sort(v.begin(), v.end(), edge_order);

  std::set<StmtIndex> return_stmts;
  if (direction == PathDirection::return_side)
    for (const auto &k : sinks) return_stmts.insert(k.stmt);

  std::size_t budget = limits.path_expansion_budget;

  for (const auto &k : sinks) {
    // Facts adjacent to the sink operands (0 = no, 1 = operand, 2 = bound only).
    std::vector<char> end(n, 0);
    for (const auto &op : k.operands)
      for (std::size_t i : fwd.related(k.procedure, op))
        if (in_both[i]) end[i] = 1;
    for (const auto &op : k.bound)
      for (std::size_t i : fwd.related(k.procedure, op))
        if (in_both[i] && !end[i]) end[i] = 2;
    auto edge_ok = [&](std::size_t e) {
      StmtIndex s = fwd.edges[e].stmt;
      return !(return_stmts.count(s) && s != k.stmt);
    };
    std::vector<char> can_reach(n, 0);
    std::deque<std::size_t> work;
    for (std::size_t i = 0; i < n; ++i)
      if (end[i]) {
        can_reach[i] = 1;
        work.push_back(i);
      }
    while (!work.empty()) {
      std::size_t x = work.front();
      work.pop_front();
      for (std::size_t e : in_edges[x]) {
        if (!edge_ok(e)) continue;
        std::size_t f = fwd.edges[e].from;
        if (!can_reach[f]) {
          can_reach[f] = 1;
          work.push_back(f);
        }
      }
    }

    for (const auto &seed : seeds) {
      if (seed.label != want || seed.value.is_literal()) continue;
      auto start = fwd.find({seed.procedure, Location::of(seed.value)});
      if (!start || !can_reach[*start]) continue;
      std::size_t found = 0;
      std::vector<std::size_t> stack;
      std::vector<char> on_path(n, 0);

      auto emit = [&](std::size_t last) {
        if (found == limits.max_paths_per_pair) {
          result.truncated = true;
          ++found;
          return;
        }
        CandidatePath path;
        path.direction = direction;
        if (ctx.entrypoint) {
          path.entrypoint_id = ctx.entrypoint->id;
          path.tool = ctx.entrypoint->tool;
          path.handler = ctx.entrypoint->handler;
        }
        path.seed = seed;
        path.sink = k;
        PathStep first;
        first.stmt = seed.origin_stmt;
        first.rule = rule::seed;
        first.procedure = seed.procedure;
        first.value = Location::of(seed.value);
        first.location = seed.origin;
        path.steps.push_back(first);
        for (std::size_t e : stack) {
          const FlowEdge &fe = fwd.edges[e];
          PathStep st;
          st.stmt = fe.stmt;
          st.rule = fe.rule;
          st.procedure = fwd.facts[fe.to].first;
          st.value = fwd.facts[fe.to].second;
          st.location = program.stmt(fe.stmt).location;
          path.steps.push_back(st);
        }
        const Location &reached = fwd.facts[last].second;
        PathStep fin;
        fin.stmt = k.stmt;
        fin.rule = rule::sink;
        fin.procedure = k.procedure;
        fin.location = program.stmt(k.stmt).location;
        const auto &pool = end[last] == 1 ? k.operands : k.bound;
        for (const auto &op : pool)
          if (locations_related(op, reached)) {
            fin.value = op;
            break;
          }
        path.via_bound_operand = end[last] == 2;
        path.steps.push_back(fin);
        result.paths.push_back(std::move(path));
        ++found;
      };

      std::function<void(std::size_t)> dfs = [&](std::size_t node) {
        if (found > limits.max_paths_per_pair) return;
        if (budget == 0) {
          result.truncated = true;
          return;
        }
        --budget;
        if (end[node]) {
          emit(node);
          return;
        }
        on_path[node] = 1;
        for (std::size_t e : out_edges[node]) {
          if (!edge_ok(e)) continue;
          std::size_t to = fwd.edges[e].to;
          if (on_path[to] || !can_reach[to]) continue;
          stack.push_back(e);
          dfs(to);
          stack.pop_back();
        }
        on_path[node] = 0;
      };
      dfs(*start);
    }
  }
  return result;
}

std::vector<std::string> validate_path(const Program &program, const AnalysisScope &scope,
                                       const CandidatePath &path) {
  std::vector<std::string> errors;
  const auto &steps = path.steps;
  if (steps.size() < 2) {
    errors.push_back("path has fewer than two steps");
    return errors;
  }
  const PathStep &first = steps.front();
  if (first.rule != rule::seed) errors.push_back("first step is not the seed");
  if (first.procedure != path.seed.procedure || first.value != Location::of(path.seed.value))
    errors.push_back("first step value differs from the declared seed");
  for (std::size_t i = 1; i + 1 < steps.size(); ++i) {
    const PathStep &prev = steps[i - 1], &cur = steps[i];
    if (!cur.stmt) {
      errors.push_back("step " + std::to_string(i) + " has no statement");
      continue;
    }
    if (!scope.active(program, *cur.stmt)) {
      errors.push_back("step " + std::to_string(i) + " uses an inactive statement");
      continue;
    }
    bool justified = false;
    for (const auto &fi : flow_instances(program, scope, *cur.stmt)) {
      if (fi.rule != cur.rule || fi.write != FactKey{cur.procedure, cur.value}) continue;
      for (const auto &r : fi.reads)
        if (r.first == prev.procedure && locations_related(r.second, prev.value)) justified = true;
      if (justified) break;
    }
    if (!justified)
      errors.push_back("step " + std::to_string(i) + " (" + cur.rule + " at " + program.stmt(*cur.stmt).id +
                       ") is not justified by a rule instance");
  }
  const PathStep &last = steps.back();
  const PathStep &before = steps[steps.size() - 2];
  if (last.rule != rule::sink) errors.push_back("last step is not a sink step");
  if (!last.stmt || *last.stmt != path.sink.stmt) errors.push_back("last step is not at the sink statement");
  bool operand = false;
  for (const auto &op : path.sink.operands) operand |= op == last.value;
  for (const auto &op : path.sink.bound) operand |= op == last.value;
  if (!operand) errors.push_back("last step value is not a sink operand");
  if (before.procedure != last.procedure || !locations_related(before.value, last.value))
    errors.push_back("sink operand is not the value carried by the previous step");
  return errors;
}

} // namespace mcpflow
