#include "mcpflow/taint_engine.hpp"

#include <algorithm>
#include <deque>

namespace mcpflow {

std::uint8_t label_bit(TaintLabel l) { return l == TaintLabel::req ? kReqBit : kExtBit; }

namespace {

const std::set<std::string> kMutators = {"push", "append", "extend", "add", "set", "update", "insert", "unshift",
                                         "setdefault", "appendleft"};

bool callable_value(const ValueRef &v) { return v.function.has_value(); }

void collect_functions(const Statement &st, std::vector<ProcIndex> &out) {
  auto take = [&](const ValueRef &v) {
    if (v.function) out.push_back(*v.function);
  };
  for (const auto &s : st.sources) take(s);
  if (st.call) {
    for (const auto &a : st.call->args) take(a);
    if (st.call->callee_value) take(*st.call->callee_value);
    if (st.call->object) take(*st.call->object);
  }
}

} // namespace

bool AnalysisScope::active(const Program &program, StmtIndex s) const {
  return procedures.count(program.stmt(s).procedure) && !excluded.count(s);
}

AnalysisScope make_analysis_scope(const Program &program, ProcIndex anchor, const std::set<StmtIndex> &excluded) {
  AnalysisScope scope;
  scope.anchor = anchor;
  scope.excluded = excluded;
  std::deque<ProcIndex> work{anchor};
  scope.procedures.insert(anchor);
  while (!work.empty()) {
    ProcIndex p = work.front();
    work.pop_front();
    std::vector<ProcIndex> next;
    for (StmtIndex s : program.proc(p).statements) {
      if (excluded.count(s)) continue;
      const Statement &st = program.stmt(s);
      if (st.kind == StmtKind::call)
        for (const CallEdge *e : program.call_graph.edges_at(s))
          if (e->callee) next.push_back(*e->callee);
      collect_functions(st, next);
    }
    for (ProcIndex q : next)
      if (q < program.procedures.size() && scope.procedures.insert(q).second) work.push_back(q);
  }
  return scope;
}

AnalysisScope make_analysis_scope(const Program &program, const Entrypoint &ep) {
  return make_analysis_scope(program, ep.scope ? ep.scope->procedure : ep.handler, ep.excluded);
}

std::vector<FlowInstance> flow_instances(const Program &program, const AnalysisScope &scope, StmtIndex s) {
  std::vector<FlowInstance> out;
  const Statement &st = program.stmt(s);
  const ProcIndex p = st.procedure;
  const Procedure &proc = program.proc(p);

  auto reads_of = [&](const ValueRef &v, std::vector<FactKey> &dst) {
    if (v.is_literal() || callable_value(v) || v.base.empty()) return;
    Location loc = Location::of(v);
    dst.push_back({p, loc});
    for (const auto &c : proc.captures)
      if (c.name == v.base && c.outer != p) dst.push_back({c.outer, loc});
  };
  auto simple = [&](const char *rule, const FactKey &write) {
    FlowInstance fi;
    fi.stmt = s;
    fi.rule = rule;
    fi.write = write;
    for (const auto &src : st.sources) reads_of(src, fi.reads);
    if (!fi.reads.empty()) out.push_back(std::move(fi));
  };

  switch (st.kind) {
  case StmtKind::assign:
    if (st.target) simple(rule::assign, {p, Location::of(*st.target)});
    break;
  case StmtKind::field_load:
  case StmtKind::field_store:
    if (st.target) simple(rule::field, {p, Location::of(*st.target)});
    break;
  case StmtKind::assemble:
    if (st.target) simple(rule::assemble, {p, Location::of(*st.target)});
    break;
  case StmtKind::ret:
    simple(rule::ret, {p, Location{kReturnSlot, {}}});
    break;
  case StmtKind::call: {
    if (!st.call) break;
    const CallSite &cs = *st.call;
    std::vector<ProcIndex> callees;
    bool unresolved = false;
    auto edges = program.call_graph.edges_at(s);
    for (const CallEdge *e : edges) {
      if (e->callee && scope.procedures.count(*e->callee)) {
        if (std::find(callees.begin(), callees.end(), *e->callee) == callees.end()) callees.push_back(*e->callee);
      } else {
        unresolved = true;
      }
    }
    if (edges.empty()) unresolved = true;
    std::sort(callees.begin(), callees.end());
    for (ProcIndex q : callees) {
      const Procedure &qp = program.proc(q);
      const std::size_t offset = qp.has_receiver ? 1 : 0;
      for (std::size_t i = 0; i < cs.args.size(); ++i) {
        std::optional<std::size_t> j;
        const std::string name = i < cs.arg_names.size() ? cs.arg_names[i] : "";
        if (!name.empty()) {
          for (std::size_t k = 0; k < qp.params.size(); ++k)
            if (qp.params[k].name == name) j = k;
        } else if (i + offset < qp.params.size()) {
          j = i + offset;
        } else if (!qp.params.empty() && qp.params.back().rest) {
          j = qp.params.size() - 1;
        }
        if (!j) continue;
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::argument;
        fi.write = {q, Location{qp.params[*j].name, {}}};
        reads_of(cs.args[i], fi.reads);
        if (!fi.reads.empty()) out.push_back(std::move(fi));
      }
      if (qp.has_receiver && cs.object && !qp.params.empty()) {
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::argument;
        fi.write = {q, Location{qp.params[0].name, {}}};
        reads_of(*cs.object, fi.reads);
        if (!fi.reads.empty()) out.push_back(std::move(fi));
      }
      // Captured variables enter the closure's frame at the call.
      for (const auto &c : qp.captures) {
        if (!scope.procedures.count(c.outer)) continue;
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::argument;
        fi.write = {q, Location{c.name, {}}};
        fi.reads.push_back({c.outer, Location{c.name, {}}});
        out.push_back(std::move(fi));
      }
      if (st.target) {
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::ret;
        fi.write = {p, Location::of(*st.target)};
        fi.reads.push_back({q, Location{kReturnSlot, {}}});
        out.push_back(std::move(fi));
      }
    }
    if (unresolved) {
      if (st.target) {
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::pass;
        fi.write = {p, Location::of(*st.target)};
        if (cs.object) reads_of(*cs.object, fi.reads);
        for (const auto &a : cs.args) reads_of(a, fi.reads);
        if (!fi.reads.empty()) out.push_back(std::move(fi));
      }
      if (cs.form == CalleeForm::member && cs.object && !cs.object->is_literal() && kMutators.count(cs.method_name())) {
        FlowInstance fi;
        fi.stmt = s;
        fi.rule = rule::mutate;
        fi.write = {p, Location::of(*cs.object)};
        for (const auto &a : cs.args) reads_of(a, fi.reads);
        if (!fi.reads.empty()) out.push_back(std::move(fi));
      }
    }
    break;
  }
  case StmtKind::branch:
  case StmtKind::exit:
    break;
  }
  return out;
}

// --- TaintState ------------------------------------------------------------------------

namespace {

template <class Map, class Fn> void for_related(const Map &m, ProcIndex proc, const Location &loc, Fn fn) {
  FactKey lo{proc, Location{loc.base, {}}};
  for (auto it = m.lower_bound(lo); it != m.end(); ++it) {
    if (it->first.first != proc || it->first.second.base != loc.base) break;
    if (locations_related(it->first.second, loc)) fn(it);
  }
}

} // namespace

std::uint8_t TaintState::read(const FactKey &key) const {
  std::uint8_t lab = 0;
  for_related(labels, key.first, key.second, [&](auto it) { lab |= it->second; });
  return lab;
}

TaintState transfer(const Program &program, const AnalysisScope &scope, TaintState state, StmtIndex s) {
  if (!scope.active(program, s)) return state;
  // Evaluate every instance against the incoming state, then apply.
  std::vector<std::pair<const FlowInstance *, std::uint8_t>> updates;
  auto instances = flow_instances(program, scope, s);
  for (const auto &fi : instances) {
    std::uint8_t lab = 0;
    for (const auto &r : fi.reads) lab |= state.read(r);
    if (lab) updates.push_back({&fi, lab});
  }
  for (auto [fi, lab] : updates) {
    auto &cur = state.labels[fi->write];
    if ((cur | lab) != cur) {
      if (!cur) state.witness[fi->write] = {s, fi->rule};
      cur |= lab;
    }
  }
  return state;
}

// --- regions --------------------------------------------------------------------------------

std::optional<std::size_t> ReachRegion::find(const FactKey &key) const {
  auto it = index.find(key);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> ReachRegion::related(ProcIndex proc, const Location &loc) const {
  std::vector<std::size_t> out;
  for_related(index, proc, loc, [&](auto it) { out.push_back(it->second); });
  return out;
}

std::uint8_t ReachRegion::labels_at(ProcIndex proc, const Location &loc) const {
  std::uint8_t lab = 0;
  for (std::size_t i : related(proc, loc)) lab |= labels[i];
  return lab;
}

std::set<std::tuple<ProcIndex, Location, std::uint8_t>> ReachRegion::snapshot() const {
  std::set<std::tuple<ProcIndex, Location, std::uint8_t>> out;
  for (std::size_t i = 0; i < facts.size(); ++i) out.insert({facts[i].first, facts[i].second, labels[i]});
  return out;
}

namespace {

struct InstanceTable {
  std::vector<FlowInstance> all;
  std::map<std::pair<ProcIndex, std::string>, std::vector<std::size_t>> readers;
  std::map<std::pair<ProcIndex, std::string>, std::vector<std::size_t>> writers;

  InstanceTable(const Program &program, const AnalysisScope &scope) {
    for (ProcIndex p : scope.procedures)
      for (StmtIndex s : program.proc(p).statements) {
        if (scope.excluded.count(s)) continue;
        for (auto &fi : flow_instances(program, scope, s)) {
          std::size_t id = all.size();
          for (const auto &r : fi.reads) {
            auto &v = readers[{r.first, r.second.base}];
            if (v.empty() || v.back() != id) v.push_back(id);
          }
          writers[{fi.write.first, fi.write.second.base}].push_back(id);
          all.push_back(std::move(fi));
        }
      }
  }
};

bool past_deadline(const EngineLimits &limits) {
  return limits.deadline && std::chrono::steady_clock::now() > *limits.deadline;
}

} // namespace

std::vector<SeedFact> seed_facts(const std::vector<TaintSeed> &seeds) {
  std::vector<SeedFact> out;
  for (const auto &s : seeds) {
    if (s.value.is_literal()) continue;
    out.push_back({{s.procedure, Location::of(s.value)}, label_bit(s.label)});
  }
  return out;
}

ReachRegion reach_forward(const Program &program, const AnalysisScope &scope, const std::vector<SeedFact> &seeds,
                          const EngineLimits &limits) {
  ReachRegion region;
  region.direction = RegionDirection::forward;
  InstanceTable table(program, scope);
  std::set<FlowEdge> edge_set;
  std::set<StmtIndex> passthrough;

  std::deque<std::size_t> work;
  std::vector<char> queued(table.all.size(), 0);
  auto enqueue_readers = [&](const FactKey &k) {
    auto it = table.readers.find({k.first, k.second.base});
    if (it == table.readers.end()) return;
    for (std::size_t id : it->second)
      if (!queued[id]) {
        queued[id] = 1;
        work.push_back(id);
      }
  };
  // Returns true when the fact was created or gained labels.
  auto merge = [&](const FactKey &k, std::uint8_t lab, std::optional<std::size_t> via) {
    auto it = region.index.find(k);
    if (it == region.index.end()) {
      std::size_t id = region.facts.size();
      region.index.emplace(k, id);
      region.facts.push_back(k);
      region.labels.push_back(lab);
      region.witness.push_back(via);
      ++region.updates;
      return true;
    }
    std::uint8_t &cur = region.labels[it->second];
    if ((cur | lab) == cur) return false;
    cur |= lab;
    ++region.updates;
    return true;
  };

  for (const auto &sd : seeds) {
    if (sd.labels && merge(sd.key, sd.labels, std::nullopt)) enqueue_readers(sd.key);
  }

  std::size_t steps = 0;
  while (!work.empty()) {
    if (region.updates > limits.max_fact_updates) {
      region.incomplete = true;
      region.incomplete_reason = "fact update cap exceeded (" + std::to_string(limits.max_fact_updates) + ")";
      break;
    }
    if ((steps++ & 255) == 0 && past_deadline(limits)) {
      region.incomplete = true;
      region.incomplete_reason = "per-entrypoint deadline reached";
      break;
    }
    std::size_t id = work.front();
    work.pop_front();
    queued[id] = 0;
    const FlowInstance &fi = table.all[id];
    std::uint8_t lab = 0;
    std::vector<std::size_t> from;
    for (const auto &r : fi.reads)
      for (std::size_t n : region.related(r.first, r.second)) {
        lab |= region.labels[n];
        from.push_back(n);
      }
    if (!lab) continue;
    if (fi.rule == rule::pass) passthrough.insert(fi.stmt);
    bool existed = region.index.count(fi.write) > 0;
    std::optional<std::size_t> first_edge;
    // Edges are recorded before the target exists so the witness can point at one.
    std::size_t to = existed ? region.index.at(fi.write) : region.facts.size();
    for (std::size_t n : from) {
      FlowEdge e{n, to, fi.stmt, fi.rule};
      if (n == to) continue;
      if (edge_set.insert(e).second) {
        region.edges.push_back(e);
        if (!first_edge) first_edge = region.edges.size() - 1;
      }
    }
    if (merge(fi.write, lab, existed ? std::nullopt : first_edge)) enqueue_readers(fi.write);
  }
  region.passthrough = passthrough.size();
  return region;
}

ReachRegion reach_backward(const Program &program, const AnalysisScope &scope, const std::vector<FactKey> &targets,
                           const EngineLimits &limits) {
  ReachRegion region;
  region.direction = RegionDirection::backward;
  InstanceTable table(program, scope);
  std::deque<std::size_t> work;
  auto add = [&](const FactKey &k) {
    if (region.index.count(k)) return;
    std::size_t id = region.facts.size();
    region.index.emplace(k, id);
    region.facts.push_back(k);
    region.labels.push_back(kReqBit | kExtBit);
    region.witness.push_back(std::nullopt);
    ++region.updates;
    work.push_back(id);
  };
  for (const auto &t : targets) add(t);
  std::size_t steps = 0;
  while (!work.empty()) {
    if (region.updates > limits.max_fact_updates) {
      region.incomplete = true;
      region.incomplete_reason = "fact update cap exceeded (" + std::to_string(limits.max_fact_updates) + ")";
      break;
    }
    if ((steps++ & 255) == 0 && past_deadline(limits)) {
      region.incomplete = true;
      region.incomplete_reason = "per-entrypoint deadline reached";
      break;
    }
    FactKey node = region.facts[work.front()];
    work.pop_front();
    auto it = table.writers.find({node.first, node.second.base});
    if (it == table.writers.end()) continue;
    for (std::size_t id : it->second) {
      const FlowInstance &fi = table.all[id];
      if (!locations_related(fi.write.second, node.second)) continue;
      for (const auto &r : fi.reads) add(r);
    }
  }
  return region;
}

} // namespace mcpflow
