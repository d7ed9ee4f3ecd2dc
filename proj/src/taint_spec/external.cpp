#include "mcpflow/resolve.hpp"
#include "mcpflow/taint_spec.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

namespace mcpflow {

namespace {

const std::set<std::string> kNetworkCalls = {
    "fetch",          "node-fetch",     "undici.fetch",   "undici.request",  "axios",
    "axios.get",      "axios.post",     "axios.put",      "axios.patch",     "axios.delete",
    "axios.request",  "got",            "got.get",        "got.post",        "http.get",
    "https.get",      "http.request",   "https.request",  "requests.get",    "requests.post",
    "requests.put",   "requests.patch", "requests.delete", "requests.request", "requests.head",
    "httpx.get",      "httpx.post",     "httpx.put",      "httpx.delete",    "httpx.request",
    "urllib.request.urlopen", "urlopen", "aiohttp.request"};

const std::set<std::string> kBodyMethods = {"text", "json", "arrayBuffer", "blob", "formData",
                                            "read", "readlines", "iter_content", "aread"};
const std::set<std::string> kBodyFields = {"text", "content", "body", "data"};

const std::set<std::string> kFileReads = {
    "fs.readFileSync", "fs.readFile", "fs.promises.readFile", "fs/promises.readFile", "readFileSync",
    "readFile",        "fs.readdirSync", "fs.promises.readdir", "fs/promises.readdir"};

const std::set<std::string> kProcessOutput = {
    "child_process.execSync", "child_process.execFileSync", "execSync", "execFileSync",
    "execAsync",              "execPromise",                "subprocess.check_output", "subprocess.getoutput",
    "subprocess.getstatusoutput", "os.popen"};

// Calls returning a completed-process object; only its output fields carry content.
const std::set<std::string> kProcessHandles = {"subprocess.run", "child_process.spawnSync", "spawnSync", "execa",
                                               "execa.command"};

const std::set<std::string> kPodLogMethods = {"read_namespaced_pod_log", "readNamespacedPodLog"};

std::string callee_name(const CallSite &cs) {
  std::string q = cs.qualified.empty() ? cs.callee : cs.qualified;
  if (q.rfind("node:", 0) == 0) q = q.substr(5);
  return q;
}

std::string lower(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_network_call(const CallSite &cs) {
  if (kNetworkCalls.count(callee_name(cs))) return true;
  if (cs.form != CalleeForm::member || !cs.object) return false;
  static const std::set<std::string> verbs = {"get", "post", "put", "patch", "delete", "request", "fetch", "head"};
  if (!verbs.count(cs.method_name())) return false;
  static const std::regex client(R"((client|session|http|axios|requests|httpx|api))");
  return std::regex_search(lower(cs.object->str()), client);
}

bool is_file_open(const CallSite &cs) {
  std::string q = callee_name(cs);
  return q == "open" || q == "io.open" || q == "aiofiles.open" || q == "codecs.open";
}

class Recognizer {
public:
  explicit Recognizer(const Program &prog) : prog_(prog) {}

  /// Kind of producer a value was obtained from ("network", "file", ...).
  std::string producer(ProcIndex proc, const ValueRef &v, int depth) const {
    if (v.is_literal() || depth <= 0) return "";
    if (v.function) return "";
    for (StmtIndex d : definitions_of(prog_, proc, v.base)) {
      const Statement &st = prog_.stmt(d);
      if (st.kind == StmtKind::call && st.call) {
        const CallSite &cs = *st.call;
        if (is_network_call(cs)) return "network";
        if (is_file_open(cs)) return "file";
        for (const CallEdge *e : prog_.call_graph.edges_at(d)) {
          if (!e->callee) continue;
          for (StmtIndex r : prog_.proc(*e->callee).statements) {
            const Statement &rs = prog_.stmt(r);
            if (rs.kind != StmtKind::ret || rs.sources.empty()) continue;
            std::string k = producer(*e->callee, rs.sources[0], depth - 1);
            if (!k.empty()) return k;
          }
        }
        // `await x` and similar wrappers lower to pass-through assigns; a
        // member call on a producer (e.g. `session.get(...)`) was checked above.
      } else if (st.kind == StmtKind::assign && st.sources.size() == 1) {
        std::string k = producer(st.procedure, st.sources[0], depth - 1);
        if (!k.empty()) return k;
      }
    }
    return "";
  }

  /// External-content kind produced by a statement, if any.
  std::string classify(StmtIndex si) const {
    const Statement &st = prog_.stmt(si);
    if (!st.target) return "";
    if (st.kind == StmtKind::call && st.call) {
      const CallSite &cs = *st.call;
      for (const CallEdge *e : prog_.call_graph.edges_at(si))
        if (e->callee) return "";
      std::string q = callee_name(cs);
      std::string m = cs.method_name();
      if (kFileReads.count(q)) return "file contents";
      if (kProcessOutput.count(q)) return "subprocess output";
      if (kProcessHandles.count(q)) return "subprocess output fields";
      if (kPodLogMethods.count(m)) return "pod logs";
      if ((m == "read_text" || m == "read_bytes") && cs.form == CalleeForm::member) return "file contents";
      if (q.size() > 11 && q.compare(q.size() - 11, 11, "open().read") == 0) return "file contents";
      if (m == "log" && lower(q).find("git") != std::string::npos) return "git log";
      if (q == "simple-git.log" || q.find("iter_commits") != std::string::npos) return "git log";
      if (m == "communicate" && cs.form == CalleeForm::member) return "subprocess output";
      if (cs.form == CalleeForm::member && cs.object && kBodyMethods.count(m)) {
        std::string k = producer(st.procedure, *cs.object, kDefaultResolveDepth);
        if (k == "network") return "network response body";
        if (k == "file") return "file contents";
      }
      return "";
    }
    if (st.kind == StmtKind::field_load && st.sources.size() == 1) {
      const ValueRef &src = st.sources[0];
      if (src.fields.empty()) return "";
      if (kBodyFields.count(src.fields.back()) || src.fields.back() == "stdout" || src.fields.back() == "stderr") {
        ValueRef base = src;
        base.fields.pop_back();
        base.kind = base.fields.empty() ? ValueKind::local : ValueKind::field_path;
        std::string k = producer(st.procedure, base, kDefaultResolveDepth);
        if (k == "network") return "network response body";
      }
    }
    return "";
  }

  /// Body-like read on a parameter receiver: a wrapper may be hiding an
  /// external response. Returns the receiver when the statement qualifies.
  std::optional<ValueRef> wrapper_candidate(StmtIndex si) const {
    const Statement &st = prog_.stmt(si);
    if (st.kind != StmtKind::call || !st.call || !st.target) return std::nullopt;
    const CallSite &cs = *st.call;
    static const std::set<std::string> methods = {"text", "json", "read", "arrayBuffer"};
    if (cs.form != CalleeForm::member || !cs.object || !methods.count(cs.method_name())) return std::nullopt;
    const Procedure &p = prog_.proc(st.procedure);
    for (std::size_t i = p.has_receiver ? 1 : 0; i < p.params.size(); ++i)
      if (p.params[i].name == cs.object->base) return cs.object;
    return std::nullopt;
  }

private:
  const Program &prog_;
};

} // namespace

std::vector<TaintSeed> recognize_external_sources(const Program &prog, Judge *judge) {
  Recognizer rec(prog);
  std::vector<TaintSeed> out;
  for (StmtIndex si = 0; si < prog.statements.size(); ++si) {
    const Statement &st = prog.stmt(si);
    std::string kind = rec.classify(si);
    TaintSeed s;
    s.procedure = st.procedure;
    s.label = TaintLabel::ext;
    s.origin = st.location;
    s.origin_stmt = si;
    if (kind == "subprocess output fields") {
      s.rationale = SeedRationale::external_recognizer;
      s.note = "subprocess output";
      for (const char *field : {"stdout", "stderr"}) {
        TaintSeed f = s;
        f.value = *st.target;
        f.value.fields.push_back(field);
        f.value.kind = ValueKind::field_path;
        out.push_back(std::move(f));
      }
      continue;
    }
    if (!kind.empty()) {
      s.value = *st.target;
      s.rationale = SeedRationale::external_recognizer;
      s.note = kind;
      out.push_back(std::move(s));
      continue;
    }
    if (!judge) continue;
    auto receiver = rec.wrapper_candidate(si);
    if (!receiver) continue;
    AdjudicationRequest req;
    req.kind = AdjudicationKind::source_controllability;
    req.slice = slice_around(prog, si, 2);
    req.subject = st.target->str() + " := " + receiver->str() + "." + st.call->method_name() + "()";
    req.context = "external content carrier (untrusted remote or file content)";
    Verdict v = judge->adjudicate_source(req);
    if (v.decision == Decision::not_controlled) continue;
    s.value = *st.target;
    s.rationale = SeedRationale::adjudicated;
    s.confidence = SeedConfidence::adjudicated;
    s.note = "body read on parameter '" + receiver->base + "'; " + v.judge_id + ": " + to_string(v.decision);
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace mcpflow
