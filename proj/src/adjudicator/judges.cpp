#include "mcpflow/adjudicator.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>

namespace mcpflow {

std::string to_string(AdjudicationKind k) {
  return k == AdjudicationKind::source_controllability ? "source_controllability" : "guard_effectiveness";
}

std::string to_string(Decision d) {
  switch (d) {
  case Decision::controlled: return "controlled";
  case Decision::not_controlled: return "not_controlled";
  case Decision::blocks: return "blocks";
  case Decision::not_blocks: return "not_blocks";
  case Decision::unknown: return "unknown";
  }
  return "unknown";
}

std::string AdjudicationRequest::key() const {
  std::ostringstream os;
  os << to_string(kind) << '\x1f' << entrypoint_id << '\x1f' << subject << '\x1f' << context << '\x1f'
     << slice.path << ':' << slice.first_line << '-' << slice.last_line << '\x1f' << slice.text;
  return os.str();
}

Verdict within_domain(AdjudicationKind kind, Verdict v) {
  bool source_domain = v.decision == Decision::controlled || v.decision == Decision::not_controlled;
  bool guard_domain = v.decision == Decision::blocks || v.decision == Decision::not_blocks;
  if ((kind == AdjudicationKind::source_controllability && guard_domain) ||
      (kind == AdjudicationKind::guard_effectiveness && source_domain)) {
    v.rationale = "out-of-domain answer '" + to_string(v.decision) + "' discarded";
    v.decision = Decision::unknown;
  }
  return v;
}

// --- heuristic -----------------------------------------------------------------------

namespace {

bool has_hard_constraint(const std::string &text) {
  static const std::regex coercion(R"(\b(int|float|Number|parseInt|parseFloat|bool|Boolean|Math\.floor|Math\.trunc)\s*\()");
  static const std::regex closed_set_py(R"(\bin\s*[\(\[\{]\s*(['"][^'"]*['"]\s*,\s*)+['"][^'"]*['"]\s*,?\s*[\)\]\}])");
  static const std::regex closed_set_js(R"(\[\s*(['"][^'"]*['"]\s*,\s*)+['"][^'"]*['"]\s*\]\s*\.\s*includes\s*\()");
  return std::regex_search(text, coercion) || std::regex_search(text, closed_set_py) ||
         std::regex_search(text, closed_set_js);
}

} // namespace

Verdict HeuristicJudge::adjudicate_source(const AdjudicationRequest &req) {
  Verdict v;
  v.judge_id = id();
  if (has_hard_constraint(req.slice.text)) {
    v.decision = Decision::not_controlled;
    v.rationale = "value is coerced or restricted to a closed literal set";
  } else {
    v.decision = Decision::controlled;
    v.rationale = "no hard constraint visible in the slice";
  }
  return v;
}

Verdict HeuristicJudge::adjudicate_guard(const AdjudicationRequest &) {
  Verdict v;
  v.judge_id = id();
  v.decision = Decision::not_blocks;
  v.rationale = "guard is not a recognized suppression idiom";
  return v;
}

// --- prompt ------------------------------------------------------------------------------

std::string render_prompt(const AdjudicationRequest &req) {
  std::ostringstream os;
  if (req.kind == AdjudicationKind::source_controllability) {
    os << "You are a security analyst reviewing the server side of an MCP tool.\n"
       << "Decide whether the highlighted value is still materially controlled by the\n"
       << (req.context.empty() ? std::string("requester") : req.context) << " at the point shown.\n\n";
  } else {
    os << "You are a security analyst reviewing a candidate data-flow path in an MCP server.\n"
       << "Decide whether the guard shown eliminates attacker influence on the sensitive\n"
       << "operation that follows it.\n\n";
  }
  os << "Procedure: " << req.slice.procedure << " (" << req.slice.path << ":" << req.slice.first_line << "-"
     << req.slice.last_line << ")\n"
     << "Value or guard: " << req.subject << "\n\n"
     << "```\n"
     << req.slice.text << (req.slice.text.empty() || req.slice.text.back() == '\n' ? "" : "\n") << "```\n\n";
  if (req.kind == AdjudicationKind::source_controllability)
    os << "Question: is this value requester-controlled (or, for external content, an untrusted\n"
       << "external-content carrier)?\n";
  else
    os << "Question: does this guard block the attack?\n";
  os << "Answer with exactly one word, YES or NO, on the first line, then one short sentence.\n";
  return os.str();
}

Decision parse_reply(AdjudicationKind kind, const std::string &reply) {
  std::string lower;
  for (char c : reply) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // First alphabetic token decides.
  std::size_t b = lower.find_first_of("abcdefghijklmnopqrstuvwxyz");
  if (b == std::string::npos) return Decision::unknown;
  std::size_t e = lower.find_first_not_of("abcdefghijklmnopqrstuvwxyz_", b);
  std::string word = lower.substr(b, e == std::string::npos ? std::string::npos : e - b);
  bool yes = word == "yes" || word == "controlled" || word == "blocks" || word == "true";
  bool no = word == "no" || word == "not_controlled" || word == "not_blocks" || word == "false";
  if (!yes && !no) return Decision::unknown;
  if (kind == AdjudicationKind::source_controllability) return yes ? Decision::controlled : Decision::not_controlled;
  return yes ? Decision::blocks : Decision::not_blocks;
}

// --- remote ---------------------------------------------------------------------------------

namespace {

RemoteJudge::Transport http_transport(std::string endpoint, double timeout, std::string token_env) {
  return [endpoint, timeout, token_env](const std::string &prompt, std::string &error) -> std::optional<std::string> {
    static const std::regex url_re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, url_re)) {
      error = "unsupported judge endpoint (plain http://host[:port]/path expected): " + endpoint;
      return std::nullopt;
    }
    int port = m[2].matched ? std::stoi(m[2].str()) : 80;
    std::string path = m[3].matched ? m[3].str() : "/";
    httplib::Client cli(m[1].str(), port);
    auto secs = static_cast<time_t>(timeout);
    auto usecs = static_cast<time_t>((timeout - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (!token_env.empty())
      if (const char *tok = std::getenv(token_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + tok);
    nlohmann::json body = {{"prompt", prompt}};
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      error = "judge transport error: " + httplib::to_string(res.error());
      return std::nullopt;
    }
    if (res->status != 200) {
      error = "judge endpoint returned HTTP " + std::to_string(res->status);
      return std::nullopt;
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      for (const char *k : {"answer", "text", "content"})
        if (j.contains(k) && j[k].is_string()) return j[k].get<std::string>();
    }
    return res->body;
  };
}

} // namespace

RemoteJudge::RemoteJudge(std::string endpoint, double timeout_seconds, std::string token_env)
    : transport_(http_transport(std::move(endpoint), timeout_seconds, std::move(token_env))) {}

RemoteJudge::RemoteJudge(Transport transport) : transport_(std::move(transport)) {}

Verdict RemoteJudge::ask(const AdjudicationRequest &req) {
  std::string error;
  auto reply = transport_(render_prompt(req), error);
  if (!reply) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      degradations_.push_back(error.empty() ? "judge transport failure" : error);
    }
    Verdict v = req.kind == AdjudicationKind::source_controllability ? fallback_.adjudicate_source(req)
                                                                       : fallback_.adjudicate_guard(req);
    v.rationale = "remote judge unavailable; " + v.rationale;
    return v;
  }
  Verdict v;
  v.judge_id = id();
  v.decision = parse_reply(req.kind, *reply);
  auto nl = reply->find('\n');
  v.rationale = nl == std::string::npos ? *reply : reply->substr(nl + 1);
  return v;
}

Verdict RemoteJudge::adjudicate_source(const AdjudicationRequest &req) { return ask(req); }
Verdict RemoteJudge::adjudicate_guard(const AdjudicationRequest &req) { return ask(req); }

std::vector<std::string> RemoteJudge::degradations() const {
  std::lock_guard<std::mutex> lock(mu_);
  return degradations_;
}

// --- scripted ---------------------------------------------------------------------------------

ScriptedJudge::ScriptedJudge(std::vector<Rule> rules, Decision source_default, Decision guard_default)
    : rules_(std::move(rules)), source_default_(source_default), guard_default_(guard_default) {}

Verdict ScriptedJudge::decide(const AdjudicationRequest &req, Decision fallback) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
  }
  Verdict v;
  v.judge_id = id();
  v.decision = fallback;
  v.rationale = "scripted default";
  for (const auto &r : rules_) {
    if (r.kind != req.kind) continue;
    if (req.subject.find(r.needle) != std::string::npos || req.context.find(r.needle) != std::string::npos ||
        req.slice.text.find(r.needle) != std::string::npos) {
      v.decision = r.decision;
      v.rationale = "scripted rule '" + r.needle + "'";
      break;
    }
  }
  return v;
}

Verdict ScriptedJudge::adjudicate_source(const AdjudicationRequest &req) { return decide(req, source_default_); }
Verdict ScriptedJudge::adjudicate_guard(const AdjudicationRequest &req) { return decide(req, guard_default_); }

std::size_t ScriptedJudge::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

// --- memo ---------------------------------------------------------------------------------------

Verdict MemoJudge::adjudicate_source(const AdjudicationRequest &req) {
  std::string k = req.key();
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
  }
  Verdict v = within_domain(req.kind, inner_->adjudicate_source(req));
  std::lock_guard<std::mutex> lock(mu_);
  return memo_.emplace(k, v).first->second;
}

Verdict MemoJudge::adjudicate_guard(const AdjudicationRequest &req) {
  std::string k = req.key();
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
  }
  Verdict v = within_domain(req.kind, inner_->adjudicate_guard(req));
  std::lock_guard<std::mutex> lock(mu_);
  return memo_.emplace(k, v).first->second;
}

} // namespace mcpflow
