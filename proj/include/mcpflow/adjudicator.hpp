#pragma once

// Pluggable judge for ambiguous source-controllability and guard questions.

#include "mcpflow/model.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mcpflow {

enum class AdjudicationKind { source_controllability, guard_effectiveness };

enum class Decision { controlled, not_controlled, blocks, not_blocks, unknown };

std::string to_string(AdjudicationKind k);
std::string to_string(Decision d);

struct AdjudicationRequest {
  AdjudicationKind kind = AdjudicationKind::source_controllability;
  CodeSlice slice;
  std::string entrypoint_id;
  /// Value or guard under question, rendered as text.
  std::string subject;
  /// Free-form framing, e.g. "request argument" or "external content carrier".
  std::string context;

  /// Content key used by the per-scan memo.
  std::string key() const;
};

struct Verdict {
  Decision decision = Decision::unknown;
  std::string rationale;
  std::string judge_id; ///< "remote", "heuristic" or "scripted"
};

class Judge {
public:
  virtual ~Judge() = default;
  virtual Verdict adjudicate_source(const AdjudicationRequest &req) = 0;
  virtual Verdict adjudicate_guard(const AdjudicationRequest &req) = 0;
  virtual std::string id() const = 0;
  /// Degradation notes accumulated so far (remote failures and the like).
  virtual std::vector<std::string> degradations() const { return {}; }
};

/// Offline fallback. Sources: controlled unless the slice shows a hard
/// constraint (numeric coercion, closed literal set). Guards: not_blocks.
class HeuristicJudge : public Judge {
public:
  Verdict adjudicate_source(const AdjudicationRequest &req) override;
  Verdict adjudicate_guard(const AdjudicationRequest &req) override;
  std::string id() const override { return "heuristic"; }
};

/// Sends a rendered prompt to an endpoint; falls back to the heuristic
/// judge on transport failure and records the degradation.
class RemoteJudge : public Judge {
public:
  /// Returns the reply text, or nullopt on transport failure.
  using Transport = std::function<std::optional<std::string>(const std::string &prompt, std::string &error)>;

  RemoteJudge(std::string endpoint, double timeout_seconds, std::string token_env);
  /// Test seam: replaces the HTTP transport.
  RemoteJudge(Transport transport);

  Verdict adjudicate_source(const AdjudicationRequest &req) override;
  Verdict adjudicate_guard(const AdjudicationRequest &req) override;
  std::string id() const override { return "remote"; }
  std::vector<std::string> degradations() const override;

private:
  Verdict ask(const AdjudicationRequest &req);

  Transport transport_;
  HeuristicJudge fallback_;
  mutable std::mutex mu_;
  std::vector<std::string> degradations_;
};

/// Deterministic stub: the first rule whose needle occurs in the subject,
/// context or slice text decides; otherwise the default applies.
class ScriptedJudge : public Judge {
public:
  struct Rule {
    AdjudicationKind kind;
    std::string needle;
    Decision decision;
  };
  ScriptedJudge(std::vector<Rule> rules, Decision source_default, Decision guard_default);

  Verdict adjudicate_source(const AdjudicationRequest &req) override;
  Verdict adjudicate_guard(const AdjudicationRequest &req) override;
  std::string id() const override { return "scripted"; }

  /// Number of requests answered so far.
  std::size_t calls() const;

private:
  Verdict decide(const AdjudicationRequest &req, Decision fallback);
  std::vector<Rule> rules_;
  Decision source_default_, guard_default_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

/// Per-scan memo keyed by request content; safe under concurrent calls.
class MemoJudge : public Judge {
public:
  explicit MemoJudge(std::shared_ptr<Judge> inner) : inner_(std::move(inner)) {}
  Verdict adjudicate_source(const AdjudicationRequest &req) override;
  Verdict adjudicate_guard(const AdjudicationRequest &req) override;
  std::string id() const override { return inner_->id(); }
  std::vector<std::string> degradations() const override { return inner_->degradations(); }

private:
  std::shared_ptr<Judge> inner_;
  std::mutex mu_;
  std::map<std::string, Verdict> memo_;
};

/// Prompt text: role, code slice, one yes/no question, answer format.
std::string render_prompt(const AdjudicationRequest &req);

/// Maps a reply to a decision in the request kind's domain.
Decision parse_reply(AdjudicationKind kind, const std::string &reply);

/// Guards a judge against answering outside the request's domain.
Verdict within_domain(AdjudicationKind kind, Verdict v);

} // namespace mcpflow
