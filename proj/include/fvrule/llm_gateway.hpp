#pragma once

// Every model call goes through LlmGateway::call(kind, placeholders).
// The gateway renders the registered template, bounds concurrency, retries
// retryable provider failures and archives prompt/response pairs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fvrule/errors.hpp"
#include "fvrule/text.hpp"

namespace fvrule {

enum class PromptKind { GenerateSva, BuildOpTreeLayer, JudgeApplicability, AdaptRules };

inline const char* prompt_kind_name(PromptKind k) {
  switch (k) {
    case PromptKind::GenerateSva: return "GenerateSva";
    case PromptKind::BuildOpTreeLayer: return "BuildOpTreeLayer";
    case PromptKind::JudgeApplicability: return "JudgeApplicability";
    case PromptKind::AdaptRules: return "AdaptRules";
  }
  return "GenerateSva";
}

inline std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
  for (auto k : {PromptKind::GenerateSva, PromptKind::BuildOpTreeLayer,
                 PromptKind::JudgeApplicability, PromptKind::AdaptRules})
    if (s == prompt_kind_name(k)) return k;
  return std::nullopt;
}

using Placeholders = std::map<std::string, std::string>;

struct PromptTemplate {
  PromptKind kind;
  std::vector<std::string> placeholders;
  std::string text;  // {name} marks a placeholder
};

inline const PromptTemplate& prompt_template(PromptKind kind) {
  static const std::vector<PromptTemplate> templates = {
      {PromptKind::GenerateSva,
       {"nl_spec", "design_context", "rules", "shots"},
       "You translate natural-language hardware specifications into one SystemVerilog "
       "assertion.\n"
       "Signals: {design_context}\n"
       "Examples:\n{shots}\n"
       "Correction rules to follow:\n{rules}\n"
       "Specification: {nl_spec}\n"
       "Reply with the assertion only, inside a ```systemverilog code block."},
      {PromptKind::BuildOpTreeLayer,
       {"layer", "nl_spec", "design_context", "golden_sva", "failing_sva", "path",
        "asked_questions", "rejected_question"},
       "A generated assertion disagrees with the reference.\n"
       "Specification: {nl_spec}\n"
       "Signals: {design_context}\n"
       "Reference: {golden_sva}\n"
       "Generated: {failing_sva}\n"
       "Reasoning so far:\n{path}\n"
       "Layer: {layer}\n"
       "Questions already asked at this step (ask something different):\n{asked_questions}\n"
       "Rejected as repetitive: {rejected_question}\n"
       "Reply with one line 'Question: ...' and one line 'Answer: ...'. On the "
       "RuleGeneration layer add one line 'Rule: ...' naming the operators to use."},
      {PromptKind::JudgeApplicability,
       {"nl_spec", "trace"},
       "Specification: {nl_spec}\n"
       "Candidate reasoning trace:\n{trace}\n"
       "How applicable is this trace's rule to the specification? Reply with a single "
       "decimal number between 0 and 1."},
      {PromptKind::AdaptRules,
       {"nl_spec", "design_context", "traces", "operator_definitions"},
       "Operator definitions:\n{operator_definitions}\n"
       "Reasoning traces from similar problems, with design signals masked:\n{traces}\n"
       "Target specification: {nl_spec}\n"
       "Target signals: {design_context}\n"
       "Rewrite the applicable rules for the target, replacing placeholders with target "
       "signals. Reply with one 'Rule: ...' line per rule."},
  };
  for (const auto& t : templates)
    if (t.kind == kind) return t;
  throw Error(ErrorCode::Config, "no template registered");
}

inline std::string render_prompt(PromptKind kind, const Placeholders& values) {
  const auto& tpl = prompt_template(kind);
  std::string out = tpl.text;
  for (const auto& name : tpl.placeholders) {
    auto it = values.find(name);
    if (it == values.end())
      throw Error(ErrorCode::Config, std::string("missing placeholder '") + name + "' for " +
                                         prompt_kind_name(kind));
    const std::string key = "{" + name + "}";
    for (std::size_t pos = 0; (pos = out.find(key, pos)) != std::string::npos; pos += it->second.size())
      out.replace(pos, key.size(), it->second);
  }
  return out;
}

// "fp-" + 16 hex digits over the kind and whitespace-normalized values in
// key order. Depends only on bytes, so it is stable across platforms.
inline std::string prompt_fingerprint(PromptKind kind, const Placeholders& values) {
  std::uint64_t h = text::fnv1a64(prompt_kind_name(kind));
  for (const auto& [k, v] : values) {
    h = text::fnv1a64("\x1e", h);
    h = text::fnv1a64(k, h);
    h = text::fnv1a64("\x1f", h);
    h = text::fnv1a64(text::normalize_space(v), h);
  }
  return "fp-" + text::hex64(h);
}

struct PromptRequest {
  PromptKind kind = PromptKind::GenerateSva;
  Placeholders values;
  std::string text;
  std::string fingerprint;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  // Must be safe to call concurrently. Throws ProviderError.
  virtual std::string complete(const PromptRequest& req) const = 0;
  virtual std::string name() const = 0;
};

// Replays canned responses from a JSONL fixture. Each record is either
//   {"fingerprint": "fp-...", "response": "..."}
// or a partial match
//   {"kind": "GenerateSva", "match": {"nl_spec": "substring", ...}, "response": "..."}
// where every listed placeholder must contain the given text (after
// whitespace normalization). Exact fingerprints win; among partial matches
// the record with the most keys wins, then the earliest in the file.
class ScriptedProvider : public LlmProvider {
 public:
  struct Record {
    std::optional<std::string> fingerprint;
    std::optional<PromptKind> kind;
    std::map<std::string, std::string> match;
    std::string response;
  };

  explicit ScriptedProvider(std::vector<Record> records) : records_(std::move(records)) {}

  static ScriptedProvider from_jsonl(std::string_view content) {
    std::vector<Record> recs;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(content)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        Record r;
        r.response = j.at("response").get<std::string>();
        if (j.contains("fingerprint")) r.fingerprint = j["fingerprint"].get<std::string>();
        if (j.contains("kind")) {
          r.kind = parse_prompt_kind(j["kind"].get<std::string>());
          if (!r.kind) throw Error(ErrorCode::Schema, "unknown prompt kind");
        }
        if (j.contains("match"))
          for (const auto& [k, v] : j["match"].items()) r.match[k] = text::normalize_space(v.get<std::string>());
        if (!r.fingerprint && !r.kind) throw Error(ErrorCode::Schema, "record needs fingerprint or kind");
        recs.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Schema, "fixture line " + std::to_string(line_no) + ": " + e.what());
      } catch (const Error& e) {
        throw Error(ErrorCode::Schema, "fixture line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return ScriptedProvider(std::move(recs));
  }

  static ScriptedProvider from_file(const std::string& path) { return from_jsonl(text::read_file(path)); }

  std::string complete(const PromptRequest& req) const override {
    for (const auto& r : records_)
      if (r.fingerprint && *r.fingerprint == req.fingerprint) return r.response;
    const Record* best = nullptr;
    for (const auto& r : records_) {
      if (r.fingerprint || !r.kind || *r.kind != req.kind) continue;
      bool ok = true;
      for (const auto& [k, v] : r.match) {
        auto it = req.values.find(k);
        if (it == req.values.end() || text::normalize_space(it->second).find(v) == std::string::npos) {
          ok = false;
          break;
        }
      }
      if (ok && (!best || r.match.size() > best->match.size())) best = &r;
    }
    if (!best)
      throw ProviderError(std::string("scripted provider has no response for ") +
                              prompt_kind_name(req.kind) + " prompt " + req.fingerprint,
                          false);
    return best->response;
  }

  std::string name() const override { return "scripted"; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<Record> records_;
};

struct GatewayOptions {
  int max_retries = 3;
  std::ptrdiff_t concurrency = 4;
  std::chrono::milliseconds backoff{0};  // doubled after each failed attempt
  std::string archive_dir;               // empty: no archive
  std::vector<std::string> secrets;      // redacted from archived text
};

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<const LlmProvider> provider, GatewayOptions opts = {})
      : provider_(std::move(provider)),
        opts_(std::move(opts)),
        slots_(std::max<std::ptrdiff_t>(1, opts_.concurrency)) {
    if (!opts_.archive_dir.empty()) std::filesystem::create_directories(opts_.archive_dir);
  }

  std::string call(PromptKind kind, const Placeholders& values) const {
    PromptRequest req{kind, values, render_prompt(kind, values), prompt_fingerprint(kind, values)};
    auto delay = opts_.backoff;
    for (int attempt = 0;; ++attempt) {
      try {
        std::string response;
        {
          slots_.acquire();
          struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
          } release{slots_};
          response = provider_->complete(req);
        }
        archive(req, response, attempt + 1, "");
        return response;
      } catch (const ProviderError& e) {
        archive(req, "", attempt + 1, e.what());
        if (!e.retryable() || attempt >= opts_.max_retries) throw;
        if (delay.count() > 0) {
          std::this_thread::sleep_for(delay);
          delay *= 2;
        }
      }
    }
  }

  const LlmProvider& provider() const { return *provider_; }
  const GatewayOptions& options() const { return opts_; }

  std::string redact(std::string s) const {
    for (const auto& secret : opts_.secrets) {
      if (secret.empty()) continue;
      for (std::size_t pos = 0; (pos = s.find(secret, pos)) != std::string::npos;)
        s.replace(pos, secret.size(), "[REDACTED]");
    }
    return s;
  }

 private:
  void archive(const PromptRequest& req, const std::string& response, int attempt,
               const std::string& error) const {
    if (opts_.archive_dir.empty()) return;
    nlohmann::json j = {{"kind", prompt_kind_name(req.kind)},
                        {"fingerprint", req.fingerprint},
                        {"attempt", attempt},
                        {"prompt", redact(req.text)},
                        {"response", redact(response)}};
    if (!error.empty()) j["error"] = redact(error);
    std::lock_guard lock(archive_mu_);
    std::ofstream out(std::filesystem::path(opts_.archive_dir) / "prompts.jsonl", std::ios::app);
    out << j.dump() << "\n";
  }

  std::shared_ptr<const LlmProvider> provider_;
  GatewayOptions opts_;
  mutable std::counting_semaphore<> slots_;
  mutable std::mutex archive_mu_;
};

}  // namespace fvrule
