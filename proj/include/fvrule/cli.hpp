#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or validation
// error, 2 runtime error. Every subcommand writes manifest.json to the log
// directory.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvrule/dataset.hpp"
#include "fvrule/equivalence.hpp"
#include "fvrule/errors.hpp"
#include "fvrule/evaluation.hpp"
#include "fvrule/external_checker.hpp"
#include "fvrule/http_provider.hpp"
#include "fvrule/inference.hpp"
#include "fvrule/llm_gateway.hpp"
#include "fvrule/trainer.hpp"
#include "fvrule/tree_library.hpp"

namespace fvrule::cli {

inline constexpr const char* kVersion = "0.1.0";

struct OracleConfig {
  std::string kind = "bounded";
  std::size_t max_len = 5;
  std::uint64_t budget = std::uint64_t{1} << 24;
  std::string checker_config;  // JSON file for the external adapter
};

struct RunConfig {
  std::string provider;  // "scripted:<path>" or "http"
  ProviderConfig http;
  int concurrency = 4;
  OracleConfig oracle;
  RetrievalConfig retrieval;
  TrainConfig train;
  double sample_ratio = 1.0;
  std::string dataset, library, out, predictions, baseline_report, report, trainlog;
  std::string log_dir = "logs";
  std::size_t jobs = 0;  // 0: available parallelism capped at the provider limit
  // Used when retrieval.similarity is "embedding"; empty endpoint derives
  // <base>/embeddings from the chat-completions URL.
  std::string embedding_endpoint;
  std::string embedding_model = "text-embedding-3-small";

  nlohmann::json to_json() const {
    return {{"provider", provider},
            {"http", http.to_json()},
            {"concurrency", concurrency},
            {"oracle", {{"kind", oracle.kind}, {"max_len", oracle.max_len}, {"budget", oracle.budget},
                        {"checker_config", oracle.checker_config}}},
            {"retrieval", {{"k_trees", retrieval.k_trees}, {"k_traces", retrieval.k_traces},
                           {"alpha", retrieval.alpha}, {"similarity", retrieval.similarity},
                           {"embedding_endpoint", embedding_endpoint}, {"embedding_model", embedding_model}}},
            {"train", {{"max_iterations", train.max_iterations}, {"questions_per_layer", train.questions_per_layer},
                       {"diversity_threshold", train.diversity_threshold}, {"rng_seed", train.rng_seed},
                       {"sample_ratio", sample_ratio}}},
            {"paths", {{"dataset", dataset}, {"library", library}, {"out", out}, {"predictions", predictions},
                       {"baseline_report", baseline_report}, {"report", report}, {"trainlog", trainlog}}},
            {"log_dir", log_dir},
            {"jobs", jobs}};
  }

  // Keys absent from the document keep their current values.
  void merge(const nlohmann::json& j) {
    auto get = [](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key) && !obj[key].is_null()) field = obj[key].get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      if (p.is_string()) {
        provider = p.get<std::string>();
      } else if (p.is_object()) {
        get(p, "mode", provider);
        if (provider == "scripted" && p.contains("fixture")) provider = "scripted:" + p["fixture"].get<std::string>();
        if (p.contains("http")) http = ProviderConfig::from_json(p["http"]);
        get(p, "concurrency", concurrency);
      }
    }
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      get(o, "kind", oracle.kind);
      get(o, "max_len", oracle.max_len);
      get(o, "budget", oracle.budget);
      get(o, "checker_config", oracle.checker_config);
    }
    if (j.contains("retrieval")) {
      const auto& r = j["retrieval"];
      get(r, "k_trees", retrieval.k_trees);
      get(r, "k_traces", retrieval.k_traces);
      get(r, "alpha", retrieval.alpha);
      get(r, "similarity", retrieval.similarity);
      get(r, "embedding_endpoint", embedding_endpoint);
      get(r, "embedding_model", embedding_model);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      get(t, "max_iterations", train.max_iterations);
      get(t, "questions_per_layer", train.questions_per_layer);
      get(t, "diversity_threshold", train.diversity_threshold);
      get(t, "rng_seed", train.rng_seed);
      get(t, "sample_ratio", sample_ratio);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      get(p, "dataset", dataset);
      get(p, "library", library);
      get(p, "out", out);
      get(p, "predictions", predictions);
      get(p, "baseline_report", baseline_report);
      get(p, "report", report);
      get(p, "trainlog", trainlog);
    }
    get(j, "log_dir", log_dir);
    get(j, "jobs", jobs);
  }
};

// Distinguishes bad input (exit 1) from runtime failures (exit 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

inline void require_file(const std::string& path, const char* flag) {
  require(!path.empty(), std::string(flag) + " is required");
  require(std::filesystem::exists(path), std::string(flag) + ": no such file '" + path + "'");
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::size_t effective_jobs(const RunConfig& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  return std::max<std::size_t>(1, std::min<std::size_t>(default_jobs(), static_cast<std::size_t>(cfg.concurrency)));
}

inline std::unique_ptr<LlmGateway> make_gateway(const RunConfig& cfg) {
  require(!cfg.provider.empty(), "--provider is required (scripted:<fixture.jsonl> or http)");
  GatewayOptions opts;
  opts.concurrency = cfg.concurrency;
  opts.archive_dir = cfg.log_dir;
  if (cfg.provider.rfind("scripted:", 0) == 0) {
    const auto path = cfg.provider.substr(9);
    require_file(path, "--provider scripted fixture");
    opts.max_retries = 0;
    return std::make_unique<LlmGateway>(
        std::make_shared<ScriptedProvider>(ScriptedProvider::from_file(path)), opts);
  }
  require(cfg.provider == "http", "--provider must be scripted:<path> or http");
  require(!cfg.http.api_key().empty(), "environment variable " + cfg.http.api_key_env + " is not set");
  opts.max_retries = cfg.http.max_retries;
  opts.backoff = std::chrono::milliseconds(500);
  opts.secrets = {cfg.http.api_key()};
  return std::make_unique<LlmGateway>(std::make_shared<HttpProvider>(cfg.http), opts);
}

inline std::string embeddings_url(const RunConfig& cfg) {
  if (!cfg.embedding_endpoint.empty()) return cfg.embedding_endpoint;
  const std::string suffix = "/chat/completions";
  const auto& e = cfg.http.endpoint;
  require(e.size() > suffix.size() && e.compare(e.size() - suffix.size(), suffix.size(), suffix) == 0,
          "cannot derive an embeddings URL from '" + e + "'; set retrieval.embedding_endpoint");
  return e.substr(0, e.size() - suffix.size()) + "/embeddings";
}

// Lexical TF-IDF over the library backgrounds, or cosine over embeddings
// fetched once per distinct text.
inline std::unique_ptr<TextSimilarity> make_similarity(const RunConfig& cfg, const std::vector<OpTree>& library) {
  if (cfg.retrieval.similarity == "lexical") {
    std::vector<std::string> corpus;
    for (const auto& t : library) corpus.push_back(t.background.nl_spec);
    return std::make_unique<TfIdfSimilarity>(corpus);
  }
  require(cfg.retrieval.similarity == "embedding", "retrieval.similarity must be lexical or embedding");
  require(cfg.provider == "http", "embedding similarity needs --provider http");
  struct Cache {
    std::mutex mu;
    std::map<std::string, std::vector<double>, std::less<>> vectors;
  };
  auto cache = std::make_shared<Cache>();
  return std::make_unique<EmbeddingSimilarity>(
      [cache, http = cfg.http, url = embeddings_url(cfg), model = cfg.embedding_model](std::string_view s) {
        {
          std::lock_guard lk(cache->mu);
          if (auto it = cache->vectors.find(s); it != cache->vectors.end()) return it->second;
        }
        auto v = http_embed(http, url, model, s);
        std::lock_guard lk(cache->mu);
        return cache->vectors.emplace(std::string(s), std::move(v)).first->second;
      });
}

inline std::unique_ptr<sva::EquivalenceOracle> make_oracle(const RunConfig& cfg) {
  if (cfg.oracle.kind == "bounded") {
    sva::EquivalenceOptions o;
    o.max_len = cfg.oracle.max_len;
    o.budget = cfg.oracle.budget;
    return std::make_unique<sva::BoundedOracle>(o);
  }
  require(cfg.oracle.kind == "external", "--oracle must be bounded or external");
  require_file(cfg.oracle.checker_config, "--checker-config");
  return std::make_unique<sva::ExternalChecker>(
      sva::CheckerAdapterConfig::from_json(nlohmann::json::parse(text::read_file(cfg.oracle.checker_config))));
}

inline std::vector<NlSvaPair> load_checked(const std::string& path, std::ostream& err) {
  require_file(path, "--dataset");
  auto ds = load_dataset(path);
  for (const auto& e : ds.errors)
    err << path << ":" << e.line << ": " << error_code_name(e.code) << ": " << e.reason << "\n";
  require(ds.errors.empty(), "dataset has invalid records");
  require(!ds.items.empty(), "dataset is empty");
  return ds.items;
}

inline std::vector<OpTree> load_library_checked(const std::string& path, std::ostream& err) {
  if (path.empty() || !std::filesystem::exists(path)) return {};
  auto lib = library_load(path);
  for (const auto& e : lib.errors)
    err << path << ":" << e.line << ": skipped tree: " << e.reason << "\n";
  return lib.trees;
}

inline void write_manifest(const RunConfig& cfg, const std::string& subcommand, const std::vector<std::string>& args) {
  std::filesystem::create_directories(cfg.log_dir);
  nlohmann::json m = {{"subcommand", subcommand},
                      {"argv", args},
                      {"config", cfg.to_json()},
                      {"seed", cfg.train.rng_seed},
                      {"versions",
                       {{"fvrule", kVersion},
                        {"nlohmann_json", "3.11.3"},
                        {"cli11", "2.4.2"},
                        {"cpp_httplib", CPPHTTPLIB_VERSION}}}};
  text::write_file((std::filesystem::path(cfg.log_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

inline std::vector<std::string> parse_signal_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : text::split(s, ',')) {
    auto t = std::string(text::trim(part));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace detail

// ---- subcommands -----------------------------------------------------------

inline void cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto data = detail::load_checked(cfg.dataset, err);
  detail::require(!cfg.library.empty(), "--out-library is required");
  detail::require(cfg.sample_ratio > 0.0 && cfg.sample_ratio <= 1.0, "--sample-ratio must be in (0, 1]");
  if (cfg.sample_ratio < 1.0) data = stratified_sample(data, cfg.sample_ratio, cfg.train.rng_seed);
  auto gw = detail::make_gateway(cfg);
  auto oracle = detail::make_oracle(cfg);
  auto tc = cfg.train;
  tc.oracle = cfg.oracle.kind;
  tc.concurrency_limit = detail::effective_jobs(cfg);
  detail::ensure_parent(cfg.library);
  auto res = train(*gw, data, *oracle, tc, cfg.library);

  const std::string base = cfg.trainlog.empty() ? (std::filesystem::path(cfg.log_dir) / "trainlog").string() : cfg.trainlog;
  detail::ensure_parent(base);
  text::write_file(base + ".json", res.log.to_json().dump(2) + "\n");
  text::write_file(base + ".csv", res.log.to_csv());
  for (const auto& w : res.log.warnings) err << "warning: " << w << "\n";
  const double ratio = res.log.iterations.empty() ? 0.0 : res.log.iterations.back().cumulative_fixing_ratio;
  out << "items " << data.size() << ", iterations " << res.log.iterations.size() << ", trees committed "
      << res.committed.size() << ", fixing ratio " << ratio << "\n";
  out << "library: " << cfg.library << "\ntrain log: " << base << ".json\n";
}

inline void cmd_infer(const RunConfig& cfg, const std::string& spec, const std::string& context,
                      std::ostream& out, std::ostream& err) {
  std::vector<NlSvaPair> items;
  if (!spec.empty()) {
    NlSvaPair p;
    p.id = "spec";
    p.nl = spec;
    p.golden_sva = "-";
    for (auto& s : detail::parse_signal_list(context)) p.design_context.push_back({s, 1});
    items.push_back(p);
  } else {
    items = detail::load_checked(cfg.dataset, err);
  }
  cfg.retrieval.validate();
  auto gw = detail::make_gateway(cfg);
  const auto library = detail::load_library_checked(cfg.library, err);
  if (library.empty()) err << "warning: tree library is empty; inference runs without rules\n";
  const auto sim = detail::make_similarity(cfg, library);

  std::vector<nlohmann::json> records(items.size());
  auto rc = cfg.retrieval;
  rc.jobs = 1;
  parallel_for(items.size(), detail::effective_jobs(cfg), [&](std::size_t i) {
    const auto r = infer(*gw, items[i].nl, items[i].design_context, library, rc, sim.get());
    auto audit = r.audit_json();
    records[i] = {{"id", items[i].id},
                  {"initial_sva", r.initial_sva},
                  {"final_sva", r.final_sva},
                  {"selected_traces", audit["selected"]},
                  {"scores", audit["scores"]},
                  {"adapted_rules", audit["adapted_rules"]},
                  {"retrieved", audit["retrieved"]},
                  {"no_applicable_rules", r.no_applicable_rules}};
  });
  std::string jsonl;
  for (const auto& r : records) jsonl += r.dump() + "\n";
  if (cfg.out.empty()) {
    out << jsonl;
  } else {
    detail::ensure_parent(cfg.out);
    text::write_file(cfg.out, jsonl);
    out << "wrote " << records.size() << " predictions to " << cfg.out << "\n";
  }
}

inline std::map<std::string, std::string> load_predictions(const std::string& path, bool use_initial) {
  detail::require_file(path, "--predictions");
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(text::read_file(path))) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const char* key = use_initial ? "initial_sva" : (j.contains("final_sva") ? "final_sva" : "prediction");
    detail::require(j.contains("id") && j.contains(key) && j[key].is_string(),
                    path + ":" + std::to_string(line_no) + ": record needs 'id' and '" + key + "'");
    out[j["id"].get<std::string>()] = j[key].get<std::string>();
  }
  return out;
}

inline void cmd_eval(const RunConfig& cfg, bool use_initial, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_checked(cfg.dataset, err);
  const auto preds = load_predictions(cfg.predictions, use_initial);
  auto oracle = detail::make_oracle(cfg);
  const auto report = evaluate(data, preds, *oracle, detail::effective_jobs(cfg));
  for (const auto& e : report.errors) err << "error: " << error_code_name(e.code) << ": " << e.reason << "\n";

  const std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(cfg.log_dir) : std::filesystem::path(cfg.out);
  std::filesystem::create_directories(dir);
  text::write_file((dir / "report.json").string(), report.to_json().dump(2) + "\n");
  text::write_file((dir / "report.csv").string(), report.items_csv());
  text::write_file((dir / "taxonomy.csv").string(), taxonomy_csv(report.taxonomy));
  if (!cfg.baseline_report.empty()) {
    detail::require_file(cfg.baseline_report, "--baseline-report");
    const auto base = EvalReport::taxonomy_from_json(nlohmann::json::parse(text::read_file(cfg.baseline_report)));
    text::write_file((dir / "reduction.csv").string(), reduction_csv(reduction_table(base, report.taxonomy)));
  }
  char line[256];
  std::snprintf(line, sizeof(line), "BLEU %.4f  Syn %.4f  Func %.4f  R.Func %.4f  (scored %zu, skipped %zu)\n",
                report.bleu, report.syn, report.func, report.relaxed_func, report.scored, report.skipped);
  out << line << "report: " << (dir / "report.json").string() << "\n";
}

inline void cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  detail::require(!cfg.report.empty() || !cfg.trainlog.empty(), "analyze needs --report and/or --trainlog");
  const std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(cfg.log_dir) : std::filesystem::path(cfg.out);
  std::filesystem::create_directories(dir);
  if (!cfg.report.empty()) {
    detail::require_file(cfg.report, "--report");
    const auto ours = EvalReport::taxonomy_from_json(nlohmann::json::parse(text::read_file(cfg.report)));
    text::write_file((dir / "taxonomy.csv").string(), taxonomy_csv(ours));
    out << taxonomy_csv(ours);
    if (!cfg.baseline_report.empty()) {
      detail::require_file(cfg.baseline_report, "--baseline-report");
      const auto base = EvalReport::taxonomy_from_json(nlohmann::json::parse(text::read_file(cfg.baseline_report)));
      const auto csv = reduction_csv(reduction_table(base, ours));
      text::write_file((dir / "reduction.csv").string(), csv);
      out << csv;
    }
  }
  if (!cfg.trainlog.empty()) {
    detail::require_file(cfg.trainlog, "--trainlog");
    const auto log = TrainLog::from_json(nlohmann::json::parse(text::read_file(cfg.trainlog)));
    const auto csv = fixing_ratio_csv(log);
    text::write_file((dir / "fixing_ratio.csv").string(), csv);
    out << csv;
  }
}

inline void cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_checked(cfg.dataset, err);
  detail::require(cfg.sample_ratio > 0.0 && cfg.sample_ratio <= 1.0, "--ratio must be in (0, 1]");
  const auto dump = dump_dataset(stratified_sample(data, cfg.sample_ratio, cfg.train.rng_seed));
  if (cfg.out.empty()) {
    out << dump;
  } else {
    detail::ensure_parent(cfg.out);
    text::write_file(cfg.out, dump);
  }
}

inline void cmd_split(const RunConfig& cfg, double fraction, const std::string& train_out,
                      const std::string& test_out, std::ostream& out, std::ostream& err) {
  const auto data = detail::load_checked(cfg.dataset, err);
  detail::require(!train_out.empty() && !test_out.empty(), "--train-out and --test-out are required");
  detail::require(fraction > 0.0 && fraction < 1.0, "--fraction must be in (0, 1)");
  const auto [tr, te] = split(data, fraction, cfg.train.rng_seed);
  detail::ensure_parent(train_out);
  detail::ensure_parent(test_out);
  text::write_file(train_out, dump_dataset(tr));
  text::write_file(test_out, dump_dataset(te));
  out << "train " << tr.size() << ", test " << te.size() << "\n";
}

inline void cmd_oracle_check(const RunConfig& cfg, const std::string& a, const std::string& b,
                             const std::string& signals, std::ostream& out) {
  detail::require(!a.empty() && !b.empty(), "--a and --b are required");
  sva::SvaAst ast_a, ast_b;
  try {
    ast_a = sva::parse_sva(a);
    ast_b = sva::parse_sva(b);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> sigs = detail::parse_signal_list(signals);
  if (sigs.empty()) {
    std::set<std::string> all;
    for (auto& s : sva::referenced_signals(ast_a)) all.insert(s);
    for (auto& s : sva::referenced_signals(ast_b)) all.insert(s);
    sigs.assign(all.begin(), all.end());
  }
  sva::EquivalenceOptions o;
  o.max_len = cfg.oracle.max_len;
  o.budget = cfg.oracle.budget;
  o.jobs = detail::effective_jobs(cfg);
  const auto v = sva::check_equivalence(ast_a, ast_b, sigs, o);
  out << sva::verdict_name(v.verdict) << "\n";
  auto describe_ce = [&](const sva::Trace& t) {
    const bool ha = sva::eval_assertion(ast_a, t);
    return t.to_string() + "  (a " + (ha ? "holds" : "fails") + ", b " + (ha ? "fails" : "holds") + ")";
  };
  if (v.counterexample) out << "counterexample: " << describe_ce(*v.counterexample) << "\n";
  if (v.converse_counterexample) out << "counterexample: " << describe_ce(*v.converse_counterexample) << "\n";
  out << "traces checked: " << v.traces_checked << "\n";
}

// ---- entry point -----------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  // --config is read first so that flags override it.
  for (std::size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      try {
        cfg.merge(nlohmann::json::parse(text::read_file(args[i + 1])));
      } catch (const std::exception& e) {
        err << "error: cannot read config '" << args[i + 1] << "': " << e.what() << "\n";
        return 1;
      }
    }
  }

  CLI::App app{"Operator-level rule learning for natural-language to SVA translation", "fvrule"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_option("--log-dir", cfg.log_dir, "directory for manifest.json and the prompt archive");
    sub->add_option("--jobs", cfg.jobs, "worker threads (default: cores, capped at the provider limit)");
    sub->add_option("--seed", cfg.train.rng_seed, "random seed");
  };
  auto provider_opts = [&](CLI::App* sub) {
    sub->add_option("--provider", cfg.provider, "scripted:<fixture.jsonl> or http");
    sub->add_option("--endpoint", cfg.http.endpoint, "chat-completions URL (http provider)");
    sub->add_option("--model", cfg.http.model_name, "model name (http provider)");
    sub->add_option("--api-key-env", cfg.http.api_key_env, "environment variable holding the API key");
    sub->add_option("--concurrency", cfg.concurrency, "concurrent provider requests")->check(CLI::PositiveNumber);
  };
  auto oracle_opts = [&](CLI::App* sub) {
    sub->add_option("--oracle", cfg.oracle.kind, "bounded or external")->check(CLI::IsMember({"bounded", "external"}));
    sub->add_option("--max-len", cfg.oracle.max_len, "longest trace enumerated by the bounded oracle")
        ->check(CLI::Range(1, 64));
    sub->add_option("--budget", cfg.oracle.budget, "maximum trace evaluations per comparison");
    sub->add_option("--checker-config", cfg.oracle.checker_config, "JSON adapter config for --oracle external");
  };

  auto* train_cmd = app.add_subcommand("train", "learn reasoning trees from a training set");
  common(train_cmd);
  provider_opts(train_cmd);
  oracle_opts(train_cmd);
  train_cmd->add_option("--dataset", cfg.dataset, "training set (JSONL)");
  train_cmd->add_option("--out-library", cfg.library, "tree library to write (JSONL)");
  train_cmd->add_option("--max-iter", cfg.train.max_iterations, "maximum training iterations")->check(CLI::PositiveNumber);
  train_cmd->add_option("--questions-per-layer", cfg.train.questions_per_layer, "children per tree node")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--sample-ratio", cfg.sample_ratio, "operator-stratified training fraction");
  train_cmd->add_option("--trainlog", cfg.trainlog, "train log path without extension");

  std::string spec, context;
  auto* infer_cmd = app.add_subcommand("infer", "generate assertions guided by retrieved rules");
  common(infer_cmd);
  provider_opts(infer_cmd);
  infer_cmd->add_option("--dataset", cfg.dataset, "specifications (JSONL)");
  infer_cmd->add_option("--spec", spec, "a single specification instead of --dataset");
  infer_cmd->add_option("--context", context, "comma-separated signals for --spec");
  infer_cmd->add_option("--library", cfg.library, "tree library (JSONL)");
  infer_cmd->add_option("--k", cfg.retrieval.k_trees, "trees retrieved")->check(CLI::PositiveNumber);
  infer_cmd->add_option("--k-traces", cfg.retrieval.k_traces, "traces selected")->check(CLI::PositiveNumber);
  infer_cmd->add_option("--alpha", cfg.retrieval.alpha, "operator weight in the hybrid score")->check(CLI::Range(0.0, 1.0));
  infer_cmd->add_option("--similarity", cfg.retrieval.similarity, "tree retrieval: lexical or embedding")
      ->check(CLI::IsMember({"lexical", "embedding"}));
  infer_cmd->add_option("--out", cfg.out, "predictions file (JSONL); stdout if omitted");

  bool use_initial = false;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against golden assertions");
  common(eval_cmd);
  oracle_opts(eval_cmd);
  eval_cmd->add_option("--dataset", cfg.dataset, "dataset with golden assertions (JSONL)");
  eval_cmd->add_option("--predictions", cfg.predictions, "predictions (JSONL)");
  eval_cmd->add_option("--baseline-report", cfg.baseline_report, "report.json of a baseline for reduction tables");
  eval_cmd->add_option("--out-dir", cfg.out, "output directory (default: log dir)");
  eval_cmd->add_flag("--use-initial", use_initial, "score initial_sva instead of final_sva");

  auto* analyze_cmd = app.add_subcommand("analyze", "failure taxonomy and fixing-ratio tables");
  common(analyze_cmd);
  analyze_cmd->add_option("--report", cfg.report, "report.json from eval");
  analyze_cmd->add_option("--baseline-report", cfg.baseline_report, "baseline report.json");
  analyze_cmd->add_option("--trainlog", cfg.trainlog, "trainlog.json from train");
  analyze_cmd->add_option("--out-dir", cfg.out, "output directory (default: log dir)");

  auto* sample_cmd = app.add_subcommand("sample", "operator-stratified subset of a dataset");
  common(sample_cmd);
  sample_cmd->add_option("--dataset", cfg.dataset, "dataset (JSONL)");
  sample_cmd->add_option("--ratio", cfg.sample_ratio, "fraction to keep");
  sample_cmd->add_option("--out", cfg.out, "output file; stdout if omitted");

  double fraction = 0.8;
  std::string train_out, test_out;
  auto* split_cmd = app.add_subcommand("split", "seeded train/test split");
  common(split_cmd);
  split_cmd->add_option("--dataset", cfg.dataset, "dataset (JSONL)");
  split_cmd->add_option("--fraction", fraction, "training fraction");
  split_cmd->add_option("--train-out", train_out, "training split output");
  split_cmd->add_option("--test-out", test_out, "test split output");

  std::string a, b, signals;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "compare two assertions on bounded traces");
  common(oracle_cmd);
  oracle_cmd->add_option("--a", a, "first (golden) assertion");
  oracle_cmd->add_option("--b", b, "second (generated) assertion");
  oracle_cmd->add_option("--signals", signals, "comma-separated signals (default: all referenced)");
  oracle_cmd->add_option("--max-len", cfg.oracle.max_len, "longest trace")->check(CLI::Range(1, 64));
  oracle_cmd->add_option("--budget", cfg.oracle.budget, "maximum trace evaluations");

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());  // CLI11 consumes from the back
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    for (auto* sub : app.get_subcommands()) out << sub->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    std::filesystem::create_directories(cfg.log_dir);
    detail::write_manifest(cfg, name, args);
    if (name == "train") cmd_train(cfg, out, err);
    else if (name == "infer") cmd_infer(cfg, spec, context, out, err);
    else if (name == "eval") cmd_eval(cfg, use_initial, out, err);
    else if (name == "analyze") cmd_analyze(cfg, out);
    else if (name == "sample") cmd_sample(cfg, out, err);
    else if (name == "split") cmd_split(cfg, fraction, train_out, test_out, out, err);
    else if (name == "oracle-check") cmd_oracle_check(cfg, a, b, signals, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << sub->help();
    return 1;
  } catch (const Error& e) {
    const bool validation = e.code() == ErrorCode::Config || e.code() == ErrorCode::Schema ||
                            e.code() == ErrorCode::DuplicateId;
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return validation ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace fvrule::cli
