// Copyright 2026 The advsqli Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line surface: attack campaigns, oracle VGP checks, strategy
// comparison and rule-pack linting. Exit codes: 0 success, 1 usage error,
// 2 detector failure, 3 format error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advsqli/harness.hpp"
#include "advsqli/http_detector.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDetector = 2;
constexpr int kExitFormat = 3;

struct AttackArgs {
  std::string dataset;
  std::string target = "mock-nonrobust";
  std::string url;
  std::string param = "id";
  std::string method = "get";
  std::string strategy = "mcts";
  int steps = 10;
  int budget = 10;
  double c = 0.7071;
  int query_cap = 10000;
  std::uint64_t seed = 0;
  int parallel = 1;
  std::string out;
  bool audit_all_mutants = false;
  bool own_target = false;
  std::string rules_path;
  std::string grammar_ext;
  std::vector<int> blocked_statuses;
  std::string block_body;
  double rate_limit = 10.0;
  int timeout = 10;
};

// Values from the JSON config file (path in ADVSQLI_CONFIG) act as
// defaults; explicit flags win.
void apply_config_defaults(const CLI::App& cmd, AttackArgs& args) {
  const char* path = std::getenv("ADVSQLI_CONFIG");
  if (path == nullptr || *path == '\0') return;
  std::ifstream in(path);
  if (!in.good())
    throw advsqli::FormatError(std::string("cannot open config ") + path, 0);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw advsqli::FormatError(std::string("config parse: ") + e.what(), 0);
  }
  auto unset = [&](const std::string& flag) {
    const CLI::Option* opt = cmd.get_option_no_throw("--" + flag);
    return opt == nullptr || opt->count() == 0;
  };
  if (j.contains("dataset") && unset("dataset"))
    args.dataset = j["dataset"].get<std::string>();
  if (j.contains("target") && unset("target"))
    args.target = j["target"].get<std::string>();
  if (j.contains("url") && unset("url")) args.url = j["url"].get<std::string>();
  if (j.contains("param") && unset("param"))
    args.param = j["param"].get<std::string>();
  if (j.contains("method") && unset("method"))
    args.method = j["method"].get<std::string>();
  if (j.contains("strategy") && unset("strategy"))
    args.strategy = j["strategy"].get<std::string>();
  if (j.contains("steps") && unset("steps")) args.steps = j["steps"].get<int>();
  if (j.contains("budget") && unset("budget"))
    args.budget = j["budget"].get<int>();
  if (j.contains("c") && unset("c")) args.c = j["c"].get<double>();
  if (j.contains("query_cap") && unset("query-cap"))
    args.query_cap = j["query_cap"].get<int>();
  if (j.contains("seed") && unset("seed"))
    args.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("parallel") && unset("parallel"))
    args.parallel = j["parallel"].get<int>();
  if (j.contains("out") && unset("out")) args.out = j["out"].get<std::string>();
  if (j.contains("rules") && unset("rules"))
    args.rules_path = j["rules"].get<std::string>();
  if (j.contains("grammar_ext") && unset("grammar-ext"))
    args.grammar_ext = j["grammar_ext"].get<std::string>();
}

std::vector<advsqli::SignatureRule> load_rules(const std::string& path) {
  if (path.empty()) return advsqli::builtin_rules();
  std::ifstream in(path);
  if (!in.good())
    throw advsqli::FormatError("cannot open rule pack " + path, 0);
  return advsqli::parse_rule_pack(in);
}

advsqli::Grammar load_grammar(const std::string& ext_path) {
  advsqli::Grammar g = advsqli::builtin_grammar();
  if (!ext_path.empty()) {
    std::ifstream in(ext_path);
    if (!in.good())
      throw advsqli::FormatError("cannot open grammar extension " + ext_path,
                                 0);
    advsqli::merge_grammar_extension(g, in);
  }
  return g;
}

std::unique_ptr<advsqli::Detector> make_detector(const AttackArgs& args) {
  using namespace advsqli;
  if (args.target == "mock-nonrobust")
    return std::make_unique<MockWaf>(RuleTier::kNonRobust,
                                     load_rules(args.rules_path));
  if (args.target == "mock-hardened")
    return std::make_unique<MockWaf>(RuleTier::kHardened,
                                     load_rules(args.rules_path));
  if (args.target == "scorer") return std::make_unique<ToyScorer>();
  if (args.target == "http") {
    EndpointConfig cfg;
    cfg.base_url = args.url;
    cfg.param = args.param;
    if (!args.blocked_statuses.empty())
      cfg.blocked_statuses.clear();
    for (int s : args.blocked_statuses) cfg.blocked_statuses.insert(s);
    cfg.block_body_substring = args.block_body;
    cfg.rate_limit_per_sec = args.rate_limit;
    cfg.timeout_seconds = args.timeout;
    return std::make_unique<HttpDetector>(cfg);
  }
  throw CLI::ValidationError("--target", "unknown target " + args.target);
}

int cmd_attack(const CLI::App& cmd, AttackArgs args) {
  using namespace advsqli;
  apply_config_defaults(cmd, args);
  if (args.dataset.empty()) {
    std::cerr << "attack: --dataset is required\n";
    return kExitUsage;
  }
  if (args.target == "http") {
    if (args.url.empty()) {
      std::cerr << "attack: --url is required for --target http\n";
      return kExitUsage;
    }
    if (!args.own_target) {
      std::cerr << "attack: remote targets require --i-own-this-target\n";
      return kExitUsage;
    }
  }

  Campaign campaign;
  campaign.dataset_path = args.dataset;
  campaign.parallelism = args.parallel;
  campaign.audit_all_mutants = args.audit_all_mutants;
  AttackConfig& cfg = campaign.config;
  cfg.max_steps = args.steps;
  cfg.budget = args.budget;
  cfg.exploration_c = args.c;
  cfg.query_cap = args.query_cap;
  cfg.seed = args.seed;
  if (!parse_request_method(args.method, cfg.method)) {
    std::cerr << "attack: unknown method " << args.method << "\n";
    return kExitUsage;
  }
  if (!parse_strategy(args.strategy, cfg.strategy)) {
    std::cerr << "attack: unknown strategy " << args.strategy << "\n";
    return kExitUsage;
  }

  std::unique_ptr<Detector> detector = make_detector(args);
  campaign.detector_name = detector->name();
  cfg.mode = detector->with_probability() ? Mode::kWithProbability
                                          : Mode::kWithoutProbability;
  if (cfg.strategy == Strategy::kPriorityQueue &&
      cfg.mode != Mode::kWithProbability) {
    std::cerr << "attack: pqueue needs a scoring detector (use --target "
                 "scorer)\n";
    return kExitUsage;
  }

  Grammar grammar = load_grammar(args.grammar_ext);
  std::vector<RawPayload> dataset = ingest(args.dataset);
  TestBench bench;

  CampaignReport report =
      run_campaign(campaign, dataset, *detector, grammar, bench);
  std::cout << render_text(report);
  if (!args.out.empty()) {
    std::filesystem::create_directories(args.out);
    std::string path = args.out + "/report.json";
    std::ofstream out(path);
    out << to_json(report).dump(2) << "\n";
    std::cout << "report written to " << path << "\n";
  } else {
    std::cout << to_json(report).dump(2) << "\n";
  }
  return report.incomplete ? kExitDetector : kExitOk;
}

int cmd_oracle_check(const CLI::App& cmd, AttackArgs args, int actions,
                     int seeds) {
  using namespace advsqli;
  apply_config_defaults(cmd, args);
  if (args.dataset.empty()) {
    std::cerr << "oracle-check: --dataset is required\n";
    return kExitUsage;
  }
  Grammar grammar = load_grammar(args.grammar_ext);
  std::vector<RawPayload> dataset = ingest(args.dataset);
  TestBench bench;
  VgpReport report =
      vgp_sweep(dataset, grammar, bench, actions, seeds, args.seed);
  nlohmann::json j;
  j["payloads"] = report.payloads;
  j["unparseable"] = report.unparseable;
  j["chains"] = report.chains;
  j["equivalent_chains"] = report.equivalent_chains;
  if (report.vgp())
    j["vgp"] = *report.vgp();
  else
    j["vgp"] = "n/a";
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& f : report.failures) {
    nlohmann::json e;
    e["id"] = f.id;
    e["original"] = f.original;
    e["mutated"] = f.mutated;
    fails.push_back(e);
  }
  j["failures"] = fails;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths) {
  using namespace advsqli;
  std::vector<CampaignReport> reports;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in.good()) throw FormatError("cannot open report " + path, 0);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what(), 0);
    }
    reports.push_back(report_from_json(j));
  }
  ComparisonTable table = compare_strategies(reports);
  std::cout << render_text(table);
  return kExitOk;
}

int cmd_rules_lint(const std::string& path) {
  using namespace advsqli;
  auto rules = load_rules(path);
  int non_robust = 0, hardened = 0;
  for (const auto& r : rules)
    (r.tier == RuleTier::kNonRobust ? non_robust : hardened)++;
  std::cout << "rule pack ok: " << rules.size() << " rules (" << non_robust
            << " non_robust, " << hardened << " hardened)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial SQLi payload mutation and black-box search"};
  app.require_subcommand(1);

  AttackArgs args;
  CLI::App* attack_cmd =
      app.add_subcommand("attack", "run an attack campaign");
  attack_cmd->add_option("--dataset", args.dataset, "payload CSV");
  attack_cmd->add_option("--target", args.target,
                         "mock-nonrobust|mock-hardened|scorer|http");
  attack_cmd->add_option("--url", args.url, "base URL for --target http");
  attack_cmd->add_option("--param", args.param, "HTTP parameter name");
  attack_cmd->add_option("--method", args.method,
                         "get|get-json|post|post-json");
  attack_cmd->add_option("--strategy", args.strategy,
                         "mcts|random|exhaustive|pqueue");
  attack_cmd->add_option("--steps", args.steps, "max mutation steps");
  attack_cmd->add_option("--budget", args.budget, "MCTS budget per step");
  attack_cmd->add_option("--c", args.c, "UCB exploration constant");
  attack_cmd->add_option("--query-cap", args.query_cap,
                         "per-payload query budget");
  attack_cmd->add_option("--seed", args.seed, "campaign seed");
  attack_cmd->add_option("--parallel", args.parallel, "worker threads");
  attack_cmd->add_option("--out", args.out, "output directory");
  attack_cmd->add_flag("--audit-all-mutants", args.audit_all_mutants,
                       "oracle-audit every intermediate payload");
  attack_cmd->add_flag("--i-own-this-target", args.own_target,
                       "acknowledge authorization for remote targets");
  attack_cmd->add_option("--rules", args.rules_path, "rule pack file");
  attack_cmd->add_option("--grammar-ext", args.grammar_ext,
                         "grammar extension file");
  attack_cmd->add_option("--blocked-status", args.blocked_statuses,
                         "HTTP statuses treated as blocked");
  attack_cmd->add_option("--block-body", args.block_body,
                         "block-page body substring");
  attack_cmd->add_option("--rate-limit", args.rate_limit,
                         "requests per second per host");
  attack_cmd->add_option("--timeout", args.timeout, "HTTP timeout seconds");

  int oc_actions = 10;
  int oc_seeds = 20;
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle-check", "mutate the dataset and report VGP");
  oracle_cmd->add_option("--dataset", args.dataset, "payload CSV");
  oracle_cmd->add_option("--actions", oc_actions, "actions per chain");
  oracle_cmd->add_option("--seeds", oc_seeds, "chains per payload");
  oracle_cmd->add_option("--seed", args.seed, "base seed");
  oracle_cmd->add_option("--grammar-ext", args.grammar_ext,
                         "grammar extension file");

  std::vector<std::string> report_paths;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "align campaign reports");
  compare_cmd->add_option("reports", report_paths, "report JSON paths")
      ->required();

  CLI::App* rules_cmd = app.add_subcommand("rules", "rule pack utilities");
  std::string lint_path;
  CLI::App* lint_cmd = rules_cmd->add_subcommand("lint", "validate a pack");
  lint_cmd->add_option("pack", lint_path, "rule pack file (default builtin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (attack_cmd->parsed()) return cmd_attack(*attack_cmd, args);
    if (oracle_cmd->parsed())
      return cmd_oracle_check(*oracle_cmd, args, oc_actions, oc_seeds);
    if (compare_cmd->parsed()) return cmd_compare(report_paths);
    if (rules_cmd->parsed()) {
      if (lint_cmd->parsed()) return cmd_rules_lint(lint_path);
      std::cerr << "rules: expected a subcommand (lint)\n";
      return kExitUsage;
    }
  } catch (const advsqli::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const advsqli::MisalignedCampaigns& e) {
    std::cerr << "compare: " << e.what() << "\n";
    return kExitUsage;
  } catch (const advsqli::DetectorUnavailable& e) {
    std::cerr << "detector failure: " << e.what() << "\n";
    return kExitDetector;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const advsqli::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
