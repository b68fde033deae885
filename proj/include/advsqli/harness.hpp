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
// Campaign harness: dataset ingestion, attack orchestration, metric
// computation (FNR, ASR, VGP, query distribution) and report emission.
// Records are deterministic for a fixed seed against local detectors: each
// payload gets its own derived seed, so the parallelism degree cannot
// change any outcome.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "advsqli/oracle.hpp"
#include "advsqli/search.hpp"

namespace advsqli {

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

// CSV with header `payload,label`; the payload field may be quoted (RFC
// quoting, embedded newlines allowed); label 0 = benign, 1 = malicious.
// Duplicate payloads are deduplicated with a multiplicity count.
inline std::vector<RawPayload> ingest(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  std::string all((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  auto end_field = [&]() {
    row.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&]() {
    end_field();
    rows.push_back(row);
    row_lines.push_back(record_line);
    row.clear();
    record_line = line;
  };
  for (std::size_t i = 0; i < all.size(); ++i) {
    char c = all[i];
    if (c == '\n') ++line;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < all.size() && all[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !field_was_quoted) {
      quoted = true;
      field_was_quoted = true;
      continue;
    }
    if (c == ',') {
      end_field();
      continue;
    }
    if (c == '\n') {
      end_record();
      continue;
    }
    if (c != '\r') field.push_back(c);
  }
  if (quoted) throw FormatError("unterminated quoted field", record_line);
  if (!field.empty() || !row.empty() || field_was_quoted) end_record();

  if (rows.empty()) throw FormatError("empty dataset", 1);
  if (rows[0].size() < 2 || rows[0][0] != "payload" || rows[0][1] != "label")
    throw FormatError("expected header 'payload,label'", row_lines[0]);

  std::vector<RawPayload> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;  // blank line
    if (rows[r].size() != 2)
      throw FormatError("expected 2 columns, got " +
                            std::to_string(rows[r].size()),
                        row_lines[r]);
    const std::string& text = rows[r][0];
    const std::string& label = rows[r][1];
    if (label != "0" && label != "1")
      throw FormatError("label must be 0 or 1, got '" + label + "'",
                        row_lines[r]);
    auto it = index.find(text);
    if (it != index.end()) {
      ++out[it->second].multiplicity;
      continue;
    }
    RawPayload p;
    p.text = text;
    p.label = label == "1" ? Label::kMalicious : Label::kBenign;
    p.id = "p" + std::to_string(out.size());
    index[text] = out.size();
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<RawPayload> ingest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw FormatError("cannot open dataset " + path, 0);
  return ingest(in);
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

struct Campaign {
  std::string dataset_path;
  std::string detector_name;
  AttackConfig config;
  int parallelism = 1;
  bool audit_all_mutants = false;
};

struct PayloadRecord {
  std::string id;
  std::string payload;
  int multiplicity = 1;
  bool malicious = true;
  bool unparseable = false;
  bool initially_blocked = false;
  bool success = false;
  std::uint64_t queries = 0;
  std::string final_payload;
  std::optional<bool> oracle_equivalent;
  std::size_t actions = 0;
};

struct Aggregates {
  int malicious_total = 0;
  int initially_passed = 0;
  int attacked = 0;
  int bypassed = 0;
  int unparseable = 0;
  int benign_total = 0;
  int benign_blocked = 0;
  std::optional<double> fnr;
  std::optional<double> asr;
  std::optional<double> vgp;
  std::optional<double> query_median;
  std::optional<double> query_mean;
  std::optional<double> query_p90;
};

struct CampaignReport {
  std::string version = "1";
  Campaign campaign;
  bool incomplete = false;
  std::vector<PayloadRecord> records;
  Aggregates aggregates;
};

namespace harness_detail {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::optional<double> percentile(std::vector<double> v, double p) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  double idx = p * (static_cast<double>(v.size()) - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - static_cast<double>(lo);
  return v[lo] * (1 - frac) + v[hi] * frac;
}

// Replays an action trace from the original payload, yielding each
// intermediate payload text. Sequential traces carry increasing tree
// generations; assignment traces are uniform generation zero.
inline std::vector<std::string> replay_trace(
    const RawPayload& payload, const std::vector<MutationAction>& trace) {
  std::vector<std::string> out;
  if (trace.empty()) return out;
  PayloadTree base = build_tree(payload);
  bool sequential = false;
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i].node_ref.generation != trace[0].node_ref.generation)
      sequential = true;
  if (sequential || trace.size() == 1) {
    PayloadTree cur = base;
    for (const auto& a : trace) {
      cur = apply(cur, a);
      out.push_back(reconstruct(cur));
    }
  } else {
    for (std::size_t k = 1; k <= trace.size(); ++k) {
      std::vector<MutationAction> slice(trace.begin(),
                                        trace.begin() +
                                            static_cast<std::ptrdiff_t>(k));
      out.push_back(reconstruct(apply_assignment(base, slice)));
    }
  }
  return out;
}

}  // namespace harness_detail

inline Aggregates compute_aggregates(const std::vector<PayloadRecord>& records) {
  Aggregates agg;
  std::vector<double> queries;
  int audited = 0, equivalent = 0;
  for (const auto& r : records) {
    if (!r.malicious) {
      ++agg.benign_total;
      if (r.initially_blocked) ++agg.benign_blocked;
      continue;
    }
    ++agg.malicious_total;
    if (r.unparseable) ++agg.unparseable;
    if (!r.initially_blocked) {
      ++agg.initially_passed;
    } else {
      ++agg.attacked;
      if (r.success) ++agg.bypassed;
      queries.push_back(static_cast<double>(r.queries));
    }
    if (r.oracle_equivalent.has_value()) {
      ++audited;
      if (*r.oracle_equivalent) ++equivalent;
    }
  }
  if (agg.malicious_total > 0)
    agg.fnr = static_cast<double>(agg.initially_passed) / agg.malicious_total;
  if (agg.attacked > 0)
    agg.asr = static_cast<double>(agg.bypassed) / agg.attacked;
  if (audited > 0) agg.vgp = static_cast<double>(equivalent) / audited;
  agg.query_median = harness_detail::percentile(queries, 0.5);
  agg.query_p90 = harness_detail::percentile(queries, 0.9);
  if (!queries.empty()) {
    double sum = 0;
    for (double q : queries) sum += q;
    agg.query_mean = sum / static_cast<double>(queries.size());
  }
  return agg;
}

// Runs one campaign: initial verdict per payload, attack on the blocked
// malicious ones, oracle audit of the finals (and of every intermediate
// with audit_all_mutants). Benign payloads are only submitted once for
// false-positive sanity, never attacked.
inline CampaignReport run_campaign(const Campaign& campaign,
                                   const std::vector<RawPayload>& dataset,
                                   Detector& detector, const Grammar& grammar,
                                   const TestBench& bench) {
  CampaignReport report;
  report.campaign = campaign;
  report.records.resize(dataset.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> aborted{false};
  std::mutex mu;

  auto worker = [&]() {
    while (!aborted.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      const RawPayload& p = dataset[i];
      PayloadRecord rec;
      rec.id = p.id;
      rec.payload = p.text;
      rec.multiplicity = p.multiplicity;
      rec.malicious = p.label == Label::kMalicious;
      AttackConfig cfg = campaign.config;
      cfg.seed = harness_detail::derive_seed(campaign.config.seed, i);
      try {
        if (!rec.malicious) {
          Verdict v =
              detector.detect(adapt_for_method(p.text, cfg.method), cfg.method);
          rec.initially_blocked = v.blocked();
          rec.queries = 1;
          rec.final_payload = p.text;
        } else {
          AttackOutcome out;
          try {
            out = attack(p, detector, grammar, cfg);
          } catch (const LexError&) {
            // skipped, never silently mutated; the initial query already
            // happened inside attack() before parsing
            rec.unparseable = true;
            rec.initially_blocked = true;
            rec.queries = 1;
            rec.final_payload = p.text;
            std::lock_guard<std::mutex> lock(mu);
            report.records[i] = std::move(rec);
            continue;
          }
          rec.initially_blocked = !out.initially_passed;
          rec.success = out.success && !out.initially_passed;
          rec.queries = out.queries_used;
          rec.final_payload = out.final_payload;
          rec.actions = out.action_trace.size();
          if (rec.success) {
            bool ok = bench.equivalent(p.text, out.final_payload);
            if (ok && campaign.audit_all_mutants) {
              for (const auto& inter :
                   harness_detail::replay_trace(p, out.action_trace)) {
                if (!bench.equivalent(p.text, inter)) {
                  ok = false;
                  break;
                }
              }
            }
            rec.oracle_equivalent = ok;
          }
        }
      } catch (const DetectorUnavailable&) {
        aborted.store(true);
        std::lock_guard<std::mutex> lock(mu);
        report.incomplete = true;
        report.records[i] = std::move(rec);
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      report.records[i] = std::move(rec);
    }
  };

  int threads = std::max(1, campaign.parallelism);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (aborted.load()) {
    // Drop records never produced (all-default entries for unprocessed
    // payloads would skew the metrics of a partial report).
    std::vector<PayloadRecord> done;
    for (auto& r : report.records)
      if (!r.id.empty()) done.push_back(std::move(r));
    report.records = std::move(done);
  }
  report.aggregates = compute_aggregates(report.records);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Aggregates& a) {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v)
      j[key] = *v;
    else
      j[key] = "n/a";
  };
  j["malicious_total"] = a.malicious_total;
  j["initially_passed"] = a.initially_passed;
  j["attacked"] = a.attacked;
  j["bypassed"] = a.bypassed;
  j["unparseable"] = a.unparseable;
  j["benign_total"] = a.benign_total;
  j["benign_blocked"] = a.benign_blocked;
  put("fnr", a.fnr);
  put("asr", a.asr);
  put("vgp", a.vgp);
  put("query_median", a.query_median);
  put("query_mean", a.query_mean);
  put("query_p90", a.query_p90);
  return j;
}

inline nlohmann::json to_json(const CampaignReport& report) {
  nlohmann::json j;
  j["version"] = report.version;
  j["incomplete"] = report.incomplete;
  nlohmann::json cfg;
  cfg["dataset"] = report.campaign.dataset_path;
  cfg["detector"] = report.campaign.detector_name;
  cfg["strategy"] = to_string(report.campaign.config.strategy);
  cfg["method"] = to_string(report.campaign.config.method);
  cfg["steps"] = report.campaign.config.max_steps;
  cfg["budget"] = report.campaign.config.budget;
  cfg["c"] = report.campaign.config.exploration_c;
  cfg["query_cap"] = report.campaign.config.query_cap;
  cfg["seed"] = report.campaign.config.seed;
  cfg["candidate_cap"] = report.campaign.config.candidate_cap;
  cfg["parallelism"] = report.campaign.parallelism;
  cfg["audit_all_mutants"] = report.campaign.audit_all_mutants;
  j["config"] = cfg;
  j["aggregates"] = to_json(report.aggregates);
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json rec;
    rec["id"] = r.id;
    rec["payload"] = r.payload;
    rec["multiplicity"] = r.multiplicity;
    rec["malicious"] = r.malicious;
    rec["unparseable"] = r.unparseable;
    rec["initial"] = r.initially_blocked ? "blocked" : "passed";
    rec["outcome"] = r.success ? "bypassed" : "held";
    rec["queries"] = r.queries;
    rec["final_payload"] = r.final_payload;
    if (r.oracle_equivalent.has_value())
      rec["oracle_equivalent"] = *r.oracle_equivalent;
    rec["actions"] = r.actions;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j;
}

// Loads the fields compare_strategies needs from an emitted report.
inline CampaignReport report_from_json(const nlohmann::json& j) {
  CampaignReport report;
  report.version = j.value("version", "1");
  report.incomplete = j.value("incomplete", false);
  const auto& cfg = j.at("config");
  report.campaign.dataset_path = cfg.value("dataset", "");
  report.campaign.detector_name = cfg.value("detector", "");
  Strategy strat = Strategy::kMcts;
  parse_strategy(cfg.value("strategy", "mcts"), strat);
  report.campaign.config.strategy = strat;
  for (const auto& rec : j.at("records")) {
    PayloadRecord r;
    r.id = rec.value("id", "");
    r.payload = rec.value("payload", "");
    r.multiplicity = rec.value("multiplicity", 1);
    r.malicious = rec.value("malicious", true);
    r.unparseable = rec.value("unparseable", false);
    r.initially_blocked = rec.value("initial", "blocked") == "blocked";
    r.success = rec.value("outcome", "held") == "bypassed";
    r.queries = rec.value("queries", 0ull);
    r.final_payload = rec.value("final_payload", "");
    report.records.push_back(std::move(r));
  }
  report.aggregates = compute_aggregates(report.records);
  return report;
}

inline std::string render_text(const CampaignReport& report) {
  std::ostringstream os;
  const Aggregates& a = report.aggregates;
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return std::string(buf);
  };
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *v);
    return std::string(buf);
  };
  os << "campaign: " << report.campaign.detector_name << " / "
     << to_string(report.campaign.config.strategy) << " / "
     << to_string(report.campaign.config.method)
     << (report.incomplete ? "  [INCOMPLETE]" : "") << "\n";
  os << "  malicious: " << a.malicious_total
     << "  initially passed: " << a.initially_passed
     << "  attacked: " << a.attacked << "  bypassed: " << a.bypassed << "\n";
  os << "  FNR: " << pct(a.fnr) << "  ASR: " << pct(a.asr)
     << "  VGP: " << pct(a.vgp) << "\n";
  os << "  queries (median/mean/p90): " << num(a.query_median) << " / "
     << num(a.query_mean) << " / " << num(a.query_p90) << "\n";
  if (a.benign_total > 0)
    os << "  benign blocked: " << a.benign_blocked << "/" << a.benign_total
       << "\n";
  if (a.unparseable > 0) os << "  unparseable: " << a.unparseable << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// VGP sweep: random mutation chains, every final audited by the oracle
// ---------------------------------------------------------------------------

struct VgpFailure {
  std::string id;
  std::string original;
  std::string mutated;
};

struct VgpReport {
  int payloads = 0;
  int unparseable = 0;
  int chains = 0;
  int equivalent_chains = 0;
  std::vector<VgpFailure> failures;

  std::optional<double> vgp() const {
    if (chains == 0) return std::nullopt;
    return static_cast<double>(equivalent_chains) / chains;
  }
};

// Applies `actions` uniformly random mutation actions to every malicious
// payload, once per seed, and checks execution equivalence of each final.
inline VgpReport vgp_sweep(const std::vector<RawPayload>& dataset,
                           const Grammar& grammar, const TestBench& bench,
                           int actions, int seeds,
                           std::uint64_t base_seed = 0) {
  VgpReport report;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const RawPayload& p = dataset[i];
    if (p.label != Label::kMalicious) continue;
    ++report.payloads;
    PayloadTree tree;
    try {
      tree = build_tree(p);
    } catch (const LexError&) {
      ++report.unparseable;
      continue;
    }
    for (int s = 0; s < seeds; ++s) {
      std::uint64_t seed =
          harness_detail::derive_seed(base_seed, i * 1009 + s);
      std::mt19937_64 rng(seed);
      GenerationContext ctx(seed ^ 0x5bf0a8b1461f4c11ull);
      PayloadTree cur = tree;
      for (int k = 0; k < actions; ++k) {
        auto nodes = explore_operable_nodes(cur);
        if (nodes.empty()) break;
        auto acts = propose(cur, nodes[rng() % nodes.size()], grammar, ctx);
        if (acts.empty()) continue;
        cur = apply(cur, acts[rng() % acts.size()]);
      }
      std::string mutated = reconstruct(cur);
      ++report.chains;
      if (bench.equivalent(p.text, mutated)) {
        ++report.equivalent_chains;
      } else {
        report.failures.push_back(VgpFailure{p.id, p.text, mutated});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Strategy comparison (Table IX convention: common-success query averages)
// ---------------------------------------------------------------------------

struct ComparisonColumn {
  std::string label;
  std::optional<double> asr;
  std::optional<double> median_query_common;
  std::optional<double> mean_query_common;
  int wins = 0;    // succeeded where the baseline (first column) failed
  int losses = 0;  // failed where the baseline succeeded
};

struct ComparisonTable {
  std::vector<ComparisonColumn> columns;
};

inline ComparisonTable compare_strategies(
    const std::vector<CampaignReport>& reports) {
  if (reports.empty()) throw MisalignedCampaigns("no campaigns to compare");
  auto ids_of = [](const CampaignReport& r) {
    std::vector<std::string> ids;
    for (const auto& rec : r.records) ids.push_back(rec.id + "|" + rec.payload);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  auto base_ids = ids_of(reports[0]);
  for (const auto& r : reports)
    if (ids_of(r) != base_ids)
      throw MisalignedCampaigns("campaigns cover different datasets");

  // payload -> success/queries per report
  std::vector<std::map<std::string, const PayloadRecord*>> by_id;
  for (const auto& r : reports) {
    std::map<std::string, const PayloadRecord*> m;
    for (const auto& rec : r.records) m[rec.id] = &rec;
    by_id.push_back(std::move(m));
  }
  std::vector<std::string> common_success;
  for (const auto& [id, rec] : by_id[0]) {
    if (!rec->malicious) continue;
    bool all = true;
    for (const auto& m : by_id)
      if (!m.at(id)->success || !m.at(id)->initially_blocked) all = false;
    if (all) common_success.push_back(id);
  }

  ComparisonTable table;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    ComparisonColumn col;
    col.label = reports[k].campaign.detector_name + "/" +
                to_string(reports[k].campaign.config.strategy);
    col.asr = reports[k].aggregates.asr;
    std::vector<double> queries;
    for (const auto& id : common_success)
      queries.push_back(static_cast<double>(by_id[k].at(id)->queries));
    col.median_query_common = harness_detail::percentile(queries, 0.5);
    if (!queries.empty()) {
      double sum = 0;
      for (double q : queries) sum += q;
      col.mean_query_common = sum / static_cast<double>(queries.size());
    }
    if (k > 0 && reports.size() > 1) {
      for (const auto& [id, rec] : by_id[k]) {
        if (!rec->malicious || !rec->initially_blocked) continue;
        const PayloadRecord* base = by_id[0].at(id);
        if (rec->success && !base->success) ++col.wins;
        if (!rec->success && base->success) ++col.losses;
      }
    }
    table.columns.push_back(std::move(col));
  }
  return table;
}

inline std::string render_text(const ComparisonTable& table) {
  std::ostringstream os;
  os << "strategy                         ASR      medianQ  meanQ    win/loss\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    const auto& c = table.columns[i];
    char buf[160];
    std::string asr = c.asr ? std::to_string(*c.asr * 100.0).substr(0, 5) + "%"
                            : "n/a";
    std::string medq =
        c.median_query_common ? std::to_string(*c.median_query_common)
                                    .substr(0, 6)
                              : "n/a";
    std::string meanq = c.mean_query_common
                            ? std::to_string(*c.mean_query_common).substr(0, 6)
                            : "n/a";
    std::string wl = i == 0 || table.columns.size() == 1
                         ? "-"
                         : std::to_string(c.wins) + "/" +
                               std::to_string(c.losses);
    std::snprintf(buf, sizeof buf, "%-32s %-8s %-8s %-8s %s\n",
                  c.label.c_str(), asr.c_str(), medq.c_str(), meanq.c_str(),
                  wl.c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace advsqli
