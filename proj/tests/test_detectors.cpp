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

#include "advsqli/detectors.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "advsqli/http_detector.hpp"
#include "corpus_util.hpp"

namespace advsqli {
namespace {

TEST(MockWaf, BlocksClassicTautologyViaGet) {
  MockWaf waf(RuleTier::kNonRobust);
  Verdict v = waf.detect("1' or 1 = 1 --+", RequestMethod::kGet);
  EXPECT_TRUE(v.blocked());
  EXPECT_FALSE(v.score.has_value());
}

TEST(MockWaf, PercentEncodedWhitespaceSlipsThroughNonRobust) {
  MockWaf waf(RuleTier::kNonRobust);
  Verdict v = waf.detect("1' or%0A1=0x1 --+", RequestMethod::kGet);
  EXPECT_FALSE(v.blocked());
}

TEST(MockWaf, EmptyPayloadPasses) {
  MockWaf waf(RuleTier::kNonRobust);
  EXPECT_FALSE(waf.detect("", RequestMethod::kGet).blocked());
}

TEST(MockWaf, HardenedCatchesPercentEncodedWhitespace) {
  MockWaf waf(RuleTier::kHardened);
  EXPECT_TRUE(waf.detect("1' or%0A1=1 --+", RequestMethod::kGet).blocked());
}

TEST(MockWaf, EncodedWireVerdictsPerMethod) {
  MockWaf waf(RuleTier::kNonRobust);
  // The classic payload is caught on every method once adapted.
  const std::string p = "1' or 1 = 1 --+";
  for (RequestMethod m : {RequestMethod::kGet, RequestMethod::kPost,
                          RequestMethod::kGetJson, RequestMethod::kPostJson}) {
    EXPECT_TRUE(waf.detect(adapt_for_method(p, m), m).blocked())
        << to_string(m);
  }
  // Double-quote string tautologies are missed on JSON methods only
  // (escaped quote defeats the boundary rule).
  const std::string q = "1\" or \"x\"=\"x\" --";
  EXPECT_TRUE(
      waf.detect(adapt_for_method(q, RequestMethod::kGet), RequestMethod::kGet)
          .blocked());
  EXPECT_FALSE(waf.detect(adapt_for_method(q, RequestMethod::kGetJson),
                          RequestMethod::kGetJson)
                   .blocked());
}

TEST(MockWaf, HardenedClosesJsonGap) {
  MockWaf waf(RuleTier::kHardened);
  const std::string q = "1\" or \"x\"=\"x\" --";
  EXPECT_TRUE(
      waf.detect(adapt_for_method(q, RequestMethod::kGet), RequestMethod::kGet)
          .blocked());
  EXPECT_TRUE(waf.detect(adapt_for_method(q, RequestMethod::kGetJson),
                         RequestMethod::kGetJson)
                  .blocked());
}

TEST(Preprocess, RemovesCommentsCaseAndControls) {
  EXPECT_EQ(preprocess("/*foo*/oR\t1=1"), "or 1=1");
}

TEST(Preprocess, IdentityOnNormalText) {
  EXPECT_EQ(preprocess("or 1=1"), "or 1=1");
}

TEST(Preprocess, UnwrapsInlineComments) {
  EXPECT_EQ(preprocess("/*!union*/ select"), "union select");
  EXPECT_EQ(preprocess("/*!50000select*/"), "select");
}

TEST(Preprocess, IdempotentOnCorpusAndFuzz) {
  for (const auto& p : testing_corpus()) {
    std::string once = preprocess(p.text);
    EXPECT_EQ(preprocess(once), once) << p.id;
  }
  std::mt19937_64 rng(77);
  const std::string alphabet = "ao1 */!'\"\t\n%-=#;xZ/*";
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    std::size_t len = rng() % 24;
    for (std::size_t j = 0; j < len; ++j)
      s.push_back(alphabet[rng() % alphabet.size()]);
    std::string once = preprocess(s);
    EXPECT_EQ(preprocess(once), once) << "input: [" << s << "]";
  }
}

TEST(ToyScorer, ScoreCurve) {
  ToyScorer scorer;
  EXPECT_DOUBLE_EQ(scorer.score("hello"), 0.0);
  EXPECT_NEAR(scorer.score("or 1 = 1"), 0.5034, 5e-4);  // 1 - e^-0.7
  // many distinct fragments drive the score toward 1
  double s = scorer.score(
      "1' or 1=1 union select sleep(1), concat('a','b') or 'x' or '1\" or ");
  EXPECT_GT(s, 0.9);
}

TEST(ToyScorer, VerdictCarriesScore) {
  ToyScorer scorer;
  Verdict blocked = scorer.detect("or 1 = 1", RequestMethod::kGet);
  EXPECT_TRUE(blocked.blocked());
  ASSERT_TRUE(blocked.score.has_value());
  EXPECT_GE(*blocked.score, 0.5);
  Verdict passed = scorer.detect("hello", RequestMethod::kGet);
  EXPECT_FALSE(passed.blocked());
  ASSERT_TRUE(passed.score.has_value());
  EXPECT_DOUBLE_EQ(*passed.score, 0.0);
}

// Hardened dominates non_robust: anything the weak tier blocks, the strong
// tier blocks, across corpus payloads and random mutants on all methods.
TEST(Tiers, HardenedDominatesNonRobust) {
  MockWaf weak(RuleTier::kNonRobust);
  MockWaf strong(RuleTier::kHardened);
  Grammar g = builtin_grammar();
  GenerationContext ctx(31337);
  std::mt19937_64 rng(4);
  const RequestMethod methods[] = {RequestMethod::kGet, RequestMethod::kGetJson,
                                   RequestMethod::kPost,
                                   RequestMethod::kPostJson};
  auto check = [&](const std::string& text) {
    for (RequestMethod m : methods) {
      std::string wire = adapt_for_method(text, m);
      if (weak.detect(wire, m).blocked())
        EXPECT_TRUE(strong.detect(wire, m).blocked())
            << to_string(m) << " " << text;
    }
  };
  for (const auto& p : testing_corpus()) {
    check(p.text);
    PayloadTree t;
    try {
      t = build_tree(p);
    } catch (const LexError&) {
      continue;
    }
    auto nodes = explore_operable_nodes(t);
    if (nodes.empty()) continue;
    for (int i = 0; i < 8; ++i) {
      const NodeRef& ref = nodes[rng() % nodes.size()];
      auto actions = propose(t, ref, g, ctx);
      if (actions.empty()) continue;
      check(reconstruct(apply(t, actions[rng() % actions.size()])));
    }
  }
}

TEST(DetectorSession, MemoizationSkipsRepeatQueries) {
  MockWaf waf(RuleTier::kNonRobust);
  DetectorSession session(waf);
  session.query_payload("1' or 1=1 --+", RequestMethod::kGet);
  session.query_payload("1' or 1=1 --+", RequestMethod::kGet);
  session.query_payload("1' or 2=2 --+", RequestMethod::kGet);
  EXPECT_EQ(session.queries_used(), 2u);
  EXPECT_EQ(waf.calls(), 2u);
}

TEST(RulePack, ParsesBuiltinAndCountsTiers) {
  auto rules = builtin_rules();
  int weak = 0, strong = 0;
  for (const auto& r : rules)
    (r.tier == RuleTier::kNonRobust ? weak : strong)++;
  EXPECT_EQ(weak, 15);
  EXPECT_EQ(strong, 15);
}

TEST(RulePack, ShippedFileMatchesBuiltin) {
  std::ifstream in(data_path("rules.tsv"));
  ASSERT_TRUE(in.good());
  auto rules = parse_rule_pack(in);
  auto builtins = builtin_rules();
  ASSERT_EQ(rules.size(), builtins.size());
  for (std::size_t i = 0; i < rules.size(); ++i)
    EXPECT_EQ(rules[i].pattern_source, builtins[i].pattern_source);
}

TEST(RulePack, RejectsMalformedLines) {
  std::istringstream bad_cols("id\tnon_robust\tmissing-pattern\n");
  EXPECT_THROW(parse_rule_pack(bad_cols), FormatError);
  std::istringstream bad_tier("id\tweird\t-\tx\n");
  EXPECT_THROW(parse_rule_pack(bad_tier), FormatError);
  std::istringstream bad_transform("id\tnon_robust\tshout\tx\n");
  EXPECT_THROW(parse_rule_pack(bad_transform), FormatError);
  std::istringstream bad_pattern("id\tnon_robust\t-\t([unclosed\n");
  try {
    parse_rule_pack(bad_pattern);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(HttpDetector, StatusSignals) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Get("/vuln", [&](const httplib::Request& req,
                          httplib::Response& res) {
    ++hits;
    auto it = req.params.find("id");
    std::string v = it == req.params.end() ? "" : it->second;
    if (v.find("blockme") != std::string::npos) {
      res.status = 403;
      res.set_content("forbidden", "text/plain");
    } else {
      res.status = 200;
      res.set_content("ok", "text/plain");
    }
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/vuln";
  cfg.rate_limit_per_sec = 0;  // no throttling in tests
  HttpDetector det(cfg);
  EXPECT_TRUE(det.detect("blockme", RequestMethod::kGet).blocked());
  EXPECT_FALSE(det.detect("hello", RequestMethod::kGet).blocked());
  EXPECT_EQ(det.detect("hello", RequestMethod::kGet).raw_status.value(), 200);

  server.stop();
  t.join();
}

TEST(HttpDetector, TooManyRequestsBackoffThenPass) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Get("/vuln", [&](const httplib::Request&, httplib::Response& res) {
    int n = ++hits;
    res.status = n <= 3 ? 429 : 200;
    res.set_content(n <= 3 ? "slow down" : "ok", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/vuln";
  cfg.rate_limit_per_sec = 0;
  HttpDetector det(cfg);
  DetectorSession session(det);
  Verdict v = session.query("x", RequestMethod::kGet);
  EXPECT_FALSE(v.blocked());
  EXPECT_EQ(det.attempts_logged(), 4);   // three 429s, then 200
  EXPECT_EQ(session.queries_used(), 1u); // one black-box query
  EXPECT_EQ(det.calls(), 1u);

  server.stop();
  t.join();
}

TEST(HttpDetector, TransportFailureAborts) {
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:1/vuln";  // nothing listens here
  cfg.rate_limit_per_sec = 0;
  cfg.transport_retries = 1;
  cfg.timeout_seconds = 1;
  HttpDetector det(cfg);
  EXPECT_THROW(det.detect("x", RequestMethod::kGet), DetectorUnavailable);
}

}  // namespace
}  // namespace advsqli
