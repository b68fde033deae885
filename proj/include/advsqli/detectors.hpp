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
// Black-box detector abstraction and the bundled targets: a signature mock
// WAF (binary verdicts, two tiers), a toy scoring detector (probability
// verdicts) and an HTTP adapter. The non_robust tier matches each rule
// after that rule's own transformation pipeline; the hardened tier decodes
// the wire for the request method, then matches every rule against both the
// decoded text and its preprocessed normalization.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "advsqli/common.hpp"
#include "advsqli/mutation.hpp"

namespace advsqli {

enum class VerdictLabel { kBlocked, kPassed };

struct Verdict {
  VerdictLabel label = VerdictLabel::kPassed;
  std::optional<double> score;
  std::chrono::microseconds latency{0};
  std::optional<int> raw_status;

  bool blocked() const { return label == VerdictLabel::kBlocked; }
};

// ---------------------------------------------------------------------------
// Pre-processing defense normalizer
// ---------------------------------------------------------------------------

// Lowercases, removes /*...*/ comments (unwrapping /*!...*/ bodies), and
// collapses control characters and duplicate whitespace to single spaces.
// Idempotent; unterminated comments are kept verbatim so a second pass is a
// fixed point.
inline std::string preprocess(const std::string& payload) {
  std::string lower = to_lower(payload);
  std::string out;
  out.reserve(lower.size());
  const std::size_t n = lower.size();
  std::size_t i = 0;
  while (i < n) {
    if (lower[i] == '/' && i + 1 < n && lower[i + 1] == '*') {
      std::size_t close = lower.find("*/", i + 2);
      if (close == std::string::npos) {
        out.append(lower, i, n - i);  // unterminated: keep verbatim
        break;
      }
      if (i + 2 < n && lower[i + 2] == '!') {
        std::size_t body = i + 3;
        while (body < close && detail::is_digit(lower[body])) ++body;
        for (std::size_t k = body; k < close; ++k) {
          unsigned char b = static_cast<unsigned char>(lower[k]);
          out.push_back((b < 0x20 || b == 0x7f) ? ' ' : lower[k]);
        }
      }
      i = close + 2;
      continue;
    }
    unsigned char c = static_cast<unsigned char>(lower[i]);
    out.push_back((c < 0x20 || c == 0x7f) ? ' ' : lower[i]);
    ++i;
  }
  std::string collapsed;
  collapsed.reserve(out.size());
  for (char c : out) {
    if (c == ' ' && !collapsed.empty() && collapsed.back() == ' ') continue;
    collapsed.push_back(c);
  }
  return collapsed;
}

// ---------------------------------------------------------------------------
// Signature rules
// ---------------------------------------------------------------------------

enum class RuleTransform {
  kLowercase,
  kUrlDecode,
  kStripBlockComments,
  kCollapseWhitespace,
  kStripInlineCommentMarkers,
};

enum class RuleTier { kNonRobust, kHardened };

struct SignatureRule {
  std::string id;
  RuleTier tier = RuleTier::kNonRobust;
  std::vector<RuleTransform> transforms;
  std::string pattern_source;
  std::regex pattern;

  std::string apply_transforms(const std::string& text) const {
    std::string s = text;
    for (RuleTransform t : transforms) {
      switch (t) {
        case RuleTransform::kLowercase:
          s = to_lower(s);
          break;
        case RuleTransform::kUrlDecode:
          s = codec::url_decode(s);
          break;
        case RuleTransform::kStripBlockComments: {
          std::string r;
          for (std::size_t i = 0; i < s.size();) {
            if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '*') {
              std::size_t close = s.find("*/", i + 2);
              if (close == std::string::npos) break;
              i = close + 2;
              continue;
            }
            r.push_back(s[i++]);
          }
          s = r;
          break;
        }
        case RuleTransform::kCollapseWhitespace: {
          std::string r;
          for (char c : s) {
            char m = detail::is_space(c) ? ' ' : c;
            if (m == ' ' && !r.empty() && r.back() == ' ') continue;
            r.push_back(m);
          }
          s = r;
          break;
        }
        case RuleTransform::kStripInlineCommentMarkers: {
          std::string r;
          for (std::size_t i = 0; i < s.size();) {
            if (s.compare(i, 3, "/*!") == 0) {
              std::size_t b = i + 3;
              while (b < s.size() && detail::is_digit(s[b])) ++b;
              i = b;
              continue;
            }
            if (s.compare(i, 2, "*/") == 0) {
              i += 2;
              continue;
            }
            r.push_back(s[i++]);
          }
          s = r;
          break;
        }
      }
    }
    return s;
  }

  bool matches(const std::string& text) const {
    return std::regex_search(apply_transforms(text), pattern);
  }
};

inline std::optional<RuleTransform> parse_transform(std::string_view name) {
  if (name == "lowercase") return RuleTransform::kLowercase;
  if (name == "url_decode") return RuleTransform::kUrlDecode;
  if (name == "strip_block_comments") return RuleTransform::kStripBlockComments;
  if (name == "collapse_whitespace") return RuleTransform::kCollapseWhitespace;
  if (name == "strip_inline_comment_markers")
    return RuleTransform::kStripInlineCommentMarkers;
  return std::nullopt;
}

// Compiles a rule pattern. A leading "(?i)" selects case-insensitive
// matching (std::regex has no inline flags).
inline std::regex compile_rule_pattern(std::string source) {
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (source.rfind("(?i)", 0) == 0) {
    source = source.substr(4);
    flags |= std::regex::icase;
  }
  return std::regex(source, flags);
}

// Line format: id<TAB>tier<TAB>transformations(comma-sep or '-')<TAB>pattern
inline std::vector<SignatureRule> parse_rule_pack(std::istream& in) {
  std::vector<SignatureRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 4)
      throw FormatError("expected 4 tab-separated columns", lineno);
    SignatureRule r;
    r.id = cols[0];
    if (cols[1] == "non_robust")
      r.tier = RuleTier::kNonRobust;
    else if (cols[1] == "hardened")
      r.tier = RuleTier::kHardened;
    else
      throw FormatError("unknown tier '" + cols[1] + "'", lineno);
    if (cols[2] != "-" && !cols[2].empty()) {
      std::stringstream ts(cols[2]);
      std::string item;
      while (std::getline(ts, item, ',')) {
        auto t = parse_transform(item);
        if (!t) throw FormatError("unknown transformation '" + item + "'",
                                  lineno);
        r.transforms.push_back(*t);
      }
    }
    r.pattern_source = cols[3];
    try {
      r.pattern = compile_rule_pattern(cols[3]);
    } catch (const std::regex_error& e) {
      throw FormatError(std::string("pattern does not compile: ") + e.what(),
                        lineno);
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

// The bundled rule pack. CRS-inspired categories; the non_robust tier
// deliberately matches raw wire bytes for the tautology family (so
// percent-encoded control characters slip through) and never unescapes
// JSON bodies.
inline const char* builtin_rule_pack_text() {
  return
      // tautology family (raw wire matching)
      "taut-eq\tnon_robust\t-\t(?i)\\bor\\s+\\d+\\s*=\\s*\\d+\n"
      "taut-eq-raw\tnon_robust\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+\\d+(\\s|\\+|%20)*(=|%3d)(\\s|\\+|%20)*\\d\n"
      "taut-like-raw\tnon_robust\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+\\w+(\\s|\\+|%20)+like(\\s|\\+|%20)+\n"
      "taut-quote-raw\tnon_robust\t-\t(?i)'[^']{0,20}'(\\s|\\+|%20)*(=|%3d|like)(\\s|\\+|%20)*'\n"
      "or-true\tnon_robust\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+(true|false)\\b\n"
      // decoded matching
      "taut-dquote-raw\tnon_robust\t-\t(?i)(\"|%22)[^\"']{0,20}(\"|%22)(\\s|\\+|%20)*(=|%3d)(\\s|\\+|%20)*(\"|%22)\n"
      "quote-or-quote\tnon_robust\turl_decode\t(?i)'\\s*(or|and)\\s*'\n"
      "union-select\tnon_robust\turl_decode\t(?i)union(\\s+(all|distinct))?\\s+select\n"
      "concat-call\tnon_robust\turl_decode\t(?i)\\bconcat\\s*\\(\n"
      "comment-seq\tnon_robust\turl_decode\t/\\*[^!]\n"
      "stacked\tnon_robust\turl_decode\t(?i);\\s*(drop|insert|update|delete|create|alter|truncate|exec|shutdown)\\b\n"
      "sleep-benchmark\tnon_robust\turl_decode\t(?i)\\b(sleep|benchmark)\\s*\\(\n"
      "hex-literal\tnon_robust\turl_decode\t(?i)0x[0-9a-f]{2,}\n"
      "info-schema\tnon_robust\turl_decode\t(?i)information_schema\n"
      "null-probe\tnon_robust\turl_decode\t(?i)\\bnull\\s*,\\s*null\\b\n"
      // hardened tier: same 15 signatures, matched against the decoded wire
      // and its normalization by the engine
      "taut-eq\thardened\t-\t(?i)\\bor\\s+\\d+\\s*=\\s*\\d+\n"
      "taut-eq-raw\thardened\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+\\d+(\\s|\\+|%20)*(=|%3d)(\\s|\\+|%20)*\\d\n"
      "taut-like-raw\thardened\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+\\w+(\\s|\\+|%20)+like(\\s|\\+|%20)+\n"
      "taut-quote-raw\thardened\t-\t(?i)'[^']{0,20}'(\\s|\\+|%20)*(=|%3d|like)(\\s|\\+|%20)*'\n"
      "or-true\thardened\t-\t(?i)(^|[^a-z])(or|and)(\\s|\\+|%20)+(true|false)\\b\n"
      "taut-dquote-raw\thardened\t-\t(?i)(\"|%22)[^\"']{0,20}(\"|%22)(\\s|\\+|%20)*(=|%3d)(\\s|\\+|%20)*(\"|%22)\n"
      "quote-or-quote\thardened\t-\t(?i)'\\s*(or|and)\\s*'\n"
      "union-select\thardened\t-\t(?i)union(\\s+(all|distinct))?\\s+select\n"
      "concat-call\thardened\t-\t(?i)\\bconcat\\s*\\(\n"
      "comment-seq\thardened\t-\t/\\*[^!]\n"
      "stacked\thardened\t-\t(?i);\\s*(drop|insert|update|delete|create|alter|truncate|exec|shutdown)\\b\n"
      "sleep-benchmark\thardened\t-\t(?i)\\b(sleep|benchmark)\\s*\\(\n"
      "hex-literal\thardened\t-\t(?i)0x[0-9a-f]{2,}\n"
      "info-schema\thardened\t-\t(?i)information_schema\n"
      "null-probe\thardened\t-\t(?i)\\bnull\\s*,\\s*null\\b\n";
}

inline std::vector<SignatureRule> builtin_rules() {
  std::istringstream in(builtin_rule_pack_text());
  return parse_rule_pack(in);
}

// ---------------------------------------------------------------------------
// Detector interface
// ---------------------------------------------------------------------------

class Detector {
 public:
  virtual ~Detector() = default;

  Verdict detect(const std::string& wire_text, RequestMethod method) {
    auto begin = std::chrono::steady_clock::now();
    Verdict v = do_detect(wire_text, method);
    v.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - begin);
    calls_.fetch_add(1, std::memory_order_relaxed);
    return v;
  }

  virtual bool with_probability() const = 0;
  virtual std::string name() const = 0;

  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual Verdict do_detect(const std::string& wire_text,
                            RequestMethod method) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

// Signature mock WAF. Binary verdicts only (BB w/o prob.).
class MockWaf : public Detector {
 public:
  MockWaf(RuleTier tier, std::vector<SignatureRule> rules)
      : tier_(tier) {
    for (auto& r : rules)
      if (r.tier == tier) rules_.push_back(std::move(r));
  }

  explicit MockWaf(RuleTier tier) : MockWaf(tier, builtin_rules()) {}

  bool with_probability() const override { return false; }
  std::string name() const override {
    return tier_ == RuleTier::kNonRobust ? "mock-nonrobust" : "mock-hardened";
  }

  const std::vector<SignatureRule>& rules() const { return rules_; }

 protected:
  Verdict do_detect(const std::string& wire, RequestMethod method) override {
    Verdict v;
    v.label = blocked_by_any(wire, method) ? VerdictLabel::kBlocked
                                           : VerdictLabel::kPassed;
    return v;
  }

 private:
  bool blocked_by_any(const std::string& wire, RequestMethod method) const {
    if (tier_ == RuleTier::kNonRobust) {
      for (const auto& r : rules_)
        if (r.matches(wire)) return true;
      return false;
    }
    const std::string decoded = decode_for_method(wire, method);
    const std::string normalized = preprocess(decoded);
    for (const auto& r : rules_)
      if (r.matches(decoded) || r.matches(normalized)) return true;
    return false;
  }

  RuleTier tier_;
  std::vector<SignatureRule> rules_;
};

// Toy scoring detector (BB w/ prob.): score = 1 - exp(-k * hits) over
// distinct signature fragments matched on the decoded, un-normalized
// payload.
class ToyScorer : public Detector {
 public:
  explicit ToyScorer(double k = 0.7, double threshold = 0.5)
      : k_(k), threshold_(threshold) {
    static const char* kFragments[] = {
        "(?i)or +\\d+ *= *\\d+",
        "(?i)union +(all +)?select",
        "(?i)' *(or|and) *'",
        "(?i)(sleep|benchmark) *\\(",
        "(?i)concat *\\(",
        "(?i)\\d[\"'] *(or|and) ",
    };
    for (const char* f : kFragments)
      fragments_.push_back(compile_rule_pattern(f));
  }

  bool with_probability() const override { return true; }
  std::string name() const override { return "scorer"; }

  double score(const std::string& payload) const {
    int hits = 0;
    for (const auto& f : fragments_)
      if (std::regex_search(payload, f)) ++hits;
    return 1.0 - std::exp(-k_ * hits);
  }

 protected:
  Verdict do_detect(const std::string& wire, RequestMethod method) override {
    Verdict v;
    double s = score(decode_for_method(wire, method));
    v.score = s;
    v.label = s >= threshold_ ? VerdictLabel::kBlocked : VerdictLabel::kPassed;
    return v;
  }

 private:
  double k_;
  double threshold_;
  std::vector<std::regex> fragments_;
};

// ---------------------------------------------------------------------------
// Session handle: memoizes verdicts so repeated submissions of the same
// wire text do not burn black-box queries.
// ---------------------------------------------------------------------------

class DetectorSession {
 public:
  explicit DetectorSession(Detector& detector) : detector_(detector) {}

  Verdict query(const std::string& wire, RequestMethod method) {
    auto key = std::make_pair(wire, method);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Verdict v = detector_.detect(wire, method);
    ++queries_;
    cache_.emplace(std::move(key), v);
    return v;
  }

  Verdict query_payload(const std::string& payload_text,
                        RequestMethod method) {
    return query(adapt_for_method(payload_text, method), method);
  }

  std::uint64_t queries_used() const { return queries_; }
  Detector& detector() { return detector_; }
  bool with_probability() const { return detector_.with_probability(); }

 private:
  Detector& detector_;
  std::map<std::pair<std::string, RequestMethod>, Verdict> cache_;
  std::uint64_t queries_ = 0;
};

}  // namespace advsqli
