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
// Shared fixtures for the test suites: corpus loading and an independent
// literal-comparison evaluator used as the tautology-tagging oracle. The
// evaluator deliberately takes a different route (strtold / strtoull) than
// the library's exact decimal comparison.

#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "advsqli/payload.hpp"

#ifndef ADVSQLI_SOURCE_DIR
#define ADVSQLI_SOURCE_DIR "."
#endif

namespace advsqli {

inline std::string data_path(const std::string& name) {
  return std::string(ADVSQLI_SOURCE_DIR) + "/data/" + name;
}

// Minimal CSV reader for tests (the harness has its own).
inline std::vector<RawPayload> testing_corpus() {
  static std::vector<RawPayload> corpus = [] {
    std::vector<RawPayload> out;
    std::ifstream in(data_path("corpus.csv"), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string all = ss.str();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < all.size(); ++i) {
      char c = all[i];
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
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else if (c == ',') {
        row.push_back(field);
        field.clear();
      } else if (c == '\n') {
        row.push_back(field);
        field.clear();
        rows.push_back(row);
        row.clear();
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    if (!field.empty() || !row.empty()) {
      row.push_back(field);
      rows.push_back(row);
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {  // skip header
      if (rows[r].size() < 2) continue;
      RawPayload p;
      p.text = rows[r][0];
      p.label = rows[r][1] == "1" ? Label::kMalicious : Label::kBenign;
      p.id = "corpus-" + std::to_string(r);
      out.push_back(std::move(p));
    }
    return out;
  }();
  return corpus;
}

inline std::vector<RawPayload> malicious_corpus() {
  std::vector<RawPayload> out;
  for (const auto& p : testing_corpus())
    if (p.label == Label::kMalicious) out.push_back(p);
  return out;
}

inline std::vector<NodeRef> nodes_of(const PayloadTree& tree) {
  std::vector<NodeRef> out;
  std::vector<int> path;
  auto walk = [&](auto&& self, const TreeNode& node) -> void {
    out.push_back(NodeRef{path, tree.generation});
    if (node.leaf) return;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      path.push_back(static_cast<int>(i));
      self(self, node.children[i]);
      path.pop_back();
    }
  };
  walk(walk, tree.root);
  return out;
}

// --- independent comparison oracle ---------------------------------------

struct IndepOperand {
  bool is_string = false;
  long double num = 0;
  std::string str;     // unquoted content
  std::string lexeme;  // as written, sign included for numbers
};

inline std::optional<IndepOperand> indep_parse_operand(const std::string& s) {
  IndepOperand op;
  std::string t = s;
  // trim
  while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.erase(0, 1);
  while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.pop_back();
  if (t.empty()) return std::nullopt;
  if (t.front() == '\'' || t.front() == '"') {
    if (t.size() < 2 || t.back() != t.front()) return std::nullopt;
    op.is_string = true;
    op.str = t.substr(1, t.size() - 2);
    op.lexeme = t;
    return op;
  }
  bool neg = false;
  std::string body = t;
  if (body.front() == '-' || body.front() == '+') {
    neg = body.front() == '-';
    body.erase(0, 1);
  }
  char* end = nullptr;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    unsigned long long v = std::strtoull(body.c_str(), &end, 16);
    if (end == nullptr || *end != '\0') return std::nullopt;
    op.num = static_cast<long double>(v);
  } else {
    op.num = std::strtold(body.c_str(), &end);
    if (end == nullptr || *end != '\0') return std::nullopt;
  }
  if (neg) op.num = -op.num;
  op.lexeme = t;
  return op;
}

inline std::optional<bool> indep_evaluate(const std::string& lhs,
                                          const std::string& op,
                                          const std::string& rhs) {
  auto a = indep_parse_operand(lhs);
  auto b = indep_parse_operand(rhs);
  if (!a || !b || a->is_string != b->is_string) return std::nullopt;
  std::string o = to_lower(op);
  if (o == "like") {
    const std::string& x = a->is_string ? a->str : a->lexeme;
    const std::string& y = b->is_string ? b->str : b->lexeme;
    if (x.find_first_of("%_") != std::string::npos ||
        y.find_first_of("%_") != std::string::npos)
      return std::nullopt;
    return x == y;
  }
  if (a->is_string) {
    if (o == "=") return a->str == b->str;
    if (o == "<>" || o == "!=") return a->str != b->str;
    return std::nullopt;
  }
  if (o == "=") return a->num == b->num;
  if (o == "<>" || o == "!=") return a->num != b->num;
  if (o == "<") return a->num < b->num;
  if (o == ">") return a->num > b->num;
  if (o == "<=") return a->num <= b->num;
  if (o == ">=") return a->num >= b->num;
  return std::nullopt;
}

// Splits a tagged tautology subtree's text into (lhs, op, rhs) and runs the
// independent evaluator on it.
inline bool indep_tautology_true(const std::string& text) {
  static const char* kOps[] = {"<>", "<=", ">=", "!=", "=", "<", ">"};
  // like as word
  std::string lower = to_lower(text);
  std::size_t like = lower.find(" like ");
  if (like == std::string::npos) like = lower.find("\tlike\t");
  if (like != std::string::npos) {
    auto v = indep_evaluate(text.substr(0, like), "like",
                            text.substr(like + 6));
    return v.value_or(false);
  }
  for (const char* op : kOps) {
    // find op outside quotes
    bool in_q = false;
    char q = 0;
    std::size_t len = std::string(op).size();
    for (std::size_t i = 0; i + len <= text.size(); ++i) {
      char c = text[i];
      if (in_q) {
        if (c == q) in_q = false;
        continue;
      }
      if (c == '\'' || c == '"') {
        in_q = true;
        q = c;
        continue;
      }
      if (text.compare(i, len, op) == 0) {
        auto v = indep_evaluate(text.substr(0, i), op, text.substr(i + len));
        return v.value_or(false);
      }
    }
  }
  return false;
}

}  // namespace advsqli
