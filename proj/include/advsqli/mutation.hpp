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
// Turns grammar candidates into concrete tree edits and adapts payload text
// to the wire encoding of each request method. propose/apply are pure:
// apply returns a fresh tree and bumps its generation, which invalidates
// actions proposed against older tree states (StaleNodeRef).

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "advsqli/common.hpp"
#include "advsqli/grammar.hpp"
#include "advsqli/payload.hpp"

namespace advsqli {

enum class Operator {
  kCaseSwapping,
  kWhitespaceSubstitution,
  kCommentInjection,
  kCommentRewriting,
  kIntegerEncoding,
  kOperatorSwapping,
  kLogicalInvariant,
  kInlineComment,
  kWhereRewriting,
  kDmlSubstitution,
  kTautologySubstitution,
};

inline const char* to_string(Operator op) {
  switch (op) {
    case Operator::kCaseSwapping: return "case_swapping";
    case Operator::kWhitespaceSubstitution: return "whitespace_substitution";
    case Operator::kCommentInjection: return "comment_injection";
    case Operator::kCommentRewriting: return "comment_rewriting";
    case Operator::kIntegerEncoding: return "integer_encoding";
    case Operator::kOperatorSwapping: return "operator_swapping";
    case Operator::kLogicalInvariant: return "logical_invariant";
    case Operator::kInlineComment: return "inline_comment";
    case Operator::kWhereRewriting: return "where_rewriting";
    case Operator::kDmlSubstitution: return "dml_substitution";
    case Operator::kTautologySubstitution: return "tautology_substitution";
  }
  return "?";
}

// Starred operators in the mutation-method table: their byte output depends
// on the request method in use.
inline bool operator_is_method_flexible(Operator op) {
  return op == Operator::kWhitespaceSubstitution ||
         op == Operator::kCommentInjection ||
         op == Operator::kDmlSubstitution;
}

struct MutationAction {
  NodeRef node_ref;
  std::string replacement;
  Operator op = Operator::kTautologySubstitution;
  bool method_flexible = false;
};

struct ProposeOptions {
  int candidate_cap = 16;
  RequestMethod method = RequestMethod::kGet;
};

namespace detail {

// Quote kinds present anywhere in the payload. A replacement may only use a
// quote character the payload already carries: in an injection context the
// engine never reached, the payload is plain string content, and a fresh
// quote would break out of it.
struct QuoteBudget {
  bool single = false;
  bool dquote = false;

  static QuoteBudget of(const PayloadTree& tree) {
    QuoteBudget q;
    std::string text = tree.split.left + tree.root.text() + tree.split.right;
    q.single = text.find('\'') != std::string::npos;
    q.dquote = text.find('"') != std::string::npos;
    return q;
  }

  bool admits(const std::string& replacement) const {
    if (!single && replacement.find('\'') != std::string::npos) return false;
    if (!dquote && replacement.find('"') != std::string::npos) return false;
    return true;
  }
};

}  // namespace detail

namespace detail {

inline bool all_whitespace(const std::string& s) {
  for (char c : s)
    if (!is_space(c)) return false;
  return !s.empty();
}

inline Operator classify_operator(const Grammar& g, const std::string& entry,
                                  const std::string& content,
                                  const std::string& replacement) {
  if (entry == kEntryTautology) {
    for (const auto& v : g.functions.at("operator_swap")(content))
      if (v == replacement) return Operator::kOperatorSwapping;
    for (const auto& v : g.functions.at("logical_invariant")(content))
      if (v == replacement) return Operator::kLogicalInvariant;
    return Operator::kTautologySubstitution;
  }
  if (entry == kEntryWhitespace)
    return all_whitespace(replacement) ? Operator::kWhitespaceSubstitution
                                       : Operator::kCommentInjection;
  if (entry == kEntryWord) return Operator::kCaseSwapping;
  if (entry == kEntryInline) return Operator::kInlineComment;
  if (entry == kEntryNumber) return Operator::kIntegerEncoding;
  if (entry == kEntryWhere) return Operator::kWhereRewriting;
  if (entry == kEntryComment) return Operator::kCommentRewriting;
  return Operator::kDmlSubstitution;
}

}  // namespace detail

// Candidate actions for one operable node. Deterministic given the context's
// rng state: shallow enumeration first (catalog order), then weighted
// samples up to the cap. GET proposals never contain '#', which cannot
// travel inside a comment on that method.
inline std::vector<MutationAction> propose(const PayloadTree& tree,
                                           const NodeRef& ref,
                                           const Grammar& grammar,
                                           GenerationContext& ctx,
                                           const ProposeOptions& opts = {}) {
  const TreeNode* node = tree.find(ref);
  if (node == nullptr)
    throw StaleNodeRef("propose: node reference is stale");
  std::vector<MutationAction> out;
  if (node->locked) return out;
  const std::string content = node->text();
  const std::string lexeme = node->leaf ? node->token.lexeme : content;
  std::vector<std::string> entries = entry_symbols_for(node->role, lexeme);
  if (entries.empty()) return out;
  const detail::QuoteBudget quotes = detail::QuoteBudget::of(tree);

  auto admit = [&](const std::string& entry, const std::string& replacement) {
    if (replacement.empty() || replacement == content) return;
    if (static_cast<int>(out.size()) >= opts.candidate_cap) return;
    if (opts.method == RequestMethod::kGet &&
        replacement.find('#') != std::string::npos)
      return;
    if (!quotes.admits(replacement)) return;
    for (const auto& a : out)
      if (a.replacement == replacement) return;
    MutationAction action;
    action.node_ref = ref;
    action.replacement = replacement;
    action.op = detail::classify_operator(grammar, entry, content, replacement);
    action.method_flexible = operator_is_method_flexible(action.op);
    out.push_back(std::move(action));
  };

  for (const auto& entry : entries)
    for (const auto& s : enumerate_shallow(grammar, entry, content))
      admit(entry, s);

  const int max_tries = opts.candidate_cap * 6;
  for (int t = 0; t < max_tries &&
                  static_cast<int>(out.size()) < opts.candidate_cap;
       ++t) {
    const std::string& entry = entries[static_cast<std::size_t>(t) %
                                       entries.size()];
    admit(entry, generate(grammar, entry, ctx, content));
  }
  return out;
}

// Applies one action, returning a new tree; the input is untouched. The
// designated node collapses to a single leaf carrying the replacement.
inline PayloadTree apply(const PayloadTree& tree, const MutationAction& a) {
  PayloadTree next = tree;
  next.generation = tree.generation;  // find() checks against this
  TreeNode* node = next.find_mutable(a.node_ref);
  if (node == nullptr)
    throw StaleNodeRef("apply: node reference is stale");
  Role role = node->role;
  TokenKind kind = node->leaf ? node->token.kind : TokenKind::kIdentifier;
  node->leaf = true;
  node->children.clear();
  node->role = role;
  node->locked = false;
  node->token.kind = kind;
  node->token.lexeme = a.replacement;
  node->token.begin = node->token.end = 0;
  ++next.generation;
  return next;
}

// Applies one candidate per node in a single generation step. Deeper paths
// are applied first so a subtree replacement cleanly supersedes edits within
// it. All refs must match the input tree's generation.
inline PayloadTree apply_assignment(const PayloadTree& tree,
                                    std::vector<MutationAction> actions) {
  PayloadTree next = tree;
  std::stable_sort(actions.begin(), actions.end(),
                   [](const MutationAction& x, const MutationAction& y) {
                     return x.node_ref.path.size() > y.node_ref.path.size();
                   });
  for (const auto& a : actions) {
    if (a.node_ref.generation != tree.generation)
      throw StaleNodeRef("apply_assignment: stale action");
    TreeNode* node = next.find_mutable(a.node_ref);
    if (node == nullptr) continue;  // superseded by a deeper-first sibling
    Role role = node->role;
    TokenKind kind = node->leaf ? node->token.kind : TokenKind::kIdentifier;
    node->leaf = true;
    node->children.clear();
    node->role = role;
    node->locked = false;
    node->token.kind = kind;
    node->token.lexeme = a.replacement;
  }
  ++next.generation;
  return next;
}

// Payload text -> wire text for a request method. Non-JSON methods use
// query-component percent encoding; JSON methods embed the payload as a
// JSON string body with standard escapes and no percent encoding.
inline std::string adapt_for_method(const std::string& payload_text,
                                    RequestMethod method) {
  if (is_json_method(method)) return codec::json_escape(payload_text);
  return codec::url_encode(payload_text);
}

// Wire text -> payload text (the decoder a receiving service would run).
inline std::string decode_for_method(const std::string& wire_text,
                                     RequestMethod method) {
  if (is_json_method(method)) return codec::json_unescape(wire_text);
  return codec::url_decode(wire_text);
}

}  // namespace advsqli
