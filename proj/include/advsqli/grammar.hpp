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
// Context-free grammar (S, V, Sigma, R) for semantically equivalent SQL
// fragment generation, with decay-weighted alternative selection. Selection
// weight of an alternative chosen C times along the current derivation chain
// is D^C, so recursion stays possible but improbable; a depth cap makes
// termination certain. Parameterized terminals (@swap_case and friends)
// transform the content of the node being mutated.

#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advsqli/common.hpp"
#include "advsqli/payload.hpp"

namespace advsqli {

// Entry symbols, one per mutable role.
inline constexpr const char* kEntryTautology = "S_tau";
inline constexpr const char* kEntryInline = "S_forall";
inline constexpr const char* kEntryWord = "S_forall_word";
inline constexpr const char* kEntryNumber = "S_forall_number";
inline constexpr const char* kEntryWhere = "S_where";
inline constexpr const char* kEntryWhitespace = "S_ws";
inline constexpr const char* kEntryComment = "S_comment";
inline constexpr const char* kEntryDmlOr = "S_dml_or";
inline constexpr const char* kEntryDmlAnd = "S_dml_and";

enum class ItemKind { kSymbol, kCatalog, kLiteral, kFunction };

struct RuleItem {
  ItemKind kind;
  std::string name;  // symbol/catalog/function name, or literal text
};

using Alternative = std::vector<RuleItem>;

struct TerminalCatalog {
  std::map<std::string, std::vector<std::string>> sets;

  const std::vector<std::string>* find(const std::string& name) const {
    auto it = sets.find(name);
    return it == sets.end() ? nullptr : &it->second;
  }
};

// Parameterized terminal: maps the mutated node's content to the list of
// admissible outputs.
using TerminalFn =
    std::function<std::vector<std::string>(const std::string& content)>;

struct Grammar {
  std::set<std::string> start_symbols;
  std::set<std::string> nonterminals;
  TerminalCatalog catalog;
  std::map<std::string, std::vector<Alternative>> rules;
  std::map<std::string, TerminalFn> functions;

  // min_height[s]: least number of nested expansions needed to reach an
  // all-terminal derivation from s. Infinite (absent) means malformed.
  std::map<std::string, int> min_height;

  bool known_symbol(const std::string& name) const {
    return rules.count(name) > 0;
  }

  void compute_min_heights() {
    min_height.clear();
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& [sym, alts] : rules) {
        int best = -1;
        for (const auto& alt : alts) {
          int worst = 0;
          bool ok = true;
          for (const auto& item : alt) {
            if (item.kind != ItemKind::kSymbol) continue;
            auto it = min_height.find(item.name);
            if (it == min_height.end()) {
              ok = false;
              break;
            }
            worst = std::max(worst, it->second);
          }
          if (ok) best = best < 0 ? worst + 1 : std::min(best, worst + 1);
        }
        if (best >= 0) {
          auto it = min_height.find(sym);
          if (it == min_height.end() || it->second != best) {
            min_height[sym] = best;
            changed = true;
          }
        }
      }
    }
  }

  // Structural validation; returns human-readable problems, empty when
  // well-formed.
  std::vector<std::string> validate() const {
    std::vector<std::string> problems;
    for (const auto& [sym, alts] : rules) {
      if (catalog.find(sym) != nullptr)
        problems.push_back("symbol '" + sym + "' collides with a catalog");
      if (alts.empty())
        problems.push_back("symbol '" + sym + "' has no alternatives");
      for (const auto& alt : alts) {
        for (const auto& item : alt) {
          switch (item.kind) {
            case ItemKind::kSymbol:
              if (!rules.count(item.name))
                problems.push_back("undefined symbol '" + item.name +
                                   "' referenced from '" + sym + "'");
              break;
            case ItemKind::kCatalog:
              if (!catalog.find(item.name))
                problems.push_back("undefined catalog '" + item.name +
                                   "' referenced from '" + sym + "'");
              break;
            case ItemKind::kFunction:
              if (!functions.count(item.name))
                problems.push_back("undefined function '@" + item.name +
                                   "' referenced from '" + sym + "'");
              break;
            case ItemKind::kLiteral:
              break;
          }
        }
      }
      if (!min_height.count(sym))
        problems.push_back("symbol '" + sym +
                           "' cannot reach an all-terminal derivation");
    }
    return problems;
  }
};

// Per-session generation state: decay rate, chosen counts, depth cap, rng.
struct GenerationContext {
  double decay_rate = 0.5;
  std::map<std::pair<std::string, int>, int> chosen_counts;
  int depth_cap = 12;
  std::mt19937_64 rng{0xadf5011};

  explicit GenerationContext(std::uint64_t seed = 0xadf5011) : rng(seed) {}
};

// weight(e) = D^C[e] when e has been chosen, else 1.0. Computed by repeated
// multiplication so dyadic decay rates stay bit-exact.
inline std::vector<double> alternative_weights(
    const std::string& symbol, std::size_t n_alternatives,
    const std::map<std::pair<std::string, int>, int>& counts, double decay) {
  std::vector<double> weights(n_alternatives, 1.0);
  for (std::size_t i = 0; i < n_alternatives; ++i) {
    auto it = counts.find({symbol, static_cast<int>(i)});
    if (it == counts.end()) continue;
    double w = 1.0;
    for (int k = 0; k < it->second; ++k) w *= decay;
    weights[i] = w;
  }
  return weights;
}

// Draws an index with probability weights[i] / sum(weights). Hand-rolled so
// results are identical across standard libraries for a fixed seed.
inline std::size_t weighted_choice(const std::vector<double>& weights,
                                   std::mt19937_64& rng) {
  if (weights.empty()) throw EmptyAlternatives("weighted_choice: no weights");
  double sum = 0;
  for (double w : weights) sum += w;
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * sum;
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

namespace detail {

struct GenerationVisit {
  const Grammar& grammar;
  GenerationContext& ctx;
  const std::string& content;

  std::string expand(const std::string& symbol, int depth) {
    auto rit = grammar.rules.find(symbol);
    if (rit == grammar.rules.end())
      throw Error("generate: unknown symbol '" + symbol + "'");
    const auto& alts = rit->second;

    const int budget = ctx.depth_cap - depth;
    std::vector<int> eligible;
    for (std::size_t i = 0; i < alts.size(); ++i) {
      int worst = 0;
      bool ok = true;
      for (const auto& item : alts[i]) {
        if (item.kind != ItemKind::kSymbol) continue;
        auto mh = grammar.min_height.find(item.name);
        if (mh == grammar.min_height.end()) {
          ok = false;
          break;
        }
        worst = std::max(worst, mh->second);
      }
      if (ok && worst <= budget - 1) eligible.push_back(static_cast<int>(i));
    }
    if (eligible.empty())
      throw DepthExhausted("no all-terminal alternative for '" + symbol +
                           "' at depth cap");

    std::vector<double> weights;
    weights.reserve(eligible.size());
    {
      auto all = alternative_weights(symbol, alts.size(), ctx.chosen_counts,
                                     ctx.decay_rate);
      for (int idx : eligible) weights.push_back(all[static_cast<size_t>(idx)]);
    }
    const int chosen = eligible[weighted_choice(weights, ctx.rng)];

    auto key = std::make_pair(symbol, chosen);
    ++ctx.chosen_counts[key];
    std::string out;
    for (const auto& item : alts[static_cast<std::size_t>(chosen)]) {
      switch (item.kind) {
        case ItemKind::kSymbol:
          out += expand(item.name, depth + 1);
          break;
        case ItemKind::kLiteral:
          out += item.name;
          break;
        case ItemKind::kCatalog: {
          const auto* entries = grammar.catalog.find(item.name);
          if (!entries || entries->empty())
            throw Error("empty catalog '" + item.name + "'");
          auto w = alternative_weights(item.name, entries->size(),
                                       ctx.chosen_counts, ctx.decay_rate);
          out += (*entries)[weighted_choice(w, ctx.rng)];
          break;
        }
        case ItemKind::kFunction: {
          auto fit = grammar.functions.find(item.name);
          if (fit == grammar.functions.end())
            throw Error("unknown function '@" + item.name + "'");
          std::vector<std::string> variants = fit->second(content);
          if (!variants.empty()) {
            std::size_t pick =
                static_cast<std::size_t>(ctx.rng() % variants.size());
            out += variants[pick];
          }
          break;
        }
      }
    }
    --ctx.chosen_counts[key];
    if (ctx.chosen_counts[key] == 0) ctx.chosen_counts.erase(key);
    return out;
  }
};

}  // namespace detail

// Runs one weighted derivation from entry_symbol. `content` feeds the
// parameterized terminals and is the text of the node under mutation.
inline std::string generate(const Grammar& grammar,
                            const std::string& entry_symbol,
                            GenerationContext& ctx,
                            const std::string& content = "") {
  detail::GenerationVisit visit{grammar, ctx, content};
  return visit.expand(entry_symbol, 0);
}

// ---------------------------------------------------------------------------
// Parameterized terminal functions
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_plain_word(const std::string& w) {
  if (w.empty()) return false;
  for (char c : w)
    if (!is_ident_char(c)) return false;
  return true;
}

inline std::vector<std::string> fn_inline_comment(const std::string& word) {
  if (!is_plain_word(word)) return {};
  return {"/*!" + word + "*/", "/*!50000" + word + "*/"};
}

inline std::vector<std::string> fn_swap_case(const std::string& word) {
  std::vector<std::string> out;
  auto add = [&](std::string v) {
    if (v != word) out.push_back(std::move(v));
  };
  std::string lower, upper, cap, alt_even, alt_odd;
  for (std::size_t i = 0; i < word.size(); ++i) {
    char c = word[i];
    char lo = ascii_lower(c);
    char up = (lo >= 'a' && lo <= 'z') ? static_cast<char>(lo - 'a' + 'A') : c;
    lower.push_back(lo);
    upper.push_back(up);
    cap.push_back(i == 0 ? up : lo);
    alt_even.push_back(i % 2 == 0 ? lo : up);
    alt_odd.push_back(i % 2 == 0 ? up : lo);
  }
  if (lower == upper) return {};  // nothing to swap
  add(lower);
  add(upper);
  add(cap);
  add(alt_even);
  add(alt_odd);
  return out;
}

inline std::vector<std::string> fn_change_base(const std::string& number) {
  std::vector<std::string> out;
  if (number.empty()) return out;
  bool is_hex = number.size() > 2 && number[0] == '0' &&
                (number[1] == 'x' || number[1] == 'X');
  bool plain_int = !is_hex;
  if (plain_int)
    for (char c : number)
      if (!is_digit(c)) plain_int = false;
  if (is_hex) {
    unsigned long long v = 0;
    bool overflow = number.size() > 2 + 15;
    if (!overflow) {
      for (std::size_t i = 2; i < number.size(); ++i)
        v = v * 16 + static_cast<unsigned>(codec::hex_value(number[i]));
      out.push_back(std::to_string(v));
    }
  } else if (plain_int && number.size() <= 15) {
    unsigned long long v = 0;
    for (char c : number) v = v * 10 + static_cast<unsigned>(c - '0');
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", v);
    out.emplace_back(buf);
  }
  // A scalar subquery is numerically transparent in every value position
  // the bench accepts.
  out.push_back("(select " + number + ")");
  return out;
}

inline bool simple_like_safe(const std::string& s) {
  return s.find('%') == std::string::npos &&
         s.find('_') == std::string::npos &&
         s.find('\\') == std::string::npos;
}

// `A = B` <-> `A like B` when both operands are byte-identical literals.
inline std::vector<std::string> fn_operator_swap(const std::string& taut) {
  auto toks = [&]() -> std::optional<std::vector<Token>> {
    try {
      return tokenize(taut);
    } catch (const LexError&) {
      return std::nullopt;
    }
  }();
  if (!toks) return {};
  std::vector<const Token*> sig;
  for (const auto& t : *toks)
    if (t.kind != TokenKind::kWhitespace) sig.push_back(&t);
  if (sig.size() != 3) return {};
  const Token& lhs = *sig[0];
  const Token& op = *sig[1];
  const Token& rhs = *sig[2];
  bool literals = (lhs.kind == TokenKind::kNumber ||
                   lhs.kind == TokenKind::kString) &&
                  lhs.kind == rhs.kind;
  if (!literals || lhs.lexeme != rhs.lexeme) return {};
  if (!simple_like_safe(lhs.lexeme)) return {};
  if (op.kind == TokenKind::kOperator && op.lexeme == "=")
    return {lhs.lexeme + " like " + rhs.lexeme};
  if (op.kind == TokenKind::kKeyword && iequals(op.lexeme, "like"))
    return {lhs.lexeme + " = " + rhs.lexeme};
  return {};
}

inline std::vector<std::string> fn_logical_invariant(const std::string& taut) {
  if (taut.empty()) return {};
  return {taut + " and 'a' = 'a'", taut + " and 2<>3"};
}

inline std::optional<std::string> strip_where_prefix(
    const std::string& clause) {
  if (clause.size() < 5 || !iequals(clause.substr(0, 5), "where"))
    return std::nullopt;
  return clause.substr(5);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Built-in grammar
// ---------------------------------------------------------------------------

inline Grammar builtin_grammar() {
  Grammar g;
  auto& sets = g.catalog.sets;
  sets["sigma_true"] = {"1",    "(select 1)",  "2<>3",
                        "true", "True",        "not false",
                        "rand() >= 0"};
  sets["sigma_false"] = {"0", "(select 0)", "2=3", "false"};
  sets["sigma_and"] = {"and", "&&"};
  sets["sigma_or"] = {"or", "||"};
  sets["sigma_ws"] = {" ", "\t", "\n"};
  sets["sigma_slash"] = {"/"};
  sets["sigma_asterisk"] = {"*"};
  sets["sigma_where"] = {"where"};
  sets["tau_number"] = {"78 = 78", "1 = 1", "2021 like 2021", "0x2 = 2"};
  sets["tau_string"] = {"'6' like '6'", "'foo' like 'foo'", "'bar' = 'bar'",
                        "'a' = 'a'"};
  sets["tau_complex"] = {"(select ord('r') regexp 114) = 0x1",
                         "(select 1) = (select ord('r') between 114 and 115)"};
  sets["gamma_chars"] = {"a21r!", "skx9{1-", "2sd.$5s", "sd2j3znm", "39nsq1",
                         "foo",   "bar",     "x7pq2",   "qq1schc",  "zk42vv"};
  sets["gamma_sentence"] = {"hello world",       "today is dog",
                            "over the alphabet", "blue sky morning",
                            "many small steps",  "paper boats float",
                            "kind words cost nothing"};
  sets["gamma_benign"] = {"provincia=burgos", "login=karina9", "pic=1.gif",
                          "1.png",            "page=3",        "lang=en",
                          "ref=home",         "q=shoes",       "sid=ab12",
                          "city=leon",        "item=442",      "mode=list"};

  auto sym = [](const char* n) { return RuleItem{ItemKind::kSymbol, n}; };
  auto cat = [](const char* n) { return RuleItem{ItemKind::kCatalog, n}; };
  auto fn = [](const char* n) { return RuleItem{ItemKind::kFunction, n}; };

  g.rules[kEntryTautology] = {{sym("S_True")},       {cat("tau_string")},
                              {cat("tau_complex")},  {cat("tau_number")},
                              {fn("operator_swap")}, {fn("logical_invariant")}};
  g.rules[kEntryInline] = {{fn("inline_comment")}};
  g.rules[kEntryWord] = {{fn("swap_case")}};
  g.rules[kEntryNumber] = {{fn("change_base")}};
  g.rules[kEntryWhere] = {{fn("where_prepend_false")},
                          {fn("where_prepend_true")},
                          {fn("where_append_true")}};
  g.rules[kEntryWhitespace] = {{cat("sigma_ws")}, {sym("S_gamma")}};
  g.rules[kEntryComment] = {{sym("S_gamma")}};
  g.rules[kEntryDmlOr] = {{cat("sigma_or")}};
  g.rules[kEntryDmlAnd] = {{cat("sigma_and")}};

  g.rules["S_gamma"] = {
      {sym("S_gamma_left"), sym("S_gamma_body"), sym("S_gamma_right")}};
  g.rules["S_False"] = {{cat("sigma_false")},
                        {sym("S_False"), sym(kEntryWhitespace),
                         cat("sigma_or"), sym(kEntryWhitespace),
                         cat("sigma_false")}};
  g.rules["S_True"] = {{cat("sigma_true")},
                       {sym("S_True"), sym(kEntryWhitespace),
                        cat("sigma_and"), sym(kEntryWhitespace),
                        cat("sigma_true")}};
  g.rules["S_gamma_left"] = {{cat("sigma_slash"), sym("S_gamma_asterisk")}};
  g.rules["S_gamma_right"] = {{sym("S_gamma_asterisk"), cat("sigma_slash")}};
  g.rules["S_gamma_asterisk"] = {
      {sym("S_gamma_asterisk"), cat("sigma_asterisk")},
      {cat("sigma_asterisk")}};
  g.rules["S_gamma_body"] = {{cat("gamma_chars")},
                             {cat("gamma_sentence")},
                             {cat("gamma_benign")}};

  g.start_symbols = {kEntryTautology, kEntryInline,  kEntryWord,
                     kEntryNumber,    kEntryWhere,   kEntryWhitespace,
                     kEntryComment,   kEntryDmlOr,   kEntryDmlAnd};
  g.nonterminals = {"S_True",        "S_False",       "S_gamma",
                    "S_gamma_left",  "S_gamma_right", "S_gamma_asterisk",
                    "S_gamma_body"};

  g.functions["inline_comment"] = detail::fn_inline_comment;
  g.functions["swap_case"] = detail::fn_swap_case;
  g.functions["change_base"] = detail::fn_change_base;
  g.functions["operator_swap"] = detail::fn_operator_swap;
  g.functions["logical_invariant"] = detail::fn_logical_invariant;
  const auto& true_set = sets["sigma_true"];
  const auto& false_set = sets["sigma_false"];
  g.functions["where_append_true"] =
      [true_set](const std::string& clause) -> std::vector<std::string> {
    if (!detail::strip_where_prefix(clause)) return {};
    std::vector<std::string> out;
    for (const auto& t : true_set) out.push_back(clause + " and " + t);
    return out;
  };
  g.functions["where_prepend_false"] =
      [false_set](const std::string& clause) -> std::vector<std::string> {
    auto rest = detail::strip_where_prefix(clause);
    if (!rest) return {};
    std::vector<std::string> out;
    for (const auto& f : false_set)
      out.push_back("where " + f + " or" + *rest);
    return out;
  };
  g.functions["where_prepend_true"] =
      [true_set](const std::string& clause) -> std::vector<std::string> {
    auto rest = detail::strip_where_prefix(clause);
    if (!rest) return {};
    std::vector<std::string> out;
    for (const auto& t : true_set)
      out.push_back("where " + t + " and" + *rest);
    return out;
  };

  g.compute_min_heights();
  return g;
}

namespace detail {

enum class DmlFamily { kOr, kAnd, kUnknown };

// Family of a connector lexeme, looking through an inline-comment wrapper
// (a connector already mutated to /*!50000or*/ must stay in the or-family).
inline DmlFamily dml_family(std::string lexeme) {
  if (lexeme.rfind("/*!", 0) == 0 && lexeme.size() > 5 &&
      lexeme.compare(lexeme.size() - 2, 2, "*/") == 0) {
    std::size_t b = 3;
    while (b < lexeme.size() && is_digit(lexeme[b])) ++b;
    lexeme = lexeme.substr(b, lexeme.size() - 2 - b);
  }
  if (iequals(lexeme, "or") || lexeme == "||") return DmlFamily::kOr;
  if (iequals(lexeme, "and") || lexeme == "&&") return DmlFamily::kAnd;
  return DmlFamily::kUnknown;
}

}  // namespace detail

// Entry symbols for a semantic role; empty for locked roles. The `lexeme`
// disambiguates which connective family a DML token belongs to.
inline std::vector<std::string> entry_symbols_for(
    Role role, const std::string& lexeme = "") {
  switch (role) {
    case Role::kTautology:
      return {kEntryTautology};
    case Role::kWhereClause:
      return {kEntryWhere};
    case Role::kDmlConnector: {
      std::vector<std::string> out;
      switch (detail::dml_family(lexeme)) {
        case detail::DmlFamily::kOr:
          out.push_back(kEntryDmlOr);
          break;
        case detail::DmlFamily::kAnd:
          out.push_back(kEntryDmlAnd);
          break;
        case detail::DmlFamily::kUnknown:
          return out;  // no safe substitution family
      }
      if (detail::is_plain_word(lexeme)) {
        out.push_back(kEntryWord);
        out.push_back(kEntryInline);
      }
      return out;
    }
    case Role::kWord:
      return {kEntryWord, kEntryInline};
    case Role::kNumber:
      return {kEntryNumber};
    case Role::kWhitespace:
      return {kEntryWhitespace};
    case Role::kComment:
      return {kEntryComment};
    default:
      return {};
  }
}

// Primary entry symbol per the role mapping table; nullopt for locked roles.
inline std::optional<std::string> entry_symbol_for(
    Role role, const std::string& lexeme = "") {
  auto all = entry_symbols_for(role, lexeme);
  if (all.empty()) return std::nullopt;
  return all.front();
}

// ---------------------------------------------------------------------------
// Deterministic shallow enumeration (seeds the candidate lists)
// ---------------------------------------------------------------------------

// Expands single-item alternatives (recursing through symbol references up
// to `depth`) and returns the terminal strings in catalog order. Recursive
// multi-item alternatives are left to sampled generation.
inline std::vector<std::string> enumerate_shallow(const Grammar& g,
                                                  const std::string& symbol,
                                                  const std::string& content,
                                                  int depth = 2) {
  std::vector<std::string> out;
  auto rit = g.rules.find(symbol);
  if (rit == g.rules.end() || depth < 0) return out;
  for (const auto& alt : rit->second) {
    if (alt.size() != 1) continue;
    const RuleItem& item = alt[0];
    switch (item.kind) {
      case ItemKind::kCatalog:
        if (const auto* entries = g.catalog.find(item.name))
          out.insert(out.end(), entries->begin(), entries->end());
        break;
      case ItemKind::kLiteral:
        out.push_back(item.name);
        break;
      case ItemKind::kFunction: {
        auto fit = g.functions.find(item.name);
        if (fit != g.functions.end())
          for (auto& v : fit->second(content)) out.push_back(std::move(v));
        break;
      }
      case ItemKind::kSymbol: {
        auto sub = enumerate_shallow(g, item.name, content, depth - 1);
        out.insert(out.end(), sub.begin(), sub.end());
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grammar extension files
// ---------------------------------------------------------------------------

// Format, one rule per line:
//   LHS -> item item | item ...
// where an item is a bare symbol/catalog name, a "quoted literal" with
// C-style escapes, or @function. '#' starts a comment. New LHS symbols are
// added; alternatives for existing symbols are appended.
inline void merge_grammar_extension(Grammar& g, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
      s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                          s.back() == '\r'))
      s.remove_suffix(1);
    if (s.empty() || s.front() == '#') continue;
    std::size_t arrow = s.find("->");
    if (arrow == std::string_view::npos)
      throw FormatError("expected 'LHS -> ...'", lineno);
    std::string lhs(s.substr(0, arrow));
    while (!lhs.empty() && (lhs.back() == ' ' || lhs.back() == '\t'))
      lhs.pop_back();
    if (lhs.empty()) throw FormatError("empty rule name", lineno);
    for (char c : lhs)
      if (!detail::is_ident_char(c))
        throw FormatError("invalid rule name '" + lhs + "'", lineno);

    std::string_view rhs = s.substr(arrow + 2);
    std::vector<Alternative> alts;
    Alternative cur;
    std::size_t i = 0;
    auto flush = [&]() {
      if (cur.empty())
        throw FormatError("empty alternative for '" + lhs + "'", lineno);
      alts.push_back(cur);
      cur.clear();
    };
    while (i < rhs.size()) {
      char c = rhs[i];
      if (c == ' ' || c == '\t') {
        ++i;
        continue;
      }
      if (c == '|') {
        flush();
        ++i;
        continue;
      }
      if (c == '"') {
        std::string lit;
        ++i;
        bool closed = false;
        while (i < rhs.size()) {
          if (rhs[i] == '\\' && i + 1 < rhs.size()) {
            char e = rhs[i + 1];
            switch (e) {
              case 'n': lit.push_back('\n'); break;
              case 't': lit.push_back('\t'); break;
              case 'r': lit.push_back('\r'); break;
              case '\\': lit.push_back('\\'); break;
              case '"': lit.push_back('"'); break;
              default:
                throw FormatError("unknown escape '\\" + std::string(1, e) +
                                      "'",
                                  lineno);
            }
            i += 2;
            continue;
          }
          if (rhs[i] == '"') {
            closed = true;
            ++i;
            break;
          }
          lit.push_back(rhs[i]);
          ++i;
        }
        if (!closed) throw FormatError("unterminated literal", lineno);
        cur.push_back(RuleItem{ItemKind::kLiteral, lit});
        continue;
      }
      if (c == '@') {
        std::size_t start = ++i;
        while (i < rhs.size() && detail::is_ident_char(rhs[i])) ++i;
        if (i == start) throw FormatError("empty function name", lineno);
        cur.push_back(
            RuleItem{ItemKind::kFunction, std::string(rhs.substr(start, i - start))});
        continue;
      }
      if (detail::is_ident_char(c)) {
        std::size_t start = i;
        while (i < rhs.size() && detail::is_ident_char(rhs[i])) ++i;
        std::string name(rhs.substr(start, i - start));
        ItemKind kind = g.catalog.find(name) != nullptr ? ItemKind::kCatalog
                                                        : ItemKind::kSymbol;
        cur.push_back(RuleItem{kind, name});
        continue;
      }
      throw FormatError(std::string("unexpected character '") + c + "'",
                        lineno);
    }
    flush();
    auto& slot = g.rules[lhs];
    bool existed = !slot.empty();
    slot.insert(slot.end(), alts.begin(), alts.end());
    if (!existed) g.nonterminals.insert(lhs);
  }
  g.compute_min_heights();
  auto problems = g.validate();
  if (!problems.empty()) throw FormatError(problems.front(), 0);
}

}  // namespace advsqli
