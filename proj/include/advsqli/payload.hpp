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
// Payload model: boundary decomposition of an injection payload, a lexer for
// the query part, and the hierarchical token tree mutations operate on. The
// tree is semantics-carrying: comparison subtrees that evaluate true are
// tagged as tautologies, logical connectives as DML connectors, and anything
// whose replacement could change behaviour (identifiers, string literals,
// boundaries) is locked.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advsqli/common.hpp"

namespace advsqli {

enum class Label { kBenign, kMalicious };

struct RawPayload {
  std::string text;
  Label label = Label::kMalicious;
  std::string id;
  int multiplicity = 1;
};

// left + query + right == original text, byte-exact.
struct BoundarySplit {
  std::string left;
  std::string query;
  std::string right;
};

enum class TokenKind {
  kKeyword,
  kIdentifier,
  kNumber,
  kString,
  kOperator,
  kWhitespace,
  kComment,
  kInlineComment,
  kPunctuation,
};

struct Token {
  TokenKind kind;
  std::string lexeme;
  std::size_t begin = 0;  // half-open byte range in the query
  std::size_t end = 0;
};

// Semantic role of a tree node. kNone marks content that carries no
// mutation entry (operators, punctuation, string literals).
enum class Role {
  kNone,
  kStatement,
  kTautology,
  kWhereClause,
  kDmlConnector,
  kWord,
  kNumber,
  kWhitespace,
  kComment,
  kBoundaryLocked,
  kIdentifierLocked,
};

inline const char* to_string(Role r) {
  switch (r) {
    case Role::kNone: return "none";
    case Role::kStatement: return "statement";
    case Role::kTautology: return "tautology";
    case Role::kWhereClause: return "where-clause";
    case Role::kDmlConnector: return "dml-connector";
    case Role::kWord: return "word";
    case Role::kNumber: return "number";
    case Role::kWhitespace: return "whitespace";
    case Role::kComment: return "comment";
    case Role::kBoundaryLocked: return "boundary-locked";
    case Role::kIdentifierLocked: return "identifier-locked";
  }
  return "?";
}

// Roles that map to at least one grammar entry symbol. The grammar module's
// entry table must agree with this set; a test cross-checks the two.
inline bool role_is_operable(Role r) {
  switch (r) {
    case Role::kTautology:
    case Role::kWhereClause:
    case Role::kDmlConnector:
    case Role::kWord:
    case Role::kNumber:
    case Role::kWhitespace:
    case Role::kComment:
      return true;
    default:
      return false;
  }
}

struct TreeNode {
  Role role = Role::kNone;
  bool locked = false;
  bool leaf = true;
  Token token;                     // valid when leaf
  std::vector<TreeNode> children;  // valid when internal

  std::string text() const {
    if (leaf) return token.lexeme;
    std::string out;
    for (const auto& c : children) out += c.text();
    return out;
  }
};

// Positional node reference. Paths become stale as soon as the owning tree
// is mutated; the generation counter catches that.
struct NodeRef {
  std::vector<int> path;
  std::uint64_t generation = 0;

  bool operator==(const NodeRef& o) const {
    return path == o.path && generation == o.generation;
  }
};

struct PayloadTree {
  BoundarySplit split;
  TreeNode root;
  std::uint64_t generation = 0;

  const TreeNode* find(const NodeRef& ref) const {
    if (ref.generation != generation) return nullptr;
    const TreeNode* n = &root;
    for (int idx : ref.path) {
      if (n->leaf || idx < 0 || static_cast<std::size_t>(idx) >= n->children.size())
        return nullptr;
      n = &n->children[static_cast<std::size_t>(idx)];
    }
    return n;
  }

  TreeNode* find_mutable(const NodeRef& ref) {
    return const_cast<TreeNode*>(
        static_cast<const PayloadTree*>(this)->find(ref));
  }
};

namespace detail {

inline const std::array<std::string_view, 26>& keyword_table() {
  static const std::array<std::string_view, 26> kKeywords = {
      "select", "union",  "from",   "where",     "and",   "or",     "like",
      "order",  "group",  "having", "not",       "null",  "true",   "false",
      "rand",   "sleep",  "benchmark", "regexp", "between", "ord",  "ascii",
      "concat", "limit",  "offset", "insert",    "update"};
  return kKeywords;
}

inline bool is_keyword(std::string_view word) {
  for (auto k : keyword_table())
    if (iequals(word, k)) return true;
  // delete is listed alongside insert/update in the keyword set.
  return iequals(word, "delete");
}

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool is_ident_char(char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9') || c == '$';
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Boundary split
// ---------------------------------------------------------------------------

namespace detail {

// Longest anchored left-boundary match: either <value><quote><parens> where
// value contains no quote/paren/space, or a bare numeric value followed by
// whitespace, ';' or end.
inline std::size_t match_left_boundary(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && text[i] != '\'' && text[i] != '"' &&
         text[i] != '(' && text[i] != ')' && !is_space(text[i]))
    ++i;
  if (i < text.size() && (text[i] == '\'' || text[i] == '"')) {
    ++i;
    while (i < text.size() && text[i] == ')') ++i;
    return i;
  }
  // Bare numeric value, e.g. "1 AND 2=2" or "1) AND (2=2".
  std::size_t j = 0;
  if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
  std::size_t digits = j;
  while (j < text.size() && is_digit(text[j])) ++j;
  if (j == digits) return 0;
  if (j < text.size() && text[j] == '.') {
    ++j;
    while (j < text.size() && is_digit(text[j])) ++j;
  }
  while (j < text.size() && text[j] == ')') ++j;
  if (j == text.size() || is_space(text[j]) || text[j] == ';') return j;
  return 0;
}

struct BoundaryScan {
  std::vector<std::size_t> connector_starts;  // top-level and/or positions
  bool ends_in_string = false;
  std::size_t unterminated_open = 0;
  std::size_t first_dash_comment = std::string::npos;
  std::size_t first_hash = std::string::npos;
};

inline BoundaryScan scan_for_boundaries(std::string_view s) {
  BoundaryScan out;
  char quote = 0;
  bool in_block = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quote) {
      if (c == quote) quote = 0;
      continue;
    }
    if (in_block) {
      if (c == '*' && i + 1 < s.size() && s[i + 1] == '/') {
        in_block = false;
        ++i;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      out.unterminated_open = i;
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      in_block = true;
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
      bool tail_ok = i + 2 >= s.size();
      if (!tail_ok) {
        char n = s[i + 2];
        tail_ok = n == '+' || n == '-' || is_space(n);
      }
      if (tail_ok && out.first_dash_comment == std::string::npos)
        out.first_dash_comment = i;
      continue;
    }
    if (c == '#' && out.first_hash == std::string::npos) {
      out.first_hash = i;
      continue;
    }
    if ((c == 'a' || c == 'A' || c == 'o' || c == 'O') &&
        (i == 0 || !is_ident_char(s[i - 1]))) {
      std::string_view rest = s.substr(i);
      if ((rest.size() >= 3 && iequals(rest.substr(0, 3), "and") &&
           (rest.size() == 3 || !is_ident_char(rest[3]))) ||
          (rest.size() >= 2 && iequals(rest.substr(0, 2), "or") &&
           (rest.size() == 2 || !is_ident_char(rest[2])))) {
        out.connector_starts.push_back(i);
      }
    }
  }
  out.ends_in_string = quote != 0;
  return out;
}

}  // namespace detail

// Splits a payload into (left boundary, query, right boundary). The pattern
// table is ordered; when nothing matches, the whole text is the query.
inline BoundarySplit split_boundaries(const RawPayload& raw) {
  std::string_view text = raw.text;
  BoundarySplit out;

  std::size_t left_len = detail::match_left_boundary(text);
  out.left = std::string(text.substr(0, left_len));
  std::string_view rest = text.substr(left_len);

  std::size_t right_start = rest.size();
  static constexpr std::string_view kNullSuffix = ";%00";
  if (rest.size() >= kNullSuffix.size() &&
      rest.substr(rest.size() - kNullSuffix.size()) == kNullSuffix) {
    right_start = rest.size() - kNullSuffix.size();
  } else {
    detail::BoundaryScan scan = detail::scan_for_boundaries(rest);
    if (scan.first_dash_comment != std::string::npos) {
      right_start = scan.first_dash_comment;
    } else if (scan.first_hash != std::string::npos) {
      right_start = scan.first_hash;
    } else if (scan.ends_in_string) {
      // Quote-rebalancing tail: lock from the last top-level connector in
      // front of the unterminated string, or from the open quote itself.
      right_start = scan.unterminated_open;
      for (auto it = scan.connector_starts.rbegin();
           it != scan.connector_starts.rend(); ++it) {
        if (*it < scan.unterminated_open) {
          right_start = *it;
          break;
        }
      }
    }
  }
  out.query = std::string(rest.substr(0, right_start));
  out.right = std::string(rest.substr(right_start));
  return out;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

inline std::vector<Token> tokenize(std::string_view query) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = query.size();
  auto push = [&](TokenKind kind, std::size_t begin, std::size_t end) {
    out.push_back(Token{kind, std::string(query.substr(begin, end - begin)),
                        begin, end});
  };
  while (i < n) {
    const std::size_t start = i;
    char c = query[i];
    if (detail::is_space(c)) {
      while (i < n && detail::is_space(query[i])) ++i;
      push(TokenKind::kWhitespace, start, i);
      continue;
    }
    if (c == '\'' || c == '"') {
      const char q = c;
      ++i;
      bool closed = false;
      while (i < n) {
        if (query[i] == q) {
          if (i + 1 < n && query[i + 1] == q) {  // '' doubling
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        ++i;
      }
      if (!closed) throw LexError("unterminated string literal");
      push(TokenKind::kString, start, i);
      continue;
    }
    if (c == '/' && i + 1 < n && query[i + 1] == '*') {
      const bool inline_comment = i + 2 < n && query[i + 2] == '!';
      i += 2;
      bool closed = false;
      while (i < n) {
        if (query[i] == '*' && i + 1 < n && query[i + 1] == '/') {
          i += 2;
          closed = true;
          break;
        }
        ++i;
      }
      if (!closed) throw LexError("unterminated comment");
      push(inline_comment ? TokenKind::kInlineComment : TokenKind::kComment,
           start, i);
      continue;
    }
    if (c == '`') {  // backtick-quoted identifier
      ++i;
      while (i < n && query[i] != '`') ++i;
      if (i >= n) throw LexError("unterminated quoted identifier");
      ++i;
      push(TokenKind::kIdentifier, start, i);
      continue;
    }
    if (detail::is_digit(c) ||
        (c == '.' && i + 1 < n && detail::is_digit(query[i + 1]))) {
      if (c == '0' && i + 1 < n &&
          (query[i + 1] == 'x' || query[i + 1] == 'X') && i + 2 < n &&
          codec::is_hex_digit(query[i + 2])) {
        i += 2;
        while (i < n && codec::is_hex_digit(query[i])) ++i;
      } else {
        while (i < n && detail::is_digit(query[i])) ++i;
        if (i < n && query[i] == '.') {
          ++i;
          while (i < n && detail::is_digit(query[i])) ++i;
        }
      }
      push(TokenKind::kNumber, start, i);
      continue;
    }
    if (detail::is_ident_start(c)) {
      while (i < n && detail::is_ident_char(query[i])) ++i;
      std::string_view word = query.substr(start, i - start);
      push(detail::is_keyword(word) ? TokenKind::kKeyword
                                    : TokenKind::kIdentifier,
           start, i);
      continue;
    }
    switch (c) {
      case '(': case ')': case ',': case ';': case '.': case '@':
        ++i;
        push(TokenKind::kPunctuation, start, i);
        continue;
      default:
        break;
    }
    // Operators, longest match first.
    static constexpr std::string_view kTwoChar[] = {"<>", "<=", ">=", "!=",
                                                    "&&", "||", ":="};
    bool matched = false;
    if (i + 1 < n) {
      std::string_view two = query.substr(i, 2);
      for (auto op : kTwoChar) {
        if (two == op) {
          i += 2;
          push(TokenKind::kOperator, start, i);
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;
    ++i;
    push(TokenKind::kOperator, start, i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Literal comparison evaluation (tautology tagging)
// ---------------------------------------------------------------------------

namespace detail {

struct DecimalValue {
  bool negative = false;
  std::string int_part;   // zero-trimmed, "0" never stored as empty
  std::string frac_part;  // trailing-zero-trimmed

  bool is_zero() const { return int_part == "0" && frac_part.empty(); }
};

// Parses a decimal or hexadecimal numeric lexeme into an exact form.
inline std::optional<DecimalValue> parse_numeric(std::string_view lexeme,
                                                 bool negative) {
  DecimalValue v;
  v.negative = negative;
  if (lexeme.size() > 2 && lexeme[0] == '0' &&
      (lexeme[1] == 'x' || lexeme[1] == 'X')) {
    // Hex to decimal by repeated doubling over a digit string.
    std::string dec = "0";
    auto mul_add = [&](int add) {
      int carry = add;
      for (auto it = dec.rbegin(); it != dec.rend(); ++it) {
        int d = (*it - '0') * 16 + carry;
        *it = static_cast<char>('0' + d % 10);
        carry = d / 10;
      }
      while (carry) {
        dec.insert(dec.begin(), static_cast<char>('0' + carry % 10));
        carry /= 10;
      }
    };
    for (std::size_t i = 2; i < lexeme.size(); ++i) {
      if (!codec::is_hex_digit(lexeme[i])) return std::nullopt;
      mul_add(codec::hex_value(lexeme[i]));
    }
    v.int_part = dec;
  } else {
    std::size_t dot = lexeme.find('.');
    std::string ip(lexeme.substr(0, dot));
    std::string fp(dot == std::string_view::npos
                       ? ""
                       : std::string(lexeme.substr(dot + 1)));
    for (char ch : ip)
      if (!is_digit(ch)) return std::nullopt;
    for (char ch : fp)
      if (!is_digit(ch)) return std::nullopt;
    v.int_part = ip.empty() ? "0" : ip;
    v.frac_part = fp;
  }
  std::size_t nz = v.int_part.find_first_not_of('0');
  v.int_part = nz == std::string::npos ? "0" : v.int_part.substr(nz);
  std::size_t last = v.frac_part.find_last_not_of('0');
  v.frac_part =
      last == std::string::npos ? "" : v.frac_part.substr(0, last + 1);
  if (v.is_zero()) v.negative = false;
  return v;
}

// -1, 0, +1 for a<b, a==b, a>b.
inline int compare_decimal(const DecimalValue& a, const DecimalValue& b) {
  if (a.negative != b.negative) return a.negative ? -1 : 1;
  int sign = a.negative ? -1 : 1;
  int mag;
  if (a.int_part.size() != b.int_part.size()) {
    mag = a.int_part.size() < b.int_part.size() ? -1 : 1;
  } else if (int c = a.int_part.compare(b.int_part); c != 0) {
    mag = c < 0 ? -1 : 1;
  } else {
    // Compare fractional parts positionally.
    const std::string& fa = a.frac_part;
    const std::string& fb = b.frac_part;
    std::size_t len = std::max(fa.size(), fb.size());
    mag = 0;
    for (std::size_t i = 0; i < len; ++i) {
      char da = i < fa.size() ? fa[i] : '0';
      char db = i < fb.size() ? fb[i] : '0';
      if (da != db) {
        mag = da < db ? -1 : 1;
        break;
      }
    }
  }
  return sign * mag;
}

struct ComparisonOperand {
  bool is_string = false;
  bool negative = false;
  std::string lexeme;  // number lexeme or raw string token ('...')

  std::string string_content() const {
    std::string body(lexeme.substr(1, lexeme.size() - 2));
    std::string out;
    char q = lexeme[0];
    for (std::size_t i = 0; i < body.size(); ++i) {
      out.push_back(body[i]);
      if (body[i] == q && i + 1 < body.size() && body[i + 1] == q) ++i;
    }
    return out;
  }
};

// Evaluates `lhs op rhs` for literal operands under the conservative SQL
// subset used for tagging. nullopt means "cannot decide", which callers
// treat as not-a-tautology.
inline std::optional<bool> evaluate_comparison(const ComparisonOperand& lhs,
                                               std::string_view op,
                                               const ComparisonOperand& rhs) {
  if (lhs.is_string != rhs.is_string) return std::nullopt;
  if (iequals(op, "like")) {
    if (lhs.is_string) {
      std::string a = lhs.string_content(), b = rhs.string_content();
      if (b.find('%') != std::string::npos ||
          b.find('_') != std::string::npos || a.find('%') != std::string::npos ||
          a.find('_') != std::string::npos)
        return std::nullopt;
      return a == b;
    }
    // Numbers compare as their string forms under LIKE.
    std::string a = (lhs.negative ? "-" : "") + lhs.lexeme;
    std::string b = (rhs.negative ? "-" : "") + rhs.lexeme;
    return a == b;
  }
  if (lhs.is_string) {
    if (op == "=" ) return lhs.string_content() == rhs.string_content();
    if (op == "<>" || op == "!=")
      return lhs.string_content() != rhs.string_content();
    return std::nullopt;
  }
  auto a = parse_numeric(lhs.lexeme, lhs.negative);
  auto b = parse_numeric(rhs.lexeme, rhs.negative);
  if (!a || !b) return std::nullopt;
  int c = compare_decimal(*a, *b);
  if (op == "=") return c == 0;
  if (op == "<>" || op == "!=") return c != 0;
  if (op == "<") return c < 0;
  if (op == ">") return c > 0;
  if (op == "<=") return c <= 0;
  if (op == ">=") return c >= 0;
  return std::nullopt;
}

inline bool is_comparison_op(const Token& t) {
  if (t.kind == TokenKind::kOperator) {
    return t.lexeme == "=" || t.lexeme == "<>" || t.lexeme == "!=" ||
           t.lexeme == "<" || t.lexeme == ">" || t.lexeme == "<=" ||
           t.lexeme == ">=";
  }
  return t.kind == TokenKind::kKeyword && iequals(t.lexeme, "like");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tree construction
// ---------------------------------------------------------------------------

namespace detail {

inline TreeNode make_leaf(const Token& t, Role role, bool locked) {
  TreeNode n;
  n.leaf = true;
  n.token = t;
  n.role = role;
  n.locked = locked;
  return n;
}

inline TreeNode classify_leaf(const Token& t, bool position_locked) {
  if (position_locked) return make_leaf(t, Role::kNone, true);
  switch (t.kind) {
    case TokenKind::kKeyword:
      if (iequals(t.lexeme, "and") || iequals(t.lexeme, "or"))
        return make_leaf(t, Role::kDmlConnector, false);
      return make_leaf(t, Role::kWord, false);
    case TokenKind::kIdentifier:
      return make_leaf(t, Role::kIdentifierLocked, true);
    case TokenKind::kNumber:
      return make_leaf(t, Role::kNumber, false);
    case TokenKind::kWhitespace:
      return make_leaf(t, Role::kWhitespace, false);
    case TokenKind::kComment:
      return make_leaf(t, Role::kComment, false);
    case TokenKind::kInlineComment:
      return make_leaf(t, Role::kNone, true);
    case TokenKind::kOperator:
      if (t.lexeme == "&&" || t.lexeme == "||")
        return make_leaf(t, Role::kDmlConnector, false);
      return make_leaf(t, Role::kNone, true);
    case TokenKind::kString:
    case TokenKind::kPunctuation:
    default:
      return make_leaf(t, Role::kNone, true);
  }
}

// Marks tokens whose position makes them immutable: numbers in
// ORDER BY / GROUP BY lists (they select columns, not values) and the AND
// that belongs to a BETWEEN predicate.
inline std::vector<bool> positional_locks(const std::vector<Token>& tokens) {
  std::vector<bool> locked(tokens.size(), false);
  bool in_by_list = false;
  int between_pending = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::kKeyword &&
        (iequals(t.lexeme, "order") || iequals(t.lexeme, "group"))) {
      in_by_list = true;
      continue;
    }
    if (t.kind == TokenKind::kKeyword && iequals(t.lexeme, "between")) {
      ++between_pending;
      in_by_list = false;
      continue;
    }
    if (between_pending > 0 && t.kind == TokenKind::kKeyword &&
        iequals(t.lexeme, "and")) {
      locked[i] = true;
      --between_pending;
      continue;
    }
    if (!in_by_list) continue;
    if (t.kind == TokenKind::kWhitespace || t.kind == TokenKind::kComment)
      continue;
    if (t.kind == TokenKind::kIdentifier && iequals(t.lexeme, "by")) continue;
    if (t.kind == TokenKind::kNumber) {
      locked[i] = true;
      continue;
    }
    if (t.kind == TokenKind::kPunctuation && t.lexeme == ",") continue;
    in_by_list = false;
  }
  return locked;
}

struct OperandMatch {
  std::size_t first;  // index of sign or literal
  ComparisonOperand operand;
};

inline std::optional<OperandMatch> match_operand_backward(
    const std::vector<TreeNode>& nodes, std::size_t lit_index) {
  const TreeNode& lit = nodes[lit_index];
  if (!lit.leaf) return std::nullopt;
  ComparisonOperand op;
  if (lit.token.kind == TokenKind::kNumber) {
    op.is_string = false;
  } else if (lit.token.kind == TokenKind::kString) {
    op.is_string = true;
  } else {
    return std::nullopt;
  }
  op.lexeme = lit.token.lexeme;
  std::size_t first = lit_index;
  if (!op.is_string && lit_index > 0) {
    const TreeNode& prev = nodes[lit_index - 1];
    if (prev.leaf && prev.token.kind == TokenKind::kOperator &&
        (prev.token.lexeme == "-" || prev.token.lexeme == "+")) {
      // Unary sign only when not preceded by a value.
      bool unary = true;
      for (std::size_t k = lit_index - 1; k-- > 0;) {
        const TreeNode& q = nodes[k];
        if (q.leaf && (q.token.kind == TokenKind::kWhitespace ||
                       q.token.kind == TokenKind::kComment))
          continue;
        unary = q.leaf && (q.token.kind == TokenKind::kKeyword ||
                           q.token.kind == TokenKind::kOperator ||
                           (q.token.kind == TokenKind::kPunctuation &&
                            q.token.lexeme != ")"));
        break;
      }
      if (unary) {
        op.negative = prev.token.lexeme == "-";
        first = lit_index - 1;
      }
    }
  }
  return OperandMatch{first, op};
}

// True only when the token in front of a candidate comparison cannot bind
// tighter than the comparison itself. Rules out mis-tagging the tail of
// arithmetic (`2*1 = 1`) or of another predicate (`x like 1 = 1`).
inline bool safe_left_context(const std::vector<TreeNode>& nodes,
                              std::size_t first) {
  for (std::size_t k = first; k-- > 0;) {
    const TreeNode& q = nodes[k];
    if (!q.leaf) return false;
    if (q.token.kind == TokenKind::kWhitespace ||
        q.token.kind == TokenKind::kComment)
      continue;
    if (q.token.kind == TokenKind::kKeyword) {
      return !(iequals(q.token.lexeme, "like") ||
               iequals(q.token.lexeme, "regexp") ||
               iequals(q.token.lexeme, "between"));
    }
    if (q.token.kind == TokenKind::kPunctuation) {
      return q.token.lexeme == "(" || q.token.lexeme == "," ||
             q.token.lexeme == ";";
    }
    return false;
  }
  return true;  // start of list
}

// Symmetric guard for the token after the comparison: a tighter-binding
// operator there would swallow the trailing operand of a replacement.
inline bool safe_right_context(const std::vector<TreeNode>& nodes,
                               std::size_t last) {
  for (std::size_t k = last + 1; k < nodes.size(); ++k) {
    const TreeNode& q = nodes[k];
    if (!q.leaf) return false;
    if (q.token.kind == TokenKind::kWhitespace ||
        q.token.kind == TokenKind::kComment)
      continue;
    if (q.token.kind == TokenKind::kKeyword) {
      return !(iequals(q.token.lexeme, "like") ||
               iequals(q.token.lexeme, "regexp") ||
               iequals(q.token.lexeme, "between"));
    }
    if (q.token.kind == TokenKind::kPunctuation) {
      return q.token.lexeme == ")" || q.token.lexeme == "," ||
             q.token.lexeme == ";";
    }
    return false;
  }
  return true;  // end of list
}

// Wraps true literal comparisons (`lit op lit`) into tautology subtrees.
inline void wrap_tautologies(std::vector<TreeNode>& nodes) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (!n.leaf || !is_comparison_op(n.token)) continue;

    // Left operand: skip whitespace backwards.
    std::size_t li = i;
    while (li > 0) {
      --li;
      if (nodes[li].leaf && nodes[li].token.kind == TokenKind::kWhitespace)
        continue;
      break;
    }
    if (li == i) continue;
    auto lhs = match_operand_backward(nodes, li);
    if (!lhs) continue;
    if (!safe_left_context(nodes, lhs->first)) continue;

    // Right operand: skip whitespace forwards, allow unary sign.
    std::size_t ri = i + 1;
    while (ri < nodes.size() && nodes[ri].leaf &&
           nodes[ri].token.kind == TokenKind::kWhitespace)
      ++ri;
    if (ri >= nodes.size() || !nodes[ri].leaf) continue;
    ComparisonOperand rhs;
    std::size_t r_end = ri;
    if (nodes[ri].token.kind == TokenKind::kOperator &&
        (nodes[ri].token.lexeme == "-" || nodes[ri].token.lexeme == "+")) {
      rhs.negative = nodes[ri].token.lexeme == "-";
      std::size_t lit = ri + 1;
      if (lit >= nodes.size() || !nodes[lit].leaf ||
          nodes[lit].token.kind != TokenKind::kNumber)
        continue;
      rhs.is_string = false;
      rhs.lexeme = nodes[lit].token.lexeme;
      r_end = lit;
    } else if (nodes[ri].token.kind == TokenKind::kNumber) {
      rhs.is_string = false;
      rhs.lexeme = nodes[ri].token.lexeme;
    } else if (nodes[ri].token.kind == TokenKind::kString) {
      rhs.is_string = true;
      rhs.lexeme = nodes[ri].token.lexeme;
    } else {
      continue;
    }

    if (!safe_right_context(nodes, r_end)) continue;
    auto value = evaluate_comparison(lhs->operand, n.token.lexeme, rhs);
    if (!value || !*value) continue;

    TreeNode group;
    group.leaf = false;
    group.role = Role::kTautology;
    group.locked = false;
    for (std::size_t k = lhs->first; k <= r_end; ++k)
      group.children.push_back(std::move(nodes[k]));
    nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(lhs->first),
                nodes.begin() + static_cast<std::ptrdiff_t>(r_end + 1));
    nodes.insert(nodes.begin() + static_cast<std::ptrdiff_t>(lhs->first),
                 std::move(group));
    i = lhs->first;
  }
}

inline bool ends_where_clause(const Token& t, int paren_depth) {
  if (paren_depth > 0) return false;
  if (t.kind == TokenKind::kPunctuation && t.lexeme == ";") return true;
  if (t.kind != TokenKind::kKeyword) return false;
  return iequals(t.lexeme, "order") || iequals(t.lexeme, "group") ||
         iequals(t.lexeme, "having") || iequals(t.lexeme, "limit") ||
         iequals(t.lexeme, "union");
}

}  // namespace detail

// Builds the hierarchical tree for a payload. Throws LexError when the
// query part does not lex; such payloads are skipped by callers.
inline PayloadTree build_tree(const RawPayload& raw) {
  PayloadTree tree;
  tree.split = split_boundaries(raw);
  tree.root.leaf = false;
  tree.root.role = Role::kStatement;
  tree.root.locked = false;

  std::vector<Token> tokens = tokenize(tree.split.query);
  std::vector<bool> pos_locked = detail::positional_locks(tokens);

  // First pass: classify leaves, group the first top-level WHERE clause.
  std::vector<TreeNode> top;
  std::optional<std::size_t> where_start;
  std::vector<TreeNode> where_children;
  int paren_depth = 0;
  bool where_done = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::kPunctuation) {
      if (t.lexeme == "(") ++paren_depth;
      if (t.lexeme == ")") paren_depth = std::max(0, paren_depth - 1);
    }
    bool in_where = where_start.has_value() && !where_done;
    if (in_where && detail::ends_where_clause(t, paren_depth)) {
      where_done = true;
      in_where = false;
    }
    TreeNode leaf = detail::classify_leaf(t, pos_locked[i]);
    if (!where_start && !where_done && paren_depth == 0 &&
        t.kind == TokenKind::kKeyword && iequals(t.lexeme, "where")) {
      where_start = top.size();
      where_children.push_back(std::move(leaf));
      continue;
    }
    if (in_where) {
      where_children.push_back(std::move(leaf));
    } else {
      top.push_back(std::move(leaf));
    }
  }
  detail::wrap_tautologies(where_children);
  if (where_start) {
    TreeNode clause;
    clause.leaf = false;
    clause.role = Role::kWhereClause;
    clause.locked = false;
    clause.children = std::move(where_children);
    top.insert(top.begin() + static_cast<std::ptrdiff_t>(*where_start),
               std::move(clause));
  }
  detail::wrap_tautologies(top);
  tree.root.children = std::move(top);
  return tree;
}

// left + in-order leaf lexemes + right.
inline std::string reconstruct(const PayloadTree& tree) {
  return tree.split.left + tree.root.text() + tree.split.right;
}

// All unlocked nodes whose role has a grammar entry, in deterministic
// left-to-right (pre-order) order.
inline std::vector<NodeRef> explore_operable_nodes(const PayloadTree& tree) {
  std::vector<NodeRef> out;
  std::vector<int> path;
  auto walk = [&](auto&& self, const TreeNode& node) -> void {
    if (!node.locked && role_is_operable(node.role))
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

}  // namespace advsqli
