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
// Execution oracle: decides semantic equivalence of two payloads by running
// both through every vulnerable query template on a seeded embedded bench
// and comparing row multisets / error classes. The bench speaks a
// MySQL-flavored dialect subset on top of SQLite: inline comments are
// unwrapped, '&&'/'||' map to AND/OR, '#' comments map to '--', and the
// MySQL functions the corpus relies on are registered (deterministic stubs
// where MySQL is nondeterministic or slow, so differential runs stay
// reproducible and time-bounded).

#pragma once

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "advsqli/common.hpp"

namespace advsqli {

enum class ErrorClass { kSyntax, kRuntime };

struct ExecutionResult {
  enum class Outcome { kRows, kError };
  Outcome outcome = Outcome::kRows;
  // Order-insensitive multiset of row tuples; nullopt cells are SQL NULLs.
  std::vector<std::vector<std::optional<std::string>>> rows;
  ErrorClass error_class = ErrorClass::kSyntax;

  bool is_error() const { return outcome == Outcome::kError; }

  bool operator==(const ExecutionResult& o) const {
    if (outcome != o.outcome) return false;
    if (outcome == Outcome::kError) return error_class == o.error_class;
    return rows == o.rows;
  }
};

struct QueryTemplate {
  std::string name;
  std::string text;  // contains the {P} injection hole
};

inline std::vector<QueryTemplate> default_templates() {
  return {
      {"numeric", "SELECT name FROM users WHERE id = {P}"},
      {"single-quoted", "SELECT name FROM users WHERE name = '{P}'"},
      {"double-quoted", "SELECT name FROM users WHERE (name = \"{P}\")"},
  };
}

inline const char* default_bench_seed() {
  return R"sql(
CREATE TABLE users (id INTEGER, name TEXT, secret TEXT);
INSERT INTO users VALUES (1, 'alice', 'alpha-secret');
INSERT INTO users VALUES (2, 'bob', 'bravo-secret');
INSERT INTO users VALUES (3, 'carol', 'charlie-secret');
INSERT INTO users VALUES (4, 'dave', 'delta-secret');
INSERT INTO users VALUES (5, 'erin', 'echo-secret');
ATTACH ':memory:' AS information_schema;
CREATE TABLE information_schema.tables (table_schema TEXT, table_name TEXT);
INSERT INTO information_schema.tables VALUES ('bench', 'users');
CREATE TABLE information_schema.columns (table_schema TEXT, table_name TEXT, column_name TEXT);
INSERT INTO information_schema.columns VALUES ('bench', 'users', 'id');
INSERT INTO information_schema.columns VALUES ('bench', 'users', 'name');
INSERT INTO information_schema.columns VALUES ('bench', 'users', 'secret');
)sql";
}

namespace bench_detail {

// Scanner-based dialect bridge, deliberately independent of the payload
// lexer. Applied identically to both sides of every comparison.
inline std::string bridge_dialect(const std::string& sql) {
  std::string out;
  out.reserve(sql.size());
  const std::size_t n = sql.size();
  std::size_t i = 0;
  while (i < n) {
    char c = sql[i];
    if (c == '\'' || c == '"') {
      char q = c;
      out.push_back(c);
      ++i;
      while (i < n) {
        out.push_back(sql[i]);
        if (sql[i] == q) {
          if (i + 1 < n && sql[i + 1] == q) {
            out.push_back(sql[i + 1]);
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        ++i;
      }
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') out.push_back(sql[i++]);
      continue;
    }
    if (c == '#') {  // MySQL line comment
      out += "-- ";
      ++i;
      while (i < n && sql[i] != '\n') out.push_back(sql[i++]);
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      if (i + 2 < n && sql[i + 2] == '!') {
        std::size_t body = i + 3;
        while (body < n && body - (i + 3) < 8 && sql[body] >= '0' &&
               sql[body] <= '9')
          ++body;
        std::size_t close = sql.find("*/", body);
        if (close == std::string::npos) {
          out.append(sql, i, n - i);
          break;
        }
        // The comment boundary separates tokens in MySQL; pad so the body
        // does not fuse with its neighbours.
        out.push_back(' ');
        out.append(sql, body, close - body);
        out.push_back(' ');
        i = close + 2;
        continue;
      }
      std::size_t close = sql.find("*/", i + 2);
      if (close == std::string::npos) {
        out.append(sql, i, n - i);
        break;
      }
      out.append(sql, i, close + 2 - i);
      i = close + 2;
      continue;
    }
    if (c == '&' && i + 1 < n && sql[i + 1] == '&') {
      out += " and ";
      i += 2;
      continue;
    }
    if (c == '|' && i + 1 < n && sql[i + 1] == '|') {
      out += " or ";
      i += 2;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

inline std::string value_as_text(sqlite3_value* v) {
  const unsigned char* t = sqlite3_value_text(v);
  return t == nullptr ? std::string() : reinterpret_cast<const char*>(t);
}

inline void fn_rand(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_double(ctx, 0.5);  // deterministic stand-in
}

inline void fn_zero(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_int(ctx, 0);  // sleep/benchmark return 0 without waiting
}

inline void fn_ord(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  if (argc < 1) return sqlite3_result_int(ctx, 0);
  std::string s = value_as_text(argv[0]);
  sqlite3_result_int(ctx, s.empty()
                              ? 0
                              : static_cast<unsigned char>(s[0]));
}

inline void fn_version(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_text(ctx, "8.0.36-bench", -1, SQLITE_TRANSIENT);
}

inline void fn_database(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_text(ctx, "bench", -1, SQLITE_TRANSIENT);
}

inline void fn_user(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_text(ctx, "bench@localhost", -1, SQLITE_TRANSIENT);
}

inline void fn_xml_error(sqlite3_context* ctx, int, sqlite3_value**) {
  sqlite3_result_error(ctx, "XPATH syntax error: '~'", -1);
}

inline void fn_concat(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (sqlite3_value_type(argv[i]) == SQLITE_NULL)
      return sqlite3_result_null(ctx);  // MySQL CONCAT propagates NULL
    out += value_as_text(argv[i]);
  }
  sqlite3_result_text(ctx, out.c_str(), -1, SQLITE_TRANSIENT);
}

inline void fn_md5(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  // Deterministic stand-in digest (not a real MD5).
  unsigned long long h = 1469598103934665603ull;
  if (argc >= 1)
    for (char c : value_as_text(argv[0]))
      h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", h,
                h ^ 0x9e3779b97f4a7c15ull);
  sqlite3_result_text(ctx, buf, -1, SQLITE_TRANSIENT);
}

inline void fn_floor(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  if (argc < 1) return sqlite3_result_null(ctx);
  sqlite3_result_int64(
      ctx, static_cast<long long>(std::floor(sqlite3_value_double(argv[0]))));
}

inline void fn_if(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  if (argc != 3) return sqlite3_result_null(ctx);
  bool truthy = sqlite3_value_double(argv[0]) != 0.0;
  sqlite3_result_value(ctx, truthy ? argv[1] : argv[2]);
}

inline void fn_substring(sqlite3_context* ctx, int argc,
                         sqlite3_value** argv) {
  if (argc < 2) return sqlite3_result_null(ctx);
  std::string s = value_as_text(argv[0]);
  long long pos = sqlite3_value_int64(argv[1]);
  long long len = argc >= 3 ? sqlite3_value_int64(argv[2])
                            : static_cast<long long>(s.size());
  if (pos < 1) pos = 1;
  std::string out;
  if (static_cast<std::size_t>(pos - 1) < s.size() && len > 0)
    out = s.substr(static_cast<std::size_t>(pos - 1),
                   static_cast<std::size_t>(len));
  sqlite3_result_text(ctx, out.c_str(), -1, SQLITE_TRANSIENT);
}

// SQLite rewrites `X REGEXP Y` to regexp(Y, X); MySQL REGEXP is a partial
// match.
inline void fn_regexp(sqlite3_context* ctx, int argc, sqlite3_value** argv) {
  if (argc != 2) return sqlite3_result_int(ctx, 0);
  std::string pattern = value_as_text(argv[0]);
  std::string subject = value_as_text(argv[1]);
  try {
    std::regex re(pattern, std::regex::ECMAScript);
    sqlite3_result_int(ctx, std::regex_search(subject, re) ? 1 : 0);
  } catch (const std::regex_error&) {
    sqlite3_result_error(ctx, "invalid regular expression", -1);
  }
}

}  // namespace bench_detail

// A private, seeded vulnerable bench. Reset before every execution; never
// shared across sessions.
class TestBench {
 public:
  explicit TestBench(std::string seed_sql = default_bench_seed(),
                     std::vector<QueryTemplate> templates = default_templates(),
                     std::chrono::milliseconds timeout =
                         std::chrono::milliseconds(2000))
      : seed_sql_(std::move(seed_sql)),
        templates_(std::move(templates)),
        timeout_(timeout) {}

  const std::vector<QueryTemplate>& templates() const { return templates_; }

  // Substitutes the payload into the template verbatim (that is the
  // vulnerability) and executes on a freshly seeded instance.
  ExecutionResult execute(const std::string& payload,
                          const QueryTemplate& tpl) const {
    std::string sql = tpl.text;
    std::size_t hole = sql.find("{P}");
    if (hole != std::string::npos) sql.replace(hole, 3, payload);
    sql = bench_detail::bridge_dialect(sql);

    Db db(seed_sql_);
    if (!db.ok) {
      ExecutionResult r;
      r.outcome = ExecutionResult::Outcome::kError;
      r.error_class = ErrorClass::kRuntime;
      return r;
    }
    Deadline deadline{std::chrono::steady_clock::now() + timeout_};
    sqlite3_progress_handler(db.handle, 1000, &Deadline::expired, &deadline);

    ExecutionResult result;
    const char* tail = sql.c_str();
    while (tail != nullptr && *tail != '\0') {
      sqlite3_stmt* stmt = nullptr;
      const char* next = nullptr;
      int rc = sqlite3_prepare_v2(db.handle, tail, -1, &stmt, &next);
      if (rc != SQLITE_OK) {
        result.outcome = ExecutionResult::Outcome::kError;
        result.error_class = ErrorClass::kSyntax;
        return result;
      }
      tail = next;
      if (stmt == nullptr) continue;  // whitespace / comment
      while (true) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
          int cols = sqlite3_column_count(stmt);
          std::vector<std::optional<std::string>> row;
          row.reserve(static_cast<std::size_t>(cols));
          for (int c = 0; c < cols; ++c) {
            if (sqlite3_column_type(stmt, c) == SQLITE_NULL) {
              row.emplace_back(std::nullopt);
            } else {
              const unsigned char* t = sqlite3_column_text(stmt, c);
              row.emplace_back(t == nullptr
                                   ? std::string()
                                   : reinterpret_cast<const char*>(t));
            }
          }
          result.rows.push_back(std::move(row));
          continue;
        }
        if (rc == SQLITE_DONE) break;
        sqlite3_finalize(stmt);
        result.outcome = ExecutionResult::Outcome::kError;
        result.error_class = ErrorClass::kRuntime;
        return result;
      }
      sqlite3_finalize(stmt);
    }
    std::sort(result.rows.begin(), result.rows.end());
    return result;
  }

  // Sem(a) == Sem(b): equal outcome on every template.
  bool equivalent(const std::string& p_original,
                  const std::string& p_mutated) const {
    for (const auto& tpl : templates_) {
      if (!(execute(p_original, tpl) == execute(p_mutated, tpl))) return false;
    }
    return true;
  }

 private:
  struct Deadline {
    std::chrono::steady_clock::time_point at;
    static int expired(void* self) {
      return std::chrono::steady_clock::now() >
                     static_cast<Deadline*>(self)->at
                 ? 1
                 : 0;
    }
  };

  struct Db {
    sqlite3* handle = nullptr;
    bool ok = false;

    explicit Db(const std::string& seed) {
      if (sqlite3_open(":memory:", &handle) != SQLITE_OK) return;
      register_functions();
      char* err = nullptr;
      ok = sqlite3_exec(handle, seed.c_str(), nullptr, nullptr, &err) ==
           SQLITE_OK;
      if (err != nullptr) sqlite3_free(err);
    }

    ~Db() {
      if (handle != nullptr) sqlite3_close(handle);
    }

    Db(const Db&) = delete;
    Db& operator=(const Db&) = delete;

    void register_functions() const {
      using namespace bench_detail;
      auto reg = [&](const char* name, int argc,
                     void (*fn)(sqlite3_context*, int, sqlite3_value**)) {
        sqlite3_create_function(handle, name, argc,
                                SQLITE_UTF8 | SQLITE_DETERMINISTIC, nullptr,
                                fn, nullptr, nullptr);
      };
      // Error-raising functions must not be marked deterministic: constant
      // folding would make the error fire (or not) depending on whether an
      // argument is a literal or a subquery, and mutations move between
      // those forms.
      auto reg_lazy = [&](const char* name, int argc,
                          void (*fn)(sqlite3_context*, int,
                                     sqlite3_value**)) {
        sqlite3_create_function(handle, name, argc, SQLITE_UTF8, nullptr, fn,
                                nullptr, nullptr);
      };
      reg("rand", 0, fn_rand);
      reg("rand", 1, fn_rand);
      reg("sleep", 1, fn_zero);
      reg("benchmark", 2, fn_zero);
      reg("ord", 1, fn_ord);
      reg("ascii", 1, fn_ord);
      reg("version", 0, fn_version);
      reg("database", 0, fn_database);
      reg("user", 0, fn_user);
      reg("current_user", 0, fn_user);
      reg_lazy("extractvalue", 2, fn_xml_error);
      reg_lazy("updatexml", 3, fn_xml_error);
      reg("concat", -1, fn_concat);
      reg("md5", 1, fn_md5);
      reg("floor", 1, fn_floor);
      reg("if", 3, fn_if);
      reg("mid", 2, fn_substring);
      reg("mid", 3, fn_substring);
      reg("substring", 2, fn_substring);
      reg("substring", 3, fn_substring);
      reg("regexp", 2, fn_regexp);
    }
  };

  std::string seed_sql_;
  std::vector<QueryTemplate> templates_;
  std::chrono::milliseconds timeout_;
};

}  // namespace advsqli
