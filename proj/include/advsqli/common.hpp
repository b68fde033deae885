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

#pragma once

#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace advsqli {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class LexError : public Error {
 public:
  explicit LexError(const std::string& what) : Error(what) {}
};

class EmptyAlternatives : public Error {
 public:
  explicit EmptyAlternatives(const std::string& what) : Error(what) {}
};

class DepthExhausted : public Error {
 public:
  explicit DepthExhausted(const std::string& what) : Error(what) {}
};

class StaleNodeRef : public Error {
 public:
  explicit StaleNodeRef(const std::string& what) : Error(what) {}
};

class NoChildren : public Error {
 public:
  explicit NoChildren(const std::string& what) : Error(what) {}
};

class ModeMismatch : public Error {
 public:
  explicit ModeMismatch(const std::string& what) : Error(what) {}
};

class DetectorUnavailable : public Error {
 public:
  explicit DetectorUnavailable(const std::string& what) : Error(what) {}
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MisalignedCampaigns : public Error {
 public:
  explicit MisalignedCampaigns(const std::string& what) : Error(what) {}
};

// HTTP request methods a payload can be delivered through.
enum class RequestMethod { kGet, kGetJson, kPost, kPostJson };

inline bool is_json_method(RequestMethod m) {
  return m == RequestMethod::kGetJson || m == RequestMethod::kPostJson;
}

inline const char* to_string(RequestMethod m) {
  switch (m) {
    case RequestMethod::kGet: return "get";
    case RequestMethod::kGetJson: return "get-json";
    case RequestMethod::kPost: return "post";
    case RequestMethod::kPostJson: return "post-json";
  }
  return "?";
}

inline bool parse_request_method(std::string_view s, RequestMethod& out) {
  if (s == "get") out = RequestMethod::kGet;
  else if (s == "get-json") out = RequestMethod::kGetJson;
  else if (s == "post") out = RequestMethod::kPost;
  else if (s == "post-json") out = RequestMethod::kPostJson;
  else return false;
  return true;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(ascii_lower(c));
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
  return true;
}

namespace codec {

inline bool is_hex_digit(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') ||
         (c >= 'A' && c <= 'F');
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return c - 'A' + 10;
}

// Percent-encodes a query-component value. Unreserved characters and the
// sub-delims that survive form decoding are kept literal; '+' must be
// encoded because form decoding maps it back to a space.
inline std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9');
    switch (c) {
      case '-': case '.': case '_': case '~':
      case '!': case '$': case '\'': case '(': case ')':
      case '*': case ',': case ';': case '=': case ':':
      case '@': case '/': case '?':
        keep = true;
        break;
      default:
        break;
    }
    if (keep) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

// Form-style decode: %XX sequences and '+' as space. Invalid sequences are
// kept literal.
inline std::string url_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && is_hex_digit(s[i + 1]) &&
        is_hex_digit(s[i + 2])) {
      out.push_back(
          static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2])));
      i += 2;
    } else if (s[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// JSON string-body escape (no surrounding quotes).
inline std::string json_escape(std::string_view s) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out.push_back(hex[c >> 4]);
          out.push_back(hex[c & 0xF]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

// Inverse of json_escape. Unknown escapes are kept literal; \uXXXX is
// decoded for the Latin-1 range only (payloads are byte strings).
inline std::string json_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      out.push_back(s[i]);
      continue;
    }
    char e = s[i + 1];
    switch (e) {
      case '"': out.push_back('"'); ++i; break;
      case '\\': out.push_back('\\'); ++i; break;
      case '/': out.push_back('/'); ++i; break;
      case 'b': out.push_back('\b'); ++i; break;
      case 'f': out.push_back('\f'); ++i; break;
      case 'n': out.push_back('\n'); ++i; break;
      case 'r': out.push_back('\r'); ++i; break;
      case 't': out.push_back('\t'); ++i; break;
      case 'u':
        if (i + 5 < s.size() && is_hex_digit(s[i + 2]) &&
            is_hex_digit(s[i + 3]) && is_hex_digit(s[i + 4]) &&
            is_hex_digit(s[i + 5])) {
          int code = (hex_value(s[i + 2]) << 12) | (hex_value(s[i + 3]) << 8) |
                     (hex_value(s[i + 4]) << 4) | hex_value(s[i + 5]);
          if (code < 0x100) {
            out.push_back(static_cast<char>(code));
          } else {
            out.append(s.substr(i, 6));
          }
          i += 5;
        } else {
          out.push_back(s[i]);
        }
        break;
      default:
        out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace codec
}  // namespace advsqli
