// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glimpse {

using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;
using TokenSpan = std::span<const Token>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Cached state does not describe the context handed to a forward call.
class CacheMismatch : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class InstrumentationError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline TokenSeq concat(std::initializer_list<TokenSpan> parts) {
  std::size_t total = 0;
  for (auto p : parts) total += p.size();
  TokenSeq out;
  out.reserve(total);
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace glimpse
