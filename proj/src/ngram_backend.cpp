// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include "glimpse/backends.hpp"

namespace glimpse {
namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<Token> parse_token(std::string_view s) {
  Token v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<float> parse_score(std::string_view s) {
  // from_chars for floating point is not available on every toolchain we
  // target; strtof on a bounded copy is.
  std::string copy(s);
  char* end = nullptr;
  const float v = std::strtof(copy.c_str(), &end);
  if (end != copy.c_str() + copy.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

class NgramBackend final : public LanguageModel {
 public:
  explicit NgramBackend(NgramTable table) : table_(std::move(table)) {
    table_.spec.validate();
  }

  const BackendSpec& spec() const override { return table_.spec; }
  std::string name() const override { return "ngram"; }

 protected:
  StepOutput compute(TokenSpan context, std::size_t block_len,
                     CacheSlot) const override {
    StepOutput out;
    out.rows.reserve(block_len);
    const std::size_t split = context.size() - block_len;
    TokenSeq key;
    for (std::size_t j = 0; j < block_len; ++j) {
      const std::size_t prefix_len = split + j + 1;
      const std::size_t longest = std::min(table_.order, prefix_len);
      const NgramTable::Entry* hit = nullptr;
      for (std::size_t k = longest + 1; k-- > 0 && hit == nullptr;) {
        key.assign(context.begin() + static_cast<std::ptrdiff_t>(prefix_len - k),
                   context.begin() + static_cast<std::ptrdiff_t>(prefix_len));
        auto it = table_.entries.find(key);
        if (it != table_.entries.end()) hit = &it->second;
      }
      LogitsRow row(table_.spec.vocab_size, 0.0f);
      if (hit != nullptr) {
        if (hit->successor) {
          row[*hit->successor] = 1.0f;
        } else {
          row = hit->scores;
        }
      }
      out.rows.push_back(std::move(row));
    }
    return out;
  }

 private:
  NgramTable table_;
};

}  // namespace

NgramTable parse_ngram_table(std::istream& in, std::size_t order) {
  if (order == 0) throw ConfigError("n-gram order must be positive");
  NgramTable table;
  table.order = order;

  std::optional<std::size_t> vocab;
  std::optional<Token> pad, eos;
  Token max_id = 0;
  bool any_token = false;
  struct Pending {
    std::size_t line;
    TokenSeq context;
    std::string text;
  };
  std::vector<Pending> rows;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    view = view.substr(first);
    while (!view.empty() && (view.back() == '\r' || view.back() == ' ')) {
      view.remove_suffix(1);
    }

    if (view[0] == '@') {
      auto parts = split_ws(view);
      if (parts.size() != 2) throw ParseError(line_no, "directive takes one value");
      auto value = parse_token(parts[1]);
      if (!value) throw ParseError(line_no, "directive value must be an integer");
      if (parts[0] == "@vocab") {
        if (!rows.empty()) throw ParseError(line_no, "@vocab must precede records");
        vocab = *value;
      } else if (parts[0] == "@pad") {
        pad = *value;
      } else if (parts[0] == "@eos") {
        eos = *value;
      } else {
        throw ParseError(line_no, "unknown directive '" + std::string(parts[0]) + "'");
      }
      continue;
    }

    auto arrow = view.find("->");
    if (arrow == std::string_view::npos) throw ParseError(line_no, "missing '->'");
    Pending p{line_no, {}, {}};
    for (auto tok : split_ws(view.substr(0, arrow))) {
      auto t = parse_token(tok);
      if (!t) throw ParseError(line_no, "context token '" + std::string(tok) + "' is not a token id");
      p.context.push_back(*t);
      max_id = std::max(max_id, *t);
      any_token = true;
    }
    if (p.context.size() > order) {
      throw ParseError(line_no, "context longer than order " + std::to_string(order));
    }
    p.text = std::string(view.substr(arrow + 2));
    rows.push_back(std::move(p));
  }

  // Second pass over right-hand sides once the vocabulary is fixed.
  for (auto& p : rows) {
    auto rhs = split_ws(p.text);
    if (rhs.empty()) throw ParseError(p.line, "missing successor or score vector");
    if (rhs.size() == 1) {
      auto t = parse_token(rhs[0]);
      if (!t) throw ParseError(p.line, "successor must be a token id");
      max_id = std::max(max_id, *t);
      any_token = true;
    } else if (!vocab) {
      throw ParseError(p.line, "score vectors require a preceding @vocab directive");
    }
  }

  std::size_t vocab_size = 0;
  if (vocab) {
    vocab_size = *vocab;
  } else {
    vocab_size = any_token ? static_cast<std::size_t>(max_id) + 1 : 0;
    if (pad) vocab_size = std::max<std::size_t>(vocab_size, *pad + 1);
    if (eos) vocab_size = std::max<std::size_t>(vocab_size, *eos + 1);
  }
  if (!pad) pad = static_cast<Token>(vocab ? vocab_size - 2 : vocab_size++);
  if (!eos) eos = static_cast<Token>(vocab ? vocab_size - 1 : vocab_size++);

  table.spec.vocab_size = vocab_size;
  table.spec.pad_id = *pad;
  table.spec.eos_id = *eos;
  try {
    table.spec.validate();
  } catch (const ConfigError& e) {
    throw ParseError(line_no, e.what());
  }

  for (auto& p : rows) {
    auto rhs = split_ws(p.text);
    NgramTable::Entry entry;
    for (Token t : p.context) {
      if (t >= vocab_size) throw ParseError(p.line, "context token outside vocabulary");
    }
    if (rhs.size() == 1) {
      Token t = *parse_token(rhs[0]);
      if (t >= vocab_size) throw ParseError(p.line, "successor outside vocabulary");
      entry.successor = t;
    } else {
      if (rhs.size() != vocab_size) {
        throw ParseError(p.line, "score vector has " + std::to_string(rhs.size()) +
                                     " entries, expected " + std::to_string(vocab_size));
      }
      entry.scores.reserve(vocab_size);
      for (auto s : rhs) {
        auto v = parse_score(s);
        if (!v) throw ParseError(p.line, "bad score '" + std::string(s) + "'");
        entry.scores.push_back(*v);
      }
    }
    if (!table.entries.emplace(p.context, std::move(entry)).second) {
      throw ParseError(p.line, "duplicate context");
    }
  }
  return table;
}

std::shared_ptr<const LanguageModel> make_ngram_backend(NgramTable table) {
  return std::make_shared<NgramBackend>(std::move(table));
}

std::shared_ptr<const LanguageModel> make_ngram_backend(
    std::size_t order, const std::filesystem::path& table_file) {
  std::ifstream in(table_file);
  if (!in) throw ConfigError("cannot open n-gram table " + table_file.string());
  return make_ngram_backend(parse_ngram_table(in, order));
}

}  // namespace glimpse
