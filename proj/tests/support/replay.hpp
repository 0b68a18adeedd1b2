// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

// Recomputes hit metrics from a serialized trace, without the metrics module.

#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace replay {

struct Counts {
  std::size_t windows = 0, positions = 0, fh = 0, th = 0, to_pd_ad = 0, to_ad_pd = 0;
  bool occur_bounds_hold = true;  // TH <= both TO counts in every window
};

// `reference` is the AR continuation after the prompt, EOS included when the
// AR run ended on it.
inline Counts from_jsonl(const std::string& jsonl, std::size_t prompt_len,
                         const std::vector<std::uint32_t>& reference) {
  Counts out;
  std::istringstream in(jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto window = j.at("window").get<std::vector<std::uint32_t>>();
    const std::size_t start = j.at("frontier").get<std::size_t>() - prompt_len;
    if (window.empty() || start + window.size() > reference.size()) continue;
    const std::vector<std::uint32_t> ref(reference.begin() + static_cast<std::ptrdiff_t>(start),
                                         reference.begin() +
                                             static_cast<std::ptrdiff_t>(start + window.size()));
    const std::set<std::uint32_t> ref_set(ref.begin(), ref.end());
    const std::set<std::uint32_t> win_set(window.begin(), window.end());
    std::size_t th = 0, a = 0, b = 0;
    for (std::size_t k = 0; k < window.size(); ++k) {
      th += window[k] == ref[k];
      a += ref_set.count(window[k]);
      b += win_set.count(ref[k]);
    }
    out.windows += 1;
    out.positions += window.size();
    out.fh += window[0] == ref[0];
    out.th += th;
    out.to_pd_ad += a;
    out.to_ad_pd += b;
    if (th > a || th > b) out.occur_bounds_hold = false;
  }
  return out;
}

}  // namespace replay
