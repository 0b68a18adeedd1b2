// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include "glimpse/metrics.hpp"

#include <algorithm>

namespace glimpse {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool contains(TokenSpan s, Token t) { return std::find(s.begin(), s.end(), t) != s.end(); }

}  // namespace

double HitReport::first_hit_ratio() const { return ratio(first_hit, windows); }
double HitReport::total_hit_ratio() const { return ratio(total_hit, positions); }
double HitReport::occur_pd_ad_ratio() const { return ratio(occur_pd_ad, positions); }
double HitReport::occur_ad_pd_ratio() const { return ratio(occur_ad_pd, positions); }

HitReport& HitReport::operator+=(const HitReport& other) {
  windows += other.windows;
  positions += other.positions;
  first_hit += other.first_hit;
  total_hit += other.total_hit;
  occur_pd_ad += other.occur_pd_ad;
  occur_ad_pd += other.occur_ad_pd;
  return *this;
}

WindowRecord score_window(const WindowSnapshot& snapshot) {
  const auto& g = snapshot.guesses;
  const auto& r = snapshot.reference;
  require(g.size() == r.size(), "score_window: guesses and reference are misaligned");
  WindowRecord rec;
  rec.width = g.size();
  rec.first_hit = !g.empty() && g[0] == r[0];
  for (std::size_t k = 0; k < g.size(); ++k) {
    rec.total_hit += g[k] == r[k];
    rec.occur_pd_ad += contains(r, g[k]);
    rec.occur_ad_pd += contains(g, r[k]);
  }
  return rec;
}

HitReport aggregate(std::span<const WindowRecord> records) {
  HitReport report;
  for (const auto& rec : records) {
    ++report.windows;
    report.positions += rec.width;
    report.first_hit += rec.first_hit;
    report.total_hit += rec.total_hit;
    report.occur_pd_ad += rec.occur_pd_ad;
    report.occur_ad_pd += rec.occur_ad_pd;
  }
  return report;
}

TokenSeq reference_stream(const DecodeResult& ar) {
  TokenSeq ref = ar.exact_rationale;
  if (ar.eos_reached && !ar.trace.iterations.empty()) {
    ref.push_back(ar.trace.iterations.back().committed.back());
  }
  return ref;
}

std::vector<WindowSnapshot> window_snapshots(const DecodeResult& fastcot,
                                             TokenSpan reference) {
  std::vector<WindowSnapshot> out;
  const std::size_t p = fastcot.prompt.size();
  for (const auto& rec : fastcot.trace.iterations) {
    const std::size_t c = rec.window.size();
    if (c == 0) continue;
    require(rec.frontier >= p, "window_snapshots: frontier precedes the prompt end");
    const std::size_t off = rec.frontier - p;
    if (off + c > reference.size()) continue;
    WindowSnapshot snap;
    snap.iteration = rec.iteration;
    snap.frontier = rec.frontier;
    snap.guesses = rec.window;
    snap.reference.assign(reference.begin() + static_cast<std::ptrdiff_t>(off),
                          reference.begin() + static_cast<std::ptrdiff_t>(off + c));
    out.push_back(std::move(snap));
  }
  return out;
}

HitReport hit_report(const DecodeResult& fastcot, const DecodeResult& ar) {
  require(fastcot.prompt == ar.prompt, "hit_report: runs decode different prompts");
  const TokenSeq ref = reference_stream(ar);
  std::vector<WindowRecord> records;
  for (const auto& snap : window_snapshots(fastcot, ref)) records.push_back(score_window(snap));
  return aggregate(records);
}

IterationSavings iteration_savings(const DecodeResult& fastcot, const DecodeResult& ar) {
  require(fastcot.prompt == ar.prompt, "iteration_savings: runs decode different prompts");
  IterationSavings s;
  s.ar_iterations = ar.iterations();
  s.fastcot_iterations = fastcot.iterations();
  s.ar_tokens = ar.exact_rationale.size();
  s.fastcot_tokens = fastcot.exact_rationale.size();
  // Counted in forward calls, so an EOS-terminated run is not off by one.
  s.saved_iterations =
      s.ar_iterations > s.fastcot_iterations ? s.ar_iterations - s.fastcot_iterations : 0;
  s.wall_clock_ratio = fastcot.trace.time.total > 0.0
                           ? ar.trace.time.total / fastcot.trace.time.total
                           : 0.0;
  return s;
}

}  // namespace glimpse
