// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace glimpse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Entry point shared by the glimpse binary and the CLI tests. Returns the
// process exit code; never calls exit().
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace glimpse::cli
