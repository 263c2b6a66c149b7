#pragma once

#include "config.hpp"

namespace drflow::cli {

// Exit codes: 0 all gates pass, 1 gate failure, 2 configuration error,
// 3 numerical abort (overflow / invariant breach).
inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalAbort = 3;

int cmd_discrete(const RunConfig& config);
int cmd_cdr(const RunConfig& config);
int cmd_paths(const RunConfig& config);
int cmd_scaling(const RunConfig& config);
int cmd_phase(const RunConfig& config);
int cmd_semigroup(const RunConfig& config);

} // namespace drflow::cli
