#pragma once

#include <stdexcept>
#include <string>

namespace drflow {

/// Structural misuse of the lattice: incompatible steps, misaligned
/// shifts, out-of-range arguments.
class grid_error : public std::invalid_argument {
public:
    explicit grid_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Mass escaping past x_max exceeded the tracked-overflow budget.
/// The recursions are mass-conservative, so a run that trips this is
/// telling us the grid is too short for the dynamics, not that a little
/// mass may be ignored.
class tail_overflow_error : public std::runtime_error {
public:
    tail_overflow_error(const std::string& what, long step = -1)
        : std::runtime_error(what), step_(step) {}

    /// Step index of the evolution that aborted, or -1 when not stepwise.
    long step() const { return step_; }

private:
    long step_;
};

/// A transport solve was asked for more support sites than the
/// configured cap allows; the caller should fall back to upper_w or
/// coarsen first.
class support_cap_error : public std::runtime_error {
public:
    explicit support_cap_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical invariant violated hard enough that continuing would
/// corrupt downstream results (negative mass above clamp threshold,
/// infeasible transport marginals, ...).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace drflow
