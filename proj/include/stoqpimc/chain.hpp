/*
   Copyright 2026 The stoqpimc Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

// Single-site Metropolis kernel on the classical lattice, optionally
// restricted to configurations with a bounded number of jumps per worldline.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "stoqpimc/error.hpp"
#include "stoqpimc/mapping.hpp"
#include "stoqpimc/rng.hpp"

namespace stoqpimc {

/// Per-worldline jump cap 2B.
struct JumpBudget {
    int B = 1;

    int cap() const { return 2 * B; }

    /// 2B = c * beta * ln(n), rounded up to an even count, B >= 1.
    static JumpBudget from_temperature(double beta, int n, double c = 4.0) {
        const double twoB = c * beta * std::log(static_cast<double>(std::max(n, 2)));
        return JumpBudget{std::max(1, static_cast<int>(std::ceil(twoB / 2.0)))};
    }
};

/// d_j(z): slice boundaries (periodic) where worldline j changes.
inline int jump_count(const SpinConfiguration& z, int j) {
    const int L = z.slices();
    int count = 0;
    for (int i = 0; i < L; ++i) count += z(i, j) != z((i + 1) % L, j);
    return count;
}

/// Slice boundaries where worldlines j and j+1 (mod n) jump together.
inline int double_jump_count(const SpinConfiguration& z, int j) {
    const int L = z.slices();
    const int k = (j + 1) % z.sites();
    int count = 0;
    for (int i = 0; i < L; ++i) {
        const int next = (i + 1) % L;
        count += (z(i, j) != z(next, j)) && (z(i, k) != z(next, k));
    }
    return count;
}

inline bool within_budget(const SpinConfiguration& z, const JumpBudget& budget) {
    for (int j = 0; j < z.sites(); ++j)
        if (jump_count(z, j) > budget.cap()) return false;
    return true;
}

/// Uniform draw from the configurations with constant worldlines.
inline SpinConfiguration sample_frozen_uniform(int n, int L, RandomStream& rng) {
    std::vector<std::int8_t> slice(n);
    for (auto& s : slice) s = rng.coin() ? -1 : 1;
    return SpinConfiguration::frozen(slice, L);
}

/// State of one chain. `logWeight` always equals log_weight(config) and is finite.
struct ChainState {
    SpinConfiguration config;
    double logWeight = 0.0;
    RandomStream rng;
    std::uint64_t steps = 0;
    std::uint64_t proposals = 0; // non-lazy steps
    std::uint64_t accepted = 0;
    std::vector<int> jumps;      // d_j per worldline
};

/// Builds a chain at `start`; a zero-weight start is replaced by a frozen draw.
inline ChainState make_chain_state(const TrotterizedSystem& system, SpinConfiguration start, std::uint64_t seed) {
    ChainState state;
    state.rng = RandomStream(seed);
    double lw = system.log_weight(start);
    while (lw == kNegInf) {
        start = sample_frozen_uniform(system.sites(), system.slices(), state.rng);
        lw = system.log_weight(start);
    }
    state.config = std::move(start);
    state.logWeight = lw;
    state.jumps.resize(system.sites());
    for (int j = 0; j < system.sites(); ++j) state.jumps[j] = jump_count(state.config, j);
    return state;
}

/// Moves the chain to a new system (e.g. another beta) keeping its configuration.
inline void rebind(ChainState& state, const TrotterizedSystem& system) {
    state.logWeight = system.log_weight(state.config);
    if (state.logWeight == kNegInf) {
        state = make_chain_state(system, state.config, state.rng.next());
    }
}

struct StepOutcome {
    bool lazy = true;
    int slice = -1;
    int site = -1;
    double logRatio = 0.0;
    bool blocked = false; // rejected by the jump budget
    bool accepted = false;
};

namespace detail {

inline int jump_change(const SpinConfiguration& z, int i, int j) {
    const int L = z.slices();
    const int before = (z((i + L - 1) % L, j) != z(i, j)) + (z(i, j) != z((i + 1) % L, j));
    return 2 - 2 * before;
}

inline StepOutcome step(ChainState& state, const TrotterizedSystem& system, const JumpBudget* budget) {
    // Draw order: laziness coin, site index, acceptance uniform (only when
    // the log-ratio is finite and negative).
    StepOutcome out;
    ++state.steps;
    if (state.rng.coin()) return out;
    out.lazy = false;
    ++state.proposals;
    const int n = system.sites();
    const auto site = state.rng.index(static_cast<std::uint64_t>(n) * system.slices());
    out.slice = static_cast<int>(site / n);
    out.site = static_cast<int>(site % n);
    const int dj = detail::jump_change(state.config, out.slice, out.site);
    if (budget && state.jumps[out.site] + dj > budget->cap()) {
        out.blocked = true;
        return out;
    }
    out.logRatio = system.log_weight_ratio_single_flip(state.config, out.slice, out.site);
    if (out.logRatio == kNegInf) return out;
    if (out.logRatio < 0.0 && !(state.rng.uniform() < std::exp(out.logRatio))) return out;
    out.accepted = true;
    ++state.accepted;
    state.config.flip(out.slice, out.site);
    state.logWeight += out.logRatio;
    state.jumps[out.site] += dj;
    return out;
}

} // namespace detail

/// One lazy Metropolis step: with probability 1/2 stay; otherwise propose a
/// uniformly chosen site flip, accepted with probability min(1, w'/w).
inline StepOutcome metropolis_step(ChainState& state, const TrotterizedSystem& system) {
    return detail::step(state, system, nullptr);
}

/// Same kernel, rejecting proposals that would push a worldline past 2B jumps.
inline StepOutcome metropolis_step_restricted(ChainState& state, const TrotterizedSystem& system,
                                              const JumpBudget& budget) {
    for (int j = 0; j < system.sites(); ++j)
        if (state.jumps[j] > budget.cap())
            throw Error(ErrorKind::InitialStateOutsideRestriction,
                        "worldline " + std::to_string(j + 1) + " has " + std::to_string(state.jumps[j]) +
                            " jumps, cap " + std::to_string(budget.cap()));
    return detail::step(state, system, &budget);
}

/// Applies the kernel `steps` times.
inline void run(ChainState& state, const TrotterizedSystem& system, std::uint64_t steps,
                const std::optional<JumpBudget>& budget = std::nullopt) {
    if (budget) {
        if (steps == 0) return;
        metropolis_step_restricted(state, system, *budget);
        for (std::uint64_t s = 1; s < steps; ++s) detail::step(state, system, &*budget);
    } else {
        for (std::uint64_t s = 0; s < steps; ++s) detail::step(state, system, nullptr);
    }
}

} // namespace stoqpimc
