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

#include <algorithm>
#include <cmath>

#include "stoqpimc/error.hpp"
#include "stoqpimc/models.hpp"
#include "stoqpimc/oracle.hpp"

namespace stoqpimc {

struct SliceOptions {
    double constant = 1.0;     // L0 = ceil(constant * beta * norm bound)
    int maxSlices = 4096;
    int oracleSites = 10;      // exact doubling up to this many sites
    int calibrationSites = 8;  // open subchain used above that
};

namespace detail {

/// First m sites as an open chain, keeping only terms inside the window.
inline Model leading_subchain(const Model& model, int m) {
    return std::visit(
        [m](const auto& full) -> Model {
            using T = std::decay_t<decltype(full)>;
            T sub = full;
            sub.n = m;
            sub.boundary = Boundary::open;
            if constexpr (std::is_same_v<T, TransverseIsingModel>) {
                sub.gamma.resize(m);
                sub.kz.resize(m);
                sub.kzz.clear();
                for (const auto& [p, v] : full.kzz)
                    if (p.second < m) sub.kzz[p] = v;
            } else if constexpr (std::is_same_v<T, XYChainModel>) {
                sub.gamma.resize(m);
                sub.kz.resize(m);
                sub.kxx.resize(m - 1);
                sub.kyy.resize(m - 1);
                sub.kzz.resize(m - 1);
            } else {
                sub.terms.resize(m - 1);
            }
            return sub;
        },
        model);
}

inline int round_up_even(double x) {
    const int v = std::max(2, static_cast<int>(std::ceil(x)));
    return v + (v % 2);
}

} // namespace detail

/// Even slice count L with |ln Z_{beta,L} - ln Z_beta| <= delta under the
/// doubling rule |ln Z_{beta,2L} - ln Z_{beta,L}| <= delta / 2. Chains too
/// large for the dense oracle are calibrated on a leading open subchain and
/// the per-site error is scaled by n.
inline int choose_trotter_slices(const Model& model, double beta, double delta, const SliceOptions& options = {}) {
    if (!(delta > 0.0) || delta > 1.0 / 21.0)
        throw Error(ErrorKind::InvalidDelta, "delta must lie in (0, 1/21]");
    const int n = site_count(model);
    int L = detail::round_up_even(options.constant * beta * norm_upper_bound(model));
    if (L > options.maxSlices) throw Error(ErrorKind::BudgetExceeded, "initial slice count exceeds the cap");
    if (beta == 0.0) return L;

    Model probe = model;
    double scale = 1.0;
    if (n > options.oracleSites) {
        const int m = std::min(options.calibrationSites, options.oracleSites);
        probe = detail::leading_subchain(model, m);
        scale = static_cast<double>(n) / m;
    }
    const LocalHamiltonian h = to_local(probe);
    double current = exact_trotter_log_partition(h, beta, L);
    while (true) {
        const double refined = exact_trotter_log_partition(h, beta, 2 * L);
        if (scale * std::abs(refined - current) <= delta / 2.0) return L;
        L *= 2;
        if (L > options.maxSlices)
            throw Error(ErrorKind::BudgetExceeded, "slice count would exceed the cap of " + std::to_string(options.maxSlices));
        current = refined;
    }
}

} // namespace stoqpimc
