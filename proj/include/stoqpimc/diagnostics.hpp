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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stoqpimc/chain.hpp"
#include "stoqpimc/error.hpp"
#include "stoqpimc/estimators.hpp"
#include "stoqpimc/mapping.hpp"
#include "stoqpimc/oracle.hpp"

namespace stoqpimc {

/// (1/2) sum |p_i - q_i|.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw Error(ErrorKind::LengthMismatch, "lengths " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
    return 0.5 * total;
}

// ---------------------------------------------------------------------------
// Exact mixing

struct MixingOptions {
    std::uint64_t maxSteps = 100000;
};

struct MixingReport {
    bool exact = true;
    std::string label = "exact";
    double epsilon = 0.25;
    std::vector<std::pair<std::uint64_t, double>> tvCurve; // worst-start distance after t steps
    std::uint64_t tauEpsilon = 0;                           // first t with d(t) <= epsilon
    std::uint64_t tauMix = 0;                               // first t with d(t) <= 1/4
    double spectralGap = 0.0;                               // 1 - max |lambda| over non-unit eigenvalues
    double secondEigenvalue = 0.0;
    double piMin = 0.0;
    double relaxationBound = 0.0; // (1 / gap) ln(4 / piMin), an upper bound on tauMix
    std::uint64_t epsilonBound = 0; // tauMix * ceil(log2(1 / epsilon)), an upper bound on tauEpsilon
    double logEpsilonRatio = 0.0;   // tauEpsilon / (tauMix ln(1 / epsilon))
    bool relaxationConsistent = false;
    bool epsilonConsistent = false;
};

/// Mixing profile of a reversible kernel P with stationary vector pi. Rows with
/// pi = 0 are ignored as starting states.
inline MixingReport mixing_from_kernel(const DenseOperator& P, const Eigen::VectorXd& pi, double epsilon,
                                       const MixingOptions& options = {}) {
    if (P.rows() != P.cols() || P.rows() != pi.size()) throw Error(ErrorKind::LengthMismatch, "kernel and distribution sizes differ");
    if (!(epsilon > 0.0) || epsilon >= 1.0) throw Error(ErrorKind::InvalidArgument, "epsilon must lie in (0, 1)");
    MixingReport r;
    r.epsilon = epsilon;
    std::vector<Eigen::Index> support;
    for (Eigen::Index x = 0; x < pi.size(); ++x)
        if (pi(x) > 0.0) support.push_back(x);
    const auto s = static_cast<Eigen::Index>(support.size());
    DenseOperator K(s, s);
    Eigen::VectorXd p(s);
    for (Eigen::Index a = 0; a < s; ++a) {
        p(a) = pi(support[a]);
        for (Eigen::Index b = 0; b < s; ++b) K(a, b) = P(support[a], support[b]);
    }
    r.piMin = p.minCoeff();

    // Spectrum from the symmetrised kernel D^{1/2} K D^{-1/2}.
    const Eigen::VectorXd root = p.array().sqrt().matrix();
    DenseOperator S = root.asDiagonal() * K * root.cwiseInverse().asDiagonal();
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(S, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& lambda = solver.eigenvalues(); // ascending
    double second = 0.0;
    if (s > 1) second = std::max(std::abs(lambda(0)), std::abs(lambda(s - 2)));
    r.secondEigenvalue = s > 1 ? lambda(s - 2) : 0.0;
    r.spectralGap = 1.0 - second;
    r.relaxationBound = r.spectralGap > 0.0 ? std::log(4.0 / r.piMin) / r.spectralGap : kPosInf;

    const double target = std::min(epsilon, 0.25);
    DenseOperator Pt = DenseOperator::Identity(s, s);
    const Eigen::RowVectorXd pRow = p.transpose();
    bool haveMix = false, haveEps = false;
    for (std::uint64_t t = 0; t <= options.maxSteps; ++t) {
        double worst = 0.0;
        for (Eigen::Index a = 0; a < s; ++a) worst = std::max(worst, 0.5 * (Pt.row(a) - pRow).cwiseAbs().sum());
        r.tvCurve.emplace_back(t, worst);
        if (!haveMix && worst <= 0.25) {
            r.tauMix = t;
            haveMix = true;
        }
        if (!haveEps && worst <= epsilon) {
            r.tauEpsilon = t;
            haveEps = true;
        }
        if (worst <= target) break;
        Pt = Pt * K;
    }
    if (!haveMix || !haveEps) throw Error(ErrorKind::BudgetExceeded, "distance did not reach epsilon within the step cap");
    const auto halvings = static_cast<std::uint64_t>(std::ceil(std::log2(1.0 / epsilon) - 1e-12));
    r.epsilonBound = r.tauMix * std::max<std::uint64_t>(1, halvings);
    r.logEpsilonRatio = r.tauMix > 0 ? r.tauEpsilon / (r.tauMix * std::log(1.0 / epsilon)) : 0.0;
    r.relaxationConsistent = r.tauMix <= r.relaxationBound;
    r.epsilonConsistent = r.tauEpsilon <= r.epsilonBound;
    return r;
}

/// Exact mixing profile of the Metropolis kernel of `system`.
inline MixingReport empirical_mixing(const TrotterizedSystem& system, double epsilon,
                                     const std::optional<JumpBudget>& budget = std::nullopt,
                                     const MixingOptions& options = {}, const OracleLimits& limits = {}) {
    const TransitionMatrix tm = transition_matrix(system, budget, limits);
    const GibbsVector g = exact_gibbs_vector(system, limits);
    Eigen::VectorXd pi(static_cast<Eigen::Index>(tm.states.size()));
    for (std::size_t k = 0; k < tm.states.size(); ++k) pi(static_cast<Eigen::Index>(k)) = g.probability[tm.states[k]];
    pi /= pi.sum();
    return mixing_from_kernel(tm.P, pi, epsilon, options);
}

// ---------------------------------------------------------------------------
// Heuristic mixing

/// Integrated autocorrelation time with Sokal's self-consistent window (c = 5).
inline double integrated_autocorrelation_time(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) return 1.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= n;
    if (c0 <= 0.0) return 1.0;
    double tau = 1.0;
    for (std::size_t lag = 1; lag < n / 2; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
        c /= n;
        tau += 2.0 * c / c0;
        if (static_cast<double>(lag) >= 5.0 * tau) break;
    }
    return std::max(tau, 1.0);
}

/// Potential scale reduction factor across chains of equal length.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2) return 1.0;
    const std::size_t n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw Error(ErrorKind::LengthMismatch, "chains differ in length");
    if (n < 2) return 1.0;
    std::vector<double> means(m);
    double grand = 0.0, within = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        double mu = 0.0;
        for (double v : chains[c]) mu += v;
        mu /= n;
        means[c] = mu;
        grand += mu;
        double s2 = 0.0;
        for (double v : chains[c]) s2 += (v - mu) * (v - mu);
        within += s2 / (n - 1);
    }
    grand /= m;
    within /= m;
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between *= static_cast<double>(n) / (m - 1);
    if (within <= 0.0) return between > 0.0 ? kPosInf : 1.0;
    const double varPlus = (n - 1.0) / n * within + between / n;
    return std::sqrt(varPlus / within);
}

struct HeuristicMixingReport {
    std::string label = "heuristic";
    std::size_t chains = 0;
    std::uint64_t stepsPerRecord = 0;
    std::size_t records = 0;
    double integratedAutocorrelation = 0.0; // in records, worst chain
    double gelmanRubin = 1.0;
    double acceptanceRate = 0.0;
};

/// logWeight traces of independent chains, recorded every `stepsPerRecord`
/// steps after `burnIn`, summarised by autocorrelation time and R-hat.
inline HeuristicMixingReport heuristic_mixing(const TrotterizedSystem& system, std::size_t chains, std::uint64_t seed,
                                              std::uint64_t burnIn, std::size_t records,
                                              std::uint64_t stepsPerRecord = 0, unsigned threads = 1) {
    HeuristicMixingReport r;
    r.chains = chains;
    r.records = records;
    r.stepsPerRecord = stepsPerRecord > 0 ? stepsPerRecord : static_cast<std::uint64_t>(system.sites()) * system.slices();
    auto states = prepare_chains(system, chains, seed, burnIn, threads);
    std::vector<std::vector<double>> traces(chains);
    parallel_for(chains, threads, [&](std::size_t c) {
        traces[c].reserve(records);
        for (std::size_t t = 0; t < records; ++t) {
            run(states[c], system, r.stepsPerRecord);
            traces[c].push_back(states[c].logWeight);
        }
    });
    std::uint64_t proposals = 0, accepted = 0;
    for (std::size_t c = 0; c < chains; ++c) {
        r.integratedAutocorrelation = std::max(r.integratedAutocorrelation, integrated_autocorrelation_time(traces[c]));
        proposals += states[c].proposals;
        accepted += states[c].accepted;
    }
    r.gelmanRubin = gelman_rubin(traces);
    r.acceptanceRate = proposals ? static_cast<double>(accepted) / proposals : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Jump concentration

struct WorldlineExceedance {
    int worldline = 0;
    std::size_t exceedances = 0;
    double frequency = 0.0;
    double lower = 0.0; // Wilson interval at z = 3
    double upper = 0.0;
    bool violatesEnvelope = false; // lower > envelope
};

struct JumpConcentrationReport {
    double threshold = 0.0; // c beta ln n
    double c = 4.0;
    double envelope = 0.0;  // n^{-c}
    std::size_t samples = 0;
    std::vector<WorldlineExceedance> worldlines;
    double maxFrequency = 0.0;
    double maxUpper = 0.0;
    bool anyViolation = false;
};

/// Wilson score interval for k successes out of m at z standard deviations.
inline std::pair<double, double> wilson_interval(std::size_t k, std::size_t m, double z = 3.0) {
    if (m == 0) return {0.0, 1.0};
    const double p = static_cast<double>(k) / m;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / m;
    const double centre = (p + z2 / (2.0 * m)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / m + z2 / (4.0 * m * m)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// `jumpCounts[s][j]` is d_j of sample s.
inline JumpConcentrationReport jump_concentration_report(const std::vector<std::vector<int>>& jumpCounts, double beta, int n,
                                                         double c = 4.0) {
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
    JumpConcentrationReport r;
    r.c = c;
    r.threshold = c * beta * std::log(static_cast<double>(n));
    r.envelope = std::pow(static_cast<double>(n), -c);
    r.samples = jumpCounts.size();
    r.worldlines.resize(n);
    for (int j = 0; j < n; ++j) r.worldlines[j].worldline = j;
    for (const auto& d : jumpCounts) {
        if (static_cast<int>(d.size()) != n) throw Error(ErrorKind::LengthMismatch, "jump vector length differs from n");
        for (int j = 0; j < n; ++j)
            if (d[j] >= r.threshold) ++r.worldlines[j].exceedances;
    }
    for (auto& w : r.worldlines) {
        w.frequency = r.samples ? static_cast<double>(w.exceedances) / r.samples : 0.0;
        std::tie(w.lower, w.upper) = wilson_interval(w.exceedances, r.samples);
        w.violatesEnvelope = w.lower > r.envelope;
        r.maxFrequency = std::max(r.maxFrequency, w.frequency);
        r.maxUpper = std::max(r.maxUpper, w.upper);
        r.anyViolation = r.anyViolation || w.violatesEnvelope;
    }
    return r;
}

inline JumpConcentrationReport jump_concentration_report(const std::vector<SpinConfiguration>& samples, double beta, int n,
                                                         double c = 4.0) {
    std::vector<std::vector<int>> counts;
    counts.reserve(samples.size());
    for (const auto& z : samples) {
        std::vector<int> d(n);
        for (int j = 0; j < n; ++j) d[j] = jump_count(z, j);
        counts.push_back(std::move(d));
    }
    return jump_concentration_report(counts, beta, n, c);
}

/// Pr_pi[d_j >= threshold] per worldline by enumeration of the lattice.
inline std::vector<double> exact_jump_exceedance(const TrotterizedSystem& system, double threshold,
                                                 const OracleLimits& limits = {}) {
    const GibbsVector g = exact_gibbs_vector(system, limits);
    const int n = system.sites();
    const int L = system.slices();
    std::vector<double> out(n, 0.0);
    for (std::uint64_t x = 0; x < g.probability.size(); ++x) {
        if (g.probability[x] == 0.0) continue;
        const SpinConfiguration z = SpinConfiguration::from_index(x, n, L);
        for (int j = 0; j < n; ++j)
            if (jump_count(z, j) >= threshold) out[j] += g.probability[x];
    }
    return out;
}

} // namespace stoqpimc
