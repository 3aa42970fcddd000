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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stoqpimc/chain.hpp"
#include "stoqpimc/error.hpp"
#include "stoqpimc/mapping.hpp"
#include "stoqpimc/models.hpp"
#include "stoqpimc/operators.hpp"
#include "stoqpimc/parallel.hpp"
#include "stoqpimc/rng.hpp"
#include "stoqpimc/slices.hpp"

namespace stoqpimc {

// ---------------------------------------------------------------------------
// Schedule and sample budget

/// Uniform grid 0 = betas[0] < ... < betas[k] = beta.
/// `perStepLogRatioBound` bounds sup_z ln[w_{beta_{i-1}}(z) / w_{beta_i}(z)]
/// for every step; layer factors only grow with beta, so the diagonal part
/// alone sets it.
struct TemperatureSchedule {
    std::vector<double> betas;
    double perStepLogRatioBound = 0.0;

    int steps() const { return static_cast<int>(betas.size()) - 1; }
    double step_width() const { return betas.size() > 1 ? betas[1] - betas[0] : 0.0; }
};

inline int schedule_length(double beta, double normBound) {
    const double x = beta * normBound;
    return std::max(1, static_cast<int>(std::ceil(x * std::log(2.0 + x) - 1e-12)));
}

inline TemperatureSchedule build_schedule(double beta, double normBound, std::optional<double> diagonalBound = std::nullopt) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be finite and >= 0");
    if (!(normBound >= 0.0)) throw Error(ErrorKind::InvalidArgument, "norm bound must be >= 0");
    const int k = schedule_length(beta, normBound);
    TemperatureSchedule s;
    s.betas.resize(k + 1);
    for (int i = 0; i <= k; ++i) s.betas[i] = beta * i / k;
    s.betas[k] = beta;
    s.perStepLogRatioBound = beta / k * std::max(0.0, diagonalBound.value_or(normBound));
    return s;
}

/// t = ceil(2 ln(2 / deltaFail) / delta^2).
inline std::size_t hoeffding_samples(double delta, double deltaFail) {
    if (!(delta > 0.0) || !(deltaFail > 0.0) || deltaFail >= 1.0)
        throw Error(ErrorKind::InvalidArgument, "hoeffding_samples needs delta > 0 and deltaFail in (0, 1)");
    const double t = 2.0 * std::log(2.0 / deltaFail) / (delta * delta);
    return static_cast<std::size_t>(std::ceil(t * (1.0 - 1e-12)));
}

/// Samples for a mean with (asymptotic) variance `variance` of values in
/// [0, 1] to deviate by less than `delta` except with probability deltaFail,
/// from Bernstein's inequality: t = ceil((2 variance + 2 delta / 3) ln(2 / deltaFail) / delta^2).
inline std::size_t bernstein_samples(double variance, double delta, double deltaFail) {
    if (!(delta > 0.0) || !(deltaFail > 0.0) || deltaFail >= 1.0 || !(variance >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "bernstein_samples needs delta > 0, variance >= 0 and deltaFail in (0, 1)");
    const double t = (2.0 * variance + 2.0 * delta / 3.0) * std::log(2.0 / deltaFail) / (delta * delta);
    return static_cast<std::size_t>(std::ceil(t * (1.0 - 1e-12)));
}

inline std::uint64_t default_burn_in(int n, int L) {
    const double nl = static_cast<double>(n) * L;
    return static_cast<std::uint64_t>(std::ceil(10.0 * nl * std::log(std::max(nl, 2.0))));
}

/// Smallest ratio of a single-flip layer element to the diagonal element of
/// the same row.
inline double weakest_flip_ratio(const TrotterizedSystem& system) {
    double g = 1.0;
    for (int parity = 0; parity < 2; ++parity)
        for (const auto& f : system.layer(parity)) {
            const int d = f.dim();
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    const int x = r ^ c;
                    if (x != 1 && x != 2) continue;
                    g = std::min(g, std::exp(f.logElement[r * d + c] - f.logElement[r * d + r]));
                }
        }
    return g;
}

/// Burn-in for one temperature: the default, raised to n L / g^2 where g is
/// the weakest kink amplitude (worldline flips relax on that scale).
inline std::uint64_t relaxation_burn_in(const TrotterizedSystem& system) {
    const double nl = static_cast<double>(system.sites()) * system.slices();
    const double g = weakest_flip_ratio(system);
    const double slow = g > 0.0 ? nl / (g * g) : 0.0;
    return std::max(default_burn_in(system.sites(), system.slices()),
                    static_cast<std::uint64_t>(std::ceil(std::min(slow, 1e12))));
}

// ---------------------------------------------------------------------------
// Chain sampling driver

struct SamplingOptions {
    std::uint64_t thinning = 0; // steps between retained samples; 0 means n * L
    unsigned threads = 1;
};

/// Per-chain accumulation of a scalar statistic.
struct ChainSummary {
    double sum = 0.0;
    double sumSquares = 0.0;
    std::size_t count = 0;
    double maxValue = kNegInf;
    std::vector<double> batchMeans;
    double lag1 = 0.0; // lag-1 autocorrelation of the retained values
};

inline std::uint64_t resolve_thinning(const TrotterizedSystem& system, const SamplingOptions& options) {
    return options.thinning > 0 ? options.thinning
                                : static_cast<std::uint64_t>(system.sites()) * system.slices();
}

/// Number of samples chain c draws out of `total` split over `chains`.
inline std::size_t chain_share(std::size_t total, std::size_t chains, std::size_t c) {
    return total / chains + (c < total % chains ? 1 : 0);
}

/// Runs every chain for `thinning` steps before each retained sample and
/// records f(state). Results are per chain, in chain order.
template <class Statistic>
std::vector<ChainSummary> sample_chains(const TrotterizedSystem& system, std::span<ChainState> chains, std::size_t samples,
                                        const SamplingOptions& options, Statistic&& f) {
    if (chains.empty()) throw Error(ErrorKind::InvalidArgument, "at least one chain is required");
    const std::uint64_t thin = resolve_thinning(system, options);
    std::vector<ChainSummary> out(chains.size());
    parallel_for(chains.size(), options.threads, [&](std::size_t c) {
        const std::size_t share = chain_share(samples, chains.size(), c);
        const std::size_t batch = std::max<std::size_t>(1, (share + 9) / 10);
        ChainSummary& s = out[c];
        double batchSum = 0.0;
        std::size_t inBatch = 0;
        double previous = 0.0, lagSum = 0.0;
        for (std::size_t t = 0; t < share; ++t) {
            run(chains[c], system, thin);
            const double v = f(chains[c]);
            s.sum += v;
            s.sumSquares += v * v;
            s.maxValue = std::max(s.maxValue, v);
            if (t > 0) lagSum += v * previous;
            previous = v;
            ++s.count;
            batchSum += v;
            if (++inBatch == batch) {
                s.batchMeans.push_back(batchSum / batch);
                batchSum = 0.0;
                inBatch = 0;
            }
        }
        if (inBatch > 0) s.batchMeans.push_back(batchSum / inBatch);
        if (s.count > 2) {
            const double mean = s.sum / s.count;
            const double var = s.sumSquares / s.count - mean * mean;
            // Approximate lag-1 correlation from the raw cross moment.
            const double cross = lagSum / (s.count - 1) - mean * mean;
            s.lag1 = var > 1e-300 ? cross / var : 0.0;
        }
    });
    return out;
}

/// Mean and batch-means standard error over all chains.
struct ObservableEstimate {
    double mean = 0.0;
    double standardError = 0.0;
    std::size_t samples = 0;
};

inline ObservableEstimate combine(const std::vector<ChainSummary>& parts) {
    ObservableEstimate e;
    double sum = 0.0;
    std::vector<double> batches;
    for (const auto& p : parts) {
        sum += p.sum;
        e.samples += p.count;
        batches.insert(batches.end(), p.batchMeans.begin(), p.batchMeans.end());
    }
    if (e.samples == 0) return e;
    e.mean = sum / e.samples;
    if (batches.size() > 1) {
        double m = 0.0;
        for (double b : batches) m += b;
        m /= batches.size();
        double v = 0.0;
        for (double b : batches) v += (b - m) * (b - m);
        v /= (batches.size() - 1);
        e.standardError = std::sqrt(v / batches.size());
    }
    // Between-chain spread catches modes slower than one batch.
    if (parts.size() > 1) {
        double v = 0.0;
        std::size_t used = 0;
        for (const auto& p : parts)
            if (p.count > 0) {
                const double d = p.sum / p.count - e.mean;
                v += d * d * p.count;
                ++used;
            }
        if (used > 1) e.standardError = std::max(e.standardError, std::sqrt(v / (used - 1) / e.samples));
    }
    return e;
}

/// `count` chains started from independent frozen-uniform draws and run for
/// `burnIn` steps. Chain c is seeded with derive_seed(seed, stream, c).
inline std::vector<ChainState> prepare_chains(const TrotterizedSystem& system, std::size_t count, std::uint64_t seed,
                                              std::uint64_t burnIn, unsigned threads = 1, std::uint64_t stream = 0) {
    std::vector<ChainState> chains(count);
    parallel_for(count, threads, [&](std::size_t c) {
        RandomStream init(derive_seed(seed, stream, c));
        SpinConfiguration start = sample_frozen_uniform(system.sites(), system.slices(), init);
        chains[c] = make_chain_state(system, std::move(start), init.next());
        run(chains[c], system, burnIn);
    });
    return chains;
}

// ---------------------------------------------------------------------------
// Telescoping ratio

struct RatioEstimate {
    double logRatio = 0.0;      // ln(Z_hi / Z_lo)
    double ratio = 1.0;
    double meanM = 1.0;
    double logBound = 0.0;      // c in M = e^{-c} w_lo / w_hi
    std::size_t samples = 0;
    std::size_t boundViolations = 0;
    double maxM = 0.0;
    double varianceM = 0.0;
    double standardError = 0.0; // batch-means standard error of meanM
    double lag1 = 0.0;          // worst chain lag-1 autocorrelation of M
};

/// Estimates Z_hi / Z_lo from chains equilibrated at the higher beta, using
/// M(z) = e^{-c} w_lo(z) / w_hi(z) with E_hi[M] = e^{-c} Z_lo / Z_hi.
/// The support of w_lo is contained in that of w_hi, and c >= sup ln(w_lo/w_hi)
/// keeps every M in [0, 1].
inline RatioEstimate estimate_ratio(const TrotterizedSystem& lo, const TrotterizedSystem& hi, std::span<ChainState> chains,
                                    std::size_t samples, double logBound, const SamplingOptions& options = {}) {
    if (lo.sites() != hi.sites() || lo.slices() != hi.slices())
        throw Error(ErrorKind::DimensionMismatch, "ratio systems differ in shape");
    if (lo.beta() > hi.beta()) throw Error(ErrorKind::InvalidArgument, "ratio systems must satisfy beta_lo <= beta_hi");
    RatioEstimate out;
    out.logBound = logBound;
    if (lo.beta() == hi.beta()) return out;
    if (samples == 0) throw Error(ErrorKind::InvalidArgument, "ratio estimation needs at least one sample");
    std::vector<std::size_t> violations(chains.size(), 0);
    const auto parts = sample_chains(hi, chains, samples, options, [&](ChainState& s) {
        // Refresh the cached weight so incremental round-off cannot drift.
        s.logWeight = hi.log_weight(s.config);
        if (s.logWeight == kNegInf) throw Error(ErrorKind::NonOverlappingSupport, "chain occupies a zero-weight state");
        const double lm = lo.log_weight(s.config) - s.logWeight - logBound;
        const double m = lm == kNegInf ? 0.0 : std::exp(lm);
        if (m > 1.0 + 1e-12) ++violations[static_cast<std::size_t>(&s - chains.data())];
        return m;
    });
    double sum = 0.0, sumSquares = 0.0;
    for (const auto& p : parts) {
        sum += p.sum;
        sumSquares += p.sumSquares;
        out.samples += p.count;
        out.maxM = std::max(out.maxM, p.maxValue);
        out.lag1 = std::max(out.lag1, p.lag1);
    }
    out.meanM = sum / out.samples;
    out.varianceM = std::max(0.0, sumSquares / out.samples - out.meanM * out.meanM);
    out.standardError = combine(parts).standardError;
    for (std::size_t v : violations) out.boundViolations += v;
    if (out.meanM <= 0.0)
        throw Error(ErrorKind::NonOverlappingSupport, "no sample has positive weight at the lower temperature");
    out.logRatio = -(logBound + std::log(out.meanM));
    out.ratio = std::exp(out.logRatio);
    return out;
}

// ---------------------------------------------------------------------------
// Partition function

/// How many samples each ratio gets.
///  - hoeffding: variance-free count per ratio (tolerance r = eta / (2k),
///    failure deltaFail / k) with an a-priori lower bound on E[M].
///  - bernstein: same per-ratio targets; Bernstein's count on the batch-means
///    variance of a pilot run, which absorbs autocorrelation.
///  - composite: one Bernstein bound on the sum of the k relative deviations
///    (total eta / 2, failure deltaFail), the variance split evenly over steps.
/// The data-driven counts are capped by the Hoeffding count.
enum class SampleRule { composite, bernstein, hoeffding };

inline std::string to_string(SampleRule rule) {
    switch (rule) {
    case SampleRule::composite: return "composite";
    case SampleRule::bernstein: return "bernstein";
    default: return "hoeffding";
    }
}

inline SampleRule parse_sample_rule(const std::string& name) {
    if (name == "composite") return SampleRule::composite;
    if (name == "bernstein") return SampleRule::bernstein;
    if (name == "hoeffding") return SampleRule::hoeffding;
    throw Error(ErrorKind::InvalidArgument, "unknown sample rule '" + name + "'");
}

struct EstimateResources {
    SampleRule sampleRule = SampleRule::composite;
    std::size_t pilotSamples = 20000;
    std::size_t minSamples = 1000;
    std::uint64_t seed = 0;
    std::size_t chains = 16;
    unsigned threads = 1;
    std::optional<int> slices;
    std::optional<std::uint64_t> burnIn;
    std::optional<std::uint64_t> thinning;
    std::optional<std::size_t> samplesPerStep;
    SliceOptions sliceOptions;
    double maxTotalSteps = 2e11;
};

struct EstimateStep {
    double betaLow = 0.0;
    double betaHigh = 0.0;
    double logRatio = 0.0;
    double logBound = 0.0;
    double tolerance = 0.0; // allowed deviation of the mean of M
    double meanM = 0.0;
    double standardError = 0.0;
    std::size_t pilotSamples = 0;
    double maxM = 0.0;
    std::size_t samples = 0;
    std::size_t boundViolations = 0;
    double lag1 = 0.0;
    std::uint64_t burnIn = 0; // steps per chain before the pilot
};

struct EstimateDiagnostics {
    std::size_t boundViolations = 0;
    double maxM = 0.0;
    double acceptanceRate = 0.0;
    std::uint64_t totalSteps = 0;
    double fictitiousField = 0.0;
    double fictitiousLogBound = 0.0;
    double trotterTolerance = 0.0;
    double samplingTolerance = 0.0; // total ln-error share of the ratios
    double maxLag1 = 0.0;
    std::vector<std::string> warnings;
};

struct EstimateReport {
    double value = 0.0;
    double logValue = 0.0;
    double deltaMult = 0.0;
    double deltaAdd = 0.0;
    double deltaFail = 0.0;
    std::string family;
    std::string sampleRule;
    int sites = 0;
    double beta = 0.0;
    int slices = 0;
    int scheduleLength = 0;
    std::vector<double> betas;
    std::vector<std::size_t> samplesPerStep;
    std::uint64_t burnIn = 0;
    std::uint64_t stepsBetweenSamples = 0;
    std::uint64_t masterSeed = 0;
    std::vector<std::uint64_t> seeds; // per-chain stream seeds
    std::vector<EstimateStep> steps;
    EstimateDiagnostics diagnostics;
};

/// True when every single-site flip changes the adjacent layer factors by a
/// positive amount, whatever the neighbouring spins are.
inline bool single_flips_connect(const TrotterizedSystem& system) {
    for (int parity = 0; parity < 2; ++parity)
        for (const auto& f : system.layer(parity)) {
            const int d = f.dim();
            for (int k = 0; k < f.arity; ++k) {
                const int mask = f.arity == 1 ? 1 : (k == 0 ? 2 : 1);
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c)
                        if ((r ^ c) == mask && f.logElement[r * d + c] == kNegInf) return false;
            }
        }
    return true;
}

/// ln(1 + deltaMult): the total log-error budget.
inline double log_error_budget(double deltaMult) { return std::log1p(deltaMult); }

/// Estimate of Z_beta with |Z~ - Z| <= deltaMult Z with probability
/// >= 1 - deltaFail (the additive target is recorded, the guarantee is
/// multiplicative). Budget: a quarter of ln(1 + deltaMult) each to the Trotter
/// error and the fictitious field, half to the k sampled ratios.
inline EstimateReport estimate_partition_function(Model model, double beta, double deltaMult, double deltaAdd,
                                                  double deltaFail, const EstimateResources& resources = {}) {
    validate(model);
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be finite and >= 0");
    if (!(deltaMult > 0.0) || deltaMult >= 1.0) throw Error(ErrorKind::InvalidDelta, "deltaMult must lie in (0, 1)");
    if (!(deltaFail > 0.0) || deltaFail >= 1.0) throw Error(ErrorKind::InvalidDelta, "deltaFail must lie in (0, 1)");
    if (!(deltaAdd >= 0.0)) throw Error(ErrorKind::InvalidDelta, "deltaAdd must be >= 0");
    if (resources.chains == 0) throw Error(ErrorKind::InvalidArgument, "at least one chain is required");

    const int n = site_count(model);
    EstimateReport report;
    report.deltaMult = deltaMult;
    report.deltaAdd = deltaAdd;
    report.deltaFail = deltaFail;
    report.family = family_name(model);
    report.sites = n;
    report.beta = beta;
    report.masterSeed = resources.seed;
    report.sampleRule = to_string(resources.sampleRule);
    for (std::size_t c = 0; c < resources.chains; ++c) report.seeds.push_back(derive_seed(resources.seed, 0, c));

    if (beta == 0.0) {
        report.logValue = n * std::log(2.0);
        report.value = std::ldexp(1.0, n);
        report.scheduleLength = 1;
        report.betas = {0.0, 0.0};
        report.slices = resources.slices.value_or(2);
        return report;
    }

    const double eta = log_error_budget(deltaMult);
    auto& diag = report.diagnostics;
    if (auto* general = std::get_if<GeneralChainModel>(&model)) {
        *general = add_fictitious_field(*general, eta / (4.0 * beta));
        diag.fictitiousField = general->fictitiousField;
        diag.fictitiousLogBound = fictitious_log_z_bound(*general, beta);
    }
    diag.trotterTolerance = std::min(eta / 4.0, 1.0 / 21.0);
    const int L = resources.slices ? *resources.slices : choose_trotter_slices(model, beta, diag.trotterTolerance, resources.sliceOptions);
    report.slices = L;
    if (resources.slices) diag.warnings.push_back("slice count set explicitly; Trotter tolerance not enforced");

    const TrotterizedSystem target(model, beta, L);
    if (!single_flips_connect(target))
        throw Error(ErrorKind::NonErgodic, "some single-site flips carry zero weight; the chain cannot move between worldlines");
    const double nb = norm_upper_bound(model);
    const TemperatureSchedule schedule = build_schedule(beta, nb, target.diagonal_energy_bound());
    const int k = schedule.steps();
    report.scheduleLength = k;
    report.betas = schedule.betas;

    const double perRatio = eta / (2.0 * k);
    const double stepFail = deltaFail / k;
    diag.samplingTolerance = eta / 2.0;
    const double stepWidth = schedule.step_width();
    // E[M] >= e^{-c - dbeta * nb}; a deviation eps = E[M](1 - e^{-r}) keeps the
    // log-ratio error within r.
    const double meanLower = std::exp(-schedule.perStepLogRatioBound - stepWidth * nb);
    const double hoeffdingEps = meanLower * -std::expm1(-perRatio);
    const std::size_t hoeffdingCount = hoeffding_samples(hoeffdingEps, stepFail);
    if (resources.samplesPerStep) diag.warnings.push_back("samples per step set explicitly; sampling tolerance not enforced");
    const bool adaptive = !resources.samplesPerStep && resources.sampleRule != SampleRule::hoeffding;
    // Composite rule: Bernstein on the sum needs sqrt(2 V ln(2/deltaFail)) plus
    // (2/3) b ln(2/deltaFail) below the total; 90% of it goes to the variance.
    const double totalDeviation = -std::expm1(-eta / 2.0);
    const double logTwoOverFail = std::log(2.0 / deltaFail);
    const double varianceTarget = std::pow(0.9 * totalDeviation, 2) / (2.0 * logTwoOverFail);

    const SamplingOptions sampling{resources.thinning.value_or(static_cast<std::uint64_t>(n) * L), resources.threads};
    report.stepsBetweenSamples = sampling.thinning;
    std::vector<std::uint64_t> burnIns(k + 1, 0);
    for (int i = 1; i <= k; ++i)
        burnIns[i] = resources.burnIn ? *resources.burnIn : relaxation_burn_in(TrotterizedSystem(model, schedule.betas[i], L));
    report.burnIn = *std::max_element(burnIns.begin(), burnIns.end());
    double plannedBurnIn = 0.0;
    for (int i = 1; i <= k; ++i) plannedBurnIn += static_cast<double>(burnIns[i]) * resources.chains;

    const std::size_t plannedSamples =
        resources.samplesPerStep ? *resources.samplesPerStep : (adaptive ? resources.pilotSamples : hoeffdingCount);
    const double plannedSteps =
        plannedBurnIn + static_cast<double>(k) * static_cast<double>(plannedSamples) * static_cast<double>(sampling.thinning);
    if (plannedSteps > resources.maxTotalSteps)
        throw Error(ErrorKind::BudgetExceeded, "planned " + std::to_string(plannedSteps) + " chain steps exceed the cap of " +
                                                   std::to_string(resources.maxTotalSteps));
    double spentSteps = 0.0;

    std::vector<ChainState> chains;
    double logZ = n * std::log(2.0);
    std::uint64_t proposals = 0, accepted = 0;
    for (int i = 1; i <= k; ++i) {
        const TrotterizedSystem lo(model, schedule.betas[i - 1], L);
        const TrotterizedSystem hi(model, schedule.betas[i], L);
        if (chains.empty()) {
            chains = prepare_chains(hi, resources.chains, resources.seed, burnIns[i], resources.threads);
        } else {
            parallel_for(chains.size(), resources.threads, [&](std::size_t c) {
                rebind(chains[c], hi);
                run(chains[c], hi, burnIns[i]);
            });
        }
        std::size_t samples = resources.samplesPerStep ? *resources.samplesPerStep : hoeffdingCount;
        double eps = hoeffdingEps;
        std::size_t pilotCount = 0;
        if (adaptive) {
            const RatioEstimate pilot =
                estimate_ratio(lo, hi, chains, resources.pilotSamples, schedule.perStepLogRatioBound, sampling);
            pilotCount = pilot.samples;
            const double asymptoticVariance = pilot.standardError * pilot.standardError * pilot.samples;
            const double mu = std::max(meanLower, pilot.meanM - 3.0 * pilot.standardError);
            eps = mu * -std::expm1(-perRatio);
            std::size_t wanted;
            if (resources.sampleRule == SampleRule::bernstein) {
                wanted = bernstein_samples(asymptoticVariance, eps, stepFail);
            } else {
                const double relative = asymptoticVariance / (mu * mu);
                const double byVariance = std::ceil(k * relative / varianceTarget);
                const double byRange = std::ceil(20.0 / 3.0 * logTwoOverFail / (totalDeviation * mu));
                wanted = static_cast<std::size_t>(std::max(byVariance, byRange));
                eps = mu * std::sqrt(varianceTarget / k);
            }
            samples = std::min(hoeffding_samples(mu * -std::expm1(-perRatio), stepFail),
                               std::max(resources.minSamples, wanted));
            diag.boundViolations += pilot.boundViolations;
        }
        spentSteps += static_cast<double>(samples + pilotCount) * static_cast<double>(sampling.thinning) +
                      static_cast<double>(burnIns[i]) * resources.chains;
        if (spentSteps > resources.maxTotalSteps)
            throw Error(ErrorKind::BudgetExceeded, "chain steps exceed the cap of " + std::to_string(resources.maxTotalSteps));
        const RatioEstimate r = estimate_ratio(lo, hi, chains, samples, schedule.perStepLogRatioBound, sampling);
        EstimateStep step;
        step.betaLow = schedule.betas[i - 1];
        step.betaHigh = schedule.betas[i];
        step.logRatio = r.logRatio;
        step.logBound = r.logBound;
        step.tolerance = eps;
        step.meanM = r.meanM;
        step.standardError = r.standardError;
        step.pilotSamples = pilotCount;
        step.maxM = r.maxM;
        step.samples = r.samples;
        step.boundViolations = r.boundViolations;
        step.lag1 = r.lag1;
        step.burnIn = burnIns[i];
        report.steps.push_back(step);
        const double plannedSpread = resources.sampleRule == SampleRule::composite
                                         ? r.standardError
                                         : std::sqrt(2.0 * std::log(2.0 / stepFail)) * r.standardError;
        if (adaptive && plannedSpread > 1.5 * eps)
            diag.warnings.push_back("step " + std::to_string(i) + ": observed spread exceeds the pilot-based plan");
        report.samplesPerStep.push_back(r.samples);
        logZ += r.logRatio;
        diag.boundViolations += r.boundViolations;
        diag.maxM = std::max(diag.maxM, r.maxM);
        diag.maxLag1 = std::max(diag.maxLag1, r.lag1);
    }
    for (const auto& c : chains) {
        proposals += c.proposals;
        accepted += c.accepted;
        diag.totalSteps += c.steps;
    }
    diag.acceptanceRate = proposals ? static_cast<double>(accepted) / proposals : 0.0;
    if (!adaptive && diag.maxLag1 > 0.5)
        diag.warnings.push_back("retained samples are strongly autocorrelated (lag-1 " + std::to_string(diag.maxLag1) +
                                "); consider larger thinning or burn-in");
    if (diag.boundViolations > 0) diag.warnings.push_back("ratio bound violated; estimate is unreliable");
    report.logValue = logZ;
    report.value = std::exp(logZ);
    return report;
}

// ---------------------------------------------------------------------------
// Observables

using DiagonalFunction = std::function<double(std::span<const std::int8_t>)>;

/// Mean of O over the even slices of pi-samples; each even slice has the
/// marginal of the first one.
inline ObservableEstimate estimate_diagonal_observable(const TrotterizedSystem& system, const DiagonalFunction& observable,
                                                       std::span<ChainState> chains, std::size_t samples,
                                                       const SamplingOptions& options = {}) {
    const int L = system.slices();
    const auto parts = sample_chains(system, chains, samples, options, [&](const ChainState& s) {
        double total = 0.0;
        for (int i = 0; i < L; i += 2) total += observable(s.config.slice(i));
        return total / (L / 2);
    });
    return combine(parts);
}

/// <z_i| O e^{G_p} |z_{i+1}> / <z_i| e^{G_p} |z_{i+1}> for slice i and layer p = i % 2.
inline double offdiagonal_local_estimate(const TrotterizedSystem& system, const SparseOperator& observable,
                                         const SpinConfiguration& z, int i) {
    const int L = system.slices();
    const auto from = z.slice(i);
    const auto to = z.slice((i + 1) % L);
    const int layer = i % 2;
    const double base = system.log_bond_element(layer, from, to);
    if (base == kNegInf) throw Error(ErrorKind::ZeroDenominator, "zero bond element on a sampled configuration");
    double total = 0.0;
    observable.visit_row(from, [&](std::span<const std::int8_t> y, double value) {
        const double lb = system.log_bond_element(layer, y, to);
        if (lb != kNegInf) total += value * std::exp(lb - base);
    });
    return total;
}

/// Mean of (r_0 + r_1) / 2 where r_i is the local estimate at slice i.
inline ObservableEstimate estimate_offdiagonal_observable(const TrotterizedSystem& system, const SparseOperator& observable,
                                                          std::span<ChainState> chains, std::size_t samples,
                                                          const SamplingOptions& options = {}) {
    if (observable.sites() != system.sites()) throw Error(ErrorKind::DimensionMismatch, "observable and system differ in n");
    const auto parts = sample_chains(system, chains, samples, options, [&](const ChainState& s) {
        return 0.5 * (offdiagonal_local_estimate(system, observable, s.config, 0) +
                      offdiagonal_local_estimate(system, observable, s.config, 1));
    });
    return combine(parts);
}

/// zeta = sqrt(3 delta) / ||O||.
inline double zeta_for_delta(double delta, double normO) {
    if (!(delta > 0.0) || delta > 1.0 / 21.0) throw Error(ErrorKind::InvalidDelta, "delta must lie in (0, 1/21]");
    if (!(normO > 0.0)) throw Error(ErrorKind::InvalidArgument, "observable norm must be > 0");
    return std::sqrt(3.0 * delta) / normO;
}

namespace detail {
inline void check_zeta(double zeta, double normO) {
    if (!(zeta > 0.0) || !(normO > 0.0)) throw Error(ErrorKind::InvalidArgument, "zeta and norm must be > 0");
    const double delta = zeta * zeta * normO * normO / 3.0;
    if (delta > (1.0 / 21.0) * (1.0 + 1e-12)) throw Error(ErrorKind::InvalidDelta, "implied delta exceeds 1/21");
}
} // namespace detail

/// (Z(zeta) - Z(0)) / (zeta Z(0)) with Z(zeta) = tr exp(-beta H + zeta O).
inline double finite_difference_observable(double zHat0, double zHatZeta, double zeta, double normO) {
    detail::check_zeta(zeta, normO);
    if (!(zHat0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "partition estimate must be > 0");
    return (zHatZeta - zHat0) / (zeta * zHat0);
}

/// Same from log-partition values.
inline double finite_difference_observable_log(double logZ0, double logZZeta, double zeta, double normO) {
    detail::check_zeta(zeta, normO);
    return std::expm1(logZZeta - logZ0) / zeta;
}

} // namespace stoqpimc
