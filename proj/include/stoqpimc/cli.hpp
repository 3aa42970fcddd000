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

// Subcommands behind the stoqpimc executable. Each takes a RunConfig, writes
// its document to `out`, diagnostics to `err`, and returns the exit code:
//   0 success, 1 unexpected failure, 2 invalid input (model, flags, files,
//   size caps), 3 budget exhausted, 4 estimate outside its stated tolerance.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stoqpimc/diagnostics.hpp"
#include "stoqpimc/estimators.hpp"
#include "stoqpimc/model_io.hpp"
#include "stoqpimc/operators.hpp"
#include "stoqpimc/oracle.hpp"
#include "stoqpimc/parallel.hpp"
#include "stoqpimc/report_json.hpp"
#include "stoqpimc/slices.hpp"

namespace stoqpimc::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalid = 2, kBudget = 3, kToleranceMiss = 4 };

struct RunConfig {
    std::string subcommand;
    std::string modelPath;
    double beta = 1.0;
    double deltaMult = 0.1;
    double deltaAdd = 0.0;
    double deltaFail = 0.05;
    std::uint64_t seed = 0;
    std::optional<int> slices;
    std::size_t chains = 16;
    std::optional<std::uint64_t> burnIn;
    double maxSteps = 2e11;
    std::string outPath; // empty: the caller's stream
    std::string format;  // json | csv; empty picks the subcommand default
    SampleRule sampleRule = SampleRule::composite;
    unsigned threads = default_worker_count();

    // estimate-observable
    std::string observable;     // identity | sigma-z j | sigma-x j | zz j k | energy
    std::string observableFile; // sparse rows: "row col value" per line
    std::string method = "direct";
    double shift = 0.0;     // finite difference estimates <O + shift I> - shift
    double fdDelta = 1e-3;  // zeta = sqrt(3 delta) / ||O + shift I||
    std::size_t samples = 100000;

    // diagnose
    double epsilon = 0.25;
    std::size_t records = 20000;
    double concentrationC = 4.0;

    // sample
    std::uint64_t thinning = 0; // 0: n * L
    bool hex = false;
};

inline int exit_code_for(const Error& e) { return e.kind() == ErrorKind::BudgetExceeded ? kBudget : kInvalid; }

namespace detail {

inline void validate_config(const RunConfig& c) {
    if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw Error(ErrorKind::InvalidArgument, "--beta must be finite and >= 0");
    if (!(c.deltaMult > 0.0) || c.deltaMult >= 1.0) throw Error(ErrorKind::InvalidDelta, "--delta-mult must lie in (0, 1)");
    if (!(c.deltaFail > 0.0) || c.deltaFail >= 1.0) throw Error(ErrorKind::InvalidDelta, "--delta-fail must lie in (0, 1)");
    if (!(c.deltaAdd >= 0.0) || c.deltaAdd >= 1.0) throw Error(ErrorKind::InvalidDelta, "--delta-add must lie in [0, 1)");
    if (c.chains == 0) throw Error(ErrorKind::InvalidArgument, "--chains must be >= 1");
    if (c.slices && (*c.slices < 2 || *c.slices % 2 != 0))
        throw Error(ErrorKind::InvalidArgument, "--slices must be even and >= 2");
    if (c.modelPath.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
}

inline std::string format_or(const RunConfig& c, const char* fallback) {
    const std::string f = c.format.empty() ? fallback : c.format;
    if (f != "json" && f != "csv") throw Error(ErrorKind::InvalidArgument, "--format must be json or csv");
    return f;
}

/// Writes `text` to the configured file, or to `out` when none is set.
inline void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
    if (c.outPath.empty()) {
        out << text;
        return;
    }
    std::ofstream file(c.outPath);
    if (!file) throw Error(ErrorKind::InvalidArgument, "cannot write '" + c.outPath + "'");
    file << text;
}

inline EstimateResources resources_from(const RunConfig& c) {
    EstimateResources r;
    r.seed = c.seed;
    r.chains = c.chains;
    r.threads = c.threads;
    r.slices = c.slices;
    r.burnIn = c.burnIn;
    r.sampleRule = c.sampleRule;
    r.maxTotalSteps = c.maxSteps;
    return r;
}

/// Model ready for sampling at beta: general models get the same fictitious
/// field the partition estimator uses.
inline Model sampling_model(Model model, double beta, double deltaMult) {
    if (auto* g = std::get_if<GeneralChainModel>(&model); g && beta > 0.0)
        *g = add_fictitious_field(*g, log_error_budget(deltaMult) / (4.0 * beta));
    return model;
}

inline int slices_for(const RunConfig& c, const Model& model) {
    if (c.slices) return *c.slices;
    if (c.beta == 0.0) return 2;
    return choose_trotter_slices(model, c.beta, std::min(log_error_budget(c.deltaMult) / 4.0, 1.0 / 21.0));
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& cell : cells) {
        if (!s.empty()) s += ',';
        s += cell;
    }
    return s + "\n";
}

// Observable specs --------------------------------------------------------

struct ObservableSpec {
    std::string name;
    SparseOperator op;
    std::optional<DiagonalFunction> diagonal; // set for diagonal observables
    std::optional<double> norm;               // spectral norm when known
    std::vector<int> sites;                   // 0-based
};

inline int site_arg(const std::string& token, int n) {
    const int s = stoqpimc::detail::parse_int(token, "observable site");
    if (s < 1 || s > n) throw Error(ErrorKind::InvalidArgument, "observable site " + token + " outside 1.." + std::to_string(n));
    return s - 1;
}

inline ObservableSpec builtin_observable(const std::string& spec, const Model& model) {
    const int n = site_count(model);
    std::istringstream in(spec);
    std::vector<std::string> t;
    for (std::string w; in >> w;) t.push_back(w);
    if (t.empty()) throw Error(ErrorKind::InvalidArgument, "empty --observable");
    ObservableSpec o;
    o.name = spec;
    if (t[0] == "identity" && t.size() == 1) {
        o.op = identity_operator(n);
        o.diagonal = [](std::span<const std::int8_t>) { return 1.0; };
        o.norm = 1.0;
    } else if (t[0] == "sigma-z" && t.size() == 2) {
        const int j = site_arg(t[1], n);
        o.op = pauli_operator(n, {PauliString{1.0, {{j, 'Z'}}}});
        o.diagonal = [j](std::span<const std::int8_t> z) { return static_cast<double>(z[j]); };
        o.norm = 1.0;
        o.sites = {j};
    } else if (t[0] == "sigma-x" && t.size() == 2) {
        const int j = site_arg(t[1], n);
        o.op = pauli_operator(n, {PauliString{1.0, {{j, 'X'}}}});
        o.norm = 1.0;
        o.sites = {j};
    } else if ((t[0] == "zz" || t[0] == "zz-correlator") && t.size() == 3) {
        const int j = site_arg(t[1], n), k = site_arg(t[2], n);
        if (j == k) throw Error(ErrorKind::InvalidArgument, "zz needs two distinct sites");
        o.op = pauli_operator(n, {PauliString{1.0, {{j, 'Z'}, {k, 'Z'}}}});
        o.diagonal = [j, k](std::span<const std::int8_t> z) { return static_cast<double>(z[j] * z[k]); };
        o.norm = 1.0;
        o.sites = {j, k};
    } else if (t[0] == "energy" && t.size() == 1) {
        o.op = local_operator(to_local(model));
        o.norm = norm_upper_bound(model);
    } else {
        throw Error(ErrorKind::InvalidArgument,
                    "unknown observable '" + spec + "' (identity, sigma-z j, sigma-x j, zz j k, energy)");
    }
    return o;
}

/// Sparse rows file: "row col value" per line, '#' starts a comment. Row and
/// column indices are basis states with site s in bit n - 1 - s.
inline ObservableSpec file_observable(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open observable file '" + path + "'");
    std::map<std::pair<std::uint64_t, std::uint64_t>, double> entries;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto v = stoqpimc::detail::parse_numbers(line, path + ":" + std::to_string(lineNo));
        if (v.empty()) continue;
        if (v.size() != 3 || v[0] < 0 || v[1] < 0 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(lineNo) + ": expected 'row col value'");
        entries[{static_cast<std::uint64_t>(v[0]), static_cast<std::uint64_t>(v[1])}] += v[2];
    }
    ObservableSpec o;
    o.name = path;
    o.op = sparse_rows_operator(n, entries);
    return o;
}

/// H - c O for a single-site Pauli O, kept within the model's family.
inline Model shifted_model(Model model, const ObservableSpec& o, char letter, double c) {
    const int j = o.sites.front();
    if (auto* m = std::get_if<TransverseIsingModel>(&model)) {
        if (letter == 'X') m->gamma[j] += c;
        else m->kz[j] -= c;
    } else if (auto* m = std::get_if<XYChainModel>(&model)) {
        if (letter == 'X') m->gamma[j] += c;
        else m->kz[j] -= c;
    } else {
        auto& g = std::get<GeneralChainModel>(model);
        const int bonds = static_cast<int>(g.terms.size());
        if (bonds == 0) throw Error(ErrorKind::InvalidArgument, "general model has no blocks to carry the observable");
        const bool first = j < bonds;
        const int b = first ? j : j - 1;
        const Mat2 p = letter == 'X' ? pauli::x() : pauli::z();
        g.terms[b] -= c * (first ? pauli::kron(p, pauli::identity()) : pauli::kron(pauli::identity(), p));
    }
    validate(model);
    return model;
}

} // namespace detail

// Commands -------------------------------------------------------------------

inline int cmd_estimate_z(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::validate_config(c);
    const Model model = load_model(c.modelPath);
    const EstimateReport r =
        estimate_partition_function(model, c.beta, c.deltaMult, c.deltaAdd, c.deltaFail, detail::resources_from(c));
    for (const auto& w : r.diagnostics.warnings) err << "warning: " << w << "\n";
    if (detail::format_or(c, "json") == "json") {
        detail::emit(c, out, to_json(r).dump(2) + "\n");
    } else {
        std::string s = detail::csv_row({"step", "betaLow", "betaHigh", "logRatio", "meanM", "standardError", "samples",
                                         "boundViolations"});
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            const auto& st = r.steps[i];
            s += detail::csv_row({std::to_string(i + 1), real_string(st.betaLow), real_string(st.betaHigh),
                                  real_string(st.logRatio), real_string(st.meanM), real_string(st.standardError),
                                  std::to_string(st.samples), std::to_string(st.boundViolations)});
        }
        s += detail::csv_row({"total", "0", real_string(r.beta), real_string(r.logValue), real_string(r.value), "", "",
                              std::to_string(r.diagnostics.boundViolations)});
        detail::emit(c, out, s);
    }
    return kOk;
}

inline int cmd_estimate_observable(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::validate_config(c);
    const Model model = load_model(c.modelPath);
    const int n = site_count(model);
    if (c.observable.empty() == c.observableFile.empty())
        throw Error(ErrorKind::InvalidArgument, "give exactly one of --observable or --observable-file");
    const detail::ObservableSpec o =
        c.observableFile.empty() ? detail::builtin_observable(c.observable, model) : detail::file_observable(c.observableFile, n);

    Json j = document("estimate-observable");
    j["observable"] = o.name;
    j["method"] = c.method;
    j["beta"] = real_string(c.beta);
    j["masterSeed"] = c.seed;
    double mean = 0.0, standardError = 0.0;

    if (c.method == "direct") {
        const Model target = detail::sampling_model(model, c.beta, c.deltaMult);
        const int L = detail::slices_for(c, target);
        const TrotterizedSystem system(target, c.beta, L);
        const std::uint64_t burnIn = c.burnIn.value_or(relaxation_burn_in(system));
        auto chains = prepare_chains(system, c.chains, c.seed, burnIn, c.threads, 2);
        const SamplingOptions options{0, c.threads};
        const ObservableEstimate e = o.diagonal ? estimate_diagonal_observable(system, *o.diagonal, chains, c.samples, options)
                                                : estimate_offdiagonal_observable(system, o.op, chains, c.samples, options);
        mean = e.mean;
        standardError = e.standardError;
        j["slices"] = L;
        j["chains"] = c.chains;
        j["burnIn"] = burnIn;
        j["samples"] = e.samples;
    } else if (c.method == "finite-difference") {
        if (!o.norm || o.sites.size() > 1 || !c.observableFile.empty() || c.observable == "energy")
            throw Error(ErrorKind::InvalidArgument, "finite difference supports identity, sigma-x j and sigma-z j");
        // Pauli spectra are {-1, 1}: O + shift I is PSD iff shift >= 1; the identity needs shift >= -1.
        const bool identity = o.sites.empty();
        if (c.shift < (identity ? -1.0 : 1.0))
            throw Error(ErrorKind::InvalidArgument, "observable + shift * I is not positive semidefinite; use --shift >= " +
                                                        std::string(identity ? "-1" : "1"));
        const double norm = *o.norm + c.shift;
        if (!(norm > 0.0)) throw Error(ErrorKind::InvalidArgument, "shifted observable is zero");
        if (!(c.beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite difference needs beta > 0");
        const double zeta = zeta_for_delta(c.fdDelta, norm);
        EstimateResources r = detail::resources_from(c);
        const EstimateReport base = estimate_partition_function(model, c.beta, c.deltaMult, c.deltaAdd, c.deltaFail / 2.0, r);
        double logShifted;
        if (identity) {
            logShifted = base.logValue + zeta * norm;
        } else {
            // exp(-beta H + zeta (O + s I)) = e^{zeta s} exp(-beta (H - (zeta / beta) O)).
            const char letter = c.observable.rfind("sigma-x", 0) == 0 ? 'X' : 'Z';
            r.seed = derive_seed(c.seed, 1);
            const Model perturbed = detail::shifted_model(model, o, letter, zeta / c.beta);
            const EstimateReport shifted =
                estimate_partition_function(perturbed, c.beta, c.deltaMult, c.deltaAdd, c.deltaFail / 2.0, r);
            logShifted = shifted.logValue + zeta * c.shift;
            j["logZShifted"] = real_string(shifted.logValue);
        }
        mean = finite_difference_observable_log(base.logValue, logShifted, zeta, norm) - c.shift;
        const double statistical = ((1.0 + c.deltaMult) / (1.0 - c.deltaMult) - 1.0) / zeta;
        standardError = std::numeric_limits<double>::quiet_NaN();
        j["zeta"] = real_string(zeta);
        j["fdDelta"] = real_string(c.fdDelta);
        j["shift"] = real_string(c.shift);
        j["logZ"] = real_string(base.logValue);
        j["biasBound"] = real_string(2.0 * std::sqrt(c.fdDelta) * norm);
        j["estimationErrorBound"] = real_string(statistical);
    } else {
        throw Error(ErrorKind::InvalidArgument, "--method must be direct or finite-difference");
    }
    j["mean"] = real_string(mean);
    j["standardError"] = real_string(standardError);
    j["ci95"] = real_string(1.96 * standardError);
    if (detail::format_or(c, "json") == "json") {
        detail::emit(c, out, j.dump(2) + "\n");
    } else {
        detail::emit(c, out, detail::csv_row({"observable", "method", "mean", "standardError"}) +
                                 detail::csv_row({o.name, c.method, real_string(mean), real_string(standardError)}));
    }
    (void)err;
    return kOk;
}

/// Result of oracle-compare, also used in-process by the acceptance suite.
struct OracleComparison {
    double exactLogZ = 0.0;
    double trotterLogZ = 0.0;
    double estimateLogZ = 0.0;
    int slices = 0;
    double relativeErrorEstimate = 0.0; // (Z~ - Z) / Z
    double relativeErrorTrotter = 0.0;  // (Z_L - Z) / Z
    double relativeErrorVsTrotter = 0.0;
    bool withinTolerance = false;
    EstimateReport report;
};

inline OracleComparison oracle_compare(const Model& model, const RunConfig& c, const OracleLimits& limits = {}) {
    const int n = site_count(model);
    if (n > limits.maxDenseSites)
        throw Error(ErrorKind::TooLarge, "n = " + std::to_string(n) + " exceeds the oracle cap of " +
                                             std::to_string(limits.maxDenseSites) + " sites; use estimate-z instead");
    OracleComparison o;
    o.exactLogZ = exact_log_partition(model, c.beta, limits);
    o.report = estimate_partition_function(model, c.beta, c.deltaMult, c.deltaAdd, c.deltaFail, detail::resources_from(c));
    o.slices = o.report.slices;
    o.trotterLogZ = exact_trotter_log_partition(model, c.beta, o.slices, limits);
    o.estimateLogZ = o.report.logValue;
    o.relativeErrorEstimate = std::expm1(o.estimateLogZ - o.exactLogZ);
    o.relativeErrorTrotter = std::expm1(o.trotterLogZ - o.exactLogZ);
    o.relativeErrorVsTrotter = std::expm1(o.estimateLogZ - o.trotterLogZ);
    o.withinTolerance = std::abs(o.relativeErrorEstimate) <= c.deltaMult;
    return o;
}

inline int cmd_oracle_compare(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::validate_config(c);
    const Model model = load_model(c.modelPath);
    const OracleComparison o = oracle_compare(model, c);
    for (const auto& w : o.report.diagnostics.warnings) err << "warning: " << w << "\n";
    if (detail::format_or(c, "json") == "json") {
        Json j = document("oracle-compare");
        j["beta"] = real_string(c.beta);
        j["slices"] = o.slices;
        j["deltaMult"] = real_string(c.deltaMult);
        j["exactZ"] = real_string(std::exp(o.exactLogZ));
        j["trotterZ"] = real_string(std::exp(o.trotterLogZ));
        j["estimateZ"] = real_string(std::exp(o.estimateLogZ));
        j["exactLogZ"] = real_string(o.exactLogZ);
        j["trotterLogZ"] = real_string(o.trotterLogZ);
        j["estimateLogZ"] = real_string(o.estimateLogZ);
        j["relativeErrorEstimate"] = real_string(o.relativeErrorEstimate);
        j["relativeErrorTrotter"] = real_string(o.relativeErrorTrotter);
        j["relativeErrorEstimateVsTrotter"] = real_string(o.relativeErrorVsTrotter);
        j["withinTolerance"] = o.withinTolerance;
        j["estimate"] = to_json(o.report);
        detail::emit(c, out, j.dump(2) + "\n");
    } else {
        detail::emit(c, out,
                     detail::csv_row({"quantity", "exact", "trotter", "estimate"}) +
                         detail::csv_row({"logZ", real_string(o.exactLogZ), real_string(o.trotterLogZ),
                                          real_string(o.estimateLogZ)}) +
                         detail::csv_row({"relativeError", "0", real_string(o.relativeErrorTrotter),
                                          real_string(o.relativeErrorEstimate)}));
    }
    if (!o.withinTolerance) {
        err << "estimate misses its tolerance: relative error " << o.relativeErrorEstimate << " > " << c.deltaMult << "\n";
        return kToleranceMiss;
    }
    return kOk;
}

inline int cmd_diagnose(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::validate_config(c);
    if (!(c.epsilon > 0.0) || c.epsilon >= 1.0) throw Error(ErrorKind::InvalidArgument, "--epsilon must lie in (0, 1)");
    const Model model = detail::sampling_model(load_model(c.modelPath), c.beta, c.deltaMult);
    const int n = site_count(model);
    const int L = detail::slices_for(c, model);
    const TrotterizedSystem system(model, c.beta, L);
    const OracleLimits limits;

    Json j = document("diagnose");
    j["beta"] = real_string(c.beta);
    j["slices"] = L;
    j["sites"] = n;
    j["masterSeed"] = c.seed;
    std::optional<MixingReport> exact;
    const bool small = (std::uint64_t{1} << std::min(n * L, 63)) <= limits.maxTransitionStates && n * L <= limits.maxLatticeBits;
    if (small) {
        exact = empirical_mixing(system, c.epsilon, std::nullopt, {}, limits);
        j["mixing"] = to_json(*exact);
    } else {
        const std::uint64_t burnIn = c.burnIn.value_or(relaxation_burn_in(system));
        const HeuristicMixingReport h = heuristic_mixing(system, std::max<std::size_t>(c.chains, 2), derive_seed(c.seed, 3),
                                                         burnIn, c.records, 0, c.threads);
        j["mixing"] = to_json(h);
        err << "lattice too large for the exact kernel; mixing report is heuristic\n";
    }

    // Jump concentration from retained samples of the equilibrated chains.
    const std::uint64_t burnIn = c.burnIn.value_or(relaxation_burn_in(system));
    auto chains = prepare_chains(system, c.chains, c.seed, burnIn, c.threads, 4);
    const std::uint64_t thin = c.thinning > 0 ? c.thinning : static_cast<std::uint64_t>(n) * L;
    std::vector<std::vector<std::vector<int>>> perChain(chains.size());
    parallel_for(chains.size(), c.threads, [&](std::size_t k) {
        const std::size_t share = chain_share(c.records, chains.size(), k);
        for (std::size_t t = 0; t < share; ++t) {
            run(chains[k], system, thin);
            perChain[k].push_back(chains[k].jumps);
        }
    });
    std::vector<std::vector<int>> counts;
    for (auto& v : perChain) counts.insert(counts.end(), v.begin(), v.end());
    j["jumpConcentration"] = to_json(jump_concentration_report(counts, c.beta, n, c.concentrationC));

    if (detail::format_or(c, "json") == "json") {
        detail::emit(c, out, j.dump(2) + "\n");
    } else {
        std::string s = detail::csv_row({"t", "tv"});
        if (exact)
            for (const auto& [t, d] : exact->tvCurve) s += detail::csv_row({std::to_string(t), real_string(d)});
        detail::emit(c, out, s);
    }
    return kOk;
}

inline int cmd_sample(const RunConfig& c, std::ostream& out, std::ostream& err) {
    detail::validate_config(c);
    if (detail::format_or(c, "csv") != "csv") throw Error(ErrorKind::InvalidArgument, "sample writes csv only");
    const Model model = detail::sampling_model(load_model(c.modelPath), c.beta, c.deltaMult);
    const int n = site_count(model);
    const int L = detail::slices_for(c, model);
    const TrotterizedSystem system(model, c.beta, L);
    const std::uint64_t burnIn = c.burnIn.value_or(relaxation_burn_in(system));
    auto chains = prepare_chains(system, 1, c.seed, burnIn, 1, 5);
    ChainState& s = chains.front();
    const std::uint64_t thin = c.thinning > 0 ? c.thinning : static_cast<std::uint64_t>(n) * L;
    std::ostringstream csv;
    csv << "step,logWeight";
    for (int j = 1; j <= n; ++j) csv << ",d_" << j;
    if (c.hex) csv << ",config";
    csv << "\n";
    for (std::size_t t = 0; t < c.samples; ++t) {
        run(s, system, thin);
        csv << s.steps << "," << real_string(s.logWeight);
        for (int d : s.jumps) csv << "," << d;
        if (c.hex) csv << "," << s.config.to_hex();
        csv << "\n";
    }
    detail::emit(c, out, csv.str());
    (void)err;
    return kOk;
}

/// Dispatches on c.subcommand and maps library errors to exit codes.
inline int dispatch(const RunConfig& c, std::ostream& out, std::ostream& err) {
    try {
        if (c.subcommand == "estimate-z") return cmd_estimate_z(c, out, err);
        if (c.subcommand == "estimate-observable") return cmd_estimate_observable(c, out, err);
        if (c.subcommand == "oracle-compare") return cmd_oracle_compare(c, out, err);
        if (c.subcommand == "diagnose") return cmd_diagnose(c, out, err);
        if (c.subcommand == "sample") return cmd_sample(c, out, err);
        err << "error: unknown subcommand '" << c.subcommand << "'\n";
        return kInvalid;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

} // namespace stoqpimc::cli
