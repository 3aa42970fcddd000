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

// JSON documents for every report type. Reals are written as decimal strings
// with 17 significant digits so they round-trip exactly.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>

#include <nlohmann/json.hpp>

#include "stoqpimc/diagnostics.hpp"
#include "stoqpimc/estimators.hpp"

namespace stoqpimc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline std::string real_string(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Inverse of real_string.
inline double parse_real(const Json& j) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return kPosInf;
    if (s == "-inf") return kNegInf;
    return std::stod(s);
}

inline Json real_array(const std::vector<double>& values) {
    Json a = Json::array();
    for (double v : values) a.push_back(real_string(v));
    return a;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Common envelope: schemaVersion, kind, timestamp.
inline Json document(const std::string& kind) {
    Json j;
    j["schemaVersion"] = kSchemaVersion;
    j["kind"] = kind;
    j["timestamp"] = utc_timestamp();
    return j;
}

inline Json to_json(const EstimateStep& s) {
    Json j;
    j["betaLow"] = real_string(s.betaLow);
    j["betaHigh"] = real_string(s.betaHigh);
    j["logRatio"] = real_string(s.logRatio);
    j["logBound"] = real_string(s.logBound);
    j["tolerance"] = real_string(s.tolerance);
    j["meanM"] = real_string(s.meanM);
    j["standardError"] = real_string(s.standardError);
    j["maxM"] = real_string(s.maxM);
    j["lag1"] = real_string(s.lag1);
    j["burnIn"] = s.burnIn;
    j["pilotSamples"] = s.pilotSamples;
    j["samples"] = s.samples;
    j["boundViolations"] = s.boundViolations;
    return j;
}

inline Json to_json(const EstimateReport& r) {
    Json j = document("estimate-z");
    j["value"] = real_string(r.value);
    j["logValue"] = real_string(r.logValue);
    j["deltaMult"] = real_string(r.deltaMult);
    j["deltaAdd"] = real_string(r.deltaAdd);
    j["deltaFail"] = real_string(r.deltaFail);
    j["family"] = r.family;
    j["sampleRule"] = r.sampleRule;
    j["sites"] = r.sites;
    j["beta"] = real_string(r.beta);
    j["slices"] = r.slices;
    j["scheduleLength"] = r.scheduleLength;
    j["betas"] = real_array(r.betas);
    j["samplesPerStep"] = r.samplesPerStep;
    j["burnIn"] = r.burnIn;
    j["stepsBetweenSamples"] = r.stepsBetweenSamples;
    j["masterSeed"] = r.masterSeed;
    j["seeds"] = r.seeds;
    Json steps = Json::array();
    for (const auto& s : r.steps) steps.push_back(to_json(s));
    j["steps"] = steps;
    const auto& d = r.diagnostics;
    Json dj;
    dj["boundViolations"] = d.boundViolations;
    dj["maxM"] = real_string(d.maxM);
    dj["acceptanceRate"] = real_string(d.acceptanceRate);
    dj["totalSteps"] = d.totalSteps;
    dj["fictitiousField"] = real_string(d.fictitiousField);
    dj["fictitiousLogBound"] = real_string(d.fictitiousLogBound);
    dj["trotterTolerance"] = real_string(d.trotterTolerance);
    dj["samplingTolerance"] = real_string(d.samplingTolerance);
    dj["maxLag1"] = real_string(d.maxLag1);
    dj["warnings"] = d.warnings;
    j["diagnostics"] = dj;
    return j;
}

inline Json to_json(const MixingReport& r) {
    Json j;
    j["label"] = r.label;
    j["exact"] = r.exact;
    j["epsilon"] = real_string(r.epsilon);
    j["tauEmpirical"] = r.tauEpsilon;
    j["tauMix"] = r.tauMix;
    j["spectralGap"] = real_string(r.spectralGap);
    j["secondEigenvalue"] = real_string(r.secondEigenvalue);
    j["piMin"] = real_string(r.piMin);
    j["relaxationBound"] = real_string(r.relaxationBound);
    j["epsilonBound"] = r.epsilonBound;
    j["logEpsilonRatio"] = real_string(r.logEpsilonRatio);
    j["relaxationConsistent"] = r.relaxationConsistent;
    j["epsilonConsistent"] = r.epsilonConsistent;
    Json curve = Json::array();
    for (const auto& [t, d] : r.tvCurve) curve.push_back(Json::array({t, real_string(d)}));
    j["tvCurve"] = curve;
    return j;
}

inline Json to_json(const HeuristicMixingReport& r) {
    Json j;
    j["label"] = r.label;
    j["exact"] = false;
    j["chains"] = r.chains;
    j["stepsPerRecord"] = r.stepsPerRecord;
    j["records"] = r.records;
    j["integratedAutocorrelation"] = real_string(r.integratedAutocorrelation);
    j["gelmanRubin"] = real_string(r.gelmanRubin);
    j["acceptanceRate"] = real_string(r.acceptanceRate);
    return j;
}

inline Json to_json(const JumpConcentrationReport& r) {
    Json j;
    j["threshold"] = real_string(r.threshold);
    j["c"] = real_string(r.c);
    j["envelope"] = real_string(r.envelope);
    j["samples"] = r.samples;
    j["maxFrequency"] = real_string(r.maxFrequency);
    j["maxUpper"] = real_string(r.maxUpper);
    j["anyViolation"] = r.anyViolation;
    Json w = Json::array();
    for (const auto& e : r.worldlines) {
        Json x;
        x["worldline"] = e.worldline + 1;
        x["exceedances"] = e.exceedances;
        x["frequency"] = real_string(e.frequency);
        x["lower"] = real_string(e.lower);
        x["upper"] = real_string(e.upper);
        x["violatesEnvelope"] = e.violatesEnvelope;
        w.push_back(x);
    }
    j["worldlines"] = w;
    return j;
}

/// Serialization with the timestamp removed, for determinism comparisons.
inline std::string dump_without_timestamp(Json j) {
    j.erase("timestamp");
    return j.dump(2);
}

} // namespace stoqpimc
