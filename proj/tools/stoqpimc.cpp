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
// stoqpimc command-line tool.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stoqpimc/cli.hpp"

namespace {

using stoqpimc::cli::RunConfig;

void add_common(CLI::App& app, RunConfig& c, std::string& rule) {
    app.add_option("--model", c.modelPath, "model file")->required();
    app.add_option("--beta", c.beta, "inverse temperature");
    app.add_option("--delta-mult", c.deltaMult, "multiplicative error target");
    app.add_option("--delta-add", c.deltaAdd, "additive error target (recorded)");
    app.add_option("--delta-fail", c.deltaFail, "failure probability");
    app.add_option("--seed", c.seed, "master seed");
    app.add_option("--slices", c.slices, "Trotter slice count (even)");
    app.add_option("--chains", c.chains, "independent chains");
    app.add_option("--burn-in", c.burnIn, "burn-in steps per chain and temperature");
    app.add_option("--max-steps", c.maxSteps, "cap on total chain steps");
    app.add_option("--out", c.outPath, "output file (default stdout)");
    app.add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--sample-rule", rule, "composite, bernstein or hoeffding")
        ->check(CLI::IsMember({"composite", "bernstein", "hoeffding"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Path-integral Monte Carlo for 1D stoquastic spin chains"};
    app.require_subcommand(1);
    RunConfig c;
    std::string rule = "composite";

    auto* estimateZ = app.add_subcommand("estimate-z", "estimate the partition function");
    add_common(*estimateZ, c, rule);

    auto* observable = app.add_subcommand("estimate-observable", "estimate a thermal expectation value");
    add_common(*observable, c, rule);
    observable->add_option("--observable", c.observable, "identity | sigma-z j | sigma-x j | zz j k | energy");
    observable->add_option("--observable-file", c.observableFile, "sparse rows file: row col value per line");
    observable->add_option("--method", c.method, "direct or finite-difference")
        ->check(CLI::IsMember({"direct", "finite-difference"}));
    observable->add_option("--samples", c.samples, "retained samples (direct method)");
    observable->add_option("--shift", c.shift, "finite difference uses O + shift I");
    observable->add_option("--fd-delta", c.fdDelta, "finite-difference accuracy parameter");

    auto* compare = app.add_subcommand("oracle-compare", "compare the estimate with exact diagonalization");
    add_common(*compare, c, rule);

    auto* diagnose = app.add_subcommand("diagnose", "mixing and jump-concentration diagnostics");
    add_common(*diagnose, c, rule);
    diagnose->add_option("--epsilon", c.epsilon, "total-variation target");
    diagnose->add_option("--records", c.records, "retained samples for heuristic statistics");
    diagnose->add_option("--concentration-c", c.concentrationC, "threshold constant c in c beta ln n");
    diagnose->add_option("--thinning", c.thinning, "steps between retained samples");

    auto* sample = app.add_subcommand("sample", "dump chain samples as csv");
    add_common(*sample, c, rule);
    sample->add_option("--samples", c.samples, "rows to write");
    sample->add_option("--thinning", c.thinning, "steps between rows");
    sample->add_flag("--hex", c.hex, "append the packed configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : stoqpimc::cli::kInvalid;
    }
    c.subcommand = app.get_subcommands().front()->get_name();
    c.sampleRule = stoqpimc::parse_sample_rule(rule);
    return stoqpimc::cli::dispatch(c, std::cout, std::cerr);
}
