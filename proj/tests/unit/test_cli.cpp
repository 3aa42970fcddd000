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
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "stoqpimc/cli.hpp"
#include "stoqpimc/model_io.hpp"
#include "stoqpimc/oracle.hpp"
#include "stoqpimc/report_json.hpp"
#include "test_support.hpp"

using namespace stoqpimc;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

const fs::path kModels = fs::path(STOQPIMC_SOURCE_DIR) / "models";

struct CliResult {
    int status = -1;
    std::string out;
    std::string err;
};

fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("stoqpimc_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    const fs::path errFile = scratch_dir() / "stderr.txt";
    const std::string command = env + " " + std::string(STOQPIMC_CLI_PATH) + " " + args + " 2>" + errFile.string();
    CliResult r;
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int raw = ::pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream e(errFile);
    r.err.assign(std::istreambuf_iterator<char>(e), {});
    return r;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

Model parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_model(in);
}

ErrorKind kind_of(const std::string& text) {
    try {
        parse_text(text);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return ErrorKind::InvalidArgument;
}

} // namespace

// ---------------------------------------------------------------------------
// Model files

TEST(ModelIo, ShippedExamplesLoad) {
    for (const char* name : {"tim4.ini", "pure_field.ini", "xy3.ini", "general2.ini"}) {
        const Model m = load_model(kModels / name);
        EXPECT_GE(site_count(m), 2) << name;
    }
    const Model tim = load_model(kModels / "tim4.ini");
    ASSERT_TRUE(std::holds_alternative<TransverseIsingModel>(tim));
    EXPECT_EQ(std::get<TransverseIsingModel>(tim).kzz.size(), 6U);
}

TEST(ModelIo, FormatRoundTripPreservesHamiltonian) {
    for (const Model& m : {Model{random_tim(5, 71)}, Model{random_xy(4, 72, Boundary::periodic)},
                           Model{random_general(3, 73, 0.05)}, Model{pure_field({0.3, 1.7})}}) {
        const Model back = parse_text(format_model(m));
        EXPECT_EQ(family_name(back), family_name(m));
        EXPECT_EQ((assemble_hamiltonian(back) - assemble_hamiltonian(m)).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(format_model(back), format_model(m));
    }
}

TEST(ModelIo, CommasAndDefaults) {
    const Model m = parse_text("[model]\nfamily = xy\nn = 3\n[fields]\ngamma = 1, 0.5, 0.25\n[bonds]\nkxx = 0.5 0.5\n");
    const auto& xy = std::get<XYChainModel>(m);
    EXPECT_EQ(xy.gamma[2], 0.25);
    EXPECT_EQ(xy.kz, std::vector<double>(3, 0.0));
    EXPECT_EQ(xy.kyy, std::vector<double>(2, 0.0));
    EXPECT_EQ(xy.boundary, Boundary::open);
}

TEST(ModelIo, ParseErrors) {
    EXPECT_EQ(kind_of("[fields]\ngamma = 1\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nfamily = heisenberg\nn = 2\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nn = two\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nn = 2\nboundary = twisted\n[fields]\ngamma = 1 1\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nn = 2\n[fields]\ngamma = 1 x\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nn = 2\n[fields]\ngamma = 1 1\n[couplings]\nc = 1 3 0.1\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nfamily = general\nn = 2\n[general]\nh1 = 1 2 3\n"), ErrorKind::Parse);
    EXPECT_EQ(kind_of("[model]\nn = 2\n[fields\n"), ErrorKind::Parse);
    try {
        load_model(scratch_dir() / "does-not-exist.ini");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
    }
}

TEST(ModelIo, ValidationErrorsSurface) {
    EXPECT_EQ(kind_of("[model]\nn = 2\n[fields]\ngamma = 1 -1\n"), ErrorKind::NonPositiveGamma);
    EXPECT_EQ(kind_of("[model]\nn = 3\n[fields]\ngamma = 1 1 1\n[couplings]\nc = 1 3 0.5\n"), ErrorKind::DecayViolation);
    EXPECT_EQ(kind_of("[model]\nfamily = general\nn = 2\n[general]\nh1 = 0 1 0 0 1 0 0 0 0 0 0 0 0 0 0 0\n"),
              ErrorKind::NonStoquastic);
}

// ---------------------------------------------------------------------------
// JSON

TEST(Json, RealsRoundTripBitExactly) {
    std::mt19937_64 g(74);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        const double v = u(g) * std::pow(10.0, static_cast<int>(g() % 600) - 300);
        const Json j = real_string(v);
        const Json back = Json::parse(j.dump());
        EXPECT_EQ(parse_real(back), v);
    }
    EXPECT_TRUE(std::isnan(parse_real(Json(real_string(std::nan(""))))));
    EXPECT_EQ(parse_real(Json(real_string(kPosInf))), kPosInf);
    EXPECT_EQ(parse_real(Json(real_string(kNegInf))), kNegInf);
}

TEST(Json, ReportCarriesSchemaAndFullPrecision) {
    EstimateResources res;
    res.seed = 9;
    const EstimateReport r = estimate_partition_function(Model{tim2()}, 0.3, 0.1, 0.0, 0.05, res);
    const Json j = Json::parse(to_json(r).dump());
    EXPECT_EQ(j["schemaVersion"], kSchemaVersion);
    EXPECT_EQ(j["kind"], "estimate-z");
    EXPECT_EQ(parse_real(j["logValue"]), r.logValue);
    EXPECT_EQ(parse_real(j["value"]), r.value);
    EXPECT_EQ(j["steps"].size(), r.steps.size());
    EXPECT_EQ(parse_real(j["steps"][0]["meanM"]), r.steps[0].meanM);
    EXPECT_TRUE(j.contains("timestamp"));
    EXPECT_FALSE(Json::parse(dump_without_timestamp(j)).contains("timestamp"));
}

// ---------------------------------------------------------------------------
// In-process commands

TEST(CliInProcess, ObservableIdentityAndFiniteDifferenceGuard) {
    cli::RunConfig c;
    c.subcommand = "estimate-observable";
    c.modelPath = (kModels / "tim4.ini").string();
    c.beta = 0.5;
    c.observable = "identity";
    c.samples = 2000;
    c.chains = 2;
    std::ostringstream out, err;
    ASSERT_EQ(cli::dispatch(c, out, err), cli::kOk) << err.str();
    EXPECT_EQ(parse_real(Json::parse(out.str())["mean"]), 1.0);

    c.observable = "sigma-z 1";
    c.method = "finite-difference";
    std::ostringstream out2, err2;
    EXPECT_EQ(cli::dispatch(c, out2, err2), cli::kInvalid);
    EXPECT_NE(err2.str().find("--shift"), std::string::npos);
}

TEST(CliInProcess, ObservableMatchesOracleOnTwoSites) {
    const fs::path model = write_file("xy2.ini", format_model(Model{xy2()}));
    cli::RunConfig c;
    c.subcommand = "estimate-observable";
    c.modelPath = model.string();
    c.beta = 1.0;
    c.slices = 4;
    c.observable = "sigma-x 1";
    c.samples = 400000;
    c.seed = 3;
    std::ostringstream out, err;
    ASSERT_EQ(cli::dispatch(c, out, err), cli::kOk) << err.str();
    const Json j = Json::parse(out.str());
    DenseOperator x1 = DenseOperator::Zero(4, 4);
    x1(0, 2) = x1(2, 0) = x1(1, 3) = x1(3, 1) = 1.0;
    const double trotter = exact_observable(Model{xy2()}, 1.0, x1);
    EXPECT_LE(std::abs(parse_real(j["mean"]) - trotter), 0.01 + 4.0 * parse_real(j["standardError"]));
}

TEST(CliInProcess, FiniteDifferenceOnIdentityIsExactUpToBias) {
    cli::RunConfig c;
    c.subcommand = "estimate-observable";
    c.modelPath = (kModels / "pure_field.ini").string();
    c.beta = 0.5;
    c.observable = "identity";
    c.method = "finite-difference";
    c.shift = 0.0;
    std::ostringstream out, err;
    ASSERT_EQ(cli::dispatch(c, out, err), cli::kOk) << err.str();
    const Json j = Json::parse(out.str());
    EXPECT_LE(std::abs(parse_real(j["mean"]) - 1.0), parse_real(j["biasBound"]));
}

TEST(CliInProcess, UnknownSubcommandAndBadFormat) {
    cli::RunConfig c;
    c.subcommand = "bogus";
    c.modelPath = "x";
    std::ostringstream out, err;
    EXPECT_EQ(cli::dispatch(c, out, err), cli::kInvalid);
    c.subcommand = "estimate-z";
    c.modelPath = (kModels / "tim4.ini").string();
    c.beta = 0.0;
    c.format = "xml";
    EXPECT_EQ(cli::dispatch(c, out, err), cli::kInvalid);
}

// ---------------------------------------------------------------------------
// Binary

TEST(CliBinary, ZeroTemperatureGivesStateCount) {
    const CliResult r = run_cli("estimate-z --model " + (kModels / "tim4.ini").string() + " --beta 0");
    ASSERT_EQ(r.status, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(parse_real(j["value"]), 16.0);
    EXPECT_TRUE(j["samplesPerStep"].empty());
}

TEST(CliBinary, SameSeedSameReport) {
    const std::string args = "estimate-z --model " + (kModels / "xy3.ini").string() + " --beta 0.4 --seed 11 --chains 4";
    const CliResult a = run_cli(args), b = run_cli(args), c = run_cli(args, "STOQPIMC_THREADS=3");
    ASSERT_EQ(a.status, 0) << a.err;
    EXPECT_EQ(dump_without_timestamp(Json::parse(a.out)), dump_without_timestamp(Json::parse(b.out)));
    EXPECT_EQ(dump_without_timestamp(Json::parse(a.out)), dump_without_timestamp(Json::parse(c.out)));
    const CliResult d = run_cli("estimate-z --model " + (kModels / "xy3.ini").string() + " --beta 0.4 --seed 12 --chains 4");
    EXPECT_NE(Json::parse(a.out)["logValue"], Json::parse(d.out)["logValue"]);
}

TEST(CliBinary, ErrorExitCodes) {
    const CliResult missing = run_cli("estimate-z --model " + (scratch_dir() / "nope.ini").string());
    EXPECT_EQ(missing.status, 2);
    EXPECT_NE(missing.err.find("cannot open"), std::string::npos);

    const CliResult invalid = run_cli("estimate-z --model " + (kModels / "tim4.ini").string() + " --delta-mult 2");
    EXPECT_EQ(invalid.status, 2);

    const fs::path bad = write_file("bad.ini", "[model]\nn = 2\n[fields]\ngamma = 1 0\n");
    const CliResult nonpositive = run_cli("estimate-z --model " + bad.string());
    EXPECT_EQ(nonpositive.status, 2);
    EXPECT_NE(nonpositive.err.find("gamma"), std::string::npos);

    const CliResult budget = run_cli("estimate-z --model " + (kModels / "tim4.ini").string() + " --max-steps 100");
    EXPECT_EQ(budget.status, 3);

    EXPECT_EQ(run_cli("estimate-z --beta 1").status, 2);
    EXPECT_EQ(run_cli("--help").status, 0);
}

TEST(CliBinary, OracleCompareRefusesLargeChains) {
    const fs::path big = write_file("big.ini", format_model(Model{pure_field(std::vector<double>(13, 1.0))}));
    const CliResult r = run_cli("oracle-compare --model " + big.string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("estimate-z"), std::string::npos);
}

TEST(CliBinary, OracleComparePureFieldTrotterIsExact) {
    const CliResult r = run_cli("oracle-compare --model " + (kModels / "pure_field.ini").string() + " --beta 0.5 --seed 2");
    ASSERT_EQ(r.status, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_NEAR(parse_real(j["trotterLogZ"]), parse_real(j["exactLogZ"]), 1e-12);
    EXPECT_LE(std::abs(parse_real(j["relativeErrorEstimate"])), 0.1);
    EXPECT_TRUE(j["withinTolerance"].get<bool>());
}

TEST(CliBinary, DiagnoseExactAndHeuristic) {
    const fs::path tiny = write_file("tiny.ini", format_model(Model{tim2()}));
    const CliResult r = run_cli("diagnose --model " + tiny.string() + " --beta 1 --slices 4 --epsilon 0.25 --records 2000");
    ASSERT_EQ(r.status, 0) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_TRUE(j["mixing"]["exact"].get<bool>());
    EXPECT_EQ(j["mixing"]["tauEmpirical"], j["mixing"]["tauMix"]);
    EXPECT_GT(parse_real(j["mixing"]["spectralGap"]), 0.0);
    EXPECT_EQ(j["jumpConcentration"]["samples"], 2000);

    const CliResult h = run_cli("diagnose --model " + (kModels / "tim4.ini").string() +
                                " --beta 0.5 --slices 8 --records 500 --burn-in 2000 --chains 2");
    ASSERT_EQ(h.status, 0) << h.err;
    EXPECT_EQ(Json::parse(h.out)["mixing"]["label"], "heuristic");
    EXPECT_NE(h.err.find("heuristic"), std::string::npos);
}

TEST(CliBinary, SampleWritesCsv) {
    const fs::path out = scratch_dir() / "samples.csv";
    const CliResult r = run_cli("sample --model " + (kModels / "xy3.ini").string() +
                                " --beta 0.5 --slices 4 --samples 10 --hex --out " + out.string());
    ASSERT_EQ(r.status, 0) << r.err;
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "step,logWeight,d_1,d_2,d_3,config");
    int rows = 0;
    for (std::string line; std::getline(in, line);) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    }
    EXPECT_EQ(rows, 10);
}
