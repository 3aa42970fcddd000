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

#include <cmath>

#include "oracle_values.hpp"
#include "stoqpimc/estimators.hpp"
#include "stoqpimc/operators.hpp"
#include "stoqpimc/oracle.hpp"
#include "test_support.hpp"

using namespace stoqpimc;
using namespace testing_support;

namespace {

std::vector<ChainState> equilibrated(const TrotterizedSystem& s, std::size_t chains, std::uint64_t seed) {
    return prepare_chains(s, chains, seed, relaxation_burn_in(s));
}

/// Dense tr[D O (D e0 D e1)^{L/2}] / Z_L for a diagonal O on the first slice.
double trotter_expectation(const Model& m, double beta, int L, const Eigen::VectorXd& o) {
    const TrotterPieces p = trotter_pieces(to_local(m), beta, L);
    const Eigen::VectorXd d = (p.diagonal / L).array().exp().matrix();
    const DenseOperator step = d.asDiagonal() * oracle_detail::symmetric_exp(p.layer[0]) * d.asDiagonal() *
                               oracle_detail::symmetric_exp(p.layer[1]);
    DenseOperator t = DenseOperator::Identity(step.rows(), step.cols());
    for (int i = 0; i < L / 2; ++i) t = t * step;
    return (o.asDiagonal() * t).trace() / t.trace();
}

Eigen::VectorXd sigma_z_vector(int n, int site) {
    Eigen::VectorXd v(1 << n);
    for (int x = 0; x < (1 << n); ++x) v(x) = oracle_detail::bit_of(x, site, n) ? -1.0 : 1.0;
    return v;
}

} // namespace

TEST(Schedule, LengthRule) {
    EXPECT_EQ(build_schedule(0.0, 5.0).steps(), 1);
    const TemperatureSchedule s = build_schedule(1.0, 4.0);
    EXPECT_EQ(s.steps(), 8);
    EXPECT_EQ(s.betas.front(), 0.0);
    EXPECT_EQ(s.betas.back(), 1.0);
    for (int i = 1; i <= s.steps(); ++i) EXPECT_NEAR(s.betas[i] - s.betas[i - 1], 0.125, 1e-15);
}

TEST(Schedule, TelescopingIsExactWithExactRatios) {
    for (const Model& m : {Model{tim3()}, Model{xy2()}, Model{random_general(3, 51, 0.1)}}) {
        const double beta = 1.3;
        const int L = 6;
        const TemperatureSchedule s = build_schedule(beta, norm_upper_bound(m));
        double logZ = site_count(m) * std::log(2.0);
        for (int i = 1; i <= s.steps(); ++i)
            logZ += exact_trotter_log_partition(m, s.betas[i], L) - exact_trotter_log_partition(m, s.betas[i - 1], L);
        EXPECT_NEAR(logZ, exact_trotter_log_partition(m, beta, L), 1e-10);
    }
}

TEST(Schedule, PerStepBoundDominatesEveryWeightRatio) {
    for (const Model& m : {Model{tim2()}, Model{xy2()}, Model{random_general(2, 52, 0.1)}}) {
        const double beta = 2.0;
        const int L = 4;
        const TrotterizedSystem target(m, beta, L);
        const TemperatureSchedule s = build_schedule(beta, norm_upper_bound(m), target.diagonal_energy_bound());
        for (int i = 1; i <= s.steps(); ++i) {
            const TrotterizedSystem lo(m, s.betas[i - 1], L), hi(m, s.betas[i], L);
            for (std::uint64_t x = 0; x < 256; ++x) {
                const auto z = SpinConfiguration::from_index(x, 2, L);
                const double wl = lo.log_weight(z), wh = hi.log_weight(z);
                if (wl == kNegInf) continue;
                ASSERT_NE(wh, kNegInf);
                EXPECT_LE(wl - wh, s.perStepLogRatioBound + 1e-12);
            }
        }
    }
}

TEST(Hoeffding, CountRule) {
    EXPECT_EQ(hoeffding_samples(1.0, 2.0 / std::exp(2.0)), 4U);
    for (double d : {0.3, 0.05, 0.01}) {
        const auto t = hoeffding_samples(d, 0.05), t2 = hoeffding_samples(d / 2, 0.05);
        EXPECT_LE(t2, 4 * t);
        EXPECT_GE(t2 + 3, 4 * t);
        EXPECT_LE(2.0 * std::exp(-static_cast<double>(t) * d * d / 2), 0.05 * (1 + 1e-12));
    }
    EXPECT_THROW(hoeffding_samples(0.0, 0.1), Error);
}

TEST(Bernstein, ReducesToRangeTermWithoutVariance) {
    EXPECT_EQ(bernstein_samples(0.0, 0.1, 0.05), static_cast<std::size_t>(std::ceil(2.0 / 3.0 * std::log(40.0) / 0.1)));
    EXPECT_LT(bernstein_samples(0.01, 0.01, 0.05), hoeffding_samples(0.01, 0.05));
}

TEST(Ratio, EqualTemperaturesGiveOne) {
    const TrotterizedSystem s(Model{tim2()}, 0.7, 4);
    auto chains = equilibrated(s, 2, 1);
    const RatioEstimate r = estimate_ratio(s, s, chains, 100, 0.0);
    EXPECT_EQ(r.ratio, 1.0);
    EXPECT_EQ(r.logRatio, 0.0);
}

TEST(Ratio, ExactMeanOfMUnderGibbsLaw) {
    const Model m{xy2()};
    const TrotterizedSystem lo(m, 0.25, 4), hi(m, 0.5, 4);
    const double c = 0.25 * hi.diagonal_energy_bound();
    const GibbsVector g = exact_gibbs_vector(hi);
    double mean = 0.0;
    for (std::uint64_t x = 0; x < g.probability.size(); ++x) {
        const auto z = SpinConfiguration::from_index(x, 2, 4);
        const double lw = lo.log_weight(z);
        if (lw != kNegInf) mean += g.probability[x] * std::exp(lw - hi.log_weight(z) - c);
    }
    const double exact = exact_trotter_log_partition(m, 0.25, 4) - exact_trotter_log_partition(m, 0.5, 4) - c;
    EXPECT_NEAR(std::log(mean), exact, 1e-10);
}

TEST(Ratio, SampledStepMatchesOracle) {
    const Model m{random_tim(2, 53)};
    const TrotterizedSystem lo(m, 0.0, 4), hi(m, 0.5, 4);
    const double c = 0.5 * hi.diagonal_energy_bound();
    auto chains = equilibrated(hi, 8, 2);
    const RatioEstimate r = estimate_ratio(lo, hi, chains, 200000, c);
    const double exact = exact_trotter_log_partition(m, 0.5, 4) - exact_trotter_log_partition(m, 0.0, 4);
    EXPECT_NEAR(r.logRatio, exact, 0.02);
    EXPECT_EQ(r.boundViolations, 0U);
    EXPECT_LE(r.maxM, 1.0);
    EXPECT_LE(std::abs(r.meanM - std::exp(-exact - c)), 4.0 * r.standardError + 1e-12);
}

TEST(Ratio, FirstStepFromZeroSeesOnlyFrozenLowerWeights) {
    // At beta = 0 only frozen configurations carry weight (each weight 1), so
    // E_hi[w_0 / w_hi] = 2^n / Z_hi. Sampling the other way, a frozen-uniform
    // average of w_hi misses the kinked configurations.
    const Model m{tim2()};
    const TrotterizedSystem lo(m, 0.0, 4), hi(m, 0.3, 4);
    const GibbsVector g = exact_gibbs_vector(hi);
    double mean = 0.0;
    for (std::uint64_t x = 0; x < g.probability.size(); ++x) {
        const auto z = SpinConfiguration::from_index(x, 2, 4);
        const double w0 = lo.log_weight(z);
        if (w0 != kNegInf) {
            EXPECT_EQ(w0, 0.0);
            mean += g.probability[x] * std::exp(-hi.log_weight(z));
        }
    }
    const double logZhi = exact_trotter_log_partition(m, 0.3, 4);
    EXPECT_NEAR(std::log(mean), std::log(4.0) - logZhi, 1e-10);
    double frozen = 0.0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        const std::vector<std::int8_t> slice{static_cast<std::int8_t>(s & 1 ? -1 : 1), static_cast<std::int8_t>(s & 2 ? -1 : 1)};
        frozen += std::exp(hi.log_weight(SpinConfiguration::frozen(slice, 4))) / 4.0;
    }
    EXPECT_LT(std::log(frozen), logZhi - std::log(4.0) - 1e-3);
}

TEST(PartitionFunction, ZeroTemperatureIsExact) {
    const EstimateReport r = estimate_partition_function(Model{random_tim(5, 54)}, 0.0, 0.1, 0.0, 0.05);
    EXPECT_EQ(r.value, 32.0);
    EXPECT_TRUE(r.steps.empty());
}

TEST(PartitionFunction, PureFieldWithinTolerance) {
    const std::vector<double> gamma{0.5, 1.0, 0.8, 1.2};
    EstimateResources res;
    res.seed = 3;
    const EstimateReport r = estimate_partition_function(Model{pure_field(gamma)}, 2.0, 0.1, 0.0, 0.05, res);
    EXPECT_LE(std::abs(r.value / std::exp(oracle::kPureField4LogZBeta2) - 1.0), 0.1);
    EXPECT_EQ(r.diagnostics.boundViolations, 0U);
    EXPECT_EQ(static_cast<int>(r.steps.size()), r.scheduleLength);
}

TEST(PartitionFunction, GeneralRingWithLocalFlipsWithinTolerance) {
    // Every bond carries -(X x I + I x X) / 4, so no fictitious field is needed.
    std::mt19937_64 g(57);
    GeneralChainModel m;
    m.n = 4;
    m.boundary = Boundary::periodic;
    const Mat4 flips = -0.25 * (pauli::kron(pauli::x(), pauli::identity()) + pauli::kron(pauli::identity(), pauli::x()));
    for (int b = 0; b < 4; ++b) m.terms.push_back(random_block(g, 0.5) + flips);
    EstimateResources res;
    res.seed = 4;
    const EstimateReport r = estimate_partition_function(Model{m}, 1.0, 0.1, 0.0, 0.05, res);
    EXPECT_EQ(r.diagnostics.fictitiousField, 0.0);
    EXPECT_LE(std::abs(r.logValue - exact_log_partition(Model{m}, 1.0)), std::log1p(0.1));
}

TEST(PartitionFunction, FieldOnlyConnectivityIsFlagged) {
    // Pair flips only: single-site moves pass through the weak fictitious
    // field and the chains barely move. The report must say so.
    EstimateResources res;
    res.seed = 4;
    res.burnIn = 10000;
    const EstimateReport r = estimate_partition_function(Model{xx_only_general(3)}, 1.0, 0.1, 0.0, 0.05, res);
    EXPECT_GT(r.diagnostics.fictitiousField, 0.0);
    EXPECT_FALSE(r.diagnostics.warnings.empty());
}

TEST(PartitionFunction, BudgetCapIsEnforced) {
    EstimateResources res;
    res.maxTotalSteps = 1000;
    try {
        estimate_partition_function(Model{tim2()}, 1.0, 0.1, 0.0, 0.05, res);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BudgetExceeded);
    }
}

TEST(PartitionFunction, RejectsBadTargets) {
    EXPECT_THROW(estimate_partition_function(Model{tim2()}, 1.0, 0.0, 0.0, 0.05), Error);
    EXPECT_THROW(estimate_partition_function(Model{tim2()}, 1.0, 0.1, 0.0, 1.5), Error);
    EXPECT_THROW(estimate_partition_function(Model{tim2()}, -1.0, 0.1, 0.0, 0.05), Error);
}

TEST(DiagonalObservable, IdentityIsExactlyOne) {
    const TrotterizedSystem s(Model{tim3()}, 1.0, 8);
    auto chains = equilibrated(s, 4, 5);
    const auto e = estimate_diagonal_observable(s, [](std::span<const std::int8_t>) { return 1.0; }, chains, 1000);
    EXPECT_EQ(e.mean, 1.0);
}

TEST(DiagonalObservable, ExpectationUnderGibbsLawIsTrotterValue) {
    const Model m{tim3()};
    const int L = 4;
    const TrotterizedSystem s(m, 1.0, L);
    const GibbsVector g = exact_gibbs_vector(s);
    double mean = 0.0;
    for (std::uint64_t x = 0; x < g.probability.size(); ++x) {
        const auto z = SpinConfiguration::from_index(x, 3, L);
        mean += g.probability[x] * 0.5 * (z(0, 1) + z(2, 1));
    }
    EXPECT_NEAR(mean, trotter_expectation(m, 1.0, L, sigma_z_vector(3, 1)), 1e-10);
}

TEST(DiagonalObservable, SampledSigmaZMatchesOracle) {
    // L = 4 keeps the Trotter bias below 0.005; whole-worldline flips relax slowly at larger L.
    const TrotterizedSystem s(Model{tim3()}, 1.0, 4);
    auto chains = equilibrated(s, 16, 6);
    const auto e = estimate_diagonal_observable(s, [](std::span<const std::int8_t> z) { return double(z[1]); }, chains, 1200000);
    EXPECT_LT(e.standardError, 0.0125);
    EXPECT_NEAR(e.mean, oracle::kTim3SigmaZ2, 0.05);
}

TEST(DiagonalObservable, SymmetricModelGivesZeroMagnetisation) {
    TransverseIsingModel m = random_tim(4, 55);
    for (auto& k : m.kz) k = 0.0;
    const TrotterizedSystem s(Model{m}, 1.0, 8);
    auto chains = equilibrated(s, 8, 7);
    const auto e = estimate_diagonal_observable(s, [](std::span<const std::int8_t> z) { return double(z[0]); }, chains, 40000);
    EXPECT_LE(std::abs(e.mean), 4.0 * e.standardError + 1e-3);
}

TEST(OffDiagonalObservable, IdentityIsExactlyOne) {
    const TrotterizedSystem s(Model{xy2()}, 1.0, 8);
    auto chains = equilibrated(s, 4, 8);
    const auto e = estimate_offdiagonal_observable(s, identity_operator(2), chains, 1000);
    EXPECT_NEAR(e.mean, 1.0, 1e-14);
}

TEST(OffDiagonalObservable, SingleSpinEstimatorIsUnbiasedAtEveryL) {
    // A lone field term is split evenly over both layers, so the Trotter product is exact.
    const double beta = 0.8;
    const SparseOperator x = pauli_operator(1, {PauliString{1.0, {{0, 'X'}}}});
    for (int L : {2, 4, 8, 16}) {
        const TrotterizedSystem s(Model{pure_field({1.0})}, beta, L);
        const GibbsVector g = exact_gibbs_vector(s);
        double mean = 0.0;
        for (std::uint64_t k = 0; k < g.probability.size(); ++k) {
            if (g.probability[k] == 0.0) continue;
            const auto z = SpinConfiguration::from_index(k, 1, L);
            mean += g.probability[k] * 0.5 * (offdiagonal_local_estimate(s, x, z, 0) + offdiagonal_local_estimate(s, x, z, 1));
        }
        EXPECT_NEAR(mean, oracle::kSingleSpinSigmaX, 1e-12) << "L=" << L;
    }
}

TEST(OffDiagonalObservable, EstimatorMeanIsTrotterValueForCoupledModel) {
    // Exact estimator mean converges to the thermal value as L grows.
    const Model m{xy2()};
    const SparseOperator xx = pauli_operator(2, {PauliString{1.0, {{0, 'X'}, {1, 'X'}}}});
    double previous = kPosInf;
    for (int L : {2, 4, 8}) {
        const TrotterizedSystem s(m, 1.0, L);
        const GibbsVector g = exact_gibbs_vector(s);
        double mean = 0.0;
        for (std::uint64_t k = 0; k < g.probability.size(); ++k) {
            if (g.probability[k] == 0.0) continue;
            const auto z = SpinConfiguration::from_index(k, 2, L);
            mean += g.probability[k] * 0.5 * (offdiagonal_local_estimate(s, xx, z, 0) + offdiagonal_local_estimate(s, xx, z, 1));
        }
        const double err = std::abs(mean - oracle::kXy2SigmaXSigmaX);
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 1e-3);
}

TEST(OffDiagonalObservable, SampledValuesMatchOracle) {
    {
        const TrotterizedSystem s(Model{xy2()}, 1.0, 4);
        auto chains = equilibrated(s, 16, 9);
        const auto e = estimate_offdiagonal_observable(s, pauli_operator(2, {PauliString{1.0, {{0, 'X'}, {1, 'X'}}}}), chains, 400000);
        EXPECT_LT(e.standardError, 0.0125);
        EXPECT_NEAR(e.mean, oracle::kXy2SigmaXSigmaX, 0.05);
    }
    {
        const TrotterizedSystem s(Model{tim3()}, 1.0, 4);
        auto chains = equilibrated(s, 16, 10);
        const auto e = estimate_offdiagonal_observable(s, pauli_operator(3, {PauliString{1.0, {{0, 'X'}}}}), chains, 400000);
        EXPECT_LT(e.standardError, 0.0125);
        EXPECT_NEAR(e.mean, oracle::kTim3SigmaX1, 0.05);
    }
}

TEST(FiniteDifference, MultipleOfIdentity) {
    const double c = 0.7, delta = 1e-3;
    const double zeta = zeta_for_delta(delta, c);
    const double z0 = 3.0;
    const double got = finite_difference_observable(z0, z0 * std::exp(zeta * c), zeta, c);
    EXPECT_NEAR(got, std::expm1(zeta * c) / zeta, 1e-12);
    EXPECT_LE(std::abs(got - c), 2.0 * std::sqrt(delta) * c);
}

TEST(FiniteDifference, ExactPartitionValuesMeetTheEnvelope) {
    // O = Z1 Z2 + I on the two-site model: PSD with norm 2.
    const double normO = 2.0;
    const std::pair<double, double> cases[] = {
        {1e-2, oracle::kTim2FdLogZZeta1em2}, {1e-3, oracle::kTim2FdLogZZeta1em3}, {1e-4, oracle::kTim2FdLogZZeta1em4}};
    for (const auto& [delta, logZeta] : cases) {
        const double zeta = zeta_for_delta(delta, normO);
        const double bound = 2.0 * std::sqrt(delta) * normO;
        const double exact = finite_difference_observable(std::exp(oracle::kTim2LogZ), std::exp(logZeta), zeta, normO);
        EXPECT_LE(std::abs(exact - oracle::kTim2ShiftedZZ), bound) << delta;
        for (int s0 : {-1, 1})
            for (int s1 : {-1, 1}) {
                const double est = finite_difference_observable(std::exp(oracle::kTim2LogZ + s0 * delta),
                                                                std::exp(logZeta + s1 * delta), zeta, normO);
                EXPECT_LE(std::abs(est - oracle::kTim2ShiftedZZ), bound) << delta << " " << s0 << " " << s1;
            }
    }
}

TEST(FiniteDifference, LogFormAgreesAndDeltaIsChecked) {
    const double zeta = zeta_for_delta(1e-3, 1.0);
    EXPECT_NEAR(finite_difference_observable_log(1.0, 1.02, zeta, 1.0),
                finite_difference_observable(std::exp(1.0), std::exp(1.02), zeta, 1.0), 1e-10);
    try {
        zeta_for_delta(0.05, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidDelta);
    }
    EXPECT_THROW(finite_difference_observable(1.0, 1.1, 1.0, 1.0), Error);
}
