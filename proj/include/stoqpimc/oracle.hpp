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

// Dense ground truth for small systems: exact and Trotterized partition
// functions, brute-force Gibbs vectors over the lattice and exact Metropolis
// transition matrices. Matrix exponentials always go through a symmetric
// eigendecomposition.
//
// Basis convention for the 2^n space: site s is bit (n - 1 - s) of the basis
// index, so site 0 is the leftmost Kronecker factor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "stoqpimc/chain.hpp"
#include "stoqpimc/error.hpp"
#include "stoqpimc/mapping.hpp"
#include "stoqpimc/models.hpp"

namespace stoqpimc {

using DenseOperator = Eigen::MatrixXd;

struct OracleLimits {
    int maxDenseSites = 12;
    int maxLatticeBits = 20;
    std::size_t maxTransitionStates = 4096;
};

inline double log_sum_exp(const std::vector<double>& values) {
    double top = kNegInf;
    for (double v : values) top = std::max(top, v);
    if (top == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - top);
    return top + std::log(sum);
}

namespace oracle_detail {

inline int bit_of(std::uint64_t index, int site, int n) { return static_cast<int>((index >> (n - 1 - site)) & 1U); }

inline std::uint64_t with_bit(std::uint64_t index, int site, int n, int bit) {
    const std::uint64_t mask = std::uint64_t{1} << (n - 1 - site);
    return bit ? (index | mask) : (index & ~mask);
}

inline void check_sites(int n, const OracleLimits& limits) {
    if (n > limits.maxDenseSites)
        throw Error(ErrorKind::TooLarge, "n = " + std::to_string(n) + " exceeds dense oracle cap " +
                                             std::to_string(limits.maxDenseSites));
}

/// Adds coef * (one-site matrix on `site`) to `out`.
inline void add_site(DenseOperator& out, int n, int site, const Mat2& m, double coef = 1.0) {
    const std::uint64_t dim = std::uint64_t{1} << n;
    for (std::uint64_t col = 0; col < dim; ++col) {
        const int c = bit_of(col, site, n);
        for (int r = 0; r < 2; ++r) {
            if (m(r, c) == 0.0) continue;
            out(static_cast<Eigen::Index>(with_bit(col, site, n, r)), static_cast<Eigen::Index>(col)) += coef * m(r, c);
        }
    }
}

/// Adds coef * (two-site matrix on (a, b)) to `out`.
inline void add_pair(DenseOperator& out, int n, int a, int b, const Mat4& m, double coef = 1.0) {
    const std::uint64_t dim = std::uint64_t{1} << n;
    for (std::uint64_t col = 0; col < dim; ++col) {
        const int c = 2 * bit_of(col, a, n) + bit_of(col, b, n);
        for (int r = 0; r < 4; ++r) {
            if (m(r, c) == 0.0) continue;
            const std::uint64_t row = with_bit(with_bit(col, a, n, r >> 1), b, n, r & 1);
            out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) += coef * m(r, c);
        }
    }
}

template <class M>
M off_diagonal(M m) {
    m.diagonal().setZero();
    return m;
}

/// exp(scale * S) for symmetric S.
inline DenseOperator symmetric_exp(const DenseOperator& s, double scale = 1.0) {
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(s);
    const Eigen::VectorXd e = (scale * solver.eigenvalues().array()).exp().matrix();
    return solver.eigenvectors() * e.asDiagonal() * solver.eigenvectors().transpose();
}

/// Bond index of an off-diagonal pair term; mirrors the lattice layering rule.
inline int bond_of(const PairTerm& t, int n) {
    if (t.b == (t.a + 1) % n) return t.a;
    if (t.a == (t.b + 1) % n) return t.b;
    throw Error(ErrorKind::InvalidModel, "off-diagonal two-site term on non-adjacent sites");
}

} // namespace oracle_detail

inline DenseOperator assemble_hamiltonian(const LocalHamiltonian& h, const OracleLimits& limits = {}) {
    oracle_detail::check_sites(h.n, limits);
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << h.n);
    DenseOperator out = DenseOperator::Zero(dim, dim);
    for (const auto& t : h.sites) oracle_detail::add_site(out, h.n, t.site, t.h);
    for (const auto& t : h.pairs) oracle_detail::add_pair(out, h.n, t.a, t.b, t.h);
    return out;
}

inline DenseOperator assemble_hamiltonian(const Model& model, const OracleLimits& limits = {}) {
    return assemble_hamiltonian(to_local(model), limits);
}

/// ln tr exp(-beta H).
inline double exact_log_partition(const DenseOperator& hamiltonian, double beta) {
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(hamiltonian, Eigen::EigenvaluesOnly);
    std::vector<double> terms;
    for (Eigen::Index m = 0; m < solver.eigenvalues().size(); ++m) terms.push_back(-beta * solver.eigenvalues()(m));
    return log_sum_exp(terms);
}

inline double exact_log_partition(const Model& model, double beta, const OracleLimits& limits = {}) {
    return exact_log_partition(assemble_hamiltonian(model, limits), beta);
}

inline double exact_partition(const Model& model, double beta, const OracleLimits& limits = {}) {
    return std::exp(exact_log_partition(model, beta, limits));
}

/// Dense pieces of the Trotter splitting: A = -beta diag(H) and the two layer
/// exponents G_p (the operators whose exponentials join neighbouring slices).
struct TrotterPieces {
    Eigen::VectorXd diagonal; // A
    DenseOperator layer[2];
};

inline TrotterPieces trotter_pieces(const LocalHamiltonian& h, double beta, int L, const OracleLimits& limits = {}) {
    oracle_detail::check_sites(h.n, limits);
    if (L < 2 || L % 2 != 0) throw Error(ErrorKind::InvalidArgument, "L must be even and >= 2");
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << h.n);
    TrotterPieces out;
    out.diagonal = -beta * assemble_hamiltonian(h, limits).diagonal();
    for (auto& g : out.layer) g = DenseOperator::Zero(dim, dim);
    // One-site off-diagonal terms are split evenly between the two layers;
    // two-site terms go to the layer of their bond's parity with weight 2.
    for (const auto& t : h.sites) {
        const Mat2 off = oracle_detail::off_diagonal(t.h);
        for (auto& g : out.layer) oracle_detail::add_site(g, h.n, t.site, off, -beta / L);
    }
    for (const auto& t : h.pairs) {
        const Mat4 off = oracle_detail::off_diagonal(t.h);
        if (off.cwiseAbs().maxCoeff() == 0.0) continue;
        const int bond = oracle_detail::bond_of(t, h.n);
        oracle_detail::add_pair(out.layer[bond % 2], h.n, t.a, t.b, off, -2.0 * beta / L);
    }
    return out;
}

/// ln Z_{beta,L} = ln tr[(e^{A/L} e^{G_0} e^{A/L} e^{G_1})^{L/2}], with L the
/// number of time slices.
inline double exact_trotter_log_partition(const LocalHamiltonian& h, double beta, int L, const OracleLimits& limits = {}) {
    const TrotterPieces p = trotter_pieces(h, beta, L, limits);
    const Eigen::VectorXd d = (p.diagonal / L).array().exp().matrix();
    const DenseOperator e0 = oracle_detail::symmetric_exp(p.layer[0]);
    const DenseOperator half1 = oracle_detail::symmetric_exp(p.layer[1], 0.5);
    // Symmetrised transfer matrix with the same trace powers.
    DenseOperator x = half1 * d.asDiagonal() * e0 * d.asDiagonal() * half1;
    x = 0.5 * (x + x.transpose());
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(x, Eigen::EigenvaluesOnly);
    std::vector<double> terms;
    for (Eigen::Index m = 0; m < solver.eigenvalues().size(); ++m) {
        const double mu = solver.eigenvalues()(m);
        if (mu > 0.0) terms.push_back(0.5 * L * std::log(mu));
    }
    return log_sum_exp(terms);
}

inline double exact_trotter_log_partition(const Model& model, double beta, int L, const OracleLimits& limits = {}) {
    return exact_trotter_log_partition(to_local(model), beta, L, limits);
}

inline double exact_trotter_partition(const Model& model, double beta, int L, const OracleLimits& limits = {}) {
    return std::exp(exact_trotter_log_partition(model, beta, L, limits));
}

/// tr[O e^{-beta H}] / Z.
inline double exact_observable(const DenseOperator& hamiltonian, double beta, const DenseOperator& observable) {
    Eigen::SelfAdjointEigenSolver<DenseOperator> solver(hamiltonian);
    const Eigen::VectorXd& lambda = solver.eigenvalues();
    const double shift = lambda.minCoeff();
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index m = 0; m < lambda.size(); ++m) {
        const double w = std::exp(-beta * (lambda(m) - shift));
        const auto v = solver.eigenvectors().col(m);
        num += w * v.dot(observable * v);
        den += w;
    }
    return num / den;
}

inline double exact_observable(const Model& model, double beta, const DenseOperator& observable,
                               const OracleLimits& limits = {}) {
    return exact_observable(assemble_hamiltonian(model, limits), beta, observable);
}

/// Normalised exp(log_weight) over all 2^{nL} lattice configurations, indexed
/// by SpinConfiguration::to_index.
struct GibbsVector {
    std::vector<double> probability;
    double logNormalizer = kNegInf;
};

inline void check_lattice(const TrotterizedSystem& system, const OracleLimits& limits) {
    const int bits = system.sites() * system.slices();
    if (bits > limits.maxLatticeBits)
        throw Error(ErrorKind::TooLarge, "lattice has 2^" + std::to_string(bits) + " configurations, cap 2^" +
                                             std::to_string(limits.maxLatticeBits));
}

inline GibbsVector exact_gibbs_vector(const TrotterizedSystem& system, const OracleLimits& limits = {}) {
    check_lattice(system, limits);
    const int n = system.sites();
    const int L = system.slices();
    const std::uint64_t count = std::uint64_t{1} << (n * L);
    std::vector<double> logw(count);
    for (std::uint64_t x = 0; x < count; ++x) logw[x] = system.log_weight(SpinConfiguration::from_index(x, n, L));
    GibbsVector out;
    out.logNormalizer = log_sum_exp(logw);
    out.probability.resize(count);
    for (std::uint64_t x = 0; x < count; ++x) out.probability[x] = std::exp(logw[x] - out.logNormalizer);
    return out;
}

/// Exact kernel of the lazy Metropolis chain over all of the lattice, or over
/// the restricted space when a budget is given. `states[k]` is the lattice
/// index of row/column k.
struct TransitionMatrix {
    DenseOperator P;
    std::vector<std::uint64_t> states;
};

inline TransitionMatrix transition_matrix(const TrotterizedSystem& system,
                                          const std::optional<JumpBudget>& budget = std::nullopt,
                                          const OracleLimits& limits = {}) {
    check_lattice(system, limits);
    const int n = system.sites();
    const int L = system.slices();
    const std::uint64_t count = std::uint64_t{1} << (n * L);
    TransitionMatrix out;
    std::unordered_map<std::uint64_t, std::size_t> position;
    for (std::uint64_t x = 0; x < count; ++x) {
        if (budget && !within_budget(SpinConfiguration::from_index(x, n, L), *budget)) continue;
        position[x] = out.states.size();
        out.states.push_back(x);
    }
    if (out.states.size() > limits.maxTransitionStates)
        throw Error(ErrorKind::TooLarge, std::to_string(out.states.size()) + " states exceed transition-matrix cap " +
                                             std::to_string(limits.maxTransitionStates));
    const auto size = static_cast<Eigen::Index>(out.states.size());
    out.P = DenseOperator::Zero(size, size);
    const double proposal = 1.0 / (2.0 * n * L);
    for (Eigen::Index row = 0; row < size; ++row) {
        const SpinConfiguration z = SpinConfiguration::from_index(out.states[row], n, L);
        double leave = 0.0;
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < n; ++j) {
                const std::uint64_t target = out.states[row] ^ (std::uint64_t{1} << (i * n + j));
                const auto it = position.find(target);
                if (it == position.end()) continue; // outside the restricted space
                const double lr = system.log_weight_ratio_single_flip(z, i, j);
                const double p = proposal * (lr >= 0.0 ? 1.0 : std::exp(lr));
                out.P(row, static_cast<Eigen::Index>(it->second)) += p;
                leave += p;
            }
        out.P(row, row) += 1.0 - leave;
    }
    return out;
}

} // namespace stoqpimc
