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

// Hamiltonian families accepted by the engine, their validation, and a common
// local-term representation that every other module consumes.
//
// Basis convention: spin +1 is basis index 0 and spin -1 is basis index 1.
// A two-site block acting on sites (a, b) is written in the basis
// |z_a z_b> with index 2*bit(z_a) + bit(z_b).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "stoqpimc/error.hpp"

namespace stoqpimc {

using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

enum class Boundary { open, periodic };

inline std::string to_string(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

namespace pauli {
inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 x() { Mat2 m; m << 0, 1, 1, 0; return m; }
inline Mat2 z() { Mat2 m; m << 1, 0, 0, -1; return m; }
inline Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}
/// sigma^y (x) sigma^y is real in the computational basis.
inline Mat4 yy() {
    Mat4 m = Mat4::Zero();
    m(0, 3) = m(3, 0) = -1.0;
    m(1, 2) = m(2, 1) = 1.0;
    return m;
}
} // namespace pauli

/// Ordered site pair with first < second (0-based).
using SitePair = std::pair<int, int>;

/// Long-range transverse-field Ising chain:
///   H = -sum_j gamma_j X_j + sum_j kz_j Z_j + sum_{j<k} kzz_{jk} Z_j Z_k
struct TransverseIsingModel {
    int n = 0;
    std::vector<double> gamma;
    std::vector<double> kz;
    std::map<SitePair, double> kzz;
    double xi = 1.0;
    Boundary boundary = Boundary::open;

    /// Adds a coupling; (j, k) in either order, 0-based.
    void set_coupling(int j, int k, double value) {
        if (j == k) throw Error(ErrorKind::InvalidModel, "self-coupling at site " + std::to_string(j + 1));
        kzz[{std::min(j, k), std::max(j, k)}] = value;
    }
};

/// Nearest-neighbour XY chain with transverse and longitudinal fields:
///   H = -sum gamma_j X_j - sum kxx_j X_j X_{j+1} - sum kyy_j Y_j Y_{j+1}
///       + sum kzz_j Z_j Z_{j+1} + sum kz_j Z_j
struct XYChainModel {
    int n = 0;
    std::vector<double> gamma; // per site
    std::vector<double> kz;    // per site
    std::vector<double> kxx;   // per bond
    std::vector<double> kyy;   // per bond
    std::vector<double> kzz;   // per bond
    Boundary boundary = Boundary::open;
};

/// General stoquastic nearest-neighbour chain given by explicit 4x4 blocks,
/// plus an optional uniform fictitious field -fictitiousField * X_j per site.
struct GeneralChainModel {
    int n = 0;
    std::vector<Mat4> terms; // terms[b] acts on (b, b+1 mod n)
    Boundary boundary = Boundary::open;
    double fictitiousField = 0.0;
};

using Model = std::variant<TransverseIsingModel, XYChainModel, GeneralChainModel>;

inline int site_count(const Model& model) {
    return std::visit([](const auto& m) { return m.n; }, model);
}

inline std::string family_name(const Model& model) {
    switch (model.index()) {
    case 0: return "tim";
    case 1: return "xy";
    default: return "general";
    }
}

inline int bond_count(int n, Boundary boundary) {
    if (n < 2) return 0;
    if (boundary == Boundary::open) return n - 1;
    return n;
}

/// Spatial distance used by the decay bound; chordal under periodic boundary.
inline int site_distance(int j, int k, int n, Boundary boundary) {
    const int d = std::abs(j - k);
    return boundary == Boundary::periodic ? std::min(d, n - d) : d;
}

// ---------------------------------------------------------------------------
// Local-term representation

struct SiteTerm {
    int site;
    Mat2 h;
};

struct PairTerm {
    int a;
    int b;
    Mat4 h; // basis |z_a z_b>
};

/// A Hamiltonian written as a sum of one- and two-site terms.
struct LocalHamiltonian {
    int n = 0;
    Boundary boundary = Boundary::open;
    std::vector<SiteTerm> sites;
    std::vector<PairTerm> pairs;
};

namespace detail {

inline std::string site_label(int j) { return std::to_string(j + 1); }

inline void require_size(const std::vector<double>& v, std::size_t expected, const char* name) {
    if (v.size() != expected) {
        std::ostringstream msg;
        msg << name << " has " << v.size() << " entries, expected " << expected;
        throw Error(ErrorKind::InvalidModel, msg.str());
    }
}

inline void require_finite(double x, const std::string& what) {
    if (!std::isfinite(x)) throw Error(ErrorKind::InvalidModel, what + " is not finite");
}

inline void require_unit_range(double x, const std::string& what) {
    require_finite(x, what);
    if (x < -1.0 || x > 1.0) throw Error(ErrorKind::InvalidModel, what + " outside [-1, 1]");
}

inline void require_layerable(int n, Boundary boundary) {
    if (boundary == Boundary::periodic && n >= 3 && n % 2 == 1)
        throw Error(ErrorKind::InvalidModel,
                    "periodic chain with odd n cannot be split into two commuting bond layers");
}

inline double block_norm(const Mat4& h) {
    Eigen::SelfAdjointEigenSolver<Mat4> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace detail

inline void validate(const TransverseIsingModel& m) {
    if (m.n < 1) throw Error(ErrorKind::InvalidModel, "n must be at least 1");
    detail::require_size(m.gamma, m.n, "gamma");
    detail::require_size(m.kz, m.n, "kz");
    if (!(m.xi > 0.0) || !std::isfinite(m.xi)) throw Error(ErrorKind::InvalidModel, "xi must be positive");
    for (int j = 0; j < m.n; ++j) {
        detail::require_finite(m.gamma[j], "gamma_" + detail::site_label(j));
        if (!(m.gamma[j] > 0.0))
            throw Error(ErrorKind::NonPositiveGamma, "gamma_" + detail::site_label(j) + " must be > 0");
        detail::require_unit_range(m.kz[j], "kz_" + detail::site_label(j));
    }
    for (const auto& [pair, value] : m.kzz) {
        const auto [j, k] = pair;
        if (j < 0 || k >= m.n || j >= k)
            throw Error(ErrorKind::InvalidModel, "coupling index out of range");
        detail::require_finite(value, "kzz");
        const int d = site_distance(j, k, m.n, m.boundary);
        const double bound = std::pow(static_cast<double>(d), -(2.0 + m.xi));
        if (std::abs(value) > bound) {
            std::ostringstream msg;
            msg << "|kzz(" << j + 1 << "," << k + 1 << ")| = " << std::abs(value) << " exceeds distance bound "
                << bound << " (distance " << d << ", xi " << m.xi << ")";
            throw Error(ErrorKind::DecayViolation, msg.str());
        }
    }
}

inline void validate(const XYChainModel& m) {
    if (m.n < 1) throw Error(ErrorKind::InvalidModel, "n must be at least 1");
    if (m.boundary == Boundary::periodic && m.n < 2)
        throw Error(ErrorKind::InvalidModel, "periodic boundary needs n >= 2");
    detail::require_layerable(m.n, m.boundary);
    const auto bonds = static_cast<std::size_t>(bond_count(m.n, m.boundary));
    detail::require_size(m.gamma, m.n, "gamma");
    detail::require_size(m.kz, m.n, "kz");
    detail::require_size(m.kxx, bonds, "kxx");
    detail::require_size(m.kyy, bonds, "kyy");
    detail::require_size(m.kzz, bonds, "kzz");
    for (int j = 0; j < m.n; ++j) {
        detail::require_finite(m.gamma[j], "gamma_" + detail::site_label(j));
        if (!(m.gamma[j] > 0.0))
            throw Error(ErrorKind::NonPositiveGamma, "gamma_" + detail::site_label(j) + " must be > 0");
        detail::require_unit_range(m.kz[j], "kz_" + detail::site_label(j));
    }
    for (std::size_t b = 0; b < bonds; ++b) {
        const std::string label = detail::site_label(static_cast<int>(b));
        detail::require_finite(m.kxx[b], "kxx_" + label);
        detail::require_finite(m.kyy[b], "kyy_" + label);
        if (m.kxx[b] < 0.0 || std::abs(m.kyy[b]) > m.kxx[b])
            throw Error(ErrorKind::NonStoquastic,
                        "bond " + label + " needs kxx >= 0 and |kyy| <= kxx");
        detail::require_unit_range(m.kzz[b], "kzz_" + label);
    }
}

inline void validate(const GeneralChainModel& m) {
    if (m.n < 1) throw Error(ErrorKind::InvalidModel, "n must be at least 1");
    if (m.boundary == Boundary::periodic && m.n < 2)
        throw Error(ErrorKind::InvalidModel, "periodic boundary needs n >= 2");
    detail::require_layerable(m.n, m.boundary);
    const auto bonds = static_cast<std::size_t>(bond_count(m.n, m.boundary));
    if (m.terms.size() != bonds) {
        std::ostringstream msg;
        msg << "expected " << bonds << " bond blocks, got " << m.terms.size();
        throw Error(ErrorKind::InvalidModel, msg.str());
    }
    if (!(m.fictitiousField >= 0.0) || !std::isfinite(m.fictitiousField))
        throw Error(ErrorKind::InvalidModel, "fictitious field must be finite and >= 0");
    for (std::size_t b = 0; b < bonds; ++b) {
        const Mat4& h = m.terms[b];
        const std::string label = "H_" + std::to_string(b + 1);
        if (!h.allFinite()) throw Error(ErrorKind::InvalidModel, label + " has non-finite entries");
        if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw Error(ErrorKind::InvalidModel, label + " is not symmetric");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (r != c && h(r, c) > 0.0) {
                    std::ostringstream msg;
                    msg << label << " entry (" << r << "," << c << ") = " << h(r, c) << " is positive";
                    throw Error(ErrorKind::NonStoquastic, msg.str());
                }
        const double norm = detail::block_norm(h);
        if (norm > 1.0 + 1e-12) {
            std::ostringstream msg;
            msg << label << " has operator norm " << norm << " > 1";
            throw Error(ErrorKind::NormViolation, msg.str());
        }
    }
}

inline void validate(const Model& model) {
    std::visit([](const auto& m) { validate(m); }, model);
}

// ---------------------------------------------------------------------------
// Norm bound

inline double norm_upper_bound(const TransverseIsingModel& m) {
    double total = 0.0;
    for (int j = 0; j < m.n; ++j) total += m.gamma[j] + std::abs(m.kz[j]);
    for (const auto& [pair, value] : m.kzz) total += std::abs(value);
    return total;
}

inline double norm_upper_bound(const XYChainModel& m) {
    double total = 0.0;
    for (int j = 0; j < m.n; ++j) total += m.gamma[j] + std::abs(m.kz[j]);
    for (std::size_t b = 0; b < m.kxx.size(); ++b)
        total += std::abs(m.kxx[b]) + std::abs(m.kyy[b]) + std::abs(m.kzz[b]);
    return total;
}

inline double norm_upper_bound(const GeneralChainModel& m) {
    double total = m.n * m.fictitiousField;
    for (const auto& h : m.terms) total += detail::block_norm(h);
    return total;
}

/// Triangle-inequality bound on the operator norm of the assembled Hamiltonian.
inline double norm_upper_bound(const Model& model) {
    return std::visit([](const auto& m) { return norm_upper_bound(m); }, model);
}

// ---------------------------------------------------------------------------
// Fictitious field

/// True when single-site flips already carry weight at every site in both
/// bond layers, so no fictitious field is needed for ergodicity.
inline bool has_local_transverse_terms(const GeneralChainModel& m) {
    if (m.fictitiousField > 0.0) return true;
    const int bonds = bond_count(m.n, m.boundary);
    for (int s = 0; s < m.n; ++s) {
        for (int parity = 0; parity < 2; ++parity) {
            bool covered = false;
            for (int b = parity; b < bonds; b += 2) {
                const int a = b;
                const int c = (b + 1) % m.n;
                if (a != s && c != s) continue;
                const Mat4& h = m.terms[b];
                // 1-local flips on s for both values of the partner spin.
                const bool first = (a == s);
                bool all = true;
                for (int partner = 0; partner < 2; ++partner) {
                    const int r = first ? partner : 2 * partner;
                    const int col = first ? 2 + partner : 2 * partner + 1;
                    if (!(h(r, col) < 0.0)) all = false;
                }
                covered = covered || all;
            }
            if (!covered) return false;
        }
    }
    return true;
}

/// Returns the model with a uniform field -(delta_mult / n) X_j per site when
/// single-site moves would otherwise be non-ergodic. Models that already carry
/// local transverse terms are returned unchanged.
inline GeneralChainModel add_fictitious_field(GeneralChainModel model, double delta_mult) {
    if (!(delta_mult > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta_mult must be > 0");
    if (has_local_transverse_terms(model)) return model;
    model.fictitiousField = delta_mult / model.n;
    return model;
}

/// Bound on |ln Z(with field) - ln Z(without)|, i.e. beta * n * field.
inline double fictitious_log_z_bound(const GeneralChainModel& m, double beta) {
    return beta * m.n * m.fictitiousField;
}

// ---------------------------------------------------------------------------
// Conversion to local terms

inline LocalHamiltonian to_local(const TransverseIsingModel& m) {
    LocalHamiltonian out{m.n, m.boundary, {}, {}};
    for (int j = 0; j < m.n; ++j) out.sites.push_back({j, -m.gamma[j] * pauli::x() + m.kz[j] * pauli::z()});
    for (const auto& [pair, value] : m.kzz)
        out.pairs.push_back({pair.first, pair.second, value * pauli::kron(pauli::z(), pauli::z())});
    return out;
}

inline LocalHamiltonian to_local(const XYChainModel& m) {
    LocalHamiltonian out{m.n, m.boundary, {}, {}};
    for (int j = 0; j < m.n; ++j) out.sites.push_back({j, -m.gamma[j] * pauli::x() + m.kz[j] * pauli::z()});
    for (std::size_t b = 0; b < m.kxx.size(); ++b) {
        const Mat4 h = -m.kxx[b] * pauli::kron(pauli::x(), pauli::x()) - m.kyy[b] * pauli::yy() +
                       m.kzz[b] * pauli::kron(pauli::z(), pauli::z());
        out.pairs.push_back({static_cast<int>(b), static_cast<int>((b + 1) % m.n), h});
    }
    return out;
}

inline LocalHamiltonian to_local(const GeneralChainModel& m) {
    LocalHamiltonian out{m.n, m.boundary, {}, {}};
    if (m.fictitiousField > 0.0)
        for (int j = 0; j < m.n; ++j) out.sites.push_back({j, -m.fictitiousField * pauli::x()});
    for (std::size_t b = 0; b < m.terms.size(); ++b)
        out.pairs.push_back({static_cast<int>(b), static_cast<int>((b + 1) % m.n), m.terms[b]});
    return out;
}

inline LocalHamiltonian to_local(const Model& model) {
    return std::visit([](const auto& m) { return to_local(m); }, model);
}

} // namespace stoqpimc
