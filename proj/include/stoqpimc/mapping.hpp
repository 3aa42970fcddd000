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

// Suzuki-Trotter mapping of a stoquastic chain onto an n x L lattice of
// classical spins. Every model is reduced to
//   * a diagonal Ising energy  E(z) = c + sum_s h_s z_s + sum_{s<t} K_st z_s z_t
//   * two alternating off-diagonal layers, each a product of commuting one-
//     and two-site factors exp(G_f) with G_f entrywise nonnegative.
// Slice i (0-based) is joined to slice i+1 through layer (i % 2). The weight is
//   w(z) = exp(-(beta/L) sum_i E(z_i)) * prod_i <z_i| exp(G_{i%2}) |z_{i+1}>
// with z_L := z_0. Every quantity is handled in the log domain.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stoqpimc/error.hpp"
#include "stoqpimc/models.hpp"

namespace stoqpimc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Spin lattice z_{i,j}: slice i in [0, L), worldline j in [0, n).
class SpinConfiguration {
public:
    SpinConfiguration() = default;

    SpinConfiguration(int n, int L, std::int8_t value = 1) : n_(n), L_(L) {
        if (n < 1 || L < 2) throw Error(ErrorKind::InvalidArgument, "configuration needs n >= 1 and L >= 2");
        spins_.assign(static_cast<std::size_t>(n) * L, value);
    }

    /// Every slice equal to `slice`.
    static SpinConfiguration frozen(std::span<const std::int8_t> slice, int L) {
        SpinConfiguration c(static_cast<int>(slice.size()), L);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < c.n_; ++j) c.at(i, j) = slice[j];
        return c;
    }

    /// Decodes bit (i*n + j) of `bits` as spin -1 when set.
    static SpinConfiguration from_index(std::uint64_t bits, int n, int L) {
        SpinConfiguration c(n, L);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < n; ++j)
                c.at(i, j) = ((bits >> (i * n + j)) & 1U) ? -1 : 1;
        return c;
    }

    std::uint64_t to_index() const {
        std::uint64_t bits = 0;
        for (std::size_t k = 0; k < spins_.size(); ++k)
            if (spins_[k] < 0) bits |= std::uint64_t{1} << k;
        return bits;
    }

    int sites() const { return n_; }
    int slices() const { return L_; }

    std::int8_t operator()(int i, int j) const { return spins_[static_cast<std::size_t>(i) * n_ + j]; }
    std::int8_t& at(int i, int j) { return spins_[static_cast<std::size_t>(i) * n_ + j]; }
    void flip(int i, int j) { at(i, j) = static_cast<std::int8_t>(-at(i, j)); }

    std::span<const std::int8_t> slice(int i) const {
        return {spins_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
    }
    std::span<std::int8_t> slice(int i) {
        return {spins_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
    }

    /// Row-major +-1 bytes.
    const std::vector<std::int8_t>& data() const { return spins_; }

    /// Row-major bits (1 for spin -1), packed MSB-first into hex.
    std::string to_hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        unsigned nibble = 0;
        int filled = 0;
        for (auto s : spins_) {
            nibble = (nibble << 1) | (s < 0 ? 1U : 0U);
            if (++filled == 4) {
                out.push_back(digits[nibble]);
                nibble = 0;
                filled = 0;
            }
        }
        if (filled > 0) out.push_back(digits[nibble << (4 - filled)]);
        return out;
    }

    bool operator==(const SpinConfiguration&) const = default;

private:
    int n_ = 0;
    int L_ = 0;
    std::vector<std::int8_t> spins_;
};

/// Spin (+1 / -1) to basis bit (0 / 1).
inline int spin_bit(std::int8_t s) { return s > 0 ? 0 : 1; }

/// Effective imaginary-time coupling 1/2 ln coth(x), stable for small and large x.
inline double half_log_coth(double x) {
    if (!(x > 0.0)) throw Error(ErrorKind::DegenerateTemperature, "coupling argument must be > 0");
    const double t = std::exp(-2.0 * x);
    if (t < 0.5) return std::atanh(t);
    return 0.5 * (std::log1p(t) - std::log(-std::expm1(-2.0 * x)));
}

inline double effective_coupling(double beta, double gamma, int L) {
    if (L < 2) throw Error(ErrorKind::InvalidArgument, "L must be >= 2");
    if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be > 0");
    if (!(beta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be >= 0");
    const double x = beta * gamma / L;
    if (x == 0.0) throw Error(ErrorKind::DegenerateTemperature, "beta * gamma / L = 0; coupling is infinite");
    return half_log_coth(x);
}

namespace detail {

inline double log_cosh(double w) {
    if (w > 1.0) return w + std::log1p(std::exp(-2.0 * w)) - std::log(2.0);
    return std::log(std::cosh(w));
}

inline double log_sinh(double w) {
    if (w == 0.0) return kNegInf;
    if (w > 1.0) return w + std::log1p(-std::exp(-2.0 * w)) - std::log(2.0);
    return std::log(std::sinh(w));
}

/// exp(G) for an entrywise nonnegative 4x4 matrix. Every series term and
/// squaring step is nonnegative, so each entry keeps full relative precision
/// and structural zeros stay exactly zero.
inline Mat4 nonnegative_exp(const Mat4& g) {
    const double norm = g.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.25) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
    const Mat4 scaled = g / std::ldexp(1.0, squarings);
    Mat4 result = Mat4::Identity();
    Mat4 term = Mat4::Identity();
    for (int k = 1; k <= 30; ++k) {
        term = (term * scaled) / static_cast<double>(k);
        if (term.maxCoeff() == 0.0) break;
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

} // namespace detail

/// One commuting factor of an off-diagonal layer.
struct LayerFactor {
    int arity = 1;                  // 1 or 2
    std::array<int, 2> sites{0, 0}; // basis order within the factor
    std::array<double, 16> logElement{}; // [row * dim + col], dim = 2 << (arity - 1)
    int dim() const { return arity == 1 ? 2 : 4; }
};

/// Immutable (model, beta, L) bundle: precomputed diagonal couplings and
/// layer factors, evaluating log-weights and single-flip log-ratios.
class TrotterizedSystem {
public:
    TrotterizedSystem(const Model& model, double beta, int L)
        : TrotterizedSystem(to_local(model), beta, L, model.index() == 0 ? std::optional<TransverseIsingModel>(std::get<0>(model)) : std::nullopt) {}

    TrotterizedSystem(const LocalHamiltonian& h, double beta, int L,
                      std::optional<TransverseIsingModel> tim = std::nullopt)
        : n_(h.n), L_(L), beta_(beta), tim_(std::move(tim)) {
        if (n_ < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
        if (L < 2 || L % 2 != 0) throw Error(ErrorKind::InvalidArgument, "L must be even and >= 2");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be finite and >= 0");
        build_diagonal(h);
        build_layers(h);
        build_tables();
    }

    int sites() const { return n_; }
    int slices() const { return L_; }
    double beta() const { return beta_; }
    bool is_transverse_ising() const { return tim_.has_value(); }

    /// <z|diag(H)|z> for one slice.
    double diagonal_energy(std::span<const std::int8_t> z) const {
        double e = diagConstant_;
        for (int s = 0; s < n_; ++s) e += field_[s] * z[s];
        for (const auto& c : couplings_) e += c.value * z[c.a] * z[c.b];
        return e;
    }

    /// Change of diagonal_energy when spin s of slice z flips.
    double diagonal_flip_delta(std::span<const std::int8_t> z, int s) const {
        double local = field_[s];
        for (const auto& [t, k] : neighbours_[s]) local += k * z[t];
        return -2.0 * z[s] * local;
    }

    /// ln <from| exp(G_layer) |to>.
    double log_bond_element(int layer, std::span<const std::int8_t> from, std::span<const std::int8_t> to) const {
        double total = 0.0;
        for (const auto& f : layers_[layer]) {
            total += f.logElement[factor_index(f, from) * f.dim() + factor_index(f, to)];
            if (total == kNegInf) return kNegInf;
        }
        return total;
    }

    /// ln w(z).
    double log_weight(const SpinConfiguration& z) const {
        check_dims(z);
        if (!diagTable_.empty()) return log_weight_tabulated(z);
        double total = 0.0;
        for (int i = 0; i < L_; ++i) {
            total -= beta_ / L_ * diagonal_energy(z.slice(i));
            total += log_bond_element(i % 2, z.slice(i), z.slice((i + 1) % L_));
            if (total == kNegInf) return kNegInf;
        }
        return total;
    }

    /// ln[w(z') / w(z)] for z' = z with spin (i, j) flipped. Touches only the
    /// diagonal terms of site j in slice i and the two adjacent layer factors.
    double log_weight_ratio_single_flip(const SpinConfiguration& z, int i, int j) const {
        check_dims(z);
        if (i < 0 || i >= L_ || j < 0 || j >= n_) throw Error(ErrorKind::DimensionMismatch, "site outside lattice");
        const int prev = (i + L_ - 1) % L_;
        const int next = (i + 1) % L_;
        const auto zi = z.slice(i);
        double oldLog = 0.0;
        double newLog = 0.0;
        {
            const LayerFactor& f = layers_[prev % 2][factorOfSite_[prev % 2][j]];
            const auto zp = z.slice(prev);
            const int row = factor_index(f, zp);
            const int col = factor_index(f, zi);
            oldLog += f.logElement[row * f.dim() + col];
            newLog += f.logElement[row * f.dim() + (col ^ flip_mask(f, j))];
        }
        {
            const LayerFactor& f = layers_[i % 2][factorOfSite_[i % 2][j]];
            const auto zn = z.slice(next);
            const int row = factor_index(f, zi);
            const int col = factor_index(f, zn);
            oldLog += f.logElement[row * f.dim() + col];
            newLog += f.logElement[(row ^ flip_mask(f, j)) * f.dim() + col];
        }
        if (newLog == kNegInf) return kNegInf;
        if (oldLog == kNegInf) return kPosInf;
        const double diag = -beta_ / L_ * diagonal_flip_delta(zi, j);
        return diag + (newLog - oldLog);
    }

    /// Classical energy E_beta(z) of the transverse-field Ising mapping.
    double classical_energy_tim(const SpinConfiguration& z) const {
        if (!tim_) throw Error(ErrorKind::InvalidArgument, "system was not built from a transverse-field Ising model");
        check_dims(z);
        std::vector<double> coupling(n_);
        for (int j = 0; j < n_; ++j) coupling[j] = effective_coupling(beta_, tim_->gamma[j], L_);
        double e = 0.0;
        for (int i = 0; i < L_; ++i) {
            const auto zi = z.slice(i);
            const auto zn = z.slice((i + 1) % L_);
            for (int j = 0; j < n_; ++j) {
                e += tim_->kz[j] / L_ * zi[j];
                e -= coupling[j] / beta_ * zi[j] * zn[j];
            }
            for (const auto& [pair, value] : tim_->kzz) e += value / L_ * zi[pair.first] * zi[pair.second];
        }
        return e;
    }

    /// sup_z of diagonal_energy, bounded by the sum of coefficient magnitudes.
    double diagonal_energy_bound() const {
        double total = diagConstant_;
        for (double h : field_) total += std::abs(h);
        for (const auto& c : couplings_) total += std::abs(c.value);
        return total;
    }

    const std::vector<LayerFactor>& layer(int parity) const { return layers_[parity]; }

    /// Index of the factor holding site j in layer `parity`.
    int factor_of_site(int parity, int j) const { return factorOfSite_[parity][j]; }

private:
    static constexpr int kDiagonalTableSites = 14;
    static constexpr int kBondTableSites = 6;

    static std::uint32_t slice_code(std::span<const std::int8_t> z) {
        std::uint32_t code = 0;
        for (std::size_t s = 0; s < z.size(); ++s) code |= static_cast<std::uint32_t>(z[s] < 0) << s;
        return code;
    }

    double log_weight_tabulated(const SpinConfiguration& z) const {
        std::uint32_t codes[64];
        std::vector<std::uint32_t> heap;
        std::uint32_t* code = codes;
        if (L_ > 64) {
            heap.resize(L_);
            code = heap.data();
        }
        for (int i = 0; i < L_; ++i) code[i] = slice_code(z.slice(i));
        double diag = 0.0;
        for (int i = 0; i < L_; ++i) diag += diagTable_[code[i]];
        double total = -beta_ / L_ * diag;
        const std::size_t stride = std::size_t{1} << n_;
        for (int i = 0; i < L_; ++i) {
            const int next = i + 1 == L_ ? 0 : i + 1;
            if (!bondTable_[i % 2].empty()) {
                total += bondTable_[i % 2][code[i] * stride + code[next]];
            } else {
                total += log_bond_element(i % 2, z.slice(i), z.slice(next));
            }
            if (total == kNegInf) return kNegInf;
        }
        return total;
    }

    void build_tables() {
        if (n_ > kDiagonalTableSites) return;
        const std::size_t states = std::size_t{1} << n_;
        std::vector<std::int8_t> a(n_), b(n_);
        auto decode = [&](std::size_t code, std::vector<std::int8_t>& out) {
            for (int s = 0; s < n_; ++s) out[s] = ((code >> s) & 1U) ? -1 : 1;
        };
        diagTable_.resize(states);
        for (std::size_t c = 0; c < states; ++c) {
            decode(c, a);
            diagTable_[c] = diagonal_energy(a);
        }
        if (n_ > kBondTableSites) return;
        for (int parity = 0; parity < 2; ++parity) {
            bondTable_[parity].resize(states * states);
            for (std::size_t c = 0; c < states; ++c) {
                decode(c, a);
                for (std::size_t d = 0; d < states; ++d) {
                    decode(d, b);
                    bondTable_[parity][c * states + d] = log_bond_element(parity, a, b);
                }
            }
        }
    }

    struct Coupling {
        int a;
        int b;
        double value;
    };

    void check_dims(const SpinConfiguration& z) const {
        if (z.sites() != n_ || z.slices() != L_)
            throw Error(ErrorKind::DimensionMismatch, "configuration is " + std::to_string(z.slices()) + "x" +
                                                          std::to_string(z.sites()) + ", system is " +
                                                          std::to_string(L_) + "x" + std::to_string(n_));
    }

    static int factor_index(const LayerFactor& f, std::span<const std::int8_t> z) {
        if (f.arity == 1) return spin_bit(z[f.sites[0]]);
        return 2 * spin_bit(z[f.sites[0]]) + spin_bit(z[f.sites[1]]);
    }

    static int flip_mask(const LayerFactor& f, int site) {
        if (f.arity == 1) return 1;
        return f.sites[0] == site ? 2 : 1;
    }

    void build_diagonal(const LocalHamiltonian& h) {
        field_.assign(n_, 0.0);
        neighbours_.assign(n_, {});
        std::map<SitePair, double> pairs;
        for (const auto& t : h.sites) {
            diagConstant_ += 0.5 * (t.h(0, 0) + t.h(1, 1));
            field_[t.site] += 0.5 * (t.h(0, 0) - t.h(1, 1));
        }
        for (const auto& t : h.pairs) {
            const double d00 = t.h(0, 0), d01 = t.h(1, 1), d10 = t.h(2, 2), d11 = t.h(3, 3);
            diagConstant_ += 0.25 * (d00 + d01 + d10 + d11);
            field_[t.a] += 0.25 * (d00 + d01 - d10 - d11);
            field_[t.b] += 0.25 * (d00 - d01 + d10 - d11);
            const double k = 0.25 * (d00 - d01 - d10 + d11);
            if (k != 0.0) pairs[{std::min(t.a, t.b), std::max(t.a, t.b)}] += k;
        }
        for (const auto& [p, k] : pairs) {
            couplings_.push_back({p.first, p.second, k});
            neighbours_[p.first].emplace_back(p.second, k);
            neighbours_[p.second].emplace_back(p.first, k);
        }
    }

    static bool has_off_diagonal(const Mat4& m) {
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (r != c && m(r, c) != 0.0) return true;
        return false;
    }

    void build_layers(const LocalHamiltonian& h) {
        // Transverse strength t_s of the one-site terms; half goes to each layer.
        std::vector<double> transverse(n_, 0.0);
        for (const auto& t : h.sites) {
            if (t.h(0, 1) > 0.0) throw Error(ErrorKind::NonStoquastic, "positive one-site off-diagonal entry");
            transverse[t.site] -= t.h(0, 1);
        }
        const double perLayer = beta_ / L_;
        for (int parity = 0; parity < 2; ++parity) {
            factorOfSite_[parity].assign(n_, -1);
            for (const auto& t : h.pairs) {
                if (!has_off_diagonal(t.h)) continue;
                int a = t.a, b = t.b;
                Mat4 block = t.h;
                int bond;
                if (b == (a + 1) % n_) {
                    bond = a;
                } else if (a == (b + 1) % n_) {
                    // Reorder the block to the orientation (b, a).
                    Eigen::Matrix4d swap = Eigen::Matrix4d::Zero();
                    swap(0, 0) = swap(3, 3) = swap(1, 2) = swap(2, 1) = 1.0;
                    block = swap * block * swap;
                    std::swap(a, b);
                    bond = a;
                } else {
                    throw Error(ErrorKind::InvalidModel, "off-diagonal two-site term on non-adjacent sites");
                }
                if (bond % 2 != parity) continue;
                if (factorOfSite_[parity][a] >= 0 || factorOfSite_[parity][b] >= 0)
                    throw Error(ErrorKind::InvalidModel, "two bonds of one layer share a site");
                Mat4 g = Mat4::Zero();
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c) {
                        if (r == c) continue;
                        if (block(r, c) > 0.0) throw Error(ErrorKind::NonStoquastic, "positive two-site off-diagonal entry");
                        g(r, c) = -2.0 * perLayer * block(r, c);
                    }
                g += perLayer * transverse[a] * pauli::kron(pauli::x(), pauli::identity());
                g += perLayer * transverse[b] * pauli::kron(pauli::identity(), pauli::x());
                const Mat4 e = detail::nonnegative_exp(g);
                LayerFactor f;
                f.arity = 2;
                f.sites = {a, b};
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c) f.logElement[r * 4 + c] = detail::safe_log(e(r, c));
                factorOfSite_[parity][a] = factorOfSite_[parity][b] = static_cast<int>(layers_[parity].size());
                layers_[parity].push_back(f);
            }
            for (int s = 0; s < n_; ++s) {
                if (factorOfSite_[parity][s] >= 0) continue;
                const double w = perLayer * transverse[s];
                LayerFactor f;
                f.arity = 1;
                f.sites = {s, s};
                f.logElement[0] = f.logElement[3] = detail::log_cosh(w);
                f.logElement[1] = f.logElement[2] = detail::log_sinh(w);
                factorOfSite_[parity][s] = static_cast<int>(layers_[parity].size());
                layers_[parity].push_back(f);
            }
        }
    }

    int n_;
    int L_;
    double beta_;
    std::optional<TransverseIsingModel> tim_;
    double diagConstant_ = 0.0;
    std::vector<double> field_;
    std::vector<Coupling> couplings_;
    std::vector<std::vector<std::pair<int, double>>> neighbours_;
    std::array<std::vector<LayerFactor>, 2> layers_;
    std::array<std::vector<int>, 2> factorOfSite_;
    std::vector<double> diagTable_;                // diagonal energy by slice code
    std::array<std::vector<double>, 2> bondTable_; // ln layer element by (from, to) codes
};

/// Free-function forms of the system members.
inline double log_weight(const TrotterizedSystem& system, const SpinConfiguration& z) { return system.log_weight(z); }

inline double log_weight_ratio_single_flip(const TrotterizedSystem& system, const SpinConfiguration& z, int i, int j) {
    return system.log_weight_ratio_single_flip(z, i, j);
}

inline double classical_energy_tim(const TrotterizedSystem& system, const SpinConfiguration& z) {
    return system.classical_energy_tim(z);
}

} // namespace stoqpimc
