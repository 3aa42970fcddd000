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

// Row-computable real observables on the computational basis.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stoqpimc/error.hpp"
#include "stoqpimc/models.hpp"
#include "stoqpimc/oracle.hpp"

namespace stoqpimc {

/// Callback receiving one nonzero entry <z|O|y> of a row: (y, value).
using RowVisitor = std::function<void(std::span<const std::int8_t>, double)>;

/// A real operator given by its rows: visit(z, f) calls f(y, <z|O|y>) for
/// every nonzero entry of row z.
class SparseOperator {
public:
    using RowFunction = std::function<void(std::span<const std::int8_t>, const RowVisitor&)>;

    SparseOperator() = default;
    SparseOperator(int n, RowFunction rows, bool diagonal)
        : n_(n), rows_(std::move(rows)), diagonal_(diagonal) {}

    int sites() const { return n_; }
    bool is_diagonal() const { return diagonal_; }

    void visit_row(std::span<const std::int8_t> z, const RowVisitor& visitor) const { rows_(z, visitor); }

    /// <z|O|z>.
    double diagonal_element(std::span<const std::int8_t> z) const {
        double d = 0.0;
        visit_row(z, [&](std::span<const std::int8_t> y, double v) {
            if (std::equal(y.begin(), y.end(), z.begin())) d += v;
        });
        return d;
    }

private:
    int n_ = 0;
    RowFunction rows_;
    bool diagonal_ = true;
};

/// Product of Pauli letters ('X', 'Y', 'Z') on distinct sites times a real
/// coefficient. An even number of 'Y' letters keeps the product real.
struct PauliString {
    double coefficient = 1.0;
    std::vector<std::pair<int, char>> letters;
};

inline SparseOperator pauli_operator(int n, std::vector<PauliString> terms) {
    bool diagonal = true;
    for (const auto& t : terms) {
        int ys = 0;
        for (const auto& [site, letter] : t.letters) {
            if (site < 0 || site >= n) throw Error(ErrorKind::InvalidArgument, "Pauli site out of range");
            if (letter == 'Y') ++ys;
            else if (letter != 'X' && letter != 'Z') throw Error(ErrorKind::InvalidArgument, "unknown Pauli letter");
            if (letter != 'Z') diagonal = false;
        }
        if (ys % 2 != 0) throw Error(ErrorKind::InvalidArgument, "odd number of Y letters gives an imaginary operator");
    }
    auto rows = [terms = std::move(terms)](std::span<const std::int8_t> z, const RowVisitor& visit) {
        std::vector<std::int8_t> y(z.begin(), z.end());
        for (const auto& t : terms) {
            std::copy(z.begin(), z.end(), y.begin());
            double value = t.coefficient;
            int ys = 0;
            for (const auto& [site, letter] : t.letters) {
                if (letter == 'Z') {
                    value *= z[site];
                } else {
                    if (letter == 'Y') {
                        value *= z[site]; // <z|Y|zbar> = -i z
                        ++ys;
                    }
                    y[site] = static_cast<std::int8_t>(-y[site]);
                }
            }
            if ((ys / 2) % 2 == 1) value = -value; // (-i)^ys for even ys
            visit(y, value);
        }
    };
    return SparseOperator(n, std::move(rows), diagonal);
}

inline SparseOperator identity_operator(int n) { return pauli_operator(n, {PauliString{1.0, {}}}); }

/// The Hamiltonian itself as a row-computable operator.
inline SparseOperator local_operator(const LocalHamiltonian& h) {
    auto rows = [h](std::span<const std::int8_t> z, const RowVisitor& visit) {
        std::vector<std::int8_t> y(z.begin(), z.end());
        double diag = 0.0;
        for (const auto& t : h.sites) {
            const int c = spin_bit(z[t.site]);
            diag += t.h(c, c);
            const double off = t.h(1 - c, c);
            if (off != 0.0) {
                std::copy(z.begin(), z.end(), y.begin());
                y[t.site] = static_cast<std::int8_t>(-y[t.site]);
                visit(y, off);
            }
        }
        for (const auto& t : h.pairs) {
            const int c = 2 * spin_bit(z[t.a]) + spin_bit(z[t.b]);
            diag += t.h(c, c);
            for (int r = 0; r < 4; ++r) {
                if (r == c || t.h(r, c) == 0.0) continue;
                std::copy(z.begin(), z.end(), y.begin());
                y[t.a] = (r >> 1) ? -1 : 1;
                y[t.b] = (r & 1) ? -1 : 1;
                visit(y, t.h(r, c));
            }
        }
        visit(z, diag);
    };
    return SparseOperator(h.n, std::move(rows), false);
}

/// Operator from explicit entries keyed by (row, column) basis indices in the
/// dense oracle convention (site 0 is the most significant bit).
inline SparseOperator sparse_rows_operator(int n, const std::map<std::pair<std::uint64_t, std::uint64_t>, double>& entries) {
    if (n > 62) throw Error(ErrorKind::TooLarge, "sparse-rows operators need n <= 62");
    std::map<std::uint64_t, std::vector<std::pair<std::uint64_t, double>>> byRow;
    bool diagonal = true;
    for (const auto& [rc, v] : entries) {
        const auto limit = std::uint64_t{1} << n;
        if (rc.first >= limit || rc.second >= limit) throw Error(ErrorKind::InvalidArgument, "basis index out of range");
        byRow[rc.first].emplace_back(rc.second, v);
        if (rc.first != rc.second) diagonal = false;
    }
    auto rows = [n, byRow = std::move(byRow)](std::span<const std::int8_t> z, const RowVisitor& visit) {
        std::uint64_t index = 0;
        for (int s = 0; s < n; ++s) index = (index << 1) | static_cast<std::uint64_t>(spin_bit(z[s]));
        const auto it = byRow.find(index);
        if (it == byRow.end()) return;
        std::vector<std::int8_t> y(n);
        for (const auto& [col, v] : it->second) {
            for (int s = 0; s < n; ++s) y[s] = ((col >> (n - 1 - s)) & 1U) ? -1 : 1;
            visit(y, v);
        }
    };
    return SparseOperator(n, std::move(rows), diagonal);
}

/// Dense matrix of the operator in the oracle basis.
inline DenseOperator to_dense(const SparseOperator& op, const OracleLimits& limits = {}) {
    const int n = op.sites();
    if (n > limits.maxDenseSites) throw Error(ErrorKind::TooLarge, "operator too large for dense conversion");
    const auto dim = static_cast<Eigen::Index>(std::uint64_t{1} << n);
    DenseOperator out = DenseOperator::Zero(dim, dim);
    std::vector<std::int8_t> z(n);
    for (Eigen::Index row = 0; row < dim; ++row) {
        for (int s = 0; s < n; ++s) z[s] = ((static_cast<std::uint64_t>(row) >> (n - 1 - s)) & 1U) ? -1 : 1;
        op.visit_row(z, [&](std::span<const std::int8_t> y, double v) {
            Eigen::Index col = 0;
            for (int s = 0; s < n; ++s) col = (col << 1) | spin_bit(y[s]);
            out(row, col) += v;
        });
    }
    return out;
}

} // namespace stoqpimc
