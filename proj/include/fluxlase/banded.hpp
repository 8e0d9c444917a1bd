#pragma once

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fluxlase/error.hpp"

namespace fluxlase {

/// Square band matrix in LAPACK general-band storage, with the extra kl rows
/// that the LU factorization needs for fill-in.
class BandMatrix {
public:
    BandMatrix(std::size_t n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1),
          ab_(static_cast<std::size_t>(ldab_) * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    int lower() const noexcept { return kl_; }
    int upper() const noexcept { return ku_; }

    bool in_band(std::size_t i, std::size_t j) const noexcept {
        const auto d = static_cast<long>(i) - static_cast<long>(j);
        return d <= kl_ && -d <= ku_;
    }

    double& operator()(std::size_t i, std::size_t j) noexcept {
        return ab_[index(i, j)];
    }
    double operator()(std::size_t i, std::size_t j) const noexcept {
        return ab_[index(i, j)];
    }

    /// y = A x
    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j0 = i > static_cast<std::size_t>(kl_) ? i - kl_ : 0;
            const std::size_t j1 = std::min(n_ - 1, i + ku_);
            for (std::size_t j = j0; j <= j1; ++j) y[i] += (*this)(i, j) * x[j];
        }
        return y;
    }

    /// Max absolute row sum (infinity norm).
    double norm_inf() const noexcept {
        double best = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double row = 0.0;
            const std::size_t j0 = i > static_cast<std::size_t>(kl_) ? i - kl_ : 0;
            const std::size_t j1 = std::min(n_ - 1, i + ku_);
            for (std::size_t j = j0; j <= j1; ++j) row += std::abs((*this)(i, j));
            best = std::max(best, row);
        }
        return best;
    }

    double* data() noexcept { return ab_.data(); }
    int ldab() const noexcept { return ldab_; }

private:
    std::size_t index(std::size_t i, std::size_t j) const noexcept {
        return static_cast<std::size_t>(kl_ + ku_) + i - j + j * static_cast<std::size_t>(ldab_);
    }

    std::size_t n_;
    int kl_;
    int ku_;
    int ldab_;
    std::vector<double> ab_;
};

/// Solves A x = b with partial pivoting (LAPACK dgbtrf/dgbtrs). Throws
/// SingularSystemError carrying the 1-norm condition estimate when the
/// factorization is singular or numerically so.
inline std::vector<double> solve_banded(BandMatrix a, std::span<const double> b) {
    const auto n = static_cast<lapack_int>(a.size());
    if (b.size() != a.size()) throw InvariantError("solve_banded: rhs length mismatch");

    double anorm = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double col = 0.0;
        const std::size_t i0 = j > static_cast<std::size_t>(a.upper()) ? j - a.upper() : 0;
        const std::size_t i1 = std::min(a.size() - 1, j + a.lower());
        for (std::size_t i = i0; i <= i1; ++i) col += std::abs(a(i, j));
        anorm = std::max(anorm, col);
    }

    std::vector<lapack_int> ipiv(a.size());
    const lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, a.lower(), a.upper(),
                                           a.data(), a.ldab(), ipiv.data());
    if (info < 0) throw InvariantError("solve_banded: illegal argument to dgbtrf");
    if (info > 0) throw SingularSystemError("banded system is exactly singular", 0.0);

    double rcond = 0.0;
    LAPACKE_dgbcon(LAPACK_COL_MAJOR, '1', n, a.lower(), a.upper(), a.data(), a.ldab(),
                   ipiv.data(), anorm, &rcond);
    if (!(rcond > 1e-15)) throw SingularSystemError("banded system is numerically singular", rcond);

    std::vector<double> x(b.begin(), b.end());
    LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, a.lower(), a.upper(), 1, a.data(), a.ldab(),
                   ipiv.data(), x.data(), n);
    return x;
}

}  // namespace fluxlase
