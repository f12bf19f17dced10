#pragma once
/// \file support.hpp
/// Shared helpers for the unit tests: seeded random series and jets.

#include <cmath>
#include <functional>
#include <random>

#include "kam/fourier.hpp"
#include "kam/jet.hpp"

namespace kamtest {

using namespace kam;

/// Random series with |f(k)| <= amp e^{-rho |k|_1}; reality-symmetric when `real` (scalar only).
inline FourierSeries random_series(std::mt19937_64& rng, int d, int N, double amp, double rho, int rows = 1,
                                   int cols = 1) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FourierSeries f(d, N, rows, cols);
    for (std::size_t q = 0; q < f.num_modes(); ++q) {
        const double w = amp * std::exp(-rho * norm_l1(f.mode(q)));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) f.raw(q, r, c) = cplx(u(rng), u(rng)) * w;
    }
    return f;
}

/// Random real jet: every monomial of weighted degree <= max_deg with
/// coefficients of size amp e^{-rho|k|_1}, made real by symmetrisation.
inline HamiltonianJet random_jet(std::mt19937_64& rng, int d, int n, int N, double amp, double rho,
                                 int max_deg = 4, int min_deg = 0) {
    HamiltonianJet P(d, n, 4, -1);
    // enumerate exponent vectors of total weighted degree <= max_deg
    const int m = d + 2 * n;
    std::vector<int> e(m, 0);
    std::function<void(int, int)> rec = [&](int pos, int budget) {
        if (pos == m) {
            Signature s = make_signature(d, n);
            for (int i = 0; i < d; ++i) s.a[i] = e[i];
            for (int j = 0; j < n; ++j) s.b[j] = e[d + j], s.c[j] = e[d + n + j];
            const int w = s.weighted_degree();
            if (w >= min_deg && w <= max_deg) P.add(s, random_series(rng, d, N, amp, rho));
            return;
        }
        const int cost = pos < d ? 2 : 1;
        for (int v = 0; v * cost <= budget; ++v) {
            e[pos] = v;
            rec(pos + 1, budget - v * cost);
        }
        e[pos] = 0;
    };
    rec(0, max_deg);
    return symmetrize_reality(P);
}

}  // namespace kamtest

#include "kam/homological.hpp"

namespace kamtest {

/// Lattice operator D + S on `region` with diagonal offsets_j + <k, omega> and a
/// random Hermitian Toeplitz symbol of size eps e^{-rho|k|} (cutoff `cutoff`).
inline LatticeMatrix random_operator(std::mt19937_64& rng, std::vector<Index> region, const RealVec& omega,
                                     const RealVec& offsets, double eps, double rho, int cutoff) {
    const int d = static_cast<int>(omega.size());
    const int n = static_cast<int>(offsets.size());
    LatticeMatrix T;
    T.d = d;
    T.block = n;
    T.region = std::move(region);
    T.omega = omega;
    T.offsets = offsets;
    FourierSeries A = random_series(rng, d, cutoff, eps, rho, n, n);
    T.symbol = A + adjoint(A);
    T.symbol *= cplx(0.5, 0.0);
    T.decay_s = rho;
    T.decay_c = symbol_decay_constant(T.symbol, rho);
    return T;
}

/// Golden-type frequency vector of dimension d.
inline RealVec golden_omega(int d) {
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    if (d == 1) return RealVec{phi};
    RealVec w(d);
    for (int i = 0; i < d; ++i) w[i] = std::pow(phi, i);
    return w;
}

}  // namespace kamtest
