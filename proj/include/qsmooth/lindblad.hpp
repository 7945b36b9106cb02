#pragma once

#include <vector>

#include "qsmooth/core.hpp"

// Unconditional dynamics and the superoperator toolbox shared by every
// conditioned equation: the dissipator D, the jump superoperators G / G~ and
// the drift superoperators H / H~.

namespace qsmooth {

/// Ordered jump operators with rates folded in (units sqrt(rate)).
struct LindbladSet {
    std::vector<Mat2> ops;

    /// The model's three channels: (sqrt(delta) s-, sqrt(gamma) s-, sqrt(eps) s+).
    static LindbladSet for_model(const ModelParams& p) {
        p.validate();
        return LindbladSet{{std::sqrt(p.effective_delta()) * pauli::minus,
                            std::sqrt(p.gamma) * pauli::minus,
                            std::sqrt(p.epsilon) * pauli::plus}};
    }

    /// Bob's channels only (gamma and epsilon), used in the delta -> 0 limit.
    static LindbladSet unobserved(const ModelParams& p) {
        p.validate();
        return LindbladSet{{std::sqrt(p.gamma) * pauli::minus,
                            std::sqrt(p.epsilon) * pauli::plus}};
    }
};

/// D[c]X = sum_l (c_l X c_l^dag - {c_l^dag c_l, X}/2). Traceless.
inline Mat2 dissipator(const LindbladSet& cs, const Mat2& x) {
    Mat2 out = Mat2::Zero();
    for (const Mat2& c : cs.ops) {
        Mat2 cdc = c.adjoint() * c;
        out += c * x * c.adjoint() - 0.5 * (cdc * x + x * cdc);
    }
    return out;
}

inline Mat2 dissipator(const LindbladSet& cs, const DensityMatrix& rho) {
    return dissipator(cs, rho.matrix());
}

/// Adjoint dissipator D^dag[c]X = sum_l (c_l^dag X c_l - {c_l^dag c_l, X}/2),
/// the generator acting on effects.
inline Mat2 adjoint_dissipator(const LindbladSet& cs, const Mat2& x) {
    Mat2 out = Mat2::Zero();
    for (const Mat2& c : cs.ops) {
        Mat2 cdc = c.adjoint() * c;
        out += c.adjoint() * x * c - 0.5 * (cdc * x + x * cdc);
    }
    return out;
}

namespace detail {

// Closed forms of the two-channel (gamma, epsilon) dissipators, used in the
// per-step hot paths. Must agree with dissipator(LindbladSet::unobserved(p))
// and its adjoint; a unit test pins the equivalence.
inline Mat2 unobserved_dissipator(const ModelParams& p, const Mat2& m) {
    const double g = p.gamma, e = p.epsilon;
    Mat2 out;
    out(0, 0) = e * m(1, 1) - g * m(0, 0);
    out(1, 1) = -out(0, 0);
    out(0, 1) = -0.5 * (g + e) * m(0, 1);
    out(1, 0) = -0.5 * (g + e) * m(1, 0);
    return out;
}

inline Mat2 unobserved_adjoint_dissipator(const ModelParams& p, const Mat2& m) {
    const double g = p.gamma, e = p.epsilon;
    Mat2 out;
    out(0, 0) = g * (m(1, 1) - m(0, 0));
    out(1, 1) = e * (m(0, 0) - m(1, 1));
    out(0, 1) = -0.5 * (g + e) * m(0, 1);
    out(1, 0) = -0.5 * (g + e) * m(1, 0);
    return out;
}

} // namespace detail

/// d p_g / dt for the unconditioned rate equation:
/// (delta + gamma)(1 - p_g) - epsilon p_g.
inline double classical_rate_rhs(const ModelParams& p, double p_g) {
    return (p.effective_delta() + p.gamma) * (1.0 - p_g) - p.epsilon * p_g;
}

/// G[a]rho = a rho a^dag / Tr[a rho a^dag] - rho.
/// Throws impossible_jump_error when the jump has zero probability.
inline Mat2 superop_G(const Mat2& a, const Mat2& rho) {
    Mat2 ara = a * rho * a.adjoint();
    const double tr = ara.trace().real();
    if (tr <= 0.0)
        throw impossible_jump_error("superop_G: Tr[a rho a^dag] <= 0");
    return ara / tr - rho;
}

/// H[a]rho = sum_k (a_k rho + rho a_k^dag - Tr[a_k rho + rho a_k^dag] rho).
/// Traceless by construction.
inline Mat2 superop_H(std::span<const Mat2> as, const Mat2& rho) {
    Mat2 out = Mat2::Zero();
    for (const Mat2& a : as) {
        Mat2 lin = a * rho + rho * a.adjoint();
        out += lin - lin.trace().real() * rho;
    }
    return out;
}

inline Mat2 superop_H(const Mat2& a, const Mat2& rho) {
    return superop_H(std::span<const Mat2>(&a, 1), rho);
}

/// Linear (unnormalized) counterparts.
inline Mat2 superop_G_tilde(const Mat2& a, const Mat2& x) {
    return a * x * a.adjoint() - x;
}

inline Mat2 superop_H_tilde(std::span<const Mat2> as, const Mat2& x) {
    Mat2 out = Mat2::Zero();
    for (const Mat2& a : as) out += a * x + x * a.adjoint();
    return out;
}

inline Mat2 superop_H_tilde(const Mat2& a, const Mat2& x) {
    return superop_H_tilde(std::span<const Mat2>(&a, 1), x);
}

/// One explicit RK4 step of d rho / dt = D[c] rho.
inline DensityMatrix master_equation_rk4_step(const LindbladSet& cs,
                                              const DensityMatrix& rho,
                                              double dt) {
    const Mat2& m = rho.matrix();
    Mat2 k1 = dissipator(cs, m);
    Mat2 k2 = dissipator(cs, Mat2(m + 0.5 * dt * k1));
    Mat2 k3 = dissipator(cs, Mat2(m + 0.5 * dt * k2));
    Mat2 k4 = dissipator(cs, Mat2(m + dt * k3));
    return DensityMatrix::from_matrix(m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Unconditional solution rho(t0 + duration) by repeated RK4 steps.
inline DensityMatrix solve_master_equation(const LindbladSet& cs,
                                           DensityMatrix rho, double duration,
                                           double dt) {
    if (dt <= 0.0) throw config_error("solve_master_equation: dt must be > 0");
    long n = std::lround(duration / dt);
    for (long i = 0; i < n; ++i) rho = master_equation_rk4_step(cs, rho, dt);
    return rho;
}

} // namespace qsmooth
