#pragma once

#include <span>
#include <vector>

#include "qsmooth/core.hpp"
#include "qsmooth/lindblad.hpp"

// Backward-in-time propagation of the retrofiltered effect, in differential
// and map form, plus the co-diagonality oracle for one-step measurement
// operator sets.
//
// The effect norm is physically irrelevant; zeta shifts it and per-step
// renormalization keeps it bounded over long backward windows. The backward
// drift is the exact discrete adjoint of the forward linear filter step, so
// Tr[rho_F~ E_R] is conserved along a record to machine precision.

namespace qsmooth {

struct RetroConfig {
    double zeta = 0.0;
    bool renormalize_each_step = true;

    void validate() const {
        if (zeta < 0.0) throw config_error("RetroConfig: zeta must be >= 0");
    }
};

/// Map form of the effect across an observed jump: the pre-jump effect is
/// proportional to <g|E'|g> |e><e|.
inline Effect effect_jump_update(const Effect& e) {
    const double c = e.ground_component();
    if (c <= 0.0)
        throw degenerate_effect_error(
            "effect_jump_update: post-jump effect has no ground component");
    return Effect::from_matrix(c * pauli::proj_e);
}

/// One backward Euler step: given E at t+dt (and whether the observed record
/// holds a jump at that boundary), produce E at t.
inline Effect effect_backward_step(const Effect& e, bool alice_jump,
                                   const ModelParams& p, const RetroConfig& cfg,
                                   double dt) {
    cfg.validate();
    if (alice_jump) {
        Effect out = effect_jump_update(e);
        return cfg.renormalize_each_step ? out.normalized() : out;
    }
    const Mat2& m = e.matrix();
    Mat2 incr = detail::unobserved_adjoint_dissipator(p, m) + cfg.zeta * m;
    const double delta = p.effective_delta();
    if (delta > 0.0) {
        Mat2 coc = delta * pauli::proj_e;
        incr -= 0.5 * (coc * m + m * coc);
    }
    Effect out = [&] {
        try {
            return Effect::from_matrix(m + dt * incr);
        } catch (const validation_error& err) {
            throw numerical_error(std::string("effect_backward_step: ") + err.what());
        }
    }();
    return cfg.renormalize_each_step ? out.normalized() : out;
}

/// Diagonal-component form of the same backward step: one Euler step of
///   dE_g/ds = eps (E_e - E_g) + zeta E_g
///   dE_e/ds = gamma (E_g - E_e) - delta E_e + zeta E_e
/// in backward time s. Matches effect_backward_step on diagonal inputs.
inline std::pair<double, double> classical_effect_backward_step(
    double e_excited, double e_ground, const ModelParams& p,
    const RetroConfig& cfg, double dt) {
    cfg.validate();
    const double de = p.gamma * (e_ground - e_excited) -
                      p.effective_delta() * e_excited + cfg.zeta * e_excited;
    const double dg = p.epsilon * (e_excited - e_ground) + cfg.zeta * e_ground;
    double ee = e_excited + dt * de;
    double eg = e_ground + dt * dg;
    if (ee < 0.0 || eg < 0.0)
        throw numerical_error("classical_effect_backward_step: negative component");
    if (cfg.renormalize_each_step) {
        const double s = ee + eg;
        if (s <= 0.0)
            throw degenerate_effect_error("classical_effect_backward_step: zero effect");
        ee = 2.0 * ee / s;
        eg = 2.0 * eg / s;
    }
    return {ee, eg};
}

/// Forward Euler step of the unnormalized (linear) filtering map. The jump
/// branch applies X -> s- X s+ with no rate prefactor; the matching effect
/// jump is E -> <g|E|g>|e><e| = s+ E s-, its exact adjoint, and the drift
/// branches are adjoint as well.
inline Mat2 filtered_linear_step(const Mat2& x, bool alice_jump,
                                 const ModelParams& p, double dt) {
    if (alice_jump) return pauli::minus * x * pauli::plus;
    Mat2 incr = detail::unobserved_dissipator(p, x);
    const double delta = p.effective_delta();
    if (delta > 0.0) {
        Mat2 coc = delta * pauli::proj_e;
        incr -= 0.5 * (coc * x + x * coc);
    }
    return x + dt * incr;
}

/// Tr[rho_F~ E_R]; constant along a record when both sides are propagated
/// with the paired linear maps above (zeta = 0, no renormalization).
inline double forward_backward_trace(const Mat2& rho_unnormalized,
                                     const Effect& e) {
    return (rho_unnormalized * e.matrix()).trace().real();
}

// ---------------------------------------------------------------------------
// Co-diagonality oracle

struct CodiagonalityReport {
    bool codiagonal = false;
    double max_column_violation = 0.0;  // |T_ik T~_jk| for i != j, worst case
    double completeness_defect = 0.0;
    double filtered_offdiag = 0.0;  // one forward map step from diagonal input
    double retro_offdiag = 0.0;     // one backward map step from diagonal input
};

/// Checks whether one step of {M_o M_u}_u preserves diagonality in the z
/// basis: every column of each product must have at most one nonzero entry
/// (T_ik T*_jk proportional to delta_ij). Also applies one forward filter map
/// and one backward effect map to fixed diagonal inputs and reports the
/// off-diagonals they generate.
inline CodiagonalityReport codiagonality_oracle(
    const MeasurementOperator& m_o, std::span<const MeasurementOperator> m_u,
    double tolerance = 1e-10) {
    if (completeness_defect(m_u) > tol::completeness)
        throw validation_error(
            "codiagonality_oracle: unobserved operator set is not complete");
    CodiagonalityReport rep;
    rep.completeness_defect = completeness_defect(m_u);
    for (const auto& mu : m_u) {
        const Mat2 prod = m_o.m * mu.m;
        for (int col = 0; col < 2; ++col) {
            const double v = std::abs(prod(0, col)) * std::abs(prod(1, col));
            rep.max_column_violation = std::max(rep.max_column_violation, v);
        }
    }
    const Mat2 diag_state = (Mat2() << 0.3, 0, 0, 0.7).finished();
    const Mat2 diag_effect = (Mat2() << 1.4, 0, 0, 0.2).finished();
    Mat2 filt = Mat2::Zero();
    Mat2 retro = Mat2::Zero();
    for (const auto& mu : m_u) {
        const Mat2 prod = m_o.m * mu.m;
        filt += prod * diag_state * prod.adjoint();
        retro += prod.adjoint() * diag_effect * prod;
    }
    rep.filtered_offdiag = std::max(std::abs(filt(0, 1)), std::abs(filt(1, 0)));
    rep.retro_offdiag = std::max(std::abs(retro(0, 1)), std::abs(retro(1, 0)));
    rep.codiagonal = rep.max_column_violation <= tolerance;
    return rep;
}

/// Alice's no-click operator over one step (exact square-root form).
inline MeasurementOperator alice_no_click_operator(const ModelParams& p,
                                                   double dt) {
    const double delta = p.effective_delta();
    Mat2 m = pauli::identity;
    m(0, 0) = std::sqrt(std::max(0.0, 1.0 - delta * dt));
    return {m};
}

inline MeasurementOperator alice_click_operator(const ModelParams& p, double dt) {
    return {Mat2(std::sqrt(p.delta * dt) * pauli::minus)};
}

/// Bob's photon-counting outcome set for one step: exactly complete because
/// the no-click operator is the matrix square root of 1 - dt sum c^dag c,
/// which is diagonal here.
inline std::vector<MeasurementOperator> bob_photon_operators(const ModelParams& p,
                                                             double dt) {
    Mat2 no_click = Mat2::Zero();
    no_click(0, 0) = std::sqrt(std::max(0.0, 1.0 - p.gamma * dt));
    no_click(1, 1) = std::sqrt(std::max(0.0, 1.0 - p.epsilon * dt));
    return {{no_click},
            {Mat2(std::sqrt(p.gamma * dt) * pauli::minus)},
            {Mat2(std::sqrt(p.epsilon * dt) * pauli::plus)}};
}

/// Binary +/- discretization of the two homodyne currents, linear in the
/// Kraus amplitude: M_{s1 s2} = (1 - dt/2 sum c^dag c + s1 sqrt(dt) c_g +
/// s2 sqrt(dt) c_e)/2. Complete to O(dt^2); pass a small dt.
inline std::vector<MeasurementOperator> bob_homodyne_operators(
    const ModelParams& p, double dt, const HomodyneConfig& cfg = {}) {
    const Mat2 cg = std::sqrt(p.gamma) * std::polar(1.0, cfg.phi_gamma) * pauli::minus;
    const Mat2 ce =
        std::sqrt(p.epsilon) * std::polar(1.0, cfg.phi_epsilon) * pauli::plus;
    const Mat2 drift =
        pauli::identity - 0.5 * dt * (cg.adjoint() * cg + ce.adjoint() * ce);
    std::vector<MeasurementOperator> out;
    const double root_dt = std::sqrt(dt);
    for (double s1 : {1.0, -1.0})
        for (double s2 : {1.0, -1.0})
            out.push_back({Mat2(0.5 * (drift + s1 * root_dt * cg + s2 * root_dt * ce))});
    return out;
}

} // namespace qsmooth
