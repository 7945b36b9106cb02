#pragma once

#include <array>
#include <optional>
#include <vector>

#include "qsmooth/core.hpp"
#include "qsmooth/lindblad.hpp"
#include "qsmooth/rng.hpp"

// Adaptive-scheme machinery: weak-local-oscillator (WLO) operators, the
// constraint system defining the cyclic three-state physically realizable
// ensemble (PRE), a damped Gauss-Newton least-squares solver for the WLO
// amplitudes, eigenstate extraction of the PRE angles, and the stationary
// occupation probabilities of the cycle.
//
// Conventions: jump operators carry the channel rates inside,
// sigma'_- = sqrt(gamma) s- + mu_-, sigma'_+ = sqrt(eps) s+ + mu_+, so WLO
// amplitudes are in sqrt(rate) units with gamma as the unit rate. The cycle
// order is alpha -> phi -> beta -> alpha.

namespace qsmooth {

/// Real WLO amplitudes added to the emission (mu_minus) and absorption
/// (mu_plus) channels while a given PRE state is occupied.
struct WloSettings {
    double mu_minus = 0.0;
    double mu_plus = 0.0;
};

using TriWlo = std::array<WloSettings, 3>;
using TriAngle = std::array<double, 3>;

/// Effective no-jump Hamiltonian and primed jump operators for one WLO entry.
struct AdaptiveOperators {
    Mat2 h_eff;        // non-Hermitian
    Mat2 sigma_minus;  // sqrt(gamma) s- + mu_-
    Mat2 sigma_plus;   // sqrt(eps) s+ + mu_+
};

/// H'_eff = -(i/2)(gamma s+s- + eps s-s+ + 2 sqrt(gamma) mu_- s-
///                 + 2 sqrt(eps) mu_+ s+ + mu_-^2 + mu_+^2).
/// Valid with Alice's channel excluded (delta -> 0).
inline AdaptiveOperators build_operators(const WloSettings& w,
                                         const ModelParams& p) {
    p.validate();
    const double sg = std::sqrt(p.gamma);
    const double se = std::sqrt(p.epsilon);
    Mat2 k = p.gamma * pauli::proj_e + p.epsilon * pauli::proj_g +
             2.0 * sg * w.mu_minus * pauli::minus +
             2.0 * se * w.mu_plus * pauli::plus +
             (w.mu_minus * w.mu_minus + w.mu_plus * w.mu_plus) * pauli::identity;
    AdaptiveOperators ops;
    ops.h_eff = complex(0.0, -0.5) * k;
    ops.sigma_minus = sg * pauli::minus + w.mu_minus * pauli::identity;
    ops.sigma_plus = se * pauli::plus + w.mu_plus * pauli::identity;
    return ops;
}

/// Max deviation, over a Hermitian basis, of
///   -i(H'_eff X - X H'_eff^dag) + s'_- X s'_-^dag + s'_+ X s'_+^dag
/// from the unconditional generator D[c_u]X. Zero means the unravelling
/// reproduces the master equation.
inline double unravelling_defect(const AdaptiveOperators& ops,
                                 const ModelParams& p) {
    const LindbladSet cu = LindbladSet::unobserved(p);
    const std::array<Mat2, 4> basis = {pauli::identity, pauli::x, pauli::y,
                                       pauli::z};
    double worst = 0.0;
    for (const Mat2& x : basis) {
        Mat2 lhs = complex(0, -1) * (ops.h_eff * x - x * ops.h_eff.adjoint()) +
                   ops.sigma_minus * x * ops.sigma_minus.adjoint() +
                   ops.sigma_plus * x * ops.sigma_plus.adjoint();
        worst = std::max(worst, (lhs - dissipator(cu, x)).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// 18 residuals, 6 per state in cycle order: Re/Im of <th_i^orth|H'|th_i>
/// (eigenstate condition), then Re/Im of <next^orth|s'_-|th_i> and of
/// <next^orth|s'_+|th_i> (cyclic jump conditions). All vanish iff the
/// ensemble is exactly cyclic-physically-realizable.
inline std::array<double, 18> constraint_residuals(const TriAngle& angles,
                                                   const TriWlo& wlos,
                                                   const ModelParams& p) {
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            double d = std::remainder(angles[i] - angles[j], two_pi);
            if (std::abs(d) < 1e-9)
                throw validation_error("constraint_residuals: degenerate states");
        }
    std::array<double, 18> r{};
    static constexpr int next[3] = {1, 2, 0};
    int k = 0;
    for (int i = 0; i < 3; ++i) {
        const AdaptiveOperators ops = build_operators(wlos[i], p);
        const Vec2 ket = circle_ket(angles[i]);
        const Vec2 own_orth = circle_ket_orth(angles[i]);
        const Vec2 nxt_orth = circle_ket_orth(angles[next[i]]);
        const complex eig = own_orth.dot(ops.h_eff * ket);
        const complex jm = nxt_orth.dot(ops.sigma_minus * ket);
        const complex jp = nxt_orth.dot(ops.sigma_plus * ket);
        r[k++] = eig.real();
        r[k++] = eig.imag();
        r[k++] = jm.real();
        r[k++] = jm.imag();
        r[k++] = jp.real();
        r[k++] = jp.imag();
    }
    return r;
}

inline double residual_norm(const TriAngle& angles, const TriWlo& wlos,
                            const ModelParams& p) {
    auto r = constraint_residuals(angles, wlos, p);
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
}

struct WloSolveOptions {
    bool refine_angles = false;  // also optimize the three angles
    int max_iterations = 200;
    double residual_tol = 1e-8;
    double jacobian_step = 1e-6;  // central differences
};

struct WloSolveResult {
    TriWlo wlos;
    TriAngle angles;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd pack(const TriAngle& a, const TriWlo& w, bool with_angles) {
    Eigen::VectorXd x(with_angles ? 9 : 6);
    int k = 0;
    if (with_angles)
        for (int i = 0; i < 3; ++i) x[k++] = a[i];
    for (int i = 0; i < 3; ++i) {
        x[k++] = w[i].mu_minus;
        x[k++] = w[i].mu_plus;
    }
    return x;
}

inline void unpack(const Eigen::VectorXd& x, bool with_angles, TriAngle& a,
                   TriWlo& w) {
    int k = 0;
    if (with_angles)
        for (int i = 0; i < 3; ++i) a[i] = x[k++];
    for (int i = 0; i < 3; ++i) {
        w[i].mu_minus = x[k++];
        w[i].mu_plus = x[k++];
    }
}

} // namespace detail

/// Damped Gauss-Newton (Levenberg-Marquardt style) least squares on
/// constraint_residuals. By default only the six WLO amplitudes are free and
/// the angles are held fixed; with refine_angles the angles are optimized
/// jointly, which is required to drive the residual to ~1e-8 when the input
/// angles are only known to a few significant figures.
inline WloSolveResult solve_wlo(const TriAngle& angles, const ModelParams& p,
                                const TriWlo& guess,
                                const WloSolveOptions& opt = {}) {
    TriAngle a = angles;
    TriWlo w = guess;
    Eigen::VectorXd x = detail::pack(a, w, opt.refine_angles);
    const int n = static_cast<int>(x.size());

    auto eval = [&](const Eigen::VectorXd& xv) -> Eigen::VectorXd {
        TriAngle aa = a;
        TriWlo ww;
        detail::unpack(xv, opt.refine_angles, aa, ww);
        auto r = constraint_residuals(aa, ww, p);
        return Eigen::Map<Eigen::VectorXd>(r.data(), 18);
    };

    Eigen::VectorXd r = eval(x);
    double cost = r.squaredNorm();
    double lambda = 1e-4;
    WloSolveResult out;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (std::sqrt(cost) < opt.residual_tol) break;
        Eigen::MatrixXd jac(18, n);
        for (int j = 0; j < n; ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += opt.jacobian_step;
            xm[j] -= opt.jacobian_step;
            jac.col(j) = (eval(xp) - eval(xm)) / (2.0 * opt.jacobian_step);
        }
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd jtr = jac.transpose() * r;
        bool stepped = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::MatrixXd m = jtj;
            m.diagonal().array() += lambda;
            Eigen::VectorXd dx = m.ldlt().solve(-jtr);
            Eigen::VectorXd xn = x + dx;
            Eigen::VectorXd rn = eval(xn);
            if (rn.squaredNorm() < cost) {
                x = xn;
                r = rn;
                cost = rn.squaredNorm();
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) break;  // stuck; report best found
    }
    detail::unpack(x, opt.refine_angles, a, w);
    out.angles = a;
    for (double& th : out.angles) th = std::fmod(std::fmod(th, two_pi) + two_pi, two_pi);
    out.wlos = w;
    out.residual = std::sqrt(cost);
    out.iterations = it;
    out.converged = out.residual < opt.residual_tol;
    return out;
}

/// Candidate circle angles of the real eigenvectors of H'_eff for one WLO
/// entry (0, 1 or 2 candidates; complex pairs yield none).
inline std::vector<double> eigen_angle_candidates(const WloSettings& w,
                                                  const ModelParams& p) {
    // H'_eff = -(i/2) K with K real; eigenvectors of K are those of H'_eff.
    const double s = w.mu_minus * w.mu_minus + w.mu_plus * w.mu_plus;
    const double k00 = p.gamma + s;
    const double k01 = 2.0 * std::sqrt(p.epsilon) * w.mu_plus;
    const double k10 = 2.0 * std::sqrt(p.gamma) * w.mu_minus;
    const double k11 = p.epsilon + s;
    const double tr = k00 + k11;
    const double det = k00 * k11 - k01 * k10;
    const double disc = tr * tr / 4.0 - det;
    if (disc < -1e-14) return {};
    const double root = std::sqrt(std::max(0.0, disc));
    std::vector<double> out;
    for (double lam : {tr / 2.0 - root, tr / 2.0 + root}) {
        // (K - lam) v = 0; pick the better-conditioned row
        double v0, v1;
        if (std::abs(k00 - lam) + std::abs(k01) >
            std::abs(k10) + std::abs(k11 - lam)) {
            v0 = -k01;
            v1 = k00 - lam;
        } else {
            v0 = k11 - lam;
            v1 = -k10;
        }
        if (std::abs(v0) + std::abs(v1) < 1e-300) continue;
        double th = 2.0 * std::atan2(v1, v0);
        th = std::fmod(std::fmod(th, two_pi) + two_pi, two_pi);
        out.push_back(th);
    }
    return out;
}

/// For each state, the eigenvector of its no-jump operator on the x-z circle,
/// selected as the combination most consistent with the cyclic jump
/// conditions. Throws when a state has no real-amplitude eigenvector.
inline TriAngle pre_states_from_wlo(const TriWlo& wlos, const ModelParams& p) {
    std::array<std::vector<double>, 3> cands;
    for (int i = 0; i < 3; ++i) {
        cands[i] = eigen_angle_candidates(wlos[i], p);
        if (cands[i].empty())
            throw numerical_error(
                "pre_states_from_wlo: no real-amplitude eigenvector for state " +
                std::to_string(i));
    }
    TriAngle best{};
    double best_norm = -1.0;
    for (double t0 : cands[0])
        for (double t1 : cands[1])
            for (double t2 : cands[2]) {
                TriAngle a{t0, t1, t2};
                double nrm;
                try {
                    nrm = residual_norm(a, wlos, p);
                } catch (const validation_error&) {
                    continue;  // degenerate combination
                }
                if (best_norm < 0.0 || nrm < best_norm) {
                    best_norm = nrm;
                    best = a;
                }
            }
    if (best_norm < 0.0)
        throw numerical_error("pre_states_from_wlo: all candidates degenerate");
    return best;
}

/// Total jump rate out of each PRE state, r = <th| s'_-^dag s'_- +
/// s'_+^dag s'_+ |th>.
inline std::array<double, 3> cycle_exit_rates(const TriAngle& angles,
                                              const TriWlo& wlos,
                                              const ModelParams& p) {
    std::array<double, 3> r{};
    for (int i = 0; i < 3; ++i) {
        const AdaptiveOperators ops = build_operators(wlos[i], p);
        const Vec2 ket = circle_ket(angles[i]);
        const Mat2 total = ops.sigma_minus.adjoint() * ops.sigma_minus +
                           ops.sigma_plus.adjoint() * ops.sigma_plus;
        r[i] = ket.dot(total * ket).real();
    }
    return r;
}

/// Stationary occupations of the cyclic jump chain: wp proportional to the
/// mean holding time 1/r.
inline ClassicalBelief occupations(const TriAngle& angles, const TriWlo& wlos,
                                   const ModelParams& p) {
    auto r = cycle_exit_rates(angles, wlos, p);
    std::vector<double> w(3);
    for (int i = 0; i < 3; ++i) {
        if (r[i] <= 0.0)
            throw numerical_error("occupations: zero exit rate (degenerate cycle)");
        w[i] = 1.0 / r[i];
    }
    return ClassicalBelief::normalized(std::move(w));
}

/// delta * epsilon << (gamma + epsilon)^2, with the strict threshold 0.01.
/// True when the filtered state equilibrates between consecutive observed
/// jumps, the regime in which the adaptive scheme is defined.
inline bool regime_check(const ModelParams& p) {
    const double ge = p.gamma + p.epsilon;
    return p.effective_delta() * p.epsilon < 0.01 * ge * ge;
}

/// Three pure-state angles, their occupations, and the WLO settings that pin
/// them. The occupation-weighted mixture must reproduce the filtered steady
/// state diag(eps, gamma)/(gamma+eps).
struct PreEnsemble {
    TriAngle angles{};
    std::array<double, 3> occupation{};
    TriWlo wlos{};

    DensityMatrix state(int i) const { return pure_state_on_circle(angles[i]); }

    DensityMatrix mixture() const {
        Mat2 m = Mat2::Zero();
        for (int i = 0; i < 3; ++i) m += occupation[i] * state(i).matrix();
        return DensityMatrix::from_matrix(m);
    }

    static PreEnsemble validated(const TriAngle& angles, const TriWlo& wlos,
                                 const ModelParams& p) {
        PreEnsemble e;
        e.angles = angles;
        e.wlos = wlos;
        const ClassicalBelief occ = occupations(angles, wlos, p);
        for (int i = 0; i < 3; ++i) e.occupation[i] = occ[i];
        const double ge = p.gamma + p.epsilon;
        Mat2 target = (p.epsilon * pauli::proj_e + p.gamma * pauli::proj_g) / ge;
        if ((e.mixture().matrix() - target).cwiseAbs().maxCoeff() > 1e-6)
            throw validation_error(
                "PreEnsemble: occupation mixture does not match the filtered "
                "steady state within 1e-6");
        return e;
    }
};

/// Full pipeline: joint Gauss-Newton solve (angles refined), then occupation
/// extraction and the steady-state mixture validation.
inline PreEnsemble solve_cyclic_pre(const TriAngle& angle_guess,
                                    const TriWlo& wlo_guess,
                                    const ModelParams& p,
                                    const WloSolveOptions& base_opt = {}) {
    WloSolveOptions opt = base_opt;
    opt.refine_angles = true;
    WloSolveResult res = solve_wlo(angle_guess, p, wlo_guess, opt);
    if (!res.converged)
        throw numerical_error("solve_cyclic_pre: solver stalled at residual " +
                              std::to_string(res.residual));
    return PreEnsemble::validated(res.angles, res.wlos, p);
}

/// Multistart search: the supplied seed plus n_random uniform draws in
/// [-amplitude_range, amplitude_range]^6. Returns every distinct converged
/// solution (angles compared modulo 2pi within 1e-4).
inline std::vector<WloSolveResult> multistart_solve(
    const ModelParams& p, const TriWlo& seed, int n_random,
    std::uint64_t rng_seed, double amplitude_range = 1.0) {
    std::vector<WloSolveResult> found;
    RngStream rng(rng_seed);
    auto try_one = [&](const TriWlo& w0) {
        TriAngle a0;
        try {
            a0 = pre_states_from_wlo(w0, p);
        } catch (const error&) {
            return;
        }
        WloSolveOptions opt;
        opt.refine_angles = true;
        WloSolveResult res = solve_wlo(a0, p, w0, opt);
        if (!res.converged) return;
        for (const auto& f : found) {
            double d = 0.0;
            for (int i = 0; i < 3; ++i)
                d += std::abs(std::remainder(f.angles[i] - res.angles[i], two_pi));
            if (d < 1e-4) return;  // duplicate
        }
        found.push_back(res);
    };
    try_one(seed);
    for (int k = 0; k < n_random; ++k) {
        TriWlo w0;
        for (auto& w : w0) {
            w.mu_minus = (2.0 * rng.uniform() - 1.0) * amplitude_range;
            w.mu_plus = (2.0 * rng.uniform() - 1.0) * amplitude_range;
        }
        try_one(w0);
    }
    return found;
}

} // namespace qsmooth
