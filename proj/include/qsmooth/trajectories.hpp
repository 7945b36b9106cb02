#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qsmooth/core.hpp"
#include "qsmooth/fpe.hpp"
#include "qsmooth/lindblad.hpp"
#include "qsmooth/pre_solver.hpp"
#include "qsmooth/rng.hpp"

// Measurement-record sampling and forward propagation of true and filtered
// states, for Alice's photon detection combined with each of Bob's three
// monitoring schemes (photon counting, X-homodyne, adaptive WLO).
//
// The delta -> 0 limit is handled by simulating inter-jump dynamics with
// delta = 0; the observed jump that terminates a window is imposed as a
// conditioning event, not sampled.

namespace qsmooth {

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    double dt = 1e-3;

    static TimeGrid make(double t_start, double t_end, double dt) {
        TimeGrid g{t_start, t_end, dt};
        g.validate();
        return g;
    }

    void validate() const {
        if (dt <= 0.0) throw config_error("TimeGrid: dt must be > 0");
        if (t_end <= t_start) throw config_error("TimeGrid: t_end <= t_start");
        const double steps = (t_end - t_start) / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
            throw config_error("TimeGrid: span is not a whole number of steps");
    }

    std::size_t n_steps() const {
        return static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
    }

    double time(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
};

enum class Scheme { photon, homodyne, adaptive };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::photon: return "photon";
        case Scheme::homodyne: return "homodyne";
        case Scheme::adaptive: return "adaptive";
    }
    return "?";
}

/// Time-gridded observed and unobserved increments for one trajectory.
struct TrajectoryRecord {
    Scheme scheme = Scheme::photon;
    TimeGrid grid;
    std::vector<std::uint8_t> alice_jump;    // observed; all zero when delta -> 0
    // photon / adaptive schemes
    std::vector<std::uint8_t> bob_jump_gamma;
    std::vector<std::uint8_t> bob_jump_epsilon;
    // homodyne scheme
    std::vector<double> dw_gamma;
    std::vector<double> dw_epsilon;
    std::vector<double> current_gamma;    // J dt, the observable record
    std::vector<double> current_epsilon;
};

/// d wp_F(g)/dt between observed jumps:
/// gamma (1-p_g) - eps p_g + delta (1-p_g) p_g.
inline double filtered_ode_rhs(const ModelParams& p, double p_g) {
    if (p_g < 0.0 || p_g > 1.0)
        throw validation_error("filtered_ode_rhs: p_g outside [0,1]");
    return p.gamma * (1.0 - p_g) - p.epsilon * p_g +
           p.effective_delta() * (1.0 - p_g) * p_g;
}

/// One Euler step of Alice's filtering equation. A jump collapses to the
/// ground state exactly; between jumps the unobserved channels act as a
/// dissipator plus the no-jump drift of the observed channel.
inline DensityMatrix alice_filter_step(const DensityMatrix& rho_f,
                                       bool alice_jump, const ModelParams& p,
                                       double dt) {
    if (alice_jump) {
        if (rho_f.excited_population() <= 0.0)
            throw impossible_jump_error(
                "alice_filter_step: jump from a state with no excited population");
        return ground_state;
    }
    const Mat2& m = rho_f.matrix();
    Mat2 incr = detail::unobserved_dissipator(p, m);
    const double delta = p.effective_delta();
    if (delta > 0.0) {
        Mat2 coc = delta * pauli::proj_e;
        incr -= 0.5 * superop_H(coc, m);
    }
    return DensityMatrix::from_matrix(m + dt * incr);
}

/// One step of the true state when Bob photon-detects both of his channels.
/// Jump flags project exactly; with no flags the drift leaves the ground and
/// excited states unchanged.
inline DensityMatrix bob_photon_true_step(const DensityMatrix& rho_t,
                                          bool alice_jump, bool jump_gamma,
                                          bool jump_epsilon,
                                          const ModelParams& p, double dt) {
    if (alice_jump || jump_gamma) {
        if (rho_t.excited_population() <= 0.0)
            throw impossible_jump_error("bob_photon_true_step: emission from ground");
        if (jump_epsilon) return excited_state;  // re-excited within the same step
        return ground_state;
    }
    if (jump_epsilon) {
        if (rho_t.ground_population() <= 0.0)
            throw impossible_jump_error("bob_photon_true_step: absorption from excited");
        return excited_state;
    }
    const Mat2& m = rho_t.matrix();
    // the no-jump drift vanishes identically at the basis states
    if (m(0, 1) == complex(0.0) && m(1, 0) == complex(0.0) &&
        (m(0, 0).real() == 0.0 || m(1, 1).real() == 0.0))
        return rho_t;
    Mat2 incr = -0.5 * superop_H(Mat2(p.gamma * pauli::proj_e), m) -
                0.5 * superop_H(Mat2(p.epsilon * pauli::proj_g), m);
    const double delta = p.effective_delta();
    if (delta > 0.0) incr -= 0.5 * superop_H(Mat2(delta * pauli::proj_e), m);
    return DensityMatrix::from_matrix(m + dt * incr);
}

/// One Euler-Maruyama step of the normalized diffusive equation for the true
/// state under X-homodyne monitoring of both unobserved channels (delta -> 0).
/// The state is projected back onto the Bloch ball when the discrete step
/// overshoots; gross overshoot or collapse of the record likelihood raises.
inline DensityMatrix bob_homodyne_true_step(const DensityMatrix& rho_t,
                                            double dw_gamma, double dw_epsilon,
                                            const ModelParams& p,
                                            const HomodyneConfig& cfg,
                                            double dt) {
    const Mat2& m = rho_t.matrix();
    const Mat2 cg = std::sqrt(p.gamma) * std::polar(1.0, cfg.phi_gamma) * pauli::minus;
    const Mat2 ce = std::sqrt(p.epsilon) * std::polar(1.0, cfg.phi_epsilon) * pauli::plus;

    // likelihood factor of this record increment; <= 0 means dt is too large
    const double xg = (cg * m + m * cg.adjoint()).trace().real();
    const double xe = (ce * m + m * ce.adjoint()).trace().real();
    if (1.0 + xg * dw_gamma + xe * dw_epsilon <= 0.0)
        throw numerical_error(
            "bob_homodyne_true_step: record weight collapsed; reduce dt");

    Mat2 stepped = m + dt * detail::unobserved_dissipator(p, m) +
                   superop_H(cg, m) * dw_gamma + superop_H(ce, m) * dw_epsilon;
    stepped = 0.5 * (stepped + stepped.adjoint().eval());
    stepped /= stepped.trace().real();

    BlochVector r{(stepped * pauli::x).trace().real(),
                  (stepped * pauli::y).trace().real(),
                  (stepped * pauli::z).trace().real()};
    const double n = r.norm();
    if (n > 1.05)
        throw numerical_error("bob_homodyne_true_step: step overshoot |r| = " +
                              std::to_string(n) + "; reduce dt");
    if (n > 1.0) {
        r.x /= n;
        r.y /= n;
        r.z /= n;
    }
    return DensityMatrix::from_bloch(r);
}

/// Measurement current increment J_k dt = <c_k e^{i phi} + c_k^dag e^{-i phi}>
/// dt + dW_k for one channel.
enum class HomodyneChannel { gamma, epsilon };

inline double homodyne_current(const DensityMatrix& rho_t, HomodyneChannel ch,
                               const HomodyneConfig& cfg, double dw, double dt,
                               const ModelParams& p) {
    const bool g = ch == HomodyneChannel::gamma;
    const Mat2 c = g ? Mat2(std::sqrt(p.gamma) * pauli::minus)
                     : Mat2(std::sqrt(p.epsilon) * pauli::plus);
    const double phi = g ? cfg.phi_gamma : cfg.phi_epsilon;
    const complex ph = std::polar(1.0, phi);
    const double mean =
        ((c * ph + c.adjoint() * std::conj(ph)) * rho_t.matrix()).trace().real();
    return mean * dt + dw;
}

/// One step of the circle-angle Langevin equation (delta -> 0, X-homodyne):
/// theta' = theta + A dt + B_g dW_g + B_e dW_e, reduced mod 2pi.
inline double theta_langevin_step(double theta, double dw_gamma,
                                  double dw_epsilon, const ModelParams& p,
                                  double dt) {
    const double sn = std::sin(theta);
    const double cs = std::cos(theta);
    const double drift = sn * (0.5 * (p.gamma + p.epsilon) * cs +
                               (p.gamma - p.epsilon));
    const double bg = std::sqrt(p.gamma) * (1.0 + cs);
    const double be = -std::sqrt(p.epsilon) * (1.0 - cs);
    double t = theta + drift * dt + bg * dw_gamma + be * dw_epsilon;
    t = std::fmod(t, two_pi);
    return t < 0.0 ? t + two_pi : t;
}

/// Cycle index update for the adaptive scheme: any detection on either of
/// Bob's detectors advances alpha -> phi -> beta -> alpha.
inline int adaptive_true_step(int state_index, bool jump_minus, bool jump_plus,
                              const PreEnsemble& pre, double /*dt*/) {
    (void)pre;
    if (state_index < 0 || state_index > 2)
        throw validation_error("adaptive_true_step: index out of range");
    int idx = state_index;
    if (jump_minus) idx = (idx + 1) % 3;
    if (jump_plus) idx = (idx + 1) % 3;
    return idx;
}

/// Per-step detection probabilities (dt * <s'^dag s'>) at a PRE state.
inline std::pair<double, double> adaptive_jump_probabilities(
    int state_index, const PreEnsemble& pre, const ModelParams& p, double dt) {
    const AdaptiveOperators ops = build_operators(pre.wlos[state_index], p);
    const Vec2 ket = circle_ket(pre.angles[state_index]);
    const double rm = ket.dot(ops.sigma_minus.adjoint() * ops.sigma_minus * ket).real();
    const double rp = ket.dot(ops.sigma_plus.adjoint() * ops.sigma_plus * ket).real();
    return {rm * dt, rp * dt};
}

struct Trajectory {
    TrajectoryRecord record;
    std::vector<DensityMatrix> true_path;      // n_steps + 1 entries
    std::vector<DensityMatrix> filtered_path;  // n_steps + 1 entries
    std::vector<int> adaptive_index;           // adaptive scheme only
};

struct SampleOptions {
    std::optional<DensityMatrix> init_true;      // default: ground state
    std::optional<DensityMatrix> init_filtered;  // default: init_true
    std::optional<int> init_adaptive_index;      // default: drawn from occupations
    const PreEnsemble* pre = nullptr;            // required for Scheme::adaptive
    HomodyneConfig homodyne;
    bool with_filtered = true;  // false leaves filtered_path empty
};

/// Sample one trajectory: the record, the true-state path, and the filtered
/// path, deterministically from (scheme, params, grid, seed). Jump channels
/// are sampled by thinning with one uniform per channel per step, which
/// requires every per-step jump probability to stay below 0.1.
inline Trajectory sample_trajectory(Scheme scheme, const ModelParams& p,
                                    const TimeGrid& grid, std::uint64_t seed,
                                    const SampleOptions& opt = {}) {
    p.validate();
    grid.validate();
    if (p.effective_delta() > 0.0)
        throw config_error(
            "sample_trajectory: only the delta -> 0 limit is supported; the "
            "observed jump is a conditioning event, not sampled");
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt;

    auto check_rate = [&](double prob_per_step, const char* what) {
        if (prob_per_step > 0.1)
            throw config_error(std::string("sample_trajectory: per-step ") + what +
                               " probability " + std::to_string(prob_per_step) +
                               " > 0.1; reduce dt");
    };

    RngStream rng = RngStream::substream(seed, 0);
    Trajectory tr;
    tr.record.scheme = scheme;
    tr.record.grid = grid;
    tr.record.alice_jump.assign(n, 0);

    DensityMatrix rho_t = opt.init_true.value_or(ground_state);
    DensityMatrix rho_f = opt.init_filtered.value_or(
        opt.init_true.value_or(ground_state));
    tr.true_path.reserve(n + 1);
    if (opt.with_filtered) {
        tr.filtered_path.reserve(n + 1);
        tr.filtered_path.push_back(rho_f);
    }
    auto advance_filtered = [&] {
        if (!opt.with_filtered) return;
        rho_f = alice_filter_step(rho_f, false, p, dt);
        tr.filtered_path.push_back(rho_f);
    };

    switch (scheme) {
        case Scheme::photon: {
            check_rate(p.gamma * dt, "gamma-jump");
            check_rate(p.epsilon * dt, "epsilon-jump");
            tr.record.bob_jump_gamma.assign(n, 0);
            tr.record.bob_jump_epsilon.assign(n, 0);
            tr.true_path.push_back(rho_t);
            for (std::size_t i = 0; i < n; ++i) {
                const double pg = p.gamma * rho_t.excited_population() * dt;
                const double pe = p.epsilon * rho_t.ground_population() * dt;
                const bool jg = rng.uniform() < pg;
                const bool je = rng.uniform() < pe;
                tr.record.bob_jump_gamma[i] = jg;
                tr.record.bob_jump_epsilon[i] = je;
                rho_t = bob_photon_true_step(rho_t, false, jg, je, p, dt);
                advance_filtered();
                tr.true_path.push_back(rho_t);
            }
            break;
        }
        case Scheme::homodyne: {
            tr.record.dw_gamma.assign(n, 0.0);
            tr.record.dw_epsilon.assign(n, 0.0);
            tr.record.current_gamma.assign(n, 0.0);
            tr.record.current_epsilon.assign(n, 0.0);
            tr.true_path.push_back(rho_t);
            for (std::size_t i = 0; i < n; ++i) {
                const double wg = rng.wiener(dt);
                const double we = rng.wiener(dt);
                tr.record.dw_gamma[i] = wg;
                tr.record.dw_epsilon[i] = we;
                tr.record.current_gamma[i] = homodyne_current(
                    rho_t, HomodyneChannel::gamma, opt.homodyne, wg, dt, p);
                tr.record.current_epsilon[i] = homodyne_current(
                    rho_t, HomodyneChannel::epsilon, opt.homodyne, we, dt, p);
                rho_t = bob_homodyne_true_step(rho_t, wg, we, p, opt.homodyne, dt);
                advance_filtered();
                tr.true_path.push_back(rho_t);
            }
            break;
        }
        case Scheme::adaptive: {
            if (opt.pre == nullptr)
                throw config_error("sample_trajectory: adaptive scheme needs a PreEnsemble");
            const PreEnsemble& pre = *opt.pre;
            for (int s = 0; s < 3; ++s) {
                auto [pm, pp] = adaptive_jump_probabilities(s, pre, p, dt);
                check_rate(pm, "adaptive minus-jump");
                check_rate(pp, "adaptive plus-jump");
            }
            tr.record.bob_jump_gamma.assign(n, 0);
            tr.record.bob_jump_epsilon.assign(n, 0);
            int idx;
            if (opt.init_adaptive_index) {
                idx = *opt.init_adaptive_index;
                if (idx < 0 || idx > 2)
                    throw config_error("sample_trajectory: adaptive index out of range");
            } else {
                const double u = rng.uniform();
                idx = u < pre.occupation[0]
                          ? 0
                          : (u < pre.occupation[0] + pre.occupation[1] ? 1 : 2);
            }
            const std::array<DensityMatrix, 3> states = {
                pre.state(0), pre.state(1), pre.state(2)};
            std::array<std::pair<double, double>, 3> jump_prob;
            for (int s = 0; s < 3; ++s)
                jump_prob[s] = adaptive_jump_probabilities(s, pre, p, dt);
            tr.adaptive_index.reserve(n + 1);
            tr.adaptive_index.push_back(idx);
            tr.true_path.push_back(states[idx]);
            for (std::size_t i = 0; i < n; ++i) {
                const auto [pm, pp] = jump_prob[idx];
                const bool jm = rng.uniform() < pm;
                const bool jp = rng.uniform() < pp;
                tr.record.bob_jump_gamma[i] = jm;
                tr.record.bob_jump_epsilon[i] = jp;
                idx = adaptive_true_step(idx, jm, jp, pre, dt);
                advance_filtered();
                tr.adaptive_index.push_back(idx);
                tr.true_path.push_back(states[idx]);
            }
            break;
        }
    }
    return tr;
}

} // namespace qsmooth
