// Acceptance suite: one line per criterion, pinned tolerances, nonzero exit
// on any failure. Heavier Monte Carlo pieces share fixed seeds so the run is
// reproducible.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "qsmooth/qsmooth.hpp"

using namespace qsmooth;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool pass, const std::string& detail) {
    std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", number,
                name, detail.c_str());
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

struct Shared {
    ModelParams p;
    TimeGrid grid;
    std::vector<Effect> effects;
    ClassicalCurves classical;
    double classical_seconds = 0.0;
    PreEnsemble pre;
    ThetaDistribution stationary = ThetaDistribution::uniform(2);
    FpeConfig fpe_cfg;
};

Shared make_shared_state() {
    Shared s;
    s.p.gamma = 1.0;
    s.p.epsilon = 0.05;
    ScenarioConfig cfg;  // defaults: window 10/(gamma+eps), dt 1e-3
    s.grid = cfg.grid();
    const auto t0 = std::chrono::steady_clock::now();
    s.effects = retro_effect_path(s.p, s.grid);
    s.classical = compute_classical_curves(s.p, s.grid, s.effects);
    s.classical_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    s.pre = default_pre_ensemble(s.p);
    s.fpe_cfg.n_points = 512;
    s.stationary = stationary_theta_density(s.p, s.fpe_cfg);
    return s;
}

// inverse-CDF draw from a grid density
double sample_theta(const ThetaDistribution& d, double u) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double cell = d[j] * d.dtheta();
        if (acc + cell >= u)
            return d.theta(j) + (u - acc) / std::max(cell, 1e-300) * d.dtheta();
        acc += cell;
    }
    return two_pi - 1e-12;
}

void criterion_1_2_3(const Shared& s) {
    const double pe = s.p.epsilon / (s.p.gamma + s.p.epsilon);
    bool filtered_flat = true;
    for (double v : s.classical.wp_f_e)
        filtered_flat = filtered_flat && std::abs(v - pe) < 1e-3;
    const double final_smoothed = s.classical.wp_s_e.back();
    report(1, "classical smoothed excitation reaches unity",
           final_smoothed >= 0.99 && filtered_flat && s.classical_seconds < 10.0,
           fmt("wp_S(e;0-) = %.6f, filtered flat = %d, runtime %.2fs",
               final_smoothed, filtered_flat ? 1 : 0, s.classical_seconds));

    const double min_ps = *std::min_element(s.classical.purity_s.begin(),
                                            s.classical.purity_s.end());
    const double pf_target = 1.0 - 2.0 * pe * (1.0 - pe);
    bool pf_flat = true;
    for (double v : s.classical.purity_f)
        pf_flat = pf_flat && std::abs(v - pf_target) < 1e-3;
    report(2, "classical smoothed purity dips through maximally mixed",
           std::abs(min_ps - 0.5) <= 0.02 && pf_flat,
           fmt("min purity_S = %.4f, filtered purity flat = %d", min_ps,
               pf_flat ? 1 : 0));

    std::size_t violations = 0;
    for (std::size_t i = 0; i < s.classical.cost_s.size(); ++i)
        if (s.classical.cost_s[i] > s.classical.cost_f[i]) ++violations;
    report(3, "smoothed cost dominates the filtered cost at every time",
           violations == 0, fmt("%zu violations", violations));
}

void criterion_4(const Shared& s) {
    const SchemeCurve hom = compute_homodyne_curve(s.effects, s.stationary);
    const double z_cl = 2.0 * s.classical.wp_s_e.back() - 1.0;
    const double z_hom = hom.bloch.back().z;
    double max_x = 0.0, max_y = 0.0;
    for (const auto& b : hom.bloch) {
        max_x = std::max(max_x, std::abs(b.x));
        max_y = std::max(max_y, std::abs(b.y));
    }

    // weak-equivalence check: Langevin ensemble vs the finite-difference
    // solution, both from the preset Gaussian initial condition
    FpeSolver solver(s.p, s.fpe_cfg);
    const double ge = s.p.gamma + s.p.epsilon;
    const std::array<double, 3> checks = {0.5 / ge, 2.0 / ge, 5.0 / ge};
    const double dt = 1e-3;
    const std::size_t n_paths = 100000;
    const std::size_t n_bins = 128;
    std::vector<std::array<double, 3>> thetas(n_paths);
    run_chunked<int>(
        n_paths, 0,
        [&](std::size_t i, int&) {
            RngStream rng = RngStream::substream(2024, i);
            double th = std::numbers::pi +
                        std::sqrt(s.fpe_cfg.init_variance) * rng.gaussian();
            double t = 0.0;
            for (std::size_t c = 0; c < checks.size(); ++c) {
                while (t < checks[c] - dt / 2) {
                    th = theta_langevin_step(th, rng.wiener(dt), rng.wiener(dt),
                                             s.p, dt);
                    t += dt;
                }
                thetas[i][c] = th;
            }
        },
        [](int&, const int&) {});

    ThetaDistribution fd = solver.initial();
    double t_now = 0.0;
    double worst_l1 = 0.0;
    for (std::size_t c = 0; c < checks.size(); ++c) {
        fd = solver.evolve(fd, checks[c] - t_now);
        t_now = checks[c];
        // rebin both to n_bins
        std::vector<double> hist(n_bins, 0.0), ref(n_bins, 0.0);
        for (std::size_t i = 0; i < n_paths; ++i) {
            auto b = static_cast<std::size_t>(thetas[i][c] / two_pi * n_bins);
            hist[std::min(b, n_bins - 1)] += 1.0;
        }
        const double bin_w = two_pi / n_bins;
        for (double& h : hist) h /= n_paths * bin_w;
        const std::size_t per = fd.size() / n_bins;
        for (std::size_t b = 0; b < n_bins; ++b)
            for (std::size_t k = 0; k < per; ++k) ref[b] += fd[b * per + k] / per;
        double l1 = 0.0;
        for (std::size_t b = 0; b < n_bins; ++b)
            l1 += std::abs(hist[b] - ref[b]) * bin_w;
        worst_l1 = std::max(worst_l1, l1);
    }

    // the pre-jump value must sit strictly between the steady state and +1
    const double z_ss = -(s.p.gamma - s.p.epsilon) / ge;
    const bool between = z_hom > z_ss && z_hom < 1.0;
    const bool pass = std::abs(z_hom - z_cl) > 0.1 && max_x < 1e-3 &&
                      max_y < 1e-3 && worst_l1 < 0.05 && between;
    report(4, "homodyne smoothing differs from classical smoothing", pass,
           fmt("|z_hom - z_cl| = %.3f, z_hom(0-) = %.3f, max|x| = %.2e, "
               "max|y| = %.2e, L1(FPE, MC) = %.3f",
               std::abs(z_hom - z_cl), z_hom, max_x, max_y, worst_l1));
}

void criterion_5(const Shared& s) {
    const AdaptiveCurve ad = compute_adaptive_curve(s.effects, s.pre);
    const double x_final = ad.bloch.back().x;
    double min_weight = 1.0;
    for (const auto& w : ad.weights)
        for (double v : w) min_weight = std::min(min_weight, v);
    const bool pass = std::abs(x_final) > 0.01 && min_weight >= -1e-6;
    report(5, "adaptive smoothed state leaves the z axis, stays in the triangle",
           pass,
           fmt("x_S(0-) = %.4f, min barycentric weight = %.2e", x_final,
               min_weight));
}

void criterion_6(const Shared& s) {
    const SchemeCurve hom = compute_homodyne_curve(s.effects, s.stationary);
    const AdaptiveCurve ad = compute_adaptive_curve(s.effects, s.pre);
    const auto& cl = s.classical.cost_s;
    const double tol = 1e-9;
    std::size_t ordered = 0;
    std::ptrdiff_t first_violation = -1;
    bool contiguous = true;
    for (std::size_t i = 0; i < cl.size(); ++i) {
        const bool ok = hom.cost[i] <= ad.cost[i] + tol && ad.cost[i] <= cl[i] + tol;
        if (ok) {
            ++ordered;
            if (first_violation >= 0) contiguous = false;  // a gap after a violation
        } else if (first_violation < 0) {
            first_violation = static_cast<std::ptrdiff_t>(i);
        }
    }
    const double frac = static_cast<double>(ordered) / cl.size();
    const double t_first =
        first_violation >= 0 ? s.grid.time(first_violation) : 0.0;
    std::string xover = "crossovers:";
    for (auto [name, a, b] :
         {std::tuple{" hom/adap", &hom.cost, &ad.cost},
          std::tuple{" adap/cl", &ad.cost, &cl},
          std::tuple{" hom/cl", &hom.cost, &cl}}) {
        xover += name;
        for (double t : crossover_times(s.grid, *a, *b)) xover += fmt(" %.4f", t);
    }
    const bool pass = frac > 0.5 && contiguous;
    report(6, "cost ordering homodyne <= adaptive <= classical, terminal flip",
           pass,
           fmt("ordered fraction %.3f, reversal starts %.4f, %s", frac, t_first,
               xover.c_str()));
}

void criterion_7(const Shared& s) {
    const TriWlo seed = reference_wlo_seed();
    WloSolveOptions opt;
    opt.refine_angles = true;
    const TriAngle angles0 = pre_states_from_wlo(seed, s.p);
    const WloSolveResult res = solve_wlo(angles0, s.p, seed, opt);
    double max_amp_diff = 0.0;
    for (int i = 0; i < 3; ++i) {
        max_amp_diff = std::max(max_amp_diff,
                                std::abs(res.wlos[i].mu_minus - seed[i].mu_minus));
        max_amp_diff = std::max(max_amp_diff,
                                std::abs(res.wlos[i].mu_plus - seed[i].mu_plus));
    }
    const ClassicalBelief occ = occupations(res.angles, res.wlos, s.p);
    Mat2 mix = Mat2::Zero();
    for (int i = 0; i < 3; ++i)
        mix += occ[i] * pure_state_on_circle(res.angles[i]).matrix();
    const Mat2 target = (s.p.epsilon * pauli::proj_e + s.p.gamma * pauli::proj_g) /
                        (s.p.gamma + s.p.epsilon);
    const double mix_err = (mix - target).cwiseAbs().maxCoeff();
    const bool pass =
        res.converged && res.residual < 1e-8 && max_amp_diff < 1e-3 &&
        mix_err < 1e-6;
    report(7, "adaptive-scheme solve recovers the reference amplitudes", pass,
           fmt("residual %.2e, max amplitude diff %.2e, mixture error %.2e",
               res.residual, max_amp_diff, mix_err));
}

void criterion_8(const Shared&) {
    ModelParams p;
    p.gamma = 1.0;
    p.epsilon = 0.05;
    p.delta = 0.4;
    p.delta_zero_limit = false;
    const TimeGrid grid = TimeGrid::make(0.0, 3.0, 1e-3);
    RetroConfig rc;
    rc.renormalize_each_step = false;

    const auto oracle = codiagonality_oracle(alice_no_click_operator(p, 1e-6),
                                             bob_photon_operators(p, 1e-6));

    double max_offdiag = 0.0;
    double worst_trace_drift = 0.0;
    for (int rec = 0; rec < 100; ++rec) {
        RngStream rng(9000 + rec);
        std::vector<std::uint8_t> jumps(grid.n_steps(), 0);
        DensityMatrix rho_f = ground_state;
        std::vector<Mat2> lin(grid.n_steps() + 1);
        lin[0] = ground_state.matrix();
        for (std::size_t i = 0; i < jumps.size(); ++i) {
            jumps[i] = rng.uniform() < p.delta * rho_f.excited_population() * grid.dt;
            rho_f = alice_filter_step(rho_f, jumps[i], p, grid.dt);
            max_offdiag = std::max(max_offdiag,
                                   std::abs(rho_f.matrix()(0, 1)));
            lin[i + 1] = filtered_linear_step(lin[i], jumps[i], p, grid.dt);
        }
        Effect e = Effect::identity();
        const double base = forward_backward_trace(lin[grid.n_steps()], e);
        for (std::size_t i = grid.n_steps(); i-- > 0;) {
            e = effect_backward_step(e, jumps[i], p, rc, grid.dt);
            max_offdiag = std::max(max_offdiag, std::abs(e.matrix()(0, 1)));
            worst_trace_drift = std::max(
                worst_trace_drift,
                std::abs(forward_backward_trace(lin[i], e) / base - 1.0));
        }
    }
    const bool pass = oracle.codiagonal && max_offdiag < 1e-10 &&
                      worst_trace_drift < 1e-6;
    report(8, "co-diagonality holds along records, trace is conserved", pass,
           fmt("oracle %d, max off-diagonal %.2e, trace drift %.2e",
               oracle.codiagonal ? 1 : 0, max_offdiag, worst_trace_drift));
}

void criterion_9(const Shared& s) {
    // (a) forward-backward smoothing vs exhaustive enumeration, chain length 8
    HmmModel m{(Eigen::MatrixXd(2, 2) << 0.9, 0.1, 0.25, 0.75).finished()};
    RngStream rng(404);
    LikelihoodPath lik;
    for (int t = 0; t < 8; ++t) {
        Eigen::VectorXd l(2);
        l << 0.05 + 0.95 * rng.uniform(), 0.05 + 0.95 * rng.uniform();
        lik.push_back(l);
    }
    const auto prior = ClassicalBelief::from_vector({0.7, 0.3});
    const auto sm = classical_hmm_smooth(
        classical_hmm_filter(m, prior, lik), classical_hmm_retrofilter(m, lik));
    const auto brute = oracles::enumerate_smoothed(m.transition, {0.7, 0.3}, lik);
    double hmm_err = 0.0;
    for (std::size_t t = 0; t < sm.size(); ++t)
        hmm_err = std::max(hmm_err, std::abs(sm[t][0] - brute[t][0]));

    // the true-state law is stationary across the window, so Monte Carlo
    // runs can start at the earliest checkpoint instead of the full window
    const double ge = s.p.gamma + s.p.epsilon;
    const double dt = s.grid.dt;
    const auto steps_of = [&](double t_back) {
        return static_cast<std::size_t>(std::llround(t_back / (ge * dt)));
    };
    const std::size_t n_short = steps_of(3.0);
    const TimeGrid short_grid =
        TimeGrid::make(-static_cast<double>(n_short) * dt, 0.0, dt);
    const auto short_effects = retro_effect_path(s.p, short_grid);
    const std::array<std::size_t, 3> idx = {0, n_short - steps_of(1.0),
                                            n_short - steps_of(0.5)};

    // (b) photon-scheme Monte Carlo vs the closed classical route
    const double pe_ss = s.p.epsilon / ge;
    const std::size_t n_photon = 40000;
    struct PhotonAcc {
        std::array<double, 3> wz{}, w{};
    };
    PhotonAcc photon = run_chunked(
        n_photon, PhotonAcc{},
        [&](std::size_t i, PhotonAcc& acc) {
            RngStream init = RngStream::substream(31337, i);
            SampleOptions opt;
            opt.init_true = init.uniform() < pe_ss ? excited_state : ground_state;
            opt.with_filtered = false;
            const Trajectory tr = sample_trajectory(Scheme::photon, s.p,
                                                    short_grid, 500000 + i, opt);
            for (std::size_t c = 0; c < 3; ++c) {
                const DensityMatrix& rho = tr.true_path[idx[c]];
                const double w = effect_state_overlap(short_effects[idx[c]], rho);
                acc.w[c] += w;
                acc.wz[c] += w * bloch_from_density(rho).z;
            }
        },
        [](PhotonAcc& t, const PhotonAcc& c) {
            for (std::size_t k = 0; k < 3; ++k) {
                t.wz[k] += c.wz[k];
                t.w[k] += c.w[k];
            }
        });
    double photon_err = 0.0;
    const DensityMatrix steady = DensityMatrix::from_matrix(
        (s.p.epsilon * pauli::proj_e + s.p.gamma * pauli::proj_g) / ge);
    for (std::size_t c = 0; c < 3; ++c) {
        const double z_mc = photon.wz[c] / photon.w[c];
        const double z_ref = bloch_from_density(classical_quantum_smooth(
                                 steady, short_effects[idx[c]]))
                                 .z;
        photon_err = std::max(photon_err, std::abs(z_mc - z_ref));
    }

    // (c) homodyne-scheme Monte Carlo vs the Fokker-Planck route
    const std::size_t n_hom = 20000;
    struct HomAcc {
        std::array<double, 3> wz{}, wx{}, w{};
    };
    HomAcc hom = run_chunked(
        n_hom, HomAcc{},
        [&](std::size_t i, HomAcc& acc) {
            RngStream init = RngStream::substream(77321, i);
            SampleOptions opt;
            opt.init_true = pure_state_on_circle(
                sample_theta(s.stationary, init.uniform()));
            opt.with_filtered = false;
            const Trajectory tr = sample_trajectory(Scheme::homodyne, s.p,
                                                    short_grid, 700000 + i, opt);
            for (std::size_t c = 0; c < 3; ++c) {
                const DensityMatrix& rho = tr.true_path[idx[c]];
                const double w = effect_state_overlap(short_effects[idx[c]], rho);
                const BlochVector r = bloch_from_density(rho);
                acc.w[c] += w;
                acc.wz[c] += w * r.z;
                acc.wx[c] += w * r.x;
            }
        },
        [](HomAcc& t, const HomAcc& c) {
            for (std::size_t k = 0; k < 3; ++k) {
                t.wz[k] += c.wz[k];
                t.wx[k] += c.wx[k];
                t.w[k] += c.w[k];
            }
        });
    double hom_err = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const DensityMatrix ref =
            homodyne_smooth(s.stationary, short_effects[idx[c]]);
        const BlochVector rr = bloch_from_density(ref);
        hom_err = std::max(hom_err, std::abs(hom.wz[c] / hom.w[c] - rr.z));
        hom_err = std::max(hom_err, std::abs(hom.wx[c] / hom.w[c] - rr.x));
    }

    // (d) Fokker-Planck moment vs the filtered z equation
    FpeSolver solver(s.p, s.fpe_cfg);
    ThetaDistribution d = solver.initial();
    double moment_err = 0.0;
    double z_ode = d.mean_cos();
    double t_now = 0.0;
    for (double t : {1.0 / ge, 2.0 / ge, 5.0 / ge}) {
        d = solver.evolve(d, t - t_now);
        z_ode = oracles::rk4(
            [&](double z) { return -s.p.gamma * (1 + z) + s.p.epsilon * (1 - z); },
            z_ode, 1e-4, std::lround((t - t_now) / 1e-4));
        t_now = t;
        moment_err = std::max(moment_err, std::abs(d.mean_cos() - z_ode));
    }

    const bool pass =
        hmm_err < 1e-12 && photon_err < 2e-2 && hom_err < 2e-2 && moment_err < 1e-2;
    report(9, "oracle equivalences", pass,
           fmt("hmm vs enumeration %.1e, photon MC %.3f, homodyne MC %.3f, "
               "FPE moment %.4f",
               hmm_err, photon_err, hom_err, moment_err));
}

void criterion_10(const Shared&) {
    const auto hits = swv_scan();
    double best = 1.0;
    BlochVector state{}, effect{};
    for (const auto& h : hits)
        if (h.commutator_norm > 1e-3 && h.min_eigenvalue < best) {
            best = h.min_eigenvalue;
            state = h.state_bloch;
            effect = h.effect_bloch;
        }
    report(10, "SWV scan finds an indefinite non-commuting pair", best < -1e-3,
           fmt("min eigenvalue %.4f at state z = %.2f, effect (x,z) = "
               "(%.2f, %.2f)",
               best, state.z, effect.x, effect.z));
}

} // namespace

int main() {
    const Shared shared = make_shared_state();
    criterion_1_2_3(shared);
    criterion_4(shared);
    criterion_5(shared);
    criterion_6(shared);
    criterion_7(shared);
    criterion_8(shared);
    criterion_9(shared);
    criterion_10(shared);
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
