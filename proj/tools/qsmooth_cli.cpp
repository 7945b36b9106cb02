// Command-line driver: `qsmooth run <preset>`, `qsmooth pre-solve`,
// `qsmooth validate`. Exit codes: 0 success, 2 config error, 3 numerical
// failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsmooth/qsmooth.hpp"

namespace {

using namespace qsmooth;

void apply_param_overrides(ScenarioConfig& cfg,
                           const std::vector<std::string>& params) {
    for (const std::string& kv : params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw config_error("--param expects key=value, got '" + kv + "'");
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

int run_preset(ScenarioConfig cfg) {
    cfg.validate();
    const RunResult res = run_scenario(cfg);
    for (const auto& f : res.files_written) std::cout << "wrote " << f << "\n";
    for (const auto& [k, v] : res.summary)
        std::printf("%s = %.9g\n", k.c_str(), v);
    return 0;
}

int run_pre_solve(const ScenarioConfig& cfg) {
    const ModelParams p = cfg.params();
    const PreEnsemble pre = default_pre_ensemble(p);
    nlohmann::json j;
    const char* names[3] = {"alpha", "phi", "beta"};
    for (int i = 0; i < 3; ++i) {
        j["states"][names[i]] = {{"theta", pre.angles[i]},
                                 {"occupation", pre.occupation[i]},
                                 {"mu_minus", pre.wlos[i].mu_minus},
                                 {"mu_plus", pre.wlos[i].mu_plus}};
    }
    j["residual_norm"] = residual_norm(pre.angles, pre.wlos, p);
    const BlochVector mix = bloch_from_density(pre.mixture());
    j["mixture"] = {{"x", mix.x}, {"y", mix.y}, {"z", mix.z}};
    std::cout << j.dump(2) << "\n";
    ScenarioConfig c2 = cfg;
    c2.preset = "pre-solve";
    run_scenario(c2);
    return 0;
}

struct CheckFailure {
    int count = 0;
};

template <class F>
void check(CheckFailure& fails, const std::string& name, F&& f) {
    try {
        if (f()) {
            std::cout << "ok:   " << name << "\n";
            return;
        }
        std::cout << "FAIL: " << name << "\n";
    } catch (const std::exception& e) {
        std::cout << "FAIL: " << name << " (" << e.what() << ")\n";
    }
    ++fails.count;
}

int run_validate(const ScenarioConfig& cfg) {
    CheckFailure fails;
    const ModelParams p = cfg.params();
    const std::uint64_t seed = cfg.seed;
    const std::size_t n_traj = std::min<std::size_t>(cfg.n_trajectories, 100000);

    check(fails, "bloch round trip", [] {
        RngStream rng(7);
        for (int i = 0; i < 200; ++i) {
            double r = std::cbrt(rng.uniform());
            double c = 2.0 * rng.uniform() - 1.0, s = std::sqrt(1 - c * c);
            double ph = two_pi * rng.uniform();
            BlochVector v{r * s * std::cos(ph), r * s * std::sin(ph), r * c};
            BlochVector w = bloch_from_density(density_from_bloch(v));
            if (std::abs(v.x - w.x) + std::abs(v.y - w.y) + std::abs(v.z - w.z) >
                1e-12)
                return false;
        }
        return true;
    });

    check(fails, "dissipator traceless + steady state", [&] {
        const LindbladSet cs = LindbladSet::for_model(p);
        RngStream rng(11);
        for (int i = 0; i < 50; ++i) {
            double z = 2.0 * rng.uniform() - 1.0;
            double x = (1 - std::abs(z)) * (2.0 * rng.uniform() - 1.0);
            auto rho = density_from_bloch({x, 0, z});
            if (std::abs(dissipator(cs, rho).trace().real()) > 1e-12) return false;
        }
        DensityMatrix rho = excited_state;
        rho = solve_master_equation(cs, rho, 50.0 / (p.gamma + p.epsilon), 1e-3);
        const double pg_fix = (p.gamma + p.effective_delta()) /
                              (p.gamma + p.effective_delta() + p.epsilon);
        return std::abs(rho.ground_population() - pg_fix) < 1e-6;
    });

    check(fails, "hmm smoothing vs path enumeration", [] {
        HmmModel m{(Eigen::MatrixXd(2, 2) << 0.9, 0.1, 0.3, 0.7).finished()};
        LikelihoodPath lik = {(Eigen::VectorXd(2) << 0.8, 0.4).finished(),
                              (Eigen::VectorXd(2) << 0.1, 0.9).finished(),
                              (Eigen::VectorXd(2) << 0.5, 0.5).finished()};
        auto prior = ClassicalBelief::from_vector({0.6, 0.4});
        auto f = classical_hmm_filter(m, prior, lik);
        auto e = classical_hmm_retrofilter(m, lik);
        auto s = classical_hmm_smooth(f, e);
        // enumerate all 2^4 hidden paths
        const std::size_t T = lik.size();
        std::vector<std::vector<double>> marg(T + 1, {0.0, 0.0});
        for (std::size_t mask = 0; mask < (1u << (T + 1)); ++mask) {
            double pr = prior[mask & 1];
            std::size_t prev = mask & 1;
            for (std::size_t t = 1; t <= T; ++t) {
                const std::size_t xt = (mask >> t) & 1;
                pr *= m.transition(prev, xt) * lik[t - 1](xt);
                prev = xt;
            }
            for (std::size_t t = 0; t <= T; ++t) marg[t][(mask >> t) & 1] += pr;
        }
        for (std::size_t t = 0; t <= T; ++t) {
            const double z = marg[t][0] + marg[t][1];
            if (std::abs(s[t][0] - marg[t][0] / z) > 1e-12) return false;
        }
        return true;
    });

    check(fails, "forward-backward trace constancy", [&] {
        const TimeGrid grid = TimeGrid::make(0.0, 2.0, 1e-3);
        RngStream rng(3);
        std::vector<std::uint8_t> jumps(grid.n_steps(), 0);
        for (auto& j : jumps) j = rng.uniform() < 5e-4;
        RetroConfig rc;
        rc.renormalize_each_step = false;
        ModelParams pf = p;
        pf.delta = 0.4;
        pf.delta_zero_limit = false;
        std::vector<Mat2> rho(grid.n_steps() + 1);
        rho[0] = 0.5 * pauli::identity;
        for (std::size_t i = 0; i < grid.n_steps(); ++i)
            rho[i + 1] = filtered_linear_step(rho[i], jumps[i], pf, grid.dt);
        Effect e = Effect::identity();
        std::vector<double> trace(grid.n_steps() + 1);
        trace[grid.n_steps()] = forward_backward_trace(rho[grid.n_steps()], e);
        for (std::size_t i = grid.n_steps(); i-- > 0;) {
            e = effect_backward_step(e, jumps[i], pf, rc, grid.dt);
            trace[i] = forward_backward_trace(rho[i], e);
        }
        for (double tr : trace)
            if (std::abs(tr / trace[0] - 1.0) > 1e-6) return false;
        return true;
    });

    check(fails, "fpe mass conservation", [&] {
        FpeConfig cfg;
        cfg.n_points = 256;
        FpeSolver solver(p, cfg);
        ThetaDistribution d = solver.initial();
        for (int i = 0; i < 20000; ++i) d = solver.step(d);
        return std::abs(d.mass() - 1.0) < 1e-9;
    });

    check(fails, "adaptive unravelling identity", [&] {
        for (const WloSettings& w : reference_wlo_seed())
            if (unravelling_defect(build_operators(w, p), p) > 1e-10) return false;
        return true;
    });

    check(fails, "pre occupation mixture = filtered steady state", [&] {
        const PreEnsemble pre = default_pre_ensemble(p);
        const BlochVector mix = bloch_from_density(pre.mixture());
        const double target = -(p.gamma - p.epsilon) / (p.gamma + p.epsilon);
        return std::abs(mix.x) < 1e-6 && std::abs(mix.z - target) < 1e-6;
    });

    check(fails, "photon ensemble mean tracks master equation", [&] {
        const TimeGrid grid = TimeGrid::make(0.0, 2.0, 1e-3 / p.gamma);
        struct Acc {
            std::vector<double> sum_z;
        };
        Acc init;
        init.sum_z.assign(grid.n_steps() + 1, 0.0);
        Acc total = run_chunked(
            n_traj, init,
            [&](std::size_t i, Acc& acc) {
                auto tr = sample_trajectory(Scheme::photon, p, grid, seed + i);
                for (std::size_t k = 0; k < tr.true_path.size(); ++k)
                    acc.sum_z[k] += bloch_from_density(tr.true_path[k]).z;
            },
            [](Acc& t, const Acc& c) {
                for (std::size_t k = 0; k < t.sum_z.size(); ++k)
                    t.sum_z[k] += c.sum_z[k];
            });
        const LindbladSet cs = LindbladSet::for_model(p);
        DensityMatrix rho = ground_state;
        for (std::size_t k = 0; k <= grid.n_steps(); k += grid.n_steps() / 4) {
            const double mc = total.sum_z[k] / static_cast<double>(n_traj);
            const DensityMatrix ref =
                solve_master_equation(cs, rho, grid.time(k), grid.dt);
            if (std::abs(mc - bloch_from_density(ref).z) > 0.05) return false;
        }
        return true;
    });

    check(fails, "trajectory reproducibility", [&] {
        const TimeGrid grid = TimeGrid::make(0.0, 0.5, 1e-3);
        auto a = sample_trajectory(Scheme::homodyne, p, grid, 42);
        auto b = sample_trajectory(Scheme::homodyne, p, grid, 42);
        return a.record.dw_gamma == b.record.dw_gamma &&
               a.record.dw_epsilon == b.record.dw_epsilon;
    });

    if (fails.count) {
        std::cout << fails.count << " check(s) failed\n";
        return 3;
    }
    std::cout << "all checks passed\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qubit filtering / retrofiltering / smoothing toolkit"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a preset and write CSV outputs");
    std::string preset;
    std::string config_file;
    std::vector<std::string> params;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    run->add_option("preset", preset,
                    "classical | homodyne | adaptive | cost-comparison | "
                    "pre-distributions | swv-demo | pre-solve")
        ->required();
    run->add_option("--config", config_file, "key = value config file");
    run->add_option("--param", params, "override, e.g. --param dt_factor=2e-3");
    run->add_option("--seed", seed, "master RNG seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--out", out_dir, "output directory");

    auto* pre = app.add_subcommand(
        "pre-solve", "solve the adaptive-scheme ensemble and print JSON");
    std::vector<std::string> pre_params;
    pre->add_option("--param", pre_params, "config overrides");

    auto* validate =
        app.add_subcommand("validate", "run the library invariant checks");
    std::vector<std::string> validate_params;
    validate->add_option("--param", validate_params,
                         "config overrides, e.g. --param n_trajectories=5000");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            ScenarioConfig cfg;
            if (!config_file.empty()) cfg = load_config_file(config_file);
            cfg.preset = preset;
            apply_param_overrides(cfg, params);
            if (seed_set) cfg.seed = seed;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (preset == "pre-solve") return run_pre_solve(cfg);
            return run_preset(cfg);
        }
        if (pre->parsed()) {
            ScenarioConfig cfg;
            apply_param_overrides(cfg, pre_params);
            return run_pre_solve(cfg);
        }
        if (validate->parsed()) {
            ScenarioConfig cfg;
            cfg.n_trajectories = 2000;
            cfg.seed = 77;
            apply_param_overrides(cfg, validate_params);
            return run_validate(cfg);
        }
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
