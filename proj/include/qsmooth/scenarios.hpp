#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "qsmooth/core.hpp"
#include "qsmooth/ensemble.hpp"
#include "qsmooth/fpe.hpp"
#include "qsmooth/pre_solver.hpp"
#include "qsmooth/retrofilter.hpp"
#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectories.hpp"

// Experiment presets and their CSV emission. Each preset reproduces one data
// product: the pre-jump window of the classical, homodyne, or adaptive
// smoothing curves, the cost comparison across Bob's three schemes, the
// smoothed circle distributions, the SWV indefiniteness scan, or the
// adaptive-scheme solve. The time axis places t = 0 at the conditioning
// (observed) jump; all window times are negative.

namespace qsmooth {

// ---------------------------------------------------------------------------
// Configuration

struct ScenarioConfig {
    std::string preset = "classical";
    double gamma = 1.0;
    double epsilon_over_gamma = 0.05;
    std::string delta_mode = "zero";
    double window_factor = 10.0;   // window = window_factor / (gamma + epsilon)
    double dt_factor = 1e-3;       // dt = dt_factor / gamma
    std::uint64_t seed = 1;
    std::size_t n_trajectories = 10000;
    std::size_t fpe_points = 512;
    double fpe_init_variance = 0.01;
    std::string out_dir = ".";

    ModelParams params() const {
        ModelParams p;
        p.gamma = gamma;
        p.epsilon = epsilon_over_gamma * gamma;
        p.delta = 0.0;
        p.delta_zero_limit = true;
        return p;
    }

    TimeGrid grid() const {
        const ModelParams p = params();
        const double dt = dt_factor / gamma;
        const double window =
            std::round(window_factor / ((p.gamma + p.epsilon) * dt)) * dt;
        return TimeGrid::make(-window, 0.0, dt);
    }

    void validate() const {
        static const char* known[] = {"classical",  "homodyne",
                                      "adaptive",   "cost-comparison",
                                      "pre-distributions", "swv-demo",
                                      "pre-solve"};
        bool ok = false;
        for (const char* k : known) ok = ok || preset == k;
        if (!ok) throw config_error("unknown preset '" + preset + "'");
        if (delta_mode != "zero")
            throw config_error("delta_mode: only 'zero' is supported");
        if (gamma <= 0.0 || epsilon_over_gamma <= 0.0)
            throw config_error("rates must be positive");
        if (window_factor <= 0.0 || dt_factor <= 0.0)
            throw config_error("window_factor and dt_factor must be positive");
        if (fpe_points < 128) throw config_error("fpe_points must be >= 128");
        if (fpe_init_variance <= 0.0)
            throw config_error("fpe_init_variance must be positive");
        if (n_trajectories == 0) throw config_error("n_trajectories must be > 0");
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Serialize as a flat key = value file; fixed key order.
inline std::string serialize_config(const ScenarioConfig& c) {
    std::ostringstream os;
    os << "preset = " << c.preset << "\n";
    os << "gamma = " << detail::format_double(c.gamma) << "\n";
    os << "epsilon_over_gamma = " << detail::format_double(c.epsilon_over_gamma)
       << "\n";
    os << "delta_mode = " << c.delta_mode << "\n";
    os << "window_factor = " << detail::format_double(c.window_factor) << "\n";
    os << "dt_factor = " << detail::format_double(c.dt_factor) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "n_trajectories = " << c.n_trajectories << "\n";
    os << "fpe_points = " << c.fpe_points << "\n";
    os << "fpe_init_variance = " << detail::format_double(c.fpe_init_variance)
       << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    return os.str();
}

inline void apply_config_entry(ScenarioConfig& c, const std::string& key,
                               const std::string& value, int line = -1) {
    auto fail = [&](const std::string& why) {
        std::string where = line >= 0 ? " (line " + std::to_string(line) + ")" : "";
        throw config_error("config key '" + key + "'" + where + ": " + why);
    };
    auto as_double = [&]() {
        try {
            std::size_t pos = 0;
            double v = std::stod(value, &pos);
            if (pos != value.size()) fail("trailing characters in '" + value + "'");
            return v;
        } catch (const std::exception&) {
            fail("cannot parse '" + value + "' as a number");
            return 0.0;
        }
    };
    auto as_unsigned = [&]() {
        try {
            std::size_t pos = 0;
            unsigned long long v = std::stoull(value, &pos);
            if (pos != value.size()) fail("trailing characters in '" + value + "'");
            return v;
        } catch (const std::exception&) {
            fail("cannot parse '" + value + "' as an unsigned integer");
            return 0ULL;
        }
    };
    if (key == "preset") c.preset = value;
    else if (key == "gamma") c.gamma = as_double();
    else if (key == "epsilon_over_gamma") c.epsilon_over_gamma = as_double();
    else if (key == "delta_mode") c.delta_mode = value;
    else if (key == "window_factor") c.window_factor = as_double();
    else if (key == "dt_factor") c.dt_factor = as_double();
    else if (key == "seed") c.seed = as_unsigned();
    else if (key == "n_trajectories")
        c.n_trajectories = static_cast<std::size_t>(as_unsigned());
    else if (key == "fpe_points") c.fpe_points = static_cast<std::size_t>(as_unsigned());
    else if (key == "fpe_init_variance") c.fpe_init_variance = as_double();
    else if (key == "out_dir") c.out_dir = value;
    else fail("unknown key");
}

inline ScenarioConfig parse_config(const std::string& text) {
    ScenarioConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
        apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                           lineno);
    }
    return c;
}

inline ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config(os.str());
}

// ---------------------------------------------------------------------------
// CSV emission

using CsvValue = std::variant<double, std::string>;

struct CsvDataset {
    std::vector<std::string> columns;
    std::vector<std::vector<CsvValue>> rows;
};

/// Header row then data rows; floats with 9 significant digits, LF endings.
/// Byte output is a pure function of the dataset.
inline void emit_csv(const CsvDataset& data, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("emit_csv: cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < data.columns.size(); ++i)
        f << (i ? "," : "") << data.columns[i];
    f << "\n";
    char buf[64];
    for (const auto& row : data.rows) {
        if (row.size() != data.columns.size())
            throw validation_error("emit_csv: row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ",";
            if (std::holds_alternative<double>(row[i])) {
                std::snprintf(buf, sizeof(buf), "%.9g", std::get<double>(row[i]));
                f << buf;
            } else {
                f << std::get<std::string>(row[i]);
            }
        }
        f << "\n";
    }
    if (!f) throw config_error("emit_csv: write failed for '" + path + "'");
}

/// Snapshot export of a circle density: columns theta, density.
inline CsvDataset theta_density_csv(const ThetaDistribution& d) {
    CsvDataset out;
    out.columns = {"theta", "density"};
    for (std::size_t j = 0; j < d.size(); ++j)
        out.rows.push_back({d.theta(j), d[j]});
    return out;
}

// ---------------------------------------------------------------------------
// Shared window computations

/// Retrofiltered effect along the grid, backward from the conditioning jump:
/// E at the final grid time is |e><e| and earlier entries follow the no-jump
/// backward recursion (normalized each step).
inline std::vector<Effect> retro_effect_path(const ModelParams& p,
                                             const TimeGrid& grid,
                                             const RetroConfig& cfg = {}) {
    const std::size_t n = grid.n_steps();
    std::vector<Effect> path(n + 1, Effect::identity());
    path[n] = Effect::from_matrix(2.0 * pauli::proj_e);  // trace-2 convention
    for (std::size_t i = n; i-- > 0;)
        path[i] = effect_backward_step(path[i + 1], false, p, cfg, grid.dt);
    return path;
}

struct ClassicalCurves {
    std::vector<double> wp_f_e, wp_s_e;
    std::vector<double> purity_f, purity_s;
    std::vector<double> cost_f, cost_s;
};

/// Closed filtering/smoothing curves for the photon-detection (classical)
/// regime: the filtered state holds its steady value through the window and
/// the smoothed probabilities reweight it by the effect components.
inline ClassicalCurves compute_classical_curves(const ModelParams& p,
                                                const TimeGrid& grid,
                                                std::span<const Effect> effects) {
    const std::size_t n = grid.n_steps();
    if (effects.size() != n + 1)
        throw validation_error("compute_classical_curves: effect path mismatch");
    ClassicalCurves c;
    const double ge = p.gamma + p.epsilon;
    DensityMatrix rho_f = DensityMatrix::from_matrix(
        (p.epsilon * pauli::proj_e + p.gamma * pauli::proj_g) / ge);
    for (std::size_t i = 0; i <= n; ++i) {
        if (i > 0) rho_f = alice_filter_step(rho_f, false, p, grid.dt);
        const DensityMatrix rho_s = classical_quantum_smooth(rho_f, effects[i]);
        c.wp_f_e.push_back(rho_f.excited_population());
        c.wp_s_e.push_back(rho_s.excited_population());
        c.purity_f.push_back(purity(rho_f));
        c.purity_s.push_back(purity(rho_s));
        c.cost_f.push_back(expected_cost_filtered_under_smoothing(rho_f, rho_s));
        c.cost_s.push_back(expected_cost_smoothed_pure(rho_s));
    }
    return c;
}

/// Stationary no-jump theta density: relax the preset Gaussian initial
/// condition until successive snapshots agree to 1e-8 in L1.
inline ThetaDistribution stationary_theta_density(const ModelParams& p,
                                                  const FpeConfig& cfg) {
    FpeSolver solver(p, cfg);
    const double check = 2.0 / (p.gamma + p.epsilon);
    return solver.relax_to_stationary(solver.initial(), check, 1e-8,
                                      400.0 / (p.gamma + p.epsilon));
}

struct SchemeCurve {
    std::vector<BlochVector> bloch;
    std::vector<double> cost;  // 1 - purity (pure true states)
};

inline SchemeCurve compute_homodyne_curve(std::span<const Effect> effects,
                                          const ThetaDistribution& stationary) {
    SchemeCurve c;
    for (const Effect& e : effects) {
        const DensityMatrix rho_s = homodyne_smooth(stationary, e);
        c.bloch.push_back(bloch_from_density(rho_s));
        c.cost.push_back(expected_cost_smoothed_pure(rho_s));
    }
    return c;
}

struct AdaptiveCurve {
    std::vector<BlochVector> bloch;
    std::vector<double> cost;
    std::vector<std::array<double, 3>> weights;
};

inline AdaptiveCurve compute_adaptive_curve(std::span<const Effect> effects,
                                            const PreEnsemble& pre) {
    AdaptiveCurve c;
    for (const Effect& e : effects) {
        const auto w = adaptive_smooth_weights(pre, e);
        Mat2 m = Mat2::Zero();
        for (int i = 0; i < 3; ++i) m += w[i] * pre.state(i).matrix();
        const DensityMatrix rho_s = DensityMatrix::from_matrix(m);
        c.bloch.push_back(bloch_from_density(rho_s));
        c.cost.push_back(expected_cost_smoothed_pure(rho_s));
        c.weights.push_back(w);
    }
    return c;
}

/// Sign-change times of a - b, linearly interpolated on the grid.
inline std::vector<double> crossover_times(const TimeGrid& grid,
                                           std::span<const double> a,
                                           std::span<const double> b) {
    std::vector<double> out;
    for (std::size_t i = 1; i < a.size(); ++i) {
        const double d0 = a[i - 1] - b[i - 1];
        const double d1 = a[i] - b[i];
        if (d0 == 0.0) continue;
        if ((d0 < 0.0) != (d1 < 0.0)) {
            const double frac = d0 / (d0 - d1);
            out.push_back(grid.time(i - 1) + frac * grid.dt);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adaptive-scheme reference seed

/// Known-good WLO seed for the cyclic three-state ensemble at
/// epsilon/gamma = 0.05 (amplitudes in sqrt(gamma) units).
inline TriWlo reference_wlo_seed() {
    return TriWlo{WloSettings{-0.07812, -0.1804}, WloSettings{-0.3684, 0.2552},
                  WloSettings{0.06446, 0.6158}};
}

/// Solve the cyclic ensemble from the bundled seed (rates are rescaled to
/// gamma; only epsilon/gamma = 0.05 ships a seed).
inline PreEnsemble default_pre_ensemble(const ModelParams& p) {
    if (std::abs(p.epsilon / p.gamma - 0.05) > 1e-12)
        throw config_error(
            "default_pre_ensemble: bundled WLO seed covers epsilon/gamma = 0.05 "
            "only; use multistart_solve for other ratios");
    TriWlo seed = reference_wlo_seed();
    const double scale = std::sqrt(p.gamma);
    for (auto& w : seed) {
        w.mu_minus *= scale;
        w.mu_plus *= scale;
    }
    const TriAngle angles = pre_states_from_wlo(seed, p);
    return solve_cyclic_pre(angles, seed, p);
}

// ---------------------------------------------------------------------------
// SWV indefiniteness scan

struct SwvScanHit {
    BlochVector state_bloch;
    BlochVector effect_bloch;  // effect = 1/2 (1 + r . sigma), scaled freely
    double min_eigenvalue = 0.0;
    double commutator_norm = 0.0;
};

/// Brute-force scan over Bloch pairs (state on the z axis, effect tilted by
/// chi in the x-z plane) for SWV states with a negative eigenvalue. Returns
/// all scanned points; the caller filters on min_eigenvalue.
inline std::vector<SwvScanHit> swv_scan(int n_state = 19, int n_angle = 18,
                                        int n_len = 9) {
    std::vector<SwvScanHit> out;
    for (int ia = 1; ia < n_state; ++ia) {
        const double a = -0.95 + 1.9 * ia / (n_state - 1.0);
        const DensityMatrix rho =
            DensityMatrix::from_bloch(BlochVector{0.0, 0.0, a});
        for (int ic = 1; ic < n_angle; ++ic) {
            const double chi = std::numbers::pi * ic / n_angle;
            for (int il = 1; il <= n_len; ++il) {
                const double len =
                    n_len == 1 ? 0.9 : 0.1 + 0.89 * (il - 1) / (n_len - 1.0);
                const BlochVector re{len * std::sin(chi), 0.0, len * std::cos(chi)};
                const Mat2 em = 0.5 * (pauli::identity + re.x * pauli::x +
                                       re.z * pauli::z);
                const Effect e = Effect::from_matrix(em);
                SwvScanHit hit;
                hit.state_bloch = BlochVector{0.0, 0.0, a};
                hit.effect_bloch = re;
                hit.commutator_norm =
                    (rho.matrix() * em - em * rho.matrix()).norm();
                hit.min_eigenvalue = swv_state(rho, e).min_eigenvalue;
                out.push_back(hit);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario runner

struct RunResult {
    std::vector<std::string> files_written;
    std::map<std::string, double> summary;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void write_file(RunResult& res, const std::string& dir,
                       const std::string& name, const CsvDataset& data) {
    const std::string path = join_path(dir, name);
    emit_csv(data, path);
    res.files_written.push_back(path);
}

} // namespace detail

/// Run one preset and write its CSV products under cfg.out_dir.
/// Deterministic: identical config (including seed) gives byte-identical files.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const ModelParams p = cfg.params();
    RunResult res;
    std::filesystem::create_directories(cfg.out_dir);

    if (cfg.preset == "pre-solve") {
        const PreEnsemble pre = default_pre_ensemble(p);
        const double resid = residual_norm(pre.angles, pre.wlos, p);
        CsvDataset d;
        d.columns = {"state", "theta", "occupation", "mu_minus", "mu_plus"};
        const char* names[3] = {"alpha", "phi", "beta"};
        for (int i = 0; i < 3; ++i)
            d.rows.push_back({std::string(names[i]), pre.angles[i],
                              pre.occupation[i], pre.wlos[i].mu_minus,
                              pre.wlos[i].mu_plus});
        detail::write_file(res, cfg.out_dir, "pre-solve.csv", d);
        res.summary["residual_norm"] = resid;
        res.summary["theta_alpha"] = pre.angles[0];
        res.summary["theta_phi"] = pre.angles[1];
        res.summary["theta_beta"] = pre.angles[2];
        return res;
    }

    if (cfg.preset == "swv-demo") {
        const auto hits = swv_scan();
        CsvDataset d;
        d.columns = {"state_z", "effect_x", "effect_z", "min_eigenvalue",
                     "commutator_norm"};
        double worst = 1.0;
        for (const auto& h : hits) {
            d.rows.push_back({h.state_bloch.z, h.effect_bloch.x, h.effect_bloch.z,
                              h.min_eigenvalue, h.commutator_norm});
            worst = std::min(worst, h.min_eigenvalue);
        }
        detail::write_file(res, cfg.out_dir, "swv-demo.csv", d);
        res.summary["min_eigenvalue"] = worst;
        return res;
    }

    const TimeGrid grid = cfg.grid();
    const auto effects = retro_effect_path(p, grid);

    if (cfg.preset == "classical") {
        const ClassicalCurves c = compute_classical_curves(p, grid, effects);
        CsvDataset z, pur, cost;
        z.columns = {"t", "wp_F_e", "wp_S_e"};
        pur.columns = {"t", "purity_filtered", "purity_smoothed"};
        cost.columns = {"t", "cost_filtered", "cost_smoothed"};
        for (std::size_t i = 0; i < c.wp_f_e.size(); ++i) {
            const double t = grid.time(i);
            z.rows.push_back({t, c.wp_f_e[i], c.wp_s_e[i]});
            pur.rows.push_back({t, c.purity_f[i], c.purity_s[i]});
            cost.rows.push_back({t, c.cost_f[i], c.cost_s[i]});
        }
        detail::write_file(res, cfg.out_dir, "classical-z.csv", z);
        detail::write_file(res, cfg.out_dir, "classical-purity.csv", pur);
        detail::write_file(res, cfg.out_dir, "classical-cost.csv", cost);
        res.summary["wp_S_e_final"] = c.wp_s_e.back();
        res.summary["min_purity_smoothed"] =
            *std::min_element(c.purity_s.begin(), c.purity_s.end());
        return res;
    }

    if (cfg.preset == "homodyne") {
        FpeConfig fcfg;
        fcfg.n_points = cfg.fpe_points;
        fcfg.init_variance = cfg.fpe_init_variance;
        const ThetaDistribution stat = stationary_theta_density(p, fcfg);
        const ClassicalCurves cl = compute_classical_curves(p, grid, effects);
        const SchemeCurve hom = compute_homodyne_curve(effects, stat);
        CsvDataset d;
        d.columns = {"t", "z_smoothed_classical", "z_smoothed_homodyne",
                     "x_smoothed_homodyne", "y_smoothed_homodyne"};
        for (std::size_t i = 0; i < hom.bloch.size(); ++i)
            d.rows.push_back({grid.time(i), 2.0 * cl.wp_s_e[i] - 1.0,
                              hom.bloch[i].z, hom.bloch[i].x, hom.bloch[i].y});
        detail::write_file(res, cfg.out_dir, "homodyne-z.csv", d);
        detail::write_file(res, cfg.out_dir, "stationary-density.csv",
                           theta_density_csv(stat));
        res.summary["z_homodyne_final"] = hom.bloch.back().z;
        res.summary["z_classical_final"] = 2.0 * cl.wp_s_e.back() - 1.0;
        return res;
    }

    const PreEnsemble pre = default_pre_ensemble(p);

    if (cfg.preset == "adaptive") {
        FpeConfig fcfg;
        fcfg.n_points = cfg.fpe_points;
        fcfg.init_variance = cfg.fpe_init_variance;
        const ThetaDistribution stat = stationary_theta_density(p, fcfg);
        const ClassicalCurves cl = compute_classical_curves(p, grid, effects);
        const SchemeCurve hom = compute_homodyne_curve(effects, stat);
        const AdaptiveCurve ad = compute_adaptive_curve(effects, pre);
        CsvDataset d;
        d.columns = {"t", "r_classical", "r_homodyne", "r_adaptive", "x_adaptive"};
        for (std::size_t i = 0; i < ad.bloch.size(); ++i) {
            const double r_cl = std::abs(2.0 * cl.wp_s_e[i] - 1.0);
            d.rows.push_back({grid.time(i), r_cl, hom.bloch[i].norm(),
                              ad.bloch[i].norm(), ad.bloch[i].x});
        }
        detail::write_file(res, cfg.out_dir, "adaptive-bloch.csv", d);
        res.summary["x_adaptive_final"] = ad.bloch.back().x;
        return res;
    }

    if (cfg.preset == "cost-comparison") {
        FpeConfig fcfg;
        fcfg.n_points = cfg.fpe_points;
        fcfg.init_variance = cfg.fpe_init_variance;
        const ThetaDistribution stat = stationary_theta_density(p, fcfg);
        const ClassicalCurves cl = compute_classical_curves(p, grid, effects);
        const SchemeCurve hom = compute_homodyne_curve(effects, stat);
        const AdaptiveCurve ad = compute_adaptive_curve(effects, pre);
        CsvDataset d;
        d.columns = {"t", "cost_classical", "cost_homodyne", "cost_adaptive"};
        for (std::size_t i = 0; i < cl.cost_s.size(); ++i)
            d.rows.push_back({grid.time(i), cl.cost_s[i], hom.cost[i], ad.cost[i]});
        detail::write_file(res, cfg.out_dir, "cost-comparison.csv", d);
        CsvDataset x;
        x.columns = {"pair", "t_crossover"};
        for (auto [name, a, b] :
             {std::tuple{"homodyne_vs_adaptive", &hom.cost, &ad.cost},
              std::tuple{"adaptive_vs_classical", &ad.cost, &cl.cost_s},
              std::tuple{"homodyne_vs_classical", &hom.cost, &cl.cost_s}})
            for (double t : crossover_times(grid, *a, *b))
                x.rows.push_back({std::string(name), t});
        detail::write_file(res, cfg.out_dir, "cost-crossovers.csv", x);
        std::size_t ordered = 0;
        for (std::size_t i = 0; i < cl.cost_s.size(); ++i)
            if (hom.cost[i] <= ad.cost[i] + 1e-9 &&
                ad.cost[i] <= cl.cost_s[i] + 1e-9)
                ++ordered;
        res.summary["ordering_fraction"] =
            static_cast<double>(ordered) / static_cast<double>(cl.cost_s.size());
        return res;
    }

    // pre-distributions: smoothed weights over the circle at two window times
    FpeConfig fcfg;
    fcfg.n_points = cfg.fpe_points;
    fcfg.init_variance = cfg.fpe_init_variance;
    const ThetaDistribution stat = stationary_theta_density(p, fcfg);
    const ClassicalCurves cl = compute_classical_curves(p, grid, effects);
    CsvDataset d;
    d.columns = {"t", "scheme", "theta", "weight"};
    const double ge = p.gamma + p.epsilon;
    for (double t : {-2.0 / ge, -0.5 / ge}) {
        const std::size_t i = static_cast<std::size_t>(
            std::llround((t - grid.t_start) / grid.dt));
        const Effect& e = effects[i];
        const double tt = grid.time(i);
        d.rows.push_back({tt, std::string("photon"), 0.0, cl.wp_s_e[i]});
        d.rows.push_back({tt, std::string("photon"), std::numbers::pi,
                          1.0 - cl.wp_s_e[i]});
        // homodyne: per-radian smoothed density
        const Mat2& em = e.matrix();
        const double tr_e = em.trace().real();
        const double ex = (em * pauli::x).trace().real();
        const double ez = (em * pauli::z).trace().real();
        double wsum = 0.0;
        std::vector<double> w(stat.size());
        for (std::size_t j = 0; j < stat.size(); ++j) {
            const double th = stat.theta(j);
            w[j] = 0.5 * (tr_e + ex * std::sin(th) + ez * std::cos(th)) * stat[j];
            wsum += w[j] * stat.dtheta();
        }
        for (std::size_t j = 0; j < stat.size(); ++j)
            d.rows.push_back({tt, std::string("homodyne"), stat.theta(j),
                              w[j] / wsum});
        const auto aw = adaptive_smooth_weights(pre, e);
        for (int s = 0; s < 3; ++s)
            d.rows.push_back({tt, std::string("adaptive"), pre.angles[s], aw[s]});
    }
    detail::write_file(res, cfg.out_dir, "pre-distributions.csv", d);
    return res;
}

} // namespace qsmooth
