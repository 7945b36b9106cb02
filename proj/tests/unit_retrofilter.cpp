#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "qsmooth/retrofilter.hpp"
#include "qsmooth/rng.hpp"
#include "qsmooth/smoother.hpp"
#include "qsmooth/trajectories.hpp"

using namespace qsmooth;

namespace {

const ModelParams params_005 = [] {
    ModelParams p;
    p.gamma = 1.0;
    p.epsilon = 0.05;
    return p;
}();

} // namespace

TEST_CASE("identity effect is stationary under backward evolution") {
    RetroConfig cfg;  // zeta = 0, renormalize on
    Effect e = Effect::identity();
    for (int i = 0; i < 100; ++i)
        e = effect_backward_step(e, false, params_005, cfg, 1e-3);
    CHECK((e.matrix() - pauli::identity).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("effect jump update") {
    SECTION("identity maps to the excited projector") {
        const Effect e = effect_jump_update(Effect::identity());
        const Effect n = e.normalized();
        CHECK((n.matrix() - 2.0 * pauli::proj_e).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("excited-only effect is degenerate") {
        CHECK_THROWS_AS(effect_jump_update(Effect::from_matrix(pauli::proj_e)),
                        degenerate_effect_error);
    }
    SECTION("diagonal effect keeps the ground component as scale") {
        Mat2 d;
        d << 0.3, 0, 0, 0.8;
        const Effect e = effect_jump_update(Effect::from_matrix(d));
        CHECK((e.matrix() - 0.8 * pauli::proj_e).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("diagonal effects stay diagonal backward in time") {
    RetroConfig cfg;
    ModelParams p = params_005;
    p.delta = 0.2;
    p.delta_zero_limit = false;
    Effect e = Effect::from_matrix(2.0 * pauli::proj_e);
    for (int i = 0; i < 2000; ++i) {
        e = effect_backward_step(e, false, p, cfg, 1e-3);
        CHECK(std::abs(e.matrix()(0, 1)) < 1e-12);
        CHECK(std::abs(e.matrix()(1, 0)) < 1e-12);
    }
}

TEST_CASE("diagonal stepping matches full matrix stepping") {
    for (double zeta : {0.0, 0.7}) {
        RetroConfig cfg;
        cfg.zeta = zeta;
        cfg.renormalize_each_step = false;
        ModelParams p = params_005;
        p.delta = 0.15;
        p.delta_zero_limit = false;
        double ee = 1.0, eg = 0.0;
        Effect e = Effect::from_matrix(pauli::proj_e);
        for (int i = 0; i < 800; ++i) {
            e = effect_backward_step(e, false, p, cfg, 1e-3);
            std::tie(ee, eg) = classical_effect_backward_step(ee, eg, p, cfg, 1e-3);
            CHECK(e.excited_component() == Catch::Approx(ee).margin(1e-10));
            CHECK(e.ground_component() == Catch::Approx(eg).margin(1e-10));
        }
    }
}

TEST_CASE("backward evolution converges to the uninformative effect") {
    RetroConfig cfg;
    const double dt = 1e-3;
    const double s_total = 20.0 / (params_005.gamma + params_005.epsilon);
    Effect e = Effect::from_matrix(2.0 * pauli::proj_e);
    for (long i = 0; i < std::lround(s_total / dt); ++i)
        e = effect_backward_step(e, false, params_005, cfg, dt);
    CHECK(std::abs(e.excited_component() - e.ground_component()) < 1e-6);
}

TEST_CASE("backward integration agrees with the closed-form solution") {
    RetroConfig cfg;  // renormalized each step; compare component ratios
    const double dt = 1e-4;
    Effect e = Effect::from_matrix(2.0 * pauli::proj_e);
    double s = 0.0;
    for (int step = 0; step < 20000; ++step) {
        e = effect_backward_step(e, false, params_005, cfg, dt);
        s += dt;
    }
    auto [ee, eg] = oracles::effect_closed_form(params_005.gamma,
                                                params_005.epsilon, s);
    CHECK(e.excited_component() / e.ground_component() ==
          Catch::Approx(ee / eg).epsilon(1e-3));
}

TEST_CASE("norm freedom: prescaling the effect changes nothing downstream") {
    RetroConfig cfg;
    cfg.renormalize_each_step = false;
    const Mat2 base = 0.9 * pauli::proj_e + 0.2 * pauli::proj_g;
    Effect a = Effect::from_matrix(base);
    Effect b = Effect::from_matrix(17.3 * base);
    for (int i = 0; i < 200; ++i) {
        a = effect_backward_step(a, false, params_005, cfg, 1e-3);
        b = effect_backward_step(b, false, params_005, cfg, 1e-3);
    }
    const DensityMatrix rho = DensityMatrix::from_matrix(
        (0.05 * pauli::proj_e + 1.0 * pauli::proj_g) / 1.05);
    const DensityMatrix sa = classical_quantum_smooth(rho, a);
    const DensityMatrix sb = classical_quantum_smooth(rho, b);
    CHECK((sa.matrix() - sb.matrix()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.normalized().matrix() - b.normalized().matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
}

TEST_CASE("forward-backward trace is constant along a record") {
    ModelParams p = params_005;
    p.delta = 0.4;
    p.delta_zero_limit = false;
    const TimeGrid grid = TimeGrid::make(0.0, 3.0, 1e-3);
    RetroConfig cfg;
    cfg.renormalize_each_step = false;
    RngStream rng(17);
    for (int rec = 0; rec < 5; ++rec) {
        std::vector<std::uint8_t> jumps(grid.n_steps(), 0);
        // record sampled from the filtered jump probabilities
        DensityMatrix rho_f = ground_state;
        for (std::size_t i = 0; i < jumps.size(); ++i) {
            const double pj = p.delta * rho_f.excited_population() * grid.dt;
            jumps[i] = rng.uniform() < pj;
            rho_f = alice_filter_step(rho_f, jumps[i], p, grid.dt);
        }
        std::vector<Mat2> rho(grid.n_steps() + 1);
        rho[0] = ground_state.matrix();
        for (std::size_t i = 0; i < grid.n_steps(); ++i)
            rho[i + 1] = filtered_linear_step(rho[i], jumps[i], p, grid.dt);
        Effect e = Effect::identity();
        const double final_trace =
            forward_backward_trace(rho[grid.n_steps()], e);
        REQUIRE(final_trace > 0.0);
        for (std::size_t i = grid.n_steps(); i-- > 0;) {
            e = effect_backward_step(e, jumps[i], p, cfg, grid.dt);
            CHECK(forward_backward_trace(rho[i], e) / final_trace ==
                  Catch::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("forward-backward trace simple values") {
    const Mat2 rho = 0.4 * pauli::proj_e + 0.6 * pauli::proj_g;
    CHECK(forward_backward_trace(rho, Effect::identity()) == Catch::Approx(1.0));
    Mat2 d;
    d << 0.7, 0, 0, 0.1;
    CHECK(forward_backward_trace(pauli::proj_e, Effect::from_matrix(d)) ==
          Catch::Approx(0.7));
}

TEST_CASE("codiagonality oracle") {
    const double dt = 1e-6;
    const MeasurementOperator alice = alice_no_click_operator(params_005, dt);
    SECTION("photon scheme passes") {
        const auto set = bob_photon_operators(params_005, dt);
        const auto rep = codiagonality_oracle(alice, set);
        CHECK(rep.codiagonal);
        CHECK(rep.filtered_offdiag < 1e-12);
        CHECK(rep.retro_offdiag < 1e-12);
        CHECK(rep.completeness_defect < 1e-12);
    }
    SECTION("homodyne scheme fails") {
        const auto set = bob_homodyne_operators(params_005, dt);
        const auto rep = codiagonality_oracle(alice, set);
        CHECK_FALSE(rep.codiagonal);
        CHECK(rep.max_column_violation > 1e-5);
        CHECK(rep.filtered_offdiag < 1e-12);  // coherences cancel on average
    }
    SECTION("identity-only set passes") {
        const std::vector<MeasurementOperator> set = {{pauli::identity}};
        CHECK(codiagonality_oracle({pauli::identity}, set).codiagonal);
    }
    SECTION("incomplete set rejected") {
        const std::vector<MeasurementOperator> set = {
            {Mat2(0.5 * pauli::identity)}};
        CHECK_THROWS_AS(codiagonality_oracle(alice, set), validation_error);
    }
}

TEST_CASE("positivity violation in a backward step raises") {
    RetroConfig cfg;
    Mat2 nearly_degenerate;
    nearly_degenerate << 2.0, 0, 0, 1e-12;
    const Effect e = Effect::from_matrix(nearly_degenerate);
    // a huge dt drives the excited component negative
    CHECK_THROWS_AS(effect_backward_step(e, false, params_005, cfg, 5.0),
                    numerical_error);
}
