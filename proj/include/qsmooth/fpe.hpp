#pragma once

#include <utility>
#include <vector>

#include "qsmooth/core.hpp"

// Finite-difference Fokker-Planck solver on the periodic theta-circle for the
// no-jump conditional density of the homodyne-monitored true state,
//   dp/dt = -d/dth [A p] + 1/2 sum_k d2/dth2 [B_k^2 p],
// with A, B_gamma, B_epsilon the Langevin coefficients of the circle angle.
// Method of lines: second-order central differences in theta, explicit RK4 in
// time. The explicit scheme needs dt <= dth^2 / (2 max B^2).

namespace qsmooth {

/// A(theta) = sin(theta) [ (gamma+eps)/2 cos(theta) + (gamma-eps) ].
/// Valid in the delta -> 0 limit.
inline double drift_A(double theta, const ModelParams& p) {
    return std::sin(theta) *
           (0.5 * (p.gamma + p.epsilon) * std::cos(theta) + (p.gamma - p.epsilon));
}

/// (B_gamma, B_epsilon) = (sqrt(gamma)(1+cos), -sqrt(eps)(1-cos)).
inline std::pair<double, double> diffusion_B(double theta, const ModelParams& p) {
    const double c = std::cos(theta);
    return {std::sqrt(p.gamma) * (1.0 + c), -std::sqrt(p.epsilon) * (1.0 - c)};
}

/// Periodic probability density over theta in [0, 2pi), stored on a uniform
/// grid theta_j = j * 2pi/N. Values are per-radian densities.
class ThetaDistribution {
public:
    static ThetaDistribution from_values(std::vector<double> v) {
        if (v.size() < 2)
            throw validation_error("ThetaDistribution: need at least 2 points");
        double mass = 0.0;
        for (double& x : v) {
            if (x < -1e-12)
                throw validation_error("ThetaDistribution: negative density");
            if (x < 0.0) x = 0.0;
            mass += x;
        }
        mass *= two_pi / static_cast<double>(v.size());
        if (std::abs(mass - 1.0) > 1e-6)
            throw validation_error("ThetaDistribution: mass " +
                                   std::to_string(mass) + " != 1 within 1e-6");
        return ThetaDistribution(std::move(v));
    }

    /// Wrapped Gaussian, mean mu, variance var (rad^2), normalized on the grid.
    static ThetaDistribution gaussian(std::size_t n, double mu, double var) {
        if (var <= 0.0) throw config_error("ThetaDistribution: variance <= 0");
        std::vector<double> v(n);
        const double dth = two_pi / static_cast<double>(n);
        double mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double th = static_cast<double>(j) * dth;
            double s = 0.0;
            for (int w = -3; w <= 3; ++w) {
                const double d = th - mu + w * two_pi;
                s += std::exp(-d * d / (2.0 * var));
            }
            v[j] = s;
            mass += s * dth;
        }
        for (double& x : v) x /= mass;
        return ThetaDistribution(std::move(v));
    }

    static ThetaDistribution uniform(std::size_t n) {
        return ThetaDistribution(std::vector<double>(n, 1.0 / two_pi));
    }

    std::size_t size() const { return p_.size(); }
    double dtheta() const { return two_pi / static_cast<double>(p_.size()); }
    double theta(std::size_t j) const { return static_cast<double>(j) * dtheta(); }
    double operator[](std::size_t j) const { return p_[j]; }
    const std::vector<double>& values() const { return p_; }

    double mass() const {
        double m = 0.0;
        for (double x : p_) m += x;
        return m * dtheta();
    }

    /// Grid moment dth * sum f(theta_j) p_j.
    template <class F>
    double moment(F&& f) const {
        double m = 0.0;
        for (std::size_t j = 0; j < p_.size(); ++j) m += f(theta(j)) * p_[j];
        return m * dtheta();
    }

    double mean_cos() const { return moment([](double t) { return std::cos(t); }); }
    double mean_sin() const { return moment([](double t) { return std::sin(t); }); }

    double l1_distance(const ThetaDistribution& other) const {
        if (other.size() != size())
            throw validation_error("ThetaDistribution: grid mismatch");
        double d = 0.0;
        for (std::size_t j = 0; j < p_.size(); ++j) d += std::abs(p_[j] - other.p_[j]);
        return d * dtheta();
    }

private:
    explicit ThetaDistribution(std::vector<double> p) : p_(std::move(p)) {}
    friend class FpeSolver;
    std::vector<double> p_;
};

struct FpeConfig {
    std::size_t n_points = 512;
    double dt = 0.0;  // 0 means: use the stability bound with a 0.9 margin
    double init_mean = std::numbers::pi;
    double init_variance = 0.01;  // rad^2

    static double max_diffusion(const ModelParams& p) {
        // B_g^2 + B_e^2 is maximal at cos(theta) = 1 for gamma > epsilon
        return std::max(4.0 * p.gamma, 4.0 * p.epsilon);
    }

    double stability_bound(const ModelParams& p) const {
        const double dth = two_pi / static_cast<double>(n_points);
        return dth * dth / (2.0 * max_diffusion(p));
    }

    double effective_dt(const ModelParams& p) const {
        return dt > 0.0 ? dt : 0.9 * stability_bound(p);
    }

    void validate(const ModelParams& p) const {
        if (n_points < 128)
            throw config_error("FpeConfig: n_points must be >= 128");
        if (dt > 0.0 && dt > stability_bound(p))
            throw config_error("FpeConfig: dt exceeds the stability bound " +
                               std::to_string(stability_bound(p)));
        if (init_variance <= 0.0)
            throw config_error("FpeConfig: init_variance must be > 0");
    }
};

/// Caches the grid coefficients; use this for long evolutions.
class FpeSolver {
public:
    FpeSolver(const ModelParams& params, const FpeConfig& cfg)
        : cfg_(cfg), dt_(cfg.effective_dt(params)) {
        params.validate();
        cfg.validate(params);
        const std::size_t n = cfg.n_points;
        a_.resize(n);
        b2_.resize(n);
        const double dth = two_pi / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double th = static_cast<double>(j) * dth;
            a_[j] = drift_A(th, params);
            auto [bg, be] = diffusion_B(th, params);
            b2_[j] = bg * bg + be * be;
        }
        inv_2dth_ = 1.0 / (2.0 * dth);
        inv_dth2_ = 1.0 / (dth * dth);
    }

    /// Custom coefficient arrays (drift A and total squared diffusion B^2 on
    /// the grid), for problems other than the built-in model.
    FpeSolver(const FpeConfig& cfg, std::vector<double> drift,
              std::vector<double> diffusion_sq, double dt)
        : cfg_(cfg), dt_(dt), a_(std::move(drift)), b2_(std::move(diffusion_sq)) {
        if (a_.size() != cfg.n_points || b2_.size() != cfg.n_points)
            throw config_error("FpeSolver: coefficient arrays must match n_points");
        if (dt_ <= 0.0) throw config_error("FpeSolver: dt must be > 0");
        const double dth = two_pi / static_cast<double>(cfg.n_points);
        inv_2dth_ = 1.0 / (2.0 * dth);
        inv_dth2_ = 1.0 / (dth * dth);
    }

    double dt() const { return dt_; }
    const FpeConfig& config() const { return cfg_; }

    ThetaDistribution initial() const {
        return ThetaDistribution::gaussian(cfg_.n_points, cfg_.init_mean,
                                           cfg_.init_variance);
    }

    /// One RK4 step. Mass is conserved by the conservative stencil; negative
    /// round-off values are clipped and the mass defect folded back in.
    ThetaDistribution step(const ThetaDistribution& p) const {
        if (p.size() != cfg_.n_points)
            throw validation_error("FpeSolver: grid size mismatch");
        std::vector<double> k1, k2, k3, k4, tmp;
        rhs(p.p_, k1);
        axpy(p.p_, k1, 0.5 * dt_, tmp);
        rhs(tmp, k2);
        axpy(p.p_, k2, 0.5 * dt_, tmp);
        rhs(tmp, k3);
        axpy(p.p_, k3, dt_, tmp);
        rhs(tmp, k4);
        std::vector<double> out(p.size());
        double negative_mass = 0.0;
        double mass = 0.0;
        for (std::size_t j = 0; j < out.size(); ++j) {
            double v = p.p_[j] +
                       dt_ / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            if (v < 0.0) {
                negative_mass += v;
                v = 0.0;
            }
            out[j] = v;
            mass += v;
        }
        if (negative_mass * p.dtheta() < -1e-6)
            throw numerical_error("FpeSolver: step produced negative mass " +
                                  std::to_string(negative_mass * p.dtheta()));
        const double scale = 1.0 / (mass * p.dtheta());
        for (double& v : out) v *= scale;
        return ThetaDistribution(std::move(out));
    }

    ThetaDistribution evolve(ThetaDistribution p, double duration) const {
        if (duration < 0.0) throw config_error("FpeSolver: negative duration");
        const long n = static_cast<long>(std::ceil(duration / dt_ - 1e-12));
        for (long i = 0; i < n; ++i) p = step(p);
        return p;
    }

    /// Evolve until snapshots one relaxation-time apart differ by less than
    /// l1_tol, or max_duration elapses (then throws).
    ThetaDistribution relax_to_stationary(ThetaDistribution p, double check_interval,
                                          double l1_tol = 1e-8,
                                          double max_duration = 1e4) const {
        double elapsed = 0.0;
        while (elapsed < max_duration) {
            ThetaDistribution next = evolve(p, check_interval);
            elapsed += check_interval;
            if (next.l1_distance(p) < l1_tol) return next;
            p = std::move(next);
        }
        throw numerical_error("FpeSolver: no stationary state within max_duration");
    }

private:
    static void axpy(const std::vector<double>& x, const std::vector<double>& k,
                     double h, std::vector<double>& out) {
        out.resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + h * k[j];
    }

    void rhs(const std::vector<double>& p, std::vector<double>& out) const {
        const std::size_t n = p.size();
        out.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jp = (j + 1 == n) ? 0 : j + 1;
            const std::size_t jm = (j == 0) ? n - 1 : j - 1;
            const double adv = (a_[jp] * p[jp] - a_[jm] * p[jm]) * inv_2dth_;
            const double dif = (b2_[jp] * p[jp] - 2.0 * b2_[j] * p[j] +
                                b2_[jm] * p[jm]) *
                               inv_dth2_;
            out[j] = -adv + 0.5 * dif;
        }
    }

    FpeConfig cfg_;
    double dt_;
    std::vector<double> a_, b2_;
    double inv_2dth_ = 0.0, inv_dth2_ = 0.0;
};

/// One explicit step (convenience form of FpeSolver::step).
inline ThetaDistribution fpe_step(const ThetaDistribution& p,
                                  const ModelParams& params,
                                  const FpeConfig& cfg) {
    return FpeSolver(params, cfg).step(p);
}

/// Repeated stepping for a given duration.
inline ThetaDistribution evolve_to(const ThetaDistribution& p,
                                   const ModelParams& params,
                                   const FpeConfig& cfg, double duration) {
    return FpeSolver(params, cfg).evolve(p, duration);
}

} // namespace qsmooth
