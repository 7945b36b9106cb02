#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qsmooth/core.hpp"
#include "qsmooth/fpe.hpp"
#include "qsmooth/pre_solver.hpp"

// Smoothing estimators and their cost functions: the classical hidden-Markov
// forward/backward passes, the classical-regime quantum smoother, the SWV
// (Jordan-product) construction, the homodyne and adaptive smoothers, the
// Monte Carlo estimator over weighted true-state ensembles, and the
// trace-square-deviation / purity / entropy comparisons.

namespace qsmooth {

// ---------------------------------------------------------------------------
// Classical hidden Markov model

/// Discrete-time HMM transition matrix, row-stochastic:
/// transition(i, j) = P(x_{t+1} = j | x_t = i).
struct HmmModel {
    Eigen::MatrixXd transition;

    void validate() const {
        if (transition.rows() != transition.cols() || transition.rows() < 1)
            throw validation_error("HmmModel: transition must be square");
        for (Eigen::Index i = 0; i < transition.rows(); ++i) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < transition.cols(); ++j) {
                if (transition(i, j) < 0.0)
                    throw validation_error("HmmModel: negative transition entry");
                s += transition(i, j);
            }
            if (std::abs(s - 1.0) > 1e-10)
                throw validation_error("HmmModel: row " + std::to_string(i) +
                                       " does not sum to 1");
        }
    }

    /// Euler discretization of a rate generator Q (rows sum to 0) over dt.
    static HmmModel from_rates(const Eigen::MatrixXd& q, double dt) {
        Eigen::MatrixXd t =
            Eigen::MatrixXd::Identity(q.rows(), q.cols()) + dt * q;
        HmmModel m{t};
        m.validate();
        return m;
    }
};

/// Per-step observation likelihoods: likelihoods[t](x) = p(y_{t+1} | x).
using LikelihoodPath = std::vector<Eigen::VectorXd>;

/// Forward pass: beliefs wp_F(x; t) = wp(x; t | past record), normalized each
/// step. Output has size record+1; entry 0 is the prior.
inline std::vector<ClassicalBelief> classical_hmm_filter(
    const HmmModel& model, const ClassicalBelief& prior,
    const LikelihoodPath& likelihoods) {
    model.validate();
    const auto d = model.transition.rows();
    if (static_cast<Eigen::Index>(prior.size()) != d)
        throw validation_error("classical_hmm_filter: prior dimension mismatch");
    std::vector<ClassicalBelief> out;
    out.reserve(likelihoods.size() + 1);
    out.push_back(prior);
    Eigen::VectorXd alpha =
        Eigen::Map<const Eigen::VectorXd>(prior.values().data(), d);
    for (const Eigen::VectorXd& lik : likelihoods) {
        if (lik.size() != d)
            throw validation_error("classical_hmm_filter: likelihood dimension");
        alpha = (model.transition.transpose() * alpha).cwiseProduct(lik);
        const double norm = alpha.sum();
        if (norm <= 0.0)
            throw inconsistent_record_error(
                "classical_hmm_filter: zero-likelihood record");
        alpha /= norm;
        out.push_back(ClassicalBelief::from_vector(
            std::vector<double>(alpha.data(), alpha.data() + d)));
    }
    return out;
}

/// Backward pass: effects E_R(x; t) = p(future record | x at t), un-normalized
/// but rescaled each step to keep the numbers bounded. Entry T is uniform.
inline std::vector<ClassicalEffect> classical_hmm_retrofilter(
    const HmmModel& model, const LikelihoodPath& likelihoods) {
    model.validate();
    const auto d = model.transition.rows();
    const std::size_t n = likelihoods.size();
    std::vector<ClassicalEffect> out(n + 1,
                                     ClassicalEffect::from_vector(
                                         std::vector<double>(d, 1.0)));
    Eigen::VectorXd beta = Eigen::VectorXd::Ones(d);
    for (std::size_t t = n; t-- > 0;) {
        const Eigen::VectorXd& lik = likelihoods[t];
        if (lik.size() != d)
            throw validation_error("classical_hmm_retrofilter: likelihood dimension");
        beta = model.transition * lik.cwiseProduct(beta).matrix();
        const double scale = beta.maxCoeff();
        if (scale <= 0.0)
            throw inconsistent_record_error(
                "classical_hmm_retrofilter: zero-likelihood record");
        beta /= scale;
        out[t] = ClassicalEffect::from_vector(
            std::vector<double>(beta.data(), beta.data() + d));
    }
    return out;
}

/// wp_S(x; t) proportional to E_R(x; t) wp_F(x; t), normalized.
inline ClassicalBelief classical_hmm_smooth_at(const ClassicalBelief& filtered,
                                               const ClassicalEffect& effect) {
    if (filtered.size() != effect.size())
        throw validation_error("classical_hmm_smooth: dimension mismatch");
    std::vector<double> w(filtered.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = filtered[i] * effect[i];
    double s = 0.0;
    for (double v : w) s += v;
    if (s <= 0.0)
        throw inconsistent_record_error(
            "classical_hmm_smooth: filtered state and effect are inconsistent");
    return ClassicalBelief::normalized(std::move(w));
}

inline std::vector<ClassicalBelief> classical_hmm_smooth(
    std::span<const ClassicalBelief> filter_path,
    std::span<const ClassicalEffect> effect_path) {
    if (filter_path.size() != effect_path.size())
        throw validation_error("classical_hmm_smooth: path length mismatch");
    std::vector<ClassicalBelief> out;
    out.reserve(filter_path.size());
    for (std::size_t t = 0; t < filter_path.size(); ++t)
        out.push_back(classical_hmm_smooth_at(filter_path[t], effect_path[t]));
    return out;
}

// ---------------------------------------------------------------------------
// Quantum smoothers

namespace detail {

/// Frobenius norm of [rho, E] with E trace-normalized (scale-free).
inline double commutator_defect(const DensityMatrix& rho, const Effect& e) {
    const Mat2 en = e.normalized().matrix();
    const Mat2 c = rho.matrix() * en - en * rho.matrix();
    return c.norm();
}

} // namespace detail

/// Classical-regime smoother: in the shared eigenbasis of rho_F and E the
/// smoothed state has diagonal entries proportional to E_m wp_F(m). Requires
/// co-diagonal inputs (commutator norm below 1e-8 after normalizing E).
inline DensityMatrix classical_quantum_smooth(const DensityMatrix& rho_f,
                                              const Effect& e) {
    if (detail::commutator_defect(rho_f, e) > 1e-8)
        throw validation_error(
            "classical_quantum_smooth: inputs do not commute within 1e-8");
    // diagonalize whichever input has the cleaner spectral gap
    const Mat2 en = e.normalized().matrix();
    auto ev_rho = hermitian_eigenvalues(rho_f.matrix());
    auto ev_e = hermitian_eigenvalues(en);
    const Mat2& basis_of = (ev_rho[1] - ev_rho[0] >= ev_e[1] - ev_e[0])
                               ? rho_f.matrix()
                               : en;
    if (std::max(ev_rho[1] - ev_rho[0], ev_e[1] - ev_e[0]) < 1e-14)
        return rho_f;  // both proportional to identity
    Eigen::SelfAdjointEigenSolver<Mat2> es(basis_of);
    const Mat2 v = es.eigenvectors();
    Mat2 out = Mat2::Zero();
    double norm = 0.0;
    std::array<double, 2> w{};
    for (int m = 0; m < 2; ++m) {
        const Vec2 psi = v.col(m);
        const double pf = psi.dot(rho_f.matrix() * psi).real();
        const double em = psi.dot(e.matrix() * psi).real();
        w[m] = std::max(0.0, pf) * std::max(0.0, em);
        norm += w[m];
    }
    if (norm <= 0.0)
        throw inconsistent_record_error(
            "classical_quantum_smooth: zero total weight");
    for (int m = 0; m < 2; ++m)
        out += (w[m] / norm) * (v.col(m) * v.col(m).adjoint());
    return DensityMatrix::from_matrix(out);
}

struct SwvResult {
    Mat2 matrix;             // Hermitian, unit trace, possibly indefinite
    bool positive_semidefinite = false;
    double min_eigenvalue = 0.0;
};

/// Normalized Jordan product (E rho + rho E)/2 Tr[E rho]. Hermitian always;
/// positivity is reported, not enforced.
inline SwvResult swv_state(const DensityMatrix& rho_f, const Effect& e) {
    const double w = effect_state_overlap(e, rho_f);
    if (w <= 0.0)
        throw inconsistent_record_error("swv_state: Tr[E rho] <= 0");
    Mat2 j = 0.5 * (e.matrix() * rho_f.matrix() + rho_f.matrix() * e.matrix()) / w;
    j = 0.5 * (j + j.adjoint().eval());
    SwvResult out;
    out.matrix = j;
    out.min_eigenvalue = hermitian_eigenvalues(j)[0];
    out.positive_semidefinite = out.min_eigenvalue >= tol::psd_floor;
    return out;
}

/// Homodyne smoother: rho_S proportional to dth sum Tr[E rho(th)] p(th) rho(th).
/// A convex mixture of circle states, so always a valid state.
inline DensityMatrix homodyne_smooth(const ThetaDistribution& p,
                                     const Effect& e) {
    const Mat2& em = e.matrix();
    const double tr_e = em.trace().real();
    const double ex = (em * pauli::x).trace().real();
    const double ez = (em * pauli::z).trace().real();
    double wsum = 0.0, xs = 0.0, zs = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double th = p.theta(j);
        const double s = std::sin(th), c = std::cos(th);
        const double w = 0.5 * (tr_e + ex * s + ez * c) * p[j];
        wsum += w;
        xs += w * s;
        zs += w * c;
    }
    if (wsum <= 0.0)
        throw inconsistent_record_error("homodyne_smooth: zero total weight");
    return DensityMatrix::from_bloch(BlochVector{xs / wsum, 0.0, zs / wsum});
}

/// Posterior weights of the three PRE states given the effect:
/// w_i proportional to Tr[E rho(th_i)] wp_i. These are the barycentric
/// coordinates of the smoothed state in the PRE triangle.
inline std::array<double, 3> adaptive_smooth_weights(const PreEnsemble& pre,
                                                     const Effect& e) {
    std::array<double, 3> w{};
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        w[i] = effect_state_overlap(e, pre.state(i)) * pre.occupation[i];
        if (w[i] < 0.0) w[i] = 0.0;
        sum += w[i];
    }
    if (sum <= 0.0)
        throw inconsistent_record_error("adaptive_smooth: zero total weight");
    for (double& v : w) v /= sum;
    return w;
}

inline DensityMatrix adaptive_smooth(const PreEnsemble& pre, const Effect& e) {
    const auto w = adaptive_smooth_weights(pre, e);
    Mat2 m = Mat2::Zero();
    for (int i = 0; i < 3; ++i) m += w[i] * pre.state(i).matrix();
    return DensityMatrix::from_matrix(m);
}

// ---------------------------------------------------------------------------
// Monte Carlo smoother

struct McSmoothResult {
    DensityMatrix state = maximally_mixed;
    double effective_sample_size = 0.0;
    bool low_ess_warning = false;  // importance weights degenerated (< 100)
};

/// Weighted average of true states. Weights are Tr[E rho_T] up to a common
/// factor; the sum runs in input order so results are reproducible.
inline McSmoothResult mc_smooth(std::span<const DensityMatrix> states,
                                std::span<const double> weights) {
    if (states.empty() || states.size() != weights.size())
        throw validation_error("mc_smooth: empty or mismatched ensemble");
    Mat2 acc = Mat2::Zero();
    double wsum = 0.0, w2sum = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double w = weights[i];
        if (w < 0.0) throw validation_error("mc_smooth: negative weight");
        acc += w * states[i].matrix();
        wsum += w;
        w2sum += w * w;
    }
    if (wsum <= 0.0)
        throw inconsistent_record_error("mc_smooth: zero total weight");
    McSmoothResult out;
    out.state = DensityMatrix::from_matrix(acc / wsum);
    out.effective_sample_size = wsum * wsum / w2sum;
    out.low_ess_warning = out.effective_sample_size < 100.0;
    return out;
}

// ---------------------------------------------------------------------------
// Cost functions

/// Minimum expected trace-square deviation, E{P[rho_T]} - P[rho_C], attained
/// when the conditioned state is the ensemble mean (checked to 1e-6).
inline double expected_cost_optimal(const DensityMatrix& conditioned,
                                    std::span<const DensityMatrix> states,
                                    std::span<const double> weights) {
    if (states.empty() || states.size() != weights.size())
        throw validation_error("expected_cost_optimal: bad ensemble");
    Mat2 mean = Mat2::Zero();
    double wsum = 0.0, mean_purity = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        mean += weights[i] * states[i].matrix();
        mean_purity += weights[i] * purity(states[i]);
        wsum += weights[i];
    }
    if (wsum <= 0.0) throw validation_error("expected_cost_optimal: zero weight");
    mean /= wsum;
    mean_purity /= wsum;
    if ((mean - conditioned.matrix()).cwiseAbs().maxCoeff() > 1e-6)
        throw validation_error(
            "expected_cost_optimal: conditioned state is not the ensemble mean");
    return mean_purity - purity(conditioned);
}

/// Expected cost of the filtered estimate judged with the past-future record,
/// valid when the true states are pure: 1 - 2 Tr[rho_F rho_S] + P(rho_F).
inline double expected_cost_filtered_under_smoothing(const DensityMatrix& rho_f,
                                                     const DensityMatrix& rho_s) {
    return 1.0 - 2.0 * (rho_f.matrix() * rho_s.matrix()).trace().real() +
           purity(rho_f);
}

/// Expected cost of the smoothed estimate itself when the true states are
/// pure: 1 - P(rho_S).
inline double expected_cost_smoothed_pure(const DensityMatrix& rho_s) {
    return 1.0 - purity(rho_s);
}

/// P = sum_{T,T'} w_T w_T' Tr[rho_T rho_T']; equals the purity of the
/// weighted mean. Weights must already be normalized.
inline double purity_overlap_expansion(std::span<const DensityMatrix> states,
                                       std::span<const double> weights) {
    if (states.size() != weights.size())
        throw validation_error("purity_overlap_expansion: size mismatch");
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-8)
        throw validation_error("purity_overlap_expansion: weights not normalized");
    double p = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = 0; j < states.size(); ++j)
            p += weights[i] * weights[j] *
                 (states[i].matrix() * states[j].matrix()).trace().real();
    return p;
}

/// -sum lambda ln lambda with 0 ln 0 = 0.
inline double von_neumann_entropy(const DensityMatrix& rho) {
    auto ev = hermitian_eigenvalues(rho.matrix());
    double s = 0.0;
    for (double lam : ev)
        if (lam > 0.0) s -= lam * std::log(lam);
    return s;
}

// ---------------------------------------------------------------------------
// Scheme-dispatch plumbing

/// Inputs for one smoothing evaluation. Exactly one of the scheme payloads
/// (theta_density for homodyne, pre for adaptive, neither for the photon /
/// classical regime) may be present.
struct SmoothingInputs {
    DensityMatrix filtered = maximally_mixed;
    Effect effect = Effect::identity();
    std::optional<ThetaDistribution> theta_density;
    std::optional<PreEnsemble> pre;

    void validate() const {
        if (theta_density.has_value() && pre.has_value())
            throw validation_error("SmoothingInputs: more than one scheme payload");
    }
};

inline DensityMatrix smooth(const SmoothingInputs& in) {
    in.validate();
    if (in.theta_density) return homodyne_smooth(*in.theta_density, in.effect);
    if (in.pre) return adaptive_smooth(*in.pre, in.effect);
    return classical_quantum_smooth(in.filtered, in.effect);
}

} // namespace qsmooth
