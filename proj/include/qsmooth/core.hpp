#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "qsmooth/errors.hpp"

// Value types and algebra for a single qubit: states, effects, measurement
// operators, and the discrete classical analogues. Everything here is an
// immutable value; all operations are pure functions.
//
// Basis convention: index 0 = excited |e>, index 1 = ground |g>, so that
// sigma_z = diag(1, -1), sigma_- = |g><e|, sigma_+ = |e><g|.

namespace qsmooth {

using complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

namespace pauli {

inline const Mat2 identity = Mat2::Identity();
inline const Mat2 x = (Mat2() << 0, 1, 1, 0).finished();
inline const Mat2 y = (Mat2() << 0, complex(0, -1), complex(0, 1), 0).finished();
inline const Mat2 z = (Mat2() << 1, 0, 0, -1).finished();
inline const Mat2 minus = (Mat2() << 0, 0, 1, 0).finished();  // |g><e|
inline const Mat2 plus = (Mat2() << 0, 1, 0, 0).finished();   // |e><g|

inline const Mat2 proj_e = (Mat2() << 1, 0, 0, 0).finished();
inline const Mat2 proj_g = (Mat2() << 0, 0, 0, 1).finished();

} // namespace pauli

namespace tol {

inline constexpr double hermiticity = 1e-12;
inline constexpr double trace = 1e-10;
inline constexpr double psd_floor = -1e-10;
inline constexpr double belief_sum = 1e-10;
inline constexpr double completeness = 1e-9;

} // namespace tol

inline bool is_hermitian(const Mat2& m, double eps = tol::hermiticity) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= eps;
}

/// Eigenvalues of a Hermitian 2x2 matrix, ascending. Closed form.
inline std::array<double, 2> hermitian_eigenvalues(const Mat2& m) {
    const double tr = m.trace().real();
    const double det = m.determinant().real();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return {tr / 2.0 - disc, tr / 2.0 + disc};
}

/// Model rates: delta (Alice's emission channel), gamma (Bob's emission
/// channel), epsilon (absorption channel). When delta_zero_limit is set,
/// delta is treated as exactly zero in all inter-jump dynamics while a
/// terminal observed jump may still be imposed as a conditioning event.
struct ModelParams {
    double delta = 0.0;
    double gamma = 1.0;
    double epsilon = 0.05;
    bool delta_zero_limit = true;

    double effective_delta() const { return delta_zero_limit ? 0.0 : delta; }

    void validate() const {
        if (!(delta >= 0.0))
            throw validation_error("ModelParams: delta must be >= 0");
        if (!(gamma > 0.0))
            throw validation_error("ModelParams: gamma must be > 0");
        if (!(epsilon > 0.0))
            throw validation_error("ModelParams: epsilon must be > 0");
    }
};

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm2() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(norm2()); }
};

/// 2x2 Hermitian, unit-trace, positive-semidefinite matrix.
///
/// Construction validates: Hermiticity to 1e-12 entrywise, trace to 1e-10,
/// eigenvalues >= -1e-10. Eigenvalues in [-1e-10, 0) are clipped to zero with
/// renormalization (integrator round-off); anything below raises.
class DensityMatrix {
public:
    static DensityMatrix from_matrix(const Mat2& m) {
        if (!is_hermitian(m))
            throw validation_error("DensityMatrix: not Hermitian within 1e-12");
        if (std::abs(m.trace().real() - 1.0) > tol::trace ||
            std::abs(m.trace().imag()) > tol::trace)
            throw validation_error("DensityMatrix: trace != 1 within 1e-10");
        Mat2 h = (m + m.adjoint()) / 2.0;
        auto ev = hermitian_eigenvalues(h);
        if (ev[0] < tol::psd_floor)
            throw validation_error("DensityMatrix: eigenvalue " +
                                   std::to_string(ev[0]) + " below -1e-10");
        if (ev[0] < 0.0) {
            // clip the round-off negative eigenvalue and renormalize
            ++clip_counter();
            Eigen::SelfAdjointEigenSolver<Mat2> es(h);
            Eigen::Vector2d lam = es.eigenvalues().cwiseMax(0.0);
            h = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
            h /= h.trace().real();
        }
        return DensityMatrix(h);
    }

    /// Running count of round-off clips in this thread; lets tests assert
    /// that a computation produced valid states without clipping.
    static std::uint64_t& clip_counter() {
        thread_local std::uint64_t count = 0;
        return count;
    }

    static DensityMatrix from_bloch(const BlochVector& r) {
        if (r.norm2() > 1.0 + 1e-10)
            throw validation_error("BlochVector: |r| > 1 within 1e-10");
        Mat2 m = 0.5 * (pauli::identity + r.x * pauli::x + r.y * pauli::y +
                        r.z * pauli::z);
        // renormalize onto the sphere if round-off pushed |r| past 1
        if (r.norm2() > 1.0) {
            const double s = 1.0 / r.norm();
            m = 0.5 * (pauli::identity +
                       s * (r.x * pauli::x + r.y * pauli::y + r.z * pauli::z));
        }
        return DensityMatrix(m);
    }

    const Mat2& matrix() const { return m_; }

    double entry_real(int i, int j) const { return m_(i, j).real(); }
    double excited_population() const { return m_(0, 0).real(); }
    double ground_population() const { return m_(1, 1).real(); }

    friend bool operator==(const DensityMatrix& a, const DensityMatrix& b) {
        return a.m_ == b.m_;
    }

private:
    explicit DensityMatrix(const Mat2& m) : m_(m) {}
    Mat2 m_;
};

inline const DensityMatrix excited_state =
    DensityMatrix::from_matrix(pauli::proj_e);
inline const DensityMatrix ground_state =
    DensityMatrix::from_matrix(pauli::proj_g);
inline const DensityMatrix maximally_mixed =
    DensityMatrix::from_matrix(0.5 * pauli::identity);

/// r_i = Tr[rho sigma_i].
inline BlochVector bloch_from_density(const DensityMatrix& rho) {
    const Mat2& m = rho.matrix();
    return BlochVector{(m * pauli::x).trace().real(),
                       (m * pauli::y).trace().real(),
                       (m * pauli::z).trace().real()};
}

inline DensityMatrix density_from_bloch(const BlochVector& r) {
    return DensityMatrix::from_bloch(r);
}

/// Tr[rho^2], in [1/2, 1] for a qubit.
inline double purity(const DensityMatrix& rho) {
    return (rho.matrix() * rho.matrix()).trace().real();
}

/// Tr[(a-b)^2] >= 0; equals |r_a - r_b|^2 / 2 in Bloch form.
inline double trace_square_deviation(const DensityMatrix& a,
                                     const DensityMatrix& b) {
    Mat2 d = a.matrix() - b.matrix();
    return (d * d).trace().real();
}

/// Pure state on the x-z great circle: (1 + sin(theta) sx + cos(theta) sz)/2,
/// theta measured from the positive z axis (theta = 0 is |e>, pi is |g>).
inline DensityMatrix pure_state_on_circle(double theta) {
    theta = std::fmod(theta, two_pi);
    return DensityMatrix::from_bloch(
        BlochVector{std::sin(theta), 0.0, std::cos(theta)});
}

/// Ket of pure_state_on_circle: (cos(theta/2), sin(theta/2)), real amplitudes.
inline Vec2 circle_ket(double theta) {
    return Vec2(std::cos(theta / 2.0), std::sin(theta / 2.0));
}

/// Ket orthogonal to circle_ket(theta).
inline Vec2 circle_ket_orth(double theta) {
    return Vec2(-std::sin(theta / 2.0), std::cos(theta / 2.0));
}

/// Local-oscillator phases for the two diffusively monitored channels.
/// Defaults are X-homodyne (phi = 0) on both.
struct HomodyneConfig {
    double phi_gamma = 0.0;
    double phi_epsilon = 0.0;
};

/// 2x2 Hermitian PSD matrix with arbitrary positive norm. Operations that
/// consume an Effect must be invariant under rescaling by any positive
/// constant; the norm is retained only for forward-backward bookkeeping.
class Effect {
public:
    static Effect from_matrix(const Mat2& m) {
        if (!is_hermitian(m))
            throw validation_error("Effect: not Hermitian within 1e-12");
        Mat2 h = (m + m.adjoint()) / 2.0;
        auto ev = hermitian_eigenvalues(h);
        const double scale = std::max(1.0, std::abs(h.trace().real()) / 2.0);
        if (ev[0] < tol::psd_floor * scale)
            throw validation_error("Effect: negative eigenvalue " +
                                   std::to_string(ev[0]));
        return Effect(h);
    }

    static Effect identity() { return Effect(pauli::identity); }

    const Mat2& matrix() const { return m_; }

    /// Half the trace ("lambda" in steady state).
    double half_norm() const { return m_.trace().real() / 2.0; }

    /// Trace-normalized copy (trace 2, identity-like scale).
    Effect normalized() const {
        const double t = m_.trace().real();
        if (t <= 0.0) throw degenerate_effect_error("Effect: zero trace");
        return Effect(2.0 * m_ / t);
    }

    double excited_component() const { return m_(0, 0).real(); }
    double ground_component() const { return m_(1, 1).real(); }

private:
    explicit Effect(const Mat2& m) : m_(m) {}
    Mat2 m_;
};

inline double effect_state_overlap(const Effect& e, const DensityMatrix& rho) {
    return (e.matrix() * rho.matrix()).trace().real();
}

/// One Kraus operator of a complete set over the outcomes of one time step.
struct MeasurementOperator {
    Mat2 m;
};

/// Max-norm deviation of sum M^dag M from the identity.
inline double completeness_defect(std::span<const MeasurementOperator> ops) {
    Mat2 s = Mat2::Zero();
    for (const auto& op : ops) s += op.m.adjoint() * op.m;
    return (s - pauli::identity).cwiseAbs().maxCoeff();
}

inline void check_complete(std::span<const MeasurementOperator> ops) {
    const double d = completeness_defect(ops);
    if (d > tol::completeness)
        throw validation_error("MeasurementOperator set incomplete: defect " +
                               std::to_string(d));
}

/// Probability vector over d discrete hidden states.
class ClassicalBelief {
public:
    static ClassicalBelief from_vector(std::vector<double> p) {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0)
                throw validation_error("ClassicalBelief: negative entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol::belief_sum)
            throw validation_error("ClassicalBelief: sum != 1 within 1e-10");
        return ClassicalBelief(std::move(p));
    }

    static ClassicalBelief normalized(std::vector<double> w) {
        double sum = 0.0;
        for (double v : w) {
            if (v < 0.0)
                throw validation_error("ClassicalBelief: negative entry");
            sum += v;
        }
        if (sum <= 0.0)
            throw inconsistent_record_error("ClassicalBelief: zero total weight");
        for (double& v : w) v /= sum;
        return ClassicalBelief(std::move(w));
    }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& values() const { return p_; }

private:
    explicit ClassicalBelief(std::vector<double> p) : p_(std::move(p)) {}
    std::vector<double> p_;
};

/// Nonnegative vector over d discrete hidden states, arbitrary norm.
class ClassicalEffect {
public:
    static ClassicalEffect from_vector(std::vector<double> e) {
        for (double v : e)
            if (v < 0.0)
                throw validation_error("ClassicalEffect: negative entry");
        return ClassicalEffect(std::move(e));
    }

    std::size_t size() const { return e_.size(); }
    double operator[](std::size_t i) const { return e_[i]; }
    const std::vector<double>& values() const { return e_; }

private:
    explicit ClassicalEffect(std::vector<double> e) : e_(std::move(e)) {}
    std::vector<double> e_;
};

} // namespace qsmooth
