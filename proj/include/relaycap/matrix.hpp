// SPDX-License-Identifier: Apache-2.0
//
// relaycap: capacity bounds and partial decode-and-forward rates for
// Gaussian MIMO relay channels.
//
// Hermitian/PSD matrix calculus shared by all solvers: log-determinants,
// Loewner-order tests, feasibility projections, matrix square roots,
// pseudoinverses and SVD helpers. All logarithms are natural; conversion
// to bits happens only at reporting boundaries.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <cmath>

namespace relaycap {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kLog2 = 0.6931471805599453094;

inline double nats_to_bits(double nats) { return nats / kLog2; }
inline double bits_to_nats(double bits) { return bits * kLog2; }

struct Tolerance {
    double psd_eig = 1e-9;   // eigenvalue slack, dimensionless
    double residual = 1e-8;  // identity / reconstruction residuals
    double rate = 1e-4;      // bits
};

struct MatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotPositiveDefinite : MatrixError {
    using MatrixError::MatrixError;
};
struct DimensionMismatch : MatrixError {
    using MatrixError::MatrixError;
};

// Symmetrize; all Hermitian inputs pass through this so that eigensolvers
// never see asymmetric rounding noise.
inline Mat herm(const Mat& m) { return 0.5 * (m + m.adjoint()); }

inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }

inline double fro_norm(const Mat& m) { return m.norm(); }

// Eigendecomposition of a Hermitian matrix, eigenvalues ascending. The 1x1
// and 2x2 cases are closed-form: these sizes dominate the solver inner loops
// and the iterative tridiagonal path costs ~20x more there.
struct EigHerm {
    RVec w;
    Mat V;
    const RVec& eigenvalues() const { return w; }
    const Mat& eigenvectors() const { return V; }
};

inline EigHerm eig_herm(const Mat& m) {
    const Eigen::Index n = m.rows();
    EigHerm r;
    if (n == 0) {
        r.w = RVec(0);
        r.V = Mat(0, 0);
        return r;
    }
    if (n == 1) {
        r.w = RVec::Constant(1, m(0, 0).real());
        r.V = Mat::Identity(1, 1);
        return r;
    }
    if (n == 2) {
        const double a = m(0, 0).real();
        const double b = m(1, 1).real();
        const Cplx c = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
        const double h = 0.5 * (a - b);
        const double rad = std::hypot(h, std::abs(c));
        const double mu = 0.5 * (a + b);
        r.w = RVec(2);
        r.w[0] = mu - rad;
        r.w[1] = mu + rad;
        r.V = Mat(2, 2);
        // (c, lam - a) solves the system for eigenvalue lam; fall back to
        // the coordinate basis when the matrix is (nearly) diagonal
        const double offscale = std::abs(c);
        if (offscale > 1e-150 &&
            offscale > 1e-16 * std::max({1.0, std::abs(a), std::abs(b)})) {
            for (int k = 0; k < 2; ++k) {
                Cplx v0 = c;
                double v1 = r.w[k] - a;
                // pick the better-conditioned of the two row formulas
                const double n1 = std::norm(v0) + v1 * v1;
                const Cplx u0c = std::conj(c);
                const double u1 = r.w[k] - b;
                const double n2 = std::norm(u0c) + u1 * u1;
                if (n2 > n1) {
                    r.V(0, k) = u1 / std::sqrt(n2);
                    r.V(1, k) = u0c / std::sqrt(n2);
                } else {
                    r.V(0, k) = v0 / std::sqrt(n1);
                    r.V(1, k) = v1 / std::sqrt(n1);
                }
            }
        } else {
            if (a <= b)
                r.V << 1, 0, 0, 1;
            else
                r.V << 0, 1, 1, 0;
        }
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(herm(m));
    if (es.info() != Eigen::Success)
        throw MatrixError("hermitian eigendecomposition failed");
    r.w = es.eigenvalues();
    r.V = es.eigenvectors();
    return r;
}

// Natural-log determinant of a positive definite Hermitian matrix.
inline double logdet_pd(const Mat& m, const Tolerance& tol = {}) {
    auto es = eig_herm(m);
    const double scale = std::max(1.0, fro_norm(m));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double ev = es.eigenvalues()[i];
        if (ev < -tol.psd_eig * scale)
            throw NotPositiveDefinite("logdet_pd: eigenvalue " +
                                      std::to_string(ev) + " below tolerance");
        acc += std::log(std::max(ev, 1e-300));
    }
    return acc;
}

// A <= B in the Loewner order, up to eigenvalue slack.
inline bool loewner_leq(const Mat& a, const Mat& b, const Tolerance& tol = {}) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("loewner_leq: dimension mismatch");
    const Mat d = herm(b - a);
    auto es = eig_herm(d);
    const double slack = tol.psd_eig * std::max(1.0, fro_norm(d));
    return es.eigenvalues().minCoeff() >= -slack;
}

inline double min_eig(const Mat& m) {
    return eig_herm(m).eigenvalues().minCoeff();
}

// Clip negative eigenvalues to zero.
inline Mat psd_part(const Mat& m) {
    auto es = eig_herm(m);
    RVec ev = es.eigenvalues().cwiseMax(0.0);
    return herm(es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Cplx>() *
                es.eigenvectors().adjoint());
}

// Frobenius-nearest X with X >= 0 and tr(X) <= P: clip eigenvalues at zero,
// then, if the trace still exceeds P, shift the spectrum down by a common
// water level and re-clip.
inline Mat project_psd_trace(const Mat& m, double P, const Tolerance& = {}) {
    if (P <= 0.0) throw MatrixError("project_psd_trace: P must be positive");
    auto es = eig_herm(m);
    RVec ev = es.eigenvalues().cwiseMax(0.0);
    double tr = ev.sum();
    if (tr > P) {
        double lo = 0.0, hi = es.eigenvalues().maxCoeff();
        for (int it = 0; it < 200; ++it) {
            double mu = 0.5 * (lo + hi);
            double s = (es.eigenvalues().array() - mu).cwiseMax(0.0).sum();
            (s > P ? lo : hi) = mu;
        }
        double mu = 0.5 * (lo + hi);
        ev = (es.eigenvalues().array() - mu).cwiseMax(0.0);
        // exact trace on the active set
        double excess = ev.sum() - P;
        if (excess > 0.0) {
            int active = (ev.array() > 0.0).count();
            if (active > 0)
                for (Eigen::Index i = 0; i < ev.size(); ++i)
                    if (ev[i] > 0.0) ev[i] = std::max(0.0, ev[i] - excess / active);
        }
    }
    return herm(es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Cplx>() *
                es.eigenvectors().adjoint());
}

// T with T * Z * T^H = I for positive definite Z (T = Z^{-1/2}, Hermitian).
inline Mat inv_sqrt(const Mat& z, const Tolerance& tol = {}) {
    auto es = eig_herm(z);
    const double scale = std::max(1.0, fro_norm(z));
    RVec inv(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < inv.size(); ++i) {
        double ev = es.eigenvalues()[i];
        if (ev <= tol.psd_eig * scale)
            throw NotPositiveDefinite("inv_sqrt: matrix not positive definite");
        inv[i] = 1.0 / std::sqrt(ev);
    }
    return herm(es.eigenvectors() * inv.asDiagonal().toDenseMatrix().cast<Cplx>() *
                es.eigenvectors().adjoint());
}

inline Mat sqrt_psd(const Mat& z) {
    auto es = eig_herm(z);
    RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return herm(es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<Cplx>() *
                es.eigenvectors().adjoint());
}

struct SvdResult {
    Mat u;
    RVec sigma;  // nonincreasing, nonnegative
    Mat v;
};

inline SvdResult svd(const Mat& m) {
    Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

inline Mat pinv(const Mat& m, double rel_tol = 1e-12) {
    if (m.size() == 0) return m.adjoint();
    Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVec& s = dec.singularValues();
    double cutoff = rel_tol * std::max<double>(m.rows(), m.cols()) *
                    (s.size() ? s[0] : 0.0);
    RVec si = RVec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > cutoff) si[i] = 1.0 / s[i];
    return dec.matrixV() * si.asDiagonal().toDenseMatrix().cast<Cplx>() *
           dec.matrixU().adjoint();
}

// Condition number from singular values; inf for singular input.
inline double cond_number(const Mat& m) {
    Eigen::JacobiSVD<Mat> dec(m);
    const RVec& s = dec.singularValues();
    if (s.size() == 0 || s[s.size() - 1] <= 0.0)
        return std::numeric_limits<double>::infinity();
    return s[0] / s[s.size() - 1];
}

}  // namespace relaycap
