// SPDX-License-Identifier: Apache-2.0
//
// Channel instance data model, validation and transforms: noise whitening,
// zero-padding to square form, SVD singular-value perturbation, conversion
// of an invertible-gain channel to an equivalent aligned channel, and
// degradedness classification.

#pragma once

#include <relaycap/matrix.hpp>
#include <string>
#include <utility>

namespace relaycap {

struct ChannelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidDimensions : ChannelError {
    using ChannelError::ChannelError;
};
struct NoiseNotPD : ChannelError {
    using ChannelError::ChannelError;
};
struct NonpositivePower : ChannelError {
    using ChannelError::ChannelError;
};
struct NonpositiveEpsilon : ChannelError {
    using ChannelError::ChannelError;
};
struct GainNotInvertible : ChannelError {
    using ChannelError::ChannelError;
};

// y_R = H_SR x_S + n_R,  n_R ~ CN(0, Z_R)
// y_D = H_SD x_S + H_RD x_R + n_D,  n_D ~ CN(0, Z_D)
// with tr(C_S) <= P_S and tr(C_R) <= P_R.
struct ChannelInstance {
    Mat H_SR;  // N_R x N_S
    Mat H_SD;  // N_D x N_S
    Mat H_RD;  // N_D x N_R
    Mat Z_R;   // N_R x N_R, PD
    Mat Z_D;   // N_D x N_D, PD
    double P_S = 1.0;
    double P_R = 1.0;
    std::string label;

    Eigen::Index ns() const { return H_SR.cols(); }
    Eigen::Index nr() const { return H_SR.rows(); }
    Eigen::Index nd() const { return H_SD.rows(); }
};

// Aligned channel: N_S = N_R = N_D = N, H_SR = H_SD = I. All structure
// lives in the noise covariances.
struct AlignedInstance {
    Mat Z_R;   // N x N, PD
    Mat Z_D;   // N x N, PD
    Mat H_RD;  // N x N
    double P_S = 1.0;
    double P_R = 1.0;
    std::string label;

    Eigen::Index n() const { return Z_R.rows(); }
};

enum class DegradednessClass { Degraded, ReverselyDegraded, General };

inline const char* to_string(DegradednessClass c) {
    switch (c) {
        case DegradednessClass::Degraded: return "degraded";
        case DegradednessClass::ReverselyDegraded: return "reversely-degraded";
        default: return "general";
    }
}

namespace detail {
inline void require_pd(const Mat& z, const char* field) {
    if (z.rows() != z.cols())
        throw InvalidDimensions(std::string(field) + ": not square");
    if (fro_norm(z - z.adjoint()) > 1e-10 * std::max(1.0, fro_norm(z)))
        throw NoiseNotPD(std::string(field) + ": not Hermitian");
    if (min_eig(z) <= 0.0)
        throw NoiseNotPD(std::string(field) + ": not positive definite");
}
}  // namespace detail

inline const ChannelInstance& validate(const ChannelInstance& c) {
    const auto ns = c.ns(), nr = c.nr(), nd = c.nd();
    if (ns < 1 || nr < 1 || nd < 1)
        throw InvalidDimensions("channel gain matrices must be nonempty");
    if (c.H_SD.cols() != ns)
        throw InvalidDimensions("H_SD: column count does not match H_SR");
    if (c.H_RD.rows() != nd || c.H_RD.cols() != nr)
        throw InvalidDimensions("H_RD: inconsistent with H_SR/H_SD");
    if (c.Z_R.rows() != nr) throw InvalidDimensions("Z_R: wrong dimension");
    if (c.Z_D.rows() != nd) throw InvalidDimensions("Z_D: wrong dimension");
    if (!c.H_SR.allFinite() || !c.H_SD.allFinite() || !c.H_RD.allFinite())
        throw InvalidDimensions("gain matrices must be finite");
    detail::require_pd(c.Z_R, "Z_R");
    detail::require_pd(c.Z_D, "Z_D");
    if (!(c.P_S > 0.0)) throw NonpositivePower("P_S must be positive");
    if (!(c.P_R > 0.0)) throw NonpositivePower("P_R must be positive");
    return c;
}

inline const AlignedInstance& validate(const AlignedInstance& a) {
    if (a.n() < 1) throw InvalidDimensions("aligned instance must be nonempty");
    detail::require_pd(a.Z_R, "Z_R");
    detail::require_pd(a.Z_D, "Z_D");
    if (a.Z_D.rows() != a.n() || a.H_RD.rows() != a.n() || a.H_RD.cols() != a.n())
        throw InvalidDimensions("aligned instance: inconsistent dimensions");
    if (!(a.P_S > 0.0)) throw NonpositivePower("P_S must be positive");
    if (!(a.P_R > 0.0)) throw NonpositivePower("P_R must be positive");
    return a;
}

// View an aligned instance as a general one (identity source gains).
inline ChannelInstance to_channel(const AlignedInstance& a) {
    ChannelInstance c;
    c.H_SR = identity(a.n());
    c.H_SD = identity(a.n());
    c.H_RD = a.H_RD;
    c.Z_R = a.Z_R;
    c.Z_D = a.Z_D;
    c.P_S = a.P_S;
    c.P_R = a.P_R;
    c.label = a.label;
    return c;
}

// Equivalent instance with white noise: gains premultiplied by Z^{-1/2}.
// All rate quantities are invariant under this transform.
inline ChannelInstance whiten(const ChannelInstance& c) {
    validate(c);
    const Mat tr_ = inv_sqrt(c.Z_R);
    const Mat td = inv_sqrt(c.Z_D);
    ChannelInstance w = c;
    w.H_SR = tr_ * c.H_SR;
    w.H_SD = td * c.H_SD;
    w.H_RD = td * c.H_RD;
    w.Z_R = identity(c.nr());
    w.Z_D = identity(c.nd());
    return w;
}

// Zero-pad a whitened instance so all gains are N x N, N = max dimension.
// Padded outputs carry pure (unit) noise, padded inputs are never excited,
// so no mutual information changes.
inline ChannelInstance square_augment(const ChannelInstance& c) {
    validate(c);
    const Eigen::Index n = std::max({c.ns(), c.nr(), c.nd()});
    auto pad = [n](const Mat& m) {
        Mat p = Mat::Zero(n, n);
        p.topLeftCorner(m.rows(), m.cols()) = m;
        return p;
    };
    auto pad_noise = [n](const Mat& z) {
        Mat p = identity(n);
        p.topLeftCorner(z.rows(), z.cols()) = z;
        return p;
    };
    ChannelInstance s = c;
    s.H_SR = pad(c.H_SR);
    s.H_SD = pad(c.H_SD);
    s.H_RD = pad(c.H_RD);
    s.Z_R = pad_noise(c.Z_R);
    s.Z_D = pad_noise(c.Z_D);
    return s;
}

// Add eps to every singular value of H_SR and H_SD (H_RD untouched).
// The perturbed Gram matrices dominate the originals in the Loewner order.
inline ChannelInstance perturb_enhance(const ChannelInstance& c, double eps) {
    validate(c);
    if (!(eps > 0.0)) throw NonpositiveEpsilon("perturb_enhance: eps must be > 0");
    auto lift = [eps](const Mat& h) {
        auto d = svd(h);
        RVec s = d.sigma.array() + eps;
        return Mat(d.u * s.asDiagonal().toDenseMatrix().cast<Cplx>() * d.v.adjoint());
    };
    ChannelInstance e = c;
    e.H_SR = lift(c.H_SR);
    e.H_SD = lift(c.H_SD);
    return e;
}

// Square whitened instance with invertible source gains -> equivalent
// aligned instance: premultiply the relay equation by H_SR^{-1} and the
// destination equation by H_SD^{-1}.
inline AlignedInstance to_aligned(const ChannelInstance& c,
                                  double cond_limit = 1e12) {
    validate(c);
    if (c.ns() != c.nr() || c.ns() != c.nd())
        throw InvalidDimensions("to_aligned: instance must be square");
    if (cond_number(c.H_SR) > cond_limit)
        throw GainNotInvertible("to_aligned: H_SR condition number too large");
    if (cond_number(c.H_SD) > cond_limit)
        throw GainNotInvertible("to_aligned: H_SD condition number too large");
    const Mat isr = c.H_SR.inverse();
    const Mat isd = c.H_SD.inverse();
    AlignedInstance a;
    a.Z_R = herm(isr * c.Z_R * isr.adjoint());
    a.Z_D = herm(isd * c.Z_D * isd.adjoint());
    a.H_RD = isd * c.H_RD;
    a.P_S = c.P_S;
    a.P_R = c.P_R;
    a.label = c.label;
    return a;
}

// Z_R <= Z_D -> Degraded (ties included), Z_D <= Z_R -> ReverselyDegraded,
// otherwise General.
inline DegradednessClass classify(const AlignedInstance& a,
                                  const Tolerance& tol = {}) {
    validate(a);
    const bool deg = loewner_leq(a.Z_R, a.Z_D, tol);
    const bool rev = loewner_leq(a.Z_D, a.Z_R, tol);
    if (deg) return DegradednessClass::Degraded;
    if (rev) return DegradednessClass::ReverselyDegraded;
    return DegradednessClass::General;
}

}  // namespace relaycap
