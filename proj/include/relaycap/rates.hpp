// SPDX-License-Identifier: Apache-2.0
//
// Gaussian-input rate quantities for the relay channel: point-to-point
// water-filling, decode-and-forward rate and cut-set bound (both max-min
// problems over the joint source/relay covariance), and the cooperative
// log-det maximization over (C_R, A) shared by the aligned PDF path.

#pragma once

#include <relaycap/channel.hpp>
#include <relaycap/solver.hpp>

namespace relaycap {

struct P2pSolution {
    double bits = 0.0;
    Mat C_S;
};

// Water-filling over the eigenmodes of H^H Z^{-1} H with total power P.
inline P2pSolution p2p_capacity(const Mat& H, const Mat& Z, double P,
                                const Tolerance& tol = {}) {
    if (!(P > 0.0)) throw NonpositivePower("p2p_capacity: P must be positive");
    const Mat T = inv_sqrt(Z, tol);
    const Mat M = herm((T * H).adjoint() * (T * H));
    auto es = eig_herm(M);
    const RVec gam = es.eigenvalues().cwiseMax(0.0);
    P2pSolution out;
    if (gam.maxCoeff() <= 0.0) {
        out.C_S = Mat::Zero(H.cols(), H.cols());
        return out;
    }
    double lo = 0.0, hi = P + 1.0 / gam.maxCoeff();
    for (int it = 0; it < 200; ++it) {
        double mu = 0.5 * (lo + hi);
        double used = 0.0;
        for (Eigen::Index i = 0; i < gam.size(); ++i)
            if (gam[i] > 0.0) used += std::max(0.0, mu - 1.0 / gam[i]);
        (used < P ? lo : hi) = mu;
    }
    const double mu = 0.5 * (lo + hi);
    RVec p(gam.size());
    double nats = 0.0;
    for (Eigen::Index i = 0; i < gam.size(); ++i) {
        p[i] = gam[i] > 0.0 ? std::max(0.0, mu - 1.0 / gam[i]) : 0.0;
        nats += std::log1p(p[i] * gam[i]);
    }
    out.bits = nats_to_bits(nats);
    out.C_S = herm(es.eigenvectors() * p.asDiagonal().toDenseMatrix().cast<Cplx>() *
                   es.eigenvectors().adjoint());
    return out;
}

struct RateSolution {
    double bits = 0.0;
    Mat C;  // joint (N_S+N_R) covariance of (x_S, x_R)
    SolverDiagnostics diag;
};

namespace detail {

// Conditional covariance of x_S given x_R from the joint covariance. Iterates
// are only approximately feasible, so clip to the PSD cone first: otherwise a
// near-singular C_RR block amplifies off-block leakage through the
// pseudoinverse and the Schur complement comes out wildly indefinite.
inline Mat schur_cond(const Mat& C, Eigen::Index ns) {
    const Mat Cp = psd_part(C);
    const Eigen::Index nr = Cp.rows() - ns;
    const Mat Css = Cp.topLeftCorner(ns, ns);
    const Mat Csr = Cp.topRightCorner(ns, nr);
    const Mat Crr = Cp.bottomRightCorner(nr, nr);
    return psd_part(herm(Css - Csr * pinv(herm(Crr)) * Csr.adjoint()));
}

// Both cut rates have the shape
//   g1 = ln|Zeff + Heff K Heff^H| - ln|Zeff|   (K the Schur conditional
//                                               covariance of x_S given x_R)
//   g2 = ln|Z_D + F C F^H| - ln|Z_D|
// over the joint covariance C. The Schur complement makes g1 nonsmooth where
// the relay block of C degenerates (its gradient blows up), which wrecks
// both the ascent and the Frank-Wolfe certificates exactly at the faces
// where maximizers like to sit. Lifting removes the problem: since log-det
// is matrix-monotone,
//   g1(C) = max { ln|Zeff + Heff T Heff^H| : T <= schur(C) }
// and T <= schur(C) is the linear PSD condition [[C_SS - T, C_SR],
// [C_RS, C_RR]] >= 0. Writing M for that slack matrix, the variable becomes
// the pair (T, M) with T >= 0, M >= 0, C = M + blkdiag(T, 0); the caps stay
// linear (tr M_SS + tr T <= P_S, tr M_RR <= P_R), every feasible C is
// reached (take T = schur(C)), and both objectives are smooth log-dets of
// affine maps with bounded gradients.
struct CutObjective {
    Mat Heff, Zeff, F, Z_D;
    Eigen::Index ns;
    double ld_zeff, ld_zd;

    // joint covariance represented by x = (T, M)
    Mat cmat(const BlockVec& x) const {
        Mat C = psd_part(x.b[1]);
        C.topLeftCorner(ns, ns) += psd_part(x.b[0]);
        return C;
    }
    std::pair<double, double> value(const BlockVec& x) const {
        const Mat T = psd_part(x.b[0]);
        const Mat C = cmat(x);
        double g1 = logdet_pd(herm(Zeff + Heff * T * Heff.adjoint())) - ld_zeff;
        double g2 = logdet_pd(herm(Z_D + F * C * F.adjoint())) - ld_zd;
        return {g1, g2};
    }
    BlockVec grad(const BlockVec& x, double w1, double w2) const {
        const Eigen::Index n = x.b[1].rows();
        Mat gT = Mat::Zero(ns, ns);
        Mat gM = Mat::Zero(n, n);
        if (w1 != 0.0) {
            const Mat W =
                herm(Zeff + Heff * x.b[0] * Heff.adjoint()).inverse();
            gT += w1 * herm(Heff.adjoint() * W * Heff);
        }
        if (w2 != 0.0) {
            Mat C = x.b[1];
            C.topLeftCorner(ns, ns) += x.b[0];
            const Mat W2 = herm(Z_D + F * C * F.adjoint()).inverse();
            const Mat g2full = herm(F.adjoint() * W2 * F);
            gM += w2 * g2full;
            gT += w2 * herm(g2full.topLeftCorner(ns, ns));
        }
        BlockVec out;
        out.b.push_back(std::move(gT));
        out.b.push_back(std::move(gM));
        return out;
    }
    // Hessian action: for ln|Z + A X A^H| the second derivative along E is
    // -(A^H W A) E (A^H W A) with W the inverse of the argument
    BlockVec hess(const BlockVec& x, const BlockVec& e, double w1,
                  double w2) const {
        const Eigen::Index n = x.b[1].rows();
        Mat hT = Mat::Zero(ns, ns);
        Mat hM = Mat::Zero(n, n);
        if (w1 != 0.0) {
            const Mat W =
                herm(Zeff + Heff * x.b[0] * Heff.adjoint()).inverse();
            const Mat G1 = herm(Heff.adjoint() * W * Heff);
            hT -= w1 * herm(G1 * e.b[0] * G1);
        }
        if (w2 != 0.0) {
            Mat C = x.b[1];
            C.topLeftCorner(ns, ns) += x.b[0];
            Mat Ec = e.b[1];
            Ec.topLeftCorner(ns, ns) += e.b[0];
            const Mat W2 = herm(Z_D + F * C * F.adjoint()).inverse();
            const Mat G2 = herm(F.adjoint() * W2 * F);
            const Mat S = herm(G2 * Ec * G2);
            hM -= w2 * S;
            hT -= w2 * herm(S.topLeftCorner(ns, ns));
        }
        BlockVec out;
        out.b.push_back(std::move(hT));
        out.b.push_back(std::move(hM));
        return out;
    }
    // lift a joint covariance into the (T, M) variables
    BlockVec lift(const Mat& C) const {
        BlockVec x;
        const Mat T = schur_cond(C, ns);
        Mat M = C;
        M.topLeftCorner(ns, ns) -= T;
        x.b.push_back(T);
        x.b.push_back(psd_part(M));
        return x;
    }
};

inline FeasibleSet joint_feasible(Eigen::Index ns, Eigen::Index nr, double ps,
                                  double pr) {
    FeasibleSet K;
    K.psd = {true, true};
    K.upper.resize(2);
    Mat ws = Mat::Zero(ns + nr, ns + nr);
    ws.topLeftCorner(ns, ns) = identity(ns);
    Mat wr = Mat::Zero(ns + nr, ns + nr);
    wr.bottomRightCorner(nr, nr) = identity(nr);
    K.caps.push_back({{identity(ns), ws}, ps});
    K.caps.push_back({{Mat(), wr}, pr});
    return K;
}

inline RateSolution solve_cut(const CutObjective& obj, Eigen::Index ns,
                              Eigen::Index nr, double ps, double pr,
                              const MaxMinSolverConfig& cfg) {
    FeasibleSet K = joint_feasible(ns, nr, ps, pr);
    MaxMinObjective f;
    f.value = [&obj](const BlockVec& x) { return obj.value(x); };
    f.grad = [&obj](const BlockVec& x, double w1, double w2) {
        return obj.grad(x, w1, w2);
    };
    f.hess = [&obj](const BlockVec& x, const BlockVec& e, double w1,
                    double w2) { return obj.hess(x, e, w1, w2); };

    // g1 depends on C only through the conditional covariance K, and every
    // K >= 0 with tr K <= ps is reachable (embed as blkdiag(K, *)); hence
    // max g1 is plain water-filling. That gives an exact bound on phi(1) --
    // which the weighted solves cannot certify themselves, because the g1
    // gradient blows up where the relay block of C degenerates -- and a
    // strong start that already attains max g1.
    const auto wf = p2p_capacity(obj.Heff, obj.Zeff, ps);
    const double g1_max = bits_to_nats(wf.bits);

    // Lexicographic fast path: water-filling spends the whole source power,
    // so every C attaining max g1 is blkdiag(K*, C_R) (a nonzero off-block
    // would need source power beyond ps). Maximizing g2 over C_R alone is a
    // second water-filling; if that value still reaches max g1, the saddle
    // equals max g1 exactly and the candidate point certifies itself.
    BlockVec xc;
    {
        const Mat Fs = obj.F.leftCols(ns);
        const Mat Fr = obj.F.rightCols(nr);
        const Mat W0 = herm(obj.Z_D + Fs * wf.C_S * Fs.adjoint());
        const auto wf2 = p2p_capacity(Fr, W0, pr);
        Mat cc = Mat::Zero(ns + nr, ns + nr);
        cc.topLeftCorner(ns, ns) = wf.C_S;
        cc.bottomRightCorner(nr, nr) = wf2.C_S;
        xc = obj.lift(cc);
        const auto [g1c, g2c] = obj.value(xc);
        const double vc = std::min(g1c, g2c);
        if (g1_max - vc < 0.5 * bits_to_nats(cfg.rate_tol)) {
            RateSolution out;
            out.bits = nats_to_bits(vc);
            out.C = cc;
            out.diag.residual = std::max(0.0, g1_max - vc);
            out.diag.converged = true;
            out.diag.iterations = 0;
            return out;
        }
    }

    std::vector<BlockVec> starts;
    starts.push_back(xc);
    {
        Mat c = Mat::Zero(ns + nr, ns + nr);
        c.topLeftCorner(ns, ns) = (ps / ns) * identity(ns);
        c.bottomRightCorner(nr, nr) = (pr / nr) * identity(nr);
        starts.push_back(obj.lift(c));
    }
    Rng rng(cfg.seed);
    auto random_start = [&]() {
        BlockVec y;
        y.b.push_back(rng.psd_with_trace(ns, 0.5 * ps));
        y.b.push_back(rng.psd_with_trace(ns + nr, 0.5 * ps + pr));
        return K.project(y, 80);
    };
    for (int r = 0; r + 1 < cfg.restarts; ++r) starts.push_back(random_start());

    MaxMinResult best;
    best.value = -1e300;
    double upper = std::numeric_limits<double>::infinity();
    auto run = [&](const BlockVec& s) {
        auto r = maxmin_solve(f, K, s, cfg, 0.0, 1.0, g1_max);
        upper = std::min(upper, r.value + r.diag.residual);
        if (r.value > best.value) best = r;
    };
    for (auto& s : starts) run(s);
    // the dual upper bound is valid across starts, so keep drawing fresh
    // starts (bounded budget) while the certified gap exceeds tolerance
    const double gap_tol = bits_to_nats(cfg.rate_tol);
    for (int extra = 0; extra < 3 * std::max(1, cfg.restarts) &&
                        upper - best.value > gap_tol;
         ++extra)
        run(random_start());
    RateSolution out;
    out.bits = nats_to_bits(best.value);
    out.C = obj.cmat(best.x);
    out.diag = best.diag;
    out.diag.residual = std::max(0.0, upper - best.value);
    out.diag.converged = out.diag.residual < gap_tol;
    return out;
}

}  // namespace detail

// Maximum decode-and-forward rate: max over the joint input covariance of
// min{ I(x_S; y_R | x_R), I(x_S, x_R; y_D) }.
inline RateSolution df_rate(const ChannelInstance& c0,
                            const MaxMinSolverConfig& cfg = {}) {
    validate(c0);
    // output whitening leaves the input covariance and both mutual
    // informations unchanged but conditions the log-det terms
    const ChannelInstance c = whiten(c0);
    detail::CutObjective obj;
    obj.Heff = c.H_SR;
    obj.Zeff = c.Z_R;
    obj.F.resize(c.nd(), c.ns() + c.nr());
    obj.F << c.H_SD, c.H_RD;
    obj.Z_D = c.Z_D;
    obj.ns = c.ns();
    obj.ld_zeff = logdet_pd(c.Z_R);
    obj.ld_zd = logdet_pd(c.Z_D);
    return detail::solve_cut(obj, c.ns(), c.nr(), c.P_S, c.P_R, cfg);
}

// Cut-set bound: the broadcast cut stacks the relay and destination
// observations with block-diagonal noise.
inline RateSolution csb_rate(const ChannelInstance& c0,
                             const MaxMinSolverConfig& cfg = {}) {
    validate(c0);
    const ChannelInstance c = whiten(c0);
    detail::CutObjective obj;
    obj.Heff.
        resize(c.nr() + c.nd(), c.ns());
    obj.Heff << c.H_SR, c.H_SD;
    obj.Zeff = Mat::Zero(c.nr() + c.nd(), c.nr() + c.nd());
    obj.Zeff.topLeftCorner(c.nr(), c.nr()) = c.Z_R;
    obj.Zeff.bottomRightCorner(c.nd(), c.nd()) = c.Z_D;
    obj.F.resize(c.nd(), c.ns() + c.nr());
    obj.F << c.H_SD, c.H_RD;
    obj.Z_D = c.Z_D;
    obj.ns = c.ns();
    obj.ld_zeff = logdet_pd(obj.Zeff);
    obj.ld_zd = logdet_pd(c.Z_D);
    return detail::solve_cut(obj, c.ns(), c.nr(), c.P_S, c.P_R, cfg);
}

// --------------------------------------------------------------------------
// Cooperative term: maximize ln|W0 + (H + A) C_R (H + A)^H| over C_R >= 0
// with tr(C_R) <= P_R and tr(A C_R A^H) <= P_a. Block-coordinate ascent:
// the C_R step is concave; the A step maximizes a convex function over a
// Frobenius ball (projected gradient, multistart).

struct CoopSolution {
    double nats = 0.0;  // ln|W0 + (H+A) C_R (H+A)^H| - ln|W0|
    Mat C_R;
    Mat A;
};

namespace detail {

inline double coop_eval(const Mat& W0, const Mat& H, const Mat& A,
                        const Mat& C_R) {
    const Mat B = H + A;
    return logdet_pd(herm(W0 + B * C_R * B.adjoint()));
}

// maximize ln|W0 + E E^H| over ||E - B0||_F <= rad (convex objective,
// boundary maximum; projected gradient ascent).
inline Mat ball_ascent(const Mat& W0, const Mat& B0, double rad, Mat E,
                       int iters = 200) {
    auto proj = [&](Mat e) {
        const Mat d = e - B0;
        const double n = d.norm();
        if (n > rad) e = B0 + (rad / n) * d;
        return e;
    };
    E = proj(E);
    double f = logdet_pd(herm(W0 + E * E.adjoint()));
    double step = std::max(0.1, rad);
    for (int it = 0; it < iters; ++it) {
        const Mat W = herm(W0 + E * E.adjoint()).inverse();
        const Mat g = 2.0 * (W * E);
        bool ok = false;
        for (int bt = 0; bt < 30; ++bt) {
            Mat Ec = proj(E + step * g);
            double fc = logdet_pd(herm(W0 + Ec * Ec.adjoint()));
            if (fc > f + 1e-14) {
                E = std::move(Ec);
                f = fc;
                step *= 1.5;
                ok = true;
                break;
            }
            step *= 0.4;
        }
        if (!ok) break;
    }
    return E;
}

}  // namespace detail

inline CoopSolution coop_solve(const Mat& W0, const Mat& H, double P_a,
                               double P_R, const MaxMinSolverConfig& cfg = {}) {
    const Eigen::Index nd = W0.rows();
    const Eigen::Index nr = H.cols();
    const double ld0 = logdet_pd(W0);
    P_a = std::max(P_a, 0.0);

    auto solve_cr = [&](const Mat& A) {
        // concave in C_R with two trace caps
        FeasibleSet K;
        K.psd = {true};
        K.upper.resize(1);
        K.caps.push_back({{identity(nr)}, P_R});
        const Mat AA = herm(A.adjoint() * A);
        if (P_a > 0.0 && AA.norm() > 1e-14) K.caps.push_back({{AA}, P_a});
        MaxMinObjective f;
        const Mat B = H + A;
        f.value = [&](const BlockVec& x) {
            double v = detail::coop_eval(W0, H, A, x.b[0]);
            return std::make_pair(v, v);
        };
        f.grad = [&](const BlockVec& x, double w1, double w2) {
            const Mat W = herm(W0 + B * x.b[0] * B.adjoint()).inverse();
            BlockVec g;
            g.b.push_back(Mat(herm((w1 + w2) * B.adjoint() * W * B)));
            return g;
        };
        BlockVec x0;
        x0.b.push_back((P_R / nr) * identity(nr));
        x0 = K.project(x0);
        return detail::maximize_weighted(f, K, x0, 1.0, 0.0, cfg.max_iters);
    };

    Rng rng(cfg.seed + 17);
    CoopSolution best;
    best.nats = -1e300;
    std::vector<Mat> a_starts = {Mat::Zero(nr, nr)};
    if (P_a > 0.0) {
        a_starts.push_back(std::sqrt(P_a / (P_R * nr)) * identity(nr) *
                           (H.norm() > 0 ? 1.0 : 1.0));
        for (int r = 0; r < std::max(1, cfg.restarts - 2); ++r)
            a_starts.push_back(std::sqrt(P_a / (P_R * nr * nr)) *
                               rng.cgaussian(nr, nr));
    }

    for (const Mat& a0 : a_starts) {
        Mat A = a0;
        auto cr = solve_cr(A);
        Mat C_R = cr.x.b[0];
        double val = cr.value;
        for (int round = 0; round < 40 && P_a > 0.0; ++round) {
            // A step on the range of C_R
            auto es = eig_herm(C_R);
            const double emax = es.eigenvalues().maxCoeff();
            if (emax <= 1e-15) break;
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
                if (es.eigenvalues()[i] > 1e-12 * emax) idx.push_back(i);
            Mat Ur(nr, static_cast<Eigen::Index>(idx.size()));
            RVec dr(static_cast<Eigen::Index>(idx.size()));
            for (size_t k = 0; k < idx.size(); ++k) {
                Ur.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(idx[k]);
                dr[static_cast<Eigen::Index>(k)] = es.eigenvalues()[idx[k]];
            }
            const Mat Chalf = Ur * dr.cwiseSqrt().asDiagonal().toDenseMatrix().cast<Cplx>();
            const Mat B0 = H * Chalf;
            const double rad = std::sqrt(P_a);
            Mat E = (H + A) * Chalf;
            E = detail::ball_ascent(W0, B0, rad, E);
            A = (E - B0) * pinv(Chalf);
            auto cr2 = solve_cr(A);
            if (cr2.value < val + 1e-12) {
                C_R = cr2.x.b[0];
                val = std::max(val, cr2.value);
                break;
            }
            C_R = cr2.x.b[0];
            val = cr2.value;
        }
        if (val > best.nats) {
            best.nats = val;
            best.C_R = C_R;
            best.A = A;
        }
    }
    best.nats -= ld0;
    return best;
}

}  // namespace relaycap
