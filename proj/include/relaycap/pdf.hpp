// SPDX-License-Identifier: Apache-2.0
//
// Maximum Gaussian-achievable partial decode-and-forward (PDF) rate. The
// general problem maximizes
//   min { ln|I + H_SR (Q + C_V) H_SR^H| - ln|I + H_SR C_V H_SR^H|
//            + ln|I + H_SD C_V H_SD^H|,
//         ln|I + H_SD C_V H_SD^H + [H_SD, H_RD] Cj [H_SD, H_RD]^H| }
// over Q, C_V >= 0 and the joint covariance Cj of (u, x_R) with
// Cj - D_S^H Q D_S >= 0, tr(C_V + D_S Cj D_S^H) <= P_S,
// tr(D_R Cj D_R^H) <= P_R, for the whitened channel. The denominator term
// makes the problem nonconvex; it is handled by an inner-approximation loop
// that linearizes that term at the iterate. Special-structure solvers cover
// the aligned (primal-decomposition), parallel (diagonal), and zero-forcing
// cases.

#pragma once

#include <relaycap/enhancement.hpp>

namespace relaycap {

struct InfeasibleParams : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotDiagonal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input-side parametrization: x_S = q + A x_R + v with independent
// q ~ (0, C_Q), x_R ~ (0, C_R), v ~ (0, C_V).
struct PdfInputParams {
    Mat C_Q, C_V, C_R;
    Mat A;  // N_S x N_R cooperation gain
};

// Joint parametrization: auxiliary Q, joint covariance C_joint of (u, x_R),
// and the direct-only covariance C_V.
struct PdfJointParams {
    Mat Q;
    Mat C_joint;  // (N_S+N_R) x (N_S+N_R)
    Mat C_V;
};

// Covariance of the innovative part of the source signal, S = C_Q + C_V.
struct InnovationSplit {
    Mat S;
};

struct PdfValue {
    double term1 = 0.0, term2 = 0.0, rate = 0.0;  // bits
};

struct PdfSolution {
    double bits = 0.0;
    PdfJointParams p;
    SolverDiagnostics diag;
};

inline PdfJointParams params_to_joint(const PdfInputParams& p) {
    const Eigen::Index ns = p.C_Q.rows();
    const Eigen::Index nr = p.C_R.rows();
    PdfJointParams j;
    j.Q = herm(p.C_Q);
    j.C_V = herm(p.C_V);
    Mat ai(ns + nr, nr);
    ai.topRows(ns) = p.A;
    ai.bottomRows(nr) = identity(nr);
    j.C_joint = Mat::Zero(ns + nr, ns + nr);
    j.C_joint.topLeftCorner(ns, ns) = p.C_Q;
    j.C_joint = herm(j.C_joint + ai * p.C_R * ai.adjoint());
    return j;
}

namespace detail {

// both PDF mutual-information terms in nats, for a whitened instance
inline std::pair<double, double> pdf_terms_nats(const ChannelInstance& w,
                                                const Mat& Q, const Mat& Cj,
                                                const Mat& Cv) {
    const Eigen::Index nr = w.nr(), nd = w.nd();
    Mat F(nd, w.ns() + w.nr());
    F << w.H_SD, w.H_RD;
    const Mat bv = herm(identity(nd) + w.H_SD * Cv * w.H_SD.adjoint());
    const double t1 =
        logdet_pd(herm(identity(nr) +
                       w.H_SR * (Q + Cv) * w.H_SR.adjoint())) -
        logdet_pd(herm(identity(nr) + w.H_SR * Cv * w.H_SR.adjoint())) +
        logdet_pd(bv);
    const double t2 = logdet_pd(herm(bv + F * Cj * F.adjoint()));
    return {t1, t2};
}

}  // namespace detail

inline PdfValue pdf_objective(const ChannelInstance& c,
                              const PdfJointParams& p,
                              const Tolerance& tol = {}) {
    validate(c);
    const ChannelInstance w = whiten(c);
    const Eigen::Index ns = w.ns(), nr = w.nr();
    if (p.Q.rows() != ns || p.C_V.rows() != ns ||
        p.C_joint.rows() != ns + nr)
        throw DimensionMismatch("pdf_objective: parameter dimensions");
    const double scale =
        std::max({1.0, p.Q.norm(), p.C_joint.norm(), p.C_V.norm()});
    const double slack = 1e3 * tol.psd_eig * scale;
    Mat gap = p.C_joint;
    gap.topLeftCorner(ns, ns) -= p.Q;
    if (min_eig(herm(p.Q)) < -slack || min_eig(herm(p.C_V)) < -slack ||
        min_eig(herm(gap)) < -slack)
        throw InfeasibleParams("pdf_objective: cone constraints violated");
    const double ts = p.C_V.trace().real() +
                      p.C_joint.topLeftCorner(ns, ns).trace().real();
    const double tr = p.C_joint.bottomRightCorner(nr, nr).trace().real();
    if (ts > w.P_S + slack || tr > w.P_R + slack)
        throw InfeasibleParams("pdf_objective: power constraints violated");

    auto [t1, t2] = detail::pdf_terms_nats(w, psd_part(p.Q),
                                           psd_part(p.C_joint),
                                           psd_part(p.C_V));
    PdfValue v;
    v.term1 = nats_to_bits(t1);
    v.term2 = nats_to_bits(t2);
    v.rate = std::min(v.term1, v.term2);
    return v;
}

namespace detail {

// feasible set for blocks (Q, M, C_V) with Cj = M + D_S^H Q D_S: all three
// PSD, tr(Q) + tr(D_S M D_S^H) + tr(C_V) <= P_S, tr(D_R M D_R^H) <= P_R
inline FeasibleSet pdf_feasible(Eigen::Index ns, Eigen::Index nr, double ps,
                                double pr) {
    FeasibleSet K;
    K.psd = {true, true, true};
    TraceCap c1, c2;
    Mat ms = Mat::Zero(ns + nr, ns + nr);
    ms.topLeftCorner(ns, ns) = identity(ns);
    Mat mr = Mat::Zero(ns + nr, ns + nr);
    mr.bottomRightCorner(nr, nr) = identity(nr);
    c1.weights = {identity(ns), ms, identity(ns)};
    c1.bound = ps;
    c2.weights = {Mat(), mr, Mat()};
    c2.bound = pr;
    K.caps = {c1, c2};
    return K;
}

inline Mat cj_of(const BlockVec& x, Eigen::Index ns) {
    Mat cj = psd_part(x.b[1]);
    cj.topLeftCorner(ns, ns) += psd_part(x.b[0]);
    return herm(cj);
}

// concave max-min with multistart and gap-driven retries (shared by the
// structured PDF solvers)
inline MaxMinResult solve_concave(const MaxMinObjective& f,
                                  const FeasibleSet& K,
                                  const std::vector<BlockVec>& starts,
                                  const std::function<BlockVec(Rng&)>& draw,
                                  const MaxMinSolverConfig& cfg) {
    MaxMinResult best;
    best.value = -1e300;
    double upper = std::numeric_limits<double>::infinity();
    auto run = [&](const BlockVec& s) {
        auto r = maxmin_solve(f, K, s, cfg);
        upper = std::min(upper, r.value + r.diag.residual);
        if (r.value > best.value) best = r;
    };
    for (const auto& s : starts) run(s);
    Rng rng(cfg.seed + 71);
    const double gap_tol = bits_to_nats(cfg.rate_tol);
    for (int extra = 0; extra < 3 * std::max(1, cfg.restarts) &&
                        upper - best.value > gap_tol;
         ++extra)
        run(K.project(draw(rng)));
    best.diag.residual = std::max(0.0, upper - best.value);
    best.diag.converged = best.diag.residual < gap_tol;
    return best;
}

}  // namespace detail

// General PDF rate via inner approximation: the concave-minorant subproblem
// (the interference term ln|I + H_SR C_V H_SR^H| linearized at the iterate)
// is solved with the max-min machinery; the outer loop ascends the true
// objective monotonically from every start.
inline PdfSolution pdf_rate_gaussian(const ChannelInstance& c0,
                                     const MaxMinSolverConfig& cfg = {}) {
    validate(c0);
    const ChannelInstance c = whiten(c0);
    const Eigen::Index ns = c.ns(), nr = c.nr(), nd = c.nd();
    Mat F(nd, ns + nr);
    F << c.H_SD, c.H_RD;
    FeasibleSet K = detail::pdf_feasible(ns, nr, c.P_S, c.P_R);

    auto true_rate = [&](const BlockVec& x) {
        auto [t1, t2] = detail::pdf_terms_nats(
            c, psd_part(x.b[0]), detail::cj_of(x, ns), psd_part(x.b[2]));
        return std::min(t1, t2);
    };

    // one inner-approximation pass from x0; monotone in the true objective
    auto run_iaa = [&](BlockVec x, SolverDiagnostics& diag,
                       const MaxMinSolverConfig& icfg, int max_outer,
                       double improve_tol_bits) {
        x = K.project(x);
        double cur = true_rate(x);
        const double improve_tol = bits_to_nats(improve_tol_bits);
        // the equalizing weight moves slowly across outer iterations, so
        // after the first outer the bisection runs on a narrow window around
        // the previous weight, with a full-window fallback if the dual gap
        // fails to close
        double lam_c = std::numeric_limits<double>::quiet_NaN();
        for (int outer = 0; outer < max_outer; ++outer) {
            const Mat v0 = psd_part(x.b[2]);
            const Mat w0 = herm(
                c.H_SR.adjoint() *
                herm(identity(nr) + c.H_SR * v0 * c.H_SR.adjoint()).inverse() *
                c.H_SR);
            const double c0v = logdet_pd(
                herm(identity(nr) + c.H_SR * v0 * c.H_SR.adjoint()));
            MaxMinObjective f;
            f.value = [&, w0, c0v, v0](const BlockVec& y) {
                const Mat q = psd_part(y.b[0]);
                const Mat cv = psd_part(y.b[2]);
                const Mat cj = detail::cj_of(y, ns);
                const Mat bv =
                    herm(identity(nd) + c.H_SD * cv * c.H_SD.adjoint());
                const double lin =
                    c0v + (w0 * (cv - v0)).trace().real();
                const double g1 =
                    logdet_pd(herm(identity(nr) +
                                   c.H_SR * (q + cv) * c.H_SR.adjoint())) -
                    lin + logdet_pd(bv);
                const double g2 =
                    logdet_pd(herm(bv + F * cj * F.adjoint()));
                return std::make_pair(g1, g2);
            };
            f.grad = [&, w0](const BlockVec& y, double w1, double w2) {
                const Mat q = psd_part(y.b[0]);
                const Mat cv = psd_part(y.b[2]);
                const Mat cj = detail::cj_of(y, ns);
                const Mat a1 =
                    herm(identity(nr) + c.H_SR * (q + cv) * c.H_SR.adjoint())
                        .inverse();
                const Mat bvi =
                    herm(identity(nd) + c.H_SD * cv * c.H_SD.adjoint())
                        .inverse();
                const Mat t =
                    herm(identity(nd) + c.H_SD * cv * c.H_SD.adjoint() +
                         F * cj * F.adjoint())
                        .inverse();
                const Mat gsr = herm(c.H_SR.adjoint() * a1 * c.H_SR);
                const Mat gt = herm(c.H_SD.adjoint() * t * c.H_SD);
                BlockVec g;
                g.b.push_back(Mat(w1 * gsr + w2 * gt));
                g.b.push_back(Mat(w2 * herm(F.adjoint() * t * F)));
                g.b.push_back(
                    Mat(w1 * (gsr - w0 +
                              herm(c.H_SD.adjoint() * bvi * c.H_SD)) +
                        w2 * gt));
                return g;
            };
            f.hess = [&](const BlockVec& y, const BlockVec& e, double w1,
                         double w2) {
                const Mat q = psd_part(y.b[0]);
                const Mat cv = psd_part(y.b[2]);
                const Mat cj = detail::cj_of(y, ns);
                const Mat a1 =
                    herm(identity(nr) + c.H_SR * (q + cv) * c.H_SR.adjoint())
                        .inverse();
                const Mat bvi =
                    herm(identity(nd) + c.H_SD * cv * c.H_SD.adjoint())
                        .inverse();
                const Mat t =
                    herm(identity(nd) + c.H_SD * cv * c.H_SD.adjoint() +
                         F * cj * F.adjoint())
                        .inverse();
                const Mat g1m = herm(c.H_SR.adjoint() * a1 * c.H_SR);
                const Mat gb = herm(c.H_SD.adjoint() * bvi * c.H_SD);
                Mat ej = e.b[1];
                ej.topLeftCorner(ns, ns) += e.b[0];
                const Mat le = herm(c.H_SD * e.b[2] * c.H_SD.adjoint() +
                                    F * ej * F.adjoint());
                const Mat s = herm(t * le * t);
                const Mat sj = herm(F.adjoint() * s * F);
                const Mat s1 = herm(g1m * (e.b[0] + e.b[2]) * g1m);
                BlockVec h;
                h.b.push_back(Mat(-w1 * s1 -
                                  w2 * sj.topLeftCorner(ns, ns)));
                h.b.push_back(Mat(-w2 * sj));
                h.b.push_back(Mat(-w1 * (s1 + herm(gb * e.b[2] * gb)) -
                                  w2 * herm(c.H_SD.adjoint() * s *
                                            c.H_SD)));
                return h;
            };
            MaxMinResult r;
            if (std::isfinite(lam_c)) {
                r = maxmin_solve(f, K, x, icfg,
                                 std::max(0.0, lam_c - 0.15),
                                 std::min(1.0, lam_c + 0.15));
                if (r.diag.residual > bits_to_nats(icfg.rate_tol))
                    r = maxmin_solve(f, K, x, icfg);
            } else {
                r = maxmin_solve(f, K, x, icfg);
            }
            lam_c = r.lambda;
            const double cand = true_rate(r.x);
            diag = r.diag;
            if (cand < cur + improve_tol) {
                if (cand > cur) {
                    x = r.x;
                    cur = cand;
                }
                break;
            }
            x = r.x;
            cur = cand;
        }
        return std::make_pair(cur, x);
    };

    // multistart: DF and P2P optimizers embedded (these guarantee the
    // sandwich lower bound), plus random feasible draws
    std::vector<BlockVec> starts;
    {
        RateSolution df = df_rate(c0, cfg);
        BlockVec x;
        x.b.push_back(detail::schur_cond(df.C, ns));
        Mat m = psd_part(df.C);
        m.topLeftCorner(ns, ns) -= x.b[0];
        x.b.push_back(psd_part(m));
        x.b.push_back(Mat::Zero(ns, ns));
        starts.push_back(x);
    }
    {
        auto p2p = p2p_capacity(c.H_SD, identity(nd), c.P_S);
        BlockVec x;
        x.b.push_back(Mat::Zero(ns, ns));
        x.b.push_back(Mat::Zero(ns + nr, ns + nr));
        x.b.push_back(p2p.C_S);
        starts.push_back(x);
    }
    Rng rng(cfg.seed + 13);
    auto draw = [&](Rng& r) {
        BlockVec x;
        x.b.push_back(r.psd_with_trace(ns, 0.3 * c.P_S));
        x.b.push_back(r.psd_with_trace(ns + nr, 0.4 * (c.P_S + c.P_R)));
        x.b.push_back(r.psd_with_trace(ns, 0.3 * c.P_S));
        return x;
    };
    for (int k = 0; k < std::max(1, cfg.restarts); ++k)
        starts.push_back(K.project(draw(rng)));

    // screening pass: cheap low-precision IAA from every start, then full
    // precision only from the best two survivors (the objective landscape
    // has few basins, so survivors after a loose pass are reliable)
    MaxMinSolverConfig loose = cfg;
    loose.rate_tol = std::max(cfg.rate_tol, 3e-3);
    loose.max_iters = std::min(cfg.max_iters, 200);
    std::vector<std::pair<double, BlockVec>> screened;
    for (auto& s : starts) {
        SolverDiagnostics d;
        auto [v, x] = run_iaa(s, d, loose, 8, 10.0 * loose.rate_tol);
        screened.emplace_back(v, std::move(x));
    }
    std::sort(screened.begin(), screened.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    double bv = -1e300;
    BlockVec bx;
    SolverDiagnostics bd;
    const size_t keep = std::min<size_t>(2, screened.size());
    for (size_t i = 0; i < keep; ++i) {
        // the runner-up only matters if it sits in a different basin
        if (i > 0) {
            BlockVec d01 = screened[i].second - screened[0].second;
            double ref = std::max(1.0, screened[0].second.dot(screened[0].second));
            if (d01.dot(d01) < 1e-4 * ref) break;
        }
        SolverDiagnostics d;
        auto [v, x] = run_iaa(screened[i].second, d, cfg, 200, 1e-6);
        if (v > bv) {
            bv = v;
            bx = x;
            bd = d;
        }
    }

    PdfSolution out;
    out.bits = nats_to_bits(bv);
    out.p.Q = psd_part(bx.b[0]);
    out.p.C_joint = detail::cj_of(bx, ns);
    out.p.C_V = psd_part(bx.b[2]);
    out.diag = bd;
    // no global certificate exists for the nonconvex problem; converged
    // reports the stationarity of the final inner solve
    out.diag.converged = bd.residual < bits_to_nats(cfg.rate_tol);
    return out;
}

struct PdfAlignedSolution {
    double bits = 0.0;
    InnovationSplit split;
    PdfJointParams p;
    SolverDiagnostics diag;
};

// Aligned channel, primal decomposition: outer derivative-free search over
// the innovation covariance S, inner closed-form value
//   min{ ln|S+Z|/|Z|, max_{C_R,A} ln|S+(H_RD+A)C_R(H_RD+A)^H+Z_D|/|Z_D| }
// with Z from the certified wiretap subproblem.
inline PdfAlignedSolution pdf_rate_aligned(const AlignedInstance& a,
                                           const MaxMinSolverConfig& cfg = {}) {
    const Eigen::Index n = a.n();

    auto inner = [&](const Mat& S, EnhancementCertificate* cert_out) {
        EnhancementCertificate cert;
        inner_wiretap_solve(herm(S), a.Z_R, a.Z_D, cfg, &cert);
        const double t1 =
            logdet_pd(herm(S + cert.Z)) - logdet_pd(cert.Z);
        auto coop = coop_solve(herm(S + a.Z_D), a.H_RD,
                               a.P_S - S.trace().real(), a.P_R, cfg);
        const double t2 = coop.nats + logdet_pd(herm(S + a.Z_D)) -
                          logdet_pd(a.Z_D);
        if (cert_out) *cert_out = cert;
        return std::min(t1, t2);
    };

    double best_v = -1e300;
    Mat best_s;
    if (n == 1) {
        const int grid = 512;
        for (int i = 0; i <= grid; ++i) {
            Mat S = Mat::Constant(1, 1, a.P_S * i / double(grid));
            double v = inner(S, nullptr);
            if (v > best_v) {
                best_v = v;
                best_s = S;
            }
        }
    } else {
        // pattern search over a Cholesky-style parametrization S = L L^H
        // scaled into the trace cap
        const Eigen::Index m = n * n;  // real params of a lower-tri complex L
        RVec th = RVec::Zero(m);
        {
            int k = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) {
                    if (i == j) th[k++] = std::sqrt(0.5 * a.P_S / n);
                    else {
                        th[k++] = 0.0;  // real part
                        th[k++] = 0.0;  // imaginary part
                    }
                }
        }
        auto to_s = [&](const RVec& v) {
            Mat L = Mat::Zero(n, n);
            int k = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) {
                    if (i == j) L(i, j) = v[k++];
                    else {
                        double re = v[k++], im = v[k++];
                        L(i, j) = Cplx(re, im);
                    }
                }
            Mat S = herm(L * L.adjoint());
            const double tr = S.trace().real();
            if (tr > a.P_S) S *= a.P_S / tr * (1.0 - 1e-12);
            return S;
        };
        RVec cur = th;
        best_s = to_s(cur);
        best_v = inner(best_s, nullptr);
        double step = 0.5 * std::sqrt(a.P_S / n);
        while (step > 1e-3 * std::sqrt(a.P_S / n)) {
            bool moved = false;
            for (Eigen::Index i = 0; i < m; ++i) {
                for (double sgn : {1.0, -1.0}) {
                    RVec t = cur;
                    t[i] += sgn * step;
                    Mat S = to_s(t);
                    double v = inner(S, nullptr);
                    if (v > best_v + 1e-12) {
                        best_v = v;
                        best_s = S;
                        cur = t;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved) step *= 0.5;
        }
    }

    PdfAlignedSolution out;
    EnhancementCertificate cert;
    out.bits = nats_to_bits(inner(best_s, &cert));
    out.split.S = best_s;
    // joint parameters of the achieving strategy: C_Q = S minus the
    // direct-only part C_V* of the wiretap optimizer, relayed part from the
    // cooperative solve
    auto coop = coop_solve(herm(best_s + a.Z_D), a.H_RD,
                           a.P_S - best_s.trace().real(), a.P_R, cfg);
    PdfInputParams ip;
    ip.C_V = cert.C_V_star;
    ip.C_Q = psd_part(herm(best_s - cert.C_V_star));
    ip.C_R = coop.C_R;
    ip.A = coop.A;
    out.p = params_to_joint(ip);
    out.diag.converged = true;
    return out;
}

struct PdfParallelSolution {
    double bits = 0.0;
    std::vector<Eigen::Index> decode_set;
    SolverDiagnostics diag;
};

// Parallel (diagonal) aligned channel: the relay decodes exactly the
// subchannels where it hears better than the destination. Fixing that
// structure (innovation q on the decode set, direct-only v elsewhere) makes
// the interference term vanish, so the remaining power allocation and
// cooperation problem is a single concave max-min.
inline PdfParallelSolution pdf_rate_parallel(const AlignedInstance& a,
                                             const MaxMinSolverConfig& cfg = {}) {
    const Eigen::Index n = a.n();
    auto diag_ok = [&](const Mat& m) {
        Mat d = m;
        d.diagonal().setZero();
        return d.norm() <= 1e-12 * std::max(1.0, m.norm());
    };
    if (!diag_ok(a.Z_R) || !diag_ok(a.Z_D) || !diag_ok(a.H_RD))
        throw NotDiagonal("pdf_rate_parallel: matrices must be diagonal");

    PdfParallelSolution out;
    for (Eigen::Index i = 0; i < n; ++i)
        if (a.Z_R(i, i).real() < a.Z_D(i, i).real())
            out.decode_set.push_back(i);
    const Eigen::Index na = static_cast<Eigen::Index>(out.decode_set.size());
    const Eigen::Index nb = n - na;

    if (na == 0) {
        // relay hears worse everywhere: PDF reduces to P2P
        auto p = p2p_capacity(identity(n), a.Z_D, a.P_S);
        out.bits = p.bits;
        out.diag.converged = true;
        return out;
    }
    if (nb == 0) {
        // relay hears better everywhere: PDF reduces to DF
        auto r = df_rate(to_channel(a), cfg);
        out.bits = r.bits;
        out.diag = r.diag;
        return out;
    }

    // selectors: Ea embeds decode subchannels, Eb the rest
    Mat Ea = Mat::Zero(n, na), Eb = Mat::Zero(n, nb);
    {
        Eigen::Index ka = 0, kb = 0;
        std::vector<bool> in_a(n, false);
        for (auto i : out.decode_set) in_a[i] = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (in_a[i]) Ea(i, ka++) = 1.0;
            else Eb(i, kb++) = 1.0;
        }
    }
    const Mat Zra = Ea.adjoint() * a.Z_R * Ea;
    const Mat Zdb = Eb.adjoint() * a.Z_D * Eb;
    // blocks: (Qa on the decode set, M = joint (u_A, x_R) remainder, Vb on
    // the complement); F maps (u_A, x_R) into the destination signal
    Mat F(n, na + n);
    F.leftCols(na) = Ea;
    F.rightCols(n) = a.H_RD;

    FeasibleSet K;
    K.psd = {true, true, true};
    TraceCap c1, c2;
    Mat ms = Mat::Zero(na + n, na + n);
    ms.topLeftCorner(na, na) = identity(na);
    Mat mr = Mat::Zero(na + n, na + n);
    mr.bottomRightCorner(n, n) = identity(n);
    c1.weights = {identity(na), ms, identity(nb)};
    c1.bound = a.P_S;
    c2.weights = {Mat(), mr, Mat()};
    c2.bound = a.P_R;
    K.caps = {c1, c2};

    const double ldr = logdet_pd(Zra), lddb = logdet_pd(Zdb),
                 ldd = logdet_pd(a.Z_D);
    MaxMinObjective f;
    f.value = [&](const BlockVec& x) {
        const Mat qa = psd_part(x.b[0]);
        const Mat vb = psd_part(x.b[2]);
        Mat cj = psd_part(x.b[1]);
        cj.topLeftCorner(na, na) += qa;
        const double g1 = logdet_pd(herm(qa + Zra)) - ldr +
                          logdet_pd(herm(vb + Zdb)) - lddb;
        const double g2 =
            logdet_pd(herm(a.Z_D + Eb * vb * Eb.adjoint() +
                           F * cj * F.adjoint())) -
            ldd;
        return std::make_pair(g1, g2);
    };
    f.grad = [&](const BlockVec& x, double w1, double w2) {
        const Mat qa = psd_part(x.b[0]);
        const Mat vb = psd_part(x.b[2]);
        Mat cj = psd_part(x.b[1]);
        cj.topLeftCorner(na, na) += qa;
        const Mat t = herm(a.Z_D + Eb * vb * Eb.adjoint() +
                           F * cj * F.adjoint())
                          .inverse();
        const Mat gm = herm(F.adjoint() * t * F);
        BlockVec g;
        g.b.push_back(Mat(w1 * herm(qa + Zra).inverse() +
                          w2 * gm.topLeftCorner(na, na)));
        g.b.push_back(Mat(w2 * gm));
        g.b.push_back(Mat(w1 * herm(vb + Zdb).inverse() +
                          w2 * herm(Eb.adjoint() * t * Eb)));
        return g;
    };

    std::vector<BlockVec> starts;
    {
        BlockVec x;
        x.b.push_back((0.5 * a.P_S / na) * identity(na));
        Mat m = Mat::Zero(na + n, na + n);
        m.bottomRightCorner(n, n) = (a.P_R / n) * identity(n);
        x.b.push_back(m);
        x.b.push_back((0.5 * a.P_S / nb) * identity(nb));
        starts.push_back(x);
    }
    auto draw = [&, na, n, nb](Rng& r) {
        BlockVec x;
        x.b.push_back(r.psd_with_trace(na, 0.4 * a.P_S));
        x.b.push_back(r.psd_with_trace(na + n, 0.3 * (a.P_S + a.P_R)));
        x.b.push_back(r.psd_with_trace(nb, 0.4 * a.P_S));
        return x;
    };
    {
        Rng rng(cfg.seed + 5);
        for (int k = 0; k + 1 < cfg.restarts; ++k)
            starts.push_back(K.project(draw(rng)));
    }
    auto best = detail::solve_concave(f, K, starts, draw, cfg);
    out.bits = nats_to_bits(best.value);
    out.diag = best.diag;
    return out;
}

// Zero-forcing PDF: the direct-only stream is confined to the null space of
// H_SR, so it causes no interference at the relay and the problem is a
// single concave max-min. C_V = N X N^H with N an orthonormal null-space
// basis.
inline PdfSolution pdf_rate_zf(const ChannelInstance& c0,
                               const MaxMinSolverConfig& cfg = {}) {
    validate(c0);
    const ChannelInstance c = whiten(c0);
    const Eigen::Index ns = c.ns(), nr = c.nr(), nd = c.nd();
    Mat F(nd, ns + nr);
    F << c.H_SD, c.H_RD;

    // orthonormal basis of ker(H_SR)
    Mat N;
    {
        auto es = eig_herm(herm(c.H_SR.adjoint() * c.H_SR));
        const double thr =
            1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        std::vector<Eigen::Index> null_idx;
        for (Eigen::Index i = 0; i < ns; ++i)
            if (es.eigenvalues()[i] < thr) null_idx.push_back(i);
        N.resize(ns, static_cast<Eigen::Index>(null_idx.size()));
        for (size_t j = 0; j < null_idx.size(); ++j)
            N.col(static_cast<Eigen::Index>(j)) =
                es.eigenvectors().col(null_idx[j]);
    }
    const Eigen::Index k = N.cols();
    const Mat Hn = c.H_SD * N;  // nd x k

    MaxMinResult best;
    PdfSolution out;
    if (k == 0) {
        // empty null space: C_V is forced to zero and only (Q, M) remain
        FeasibleSet K;
        K.psd = {true, true};
        TraceCap c1, c2;
        Mat ms = Mat::Zero(ns + nr, ns + nr);
        ms.topLeftCorner(ns, ns) = identity(ns);
        Mat mr = Mat::Zero(ns + nr, ns + nr);
        mr.bottomRightCorner(nr, nr) = identity(nr);
        c1.weights = {identity(ns), ms};
        c1.bound = c.P_S;
        c2.weights = {Mat(), mr};
        c2.bound = c.P_R;
        K.caps = {c1, c2};
        MaxMinObjective f;
        f.value = [&](const BlockVec& x) {
            const Mat q = psd_part(x.b[0]);
            const Mat cj = detail::cj_of(x, ns);
            const double g1 = logdet_pd(
                herm(identity(nr) + c.H_SR * q * c.H_SR.adjoint()));
            const double g2 = logdet_pd(
                herm(identity(nd) + F * cj * F.adjoint()));
            return std::make_pair(g1, g2);
        };
        f.grad = [&](const BlockVec& x, double w1, double w2) {
            const Mat q = psd_part(x.b[0]);
            const Mat cj = detail::cj_of(x, ns);
            const Mat a1 =
                herm(identity(nr) + c.H_SR * q * c.H_SR.adjoint()).inverse();
            const Mat t =
                herm(identity(nd) + F * cj * F.adjoint()).inverse();
            const Mat gm = herm(F.adjoint() * t * F);
            BlockVec g;
            g.b.push_back(Mat(w1 * herm(c.H_SR.adjoint() * a1 * c.H_SR) +
                              w2 * gm.topLeftCorner(ns, ns)));
            g.b.push_back(Mat(w2 * gm));
            return g;
        };
        std::vector<BlockVec> starts;
        {
            RateSolution df = df_rate(c0, cfg);
            BlockVec x;
            x.b.push_back(detail::schur_cond(df.C, ns));
            Mat m = psd_part(df.C);
            m.topLeftCorner(ns, ns) -= x.b[0];
            x.b.push_back(psd_part(m));
            starts.push_back(x);
        }
        auto draw = [&](Rng& r) {
            BlockVec x;
            x.b.push_back(r.psd_with_trace(ns, 0.5 * c.P_S));
            x.b.push_back(r.psd_with_trace(ns + nr, 0.4 * (c.P_S + c.P_R)));
            return x;
        };
        Rng rng(cfg.seed + 9);
        for (int j = 0; j + 1 < cfg.restarts; ++j)
            starts.push_back(K.project(draw(rng)));
        best = detail::solve_concave(f, K, starts, draw, cfg);
        out.p.Q = psd_part(best.x.b[0]);
        out.p.C_joint = detail::cj_of(best.x, ns);
        out.p.C_V = Mat::Zero(ns, ns);
    } else {
        FeasibleSet K = detail::pdf_feasible(ns, nr, c.P_S, c.P_R);
        // third block is X (k x k); tr(C_V) = tr(X) since N is orthonormal,
        // so the source cap weight on it stays the identity
        K.caps[0].weights[2] = identity(k);
        MaxMinObjective f;
        f.value = [&](const BlockVec& x) {
            const Mat q = psd_part(x.b[0]);
            const Mat xx = psd_part(x.b[2]);
            const Mat cj = detail::cj_of(x, ns);
            const Mat bv =
                herm(identity(nd) + Hn * xx * Hn.adjoint());
            const double g1 =
                logdet_pd(herm(identity(nr) +
                               c.H_SR * q * c.H_SR.adjoint())) +
                logdet_pd(bv);
            const double g2 =
                logdet_pd(herm(bv + F * cj * F.adjoint()));
            return std::make_pair(g1, g2);
        };
        f.grad = [&](const BlockVec& x, double w1, double w2) {
            const Mat q = psd_part(x.b[0]);
            const Mat xx = psd_part(x.b[2]);
            const Mat cj = detail::cj_of(x, ns);
            const Mat a1 =
                herm(identity(nr) + c.H_SR * q * c.H_SR.adjoint()).inverse();
            const Mat bvi =
                herm(identity(nd) + Hn * xx * Hn.adjoint()).inverse();
            const Mat t = herm(identity(nd) + Hn * xx * Hn.adjoint() +
                               F * cj * F.adjoint())
                              .inverse();
            const Mat gm = herm(F.adjoint() * t * F);
            BlockVec g;
            g.b.push_back(Mat(w1 * herm(c.H_SR.adjoint() * a1 * c.H_SR) +
                              w2 * gm.topLeftCorner(ns, ns)));
            g.b.push_back(Mat(w2 * gm));
            g.b.push_back(Mat(w1 * herm(Hn.adjoint() * bvi * Hn) +
                              w2 * herm(Hn.adjoint() * t * Hn)));
            return g;
        };
        std::vector<BlockVec> starts;
        {
            RateSolution df = df_rate(c0, cfg);
            BlockVec x;
            x.b.push_back(detail::schur_cond(df.C, ns));
            Mat m = psd_part(df.C);
            m.topLeftCorner(ns, ns) -= x.b[0];
            x.b.push_back(psd_part(m));
            x.b.push_back(Mat::Zero(k, k));
            starts.push_back(x);
        }
        auto draw = [&](Rng& r) {
            BlockVec x;
            x.b.push_back(r.psd_with_trace(ns, 0.3 * c.P_S));
            x.b.push_back(r.psd_with_trace(ns + nr, 0.4 * (c.P_S + c.P_R)));
            x.b.push_back(r.psd_with_trace(k, 0.3 * c.P_S));
            return x;
        };
        Rng rng(cfg.seed + 9);
        for (int j = 0; j + 1 < cfg.restarts; ++j)
            starts.push_back(K.project(draw(rng)));
        best = detail::solve_concave(f, K, starts, draw, cfg);
        out.p.Q = psd_part(best.x.b[0]);
        out.p.C_joint = detail::cj_of(best.x, ns);
        out.p.C_V = herm(N * psd_part(best.x.b[2]) * N.adjoint());
    }
    out.bits = nats_to_bits(best.value);
    out.diag = best.diag;
    return out;
}

struct EpsilonRow {
    double eps = 0.0;
    double fixed_bits = 0.0;  // perturbed channel, unperturbed optimizer
    double reopt_bits = 0.0;  // perturbed channel, re-optimized
};

// Perturbation limit: the PDF rate of the singular-value-enhanced channel
// converges to the unperturbed rate as eps -> 0, both at the fixed
// unperturbed optimizer and after re-optimization.
inline std::vector<EpsilonRow> epsilon_limit_check(
    const ChannelInstance& c, const std::vector<double>& eps_list,
    const MaxMinSolverConfig& cfg = {}) {
    PdfSolution base = pdf_rate_gaussian(c, cfg);
    std::vector<EpsilonRow> rows;
    for (double e : eps_list) {
        EpsilonRow row;
        row.eps = e;
        if (e == 0.0) {
            row.fixed_bits = base.bits;
            row.reopt_bits = base.bits;
        } else {
            const ChannelInstance ce = perturb_enhance(c, e);
            row.fixed_bits = pdf_objective(ce, base.p).rate;
            row.reopt_bits = pdf_rate_gaussian(ce, cfg).bits;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace relaycap
