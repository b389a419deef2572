// SPDX-License-Identifier: Apache-2.0
//
// Generic machinery for the concave max-min problems behind the rate
// bounds: block-structured Hermitian variables, Dykstra projection onto
// {PSD blocks} ∩ {linear trace caps}, projected gradient ascent for a
// weighted objective, and a bisection on the convex-combination weight
// with Polyak refinement for the max-min value.

#pragma once

#include <relaycap/matrix.hpp>
#include <functional>
#include <utility>
#include <vector>

namespace relaycap {

struct SolverNotConverged : std::runtime_error {
    double best_value_bits;
    SolverNotConverged(const std::string& msg, double best)
        : std::runtime_error(msg), best_value_bits(best) {}
};

struct MaxMinSolverConfig {
    int max_iters = 600;   // projected-gradient iterations per weighted solve
    int restarts = 4;      // random starts in addition to structured ones
    double rate_tol = 1e-4;  // bits
    std::uint64_t seed = 1;
};

struct SolverDiagnostics {
    int iterations = 0;
    double residual = 0.0;  // duality-style gap estimate, nats
    bool converged = true;
};

// A tuple of Hermitian matrices treated as one real vector space with
// inner product <A,B> = Re tr(A^H B).
struct BlockVec {
    std::vector<Mat> b;

    static BlockVec zeros_like(const BlockVec& x) {
        BlockVec z;
        z.b.reserve(x.b.size());
        for (const auto& m : x.b) z.b.push_back(Mat::Zero(m.rows(), m.cols()));
        return z;
    }
    BlockVec& operator+=(const BlockVec& o) {
        for (size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
        return *this;
    }
    BlockVec& operator-=(const BlockVec& o) {
        for (size_t i = 0; i < b.size(); ++i) b[i] -= o.b[i];
        return *this;
    }
    BlockVec& operator*=(double s) {
        for (auto& m : b) m *= s;
        return *this;
    }
    friend BlockVec operator+(BlockVec a, const BlockVec& c) { return a += c; }
    friend BlockVec operator-(BlockVec a, const BlockVec& c) { return a -= c; }
    friend BlockVec operator*(double s, BlockVec a) { return a *= s; }
    double dot(const BlockVec& o) const {
        double s = 0.0;
        for (size_t i = 0; i < b.size(); ++i)
            s += (b[i].adjoint() * o.b[i]).trace().real();
        return s;
    }
    double norm() const { return std::sqrt(std::max(0.0, dot(*this))); }
};

namespace detail {

// Smallest y >= 0 such that y*A - B is PSD, for PSD A; infinity if no such
// y exists. Splitting along range/kernel of A and applying the generalized
// Schur-complement PSD criterion gives the answer as one extremal eigenvalue.
inline double min_psd_scale(const Mat& A, const Mat& B) {
    const double inf = std::numeric_limits<double>::infinity();
    const double scale = std::max({1.0, A.norm(), B.norm()});
    const double tol = 1e-11 * scale;
    if (A.size() == 0 || A.norm() <= tol) {
        // y*0 >= B needs B <= 0
        if (B.size() == 0) return 0.0;
        return min_eig(Mat(-herm(B))) >= -tol ? 0.0 : inf;
    }
    auto ea = eig_herm(herm(A));
    std::vector<Eigen::Index> rng_i, ker_i;
    for (Eigen::Index i = 0; i < ea.eigenvalues().size(); ++i)
        (ea.eigenvalues()[i] > tol ? rng_i : ker_i).push_back(i);
    const Eigen::Index r = static_cast<Eigen::Index>(rng_i.size());
    const Eigen::Index k = static_cast<Eigen::Index>(ker_i.size());
    Mat Ur(A.rows(), r), Uk(A.rows(), k);
    RVec dr(r);
    for (Eigen::Index j = 0; j < r; ++j) {
        Ur.col(j) = ea.eigenvectors().col(rng_i[j]);
        dr[j] = ea.eigenvalues()[rng_i[j]];
    }
    for (Eigen::Index j = 0; j < k; ++j)
        Uk.col(j) = ea.eigenvectors().col(ker_i[j]);

    Mat C = herm(Ur.adjoint() * B * Ur);  // to be dominated by y*diag(dr)
    if (k > 0) {
        const Mat Bkk = herm(Uk.adjoint() * B * Uk);
        const Mat Brk = Ur.adjoint() * B * Uk;
        auto ek = eig_herm(Mat(-Bkk));  // must be PSD
        if (ek.eigenvalues().minCoeff() < -tol) return inf;
        // couplings into the kernel of (-Bkk) cannot be dominated at any y
        Mat Zp = Mat::Zero(k, k);  // pinv of (-Bkk)
        for (Eigen::Index j = 0; j < k; ++j) {
            const double e = ek.eigenvalues()[j];
            const Mat vj = ek.eigenvectors().col(j);
            if (e > tol)
                Zp += (1.0 / e) * (vj * vj.adjoint());
            else if ((Brk * vj).norm() > std::sqrt(tol * scale))
                return inf;
        }
        C = herm(C + Brk * Zp * Brk.adjoint());
    }
    Mat Dri = Mat::Zero(r, r);
    for (Eigen::Index j = 0; j < r; ++j)
        Dri(j, j) = 1.0 / std::sqrt(dr[j]);
    if (r == 0) return 0.0;
    return std::max(0.0, min_eig(Mat(-herm(Dri * C * Dri))) * -1.0);
}

}  // namespace detail

// Linear trace cap: sum_i Re tr(W_i^H X_i) <= bound, W_i Hermitian.
struct TraceCap {
    std::vector<Mat> weights;  // one per block; empty matrix = not involved
    double bound = 0.0;

    double eval(const BlockVec& x) const {
        double s = 0.0;
        for (size_t i = 0; i < weights.size(); ++i)
            if (weights[i].size() > 0)
                s += (weights[i].adjoint() * x.b[i]).trace().real();
        return s;
    }
    double weight_norm2() const {
        double s = 0.0;
        for (const auto& w : weights)
            if (w.size() > 0) s += w.squaredNorm();
        return s;
    }
    BlockVec project(const BlockVec& x) const {
        double v = eval(x);
        if (v <= bound) return x;
        double alpha = (v - bound) / weight_norm2();
        BlockVec y = x;
        for (size_t i = 0; i < weights.size(); ++i)
            if (weights[i].size() > 0) y.b[i] -= alpha * weights[i];
        return y;
    }
};

// Feasible set {each selected block PSD} ∩ {trace caps} (∩ {upper bounds
// block_i <= S_i}, used by the wiretap subproblem).
struct FeasibleSet {
    std::vector<bool> psd;           // per block
    std::vector<Mat> upper;          // per block; empty = unbounded above
    std::vector<TraceCap> caps;

    BlockVec project_cones(const BlockVec& x) const {
        BlockVec y = x;
        for (size_t i = 0; i < y.b.size(); ++i)
            if (i < psd.size() && psd[i]) y.b[i] = psd_part(y.b[i]);
        return y;
    }
    BlockVec project_upper(const BlockVec& x, size_t i) const {
        BlockVec y = x;
        y.b[i] = herm(upper[i] - psd_part(upper[i] - y.b[i]));
        return y;
    }
    double violation(const BlockVec& x) const {
        double v = 0.0;
        for (size_t i = 0; i < x.b.size(); ++i) {
            if (i < psd.size() && psd[i]) v = std::max(v, -min_eig(x.b[i]));
            if (i < upper.size() && upper[i].size() > 0)
                v = std::max(v, -min_eig(upper[i] - x.b[i]));
        }
        for (const auto& c : caps) v = std::max(v, c.eval(x) - c.bound);
        return v;
    }

    // Dykstra's alternating projection.
    // The tail clip+shrink makes the output exactly feasible even when the
    // Dykstra cycles stop early, so a small cycle budget only perturbs the
    // step direction slightly; ascent stays monotone because objective
    // values are only ever taken at the exactly feasible output.
    BlockVec project(const BlockVec& x0, int max_cycles = 8,
                     double tol = 1e-12) const {
        // crude rounding first: clip to the cones and shrink into the caps.
        // Dykstra contracts slowly from far-away points, so start it from a
        // point already within O(1) of the feasible set.
        auto shrink_caps = [this](BlockVec& v) {
            for (const auto& c : caps) {
                double e = c.eval(v);
                if (e > c.bound)
                    for (size_t i = 0; i < c.weights.size(); ++i)
                        if (c.weights[i].size() > 0) v.b[i] *= c.bound / e;
            }
        };
        BlockVec x = x0;
        if (violation(x) > 0.1) {
            x = project_cones(x);
            shrink_caps(x);
        }

        // elementary sets, in order: cones, each upper bound, each cap
        std::vector<size_t> ups;
        for (size_t i = 0; i < upper.size(); ++i)
            if (upper[i].size() > 0) ups.push_back(i);
        const size_t nproj = 1 + ups.size() + caps.size();
        std::vector<BlockVec> corr(nproj, BlockVec::zeros_like(x0));
        const double scale2 = std::max(1.0, x.dot(x));
        for (int cycle = 0; cycle < max_cycles; ++cycle) {
            // cheap convergence test: the cycle is a fixed-point iteration,
            // so a vanishing per-cycle move means all constraint sets agree
            double moved = 0.0;
            for (size_t k = 0; k < nproj; ++k) {
                BlockVec z = x + corr[k];
                BlockVec y = k == 0 ? project_cones(z)
                             : k <= ups.size()
                                 ? project_upper(z, ups[k - 1])
                                 : caps[k - 1 - ups.size()].project(z);
                corr[k] = z - y;
                BlockVec d = y - x;
                moved += d.dot(d);
                x = std::move(y);
            }
            if (moved <= tol * tol * scale2) break;
        }
        // the cycle can exit between projections; return an exactly feasible
        // point (PSD clip, then shrink into the caps, which keeps PSD) so
        // objective evaluations can never be inflated by infeasibility
        x = project_cones(x);
        shrink_caps(x);
        return x;
    }

    // Exact support function h_K(W) = max_{X in K} <W, X>. For a concave
    // objective with gradient W at a feasible x this yields the provable
    // bound max f <= f(x) + h_K(W) - <W, x> (Frank-Wolfe gap), which is what
    // the convergence flags are based on. Covers the two set shapes used
    // here: independent boxes [0, S_i], and a single trace-capped PSD block.
    double support(const BlockVec& w) const {
        if (!caps.empty()) {
            // trace-capped PSD blocks with m <= 2 caps: strong dual
            //   min_y sum_i y_i P_i  s.t.  sum_i y_i W_i^(b) >= W^(b)
            //   for every block b, y >= 0
            const double inf = std::numeric_limits<double>::infinity();
            auto capw = [&](size_t ci, size_t b) -> const Mat* {
                if (ci >= caps.size() || b >= caps[ci].weights.size() ||
                    caps[ci].weights[b].size() == 0)
                    return nullptr;
                return &caps[ci].weights[b];
            };
            // smallest feasible multiplier of cap `target` with the other
            // cap's multiplier fixed
            auto min_y = [&](size_t target, double yfix) {
                double req = 0.0;
                for (size_t b = 0; b < w.b.size(); ++b) {
                    Mat B = herm(w.b[b]);
                    if (const Mat* m = capw(1 - target, b)) B -= yfix * *m;
                    const Mat* A = capw(target, b);
                    const double y = detail::min_psd_scale(
                        A ? *A : Mat(), B);
                    if (!std::isfinite(y)) return inf;
                    req = std::max(req, y);
                }
                return req;
            };
            if (caps.size() == 1) {
                const double y = min_y(0, 0.0);
                return std::isfinite(y) ? y * caps[0].bound : inf;
            }
            const double p1 = caps[0].bound, p2 = caps[1].bound;
            auto g = [&](double y1) {
                const double y2 = min_y(1, y1);
                return std::isfinite(y2) ? p1 * y1 + p2 * y2 : inf;
            };
            // search range for y1: enough that cap 1 alone dominates every
            // block it covers (beyond that g can only grow)
            double hi1 = min_y(0, 0.0);
            if (!std::isfinite(hi1)) {
                hi1 = 1.0;
                for (int d = 0; d < 40 && !std::isfinite(g(hi1)); ++d)
                    hi1 *= 2.0;
                if (!std::isfinite(g(hi1))) return inf;
            }
            // coarse scan then golden-section refinement (g is convex)
            double best_y = 0.0, best_g = g(0.0);
            const int ngrid = 32;
            for (int i = 1; i <= ngrid; ++i) {
                double y = hi1 * i / ngrid;
                double v = g(y);
                if (v < best_g) {
                    best_g = v;
                    best_y = y;
                }
            }
            double a = std::max(0.0, best_y - hi1 / ngrid);
            double b = std::min(hi1, best_y + hi1 / ngrid);
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            double c = b - gr * (b - a), d = a + gr * (b - a);
            double gc = g(c), gd = g(d);
            for (int it = 0; it < 60; ++it) {
                if (gc < gd) {
                    b = d;
                    d = c;
                    gd = gc;
                    c = b - gr * (b - a);
                    gc = g(c);
                } else {
                    a = c;
                    c = d;
                    gc = gd;
                    d = a + gr * (b - a);
                    gd = g(d);
                }
            }
            return std::min({best_g, gc, gd});
        }
        // independent blocks: boxes [0, S_i] (or the PSD cone alone, whose
        // support is infinite unless the gradient block is NSD)
        double s = 0.0;
        for (size_t i = 0; i < w.b.size(); ++i) {
            const bool boxed = i < upper.size() && upper[i].size() > 0;
            if (boxed) {
                const Mat h = sqrt_psd(psd_part(upper[i]));
                auto ev = eig_herm(herm(h * w.b[i] * h)).eigenvalues();
                for (Eigen::Index k = 0; k < ev.size(); ++k)
                    if (ev[k] > 0.0) s += ev[k];
            } else if (i < psd.size() && psd[i]) {
                auto ev = eig_herm(herm(w.b[i])).eigenvalues();
                if (ev.maxCoeff() > 1e-12 * std::max(1.0, w.b[i].norm()))
                    return std::numeric_limits<double>::infinity();
            }
        }
        return s;
    }

    // Strictly feasible reference point: identity-shaped blocks shrunk to
    // half of every cap. Blending an iterate slightly toward it restores
    // gradient conditioning when a certificate degenerates at the boundary.
    BlockVec interior(const BlockVec& like) const {
        BlockVec v = BlockVec::zeros_like(like);
        for (size_t i = 0; i < v.b.size(); ++i) {
            const bool boxed = i < upper.size() && upper[i].size() > 0;
            if (boxed)
                v.b[i] = 0.5 * psd_part(upper[i]);
            else if (i < psd.size() && psd[i])
                v.b[i] = identity(v.b[i].rows());
        }
        double t = 1.0;
        for (const auto& c : caps) {
            const double e = c.eval(v);
            if (e > 0.0) t = std::min(t, 0.5 * c.bound / e);
        }
        for (auto& m : v.b) m *= t;
        return v;
    }
};

// Two smooth concave functions of a BlockVec with gradients.
struct MaxMinObjective {
    // returns (g1, g2) in nats
    std::function<std::pair<double, double>(const BlockVec&)> value;
    // gradient of w1*g1 + w2*g2
    std::function<BlockVec(const BlockVec&, double, double)> grad;
    // optional Hessian action E -> D^2(w1*g1 + w2*g2)(x)[E]; when provided
    // (and the feasible set is cones + caps only) the weighted solves use a
    // barrier Newton method instead of projected gradient, which reaches
    // certificate-grade accuracy on ill-conditioned instances where the
    // first-order method crawls
    std::function<BlockVec(const BlockVec&, const BlockVec&, double, double)>
        hess;
};

struct MaxMinResult {
    BlockVec x;
    double g1 = 0.0, g2 = 0.0;  // nats
    double value = 0.0;         // min(g1, g2), nats
    double upper = 0.0;         // dual-style upper bound, nats
    double lambda = 0.5;        // weight of the winning inner solve
    SolverDiagnostics diag;
};

namespace detail {

// Projected gradient ascent with Armijo backtracking on the weighted
// concave objective w1*g1 + w2*g2 over K.
struct WeightedSolve {
    double g1 = 0.0, g2 = 0.0, value = 0.0;
    double upper = 0.0;  // Frank-Wolfe dual bound on the weighted max
    BlockVec x;
    int iters = 0;
};

// Frank-Wolfe bound on max_K w1*g1 + w2*g2, anchored at (or near) x. The
// bound f(y) + h_K(grad f(y)) - <grad f(y), y> is valid at every feasible y,
// so when the gradient at x itself is degenerate (support infinite, which
// happens where a nonsmooth objective term sits on the boundary of its
// domain) retreat slightly toward the interior and certify from there.
inline double fw_bound(const MaxMinObjective& f, const FeasibleSet& K,
                       const BlockVec& x, double w1, double w2) {
    double best = std::numeric_limits<double>::infinity();
    BlockVec xi;
    for (double th : {0.0, 1e-7, 1e-5, 1e-3, 1e-1}) {
        BlockVec xt = x;
        if (th > 0.0) {
            if (xi.b.empty()) xi = K.interior(x);
            xt = (1.0 - th) * x + th * xi;
        }
        BlockVec g = f.grad(xt, w1, w2);
        const double h = K.support(g);
        if (std::isfinite(h)) {
            auto [a, b] = f.value(xt);
            best = std::min(best, w1 * a + w2 * b + h - g.dot(xt));
            if (th == 0.0) break;
        }
    }
    return best;
}

// Bijection between a tuple of Hermitian matrices and real coordinates
// (diagonal entries, then re/im of the upper triangle). pack_grad doubles
// the off-diagonal coordinates so that <G, E> = pack_grad(G) . pack(E).
struct HermPack {
    std::vector<Eigen::Index> n;
    Eigen::Index dim = 0;

    explicit HermPack(const BlockVec& like) {
        for (const auto& m : like.b) {
            n.push_back(m.rows());
            dim += m.rows() * m.rows();
        }
    }
    Eigen::VectorXd pack(const BlockVec& x) const {
        Eigen::VectorXd v(dim);
        Eigen::Index k = 0;
        for (size_t b = 0; b < x.b.size(); ++b)
            for (Eigen::Index i = 0; i < n[b]; ++i) {
                v[k++] = x.b[b](i, i).real();
                for (Eigen::Index j = i + 1; j < n[b]; ++j) {
                    v[k++] = x.b[b](i, j).real();
                    v[k++] = x.b[b](i, j).imag();
                }
            }
        return v;
    }
    BlockVec unpack(const Eigen::VectorXd& v) const {
        BlockVec x;
        Eigen::Index k = 0;
        for (size_t b = 0; b < n.size(); ++b) {
            Mat m(n[b], n[b]);
            for (Eigen::Index i = 0; i < n[b]; ++i) {
                m(i, i) = v[k++];
                for (Eigen::Index j = i + 1; j < n[b]; ++j) {
                    const double re = v[k++], im = v[k++];
                    m(i, j) = Cplx(re, im);
                    m(j, i) = Cplx(re, -im);
                }
            }
            x.b.push_back(std::move(m));
        }
        return x;
    }
    Eigen::VectorXd pack_grad(const BlockVec& g) const {
        Eigen::VectorXd v = pack(g);
        Eigen::Index k = 0;
        for (size_t b = 0; b < n.size(); ++b)
            for (Eigen::Index i = 0; i < n[b]; ++i) {
                ++k;
                for (Eigen::Index j = i + 1; j < n[b]; ++j) {
                    v[k++] *= 2.0;
                    v[k++] *= 2.0;
                }
            }
        return v;
    }
};

// Barrier Newton method for max w1*g1 + w2*g2 over {PSD blocks} ∩ {caps}.
// Maximizes t*f(x) + sum_b ln det x_b + sum_c ln(bound_c - cap_c(x)) along
// an increasing t schedule; the barrier parameter nu bounds the
// suboptimality by nu/t at a centered point, so the final point carries a
// Frank-Wolfe certificate of matching quality. Requires f.hess.
inline WeightedSolve newton_weighted(const MaxMinObjective& f,
                                     const FeasibleSet& K, const BlockVec& x0,
                                     double w1, double w2, double target_gap) {
    // strictly interior start: the given start may sit on the boundary
    const BlockVec xi = K.interior(x0);
    BlockVec x = 0.95 * x0 + 0.05 * xi;
    const HermPack P(x);
    // warm starts often arrive already certified (or nearly so); check the
    // duality gap at the caller's point before paying for any Newton work
    double gap0 = std::numeric_limits<double>::infinity();
    {
        const double ub = fw_bound(f, K, x0, w1, w2);
        auto [a0, b0] = f.value(x0);
        gap0 = ub - (w1 * a0 + w2 * b0);
        if (std::isfinite(gap0) && gap0 <= std::max(target_gap, 1e-10)) {
            WeightedSolve r0;
            r0.iters = 0;
            r0.g1 = a0;
            r0.g2 = b0;
            r0.value = w1 * a0 + w2 * b0;
            r0.upper = ub;
            r0.x = x0;
            return r0;
        }
    }
    double nu = static_cast<double>(K.caps.size());
    for (Eigen::Index m : P.n) nu += static_cast<double>(m);

    auto strictly_feasible = [&](const BlockVec& v) {
        for (const auto& m : v.b)
            if (min_eig(herm(m)) <= 0.0) return false;
        for (const auto& c : K.caps)
            if (c.eval(v) >= c.bound) return false;
        return true;
    };
    auto phi = [&](const BlockVec& v, double t) {
        auto [a, b] = f.value(v);
        double s = t * (w1 * a + w2 * b);
        for (const auto& m : v.b) s += logdet_pd(herm(m));
        for (const auto& c : K.caps) s += std::log(c.bound - c.eval(v));
        return s;
    };
    auto grad_phi = [&](const BlockVec& v, double t) {
        BlockVec g = f.grad(v, t * w1, t * w2);
        for (size_t i = 0; i < v.b.size(); ++i)
            g.b[i] += herm(v.b[i]).inverse();
        for (const auto& c : K.caps) {
            const double s = c.bound - c.eval(v);
            for (size_t i = 0; i < c.weights.size(); ++i)
                if (c.weights[i].size() > 0) g.b[i] -= (1.0 / s) * c.weights[i];
        }
        return g;
    };
    // Hessian action of the barrier terms plus t*f
    auto hess_phi = [&](const BlockVec& v, const BlockVec& e, double t,
                        const std::vector<Mat>& vinv) {
        BlockVec h = f.hess(v, e, t * w1, t * w2);
        for (size_t i = 0; i < v.b.size(); ++i)
            h.b[i] -= herm(vinv[i] * e.b[i] * vinv[i]);
        for (const auto& c : K.caps) {
            const double s = c.bound - c.eval(v);
            const double ce = c.eval(e);
            for (size_t i = 0; i < c.weights.size(); ++i)
                if (c.weights[i].size() > 0)
                    h.b[i] -= (ce / (s * s)) * c.weights[i];
        }
        return h;
    };

    WeightedSolve r;
    r.iters = 0;
    const double t_max = nu / std::max(target_gap, 1e-10);
    // warm starts carry a small duality gap already; begin the barrier
    // schedule at the level that gap justifies instead of re-ramping from 1
    double t = 1.0;
    if (std::isfinite(gap0)) t = std::min(t_max, std::max(1.0, nu / gap0));
    for (; t < 8.0 * t_max; t *= 8.0) {
        const double tc = std::min(t, t_max);
        for (int it = 0; it < 50; ++it) {
            ++r.iters;
            std::vector<Mat> vinv;
            vinv.reserve(x.b.size());
            for (const auto& m : x.b) vinv.push_back(herm(m).inverse());
            const Eigen::VectorXd g = P.pack_grad(grad_phi(x, tc));
            Eigen::MatrixXd H(P.dim, P.dim);
            {
                Eigen::VectorXd ej = Eigen::VectorXd::Zero(P.dim);
                for (Eigen::Index j = 0; j < P.dim; ++j) {
                    ej[j] = 1.0;
                    H.col(j) =
                        P.pack_grad(hess_phi(x, P.unpack(ej), tc, vinv));
                    ej[j] = 0.0;
                }
            }
            Eigen::MatrixXd Hs = -0.5 * (H + H.transpose());
            const double ridge =
                1e-12 * std::max(1.0, Hs.diagonal().maxCoeff());
            Hs.diagonal().array() += ridge;
            Eigen::VectorXd dx = Eigen::LDLT<Eigen::MatrixXd>(Hs).solve(g);
            double dec = g.dot(dx);
            if (!(dec > 0.0)) break;  // numerically centered (or indefinite)
            const Eigen::VectorXd xv = P.pack(x);
            const double f0 = phi(x, tc);
            double al = 1.0;
            bool ok = false;
            for (int bt = 0; bt < 60; ++bt, al *= 0.5) {
                BlockVec xn = P.unpack(xv + al * dx);
                if (strictly_feasible(xn) && phi(xn, tc) > f0) {
                    x = std::move(xn);
                    ok = true;
                    break;
                }
            }
            if (!ok) break;
            // Newton decrement ~ distance to the central point; once small
            // the nu/tc gap bound applies and the stage is done
            if (dec < 1e-3) break;
        }
        if (t >= t_max) break;
    }

    auto [a, b] = f.value(x);
    r.g1 = a;
    r.g2 = b;
    r.value = w1 * a + w2 * b;
    r.upper = fw_bound(f, K, x, w1, w2);
    r.x = std::move(x);
    return r;
}

inline WeightedSolve maximize_weighted(const MaxMinObjective& f,
                                       const FeasibleSet& K, BlockVec x,
                                       double w1, double w2, int max_iters,
                                       double f_tol = 1e-12,
                                       double gap_tol = 1e-10) {
    auto val = [&](const BlockVec& v) {
        auto [a, b] = f.value(v);
        return std::make_tuple(w1 * a + w2 * b, a, b);
    };
    auto [fx, a0, b0] = val(x);
    double step = 1.0;
    int stall = 0;
    int it = 0;
    double ga = a0, gb = b0;
    // best accepted point: the escape hatch below may temporarily lower the
    // objective, so the returned point must not regress
    BlockVec bx = x;
    double bfx = fx, bga = ga, bgb = gb;
    int escapes = 6;
    BlockVec xi;
    for (; it < max_iters; ++it) {
        BlockVec g = f.grad(x, w1, w2);
        double gn2 = g.dot(g);
        if (gn2 <= 0.0) break;
        auto try_steps = [&](int proj_cycles) {
            for (int bt = 0; bt < 40; ++bt) {
                BlockVec xc = K.project(x + step * g, proj_cycles);
                BlockVec d = xc - x;
                double dd = d.dot(d);
                auto [fc, ac, bc] = val(xc);
                const double gd = g.dot(d);
                // Armijo with plain-improvement fallback; iterates are
                // projected and evaluated on their PSD part, so values cannot
                // be inflated by infeasibility and monotone acceptance is safe
                if ((gd > 0.0 && fc >= fx + 0.25 * gd - 1e-18) ||
                    fc > fx + 1e-18 || (fc > fx && dd < 1e-24)) {
                    double improve = fc - fx;
                    x = std::move(xc);
                    fx = fc;
                    ga = ac;
                    gb = bc;
                    if (improve < f_tol * std::max(1.0, std::abs(fx)))
                        ++stall;
                    else
                        stall = 0;
                    step *= 1.6;
                    return true;
                }
                step *= 0.4;
                if (step < 1e-18) break;
            }
            return false;
        };
        // cheap projections steer most of the ascent; near the optimum their
        // direction error can dominate the step gain, so rescue an apparent
        // stall once with high-accuracy projections before giving up
        bool accepted = try_steps(8);
        if (!accepted) {
            step = 1.0;
            accepted = try_steps(160);
        }
        if (accepted && fx > bfx) {
            bx = x;
            bfx = fx;
            bga = ga;
            bgb = gb;
        }
        if (!accepted) {
            // a nonsmooth objective term can drag the ascent into a boundary
            // cul-de-sac where its gradient blows up and every backtracked
            // step fails; retreat slightly toward the interior (a bounded,
            // recoverable objective loss) and resume from better-conditioned
            // ground instead of giving up there
            if (escapes > 0 && gn2 > 1e6) {
                --escapes;
                if (xi.b.empty()) xi = K.interior(x);
                x = 0.99 * x + 0.01 * xi;
                std::tie(fx, ga, gb) = val(x);
                step = 1.0;
                stall = 0;
                continue;
            }
            break;
        }
        if (stall >= 4) break;
        // periodic duality-gap check: the support function certifies how
        // much improvement remains, so converged solves exit early instead
        // of grinding through the full iteration budget
        if ((it & 31) == 31) {
            BlockVec gf = f.grad(x, w1, w2);
            const double h = K.support(gf);
            if (std::isfinite(h) &&
                h - gf.dot(x) <= gap_tol * std::max(1.0, std::abs(fx)))
                break;
        }
    }
    if (bfx > fx) {
        x = std::move(bx);
        fx = bfx;
        ga = bga;
        gb = bgb;
    }
    WeightedSolve r;
    r.upper = fw_bound(f, K, x, w1, w2);
    r.x = std::move(x);
    r.g1 = ga;
    r.g2 = gb;
    r.value = fx;
    r.iters = it;
    return r;
}

}  // namespace detail

// max over x in K of min(g1(x), g2(x)) for concave g1, g2.
//
// Strategy: the saddle value equals min over lambda in [0,1] of
// phi(lambda) = max_x lambda*g1 + (1-lambda)*g2, and
// g1(x(lambda)) - g2(x(lambda)) is nondecreasing in lambda, so bisect on
// the sign of the difference. A Polyak-step refinement on min(g1,g2)
// with the dual value as the target absorbs degenerate (non-equalizing)
// cases.
// upper_hint, when finite, must be a valid upper bound on the saddle value
// (e.g. an analytic bound on max g1 or max g2); it tightens the duality-gap
// bookkeeping when the weighted solves cannot certify an endpoint themselves.
inline MaxMinResult maxmin_solve(const MaxMinObjective& f, const FeasibleSet& K,
                                 const BlockVec& x0, const MaxMinSolverConfig& cfg,
                                 double lam_lo = 0.0, double lam_hi = 1.0,
                                 double upper_hint =
                                     std::numeric_limits<double>::infinity()) {
    MaxMinResult best;
    best.value = -1e300;
    auto consider = [&](const detail::WeightedSolve& s, double lam) {
        double v = std::min(s.g1, s.g2);
        if (v > best.value) {
            best.value = v;
            best.g1 = s.g1;
            best.g2 = s.g2;
            best.x = s.x;
            best.lambda = lam;
        }
    };

    // the saddle value is at most phi(lambda) for every lambda, and each
    // weighted solve carries a dual bound on its phi(lambda), so the running
    // upper bound is valid even when an individual solve stalls
    double upper = upper_hint;

    // inner solves only need precision comparable to the rate tolerance;
    // the Polyak refinement below closes the remaining primal gap
    const double gtol = std::max(1e-10, 5e-2 * bits_to_nats(cfg.rate_tol));
    const double val_tol = 0.2 * bits_to_nats(cfg.rate_tol);

    const bool use_newton = static_cast<bool>(f.hess) && [&] {
        for (const auto& u : K.upper)
            if (u.size() > 0) return false;
        return true;
    }();
    auto solve_w = [&](const BlockVec& s, double lam) {
        return use_newton
                   ? detail::newton_weighted(f, K, s, lam, 1.0 - lam,
                                             0.5 * gtol)
                   : detail::maximize_weighted(f, K, s, lam, 1.0 - lam,
                                               cfg.max_iters, 1e-12, gtol);
    };

    // ends of the bisection interval
    auto s_lo = solve_w(x0, lam_lo);
#ifdef RELAYCAP_TRACE
    std::cerr<<"s_lo lam="<<lam_lo<<" g1="<<s_lo.g1<<" g2="<<s_lo.g2<<" fwgap="<<(s_lo.upper-s_lo.value)<<" iters="<<s_lo.iters<<" hint="<<upper<<"\n";
#endif
    consider(s_lo, lam_lo);
    best.diag.iterations = s_lo.iters;
    if (s_lo.g1 >= s_lo.g2 - 1e-14 && lam_lo == 0.0) {
        // pure-g2 maximizer already has g1 >= g2: value = max g2
        upper = std::min(upper, s_lo.upper);
    } else if (upper - best.value < val_tol) {
        // the external hint already certifies the current best point
    } else {
        auto s_hi = solve_w(s_lo.x, lam_hi);
#ifdef RELAYCAP_TRACE
    std::cerr<<"s_hi lam="<<lam_hi<<" g1="<<s_hi.g1<<" g2="<<s_hi.g2<<" fwgap="<<(s_hi.upper-s_hi.value)<<" iters="<<s_hi.iters<<"\n";
#endif
        consider(s_hi, lam_hi);
        best.diag.iterations += s_hi.iters;
        if (s_hi.g1 <= s_hi.g2 + 1e-14 && lam_hi == 1.0) {
            upper = std::min(upper, s_hi.upper);
        } else if (upper - best.value < val_tol) {
        } else {
            double lo = lam_lo, hi = lam_hi;
            // g1 - g2 at the weighted maximizer is monotone in lambda, so an
            // Illinois-style secant step converges far faster than plain
            // bisection; the bracket still shrinks every iteration
            double flo = s_lo.g1 - s_lo.g2, fhi = s_hi.g1 - s_hi.g2;
            int side = 0;
            BlockVec warm = s_hi.x;
            for (int it = 0; it < 40; ++it) {
                double lam = 0.5 * (lo + hi);
                if (flo < 0.0 && fhi > 0.0) {
                    lam = (lo * fhi - hi * flo) / (fhi - flo);
                    const double m = 0.02 * (hi - lo);
                    lam = std::min(hi - m, std::max(lo + m, lam));
                }
                auto s = solve_w(warm, lam);
#ifdef RELAYCAP_TRACE
                std::cerr<<"lam="<<lam<<" g1="<<s.g1<<" g2="<<s.g2<<" wval="<<s.value<<" fwgap="<<(s.upper-s.value)<<" iters="<<s.iters<<"\n";
#endif
                consider(s, lam);
                best.diag.iterations += s.iters;
                upper = std::min(upper, s.upper);
                // a solve that makes no progress and carries only a loose
                // certificate is stuck at a boundary point; warming the next
                // solve from it would freeze the bisection
                warm = (s.iters == 0 && s.upper - s.value > 10.0 * val_tol)
                           ? x0
                           : s.x;
                if (std::abs(s.g1 - s.g2) < 1e-12) break;
                if (upper - best.value < val_tol) break;
                const double fs = s.g1 - s.g2;
                if (fs > 0.0) {
                    hi = lam;
                    fhi = fs;
                    if (side == +1) flo *= 0.5;  // Illinois damping
                    side = +1;
                } else {
                    lo = lam;
                    flo = fs;
                    if (side == -1) fhi *= 0.5;
                    side = -1;
                }
                if (hi - lo < 1e-12) break;
            }
        }
    }

    // Polyak refinement on the pointwise minimum with the dual upper bound
    // as target value.
    if (std::isfinite(upper) && upper - best.value > 1e-12) {
        BlockVec x = best.x;
        // the dual bound usually overshoots the primal optimum slightly, so
        // the target gap cannot be driven to zero; quit once the remaining
        // gap is far below the rate tolerance or progress stalls
        const double quit_gap = 0.05 * bits_to_nats(cfg.rate_tol);
        int stall = 0;
        for (int it = 0;
             it < 300 && upper - best.value > quit_gap && stall < 12; ++it) {
            auto [a, b] = f.value(x);
            double v = std::min(a, b);
            BlockVec g = (a <= b) ? f.grad(x, 1.0, 0.0) : f.grad(x, 0.0, 1.0);
            double gn2 = g.dot(g);
            if (gn2 <= 1e-300) break;
            double t = (upper - v) / gn2;
            x = K.project(x + t * g);
            auto [a2, b2] = f.value(x);
            double v2 = std::min(a2, b2);
            if (v2 > best.value + 1e-14 * std::max(1.0, std::abs(best.value))) {
                best.value = v2;
                best.g1 = a2;
                best.g2 = b2;
                best.x = x;
                stall = 0;
            } else {
                ++stall;
            }
            ++best.diag.iterations;
        }
    }
    // the running upper bound was collected at bisection iterates; the final
    // point (often improved by the Polyak pass) usually carries a much
    // tighter Frank-Wolfe certificate, so re-evaluate the bound there
    upper = std::min(
        upper, detail::fw_bound(f, K, best.x, best.lambda, 1.0 - best.lambda));
    best.upper = std::max(upper, best.value);
    best.diag.residual = best.upper - best.value;
    return best;
}

// Deterministic RNG helpers (no implementation-defined distributions).
struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ull) {}
    std::uint64_t next_u64() {
        // splitmix64
        s += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() {  // in (0,1)
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() {
        double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    Cplx cnormal() {  // CN(0,1)
        return {normal() * M_SQRT1_2, normal() * M_SQRT1_2};
    }
    Mat cgaussian(Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = cnormal();
        return m;
    }
    // random PSD with trace exactly t
    Mat psd_with_trace(Eigen::Index n, double t) {
        Mat g = cgaussian(n, n);
        Mat x = herm(g * g.adjoint());
        double tr = x.trace().real();
        return (t / std::max(tr, 1e-300)) * x;
    }
};

}  // namespace relaycap
