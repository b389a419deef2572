// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <relaycap/channel.hpp>
#include <relaycap/rates.hpp>

using namespace relaycap;

namespace {

ChannelInstance scalar_instance(double h_sr, double h_sd, double h_rd,
                                double ps = 1.0, double pr = 1.0) {
    ChannelInstance c;
    c.H_SR = Mat::Constant(1, 1, h_sr);
    c.H_SD = Mat::Constant(1, 1, h_sd);
    c.H_RD = Mat::Constant(1, 1, h_rd);
    c.Z_R = identity(1);
    c.Z_D = identity(1);
    c.P_S = ps;
    c.P_R = pr;
    return c;
}

// Independent 1-D grid oracle for the scalar decode-forward rate:
//   max over rho in [0,1] of min{ log2(1+g_sr*P_S*(1-rho^2)),
//                                 log2(1+g_sd*P_S+g_rd*P_R+2*rho*sqrt(g_sd*g_rd*P_S*P_R)) }
double df_oracle(double g_sr, double g_sd, double g_rd, double ps, double pr) {
    double best = 0.0;
    const int n = 200001;
    for (int i = 0; i < n; ++i) {
        double rho = double(i) / (n - 1);
        double t1 = std::log2(1.0 + g_sr * ps * (1.0 - rho * rho));
        double t2 = std::log2(1.0 + g_sd * ps + g_rd * pr +
                              2.0 * rho * std::sqrt(g_sd * g_rd * ps * pr));
        best = std::max(best, std::min(t1, t2));
    }
    return best;
}

// Cut-set bound oracle: broadcast cut sees both receivers.
double csb_oracle(double g_sr, double g_sd, double g_rd, double ps, double pr) {
    double best = 0.0;
    const int n = 200001;
    for (int i = 0; i < n; ++i) {
        double rho = double(i) / (n - 1);
        double t1 = std::log2(1.0 + (g_sr + g_sd) * ps * (1.0 - rho * rho));
        double t2 = std::log2(1.0 + g_sd * ps + g_rd * pr +
                              2.0 * rho * std::sqrt(g_sd * g_rd * ps * pr));
        best = std::max(best, std::min(t1, t2));
    }
    return best;
}

}  // namespace

TEST_CASE("p2p water filling scalar") {
    Mat h = Mat::Constant(1, 1, 1.0), z = identity(1);
    CHECK(p2p_capacity(h, z, 1.0).bits == Catch::Approx(1.0).margin(1e-9));
    h(0, 0) = 3.0;
    CHECK(p2p_capacity(h, z, 1.0).bits ==
          Catch::Approx(std::log2(10.0)).margin(1e-9));
}

TEST_CASE("p2p water filling two modes") {
    // gains 2 and 1, noise identity, P=3: water level mu solves
    // (mu-1/4)+(mu-1)=3 -> mu=17/8; C = log2(4*17/8) + log2(17/8)
    Mat h = (Mat(2, 2) << 2, 0, 0, 1).finished();
    double expect = std::log2(4.0 * 17.0 / 8.0) + std::log2(17.0 / 8.0);
    auto sol = p2p_capacity(h, identity(2), 3.0);
    CHECK(sol.bits == Catch::Approx(expect).margin(1e-8));
    CHECK(std::abs(sol.C_S.trace().real() - 3.0) < 1e-8);
    // weak mode shut off at low power: only the strong mode is active
    auto low = p2p_capacity(h, identity(2), 0.5);
    CHECK(low.bits == Catch::Approx(std::log2(3.0)).margin(1e-8));
}

TEST_CASE("df rate scalar vs grid oracle") {
    MaxMinSolverConfig cfg;
    struct Case {
        double g_sr, g_sd, g_rd, ps, pr;
    };
    const Case cases[] = {
        {4, 1, 1, 1, 1},  // source-relay link strong: oracle gives 2.0 at rho=1/2
        {9, 1, 4, 1, 1},
        {1, 4, 1, 1, 1},  // weak relay: direct link dominates
        {6, 2, 3, 2, 1},
    };
    for (const auto& k : cases) {
        auto c = scalar_instance(std::sqrt(k.g_sr), std::sqrt(k.g_sd),
                                 std::sqrt(k.g_rd), k.ps, k.pr);
        double want = df_oracle(k.g_sr, k.g_sd, k.g_rd, k.ps, k.pr);
        auto got = df_rate(c, cfg);
        CHECK(got.bits == Catch::Approx(want).margin(2e-4));
        CHECK(got.diag.converged);
    }
    // spot-check the closed form for the first case
    CHECK(df_oracle(4, 1, 1, 1, 1) == Catch::Approx(2.0).margin(1e-7));
}

TEST_CASE("csb rate scalar vs grid oracle") {
    MaxMinSolverConfig cfg;
    auto c = scalar_instance(2, 1, 1);
    double want = csb_oracle(4, 1, 1, 1, 1);
    CHECK(csb_rate(c, cfg).bits == Catch::Approx(want).margin(2e-4));

    auto c2 = scalar_instance(3, 2, 1, 1, 2);
    CHECK(csb_rate(c2, cfg).bits ==
          Catch::Approx(csb_oracle(9, 4, 1, 1, 2)).margin(2e-4));
}

TEST_CASE("bound ordering df <= csb, p2p <= csb") {
    MaxMinSolverConfig cfg;
    Rng rng(77);
    for (int t = 0; t < 3; ++t) {
        ChannelInstance c;
        int ns = 2, nr = 2, nd = 2;
        c.H_SR = rng.cgaussian(nr, ns);
        c.H_SD = rng.cgaussian(nd, ns);
        c.H_RD = rng.cgaussian(nd, nr);
        c.Z_R = identity(nr);
        c.Z_D = identity(nd);
        c.P_S = 2.0;
        c.P_R = 1.5;
        double df = df_rate(c, cfg).bits;
        double cs = csb_rate(c, cfg).bits;
        double pp = p2p_capacity(c.H_SD, c.Z_D, c.P_S).bits;
        CHECK(df <= cs + 2e-4);
        CHECK(pp <= cs + 2e-4);
    }
}

TEST_CASE("cut-off relay reduces df to p2p") {
    // H_SR = 0: term1 forces K -> anything, I(x_S;y_R|x_R)=0? No: term1 is 0,
    // so the min is 0 unless the solver sets C_S|R appropriately. With a zero
    // source-relay gain the decode constraint pins the rate at 0.
    MaxMinSolverConfig cfg;
    auto c = scalar_instance(0, 1, 1);
    CHECK(df_rate(c, cfg).bits == Catch::Approx(0.0).margin(2e-4));
    // and the cut-set bound collapses to coherent direct transmission
    double want = csb_oracle(0, 1, 1, 1, 1);
    CHECK(csb_rate(c, cfg).bits == Catch::Approx(want).margin(2e-4));
}

TEST_CASE("coop_solve scalar closed form") {
    // max log|w0 + (h+a)^2 c_r| with c_r<=P_R, a^2 c_r <= P_a:
    // optimum c_r=P_R, a=sqrt(P_a/P_R), value = ln(1+(h+a)^2 P_R/w0)+ln w0.
    MaxMinSolverConfig cfg;
    Mat w0 = identity(1), h = Mat::Constant(1, 1, 1.0);
    double pa = 4.0, pr = 1.0;
    auto sol = coop_solve(w0, h, pa, pr, cfg);
    double want = std::log(1.0 + (1.0 + 2.0) * (1.0 + 2.0) * pr);
    CHECK(sol.nats == Catch::Approx(want).margin(1e-5));
}
