// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <relaycap/channel.hpp>
#include <relaycap/rates.hpp>
#include <relaycap/solver.hpp>

using namespace relaycap;

namespace {

ChannelInstance scalar_instance(double h_sr, double h_sd, double h_rd,
                                double z_r = 1.0, double z_d = 1.0,
                                double ps = 1.0, double pr = 1.0) {
    ChannelInstance c;
    c.H_SR = Mat::Constant(1, 1, h_sr);
    c.H_SD = Mat::Constant(1, 1, h_sd);
    c.H_RD = Mat::Constant(1, 1, h_rd);
    c.Z_R = Mat::Constant(1, 1, z_r);
    c.Z_D = Mat::Constant(1, 1, z_d);
    c.P_S = ps;
    c.P_R = pr;
    return c;
}

ChannelInstance random_instance(Rng& rng, int ns, int nr, int nd) {
    ChannelInstance c;
    c.H_SR = rng.cgaussian(nr, ns);
    c.H_SD = rng.cgaussian(nd, ns);
    c.H_RD = rng.cgaussian(nd, nr);
    Mat gr = rng.cgaussian(nr, nr), gd = rng.cgaussian(nd, nd);
    c.Z_R = herm(gr * gr.adjoint() + 0.3 * identity(nr));
    c.Z_D = herm(gd * gd.adjoint() + 0.3 * identity(nd));
    c.P_S = 1.0 + rng.uniform();
    c.P_R = 1.0 + rng.uniform();
    return c;
}

}  // namespace

TEST_CASE("validate") {
    CHECK_NOTHROW(validate(scalar_instance(1, 1, 1)));

    auto bad = scalar_instance(1, 1, 1);
    bad.Z_R = Mat::Zero(1, 1);
    CHECK_THROWS_AS(validate(bad), NoiseNotPD);

    bad = scalar_instance(1, 1, 1);
    bad.H_SD = Mat::Zero(1, 2);  // wrong column count
    CHECK_THROWS_AS(validate(bad), InvalidDimensions);

    bad = scalar_instance(1, 1, 1);
    bad.P_R = 0.0;
    CHECK_THROWS_AS(validate(bad), NonpositivePower);
}

TEST_CASE("whiten scalar and fixed point") {
    auto c = scalar_instance(2, 1, 1, 4.0, 1.0);
    auto w = whiten(c);
    CHECK(std::abs(w.H_SR(0, 0) - Cplx(1, 0)) < 1e-12);
    CHECK(std::abs(w.Z_R(0, 0) - Cplx(1, 0)) < 1e-12);

    auto ww = whiten(w);
    CHECK((ww.H_SR - w.H_SR).norm() < 1e-12);
    CHECK((ww.H_SD - w.H_SD).norm() < 1e-12);
}

TEST_CASE("whiten preserves rates") {
    Rng rng(101);
    MaxMinSolverConfig cfg;
    cfg.seed = 5;
    for (int t = 0; t < 3; ++t) {
        auto c = random_instance(rng, 2, 2, 2);
        auto w = whiten(c);
        CHECK(p2p_capacity(c.H_SD, c.Z_D, c.P_S).bits ==
              Catch::Approx(p2p_capacity(w.H_SD, w.Z_D, w.P_S).bits).margin(1e-6));
        CHECK(df_rate(c, cfg).bits ==
              Catch::Approx(df_rate(w, cfg).bits).margin(1e-4));
    }
}

TEST_CASE("square_augment") {
    Rng rng(102);
    ChannelInstance c = whiten(random_instance(rng, 2, 1, 1));
    auto s = square_augment(c);
    CHECK(s.H_SR.rows() == 2);
    CHECK(s.H_SR.cols() == 2);
    CHECK((s.H_SR.topLeftCorner(1, 2) - c.H_SR).norm() == 0.0);
    CHECK((s.Z_R - identity(2)).norm() == 0.0);

    // already-square fixed point
    auto c2 = whiten(random_instance(rng, 2, 2, 2));
    auto s2 = square_augment(c2);
    CHECK((s2.H_SR - c2.H_SR).norm() == 0.0);

    // rate invariance
    CHECK(p2p_capacity(c.H_SD, c.Z_D, c.P_S).bits ==
          Catch::Approx(p2p_capacity(s.H_SD, s.Z_D, s.P_S).bits).margin(1e-6));
    MaxMinSolverConfig cfg;
    CHECK(df_rate(c, cfg).bits == Catch::Approx(df_rate(s, cfg).bits).margin(1e-4));
}

TEST_CASE("perturb_enhance") {
    auto z = scalar_instance(0, 1, 1);
    CHECK(std::abs(perturb_enhance(whiten(z), 0.1).H_SR(0, 0)) ==
          Catch::Approx(0.1));
    auto c = scalar_instance(2, 1, 1);
    CHECK(std::abs(perturb_enhance(whiten(c), 0.1).H_SR(0, 0)) ==
          Catch::Approx(2.1));
    CHECK_THROWS_AS(perturb_enhance(c, 0.0), NonpositiveEpsilon);

    Rng rng(103);
    for (int t = 0; t < 10; ++t) {
        auto w = square_augment(whiten(random_instance(rng, 2, 2, 2)));
        double eps = 0.01 + rng.uniform();
        auto e = perturb_enhance(w, eps);
        CHECK(loewner_leq(w.H_SR.adjoint() * w.H_SR, e.H_SR.adjoint() * e.H_SR));
        CHECK(loewner_leq(w.H_SD.adjoint() * w.H_SD, e.H_SD.adjoint() * e.H_SD));
        CHECK((e.H_SR - w.H_SR).norm() <= eps * std::sqrt(2.0) + 1e-12);
        CHECK((e.H_SD - w.H_SD).norm() <= eps * std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("to_aligned") {
    auto c = scalar_instance(2, 1, 1);
    auto a = to_aligned(c);
    CHECK(std::abs(a.Z_R(0, 0) - Cplx(0.25, 0)) < 1e-12);
    CHECK(std::abs(a.Z_D(0, 0) - Cplx(1.0, 0)) < 1e-12);

    Rng rng(104);
    ChannelInstance id = random_instance(rng, 2, 2, 2);
    id.H_SR = identity(2);
    id.H_SD = identity(2);
    id.Z_R = identity(2);
    id.Z_D = identity(2);
    auto aid = to_aligned(id);
    CHECK((aid.Z_R - identity(2)).norm() < 1e-12);
    CHECK((aid.Z_D - identity(2)).norm() < 1e-12);

    // rate invariance under the aligned equivalence
    MaxMinSolverConfig cfg;
    for (int t = 0; t < 3; ++t) {
        auto w = perturb_enhance(square_augment(whiten(random_instance(rng, 2, 2, 2))),
                                 0.05);
        auto al = to_aligned(w);
        CHECK(df_rate(w, cfg).bits ==
              Catch::Approx(df_rate(to_channel(al), cfg).bits).margin(2e-4));
    }

    auto sing = scalar_instance(0, 1, 1);
    CHECK_THROWS_AS(to_aligned(sing), GainNotInvertible);
}

TEST_CASE("classify") {
    AlignedInstance a;
    a.H_RD = identity(2);
    a.P_S = a.P_R = 1.0;
    a.Z_D = identity(2);

    a.Z_R = 0.5 * identity(2);
    CHECK(classify(a) == DegradednessClass::Degraded);
    a.Z_R = 2.0 * identity(2);
    CHECK(classify(a) == DegradednessClass::ReverselyDegraded);
    a.Z_R = (Mat(2, 2) << 0.5, 0, 0, 2.0).finished();
    CHECK(classify(a) == DegradednessClass::General);
    a.Z_R = identity(2);  // tie -> Degraded
    CHECK(classify(a) == DegradednessClass::Degraded);
}
