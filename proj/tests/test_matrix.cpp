// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <relaycap/matrix.hpp>
#include <relaycap/solver.hpp>

using namespace relaycap;

namespace {
Mat random_herm(Rng& rng, int n) { return herm(rng.cgaussian(n, n)); }
Mat random_pd(Rng& rng, int n) {
    Mat g = rng.cgaussian(n, n);
    return herm(g * g.adjoint() + 0.1 * identity(n));
}
}  // namespace

TEST_CASE("logdet_pd basics") {
    CHECK(logdet_pd(identity(2)) == Catch::Approx(0.0).margin(1e-14));
    CHECK(logdet_pd(2.0 * identity(2)) == Catch::Approx(2.0 * std::log(2.0)));

    Rng rng(42);
    for (int t = 0; t < 20; ++t) {
        Mat m = random_pd(rng, 4);
        auto es = eig_herm(m);
        double expect = es.eigenvalues().array().log().sum();
        CHECK(logdet_pd(m) == Catch::Approx(expect).epsilon(1e-10));
    }

    Mat neg = -identity(2);
    CHECK_THROWS_AS(logdet_pd(neg), NotPositiveDefinite);
}

TEST_CASE("logdet_pd is additive on commuting PD polynomials") {
    Rng rng(7);
    for (int t = 0; t < 10; ++t) {
        Mat m = random_pd(rng, 3);
        Mat a = herm(m * m + identity(3));
        Mat b = herm(2.0 * m + 3.0 * identity(3));
        CHECK(logdet_pd(herm(a * b)) ==
              Catch::Approx(logdet_pd(a) + logdet_pd(b)).margin(1e-9));
    }
}

TEST_CASE("loewner_leq") {
    CHECK(loewner_leq(identity(2), 2.0 * identity(2)));
    Mat a(2, 2), b(2, 2);
    a << 1, 0, 0, 3;
    b << 2, 0, 0, 2;
    CHECK_FALSE(loewner_leq(a, b));
    CHECK_FALSE(loewner_leq(b, a));

    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        Mat x = random_herm(rng, 3);
        Mat g = rng.cgaussian(3, 2);
        CHECK(loewner_leq(x, x + g * g.adjoint()));
        CHECK(loewner_leq(x, x));  // reflexive
    }
    CHECK_THROWS_AS(loewner_leq(identity(2), identity(3)), DimensionMismatch);
}

TEST_CASE("loewner order transitivity on Gram chains") {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
        Mat a = random_herm(rng, 3);
        Mat g1 = rng.cgaussian(3, 3), g2 = rng.cgaussian(3, 3);
        Mat b = a + g1 * g1.adjoint();
        Mat c = b + g2 * g2.adjoint();
        REQUIRE(loewner_leq(a, b));
        REQUIRE(loewner_leq(b, c));
        CHECK(loewner_leq(a, c));
    }
}

TEST_CASE("project_psd_trace") {
    Mat m(2, 2);
    m << 2, 0, 0, -1;
    Mat p = project_psd_trace(m, 10.0);
    CHECK((p - (Mat(2, 2) << 2, 0, 0, 0).finished()).norm() < 1e-12);

    m << 3, 0, 0, 1;
    p = project_psd_trace(m, 2.0);
    CHECK((p - (Mat(2, 2) << 2, 0, 0, 0).finished()).norm() < 1e-9);

    // fixed point on feasible input
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
        Mat g = rng.cgaussian(3, 3);
        Mat x = herm(g * g.adjoint());
        x *= 0.9 / x.trace().real();
        CHECK((project_psd_trace(x, 1.0) - x).norm() < 1e-11);
    }
}

TEST_CASE("project_psd_trace output always feasible") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Mat x = 3.0 * random_herm(rng, 4);
        double P = 0.5 + 2.0 * rng.uniform();
        Mat p = project_psd_trace(x, P);
        CHECK(p.trace().real() <= P + 1e-12);
        CHECK(min_eig(p) >= -1e-12);
    }
}

TEST_CASE("inv_sqrt") {
    Mat z(1, 1);
    z << 4.0;
    CHECK(std::abs(inv_sqrt(z)(0, 0) - Cplx(0.5, 0)) < 1e-14);
    CHECK((inv_sqrt(identity(3)) - identity(3)).norm() < 1e-14);

    Rng rng(13);
    for (int t = 0; t < 20; ++t) {
        Mat zz = random_pd(rng, 4);
        Mat T = inv_sqrt(zz);
        CHECK((T * zz * T.adjoint() - identity(4)).norm() < 1e-10);
        // reconstruction property
        Mat Tinv = T.inverse();
        CHECK((Tinv * Tinv.adjoint() - zz).norm() / zz.norm() < 1e-9);
    }
    CHECK_THROWS_AS(inv_sqrt(Mat::Zero(2, 2)), NotPositiveDefinite);
}

TEST_CASE("svd") {
    auto z = svd(Mat::Zero(3, 2));
    CHECK(z.sigma.maxCoeff() == 0.0);

    Mat d(2, 2);
    d << 3, 0, 0, 1;
    auto r = svd(d);
    CHECK(r.sigma[0] == Catch::Approx(3.0));
    CHECK(r.sigma[1] == Catch::Approx(1.0));

    Rng rng(17);
    for (int t = 0; t < 20; ++t) {
        Mat m = rng.cgaussian(4, 3);
        auto s = svd(m);
        Mat rec = s.u.leftCols(3) * s.sigma.asDiagonal().toDenseMatrix().cast<Cplx>() *
                  s.v.adjoint();
        CHECK((rec - m).norm() < 1e-10);
        CHECK((s.u.adjoint() * s.u - identity(4)).norm() < 1e-10);
        CHECK((s.v.adjoint() * s.v - identity(3)).norm() < 1e-10);
        for (int i = 1; i < s.sigma.size(); ++i) CHECK(s.sigma[i] <= s.sigma[i - 1]);
    }
}

TEST_CASE("pinv satisfies the Penrose identities") {
    CHECK((pinv(identity(3)) - identity(3)).norm() < 1e-12);
    Mat d(2, 2);
    d << 2, 0, 0, 0;
    CHECK((pinv(d) - (Mat(2, 2) << 0.5, 0, 0, 0).finished()).norm() < 1e-12);

    Rng rng(19);
    for (int t = 0; t < 20; ++t) {
        Mat a = rng.cgaussian(4, 2);
        Mat m = a * rng.cgaussian(2, 3);  // rank <= 2
        Mat p = pinv(m);
        CHECK((m * p * m - m).norm() < 1e-9);
        CHECK((p * m * p - p).norm() < 1e-9);
        CHECK(((m * p).adjoint() - m * p).norm() < 1e-9);
        CHECK(((p * m).adjoint() - p * m).norm() < 1e-9);
    }
}
