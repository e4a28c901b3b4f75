#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include <parion/specfun.hpp>

using namespace parion;
using namespace parion::specfun;
using Catch::Approx;

static double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

TEST_CASE("cerfc at the origin and reflection")
{
    CHECK(std::abs(cerfc(0.0) - 1.0) < 1e-15);
    for (cplx z : {cplx(0.3, 0.2), cplx(1, 1), cplx(-2, 0.5), cplx(0.1, -3), cplx(4, -4)}) {
        CHECK(std::abs(cerfc(-z) - (2.0 - cerfc(z))) < 1e-12 * std::max(1.0, std::abs(cerfc(z))));
        CHECK(std::abs(cerfc(std::conj(z)) - std::conj(cerfc(z))) <
              1e-13 * std::max(1.0, std::abs(cerfc(z))));
    }
}

TEST_CASE("cerfc against series, continued fraction and quadrature")
{
    CHECK(rel(cerfc(cplx(1, 1)), oracle::erfc_series(cplx(1, 1))) < 1e-12);
    CHECK(rel(cerfc(cplx(1, 1)), oracle::erfc_quadrature(cplx(1, 1))) < 1e-12);
    for (cplx z : {cplx(0.1, 0.05), cplx(0.5, -1.5), cplx(-1.2, 0.7), cplx(2, 2), cplx(0, 2.5),
                   cplx(-2.5, -0.3)})
        CHECK(rel(cerfc(z), oracle::erfc_series(z)) < 1e-12);
    for (cplx z : {cplx(3, 0.5), cplx(2, 6), cplx(5, -4), cplx(8, 8), cplx(2.5, -9)})
        CHECK(rel(cerfc(z), oracle::erfc_cf(z)) < 1e-12);
    for (cplx z : {cplx(1.5, 2), cplx(3.5, 0.1), cplx(3, -1)})
        CHECK(rel(cerfc(z), oracle::erfc_quadrature(z)) < 1e-11);
}

TEST_CASE("cerfc signals overflow")
{
    CHECK_THROWS_AS(cerfc(cplx(0.0, 40.0)), parion::domain_error);
    CHECK_THROWS_AS(cerfc(cplx(1e9, 0.0)), parion::domain_error);
    CHECK(std::abs(cerfc(cplx(30.0, 0.0))) < 1e-300);
}

TEST_CASE("Fresnel integrals")
{
    auto f0 = fresnel(0.0);
    CHECK(f0.C == 0.0);
    CHECK(f0.S == 0.0);
    for (double x : {0.5, 1.0, 2.0, 5.0}) {
        auto c = [](double t) { return std::cos(0.5 * pi * t * t); };
        auto s = [](double t) { return std::sin(0.5 * pi * t * t); };
        const double Cq = quad::gk15(c, 0.0, x, 1e-15, 1e-14).value;
        const double Sq = quad::gk15(s, 0.0, x, 1e-15, 1e-14).value;
        auto f = fresnel(x);
        CHECK(std::abs(f.C - Cq) < 1e-12);
        CHECK(std::abs(f.S - Sq) < 1e-12);
        CHECK(fresnel(-x).C == -f.C);
    }
    auto f = fresnel(50.0);
    CHECK(std::abs(f.C - 0.5) < 1.0 / 50);
    CHECK(std::abs(f.S - 0.5) < 1.0 / 50);
    // C(50) - 1/2 ~ sin(pi x^2/2)/(pi x): the leading asymptotic term
    CHECK(std::abs(f.C - 0.5 - std::sin(0.5 * pi * 2500) / (50 * pi)) < 1e-5);
}

TEST_CASE("kernel_M closed form against both integral representations")
{
    double worst = 0.0;
    for (double s = 0.01; s <= 50.0; s *= 1.17) {
        const cplx m = kernel_M(s);
        worst = std::max(worst, std::abs(m - oracle::kernel_M_first(s)));
        worst = std::max(worst, std::abs(m - oracle::kernel_M_second(s)));
    }
    CHECK(worst < 1e-8);
    CHECK(std::abs(kernel_M(1.0) - oracle::kernel_M_real_axis(1.0)) < 1e-8);
    CHECK(std::abs(kernel_M(7.3) - oracle::kernel_M_real_axis(7.3)) < 1e-8);
    CHECK_THROWS_AS(kernel_M(0.0), parion::domain_error);
    CHECK_THROWS_AS(kernel_M(-1.0), parion::domain_error);
}

TEST_CASE("kernel_M limiting forms")
{
    // small s: (1+i)/sqrt(2 pi s) - i + O(s^{1/2})
    for (double s : {1e-3, 1e-2}) {
        const cplx lead = cplx(1, 1) / std::sqrt(2 * pi * s) - I;
        CHECK(std::abs(kernel_M(s) - lead) < 2.0 * std::sqrt(s));
    }
    const cplx m = kernel_M(0.01);
    CHECK(std::abs(m - cplx(3.989, 2.989)) < 0.1);
    // large s: (1-i)/sqrt(8 pi s^3) e^{-is} + O(s^{-5/2})
    for (double s : {100.0, 1e3}) {
        const cplx lead = cplx(1, -1) / std::sqrt(8 * pi * s * s * s) * std::exp(-I * s);
        CHECK(std::abs(kernel_M(s) - lead) < std::pow(s, -2.5));
        CHECK(std::abs(kernel_M(s)) <= std::abs(cplx(1, -1) / std::sqrt(8 * pi * s * s * s)) * 1.01);
    }
    // the two branches of the evaluation meet smoothly at s = 200
    CHECK(rel(kernel_M(199.99), oracle::kernel_M_second(199.99)) < 1e-9);
    CHECK(rel(kernel_M(200.0), oracle::kernel_M_second(200.0)) < 1e-9);
}

TEST_CASE("kernel_M moments are antiderivatives")
{
    for (double S : {1e-4, 0.05, 0.7, 3.0, 20.0}) {
        auto [m0, m1] = kernel_M_moments(S);
        // split off the integrable singularity: M(s) - (1+i)/sqrt(2 pi s)
        auto g0 = [](double s) { return kernel_M(s) - cplx(1, 1) / std::sqrt(2 * pi * s); };
        auto g1 = [](double s) { return s * kernel_M(s); };
        const cplx q0 = quad::gk15(g0, 0.0, S, 1e-14, 1e-12).value +
                        cplx(1, 1) * 2.0 * std::sqrt(S) / std::sqrt(2 * pi);
        const cplx q1 = quad::gk15(g1, 0.0, S, 1e-14, 1e-12).value;
        CHECK(std::abs(m0 - q0) < 1e-10 * std::max(1.0, std::abs(q0)));
        CHECK(std::abs(m1 - q1) < 1e-10 * std::max(1.0, std::abs(q1)));
    }
}

TEST_CASE("half-integer Bessel closed forms")
{
    for (double x : {1e-3, 0.3, 1.0, 7.5, 25.0, 60.0}) {
        CHECK(bessel_half(bessel_kind::I, 0, x) == Approx(std::sqrt(2 / (pi * x)) * std::sinh(x)).epsilon(1e-14));
        CHECK(bessel_half(bessel_kind::K, 0, x) == Approx(std::sqrt(pi / (2 * x)) * std::exp(-x)).epsilon(1e-14));
        CHECK(bessel_half(bessel_kind::J, 0, x) == Approx(std::sqrt(2 / (pi * x)) * std::sin(x)).epsilon(1e-13));
        CHECK(bessel_half(bessel_kind::N, 0, x) == Approx(-std::sqrt(2 / (pi * x)) * std::cos(x)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(bessel_half(bessel_kind::K, 0, 0.0), parion::domain_error);
    CHECK_THROWS_AS(bessel_half(bessel_kind::N, 1, -1.0), parion::domain_error);
    CHECK_THROWS_AS(bessel_half(bessel_kind::J, 11, 1.0), parion::domain_error);
}

TEST_CASE("Bessel recurrences")
{
    // Z_{nu-1} + Z_{nu+1} = (2 nu / x) Z_nu for J, N; I_{nu-1} - I_{nu+1} = (2nu/x) I_nu;
    // K_{nu+1} - K_{nu-1} = (2nu/x) K_nu
    for (double x : {0.05, 0.8, 3.0, 9.0, 14.0, 45.0}) {
        for (int l = 1; l <= 9; ++l) {
            const double nu = l + 0.5;
            auto B = [&](bessel_kind k, int n) { return bessel_half(k, n, x); };
            for (auto k : {bessel_kind::J, bessel_kind::N}) {
                const double lhs = B(k, l - 1) + B(k, l + 1), rhs = 2 * nu / x * B(k, l);
                CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({std::abs(rhs), std::abs(B(k, l - 1)), std::abs(B(k, l + 1))}));
            }
            const double li = B(bessel_kind::I, l - 1) - B(bessel_kind::I, l + 1);
            CHECK(li == Approx(2 * nu / x * B(bessel_kind::I, l)).epsilon(1e-10));
            const double lk = B(bessel_kind::K, l + 1) - B(bessel_kind::K, l - 1);
            CHECK(lk == Approx(2 * nu / x * B(bessel_kind::K, l)).epsilon(1e-10));
        }
    }
}

TEST_CASE("Wronskian identities")
{
    for (double x = 1e-3; x <= 20.0; x += 0.0997) {
        const double prod = bessel_half(bessel_kind::I, 0, x) * bessel_half(bessel_kind::K, 0, x);
        CHECK(std::abs(prod - (-std::expm1(-2 * x)) / (2 * x)) < 1e-12);
    }
    // J_nu N_{nu+1} - J_{nu+1} N_nu = -2/(pi x)
    for (double x : {0.3, 2.0, 11.0})
        for (int l = 0; l < 10; ++l) {
            const double w = bessel_half(bessel_kind::J, l, x) * bessel_half(bessel_kind::N, l + 1, x) -
                             bessel_half(bessel_kind::J, l + 1, x) * bessel_half(bessel_kind::N, l, x);
            CHECK(w == Approx(-2 / (pi * x)).epsilon(1e-10));
        }
    // I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
    for (double x : {0.2, 5.0, 29.9, 30.1, 80.0})
        for (int l = 0; l < 10; ++l) {
            const double w = bessel_half(bessel_kind::I, l, x) * bessel_half(bessel_kind::K, l + 1, x) +
                             bessel_half(bessel_kind::I, l + 1, x) * bessel_half(bessel_kind::K, l, x);
            CHECK(w == Approx(1 / x).epsilon(1e-10));
        }
}
