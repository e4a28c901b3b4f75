#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include <parion/train.hpp>

using namespace parion;
using train::train_spec;

TEST_CASE("train parameter validation")
{
    CHECK_THROWS_AS(train::simplified_train({1.0, 0.0, 1.0, 10}), domain_error);
    CHECK_THROWS_AS(train::simplified_train({1.0, 0.06, 1.0, 10}), domain_error);
    CHECK_THROWS_AS(train::simplified_train({1.0, 0.01, 0.5, 10}), domain_error);
    CHECK_THROWS_AS(train::simplified_train({1.0, 0.01, 1.0, 0}), domain_error);
    CHECK_THROWS_AS(train::full_train_survival({1.0, 0.01, 2.0, 600}), domain_error);
}

TEST_CASE("k_m coefficients")
{
    CHECK(train::k_coefficient(0.0) == Catch::Approx(2.0).epsilon(1e-14));
    for (double m : {0.5, 1.0, 1.5, 2.0, 3.5, 7.0})
        CHECK(train::k_coefficient(m) == Catch::Approx(std::sqrt(pi) * std::tgamma(m + 1) / std::tgamma(m + 1.5)).epsilon(1e-13));
    // Beta-function form: k_m = int_0^1 (1-x)^m x^{-1/2} dx
    auto q = quad::gk15([](double u) { return 2.0 * std::pow(1.0 - u * u, 2.5); }, 0.0, 1.0, 1e-14);
    CHECK(train::k_coefficient(2.5) == Catch::Approx(q.value).epsilon(1e-12));
}

TEST_CASE("rho and gamma")
{
    auto [rho, gamma] = train::rho_gamma(1.0, 1e-3);
    CHECK(rho.real() == Catch::Approx(1e-3 * (1 + 4 * std::sqrt(1e-3) / (3 * std::sqrt(2 * pi)))));
    CHECK(gamma == Catch::Approx(8e-3 * std::sqrt(1e-3) / (3 * std::sqrt(2 * pi))));
    // |1 + 2i rho|^2 = exp(-2 gamma) up to O(tau^2)
    const double tau = 1e-4;
    std::tie(rho, gamma) = train::rho_gamma(0.8, tau);
    CHECK(std::abs(std::norm(1.0 + 2.0 * I * rho) - std::exp(-2 * gamma)) < 5 * tau * tau);
    CHECK(train::rho_gamma(0.0, 0.01).second == 0.0);
}

TEST_CASE("simplified train is geometric")
{
    auto d = train::simplified_train({0.7, 0.01, 1.5, 50});
    REQUIRE(d.J.size() == 50);
    for (int n = 0; n < 50; ++n)
        CHECK(std::abs(d.J[n] - d.rho * std::pow(1.0 + 2.0 * I * d.rho, n)) < 1e-14);
    // it solves J_n = rho (1 + 2i sum_{k<n} J_k)
    cplx sum = 0.0;
    for (int n = 0; n < 50; ++n) {
        CHECK(std::abs(d.J[n] - d.rho * (1.0 + 2.0 * I * sum)) < 1e-15);
        sum += d.J[n];
    }
    for (int n = 0; n < 50; ++n)
        CHECK(std::abs(d.theta[n] - std::pow(1.0 + 2.0 * I * d.rho, n + 1)) < 1e-13);
}

TEST_CASE("single pulse equals the rectangular closed form")
{
    for (double r : {-1.5, -0.5, 0.4, 1.0}) {
        for (double tau : {0.003, 0.02, 0.05}) {
            auto d = train::full_train_survival({r, tau, 1.0, 1}, tau / 32);
            const cplx exact = oracle::theta_partial_fractions(r, tau);
            CHECK(std::abs(d.theta[0] - exact) < 5e-6);
            CHECK(std::abs(d.J[0] - (exact - 1.0) / (2.0 * I)) < 5e-6);
        }
    }
}

TEST_CASE("moments add up to theta")
{
    auto d = train::full_train_survival({0.9, 0.01, 1.3, 40});
    auto th = train::theta_from_moments(d.J);
    for (std::size_t n = 0; n < th.size(); ++n)
        CHECK(std::abs(th[n] - d.theta[n]) < 1e-9);
}

TEST_CASE("full moments stay within O(tau^2) of the simplified ones")
{
    for (double tau : {1e-3, 5e-3, 0.02}) {
        train_spec s{1.0, tau, 1.0, 100};
        auto f = train::full_train_survival(s);
        auto g = train::simplified_train(s);
        auto m = train::recurrence_train(s);
        for (int n = 0; n < 100; ++n) {
            CHECK(std::abs(f.J[n] - g.J[n]) < 10 * tau * tau);
            CHECK(std::abs(f.J[n] - m.J[n]) < 10 * tau * tau);
        }
    }
}

TEST_CASE("exponential regime")
{
    train_spec s{1.0, 1e-3, 1.0, 100};
    auto f = train::full_train_survival(s);
    REQUIRE(f.validity_horizon > 100);
    for (int n = 0; n < 100; ++n)
        CHECK(std::norm(f.theta[n]) == Catch::Approx(std::exp(-2 * f.gamma * (n + 1))).epsilon(0.05));
    auto fit = train::fit_log_survival(f.theta, 0, 100);
    CHECK(fit.slope / (-2 * f.gamma) == Catch::Approx(1.0).epsilon(0.05));
    CHECK(train::phase_advance(f.theta, 0, 100) == Catch::Approx(2 * s.r * s.tau).epsilon(0.05));
}

TEST_CASE("decay rate barely depends on the period")
{
    auto a = train::full_train_survival({1.0, 1e-3, 1.0, 100});
    auto b = train::full_train_survival({1.0, 1e-3, 2.0, 100});
    auto fa = train::fit_log_survival(a.theta, 0, 100);
    auto fb = train::fit_log_survival(b.theta, 0, 100);
    // the residual dependence is the O(tau^2) memory of earlier pulses
    CHECK(std::abs(fa.slope - fb.slope) < 0.02 * std::abs(fa.slope));
    CHECK(std::abs(fa.slope - fb.slope) < 1e-3 * 1e-3);
}

TEST_CASE("validity horizon")
{
    CHECK(train::validity_horizon({0.0, 0.01, 1.0, 77}) == 77);
    for (double tau : {1e-3, 0.0016, 0.01, 0.05}) {
        train_spec s{1.0, tau, 1.0, 1};
        const long n = train::validity_horizon(s);
        const double g = train::rho_gamma(1.0, tau).second;
        REQUIRE(n >= 1);
        CHECK(std::exp(-n * g) >= 50 * n * tau * tau);
        CHECK(std::exp(-(n + 1) * g) < 50 * (n + 1) * tau * tau);
    }
    // shorter pulses allow longer trains
    CHECK(train::validity_horizon({1.0, 1e-3, 1.0, 1}) > train::validity_horizon({1.0, 1e-2, 1.0, 1}));
    // the sqrt(tau) bound for decay down to mu = 0.01 at r = 1
    const double mu = 0.01;
    CHECK(2 * std::sqrt(mu) / std::log(1 / mu) == Catch::Approx(0.0434).epsilon(1e-3));
    CHECK(train::validity_horizon({1.0, 0.0016, 1.0, 1}) == 5406);
}

TEST_CASE("beyond the horizon the exponential law breaks down")
{
    train_spec s{1.0, 0.05, 1.0, 60};
    auto f = train::full_train_survival(s);
    REQUIRE(f.validity_horizon < 10);
    for (long n = 0; n < f.validity_horizon; ++n)
        CHECK(std::norm(f.theta[n]) == Catch::Approx(std::exp(-2 * f.gamma * (n + 1))).epsilon(0.05));
    const double last = std::norm(f.theta[59]), law = std::exp(-2 * f.gamma * 60);
    CHECK(last > 1.1 * law);
    // the memory of earlier pulses slows the decay further
    auto m = train::recurrence_train(s);
    auto g = train::simplified_train(s);
    CHECK(std::norm(m.theta[59]) > std::norm(g.theta[59]));
}
