#pragma once

#include "error.hpp"
#include "specfun.hpp"
#include "volterra.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace parion::train {

/** \brief n pulses of width tau and amplitude r, repeated with period sigma. */
struct train_spec {
    double r = 1.0;
    double tau = 1e-3;
    double sigma = 1.0;
    int n_pulses = 1;

    void validate() const
    {
        if (!(tau > 0.0 && tau <= 0.05))
            throw domain_error("train: requires 0 < tau <= 0.05");
        if (!(sigma >= 1.0) || !(tau < sigma))
            throw domain_error("train: requires sigma >= 1 and tau < sigma");
        if (n_pulses < 1)
            throw domain_error("train: requires at least one pulse");
    }
};

struct diagnostics {
    cplx rho = 0.0;
    double gamma = 0.0;
    /** \brief Per-pulse moments J_n^0 (or their simplified counterparts). */
    std::vector<cplx> J;
    /** \brief theta(n sigma + tau). */
    std::vector<cplx> theta;
    long validity_horizon = 0;
};

/** \brief rho = r tau [1 + 4 r sqrt(tau)(1+i)/(3 sqrt(2 pi))], gamma = 8 r^2 tau^{3/2}/(3 sqrt(2 pi)). */
inline std::pair<cplx, double> rho_gamma(double r, double tau)
{
    const double c = 3.0 * std::sqrt(2.0 * pi);
    const cplx rho = r * tau * (1.0 + 4.0 * r * std::sqrt(tau) * cplx(1.0, 1.0) / c);
    const double gamma = 8.0 * r * r * std::pow(tau, 1.5) / c;
    return {rho, gamma};
}

/** \brief Gamma(x) for x a positive multiple of 1/2, from Gamma(1) and Gamma(1/2). */
inline double gamma_half_integer(double x)
{
    const double twice = 2.0 * x;
    if (!(x > 0.0) || std::abs(twice - std::round(twice)) > 1e-12)
        throw domain_error("gamma_half_integer: argument must be a positive multiple of 1/2");
    double g = std::lround(twice) % 2 == 0 ? 1.0 : std::sqrt(pi);
    for (double y = std::lround(twice) % 2 == 0 ? 1.0 : 0.5; y < x - 1e-12; y += 1.0)
        g *= y;
    return g;
}

/** \brief k_m = sqrt(pi) Gamma(m+1) / Gamma(m+3/2). */
inline double k_coefficient(double m) { return std::sqrt(pi) * gamma_half_integer(m + 1.0) / gamma_half_integer(m + 1.5); }

/**
 * \brief Largest n with e^{-n gamma} >= 50 n tau^2.
 *
 * The factor 50 stands for the "much greater" of the validity condition.
 */
inline long validity_horizon(const train_spec &s)
{
    const auto [rho, gamma] = rho_gamma(s.r, s.tau);
    (void)rho;
    if (gamma == 0.0)
        return s.n_pulses;
    const double c = 50.0 * s.tau * s.tau;
    auto f = [&](double n) { return -n * gamma - std::log(c * n); };
    if (f(1.0) < 0.0)
        return 0;
    double lo = 1.0, hi = 2.0;
    while (f(hi) >= 0.0)
        hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 0.5; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) >= 0.0 ? lo : hi) = mid;
    }
    long n = long(std::floor(hi));
    while (n > 1 && f(double(n)) < 0.0)
        --n;
    return n;
}

/** \brief theta_n from the moments: theta_n = 1 + 2i sum_{k<=n} J_k. */
inline std::vector<cplx> theta_from_moments(const std::vector<cplx> &J)
{
    std::vector<cplx> th;
    th.reserve(J.size());
    cplx acc = 0.0;
    for (auto j : J) {
        acc += j;
        th.push_back(1.0 + 2.0 * I * acc);
    }
    return th;
}

/** \brief Geometric solution J_n = rho (1 + 2i rho)^n of the simplified recurrence. */
inline diagnostics simplified_train(const train_spec &s)
{
    s.validate();
    diagnostics d;
    std::tie(d.rho, d.gamma) = rho_gamma(s.r, s.tau);
    d.validity_horizon = validity_horizon(s);
    cplx J = d.rho;
    const cplx q = 1.0 + 2.0 * I * d.rho;
    for (int n = 0; n < s.n_pulses; ++n) {
        d.J.push_back(J);
        J *= q;
    }
    d.theta = theta_from_moments(d.J);
    return d;
}

/**
 * \brief The m = 0 moment recurrence keeping the memory of earlier pulses,
 * J_n = r(tau + 2 k_0 r sqrt(i/pi) tau^{3/2}/3) [1 + sum_{k<n} (2i + M((n-k) sigma)) J_k],
 * with the O(tau^2) remainder dropped.
 */
inline diagnostics recurrence_train(const train_spec &s)
{
    s.validate();
    diagnostics d;
    std::tie(d.rho, d.gamma) = rho_gamma(s.r, s.tau);
    d.validity_horizon = validity_horizon(s);
    const cplx lead = s.r * (s.tau + 2.0 * k_coefficient(0.0) * s.r * std::sqrt(I / pi) * std::pow(s.tau, 1.5) / 3.0);
    std::vector<cplx> M(s.n_pulses + 1, 0.0);
    for (int n = 1; n <= s.n_pulses; ++n)
        M[n] = specfun::kernel_M(n * s.sigma);
    for (int n = 0; n < s.n_pulses; ++n) {
        cplx sum = 1.0;
        for (int k = 0; k < n; ++k)
            sum += (2.0 * I + M[n - k]) * d.J[k];
        d.J.push_back(lead * sum);
    }
    d.theta = theta_from_moments(d.J);
    return d;
}

/** \brief Exact theta_n and J_n^0 from the Volterra solution of the train program. */
inline diagnostics full_train_survival(const train_spec &s, double step = 0.0)
{
    s.validate();
    if (s.n_pulses * s.sigma > 1e3)
        throw domain_error("train: n_pulses * sigma must not exceed 1e3");
    diagnostics d;
    std::tie(d.rho, d.gamma) = rho_gamma(s.r, s.tau);
    d.validity_horizon = validity_horizon(s);
    volterra_options opt;
    opt.step = step > 0.0 ? step : s.tau / 8.0;
    volterra_solver<kernel_1d> solver(pulse_program::train(s.r, s.tau, s.sigma, s.n_pulses), kernel_1d{}, opt);
    for (int n = 0; n < s.n_pulses; ++n) {
        const double a = n * s.sigma, b = a + s.tau;
        const auto &y = solver.advance(b);
        // nodes of this pulse: the last len nodes up to b
        std::size_t hi = y.t.size() - 1;
        while (hi > 0 && y.t[hi] > b * (1 + 1e-14))
            --hi;
        std::size_t lo = hi;
        while (lo > 0 && y.t[lo] > a * (1 + 1e-14) + 1e-300)
            --lo;
        cplx J = 0.0;
        for (std::size_t j = lo; j < hi; ++j)
            if (y.active[j])
                J += 0.5 * (y.t[j + 1] - y.t[j]) * (y.y_right[j] + y.y_left[j + 1]);
        d.J.push_back(J);
        d.theta.push_back(y.theta_at(b));
    }
    return d;
}

struct decay_fit {
    double slope = 0.0;
    double slope_error = 0.0;
    double intercept = 0.0;
};

/** \brief Least-squares line through log |theta_n|^2 against n = 1..count, pulses [first, last). */
inline decay_fit fit_log_survival(const std::vector<cplx> &theta, std::size_t first, std::size_t last)
{
    last = std::min(last, theta.size());
    const std::size_t m = last - first;
    if (m < 3)
        throw domain_error("fit_log_survival: need at least three pulses");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = first; i < last; ++i) {
        const double x = double(i + 1), y = std::log(std::norm(theta[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = m * sxx - sx * sx;
    decay_fit f;
    f.slope = (m * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / m;
    double ss = 0;
    for (std::size_t i = first; i < last; ++i) {
        const double e = std::log(std::norm(theta[i])) - f.intercept - f.slope * double(i + 1);
        ss += e * e;
    }
    f.slope_error = std::sqrt(ss / double(m - 2) * double(m) / den);
    return f;
}

/** \brief Mean advance of arg theta_n per period over pulses [first, last). */
inline double phase_advance(const std::vector<cplx> &theta, std::size_t first, std::size_t last)
{
    last = std::min(last, theta.size());
    double total = 0.0;
    for (std::size_t i = first + 1; i < last; ++i)
        total += std::arg(theta[i] / theta[i - 1]);
    return total / double(last - first - 1);
}

} // namespace parion::train
