#pragma once

#include "error.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace parion {

/**
 * \brief The unperturbed 1D bound state.
 *
 * Internally everything runs in units hbar = 2m = 1 with p = 1 (so g = 2,
 * binding energy E0 = 1 and omega0 = 1). The physical fields only serve the
 * conversion helpers.
 */
struct atom1d {
    double hbar = 1.0;
    double mass = 0.5;
    double g = 2.0;

    double p() const { return mass * g / (hbar * hbar); }
    double binding_energy() const { return hbar * hbar * p() * p() / (2 * mass); }
    double omega0() const { return binding_energy() / hbar; }

    double to_dimensionless_time(double t) const { return omega0() * t; }
    double to_dimensionless_momentum(double k) const { return k / p(); }
    double relative_amplitude(double R) const { return R / g; }

    static atom1d dimensionless() { return {}; }
};

enum class amplitude_path { closed_form, volterra, laplace_inversion, asymptotic };

inline const char *to_string(amplitude_path p)
{
    switch (p) {
    case amplitude_path::closed_form: return "closed_form";
    case amplitude_path::volterra: return "volterra";
    case amplitude_path::laplace_inversion: return "laplace_inversion";
    case amplitude_path::asymptotic: return "asymptotic";
    }
    return "?";
}

/** \brief theta(t) on a time grid and Theta(k) on a momentum grid at the final time. */
struct amplitude_record {
    std::vector<double> times;
    std::vector<cplx> theta;
    std::vector<double> momenta;
    std::vector<cplx> Theta;
    amplitude_path path = amplitude_path::closed_form;
};

namespace model1d {

namespace detail {

inline const cplx e_mipi4 = std::polar(1.0, -pi / 4);

// int_0^inf e^{-t v^2} g(v) dv with the scale of the Gaussian folded into the map
template <class G>
cplx contour_integral(G &&g, double t, double tol)
{
    const double scale = 1.0 / std::sqrt(1.0 + t);
    auto res = quad::gk15_semi_infinite(g, 0.0, scale, tol, 1e-13, 20000);
    if (!res.converged)
        throw numerical_failure("contour quadrature did not converge");
    return res.value;
}

inline double pole_weight(double r)
{
    if (r <= -1.0)
        return 0.0;
    return 2.0 * (r + 1.0 + std::abs(r + 1.0)) / ((r + 2.0) * (r + 2.0));
}

// (e^{i x tau} - 1)/(i x)
inline cplx phase_integral(double x, double tau)
{
    const double z = x * tau;
    if (std::abs(z) < 1e-4)
        return tau * (1.0 + I * z / 2.0 - z * z / 6.0 - I * z * z * z / 24.0);
    return (std::exp(I * z) - 1.0) / (I * x);
}

} // namespace detail

/** \brief Pole of the Laplace transform, s* = i r (r+2), present for r > -1. */
inline bool has_pole(double r) { return r > -1.0; }

/**
 * \brief Survival amplitude after a rectangular pulse of amplitude r and duration t.
 *
 * The u-integral is evaluated on the rotated contour u = e^{-i pi/4} v, where
 * the oscillating exponential becomes a Gaussian, for every t.
 */
inline cplx theta_rect(double r, double t, double tol = 1e-14)
{
    if (!(t >= 0.0))
        throw domain_error("theta_rect: requires t >= 0");
    if (r == 0.0)
        return 1.0;
    const double c = (r + 1) * (r + 1);
    auto g = [&](double v) {
        const cplx u2 = -I * v * v;
        return std::exp(-t * v * v) * u2 / ((1.0 + u2) * (1.0 + u2) * (c + u2));
    };
    const cplx integral = detail::contour_integral(g, t, tol);
    cplx th = 4 * r * r / pi * std::exp(-I * t) * detail::e_mipi4 * integral;
    if (has_pole(r))
        th += detail::pole_weight(r) * std::exp(I * r * (r + 2) * t);
    return th;
}

/** \brief Y(t) = theta'(t)/(2i) during the pulse, t >= 0. */
inline cplx y_rect(double r, double t, double tol = 1e-14)
{
    if (!(t >= 0.0))
        throw domain_error("y_rect: requires t >= 0");
    if (r == 0.0)
        return 0.0;
    const double c = (r + 1) * (r + 1);
    auto g = [&](double v) {
        const cplx u2 = -I * v * v;
        return std::exp(-t * v * v) * u2 / ((1.0 + u2) * (c + u2));
    };
    const cplx integral = detail::contour_integral(g, t, tol);
    cplx y = -2 * r * r / pi * std::exp(-I * t) * detail::e_mipi4 * integral;
    if (has_pole(r))
        y += detail::pole_weight(r) * 0.5 * r * (r + 2) * std::exp(I * r * (r + 2) * t);
    return y;
}

/** \brief |theta(inf)|^2 for a pulse of infinite duration. */
inline double survival_inf(double r)
{
    if (r < -1.0)
        return 0.0;
    const double d = (r + 2) * (r + 2);
    return 16 * (r + 1) * (r + 1) / (d * d);
}

/** \brief Earliest time at which theta_asymptotic is accepted. */
inline double t_switch_default() { return 50.0; }

/**
 * \brief Leading large-t form of theta(t).
 *
 * For r = -1 this is 2 e^{-it}/sqrt(i pi t). Otherwise it is the pole term plus
 * r^2 e^{-it} / ((r+1)^2 sqrt(pi) (it)^{3/2}).
 */
inline cplx theta_asymptotic(double r, double t, double t_switch = t_switch_default())
{
    if (t < t_switch)
        throw domain_error("theta_asymptotic: t below the switch time");
    if (r == -1.0)
        return 2.0 * std::exp(-I * t) / std::sqrt(I * pi * t);
    const double c = (r + 1) * (r + 1);
    if (t * c <= 10.0)
        throw domain_error("theta_asymptotic: t (r+1)^2 too small");
    cplx th = r * r * std::exp(-I * t) / (c * std::sqrt(pi) * std::pow(I * t, 1.5));
    if (has_pole(r))
        th += detail::pole_weight(r) * std::exp(I * r * (r + 2) * t);
    return th;
}

namespace detail {

// phi(x) = x/(k^2+x) (e^{i k^2 tau} J(sqrt x) - pi/(2 sqrt x)),
// J(a) = pi/(2a) e^{i a^2 tau} erfc(a e^{i pi/4} sqrt tau); analytic in x near 1.
inline cplx spectrum_phi(cplx x, double k2, double tau)
{
    const cplx a = std::sqrt(x);
    const cplx w = specfun::faddeeva(I * a * std::polar(std::sqrt(tau), pi / 4));
    return x / (k2 + x) * (std::exp(I * k2 * tau) * w - 1.0) * (pi / (2.0 * a));
}

// (phi(c) - phi(1))/(c - 1), by a contour integral when c is close to 1.
inline cplx spectrum_bracket(double c, double k2, double tau)
{
    if (std::abs(c - 1.0) > 0.05)
        return (spectrum_phi(c, k2, tau) - spectrum_phi(1.0, k2, tau)) / (c - 1.0);
    const double m = 0.5 * (1.0 + c), R = 0.3;
    constexpr int n = 48;
    cplx s = 0.0;
    for (int j = 0; j < n; ++j) {
        const cplx e = std::polar(1.0, 2 * pi * (j + 0.5) / n);
        const cplx z = m + R * e;
        s += spectrum_phi(z, k2, tau) * R * e / ((z - 1.0) * (z - c));
    }
    return s / double(n);
}

} // namespace detail

/**
 * \brief Momentum amplitude Theta(k, t) for t >= tau after a rectangular pulse.
 *
 * Closed form of sqrt(2/pi) |k|/(1-i|k|) int_0^tau Y(t) e^{i(1+k^2)t} dt with the
 * rectangular-pulse Y; r = -1 and r = -2 are regular points.
 */
inline cplx spectrum_rect(double k, double r, double tau, const atom1d &atom = atom1d::dimensionless())
{
    (void)atom;
    if (!(tau >= 0.0))
        throw domain_error("spectrum_rect: requires tau >= 0");
    k = std::abs(k);
    if (tau == 0.0 || r == 0.0 || k == 0.0)
        return 0.0;
    const double k2 = k * k;
    const double c = (r + 1) * (r + 1);
    const double kappa = k2 / ((1 + k2) * (c + k2));
    const cplx erfarg = detail::e_mipi4 * (k * std::sqrt(tau));
    const cplx L = pi / (2 * k) * specfun::cerf(erfarg);
    // bracket = e^{ik^2 tau}(alpha J(1) + beta J(|q|)) - (pi/2)(alpha + beta/|q|)
    cplx bracket;
    if (c == 0.0)
        bracket = -detail::spectrum_phi(1.0, k2, tau) / (c - 1.0);
    else
        bracket = detail::spectrum_bracket(c, k2, tau);
    cplx S = -(2 * r * r / pi) * (bracket / I + kappa * L);
    if (has_pole(r)) {
        const double B = 2 * r * (r + 1) / (r + 2);
        S += B * detail::phase_integral(k2 + c, tau);
    }
    return std::sqrt(2 / pi) * k / (1.0 - I * k) * S;
}

/** \brief P(t) = 1 - |theta(t)|^2. */
inline double ionization_prob(double r, double t) { return 1.0 - std::norm(theta_rect(r, t)); }

struct spectral_settings {
    double k_max = 50.0;
    double tolerance = 1e-9;
};

namespace detail {

// Coefficient C of the averaged large-k tail 2|Theta|^2 ~ 2 C / k^4 (both signs of k).
inline double tail_coefficient(double r, double tau)
{
    return 2.0 / pi * (std::norm(y_rect(r, tau)) + r * r);
}

// int_0^kmax f(k) dk on panels short enough to follow the k^2 tau oscillation
template <class F>
double momentum_integral(F &&f, double tau, const spectral_settings &s)
{
    double sum = 0.0, k = 0.0;
    while (k < s.k_max) {
        double w = std::min(0.5, 1.5 / (tau * (k + 1e-3) + 1e-300));
        w = std::max(w, 1e-3);
        const double b = std::min(k + w, s.k_max);
        auto res = quad::gk15(f, k, b, s.tolerance * w / s.k_max, 1e-11, 200);
        if (!res.converged)
            throw numerical_failure("momentum quadrature did not converge");
        sum += res.value;
        k = b;
    }
    return sum;
}

} // namespace detail

/** \brief int |Theta(k,tau)|^2 dk over the full line, with the k^{-4} tail in closed form. */
inline double ionization_prob_spectral(double r, double tau, const spectral_settings &s = {})
{
    if (tau == 0.0 || r == 0.0)
        return 0.0;
    auto f = [&](double k) { return 2.0 * std::norm(spectrum_rect(k, r, tau)); };
    const double body = detail::momentum_integral(f, tau, s);
    const double K = s.k_max;
    return body + 2.0 * detail::tail_coefficient(r, tau) / (3 * K * K * K);
}

struct ionization_check_result {
    double direct;
    double spectral;
    double discrepancy;
};

/** \brief Both evaluation paths of P; throws data_quality_error when they disagree. */
inline ionization_check_result ionization_prob_checked(double r, double t, double tolerance = 1e-3,
                                                       const spectral_settings &s = {})
{
    ionization_check_result res{ionization_prob(r, t), ionization_prob_spectral(r, t, s), 0.0};
    res.discrepancy = std::abs(res.direct - res.spectral);
    if (res.discrepancy > tolerance)
        throw data_quality_error("ionization probability: spectral and direct paths differ by " +
                                 std::to_string(res.discrepancy));
    return res;
}

/**
 * \brief Kinetic energy of the ejected electrons, in units of E0, for t >= tau.
 *
 * Quadrature of k^2 |Theta|^2 up to k_max plus the closed-form k^{-2} tail.
 */
inline double ejected_energy(double r, double tau, const spectral_settings &s = {})
{
    if (tau == 0.0 || r == 0.0)
        return 0.0;
    if (!(s.k_max >= 5.0))
        throw numerical_failure("ejected_energy: k_max too small for the asymptotic tail");
    auto f = [&](double k) { return 2.0 * k * k * std::norm(spectrum_rect(k, r, tau)); };
    const double body = detail::momentum_integral(f, tau, s);
    const double K = s.k_max;
    const double C = detail::tail_coefficient(r, tau);
    return body + 2.0 * C * (1.0 / K - 1.0 / (K * K * K));
}

/**
 * \brief The same energy from energy conservation during and after the pulse:
 * E = |theta|^2 - 1 - 2r + 2|Y(tau)|^2 / r.
 */
inline double ejected_energy_conservation(double r, double tau)
{
    if (r == 0.0 || tau == 0.0)
        return 0.0;
    return std::norm(theta_rect(r, tau)) - 1.0 - 2.0 * r + 2.0 * std::norm(y_rect(r, tau)) / r;
}

/** \brief Long-pulse limit of the ejected energy, in units of E0. */
inline double ejected_energy_inf(double r)
{
    const double a = std::abs(r + 1);
    const double f = r / (a + 1);
    const double bound = r > -1.0 ? 2 * (r + 1 + a) * (r + 1) * (r + 3) / ((r + 2) * (r + 2)) : 0.0;
    return f * f * (1 + 2 * a + bound);
}

struct short_pulse_result {
    double a;
    double exact;
    double small_a;
    double large_a;
};

/** \brief Short-pulse ionization: exact value plus both limiting branches, a = r sqrt(t). */
inline short_pulse_result short_pulse_prob(double r, double t)
{
    if (!(t > 0.0) || t > 0.05)
        throw domain_error("short_pulse_prob: requires 0 < t <= 0.05");
    const double a = r * std::sqrt(t);
    const double base = 4 * std::sqrt(2 * t / pi);
    return {a, ionization_prob(r, t), base * 2 * a * a / 3, base};
}

} // namespace model1d
} // namespace parion
