#pragma once

#include "error.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <utility>

namespace parion::specfun {

namespace detail {

// Sinc-sum approximation of w(z) for Im z >= 0 (Matta and Reichel).
// The node offset is chosen so that z never comes closer than h/4 to a node.
inline cplx faddeeva_upper(cplx z)
{
    constexpr double h = 0.5;
    constexpr int n_terms = 14;
    const double x = z.real(), y = z.imag();
    double frac = x / h - std::floor(x / h);
    const double delta = (frac < 0.25 || frac > 0.75) ? 0.5 : 0.0;
    cplx s = 0.0;
    for (int n = -n_terms - 1; n <= n_terms; ++n) {
        const double t = (n + delta) * h;
        s += std::exp(-t * t) / (z - t);
    }
    s *= I * h / pi;
    if (y < 6.0) {
        const cplx e = std::exp(-2.0 * pi * I * z / h);
        const cplx g = 2.0 * std::exp(-z * z);
        s += delta == 0.0 ? g / (1.0 - e) : g / (1.0 + e);
    }
    return s;
}

} // namespace detail

/** \brief Faddeeva function w(z) = exp(-z^2) erfc(-iz). */
inline cplx faddeeva(cplx z)
{
    if (!finite(z))
        throw domain_error("faddeeva: non-finite argument");
    if (z.imag() >= 0.0)
        return detail::faddeeva_upper(z);
    return checked(2.0 * std::exp(-z * z) - detail::faddeeva_upper(-z), "faddeeva");
}

/** \brief Scaled complementary error function exp(z^2) erfc(z). */
inline cplx erfcx(cplx z) { return faddeeva(I * z); }

/** \brief Complementary error function of complex argument, |z| < 1e8. */
inline cplx cerfc(cplx z)
{
    if (!(std::abs(z) < 1e8))
        throw domain_error("cerfc: |z| too large");
    if (z.real() >= 0.0) {
        const cplx w = detail::faddeeva_upper(I * z);
        const cplx e = std::exp(-z * z);
        if (!finite(e))
            throw domain_error("cerfc: overflow");
        return checked(e * w, "cerfc");
    }
    return 2.0 - cerfc(-z);
}

/** \brief Error function; Taylor series near the origin avoids 1 - erfc cancellation. */
inline cplx cerf(cplx z)
{
    if (std::abs(z) < 0.5) {
        const cplx z2 = z * z;
        cplx term = z, sum = z;
        for (int n = 1; n < 40; ++n) {
            term *= -z2 / double(n);
            const cplx add = term / double(2 * n + 1);
            sum += add;
            if (std::abs(add) < 1e-17 * std::abs(sum))
                break;
        }
        return 2.0 / std::sqrt(pi) * sum;
    }
    return 1.0 - cerfc(z);
}

struct fresnel_pair {
    double C, S;
};

/**
 * \brief Fresnel integrals C(x) = int_0^x cos(pi t^2/2), S(x) = int_0^x sin(pi t^2/2).
 *
 * Uses C + iS = (1+i)/2 erf((1-i) sqrt(pi) x / 2).
 */
inline fresnel_pair fresnel(double x)
{
    if (!std::isfinite(x))
        throw domain_error("fresnel: non-finite argument");
    if (x < 0.0) {
        auto f = fresnel(-x);
        return {-f.C, -f.S};
    }
    const cplx v = 0.5 * cplx(1.0, 1.0) * cerf(0.5 * std::sqrt(pi) * cplx(1.0, -1.0) * x);
    return {v.real(), v.imag()};
}

namespace detail {

inline const cplx e_ipi4 = std::polar(1.0, pi / 4);
inline const cplx e_3ipi4 = std::polar(1.0, 3 * pi / 4);

// e^{is} * int_s^inf e^{-iu} u^{-3/2} du by the asymptotic series, valid for s >~ 200.
inline cplx tail_3half_scaled(double s)
{
    cplx term = 1.0, sum = 1.0;
    for (int k = 0; k < 60; ++k) {
        const cplx next = term * (1.5 + k) * I / s;
        if (std::abs(next) > std::abs(term))
            break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17)
            break;
    }
    return -I * std::pow(s, -1.5) * sum;
}

} // namespace detail

/** \brief G(X) = int_0^X u^{-1/2} e^{-iu} du. */
inline cplx half_moment0(double X)
{
    if (X <= 0.0)
        return 0.0;
    return std::sqrt(pi) * std::conj(detail::e_ipi4) * cerf(detail::e_ipi4 * std::sqrt(X));
}

/** \brief int_0^X u^{1/2} e^{-iu} du. */
inline cplx half_moment1(double X)
{
    if (X <= 0.0)
        return 0.0;
    return I * std::sqrt(X) * std::exp(-I * X) - 0.5 * I * half_moment0(X);
}

/** \brief M(s) = (1/2) sqrt(i/pi) int_s^inf e^{-iu} u^{-3/2} du. */
inline cplx kernel_M(double s)
{
    if (!(s > 0.0))
        throw domain_error("kernel_M: requires s > 0");
    const cplx c = 0.5 * std::sqrt(I / pi);
    if (s >= 200.0)
        return c * std::exp(-I * s) * detail::tail_3half_scaled(s);
    // int_s^inf e^{-iu}u^{-3/2} = 2 s^{-1/2} e^{-is} - 2i int_s^inf e^{-iu} u^{-1/2},
    // and the latter is sqrt(pi) e^{-i pi/4} e^{-is} w(e^{3i pi/4} sqrt s).
    const double rs = std::sqrt(s);
    const cplx w = faddeeva(detail::e_3ipi4 * rs);
    return c * std::exp(-I * s) *
           (2.0 / rs - 2.0 * I * std::sqrt(pi) * std::conj(detail::e_ipi4) * w);
}

/** \brief Exact antiderivatives int_0^S M(s) ds and int_0^S s M(s) ds. */
inline std::pair<cplx, cplx> kernel_M_moments(double S)
{
    if (S <= 0.0)
        return {0.0, 0.0};
    const cplx c = 0.5 * std::sqrt(I / pi);
    const cplx F = kernel_M(S) / c;
    const cplx G = half_moment0(S);
    const cplx m0 = c * (S * F + G);
    const cplx m1 = c * (0.5 * S * S * F + 0.5 * (I * std::sqrt(S) * std::exp(-I * S) - 0.5 * I * G));
    return {m0, m1};
}

enum class bessel_kind { J, N, I, K };

namespace detail {

// Spherical Bessel j_l by ascending series; used when x is below the order.
inline double sph_j_series(int l, double x)
{
    double pre = 1.0;
    for (int k = 1; k <= l; ++k)
        pre *= x / (2 * k + 1);
    const double q = -0.5 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (k * (2.0 * l + 2 * k + 1));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum))
            break;
    }
    return pre * sum;
}

inline double sph_j(int l, double x)
{
    if (x < l + 0.5 || x < 0.5)
        return sph_j_series(l, x);
    double j0 = std::sin(x) / x;
    if (l == 0)
        return j0;
    double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    for (int n = 1; n < l; ++n) {
        const double j2 = (2 * n + 1) / x * j1 - j0;
        j0 = j1;
        j1 = j2;
    }
    return j1;
}

inline double sph_y(int l, double x)
{
    double y0 = -std::cos(x) / x;
    if (l == 0)
        return y0;
    double y1 = -std::cos(x) / (x * x) - std::sin(x) / x;
    for (int n = 1; n < l; ++n) {
        const double y2 = (2 * n + 1) / x * y1 - y0;
        y0 = y1;
        y1 = y2;
    }
    return y1;
}

// Finite sums of the half-integer modified functions:
// K_{l+1/2}(x) = sqrt(pi/2x) e^{-x} sum_k c_k (2x)^{-k}, c_k = (l+k)!/(k!(l-k)!).
inline double k_sum(int l, double x, double sign)
{
    double c = 1.0, sum = 1.0, p = 1.0;
    for (int k = 1; k <= l; ++k) {
        c *= double(l + k) * (l - k + 1) / k;
        p *= sign / (2.0 * x);
        sum += c * p;
    }
    return sum;
}

// I_{nu}(x) for nu = l + 1/2, l >= -1.
inline double bessel_i(int l, double x)
{
    if (l == -1)
        return std::sqrt(2.0 / (pi * x)) * std::cosh(x);
    if (l == 0)
        return std::sqrt(2.0 / (pi * x)) * std::sinh(x);
    if (x < 30.0) {
        // power series with positive terms
        const double nu = l + 0.5;
        double term = std::pow(0.5 * x, nu) / std::tgamma(nu + 1.0);
        double sum = term;
        const double q = 0.25 * x * x;
        for (int k = 1; k < 500; ++k) {
            term *= q / (k * (k + nu));
            sum += term;
            if (term < 1e-17 * sum)
                break;
        }
        return sum;
    }
    const double sgn = (l % 2 == 0) ? 1.0 : -1.0;
    return (std::exp(x) * k_sum(l, x, -1.0) - sgn * std::exp(-x) * k_sum(l, x, 1.0)) /
           std::sqrt(2.0 * pi * x);
}

inline double bessel_k(int l, double x)
{
    const int n = l < 0 ? -l - 1 : l; // K_{-nu} = K_nu
    return std::sqrt(pi / (2.0 * x)) * std::exp(-x) * k_sum(n, x, 1.0);
}

} // namespace detail

/** \brief Bessel family of order l + 1/2, 0 <= l <= 10. */
inline double bessel_half(bessel_kind kind, int l, double x)
{
    if (l < 0 || l > 10)
        throw domain_error("bessel_half: order out of range");
    if (!(x > 0.0) || !std::isfinite(x))
        throw domain_error("bessel_half: requires finite x > 0");
    const double s = std::sqrt(2.0 * x / pi);
    switch (kind) {
    case bessel_kind::J:
        return s * detail::sph_j(l, x);
    case bessel_kind::N:
        return s * detail::sph_y(l, x);
    case bessel_kind::I:
        return detail::bessel_i(l, x);
    case bessel_kind::K:
        return detail::bessel_k(l, x);
    }
    return 0.0;
}

} // namespace parion::specfun
