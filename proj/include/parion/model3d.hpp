#pragma once

#include "error.hpp"
#include "model1d.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"
#include "volterra.hpp"

#include <cmath>
#include <optional>
#include <vector>

// Units: hbar = 2m = 1, so energies are k^2 and Q = g a. Public times are
// dimensionless, T = omega0 t with omega0 = p^2 the l = 0 binding energy.

namespace parion {

namespace model3d {

namespace detail {

/** \brief e^{-x} I_{l+1/2}(x), l >= -1. */
inline double i_scaled(int l, double x)
{
    if (l == -1)
        return std::sqrt(2.0 / (pi * x)) * 0.5 * (1.0 + std::exp(-2.0 * x));
    if (x < 30.0)
        return specfun::detail::bessel_i(l, x) * std::exp(-x);
    const double sgn = (l % 2 == 0) ? 1.0 : -1.0;
    return (specfun::detail::k_sum(l, x, -1.0) - sgn * std::exp(-2.0 * x) * specfun::detail::k_sum(l, x, 1.0)) /
           std::sqrt(2.0 * pi * x);
}

/** \brief e^{x} K_{l+1/2}(x). */
inline double k_scaled(int l, double x)
{
    const int n = l < 0 ? -l - 1 : l;
    return std::sqrt(pi / (2.0 * x)) * specfun::detail::k_sum(n, x, 1.0);
}

/** \brief (e^{2x} - 1 - 2x) e^{-2x}. */
inline double d_scaled(double x)
{
    if (x < 1e-3)
        return x * x * (2.0 - x * (8.0 / 3.0 - 2.0 * x));
    return -std::expm1(-2.0 * x) - 2.0 * x * std::exp(-2.0 * x);
}

/** \brief sinh^2(pa) / (e^{2pa} - 1 - 2pa). */
inline double sinh2_over_d(double x)
{
    const double e = -std::expm1(-2.0 * x);
    return e * e / (4.0 * d_scaled(x));
}

inline const cplx e_ipi4 = std::polar(1.0, pi / 4);

} // namespace detail

/** \brief Q K_{l+1/2}(x) I_{l+1/2}(x), the left side of the bound-state condition at x = p a. */
inline double bound_condition(double Q, int l, double x)
{
    return Q * detail::i_scaled(l, x) * detail::k_scaled(l, x);
}

/** \brief Bound momentum p_l solving Q K I (p a) = 1, or none when Q <= 2l + 1. */
inline std::optional<double> bound_momentum(double Q, double a, int l)
{
    if (!(Q > 0.0) || !(a > 0.0))
        throw domain_error("bound_momentum: requires Q > 0 and a > 0");
    if (l < 0 || l > 10)
        throw domain_error("bound_momentum: l must be in [0, 10]");
    if (Q <= 2 * l + 1)
        return std::nullopt;
    auto f = [&](double x) { return bound_condition(Q, l, x) - 1.0; };
    double lo = 0.0, hi = Q;
    while (f(hi) > 0.0)
        hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) / a;
}

} // namespace model3d

/** \brief Shell-delta atom with strength Q = 2 m g a / hbar^2 and radius a. */
struct atom3d {
    double Q = 2.0;
    double a = 1.0;
    int l_max = 0;
    std::vector<std::optional<double>> p_l;

    atom3d(double Q_, double a_, int l_max_ = 0) : Q(Q_), a(a_), l_max(l_max_)
    {
        if (!(Q > 0.0) || !(a > 0.0) || !std::isfinite(Q) || !std::isfinite(a))
            throw domain_error("atom3d: requires finite Q > 0 and a > 0");
        if (l_max < 0 || l_max > 10)
            throw domain_error("atom3d: l_max must be in [0, 10]");
        for (int l = 0; l <= l_max; ++l)
            p_l.push_back(model3d::bound_momentum(Q, a, l));
    }

    double g() const { return Q / a; }
    bool has_bound(int l) const { return l >= 0 && l <= l_max && p_l[l].has_value(); }
    double p(int l = 0) const
    {
        if (!has_bound(l))
            throw domain_error("atom3d: no bound state at l = " + std::to_string(l));
        return *p_l[l];
    }
    /** \brief Binding energy of the l = 0 state, the unit of frequency. */
    double omega0() const { return p(0) * p(0); }
};

namespace model3d {

/** \brief 1 - Q sin(2ka)/(ka) + Q^2 sin^2(ka)/(ka)^2, the squared asymptotic amplitude of the l = 0 wave. */
inline double continuum_denominator(double Q, double a, double k)
{
    const double x = k * a;
    if (x < 1e-4) {
        // sin(2x)/x = 2 - 4x^2/3, sin^2 x / x^2 = 1 - x^2/3
        const double x2 = x * x;
        return (1.0 - Q) * (1.0 - Q) + x2 * (4.0 * Q / 3.0 - Q * Q / 3.0);
    }
    const double s = std::sin(x) / x;
    return 1.0 - Q * std::sin(2.0 * x) / x + Q * Q * s * s;
}

/** \brief Continuum normalization A_l(k)^2. */
inline double continuum_norm2(double Q, double a, int l, double k)
{
    if (l == 0)
        return 1.0 / continuum_denominator(Q, a, k);
    const double x = k * a;
    const double J = specfun::bessel_half(specfun::bessel_kind::J, l, x);
    const double N = specfun::bessel_half(specfun::bessel_kind::N, l, x);
    return 1.0 / (1.0 + pi * Q * J * N + 0.25 * pi * pi * Q * Q * J * J * (J * J + N * N));
}

/** \brief |R_l(k, a)|^2. */
inline double continuum_density_at_shell(double Q, double a, int l, double k)
{
    if (l == 0) {
        const double s = std::sin(k * a);
        return 2.0 * s * s / (pi * a * a * continuum_denominator(Q, a, k));
    }
    const double J = specfun::bessel_half(specfun::bessel_kind::J, l, k * a);
    return continuum_norm2(Q, a, l, k) * k / a * J * J;
}

/** \brief [R_l^b(a)]^2. */
inline double bound_density_at_shell(const atom3d &atom, int l)
{
    const double p = atom.p(l), a = atom.a, x = p * a;
    if (l == 0)
        return 4.0 * p * detail::sinh2_over_d(x) / (a * a);
    const double ks = detail::k_scaled(l, x);
    const double den = 1.0 - x * ks * (detail::i_scaled(l - 1, x) + detail::i_scaled(l + 1, x));
    const double Bs = std::sqrt(2.0) * ks / std::sqrt(den); // B_l e^{pa}
    const double v = Bs * p * detail::i_scaled(l, x);
    return v * v / a;
}

struct radial_state {
    int l = 0;
    bool bound = true;
    double momentum = 0.0;
    /** \brief B_l for bound states, A_l(k) for continuum states. */
    double norm = 0.0;
    double Q = 0.0, a = 1.0;

    double operator()(double r) const
    {
        if (!(r >= 0.0))
            throw domain_error("radial_state: requires r >= 0");
        const double p = momentum;
        if (bound) {
            const double x = p * a;
            if (r == 0.0)
                return l == 0 ? norm_scaled_ * p * std::sqrt(2.0 * p / pi) * std::exp(-x) : 0.0;
            if (r <= a)
                return norm_scaled_ * p / std::sqrt(r) * detail::i_scaled(l, p * r) * std::exp(p * r - x);
            return norm_scaled_ * p / std::sqrt(r) * detail::i_scaled(l, x) * detail::k_scaled(l, p * r) /
                   detail::k_scaled(l, x) * std::exp(-p * (r - a));
        }
        const double k = momentum;
        if (r == 0.0)
            return l == 0 ? norm * std::sqrt(2.0 / pi) * k : 0.0;
        using specfun::bessel_kind;
        double v = specfun::bessel_half(bessel_kind::J, l, k * r);
        if (r > a) {
            const double Ja = specfun::bessel_half(bessel_kind::J, l, k * a);
            const double Na = specfun::bessel_half(bessel_kind::N, l, k * a);
            const double Nr = specfun::bessel_half(bessel_kind::N, l, k * r);
            v += 0.5 * pi * Q * Ja * (Na * v - Ja * Nr);
        }
        return norm * std::sqrt(k / r) * v;
    }

    double norm_scaled_ = 0.0;
};

/** \brief Normalized bound radial function R_l^b. */
inline radial_state radial_eigenfunction(const atom3d &atom, int l)
{
    radial_state s;
    s.l = l;
    s.bound = true;
    s.momentum = atom.p(l);
    s.Q = atom.Q;
    s.a = atom.a;
    const double x = s.momentum * atom.a;
    const double ks = detail::k_scaled(l, x);
    const double den = 1.0 - x * ks * (detail::i_scaled(l - 1, x) + detail::i_scaled(l + 1, x));
    if (!(den > 0.0))
        throw numerical_failure("radial_eigenfunction: bound normalization is not positive");
    s.norm_scaled_ = std::sqrt(2.0) * ks / std::sqrt(den);
    s.norm = s.norm_scaled_ * std::exp(-x);
    return s;
}

/** \brief Delta-normalized continuum radial function R_l(k, r). */
inline radial_state radial_eigenfunction(const atom3d &atom, int l, double k)
{
    if (!(k > 0.0))
        throw domain_error("radial_eigenfunction: requires k > 0");
    if (l < 0 || l > 10)
        throw domain_error("radial_eigenfunction: l must be in [0, 10]");
    radial_state s;
    s.l = l;
    s.bound = false;
    s.momentum = k;
    s.Q = atom.Q;
    s.a = atom.a;
    s.norm = std::sqrt(continuum_norm2(atom.Q, atom.a, l, k));
    return s;
}

/** \brief |<b_p | b_q>|^2 for l = 0 bound states of momenta p and q on the same shell. */
inline double bound_overlap2(double p, double q, double a)
{
    const double eps = std::exp(-(p + q) * a);
    auto em = [&](double d) { return std::abs(d * a) < 1e-8 ? a * (1.0 + 0.5 * d * a) : std::expm1(d * a) / d; };
    const double inner =
        0.25 * ((1.0 - eps) / (p + q) - eps * (em(p - q) + em(q - p)) + eps * (1.0 - eps) / (p + q));
    const double outer = -std::expm1(-2.0 * p * a) * -std::expm1(-2.0 * q * a) / (4.0 * (p + q));
    const double ov = 4.0 * std::sqrt(p * q / (detail::d_scaled(p * a) * detail::d_scaled(q * a))) * (inner + outer);
    return ov * ov;
}

/** \brief Spectral weight |<b|k>|^2 of the perturbed continuum (l = 0, perturbation r). */
inline double continuum_weight(const atom3d &atom, double r, double k)
{
    const double Q = atom.Q, a = atom.a, p = atom.p();
    const double s = std::sin(k * a), w = k * k + p * p;
    return 8.0 * r * r * Q * Q * p * detail::sinh2_over_d(p * a) * s * s /
           (pi * a * a * continuum_denominator((1.0 + r) * Q, a, k) * w * w);
}

/** \brief Weight of the new bound state, zero when (1 + r) Q <= 1. */
inline double bound_weight(const atom3d &atom, double r)
{
    const double Q1 = (1.0 + r) * atom.Q;
    if (Q1 <= 1.0)
        return 0.0;
    return bound_overlap2(atom.p(), *bound_momentum(Q1, atom.a, 0), atom.a);
}

namespace detail {

/**
 * \brief int_0^inf f(k) e^{-i k^2 t} dk for f decaying like C/k^4 and oscillating on the scale 1/a.
 */
template <class F>
cplx k4_transform(F &&f, double t, double C, double a, double width_cap)
{
    static const quad::gauss_legendre gl(10);
    const double eps = 1e-11;
    double K;
    bool tail = false;
    const double Kibp = std::max(5.0 / a, std::pow(a * C / (2.0 * eps * t * t), 1.0 / 6.0));
    if (2.0 * Kibp * t >= 20.0 * a) {
        K = Kibp;
        tail = true;
    } else {
        K = std::max(20.0 / a, std::cbrt(C / (3.0 * eps)));
    }
    cplx sum = 0.0;
    double k = 0.0;
    while (k < K) {
        double w = std::min(width_cap, std::sqrt(k * k + 3.0 / t) - k);
        if (k + w > K)
            w = K - k;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double x = k + 0.5 * w * (1.0 + gl.x[i]);
            sum += 0.5 * w * gl.w[i] * f(x) * std::exp(-I * (x * x * t));
        }
        k += w;
    }
    if (tail)
        sum += f(K) * std::exp(-I * (K * K * t)) / (2.0 * I * K * t);
    return sum;
}

} // namespace detail

/**
 * \brief Survival amplitude theta(T) of the l = 0 bound state under a
 * rectangular pulse of relative amplitude r, in the interaction picture of
 * the unperturbed atom; T is in units of 1/omega0.
 */
inline cplx theta3d_rect(const atom3d &atom, double r, double T)
{
    if (!(T >= 0.0) || !std::isfinite(T))
        throw domain_error("theta3d_rect: requires finite T >= 0");
    if (!std::isfinite(r))
        throw domain_error("theta3d_rect: r must be finite");
    const double p = atom.p(), a = atom.a, Q1 = (1.0 + r) * atom.Q;
    if (r == 0.0 || T == 0.0)
        return 1.0;
    const double t = T / (p * p);
    cplx bound = 0.0;
    if (Q1 > 1.0) {
        const double q = *bound_momentum(Q1, a, 0);
        bound = bound_overlap2(p, q, a) * std::exp(I * (q * q * t));
    }
    const double C = 8.0 * r * r * atom.Q * atom.Q * p * detail::sinh2_over_d(p * a) / (pi * a * a) * 4.0;
    const double cap = 0.2 / (a * std::max(1.0, std::abs(Q1) / 3.0));
    const cplx cont = detail::k4_transform([&](double k) { return continuum_weight(atom, r, k); }, t, C, a, cap);
    return std::exp(-I * T) * (bound + cont);
}

/**
 * \brief Large-T form of theta3d_rect: new-bound-state term plus the leading
 * continuum term, T^{-3/2} for Q1 != 1 and T^{-1/2} at Q1 = 1.
 */
inline cplx theta3d_asymptotic(const atom3d &atom, double r, double T)
{
    if (!(T >= 50.0))
        throw domain_error("theta3d_asymptotic: requires T >= 50");
    const double p = atom.p(), a = atom.a, Q = atom.Q, Q1 = (1.0 + r) * Q;
    const double t = T / (p * p);
    cplx bound = 0.0;
    if (Q1 > 1.0) {
        const double q = *bound_momentum(Q1, a, 0);
        bound = bound_overlap2(p, q, a) * std::exp(I * ((q * q - p * p) * t));
    }
    const double s2d = detail::sinh2_over_d(p * a);
    cplx cont;
    if (std::abs(Q1 - 1.0) <= 1e-12) {
        const double f0 = 8.0 * r * r * Q * Q * p * s2d / (pi * a * a * std::pow(p, 4));
        cont = f0 * 0.5 * std::sqrt(pi) / std::sqrt(I * t);
    } else {
        const double f2 = 8.0 * r * r * Q * Q * s2d / (pi * (1.0 - Q1) * (1.0 - Q1) * std::pow(p, 3));
        cont = f2 * 0.25 * std::sqrt(pi) * std::pow(I * t, -1.5);
    }
    return bound + std::exp(-I * T) * cont;
}

/** \brief Coefficient c of |theta(T)|^2 ~ c / T at Q1 = 1. */
inline double zero_energy_coefficient(const atom3d &atom, double r)
{
    const double p = atom.p(), a = atom.a, Q = atom.Q;
    const double f0 = 8.0 * r * r * Q * Q * p * detail::sinh2_over_d(p * a) / (pi * a * a * std::pow(p, 4));
    const double c = f0 * 0.5 * std::sqrt(pi) * p;
    return c * c;
}

namespace detail {

// int s^{-1/2} e^{-alpha s - beta/s} ds with alpha = i p^2, beta = -i b^2 (F),
// the same with s^{-3/2} (H) and s^{1/2} (M1), each up to a constant.
struct shell_antiderivatives {
    cplx F, H, M1;
};

inline shell_antiderivatives shell_primitive(double p, double b, double s)
{
    const cplx alpha = I * p * p, beta = -I * b * b;
    const cplx sa = p * e_ipi4, sb = b * std::conj(e_ipi4);
    const double em = std::exp(-2.0 * p * b);
    cplx P, Mn, E = 0.0;
    if (s <= 0.0) {
        P = 0.0;
        Mn = -em;
    } else {
        const double rs = std::sqrt(s);
        E = std::exp(-I * (p * p * s) + I * (b * b / s));
        const cplx zp = sa * rs + sb / rs, zm = sa * rs - sb / rs;
        P = -E * specfun::faddeeva(I * zp);
        const cplx izm = I * zm;
        if (izm.imag() >= 0.0)
            Mn = em - E * specfun::faddeeva(izm);
        else
            Mn = -em + E * specfun::faddeeva(-izm);
    }
    shell_antiderivatives r;
    r.F = std::sqrt(pi) / (2.0 * sa) * (P + Mn);
    r.H = -std::sqrt(pi) / (2.0 * sb) * (P - Mn);
    r.M1 = (0.5 * r.F + beta * r.H - std::sqrt(std::max(s, 0.0)) * E) / alpha;
    return r;
}

/** \brief erfc(b / sqrt(i s)). */
inline cplx erfc_shell(double b, double s)
{
    if (s <= 1e-14 * b * b)
        return 0.0;
    return specfun::cerfc(b * std::conj(e_ipi4) / std::sqrt(s));
}

// int E_b e^{lambda s} ds and int s E_b e^{lambda s} ds, lambda = -i p^2, E_b = erfc(b/sqrt(is)).
inline std::pair<cplx, cplx> erfc_shell_primitive(double p, double b, double s)
{
    const cplx lambda = -I * p * p;
    const auto prim = shell_primitive(p, b, s);
    const cplx Eb = erfc_shell(b, s);
    const cplx el = std::exp(lambda * s);
    const cplx c = b / (lambda * std::sqrt(pi * I));
    const cplx A0 = Eb * el / lambda - c * prim.H;
    const cplx A1 = s * Eb * el / lambda - A0 / lambda - c * prim.F;
    return {A0, A1};
}

} // namespace detail

/**
 * \brief Memory kernel of the shell atom for the Volterra engine, in units of 1/omega0.
 *
 * rho(s) = int |R_l(k,a)|^2 e^{-i(k^2+p^2)s} dk is split into the large-k
 * mean (1/(pi a^2))(1 + (-1)^{l+1} cos 2ka), whose transform is closed form,
 * for l = 0 also the 1/k term Q(sin 2ka - sin 4ka / 2)/(pi a^3 k), and a
 * remainder. Near zero lag the remainder's moments are taken in k-space;
 * beyond that it is tabulated in sqrt(s).
 */
class kernel_3d {
public:
    kernel_3d(const atom3d &atom, int l, double horizon) : Q_(atom.Q), a_(atom.a), l_(l)
    {
        if (!(horizon >= 0.0))
            throw domain_error("kernel_3d: horizon must be non-negative");
        p_ = atom.p(l);
        p2_ = p_ * p_;
        rb2_ = bound_density_at_shell(atom, l);
        sigma_ = (l % 2 == 0) ? -1.0 : 1.0;
        rinf_ = 1.0 / (pi * a_ * a_);
        s_near_ = 0.25 * a_ * a_;
        s_max_ = horizon / p2_ * (1.0 + 1e-12) + 1e-12;
        if (horizon > 0.0) {
            build_near_grid();
            build_table();
        }
    }

    cplx constant_part() const { return I * Q_ * a_ * rb2_ / p2_; }
    cplx theta_coefficient() const { return constant_part(); }

    /** \brief Mem(S) in units of 1/omega0. */
    cplx memory(double S) const { return I * Q_ * a_ * rho(S / p2_, false) / p2_; }

    std::pair<cplx, cplx> moments(double S_a, double S_b) const
    {
        const double s_a = S_a / p2_, s_b = S_b / p2_;
        if (s_b > s_max_)
            throw domain_error("kernel_3d: lag beyond the tabulated horizon");
        cplx m0 = 0.0, m1 = 0.0;
        if (s_a < s_near_) {
            const double e = std::min(s_b, s_near_);
            const auto [n0, n1] = near_moments(s_a, e);
            m0 += n0;
            m1 += n1;
        }
        if (s_b > s_near_) {
            const double b = std::max(s_a, s_near_);
            const auto [f0, f1] = far_moments(b, s_b);
            m0 += f0;
            m1 += f1 + (b - s_a) * f0;
        }
        const cplx c = I * Q_ * a_;
        return {c * m0, c * m1 * p2_};
    }

    /** \brief rho(s) at physical lag s > 0, with the remainder by direct quadrature or from the table. */
    cplx rho(double s, bool direct) const
    {
        if (!(s > 0.0))
            throw domain_error("kernel: lag must be positive");
        const cplx ch = 0.5 * std::sqrt(pi / I);
        const cplx ep = std::exp(-I * (p2_ * s));
        cplx v = rinf_ * ch / std::sqrt(s) * ep * (1.0 + sigma_ * std::exp(I * (a_ * a_ / s)));
        if (l_ == 0)
            v += Q_ / (2.0 * a_ * a_ * a_) * ep *
                 (0.5 - detail::erfc_shell(a_, s) + 0.5 * detail::erfc_shell(2.0 * a_, s));
        const cplx rem = (direct || s < s_near_) ? remainder_direct(s) : remainder_table(s);
        return v + ep * rem;
    }

    double bound_density() const { return rb2_; }

private:
    double delta_rho(double k) const
    {
        const double x = k * a_;
        double d = continuum_density_at_shell(Q_, a_, l_, k) - rinf_ * (1.0 + sigma_ * std::cos(2.0 * x));
        if (l_ == 0)
            d -= Q_ / (pi * a_ * a_ * a_ * k) * (std::sin(2.0 * x) - 0.5 * std::sin(4.0 * x));
        return d;
    }

    /** \brief int delta_rho(k) e^{-i k^2 s} dk. */
    cplx remainder_direct(double s) const
    {
        static const quad::gauss_legendre gl(10);
        const double scale = std::max(1.0, Q_ * Q_ / 4.0);
        double K = std::max(10.0 / a_, std::pow(15.0 * scale / (a_ * a_ * a_ * 1e-7 * s * s), 0.25));
        K = std::min(K, 3000.0 / a_);
        cplx sum = 0.0;
        double k = 0.0;
        while (k < K) {
            double w = std::min(0.2 / a_, std::sqrt(k * k + 1.5 / s) - k);
            if (k + w > K)
                w = K - k;
            for (std::size_t i = 0; i < gl.x.size(); ++i) {
                const double x = k + 0.5 * w * (1.0 + gl.x[i]);
                sum += 0.5 * w * gl.w[i] * delta_rho(x) * std::exp(-I * (x * x * s));
            }
            k += w;
        }
        if (2.0 * K * s > 20.0 * a_)
            sum += delta_rho(K) * std::exp(-I * (K * K * s)) / (2.0 * I * K * s);
        return sum;
    }

    cplx remainder_table(double s) const
    {
        const double u = std::sqrt(s);
        double x = (u - u0_) / du_;
        std::size_t i = std::size_t(std::max(0.0, std::floor(x)));
        i = std::min(std::max<std::size_t>(i, 1), table_.size() - 3);
        const double t = x - double(i);
        // cubic Lagrange on nodes i-1, i, i+1, i+2
        const double w0 = -t * (t - 1) * (t - 2) / 6.0, w1 = (t + 1) * (t - 1) * (t - 2) / 2.0;
        const double w2 = -(t + 1) * t * (t - 2) / 2.0, w3 = (t + 1) * t * (t - 1) / 6.0;
        return w0 * table_[i - 1] + w1 * table_[i] + w2 * table_[i + 1] + w3 * table_[i + 2];
    }

    void build_table()
    {
        u0_ = std::sqrt(s_near_);
        du_ = 0.004 * a_;
        const double u_end = std::max(std::sqrt(s_max_), u0_);
        const std::size_t n = std::size_t(std::ceil((u_end - u0_) / du_)) + 4;
        table_.resize(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            const double u = u0_ + (double(i) - 1.0) * du_;
            table_[i] = remainder_direct(u * u);
        }
        u0_ -= du_;
    }

    void build_near_grid()
    {
        static const quad::gauss_legendre gl(10);
        const double K = 100.0 * std::max(1.0, std::pow(Q_ / 2.0, 2.0 / 3.0)) / a_;
        double k = 0.0;
        while (k < K) {
            double w = std::min(0.2 / a_, std::sqrt(k * k + 1.5 / s_near_) - k);
            if (k + w > K)
                w = K - k;
            for (std::size_t i = 0; i < gl.x.size(); ++i) {
                const double x = k + 0.5 * w * (1.0 + gl.x[i]);
                near_k_.push_back(x);
                near_w_.push_back(0.5 * w * gl.w[i] * delta_rho(x));
            }
            k += w;
        }
    }

    // int over [s_a, s_b] of rho and of (s - s_a) rho, with s_b <= s_near.
    std::pair<cplx, cplx> near_moments(double s_a, double s_b) const
    {
        const double h = s_b - s_a;
        const cplx ch = 0.5 * std::sqrt(pi / I);
        cplx m0 = 0.0, m1 = 0.0;
        // large-k mean: s^{-1/2} e^{-i p^2 s}
        {
            const double p = p_;
            const cplx F0b = specfun::half_moment0(p2_ * s_b) / p, F0a = specfun::half_moment0(p2_ * s_a) / p;
            const cplx G1b = specfun::half_moment1(p2_ * s_b) / (p * p2_),
                       G1a = specfun::half_moment1(p2_ * s_a) / (p * p2_);
            const cplx d0 = F0b - F0a;
            m0 += rinf_ * ch * d0;
            m1 += rinf_ * ch * ((G1b - G1a) - s_a * d0);
        }
        // cos 2ka part: s^{-1/2} e^{-i p^2 s + i a^2 / s}
        {
            const auto A = detail::shell_primitive(p_, a_, s_a), B = detail::shell_primitive(p_, a_, s_b);
            const cplx d0 = B.F - A.F;
            m0 += sigma_ * rinf_ * ch * d0;
            m1 += sigma_ * rinf_ * ch * ((B.M1 - A.M1) - s_a * d0);
        }
        if (l_ == 0) {
            const cplx lambda = -I * p2_;
            const double c = Q_ / (2.0 * a_ * a_ * a_);
            auto e0 = [&](double s) { return std::exp(lambda * s) / lambda; };
            auto e1 = [&](double s) { return std::exp(lambda * s) * (s / lambda - 1.0 / (lambda * lambda)); };
            const auto [a0b, a1b] = detail::erfc_shell_primitive(p_, a_, s_b);
            const auto [a0a, a1a] = detail::erfc_shell_primitive(p_, a_, s_a);
            const auto [b0b, b1b] = detail::erfc_shell_primitive(p_, 2.0 * a_, s_b);
            const auto [b0a, b1a] = detail::erfc_shell_primitive(p_, 2.0 * a_, s_a);
            const cplx d0 = 0.5 * (e0(s_b) - e0(s_a)) - (a0b - a0a) + 0.5 * (b0b - b0a);
            const cplx d1 = 0.5 * (e1(s_b) - e1(s_a)) - (a1b - a1a) + 0.5 * (b1b - b1a);
            m0 += c * d0;
            m1 += c * (d1 - s_a * d0);
        }
        // remainder in k-space
        cplx r0 = 0.0, r1 = 0.0;
        for (std::size_t i = 0; i < near_k_.size(); ++i) {
            const double k = near_k_[i];
            const double om = k * k + p2_;
            const cplx z = -I * (om * h);
            cplx E1, E2; // (e^z - 1)/z and (e^z (z - 1) + 1)/z^2
            if (std::abs(z) < 0.05) {
                E1 = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
                E2 = 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0 + z * z * z * z / 144.0;
            } else {
                const cplx ez = std::exp(z);
                E1 = (ez - 1.0) / z;
                E2 = (ez * (z - 1.0) + 1.0) / (z * z);
            }
            const cplx ph = near_w_[i] * std::exp(-I * (om * s_a));
            r0 += ph * E1;
            r1 += ph * E2;
        }
        m0 += r0 * h;
        m1 += r1 * h * h;
        return {m0, m1};
    }

    std::pair<cplx, cplx> far_moments(double s_a, double s_b) const
    {
        static const quad::gauss_legendre gl(6);
        const double h = s_b - s_a;
        cplx m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double x = 0.5 * h * (1.0 + gl.x[i]);
            const cplx v = rho(s_a + x, false) * (0.5 * h * gl.w[i]);
            m0 += v;
            m1 += v * x;
        }
        return {m0, m1};
    }

    double Q_, a_;
    int l_;
    double p_ = 0, p2_ = 0, rb2_ = 0, sigma_ = -1, rinf_ = 0, s_near_ = 0, s_max_ = 0;
    std::vector<double> near_k_;
    std::vector<cplx> near_w_;
    std::vector<cplx> table_;
    double u0_ = 0, du_ = 0;
};

/** \brief K_l at lag T (units of 1/omega0): [R_l^b(a)]^2 + int |R_l(k,a)|^2 e^{-i(k^2+p_l^2) t} dk. */
inline cplx kernel_K(const atom3d &atom, int l, double lag)
{
    if (!(lag > 0.0))
        throw domain_error("kernel_K: lag must be positive");
    const kernel_3d k(atom, l, 0.0);
    return k.bound_density() + k.rho(lag / (atom.p(l) * atom.p(l)), true);
}

/**
 * \brief theta_{l,m}(T) of the shell atom under an arbitrary program (times in 1/omega0).
 *
 * Only l = 0 is supported unless experimental is set; theta_{l,m} is linear
 * in its initial value.
 */
inline amplitude_record evolve3d(const atom3d &atom, const pulse_program &program, int l, double T_end,
                                 volterra_options opt = {}, cplx theta0 = 1.0, bool experimental = false)
{
    if (l != 0 && !experimental)
        throw domain_error("evolve3d: only l = 0 is supported");
    if (!(T_end > 0.0))
        throw domain_error("evolve3d: T_end must be positive");
    amplitude_record rec;
    rec.path = amplitude_path::volterra;
    if (theta0 == 0.0) {
        rec.times = {0.0, T_end};
        rec.theta = {0.0, 0.0};
        return rec;
    }
    const auto y = volterra::solve({program, T_end, opt}, kernel_3d(atom, l, T_end + opt.step));
    for (std::size_t i = 0; i < y.t.size(); ++i) {
        if (y.t[i] > T_end * (1 + 1e-12))
            break;
        rec.times.push_back(y.t[i]);
        rec.theta.push_back(theta0 * y.theta[i]);
    }
    return rec;
}

} // namespace model3d
} // namespace parion
