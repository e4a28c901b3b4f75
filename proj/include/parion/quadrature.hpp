#pragma once

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <type_traits>
#include <vector>

namespace parion::quad {

template <class T>
struct result {
    T value{};
    double error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> xk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(cplx v) { return std::abs(v); }

template <class T>
struct segment {
    double a, b;
    T value;
    double error;
    bool operator<(const segment &o) const { return error < o.error; }
};

template <class T, class F>
segment<T> kronrod15(F &f, double a, double b)
{
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    T fc = f(c);
    T k = fc * wk[7];
    T g = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * xk[j];
        T s = f(c - dx) + f(c + dx);
        k += s * wk[j];
        if (j % 2 == 1)
            g += s * wg[j / 2];
    }
    k *= h;
    g *= h;
    return {a, b, k, magnitude(k - g)};
}

} // namespace detail

/** \brief Globally adaptive Gauss-Kronrod 7/15 on a finite interval. */
template <class F, class T = std::invoke_result_t<F &, double>>
result<T> gk15(F &&f, double a, double b, double abs_tol, double rel_tol = 1e-12,
               int max_segments = 4000)
{
    result<T> res;
    if (a == b)
        return res;
    std::priority_queue<detail::segment<T>> heap;
    auto s0 = detail::kronrod15<T>(f, a, b);
    heap.push(s0);
    T total = s0.value;
    double err = s0.error;
    int nseg = 1;
    while (err > std::max(abs_tol, rel_tol * detail::magnitude(total))) {
        if (nseg >= max_segments) {
            res.converged = false;
            break;
        }
        auto s = heap.top();
        heap.pop();
        const double m = 0.5 * (s.a + s.b);
        if (m <= s.a || m >= s.b) {
            res.converged = false;
            heap.push(s);
            break;
        }
        auto l = detail::kronrod15<T>(f, s.a, m);
        auto r = detail::kronrod15<T>(f, m, s.b);
        total += l.value + r.value - s.value;
        err += l.error + r.error - s.error;
        heap.push(l);
        heap.push(r);
        ++nseg;
    }
    // recompute the sums to shed accumulated rounding from the running updates
    T sum{};
    double esum = 0.0;
    while (!heap.empty()) {
        sum += heap.top().value;
        esum += heap.top().error;
        heap.pop();
    }
    res.value = sum;
    res.error = esum;
    res.evaluations = 15 * (2 * nseg - 1);
    return res;
}

/** \brief Integral over [a, inf) through the map x = a + s u/(1-u). */
template <class F, class T = std::invoke_result_t<F &, double>>
result<T> gk15_semi_infinite(F &&f, double a, double scale, double abs_tol,
                             double rel_tol = 1e-12, int max_segments = 4000)
{
    auto g = [&](double u) -> T {
        if (u >= 1.0)
            return T{};
        const double d = 1.0 - u;
        const double x = a + scale * u / d;
        T v = f(x);
        return v * (scale / (d * d));
    };
    return gk15(g, 0.0, 1.0, abs_tol, rel_tol, max_segments);
}

/** \brief Gauss-Legendre nodes and weights on [-1, 1]. */
struct gauss_legendre {
    std::vector<double> x, w;

    explicit gauss_legendre(int n) : x(n), w(n)
    {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16)
                    break;
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    template <class F>
    auto operator()(F &&f, double a, double b) const
    {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        using T = std::invoke_result_t<F &, double>;
        T s{};
        for (std::size_t i = 0; i < x.size(); ++i)
            s += f(c + h * x[i]) * w[i];
        return s * h;
    }
};

} // namespace parion::quad
