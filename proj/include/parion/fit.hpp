#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace parion::fit {

struct line {
    double slope = 0.0;
    double intercept = 0.0;
    /** \brief Standard error of the slope from the residual scatter. */
    double slope_error = 0.0;
};

inline line fit_line(const std::vector<double> &x, const std::vector<double> &y)
{
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n)
        throw domain_error("fit_line: need at least three points of matching length");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw domain_error("fit_line: abscissae are all equal");
    line f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - f.intercept - f.slope * x[i];
        ss += e * e;
    }
    f.slope_error = std::sqrt(ss / double(n - 2) / sxx);
    return f;
}

struct power_law {
    double exponent = 0.0;
    double coefficient = 0.0;
    double exponent_error = 0.0;
};

/** \brief Fit |f(t)| ~ c t^e on n log-spaced samples in [t0, t1]. */
template <class F>
power_law fit_power_law(F &&f, double t0, double t1, int n = 60)
{
    if (!(t0 > 0.0 && t1 > t0) || n < 3)
        throw domain_error("fit_power_law: requires 0 < t0 < t1 and n >= 3");
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
        const double t = t0 * std::pow(t1 / t0, double(i) / (n - 1));
        const double v = std::abs(f(t));
        if (!(v > 0.0) || !std::isfinite(v))
            throw data_quality_error("fit_power_law: non-positive sample at t = " + std::to_string(t));
        x.push_back(std::log(t));
        y.push_back(std::log(v));
    }
    const line l = fit_line(x, y);
    return {l.slope, std::exp(l.intercept), l.slope_error};
}

/**
 * \brief Fit the envelope of an oscillating |f(t)| ~ c t^e: the maximum over
 * one period is taken in each of n log-spaced windows.
 */
template <class F>
power_law fit_envelope(F &&f, double t0, double t1, double period, int windows = 16, int samples = 32)
{
    if (!(period > 0.0) || !(t1 - period > t0) || windows < 3 || samples < 4)
        throw domain_error("fit_envelope: invalid window layout");
    std::vector<double> x, y;
    for (int i = 0; i < windows; ++i) {
        const double ts = t0 * std::pow((t1 - period) / t0, double(i) / (windows - 1));
        double best = 0.0, tbest = ts;
        for (int j = 0; j < samples; ++j) {
            const double t = ts + period * j / samples;
            const double v = std::abs(f(t));
            if (v > best) {
                best = v;
                tbest = t;
            }
        }
        if (!(best > 0.0))
            throw data_quality_error("fit_envelope: vanishing window");
        x.push_back(std::log(tbest));
        y.push_back(std::log(best));
    }
    const line l = fit_line(x, y);
    return {l.slope, std::exp(l.intercept), l.slope_error};
}

/** \brief Angular frequency from the sign changes of f sampled with step dt on [t0, t1]. */
template <class F>
double zero_crossing_frequency(F &&f, double t0, double t1, double dt)
{
    std::vector<double> crossings;
    double tp = t0, fp = f(t0);
    for (double t = t0 + dt; t <= t1; t += dt) {
        const double v = f(t);
        if ((fp < 0.0) != (v < 0.0))
            crossings.push_back(tp + dt * fp / (fp - v));
        tp = t;
        fp = v;
    }
    if (crossings.size() < 3)
        throw data_quality_error("zero_crossing_frequency: fewer than three crossings");
    const double span = crossings.back() - crossings.front();
    return pi * double(crossings.size() - 1) / span;
}

} // namespace parion::fit
