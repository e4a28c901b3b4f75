#pragma once

#include "error.hpp"
#include "model1d.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

namespace parion {

/**
 * \brief Relative perturbation amplitude eta(t) for t >= 0.
 *
 * Rectangular pulses and trains are piecewise constant. Sampled programs are
 * either held constant between samples or interpolated linearly, and vanish
 * outside the sampled range.
 */
class pulse_program {
public:
    enum class kind { rect, train, sampled };
    enum class interpolation { hold, linear };

    static pulse_program rect(double r, double tau = std::numeric_limits<double>::infinity())
    {
        if (!(tau >= 0.0))
            throw domain_error("pulse_program: tau must be >= 0");
        pulse_program p;
        p.kind_ = kind::rect;
        p.r_ = r;
        p.tau_ = tau;
        return p;
    }

    static pulse_program train(double r, double tau, double sigma, int n_pulses)
    {
        if (!(tau > 0.0) || !(sigma > tau) || n_pulses < 1)
            throw domain_error("pulse_program: need 0 < tau < sigma and n_pulses >= 1");
        pulse_program p;
        p.kind_ = kind::train;
        p.r_ = r;
        p.tau_ = tau;
        p.sigma_ = sigma;
        p.n_ = n_pulses;
        return p;
    }

    static pulse_program sampled(std::vector<double> t, std::vector<double> eta,
                                 interpolation rule = interpolation::linear)
    {
        if (t.size() != eta.size() || t.empty())
            throw domain_error("pulse_program: sample columns must be non-empty and equal length");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]))
                throw domain_error("pulse_program: sample times must be strictly increasing");
        if (t.front() < 0.0)
            throw domain_error("pulse_program: sample times must be >= 0");
        pulse_program p;
        p.kind_ = kind::sampled;
        p.t_ = std::move(t);
        p.eta_ = std::move(eta);
        p.rule_ = rule;
        return p;
    }

    kind type() const { return kind_; }
    double amplitude() const { return r_; }
    double tau() const { return tau_; }
    double sigma() const { return sigma_; }
    int pulses() const { return n_; }

    /** \brief eta on the open interval to the right of t. */
    double right(double t) const { return value(t, true); }
    /** \brief eta on the open interval to the left of t. */
    double left(double t) const { return value(t, false); }

    /** \brief Whether eta can be nonzero just after t, up to the next breakpoint. */
    bool active_after(double t) const
    {
        if (kind_ == kind::sampled && rule_ == interpolation::linear)
            return t >= t_.front() && t < t_.back();
        return right(t) != 0.0;
    }

    /**
     * \brief Points in [0, t_end] where eta may jump, always including 0 and t_end.
     */
    std::vector<double> breakpoints(double t_end) const
    {
        std::vector<double> b{0.0};
        switch (kind_) {
        case kind::rect:
            if (tau_ < t_end)
                b.push_back(tau_);
            break;
        case kind::train:
            for (int n = 0; n < n_; ++n) {
                const double s = n * sigma_;
                if (s >= t_end)
                    break;
                if (s > 0.0)
                    b.push_back(s);
                if (s + tau_ < t_end)
                    b.push_back(s + tau_);
            }
            break;
        case kind::sampled:
            if (rule_ == interpolation::hold) {
                for (double s : t_)
                    if (s > 0.0 && s < t_end)
                        b.push_back(s);
            } else {
                if (t_.front() > 0.0 && t_.front() < t_end)
                    b.push_back(t_.front());
                if (t_.back() < t_end)
                    b.push_back(t_.back());
            }
            break;
        }
        b.push_back(t_end);
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

private:
    double value(double t, bool from_right) const
    {
        switch (kind_) {
        case kind::rect:
            return (from_right ? (t >= 0.0 && t < tau_) : (t > 0.0 && t <= tau_)) ? r_ : 0.0;
        case kind::train: {
            if (from_right ? t < 0.0 : t <= 0.0)
                return 0.0;
            const double eps = 1e-12 * std::max(1.0, t);
            double n = std::floor((t + eps) / sigma_);
            double x = t - n * sigma_;
            if (!from_right && std::abs(x) <= eps) {
                n -= 1.0;
                x = sigma_;
            }
            if (n >= n_)
                return 0.0;
            return (from_right ? x < tau_ - eps : x <= tau_ + eps) ? r_ : 0.0;
        }
        case kind::sampled: {
            const double a = t_.front(), b = t_.back();
            if (from_right ? (t < a || t >= b) : (t <= a || t > b))
                return 0.0;
            auto it = from_right ? std::upper_bound(t_.begin(), t_.end(), t)
                                 : std::lower_bound(t_.begin(), t_.end(), t);
            const std::size_t i = std::size_t(it - t_.begin());
            if (rule_ == interpolation::hold)
                return eta_[i - 1];
            const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
            return eta_[i - 1] + w * (eta_[i] - eta_[i - 1]);
        }
        }
        return 0.0;
    }

    kind kind_ = kind::rect;
    double r_ = 0.0, tau_ = 0.0, sigma_ = 1.0;
    int n_ = 1;
    std::vector<double> t_, eta_;
    interpolation rule_ = interpolation::linear;
};

/** \brief The 1D memory kernel: constant part 2i plus M(s). */
struct kernel_1d {
    cplx constant_part() const { return 2.0 * I; }
    cplx theta_coefficient() const { return 2.0 * I; }
    cplx memory(double s) const { return specfun::kernel_M(s); }

    /** \brief int M and int (s - s_a) M over [s_a, s_b]. */
    std::pair<cplx, cplx> moments(double s_a, double s_b) const
    {
        const double h = s_b - s_a;
        if (s_a < 4.0 * h) {
            auto [a0, a1] = specfun::kernel_M_moments(s_b);
            auto [b0, b1] = specfun::kernel_M_moments(s_a);
            const cplx m0 = a0 - b0;
            return {m0, (a1 - b1) - s_a * m0};
        }
        // Gauss-Legendre converges like (4 s_a / h)^{-2n} away from the singularity
        static const quad::gauss_legendre g2(2), g3(3), g4(4), g6(6);
        const double ratio = s_a / h;
        const quad::gauss_legendre &gl = ratio > 1000 ? g2 : ratio > 100 ? g3 : ratio > 10 ? g4 : g6;
        cplx m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double x = 0.5 * h * (1.0 + gl.x[i]);
            const cplx v = specfun::kernel_M(s_a + x) * (0.5 * h * gl.w[i]);
            m0 += v;
            m1 += v * x;
        }
        return {m0, m1};
    }
};

struct volterra_options {
    double step = 0.01;
    double tolerance = 1e-6;
    /** \brief Length of the graded mesh after each jump of eta (capped by the interval). */
    double grading_length = 0.5;
    /** \brief Segments older than this lag are dropped; infinite keeps the full history. */
    double memory_cutoff = std::numeric_limits<double>::infinity();
};

/** \brief Y(t) on the solver mesh with one-sided values at every node. */
struct y_solution {
    std::vector<double> t;
    std::vector<cplx> y_left, y_right;
    std::vector<cplx> theta;
    /** \brief active[j] is true when Y is nonzero on (t_j, t_{j+1}). */
    std::vector<char> active;
    cplx theta_coefficient = 2.0 * I;

    /** \brief theta at an arbitrary time within the solved range. */
    cplx theta_at(double tq) const
    {
        if (tq <= t.front())
            return theta.front();
        auto it = std::upper_bound(t.begin(), t.end(), tq);
        if (it == t.end())
            return theta.back();
        const std::size_t j = std::size_t(it - t.begin()) - 1;
        if (!active[j])
            return theta[j];
        const double h = t[j + 1] - t[j], x = tq - t[j];
        const cplx a = y_right[j], b = y_left[j + 1];
        return theta[j] + theta_coefficient * (a * x + (b - a) * x * x / (2 * h));
    }

    /** \brief int Y(t) e^{i w t} dt over [t_from, t_to] (node-aligned), exact for linear Y. */
    cplx fourier(double w, std::size_t from = 0, std::size_t to = std::size_t(-1)) const
    {
        to = std::min(to, t.size() - 1);
        cplx s = 0.0;
        for (std::size_t j = from; j < to; ++j) {
            if (!active[j])
                continue;
            const double h = t[j + 1] - t[j];
            const double z = w * h;
            // E0 = int_0^1 e^{izx} dx, E1 = int_0^1 x e^{izx} dx
            cplx E0, E1;
            if (std::abs(z) < 0.1) {
                E0 = E1 = 0.0;
                cplx term = 1.0;
                for (int n = 0; n < 12; ++n) {
                    E0 += term / double(n + 1);
                    E1 += term / double(n + 2);
                    term *= I * z / double(n + 1);
                }
            } else {
                const cplx e = std::exp(I * z);
                E0 = (e - 1.0) / (I * z);
                E1 = e / (I * z) + (e - 1.0) / (z * z);
            }
            const cplx a = y_right[j], b = y_left[j + 1];
            s += std::exp(I * w * t[j]) * h * (a * E0 + (b - a) * E1);
        }
        return s;
    }
};

/**
 * \brief Product-integration solver for Y = eta (1 + int [c0 + M(t-t')] Y dt').
 *
 * Y is piecewise linear between nodes. Every node where eta jumps is a mesh
 * node, followed by a quadratically graded stretch that restores second order
 * against the s^{-1/2} kernel singularity. The solve can be advanced in stages;
 * stopping at a breakpoint and continuing reproduces a single solve exactly.
 */
template <class Kernel>
class volterra_solver {
public:
    volterra_solver(pulse_program program, Kernel kernel, volterra_options opt = {})
        : program_(std::move(program)), kernel_(std::move(kernel)), opt_(opt)
    {
        if (!(opt_.step > 0.0))
            throw domain_error("volterra: step must be positive");
        sol_.theta_coefficient = kernel_.theta_coefficient();
        sol_.t.push_back(0.0);
        sol_.y_left.push_back(0.0);
        sol_.y_right.push_back(program_.right(0.0));
        sol_.theta.push_back(1.0);
    }

    const y_solution &solution() const { return sol_; }
    const Kernel &kernel() const { return kernel_; }

    /** \brief Extend the solution so that it covers [0, t_end]. */
    const y_solution &advance(double t_end)
    {
        if (!(t_end >= opt_.step))
            throw domain_error("volterra: t_end must be at least one step");
        while (sol_.t.back() < t_end * (1 - 1e-14)) {
            if (mesh_pos_ < mesh_.size()) {
                push_node(mesh_[mesh_pos_++], true);
                continue;
            }
            const double t0 = sol_.t.back();
            if (open_ended_) {
                push_node(uniform_origin_ + opt_.step * double(++uniform_count_), true);
                continue;
            }
            const double t1 = next_breakpoint(t0);
            if (!program_.active_after(t0)) {
                push_node(std::isfinite(t1) ? t1 : t_end, false);
                continue;
            }
            mesh_ = interval_mesh(t0, t1);
            mesh_pos_ = 1;
            open_ended_ = !std::isfinite(t1);
            uniform_origin_ = mesh_.back();
            uniform_count_ = 0;
        }
        return sol_;
    }

    std::size_t moment_cache_size() const { return cache_.size(); }

private:
    double next_breakpoint(double t0) const
    {
        const double inf = std::numeric_limits<double>::infinity();
        const double probe = program_.type() == pulse_program::kind::train ? t0 + program_.sigma() + 1.0 : inf;
        for (double x : program_.breakpoints(probe))
            if (x > t0)
                return x;
        return inf;
    }

    std::vector<double> interval_mesh(double t0, double t1) const
    {
        const double h = opt_.step;
        const double span = t1 - t0;
        const double L = std::min(opt_.grading_length, span);
        const int m = std::max(2, int(std::ceil(2.0 * L / h)));
        std::vector<double> nodes;
        nodes.reserve(m + 1);
        for (int i = 0; i <= m; ++i) {
            const double u = double(i) / m;
            nodes.push_back(t0 + L * u * u);
        }
        if (!std::isfinite(t1))
            return nodes; // continued with fixed steps in advance()
        const double rest = t1 - (t0 + L);
        if (rest > 1e-12 * std::max(1.0, t1)) {
            const int n = std::max(1, int(std::ceil(rest / h - 1e-9)));
            for (int i = 1; i < n; ++i)
                nodes.push_back(t0 + L + rest * i / n);
            nodes.push_back(t1);
        } else {
            nodes.back() = t1;
        }
        return nodes;
    }

    std::pair<cplx, cplx> moments(double s_a, double s_b)
    {
        const auto key = std::make_pair(std::llround(s_a * 4294967296.0), std::llround(s_b * 4294967296.0));
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        auto m = kernel_.moments(s_a, s_b);
        cache_.emplace(key, m);
        return m;
    }

    void push_node(double tn, bool active_segment)
    {
        const std::size_t n = sol_.t.size();
        const double tp = sol_.t.back();
        const double eta_l = active_segment ? program_.left(tn) : 0.0;
        const double eta_r = program_.right(tn);
        sol_.t.push_back(tn);
        sol_.active.push_back(active_segment ? 1 : 0);
        if (!active_segment && eta_r == 0.0) {
            sol_.y_left.push_back(0.0);
            sol_.y_right.push_back(0.0);
            sol_.theta.push_back(sol_.theta.back());
            return;
        }
        const cplx c0 = kernel_.constant_part();
        cplx known = 0.0, diag = 0.0;
        for (std::size_t j = 0; j + 1 <= n; ++j) {
            if (!sol_.active[j])
                continue;
            const double a = sol_.t[j], b = sol_.t[j + 1];
            const double s_a = tn - b, s_b = tn - a, h = b - a;
            std::pair<cplx, cplx> mm{0.0, 0.0};
            if (s_a <= opt_.memory_cutoff)
                mm = moments(s_a, s_b);
            const auto [m0, m1] = mm;
            const cplx w_start = m1 / h + c0 * (0.5 * h);
            const cplx w_end = (h * m0 - m1) / h + c0 * (0.5 * h);
            known += w_start * sol_.y_right[j];
            if (j + 1 == n)
                diag = w_end;
            else
                known += w_end * sol_.y_left[j + 1];
        }
        const cplx denom = 1.0 - eta_l * diag;
        if (std::abs(denom) < 1e-12)
            throw numerical_failure("volterra: implicit step is singular at t = " + std::to_string(tn));
        const cplx yl = eta_l * (1.0 + known) / denom;
        const cplx In = known + diag * yl;
        const cplx yr = eta_r * (1.0 + In);
        // residual of the node equation as a guard against loss of accuracy
        const cplx res = yl - eta_l * (1.0 + known + diag * yl);
        if (std::abs(res) > opt_.tolerance * std::max(1.0, std::abs(yl)))
            throw numerical_failure("volterra: step residual above tolerance at t = " + std::to_string(tn));
        sol_.y_left.push_back(yl);
        sol_.y_right.push_back(yr);
        const cplx seg = active_segment ? 0.5 * (tn - tp) * (sol_.y_right[n - 1] + yl) : cplx(0.0);
        sol_.theta.push_back(sol_.theta.back() + sol_.theta_coefficient * seg);
    }

    struct key_hash {
        std::size_t operator()(const std::pair<long long, long long> &k) const
        {
            return std::hash<long long>()(k.first * 0x9E3779B97F4A7C15LL + k.second);
        }
    };

    pulse_program program_;
    Kernel kernel_;
    volterra_options opt_;
    y_solution sol_;
    std::vector<double> mesh_;
    std::size_t mesh_pos_ = 0;
    bool open_ended_ = false;
    double uniform_origin_ = 0.0;
    long uniform_count_ = 0;
    std::unordered_map<std::pair<long long, long long>, std::pair<cplx, cplx>, key_hash> cache_;
};

namespace volterra {

/** \brief Full 1D problem description. */
struct problem {
    pulse_program forcing = pulse_program::rect(0.0);
    double t_end = 1.0;
    volterra_options options{};
};

inline y_solution solve(const problem &p)
{
    volterra_solver<kernel_1d> s(p.forcing, kernel_1d{}, p.options);
    return s.advance(p.t_end);
}

/** \brief Solve with a caller-supplied kernel (constant part, theta coefficient, segment moments). */
template <class Kernel>
y_solution solve(const problem &p, Kernel kernel)
{
    volterra_solver<Kernel> s(p.forcing, std::move(kernel), p.options);
    return s.advance(p.t_end);
}

/**
 * \brief theta at the requested times and Theta(k) at the final solved time.
 */
inline amplitude_record amplitudes_from_y(const y_solution &y, const std::vector<double> &times,
                                          const std::vector<double> &momenta)
{
    amplitude_record rec;
    rec.path = amplitude_path::volterra;
    rec.times = times;
    for (double t : times)
        rec.theta.push_back(y.theta_at(t));
    rec.momenta = momenta;
    for (double k : momenta) {
        const double ak = std::abs(k);
        rec.Theta.push_back(std::sqrt(2 / pi) * ak / (1.0 - I * ak) * y.fourier(1 + k * k));
    }
    return rec;
}

/** \brief sqrt(is - 1) on the branch with positive imaginary part. */
inline cplx branch_sqrt(cplx s)
{
    const cplx w = I * s - 1.0;
    return I * std::sqrt(-w);
}

/** \brief Laplace transform of Y for the rectangular program of amplitude r. */
inline cplx laplace_rect(cplx s, double r)
{
    if (s.real() == 0.0 && s.imag() < -1.0)
        throw domain_error("laplace_rect: s lies on the branch cut");
    if (r == 0.0)
        return 0.0;
    return r / (s - r * (I + branch_sqrt(s)));
}

/** \brief Pole s* = i r (r+2) of the transform, present only for r > -1. */
inline std::optional<cplx> laplace_pole(double r)
{
    if (r > -1.0 && r != 0.0)
        return I * r * (r + 2);
    return std::nullopt;
}

/**
 * \brief theta(t) by inverting the Laplace transform.
 *
 * The cut is swung to the ray s = -i + rho e^{i psi}, psi = -3pi/4, so the
 * integrand decays like a Gaussian along it; the pole (if any) and the
 * s = 0 contribution are added as residues.
 */
inline cplx invert_laplace_theta(double r, double t, double tol = 1e-13)
{
    if (!(t > 0.0) || t > 50.0)
        throw domain_error("invert_laplace_theta: requires 0 < t <= 50");
    if (r == 0.0)
        return 1.0;
    const double psi = -0.75 * pi, beta = psi + 0.5 * pi;
    const cplx ep = std::polar(1.0, psi), eb = std::polar(1.0, 0.5 * beta);
    auto yt = [&](cplx s, cplx v) { return r / (s - r * (I + v)); };
    cplx res = 2.0 * I * yt(0.0, I);
    if (auto sp = laplace_pole(r)) {
        const double dp = 1.0 - r / (2.0 * std::abs(r + 1));
        res += 2.0 * I * std::exp(*sp * t) * r / (dp * *sp);
    }
    auto f = [&](double x) {
        const cplx s = -I + x * x * ep;
        const cplx vb = eb * x;
        const cplx e = std::exp(s * t) / s;
        return (e * yt(s, vb) - e * yt(s, -vb)) * (2.0 * x);
    };
    auto q = quad::gk15_semi_infinite(f, 0.0, 1.0 / std::sqrt(1.0 + t), tol, 1e-12, 20000);
    if (!q.converged)
        throw numerical_failure("invert_laplace_theta: contour quadrature did not converge");
    return 1.0 + res - ep / pi * q.value;
}

} // namespace volterra
} // namespace parion
