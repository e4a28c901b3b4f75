#include <parion/model1d.hpp>
#include <parion/model3d.hpp>
#include <parion/train.hpp>
#include <parion/volterra.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

using namespace parion;
using json = nlohmann::ordered_json;

namespace {

/** \brief Input that the user can fix: bad ranges, malformed files. */
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using cell = std::variant<std::monostate, double, std::string>;

struct table {
    std::vector<std::string> columns;
    std::vector<std::vector<cell>> rows;
    json meta = json::object();
};

struct settings {
    double tolerance = 1e-9;
    double step = 0.01;
    double k_max = 50.0;
    double t_switch = model1d::t_switch_default();
    std::string format = "csv";
    std::string output;
    /** \brief The train command defaults to tau/8 unless --step is given. */
    bool step_given = false;

    json to_json() const
    {
        return {{"tolerance", tolerance}, {"step", step}, {"kmax", k_max}, {"tswitch", t_switch}};
    }
    volterra_options solver() const
    {
        volterra_options o;
        o.step = step;
        o.tolerance = tolerance;
        return o;
    }
    model1d::spectral_settings spectral() const { return {k_max, tolerance}; }
};

std::string number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write(const table &t, const settings &s, std::ostream &os)
{
    if (s.format == "json") {
        json rows = json::array();
        for (const auto &r : t.rows) {
            json row = json::array();
            for (const auto &c : r) {
                if (auto d = std::get_if<double>(&c))
                    row.push_back(*d);
                else if (auto str = std::get_if<std::string>(&c))
                    row.push_back(*str);
                else
                    row.push_back(nullptr);
            }
            rows.push_back(row);
        }
        os << json{{"metadata", t.meta}, {"columns", t.columns}, {"rows", rows}}.dump(1) << '\n';
        return;
    }
    os << "# " << t.meta.dump() << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto &r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i)
                os << ',';
            if (auto d = std::get_if<double>(&r[i]))
                os << number(*d);
            else if (auto str = std::get_if<std::string>(&r[i]))
                os << *str;
        }
        os << '\n';
    }
}

std::vector<double> grid(double a, double b, double d)
{
    if (!(d > 0.0) || !(b >= a))
        throw usage_error("invalid range: need start <= stop and a positive step");
    std::vector<double> g;
    const long n = std::lround(std::floor((b - a) / d + 1e-9));
    for (long i = 0; i <= n; ++i)
        g.push_back(a + double(i) * d);
    return g;
}

json base_meta(const std::string &command, const settings &s)
{
    return {{"command", command}, {"units", "hbar = 2m = 1, times in 1/omega0, energies in E0"}, {"settings", s.to_json()}};
}

// survival -------------------------------------------------------------------

struct survival_args {
    std::vector<double> r{-1.0};
    double t0 = 0.0, t1 = 10.0, dt = 0.1;
    std::string path = "closed_form";
};

table cmd_survival(const survival_args &a, const settings &s)
{
    table t;
    t.columns = {"r", "t", "survival", "path"};
    const bool normalized = std::any_of(a.r.begin(), a.r.end(), [](double r) { return r < -1.0; });
    if (normalized)
        t.columns.push_back("survival_over_asymptotic");
    const auto times = grid(a.t0, a.t1, a.dt);
    t.meta = base_meta("survival", s);
    t.meta["parameters"] = {{"r", a.r}, {"t0", a.t0}, {"t1", a.t1}, {"dt", a.dt}, {"path", a.path}};
    for (double r : a.r) {
        std::optional<y_solution> y;
        if (a.path == "volterra")
            y = volterra::solve({pulse_program::rect(r), a.t1, s.solver()});
        for (double tm : times) {
            cplx th;
            amplitude_path p = amplitude_path::closed_form;
            if (a.path == "closed_form")
                th = model1d::theta_rect(r, tm, std::min(1e-10, s.tolerance));
            else if (a.path == "volterra") {
                th = y->theta_at(tm);
                p = amplitude_path::volterra;
            } else if (a.path == "laplace") {
                th = tm == 0.0 ? cplx(1.0) : volterra::invert_laplace_theta(r, tm);
                p = amplitude_path::laplace_inversion;
            } else {
                th = model1d::theta_asymptotic(r, tm, s.t_switch);
                p = amplitude_path::asymptotic;
            }
            std::vector<cell> row{r, tm, std::norm(th), std::string(to_string(p))};
            if (normalized) {
                cell c;
                if (r < -1.0 && tm > 0.0) {
                    try {
                        c = std::norm(th / model1d::theta_asymptotic(r, tm, 0.0));
                    } catch (const domain_error &) {
                        // the asymptotic form is undefined this early; leave the cell empty
                    }
                }
                row.push_back(c);
            }
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

// spectrum -------------------------------------------------------------------

struct spectrum_args {
    double r = -1.0;
    std::vector<double> tau{1.0};
    double k0 = 0.0, k1 = 10.0, dk = 0.05;
};

table cmd_spectrum(const spectrum_args &a, const settings &s)
{
    table t;
    t.columns = {"tau", "k", "Theta2"};
    t.meta = base_meta("spectrum", s);
    t.meta["parameters"] = {{"r", a.r}, {"tau", a.tau}, {"k0", a.k0}, {"k1", a.k1}, {"dk", a.dk}};
    const auto ks = grid(a.k0, a.k1, a.dk);
    json peaks = json::array();
    for (double tau : a.tau) {
        double best = -1.0, kbest = 0.0;
        for (double k : ks) {
            const double v = std::norm(model1d::spectrum_rect(k, a.r, tau));
            if (v > best) {
                best = v;
                kbest = k;
            }
            t.rows.push_back({tau, k, v});
        }
        peaks.push_back({{"tau", tau}, {"k_peak", kbest}});
    }
    t.meta["peaks"] = peaks;
    return t;
}

// energy ---------------------------------------------------------------------

struct energy_args {
    std::vector<double> r{-1.0};
    std::vector<std::string> tau{"inf"};
};

table cmd_energy(const energy_args &a, const settings &s)
{
    table t;
    t.columns = {"r", "tau", "energy"};
    t.meta = base_meta("energy", s);
    t.meta["parameters"] = {{"r", a.r}, {"tau", a.tau}};
    for (double r : a.r)
        for (const auto &ts : a.tau) {
            if (ts == "inf") {
                t.rows.push_back({r, std::string("inf"), model1d::ejected_energy_inf(r)});
                continue;
            }
            double tau;
            try {
                std::size_t used = 0;
                tau = std::stod(ts, &used);
                if (used != ts.size())
                    throw std::invalid_argument(ts);
            } catch (const std::exception &) {
                throw usage_error("energy: --tau expects numbers or 'inf', got '" + ts + "'");
            }
            t.rows.push_back({r, tau, model1d::ejected_energy(r, tau, s.spectral())});
        }
    return t;
}

// train ----------------------------------------------------------------------

table cmd_train(const train::train_spec &spec, const settings &s)
{
    spec.validate();
    table t;
    t.columns = {"n", "survival_full", "survival_simplified", "exp_minus_2gamma_n", "within_horizon"};
    const auto full = train::full_train_survival(spec, s.step_given ? s.step : 0.0);
    const auto simple = train::simplified_train(spec);
    t.meta = base_meta("train", s);
    t.meta["parameters"] = {{"r", spec.r}, {"tau", spec.tau}, {"sigma", spec.sigma}, {"n", spec.n_pulses}};
    t.meta["rho"] = {full.rho.real(), full.rho.imag()};
    t.meta["gamma"] = full.gamma;
    t.meta["validity_horizon"] = full.validity_horizon;
    const std::size_t n = full.theta.size();
    if (n >= 3 && spec.r != 0.0) {
        const std::size_t last = std::min<std::size_t>(n, std::size_t(std::max<long>(full.validity_horizon, 3)));
        const auto f = train::fit_log_survival(full.theta, 0, last);
        t.meta["fitted_rate"] = -f.slope;
        t.meta["fitted_rate_error"] = f.slope_error;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double k = double(i + 1);
        t.rows.push_back({k, std::norm(full.theta[i]), std::norm(simple.theta[i]), std::exp(-2.0 * full.gamma * k),
                          double(long(i + 1) <= full.validity_horizon ? 1 : 0)});
    }
    return t;
}

// custom ---------------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> read_program(const std::string &file)
{
    std::ifstream in(file);
    if (!in)
        throw usage_error("custom: cannot open '" + file + "'");
    std::vector<double> ts, es;
    std::string line;
    int lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t, e;
        std::string extra;
        const bool ok = bool(ss >> t >> e) && !(ss >> extra);
        if (!ok) {
            const bool header = first && line.find_first_of("0123456789") == std::string::npos;
            first = false;
            if (header)
                continue;
            throw usage_error(file + ":" + std::to_string(lineno) + ": expected two numeric columns t, eta");
        }
        first = false;
        if (!ts.empty() && !(t > ts.back()))
            throw usage_error(file + ":" + std::to_string(lineno) + ": times must be strictly increasing");
        ts.push_back(t);
        es.push_back(e);
    }
    if (ts.empty())
        throw usage_error("custom: '" + file + "' holds no samples");
    return {ts, es};
}

struct custom_args {
    std::string file;
    double t_end = 0.0;
    std::vector<double> three_d;
    std::string interpolation = "linear";
    double dt = 0.0;
};

table cmd_custom(const custom_args &a, const settings &s)
{
    auto [ts, es] = read_program(a.file);
    const double t_end = a.t_end > 0.0 ? a.t_end : ts.back();
    const auto rule =
        a.interpolation == "hold" ? pulse_program::interpolation::hold : pulse_program::interpolation::linear;
    const auto program = pulse_program::sampled(ts, es, rule);
    table t;
    t.columns = {"t", "theta_re", "theta_im", "survival"};
    t.meta = base_meta("custom", s);
    t.meta["parameters"] = {{"file", a.file}, {"samples", ts.size()}, {"t_end", t_end}, {"interpolation", a.interpolation}};
    std::vector<double> times;
    std::vector<cplx> theta;
    if (!a.three_d.empty()) {
        atom3d atom(a.three_d[0], a.three_d[1]);
        t.meta["atom3d"] = {{"Q", atom.Q}, {"a", atom.a}, {"p", atom.p()}};
        auto rec = model3d::evolve3d(atom, program, 0, t_end, s.solver());
        times = rec.times;
        theta = rec.theta;
    } else {
        auto y = volterra::solve({program, t_end, s.solver()});
        for (std::size_t i = 0; i < y.t.size() && y.t[i] <= t_end * (1 + 1e-12); ++i) {
            times.push_back(y.t[i]);
            theta.push_back(y.theta[i]);
        }
    }
    if (a.dt > 0.0) {
        // resample on a uniform grid by linear interpolation between nodes
        std::vector<double> tt;
        std::vector<cplx> th;
        std::size_t j = 0;
        for (double tm : grid(0.0, t_end, a.dt)) {
            while (j + 2 < times.size() && times[j + 1] < tm)
                ++j;
            const double w = times[j + 1] > times[j] ? (tm - times[j]) / (times[j + 1] - times[j]) : 0.0;
            tt.push_back(tm);
            th.push_back(theta[j] + std::clamp(w, 0.0, 1.0) * (theta[j + 1] - theta[j]));
        }
        times = std::move(tt);
        theta = std::move(th);
    }
    for (std::size_t i = 0; i < times.size(); ++i)
        t.rows.push_back({times[i], theta[i].real(), theta[i].imag(), std::norm(theta[i])});
    return t;
}

// atom3d ---------------------------------------------------------------------

struct atom3d_args {
    double Q = 2.0, a = 1.0, r = -0.5;
    double T0 = 0.0, T1 = 10.0, dT = 0.1;
    std::string path = "projection";
};

table cmd_atom3d(const atom3d_args &a, const settings &s)
{
    atom3d atom(a.Q, a.a);
    table t;
    t.columns = {"T", "survival", "path"};
    t.meta = base_meta("atom3d", s);
    t.meta["units"] = "hbar = 2m = 1, lengths physical, T = p^2 t";
    t.meta["parameters"] = {{"Q", a.Q}, {"a", a.a}, {"r", a.r}, {"T0", a.T0}, {"T1", a.T1}, {"dT", a.dT}, {"path", a.path}};
    t.meta["p"] = atom.p();
    t.meta["omega0"] = atom.omega0();
    t.meta["bound_weight"] = model3d::bound_weight(atom, a.r);
    const auto q = a.r > -1.0 ? model3d::bound_momentum((1 + a.r) * a.Q, a.a, 0) : std::nullopt;
    t.meta["perturbed_bound_momentum"] = q ? json(*q) : json(nullptr);
    const auto times = grid(a.T0, a.T1, a.dT);
    if (a.path == "volterra") {
        auto y = volterra::solve({pulse_program::rect(a.r), a.T1, s.solver()},
                                 model3d::kernel_3d(atom, 0, a.T1 + s.step));
        for (double T : times)
            t.rows.push_back({T, std::norm(y.theta_at(T)), std::string("volterra")});
    } else if (a.path == "asymptotic") {
        for (double T : times)
            t.rows.push_back({T, std::norm(model3d::theta3d_asymptotic(atom, a.r, T)), std::string("asymptotic")});
    } else {
        for (double T : times)
            t.rows.push_back({T, std::norm(model3d::theta3d_rect(atom, a.r, T)), std::string("closed_form")});
    }
    return t;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"parion: ionization of a delta-potential atom by parametric perturbation"};
    app.require_subcommand(1);
    app.fallthrough();
    settings s;
    app.add_option("--tolerance", s.tolerance, "Quadrature / solver tolerance")->check(CLI::PositiveNumber);
    auto *step_opt = app.add_option("--step", s.step, "Volterra step in units of 1/omega0")->check(CLI::PositiveNumber);
    app.add_option("--kmax", s.k_max, "Momentum cutoff of spectral quadratures")->check(CLI::PositiveNumber);
    app.add_option("--tswitch", s.t_switch, "Earliest time accepted by the asymptotic path")->check(CLI::PositiveNumber);
    app.add_option("--format", s.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("-o,--output", s.output, "Output file (default stdout)");

    survival_args sv;
    auto *c_sv = app.add_subcommand("survival", "|theta(t)|^2 for rectangular pulses");
    c_sv->add_option("--r", sv.r, "Relative amplitudes")->delimiter(',');
    c_sv->add_option("--t0", sv.t0)->check(CLI::NonNegativeNumber);
    c_sv->add_option("--t1", sv.t1)->check(CLI::NonNegativeNumber);
    c_sv->add_option("--dt", sv.dt)->check(CLI::PositiveNumber);
    c_sv->add_option("--path", sv.path)->check(CLI::IsMember({"closed_form", "volterra", "laplace", "asymptotic"}));

    spectrum_args sp;
    auto *c_sp = app.add_subcommand("spectrum", "|Theta(k, tau)|^2 after a rectangular pulse");
    c_sp->add_option("--r", sp.r);
    c_sp->add_option("--tau", sp.tau, "Pulse durations")->delimiter(',');
    c_sp->add_option("--k0", sp.k0)->check(CLI::NonNegativeNumber);
    c_sp->add_option("--k1", sp.k1)->check(CLI::NonNegativeNumber);
    c_sp->add_option("--dk", sp.dk)->check(CLI::PositiveNumber);

    energy_args en;
    auto *c_en = app.add_subcommand("energy", "Kinetic energy of the ejected electrons");
    c_en->add_option("--r", en.r, "Relative amplitudes")->delimiter(',');
    c_en->add_option("--tau", en.tau, "Pulse durations or 'inf'")->delimiter(',');

    train::train_spec tr{1.0, 1e-3, 1.0, 200};
    auto *c_tr = app.add_subcommand("train", "Survival after a train of short pulses");
    c_tr->add_option("--r", tr.r);
    c_tr->add_option("--tau", tr.tau);
    c_tr->add_option("--sigma", tr.sigma);
    c_tr->add_option("--n", tr.n_pulses);

    custom_args cu;
    auto *c_cu = app.add_subcommand("custom", "theta(t) for a sampled program read from CSV (t, eta)");
    c_cu->add_option("file", cu.file)->required();
    c_cu->add_option("--t-end", cu.t_end, "End time (default: last sample)");
    c_cu->add_option("--three-d", cu.three_d, "Evolve the 3D shell atom with strength Q and radius a")->expected(2);
    c_cu->add_option("--interpolation", cu.interpolation)->check(CLI::IsMember({"linear", "hold"}));
    c_cu->add_option("--dt", cu.dt, "Resample the output on a uniform grid");

    atom3d_args at;
    auto *c_at = app.add_subcommand("atom3d", "Survival of the l = 0 shell atom under a rectangular pulse");
    c_at->add_option("--Q", at.Q);
    c_at->add_option("--a", at.a);
    c_at->add_option("--r", at.r);
    c_at->add_option("--T0", at.T0)->check(CLI::NonNegativeNumber);
    c_at->add_option("--T1", at.T1)->check(CLI::NonNegativeNumber);
    c_at->add_option("--dT", at.dT)->check(CLI::PositiveNumber);
    c_at->add_option("--path", at.path)->check(CLI::IsMember({"projection", "volterra", "asymptotic"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    s.step_given = step_opt->count() > 0;
    try {
        table t;
        if (*c_sv)
            t = cmd_survival(sv, s);
        else if (*c_sp)
            t = cmd_spectrum(sp, s);
        else if (*c_en)
            t = cmd_energy(en, s);
        else if (*c_tr)
            t = cmd_train(tr, s);
        else if (*c_cu)
            t = cmd_custom(cu, s);
        else
            t = cmd_atom3d(at, s);
        if (s.output.empty()) {
            write(t, s, std::cout);
        } else {
            std::ofstream out(s.output);
            if (!out)
                throw usage_error("cannot write '" + s.output + "'");
            write(t, s, out);
        }
    } catch (const usage_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const domain_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
