#include <catch_amalgamated.hpp>

#include <parion/model1d.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct run_result {
    int rc;
    std::string out;
};

run_result run(const std::string &args)
{
    const std::string cmd = std::string(PARION_CLI) + " " + args + " 2>&1";
    FILE *p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p))
        out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

// rows of a CSV table (metadata and header skipped), by column name
std::vector<std::map<std::string, std::string>> rows(const std::string &csv)
{
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> cols;
    std::vector<std::map<std::string, std::string>> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string x; std::getline(ss, x, ',');)
            f.push_back(x);
        if (cols.empty()) {
            cols = f;
            continue;
        }
        std::map<std::string, std::string> m;
        for (std::size_t i = 0; i < f.size() && i < cols.size(); ++i)
            m[cols[i]] = f[i];
        out.push_back(m);
    }
    return out;
}

double num(const std::map<std::string, std::string> &row, const std::string &c) { return std::stod(row.at(c)); }

std::string temp_file(const std::string &name, const std::string &content)
{
    const std::string path = std::string(CLI_TMP_DIR) + "/" + name;
    std::ofstream(path) << content;
    return path;
}

} // namespace

TEST_CASE("survival at r = 0 is one")
{
    auto r = run("survival --r 0 --t1 5 --dt 0.5");
    REQUIRE(r.rc == 0);
    auto t = rows(r.out);
    REQUIRE(t.size() == 11);
    for (auto &row : t)
        CHECK(num(row, "survival") == 1.0);
}

TEST_CASE("closed-form and volterra survival tables agree")
{
    auto a = rows(run("survival --r -1,1 --t1 5 --dt 0.25").out);
    auto b = rows(run("survival --r -1,1 --t1 5 --dt 0.25 --path volterra --step 0.005").out);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() == 42);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i]["path"] == "volterra");
        CHECK(std::abs(num(a[i], "survival") - num(b[i], "survival")) < 1e-3);
    }
}

TEST_CASE("free decay tail: survival * pi t / 4 -> 1")
{
    auto t = rows(run("survival --r -1 --t0 400 --t1 500 --dt 50").out);
    for (auto &row : t)
        CHECK(num(row, "survival") * parion::pi * num(row, "t") / 4.0 == Catch::Approx(1.0).epsilon(0.01));
}

TEST_CASE("spectrum peak moves to smaller k for longer pulses")
{
    auto r = run("spectrum --r -1 --tau 0,1,4 --k0 0 --k1 4 --dk 0.01");
    REQUIRE(r.rc == 0);
    std::map<double, std::pair<double, double>> peak;
    for (auto &row : rows(r.out)) {
        const double tau = num(row, "tau"), v = num(row, "Theta2");
        if (tau == 0.0)
            CHECK(v == 0.0);
        if (v > peak[tau].second)
            peak[tau] = {num(row, "k"), v};
    }
    CHECK(peak[4.0].first < peak[1.0].first);
}

TEST_CASE("energy table")
{
    auto t = rows(run("energy --r -100,-1,100 --tau inf").out);
    REQUIRE(t.size() == 3);
    CHECK(num(t[1], "energy") == Catch::Approx(1.0).epsilon(1e-10));
    CHECK(num(t[2], "energy") / num(t[0], "energy") == Catch::Approx(3.0).epsilon(0.05));
    auto m = rows(run("energy --r 1,5,10,20,50 --tau inf").out);
    for (std::size_t i = 1; i < m.size(); ++i)
        CHECK(num(m[i], "energy") > num(m[i - 1], "energy"));
    auto n = rows(run("energy --r -50,-20,-10,-5,-1 --tau inf").out);
    for (std::size_t i = 1; i < n.size(); ++i)
        CHECK(num(n[i], "energy") < num(n[i - 1], "energy"));
}

TEST_CASE("train table")
{
    auto zero = rows(run("train --r 0 --n 4").out);
    REQUIRE(zero.size() == 4);
    for (auto &row : zero) {
        CHECK(num(row, "survival_full") == 1.0);
        CHECK(num(row, "survival_simplified") == 1.0);
    }
    auto r = run("train --r 1 --tau 1e-3 --sigma 1 --n 200 --format json");
    REQUIRE(r.rc == 0);
    const auto pos = r.out.find("\"fitted_rate\":");
    REQUIRE(pos != std::string::npos);
    const double rate = std::stod(r.out.substr(pos + 14));
    const double gamma = std::stod(r.out.substr(r.out.find("\"gamma\":") + 8));
    CHECK(rate / (2 * gamma) == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("custom programs")
{
    SECTION("constant column matches the survival command")
    {
        std::string csv = "# constant program\nt,eta\n";
        for (int i = 0; i <= 30; ++i)
            csv += std::to_string(0.1 * i) + ",0.5\n";
        auto f = temp_file("const.csv", csv);
        auto a = rows(run("custom " + f + " --dt 0.5").out);
        auto b = rows(run("survival --r 0.5 --t1 3 --dt 0.5").out);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(num(a[i], "survival") - num(b[i], "survival")) < 1e-3);
    }
    SECTION("zero column gives theta = 1")
    {
        auto f = temp_file("zero.csv", "0 0\n1 0\n2 0\n");
        for (auto &row : rows(run("custom " + f).out)) {
            CHECK(num(row, "theta_re") == 1.0);
            CHECK(num(row, "theta_im") == 0.0);
        }
    }
    SECTION("sampled train matches the train command")
    {
        // two pulses of width 0.05 and period 1, held piecewise constant
        auto f = temp_file("train.csv", "0,1\n0.05,0\n1,1\n1.05,0\n2,0\n");
        auto c = rows(run("custom " + f + " --interpolation hold --step 0.00625").out);
        auto t = rows(run("train --r 1 --tau 0.05 --sigma 1 --n 2").out);
        double at_end = 0.0;
        for (auto &row : c)
            if (std::abs(num(row, "t") - 1.05) < 1e-9)
                at_end = num(row, "survival");
        CHECK(at_end == Catch::Approx(num(t[1], "survival_full")).epsilon(1e-4));
    }
    SECTION("3D shell atom")
    {
        auto f = temp_file("three.csv", "0,-0.5\n1,-0.5\n");
        auto a = rows(run("custom " + f + " --three-d 2 1 --dt 0.5").out);
        auto b = rows(run("atom3d --Q 2 --a 1 --r -0.5 --T1 1 --dT 0.5").out);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(num(a[i], "survival") - num(b[i], "survival")) < 2e-3);
    }
    SECTION("malformed input reports the line")
    {
        auto f = temp_file("bad.csv", "t,eta\n0,1\n0.5,abc\n");
        auto r = run("custom " + f);
        CHECK(r.rc == 2);
        CHECK(r.out.find("bad.csv:3") != std::string::npos);
        auto g = temp_file("order.csv", "0,1\n0.5,1\n0.5,2\n");
        auto s = run("custom " + g);
        CHECK(s.rc == 2);
        CHECK(s.out.find("order.csv:3") != std::string::npos);
    }
}

TEST_CASE("exit codes and determinism")
{
    CHECK(run("").rc == 2);
    CHECK(run("survival --nope").rc == 2);
    CHECK(run("survival --format xml").rc == 2);
    CHECK(run("train --tau 0.2").rc == 2);
    CHECK(run("custom /nonexistent.csv").rc == 2);
    CHECK(run("energy --r 1 --tau 1 --kmax 1").rc == 3);
    CHECK(run("survival --help").rc == 0);
    const auto a = run("survival --r -2,0.5 --t1 3 --tolerance 1e-8 --kmax 40 --step 0.02 --tswitch 60");
    const auto b = run("survival --r -2,0.5 --t1 3 --tolerance 1e-8 --kmax 40 --step 0.02 --tswitch 60");
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"tolerance\":1e-08") != std::string::npos);
    CHECK(a.out.find("\"kmax\":40.0") != std::string::npos);
    CHECK(a.out.find("\"tswitch\":60.0") != std::string::npos);
    CHECK(a.out.find("survival_over_asymptotic") != std::string::npos);
}

TEST_CASE("output file and json format")
{
    const std::string path = std::string(CLI_TMP_DIR) + "/out.json";
    REQUIRE(run("atom3d --T1 0.2 --dT 0.1 --format json -o " + path).rc == 0);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("\"columns\"") != std::string::npos);
    CHECK(ss.str().find("\"bound_weight\"") != std::string::npos);
}
