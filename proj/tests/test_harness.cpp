#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "support/oracles.hpp"
#include "upwind/harness.hpp"

using namespace upwind;

namespace {

std::vector<ErrorRecord> synthetic(const std::vector<double>& hs, double c, double p, Metric m) {
    std::vector<ErrorRecord> out;
    for (double h : hs) {
        ErrorRecord r;
        r.h = h;
        r.errors[m] = c * std::pow(h, p);
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("metric names") {
    CHECK(parse_metric_list("l1,hm1,kr") == std::vector<Metric>{Metric::L1, Metric::Hm1, Metric::KR});
    CHECK(metric_column(Metric::Hm1) == "H-1");
    CHECK_THROWS_AS(parse_metric("linf"), std::invalid_argument);
}

TEST_CASE("rate fits on exact power laws") {
    const std::vector<double> hs{0.25, 0.125, 0.0625, 0.03125};
    const auto lin = fit_rate(synthetic(hs, 3.0, 1.0, Metric::L1), Metric::L1);
    CHECK(lin.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lin.max_residual < 1e-12);
    CHECK(fit_rate(synthetic(hs, 0.2, 0.5, Metric::L1), Metric::L1).slope ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(fit_rate(synthetic({0.5, 0.25}, 1.0, 1.0, Metric::L1), Metric::L1), std::invalid_argument);
    CHECK_THROWS_AS(fit_rate(synthetic({0.5, 0.5, 0.25}, 1.0, 1.0, Metric::L1), Metric::L1),
                    std::invalid_argument);
}

TEST_CASE("rate fit on noisy two-metric data") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<ErrorRecord> recs;
    for (int k = 5; k <= 11; ++k) {
        const double h = std::ldexp(1.0, -k);
        ErrorRecord r;
        r.h = h;
        r.errors[Metric::L1] = 0.8 * std::sqrt(h) * std::exp(noise(gen));
        r.errors[Metric::Hm1] = 0.1 * std::pow(h, 0.6) * std::exp(noise(gen));
        recs.push_back(r);
    }
    const auto l1 = fit_rate(recs, Metric::L1);
    const auto hm = fit_rate(recs, Metric::Hm1);
    CHECK(std::abs(l1.slope - 0.5) < 0.05);
    CHECK(std::abs(hm.slope - 0.6) < 0.05);
    CHECK(l1.max_residual > 0.0);
    CHECK(l1.max_residual < 0.1);
    CHECK(l1.points == 7);
}

TEST_CASE("zero errors are excluded with a warning") {
    auto recs = synthetic({0.5, 0.25, 0.125, 0.0625}, 1.0, 1.0, Metric::L1);
    recs[2].errors[Metric::L1] = 0.0;
    std::vector<std::string> warnings;
    const auto fit = fit_rate(recs, Metric::L1, &warnings);
    CHECK(fit.points == 3);
    CHECK(fit.slope == doctest::Approx(1.0));
    CHECK(warnings.size() == 1);
    for (auto& r : recs) r.errors[Metric::L1] = 0.0;
    CHECK(fit_rate(recs, Metric::L1).degenerate);
}

TEST_CASE("inversion count") {
    auto recs = synthetic({0.5, 0.25, 0.125, 0.0625}, 1.0, 1.0, Metric::L1);
    CHECK(count_inversions(recs, Metric::L1) == 0);
    recs[3].errors[Metric::L1] = 1.0;
    CHECK(count_inversions(recs, Metric::L1) == 1);
}

TEST_CASE("power-law cell averages use the antiderivative") {
    const auto mesh = build_mesh(1, {2.0, 0.0}, {32, 1}, Boundary::NoFlux);
    const double h = mesh.width(0);
    const auto avg = power_law_cell_averages(mesh, 0.5);
    CHECK(avg[0] == doctest::Approx(2.0 / std::sqrt(h)).epsilon(1e-14));
    double mass = 0.0;
    for (double v : avg) mass += v * h;
    CHECK(mass == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(avg[16] == 0.0);
    const auto shifted = power_law_cell_averages(mesh, 0.5, 0.5);
    CHECK(shifted[7] == 0.0);
    CHECK(shifted[8] == doctest::Approx(avg[0]).epsilon(1e-12));
    CHECK_THROWS_AS(power_law_cell_averages(mesh, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(power_law_cell_averages(mesh, -0.1), std::invalid_argument);
}

TEST_CASE("closed form from the binomial law matches Pascal's triangle") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> data(64);
    for (auto& v : data) v = u(gen);
    for (int n : {0, 1, 2, 7, 33, 60}) {
        const auto a = half_courant_closed_form(data, n);
        const auto b = oracle::pascal_closed_form(data, n);
        for (std::size_t k = 0; k < data.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-13);
    }
}

TEST_CASE("study configuration validation") {
    StudyConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    cfg.exponents = {5, 6};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.exponents = {5, 6, 6};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.exponents = {5, 6, 7};
    cfg.flip = 0.3;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.flip = 2.5;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("zero field study has zero error everywhere") {
    StudyConfig cfg;
    cfg.field = "zero";
    cfg.exponents = {3, 4, 5};
    cfg.metrics = {Metric::L1, Metric::Hm1, Metric::KR, Metric::W1};
    const auto res = convergence_study(cfg);
    REQUIRE(res.records.size() == 3);
    for (const auto& r : res.records) {
        for (const auto& [m, e] : r.errors) CHECK(e == 0.0);
    }
    CHECK(res.fit(Metric::L1).degenerate);
    CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("small constant-field study") {
    StudyConfig cfg;
    cfg.exponents = {3, 4, 5, 6};
    cfg.metrics = {Metric::L1, Metric::Hm1, Metric::L2, Metric::KR};
    cfg.kr_options.size_cap = 300;
    const auto res = convergence_study(cfg);
    REQUIRE(res.records.size() == 4);
    CHECK(res.records.front().h == 0.125);
    for (const auto& r : res.records) {
        CHECK(r.errors.count(Metric::L1));
        CHECK(r.rate.has_value());
    }
    CHECK(res.records.front().rate.value() == res.records.front().errors.at(Metric::L1));
    CHECK(res.fit(Metric::L1).slope > 0.3);
    CHECK(res.fit(Metric::Hm1).slope > res.fit(Metric::L1).slope);
    // KR with r = sqrt(h) is computed up to the size cap, skipped beyond it.
    CHECK(res.records[0].errors.count(Metric::KR));
    CHECK_FALSE(res.records[3].errors.count(Metric::KR));
    bool skip_noted = false;
    for (const auto& w : res.warnings) skip_noted = skip_noted || w.find("KR skipped") != std::string::npos;
    CHECK(skip_noted);
}

TEST_CASE("CFL refusal aborts a sweep point") {
    StudyConfig cfg;
    cfg.exponents = {3, 4, 5};
    cfg.dt_ratio = 2.0;
    cfg.T = 4.0;
    cfg.flip = 2.0;
    const auto res = convergence_study(cfg);
    CHECK(res.records.empty());
    CHECK(res.failures.size() == 3);
}

TEST_CASE("optimality example on a short sweep") {
    OptimalityConfig cfg;
    cfg.s = 0.5;
    cfg.exponents = {6, 7, 8, 9};
    const auto res = optimality_example(cfg);
    CHECK(res.domain_length == 3.0);
    CHECK(res.closed_form_deviation <= 1e-12);
    CHECK(res.study.records.size() == 4);
    CHECK(res.study.fit(Metric::L1).slope == doctest::Approx(0.25).epsilon(0.6));
    CHECK(res.study.fit(Metric::W1).slope == doctest::Approx(0.75).epsilon(0.3));
    cfg.s = 1.0;
    CHECK_THROWS_AS(optimality_example(cfg), std::invalid_argument);
}

TEST_CASE("CSV export and parse") {
    ErrorRecord one;
    one.h = 0.5;
    one.errors[Metric::L1] = 0.1;
    const std::string text = format_csv({one});
    CHECK(text == "meshsize,L1,H-1,Rate,wall_time\n0.5,0.10000000000000001,,,0\n");
    CHECK(parse_csv(text) == std::vector<ErrorRecord>{one});

    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ErrorRecord> recs;
    for (int k = 5; k <= 11; ++k) {
        ErrorRecord r;
        r.h = std::ldexp(1.0, -k);
        r.errors[Metric::L1] = u(gen);
        r.errors[Metric::Hm1] = u(gen) * 1e-7;
        r.errors[Metric::KR] = u(gen) / 3;
        r.rate = u(gen);
        r.wall_time = u(gen) * 100;
        recs.push_back(r);
    }
    const auto path = (std::filesystem::temp_directory_path() / "upwind_harness_test.csv").string();
    export_csv(recs, path);
    const auto back = read_csv(path);
    CHECK(back == recs);
    const std::string csv = format_csv(recs);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
    CHECK(csv.substr(0, csv.find('\n')) == "meshsize,L1,H-1,Rate,KR,wall_time");
    std::filesystem::remove(path);
    CHECK_THROWS(export_csv(recs, "/nonexistent-dir/x.csv"));
    CHECK_THROWS(export_csv({}, path));
    CHECK_THROWS_AS(parse_csv("h,L1\n1,2\n"), std::invalid_argument);
}

TEST_CASE("identical configurations give identical CSV apart from wall time") {
    StudyConfig cfg;
    cfg.field = "sobolev";
    cfg.exponents = {3, 4, 5};
    auto a = convergence_study(cfg).records;
    auto b = convergence_study(cfg).records;
    for (auto* v : {&a, &b}) {
        for (auto& r : *v) r.wall_time = 0.0;
    }
    CHECK(format_csv(a) == format_csv(b));
}
