#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "support/oracles.hpp"
#include "upwind/metrics.hpp"

using namespace upwind;

namespace {

constexpr double kPi = std::numbers::pi;

CellField checker(const CartesianMesh& mesh, double sign) {
    return discretize_initial(
        [sign](const Point& x) { return sign * ((x[0] < 0.5) == (x[1] < 0.5) ? 1.0 : -1.0); }, mesh);
}

/// Exact cell averages of cos(2 pi k x1) on the unit torus.
CellField cosine_mode(const CartesianMesh& mesh, int k) {
    std::vector<double> v(std::size_t(mesh.cell_count()));
    const double w = mesh.width(0);
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        const double a = mesh.lower_corner(c)[0];
        v[std::size_t(c)] = (std::sin(2 * kPi * k * (a + w)) - std::sin(2 * kPi * k * a)) / (2 * kPi * k * w);
    }
    return CellField(mesh, v);
}

DiscreteMeasure line_measure(std::vector<double> xs, std::vector<double> ms) {
    DiscreteMeasure m{1, {}, {}};
    for (std::size_t i = 0; i < xs.size(); ++i) m.add({xs[i], 0.0}, ms[i]);
    return m;
}

DiscreteMeasure random_measure(std::mt19937_64& gen, int n, double total, int dim = 2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DiscreteMeasure m{dim, {}, {}};
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = u(gen) + 0.05);
    for (int i = 0; i < n; ++i) m.add({u(gen), dim == 2 ? u(gen) : 0.0}, w[i] * total / s);
    return m;
}

}  // namespace

TEST_CASE("L^q errors") {
    const auto mesh = unit_torus(2, 8);
    const auto a = checker(mesh, 1.0);
    const auto b = checker(mesh, -1.0);
    CHECK(l_norm_error(a, a, 1.0) == 0.0);
    CHECK(l_norm_error(a, b, 1.0) == doctest::Approx(2.0));
    CHECK(l_norm_error(a, b, 2.0) == doctest::Approx(2.0));
    CHECK(l_norm_error(a, b, INFINITY) == 2.0);
    CHECK_THROWS_AS(l_norm_error(a, checker(unit_torus(2, 4), 1.0), 1.0), std::invalid_argument);
}

TEST_CASE("H^-1 norm of single modes") {
    CHECK(hminus1_norm(constant_field(unit_torus(2, 8), 0.0)) == 0.0);
    double prev = INFINITY;
    for (int k = 4; k <= 8; ++k) {
        const auto mesh = unit_torus(2, CellIndex{1} << k);
        const double err = std::abs(hminus1_norm(cosine_mode(mesh, 1)) - 1.0 / (2 * std::sqrt(2.0) * kPi));
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-4);
    const auto fine = unit_torus(2, 256);
    CHECK(hminus1_norm(cosine_mode(fine, 2)) == doctest::Approx(1.0 / (4 * std::sqrt(2.0) * kPi)).epsilon(1e-3));
}

TEST_CASE("H^-1 FFT path matches direct Fourier summation") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto cells : {std::array<CellIndex, 2>{8, 6}, std::array<CellIndex, 2>{5, 7}}) {
        const auto mesh = build_mesh(2, {1.0, 1.5}, cells, Boundary::Periodic);
        std::vector<double> v(std::size_t(mesh.cell_count()));
        double mean = 0.0;
        for (auto& x : v) mean += (x = u(gen));
        mean /= double(v.size());
        for (auto& x : v) x -= mean;
        const CellField f(mesh, v);
        CHECK(hminus1_norm(f) == doctest::Approx(oracle::hminus1_direct(f)).epsilon(1e-12));
    }
}

TEST_CASE("H^-1 preconditions") {
    const auto box = build_mesh(2, {1.0, 1.0}, {4, 4}, Boundary::NoFlux);
    CHECK_THROWS_AS(hminus1_norm(constant_field(box, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(hminus1_norm(constant_field(unit_torus(2, 4), 1.0)), std::invalid_argument);
}

TEST_CASE("W1 on the line") {
    const auto a = line_measure({0.0}, {1.0});
    CHECK(w1_1d(a, a) == 0.0);
    CHECK(w1_1d(a, line_measure({1.0}, {1.0})) == 1.0);
    CHECK(w1_1d(a, line_measure({-1.0, 1.0}, {0.5, 0.5})) == 1.0);
    CHECK_THROWS_AS(w1_1d(a, line_measure({1.0}, {2.0})), std::invalid_argument);

    const auto mesh = build_mesh(1, {1.0, 0.0}, {4, 1}, Boundary::NoFlux);
    CHECK(w1_fields_1d(mesh, {4, 0, 0, 0}, {0, 0, 0, 4}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(w1_fields_1d(mesh, {4, 0, 0, 0}, {0, 0, 0, 3}), std::invalid_argument);
}

TEST_CASE("KR distance examples") {
    const Point x{0.0, 0.0}, y{3.0, 4.0};
    DiscreteMeasure a{2, {x}, {1.0}}, b{2, {y}, {1.0}};
    CHECK(kr_distance(a, b, 2.0).value == doctest::Approx(std::log(5.0 / 2.0 + 1.0)));
    CHECK(kr_distance(a, a, 1.0).value == 0.0);

    const auto s = line_measure({0.0, 1.0}, {1.0, 1.0});
    const auto t = line_measure({0.4, 2.0}, {1.0, 1.0});
    const double brute = std::min(std::log(1.4) + std::log(2.0), std::log(3.0) + std::log(1.6));
    const auto res = kr_distance(s, t, 1.0);
    CHECK(res.value == doctest::Approx(brute).epsilon(1e-12));
    CHECK(res.certified);
    CHECK(res.lipschitz_excess <= 1e-12);

    CHECK_THROWS_AS(kr_distance(a, DiscreteMeasure{2, {y}, {2.0}}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(kr_distance(a, b, 0.0), std::invalid_argument);
    std::mt19937_64 gen(1);
    KrOptions small;
    small.size_cap = 10;
    CHECK_THROWS_AS(kr_distance(random_measure(gen, 20, 1.0), random_measure(gen, 20, 1.0), 1.0, small),
                    std::length_error);
}

TEST_CASE("KR distance properties on random instances") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 60; ++trial) {
        const auto mu = random_measure(gen, 6, 1.0);
        const auto nu = random_measure(gen, 5, 1.0);
        const auto la = random_measure(gen, 4, 1.0);
        const double r = 0.05 + 0.5 * (trial % 5);
        const auto d_mn = kr_distance(mu, nu, r);
        CHECK(d_mn.certified);
        CHECK(std::abs(d_mn.gap) <= 1e-8 * (1 + d_mn.value));
        CHECK(d_mn.value <= kr_distance(mu, la, r).value + kr_distance(la, nu, r).value + 1e-8);

        // Shared mass cancels.
        DiscreteMeasure mu2 = mu, nu2 = nu;
        for (std::size_t i = 0; i < la.size(); ++i) {
            mu2.add(la.points[i], la.masses[i]);
            nu2.add(la.points[i], la.masses[i]);
        }
        CHECK(kr_distance(mu2, nu2, r).value == doctest::Approx(d_mn.value).epsilon(1e-10));
        KrOptions raw;
        raw.reduce_common_mass = false;
        CHECK(kr_distance(mu, nu, r, raw).value == doctest::Approx(d_mn.value).epsilon(1e-10));

        CHECK(kr_distance(mu, nu, 2 * r).value <= d_mn.value + 1e-12);
        CHECK(d_mn.value <= w1_general(mu, nu) / r + 1e-12);

        std::vector<CouplingSample> pairs;
        for (const auto& e : d_mn.plan.entries) {
            pairs.push_back({d_mn.sources.points[e.source], d_mn.sinks.points[e.target], e.mass});
        }
        CHECK(coupling_upper_bound(pairs, r) == doctest::Approx(d_mn.value).epsilon(1e-12));
        // Any other coupling, e.g. the product one, costs at least as much.
        pairs.clear();
        for (std::size_t i = 0; i < mu.size(); ++i) {
            for (std::size_t j = 0; j < nu.size(); ++j) {
                pairs.push_back({mu.points[i], nu.points[j], mu.masses[i] * nu.masses[j]});
            }
        }
        CHECK(coupling_upper_bound(pairs, r) >= d_mn.value - 1e-12);
    }
}

TEST_CASE("1-D KR sublinearity and W1 agreement") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 50; ++trial) {
        const auto mu = random_measure(gen, 7, 2.0, 1);
        const auto nu = random_measure(gen, 9, 2.0, 1);
        const double w1 = w1_1d(mu, nu);
        CHECK(w1_general(mu, nu) == doctest::Approx(w1).epsilon(1e-10));
        CHECK(kr_distance(mu, nu, 0.3).value <= w1 / 0.3 + 1e-12);
    }
}

TEST_CASE("coupling bound basics and field conversions") {
    CHECK(coupling_upper_bound({{{0.1, 0.2}, {0.1, 0.2}, 3.0}}, 1.0) == 0.0);
    CHECK(coupling_upper_bound({{{0, 0}, {1, 0}, 2.0}, {{0, 1}, {0, 2}, 1.0}}, 0.5) ==
          doctest::Approx(3.0 * std::log(3.0)));
    const auto mesh = unit_torus(2, 4);
    std::vector<double> v(16, 0.0);
    v[3] = 2.0;
    const auto m = to_measure(CellField(mesh, v));
    CHECK(m.size() == 1);
    CHECK(m.masses[0] == doctest::Approx(2.0 / 16));
    v[4] = -1.0;
    CHECK_THROWS_AS(to_measure(CellField(mesh, v)), std::invalid_argument);
    const auto a = checker(mesh, 1.0);
    const auto b = checker(mesh, -1.0);
    const auto d = kr_distance_fields(a, b, 0.5);
    CHECK(d.certified);
    CHECK(d.value > 0.0);
}
