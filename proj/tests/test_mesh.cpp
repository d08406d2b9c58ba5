#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

#include "upwind/mesh.hpp"

using namespace upwind;

TEST_CASE("2x2 periodic mesh geometry") {
    const auto mesh = unit_torus(2, 2);
    CHECK(mesh.cell_count() == 4);
    CHECK(mesh.cell_volume() == doctest::Approx(0.25));
    const auto edges = mesh.edges();
    CHECK(edges.size() == 8);
    std::set<std::tuple<CellIndex, int, int>> distinct;
    for (const auto& e : edges) {
        CHECK(mesh.edge_area(e.axis) == doctest::Approx(0.5));
        const auto c = mesh.canonical(e);
        distinct.insert(std::make_tuple(c.cell, c.axis, int(c.side)));
    }
    CHECK(distinct.size() == 8);
    CHECK(mesh.boundary_edge_count() == 0);
}

TEST_CASE("1-D no-flux mesh edges") {
    const auto mesh = build_mesh(1, {1.0, 0.0}, {4, 1}, Boundary::NoFlux);
    CHECK(mesh.width(0) == 0.25);
    CHECK(mesh.interior_edge_count() == 3);
    CHECK(mesh.boundary_edge_count() == 2);
    CHECK(mesh.edges().size() == 5);
    CHECK_FALSE(mesh.neighbor(0, 0, -1).has_value());
    CHECK(mesh.neighbor(0, 0, 1).value() == 1);
    CHECK(mesh.is_boundary({3, 0, Side::High}));
}

TEST_CASE("fine torus: diameter and tau") {
    const auto mesh = unit_torus(2, 1024);
    CHECK(mesh.diameter() == doctest::Approx(std::sqrt(2.0) / 1024).epsilon(1e-14));
    for (int a = 0; a < 2; ++a) {
        CHECK(tau(mesh, {12345, a, Side::High}) == doctest::Approx(1024.0).epsilon(1e-14));
    }
}

TEST_CASE("tau on rectangular cells") {
    const auto mesh = build_mesh(2, {1.0, 1.0}, {4, 8}, Boundary::Periodic);
    CHECK(mesh.tau({0, 0, Side::High}) == doctest::Approx(4.0));
    CHECK(mesh.tau({0, 1, Side::Low}) == doctest::Approx(8.0));
    CHECK(mesh.tau({0, 0, Side::High}) == doctest::Approx(mesh.edge_area(0) / mesh.cell_volume()));
}

TEST_CASE("invalid meshes are rejected") {
    CHECK_THROWS_AS(build_mesh(3, {1, 1}, {2, 2}, Boundary::Periodic), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(2, {0.0, 1.0}, {2, 2}, Boundary::Periodic), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(2, {1.0, 1.0}, {0, 2}, Boundary::Periodic), std::invalid_argument);
    // h = sqrt(1 + 1/100^2) > 4 * (1/100) violates the regularity bound.
    CHECK_THROWS_AS(build_mesh(2, {1.0, 1.0}, {1, 100}, Boundary::Periodic), std::invalid_argument);
    CHECK_NOTHROW(build_mesh(2, {1.0, 1.0}, {1, 100}, Boundary::Periodic, 200.0));
}

TEST_CASE("locate_cell conventions") {
    const auto mesh = unit_torus(2, 4);
    CHECK(mesh.multi_index(locate_cell(mesh, {0.30, 0.80})) == std::array<CellIndex, 2>{1, 3});
    CHECK(mesh.multi_index(locate_cell(mesh, {0.25, 0.5})) == std::array<CellIndex, 2>{1, 2});
    CHECK(mesh.multi_index(locate_cell(mesh, {1.25, -0.25})) == std::array<CellIndex, 2>{1, 3});
    const auto box = build_mesh(2, {1.0, 1.0}, {4, 4}, Boundary::NoFlux);
    CHECK_THROWS_AS(locate_cell(box, {1.5, 0.5}), std::out_of_range);
    CHECK_THROWS_AS(locate_cell(box, {0.5, -0.1}), std::out_of_range);
}

TEST_CASE("volume, closed surface and positive-part identities") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto boundary : {Boundary::Periodic, Boundary::NoFlux}) {
        const auto mesh = build_mesh(2, {1.5, 0.75}, {12, 5}, boundary);
        double vol = 0.0;
        for (CellIndex c = 0; c < mesh.cell_count(); ++c) vol += mesh.cell_volume();
        CHECK(std::abs(vol - mesh.domain_volume()) <= 1e-12 * mesh.domain_volume());
        for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
            Point closed{0.0, 0.0};
            const Point b{u(gen), u(gen)};
            Point rebuilt{0.0, 0.0};
            for (int a = 0; a < 2; ++a) {
                for (auto side : {Side::Low, Side::High}) {
                    const EdgeId e{c, a, side};
                    const Point nu = mesh.normal(e);
                    const double bn = b[0] * nu[0] + b[1] * nu[1];
                    for (int i = 0; i < 2; ++i) {
                        closed[i] += mesh.edge_area(a) * nu[i];
                        rebuilt[i] += nu[i] * std::max(0.0, bn);
                    }
                }
            }
            CHECK(closed[0] == 0.0);
            CHECK(closed[1] == 0.0);
            CHECK(rebuilt[0] == doctest::Approx(b[0]).epsilon(1e-15));
            CHECK(rebuilt[1] == doctest::Approx(b[1]).epsilon(1e-15));
            CHECK(mesh.surface_area() / mesh.cell_volume() <=
                  mesh.isoperimetric_constant() / mesh.diameter() * (1 + 1e-12));
        }
    }
}

TEST_CASE("linear and multi index round trip") {
    const auto mesh = build_mesh(2, {1.0, 1.0}, {7, 3}, Boundary::Periodic);
    for (CellIndex c = 0; c < mesh.cell_count(); ++c) {
        CHECK(mesh.linear_index(mesh.multi_index(c)) == c);
        CHECK(locate_cell(mesh, mesh.centroid(c)) == c);
    }
    CHECK(mesh.neighbor(6, 0, 1).value() == 0);
    CHECK(mesh.neighbor(0, 1, -1).value() == 14);
}
