#pragma once

#include <functional>
#include <vector>

namespace upwind {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached n-point Gauss-Legendre rule, n >= 1.
const GaussRule& gauss_legendre(int points);

/// Composite Gauss-Legendre integral of f over [a, b] with `segments` equal panels.
double integrate_gauss(const std::function<double(double)>& f, double a, double b, int points,
                       int segments = 1);

/// Gauss-Legendre integral over [a, b] on panels graded geometrically toward
/// the endpoint `singular_end` (a or b). Resolves integrable endpoint
/// singularities of algebraic type.
double integrate_graded(const std::function<double(double)>& f, double a, double b,
                        double singular_end, int points, int levels = 24, double ratio = 0.2);

}  // namespace upwind
