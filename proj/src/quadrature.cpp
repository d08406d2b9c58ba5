#include "upwind/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace upwind {
namespace {

GaussRule make_rule(int n) {
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    const auto un = static_cast<unsigned>(n);
    for (int i = 0; i < n; ++i) {
        // Newton on P_n from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double p = std::legendre(un, x);
            const double pm1 = n > 1 ? std::legendre(un - 1, x) : 1.0;
            dp = n * (x * p - pm1) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            const double p = std::legendre(un, x);
            const double pm1 = n > 1 ? std::legendre(un - 1, x) : 1.0;
            dp = n * (x * p - pm1) / (x * x - 1.0);
        }
        rule.nodes[static_cast<std::size_t>(i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int points) {
    if (points < 1) throw std::invalid_argument("quadrature order must be >= 1");
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(points);
    if (it == cache.end()) it = cache.emplace(points, make_rule(points)).first;
    return it->second;
}

double integrate_gauss(const std::function<double(double)>& f, double a, double b, int points,
                       int segments) {
    if (segments < 1) throw std::invalid_argument("quadrature needs at least one segment");
    const GaussRule& rule = gauss_legendre(points);
    const double panel = (b - a) / segments;
    double total = 0.0;
    for (int s = 0; s < segments; ++s) {
        const double lo = a + s * panel;
        const double half = 0.5 * panel;
        const double mid = lo + half;
        double acc = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            acc += rule.weights[k] * f(mid + half * rule.nodes[k]);
        }
        total += half * acc;
    }
    return total;
}

double integrate_graded(const std::function<double(double)>& f, double a, double b,
                        double singular_end, int points, int levels, double ratio) {
    const bool at_a = singular_end == a;
    const double len = b - a;
    // Panels [s*ratio^(k+1), s*ratio^k] measured from the singular end.
    double total = 0.0;
    double outer = 1.0;
    for (int k = 0; k < levels; ++k) {
        const double inner = k + 1 == levels ? 0.0 : outer * ratio;
        const double lo = at_a ? a + inner * len : b - outer * len;
        const double hi = at_a ? a + outer * len : b - inner * len;
        total += integrate_gauss(f, lo, hi, points);
        outer = inner;
    }
    return total;
}

}  // namespace upwind
