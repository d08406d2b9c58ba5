#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upwind/mesh.hpp"
#include "upwind/metrics.hpp"
#include "upwind/scheme.hpp"
#include "upwind/velocity.hpp"

namespace upwind {

enum class Metric { L1, L2, Hm1, W1, KR };

/// Parses "l1", "l2", "hm1", "w1", "kr".
Metric parse_metric(const std::string& name);
std::vector<Metric> parse_metric_list(const std::string& list);
/// CSV column name: L1, L2, H-1, W1, KR.
std::string metric_column(Metric m);

/// +1 on [0,1/2)^2 and [1/2,1)^2, -1 on the other two quarters (unit torus).
double checkerboard(const Point& x);

/// Exact cell averages of x^-s 1_(0,1](x - shift) on a 1-D mesh, from the
/// antiderivative x^(1-s) / (1-s). Rejects s outside [0, 1).
std::vector<double> power_law_cell_averages(const CartesianMesh& mesh, double s,
                                            double shift = 0.0);

/// 1-D solution of rho_k^{n+1} = (rho_k^n + rho_{k-1}^n) / 2 with rho_{-1} = 0:
/// rho_k^n = 2^-n sum_m C(n, m) rho_{k-m}^0. Binomial weights below
/// `cutoff` relative to the largest one are dropped.
std::vector<double> half_courant_closed_form(const std::vector<double>& rho0, long n,
                                             double cutoff = 1e-20);

struct ErrorRecord {
    double h = 0.0;
    std::map<Metric, double> errors;
    /// Reference line c h^(1/2) through the coarsest L1 error.
    std::optional<double> rate;
    double wall_time = 0.0;

    bool operator==(const ErrorRecord&) const = default;
};

/// KR parameter rule: r = sqrt(h) unless a fixed value is given.
struct KrRule {
    std::optional<double> fixed;
    double at(double h) const;
};

struct StudyConfig {
    std::string field = "constant";
    /// Cell widths h = 2^-k, k from this list.
    std::vector<int> exponents{5, 6, 7, 8, 9};
    double dt_ratio = 0.25;
    double T = 2.0;
    /// Field is negated at this time; the exact state at T is then rho0.
    std::optional<double> flip = 1.0;
    std::vector<Metric> metrics{Metric::L1, Metric::Hm1};
    KrRule kr{};
    KrOptions kr_options{};
    EdgeQuadrature quadrature{};
    double courant_limit = 1.0;
    /// When set, writes initial_k<k>.bin and final_k<k>.bin snapshots here.
    std::string snapshot_dir;
};

/// Throws std::invalid_argument unless the sweep has >= 3 distinct points and
/// T and the flip time are multiples of every dt.
void validate(const StudyConfig& config);

struct RateFit {
    Metric metric = Metric::L1;
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
    int points = 0;
    /// Fewer than two usable points: slope is NaN.
    bool degenerate = false;
};

struct SweepFailure {
    double h = 0.0;
    std::string message;
};

struct StudyResult {
    std::vector<ErrorRecord> records;
    std::vector<RateFit> fits;
    std::vector<SweepFailure> failures;
    std::vector<std::string> warnings;

    const RateFit& fit(Metric m) const;
};

/// Least squares of log(error) against log(h). Needs >= 3 records with
/// distinct h; zero errors are dropped with a warning appended to `warnings`.
RateFit fit_rate(const std::vector<ErrorRecord>& records, Metric metric,
                 std::vector<std::string>* warnings = nullptr);

/// Counts places where the error grows as h decreases; more than one
/// inversion yields a warning.
int count_inversions(const std::vector<ErrorRecord>& records, Metric metric);

/// Checkerboard time-reversal study on the unit torus.
StudyResult convergence_study(const StudyConfig& config);

/// Error between two fields under one metric; W1 and KR go through the
/// exact solver and may throw std::length_error at large sizes.
double field_error(const CellField& approx, const CellField& exact, Metric metric,
                   double r, const KrOptions& kr_options = {});

struct OptimalityConfig {
    double s = 0.9;
    std::vector<int> exponents{8, 9, 10, 11, 12, 13, 14};
    double T = 1.0;
    double U = 1.0;
};

struct OptimalityResult {
    StudyResult study;
    /// max_n |stepper - closed form| / max(1, max |rho|) at the final step.
    double closed_form_deviation = 0.0;
    double domain_length = 0.0;
};

/// Transport of x^-s by U on a no-flux segment [0, R], R = 2 + TU, with
/// dt U = h / 2. Records L1 and W1 errors against the exact shifted datum.
OptimalityResult optimality_example(const OptimalityConfig& config);

/// Header meshsize,L1,H-1,Rate, then L2, W1, KR when any record has them,
/// then wall_time. Values with %.17g; missing values are empty.
void export_csv(const std::vector<ErrorRecord>& records, const std::string& path);
std::string format_csv(const std::vector<ErrorRecord>& records);
std::vector<ErrorRecord> parse_csv(const std::string& text);
std::vector<ErrorRecord> read_csv(const std::string& path);

}  // namespace upwind
