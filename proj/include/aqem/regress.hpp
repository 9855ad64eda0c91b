#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace aqem {

enum class Family { L1, L2, L3, IL, ILL };

inline constexpr Family kAllFamilies[] = {Family::L1, Family::L2, Family::L3, Family::IL, Family::ILL};

std::string_view to_string(Family f);
Family family_from_string(std::string_view name);

/// (log N, log V_H) points, strictly increasing in x.
struct LogSeries {
    std::vector<double> x;
    std::vector<double> y;

    LogSeries() = default;
    LogSeries(std::vector<double> xs, std::vector<double> ys);
    /// log-log transform of an (N, V_H) curve.
    static LogSeries from_curve(const std::vector<int>& n, const std::vector<double>& holevo);

    int size() const { return static_cast<int>(x.size()); }
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double sse = 0.0;
};

/// Ordinary least squares on the inclusive index window [lo, hi].
LineFit fit_linear(const LogSeries& series, int lo, int hi);

struct Criteria {
    std::optional<double> adj_r2;
    std::optional<double> aicc;
    std::optional<double> f_value;
    std::optional<double> cp;
};

struct PiecewiseFit {
    Family family = Family::L1;
    bool feasible = false;
    std::string note;
    // Leading points reproduced exactly by linear interpolation (interpolation families).
    int interp_points = 0;
    // Data indices where consecutive linear segments meet.
    std::vector<int> knots;
    std::vector<double> slopes;
    std::vector<double> intercepts;
    double sse = 0.0;
    int b = 0;
    Criteria criteria;

    /// First and last data index covered by each linear segment.
    std::vector<std::pair<int, int>> segment_ranges(int v) const;
    double last_slope() const { return slopes.back(); }
    /// Fitted value at data index i (interpolated points return the data).
    double fitted(const LogSeries& series, int i) const;
};

struct RegressOptions {
    // Every linear segment covers at least this many points (knots shared) ...
    int min_segment_points = 3;
    // ... and at least this fraction of all points ...
    double min_segment_fraction = 0.2;
    // ... and at least this fraction of the x range.
    double min_segment_span = 0.0;
    // Relative one-step SSE drop that marks the end of the interpolated region.
    double interp_drop = 0.2;
    // Largest fraction of the points the interpolated region may cover.
    double max_interp_fraction = 0.25;
    // Exponent difference below which a winning three-segment fit yields to the runner-up.
    double guard = 0.001;
    // Reference for the F-value and Cp: L3, or the feasible family with the largest b.
    bool full_is_largest_b = true;
};

/// Minimum series length for a family.
int minimum_points(Family family);

/// Continuity-constrained least-squares fit with exhaustive breakpoint search.
/// Returns feasible=false with a note when the family cannot be fitted.
PiecewiseFit fit_family(const LogSeries& series, Family family, const RegressOptions& options = {});

/// Fills fit.criteria against the full model.
void compute_criteria(PiecewiseFit& fit, const PiecewiseFit& full, const LogSeries& series);

/// 2*wp = -(slope of the last linear segment).
double asymptotic_exponent(const PiecewiseFit& fit);

struct Selection {
    int chosen = -1;     // index into the fit list
    int voted = -1;      // vote winner before the guard rule
    int runner_up = -1;
    bool guard_applied = false;
    std::vector<std::vector<int>> rankings;  // per criterion: fit indices best-first
    std::vector<int> votes;                  // per fit
    double exponent = 0.0;                   // 2*wp of the chosen fit
};

/// Majority vote over adjusted R^2 (high), AICc (low), F (low), |Cp - b| (low).
/// Ties go to the fewest parameters. A winning L3 yields to the runner-up when the
/// exponents differ by at most options.guard.
Selection select_model(const std::vector<PiecewiseFit>& fits, const RegressOptions& options = {});

struct FitReport {
    std::vector<PiecewiseFit> fits;
    Selection selection;
    std::vector<std::string> skipped;
    const PiecewiseFit& chosen() const { return fits.at(static_cast<std::size_t>(selection.chosen)); }
};

/// Fits every feasible family, computes criteria against L3 (or the largest linear
/// family available) and selects a model.
FitReport fit_series(const LogSeries& series, const RegressOptions& options = {});

nlohmann::json fit_to_json(const PiecewiseFit& fit, const LogSeries& series, const std::vector<int>& n_values);
nlohmann::json report_to_json(const FitReport& report, const LogSeries& series, const std::vector<int>& n_values,
                              const RegressOptions& options);

}  // namespace aqem
