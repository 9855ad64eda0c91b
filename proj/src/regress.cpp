#include "aqem/regress.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace aqem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct HingeFit {
    Eigen::VectorXd coef;
    double sse = kInf;
};

// Least squares on [lo, hi] with basis 1, x, (x - x_k)_+ for each knot k.
HingeFit hinge_fit(const LogSeries& s, int lo, int hi, const std::vector<int>& knots) {
    const int rows = hi - lo + 1;
    const int cols = 2 + static_cast<int>(knots.size());
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd rhs(rows);
    for (int r = 0; r < rows; ++r) {
        const double x = s.x[lo + r];
        a(r, 0) = 1.0;
        a(r, 1) = x;
        for (std::size_t k = 0; k < knots.size(); ++k) a(r, 2 + static_cast<int>(k)) = std::max(0.0, x - s.x[knots[k]]);
        rhs(r) = s.y[lo + r];
    }
    HingeFit out;
    out.coef = a.householderQr().solve(rhs);
    out.sse = (a * out.coef - rhs).squaredNorm();
    return out;
}

struct Segmenter {
    const LogSeries& s;
    const RegressOptions& opt;
    double range;

    bool segment_ok(int a, int b) const {
        const auto by_fraction = static_cast<int>(std::ceil(opt.min_segment_fraction * s.size() - 1e-9));
        return b - a + 1 >= std::max(opt.min_segment_points, by_fraction) &&
               s.x[b] - s.x[a] >= opt.min_segment_span * range - 1e-12;
    }

    // Best continuous fit with `pieces` linear segments on [lo, hi].
    std::pair<HingeFit, std::vector<int>> best(int lo, int hi, int pieces) const {
        if (pieces == 1) {
            if (!segment_ok(lo, hi)) return {HingeFit{}, {}};
            return {hinge_fit(s, lo, hi, {}), {}};
        }
        std::pair<HingeFit, std::vector<int>> out{HingeFit{}, {}};
        if (pieces == 2) {
            for (int k = lo + 1; k < hi; ++k) {
                if (!segment_ok(lo, k) || !segment_ok(k, hi)) continue;
                auto f = hinge_fit(s, lo, hi, {k});
                if (f.sse < out.first.sse) out = {std::move(f), {k}};
            }
            return out;
        }
        for (int k1 = lo + 1; k1 < hi; ++k1) {
            if (!segment_ok(lo, k1)) continue;
            for (int k2 = k1 + 1; k2 < hi; ++k2) {
                if (!segment_ok(k1, k2) || !segment_ok(k2, hi)) continue;
                auto f = hinge_fit(s, lo, hi, {k1, k2});
                if (f.sse < out.first.sse) out = {std::move(f), {k1, k2}};
            }
        }
        return out;
    }
};

void fill_segments(PiecewiseFit& fit, const LogSeries& s, const HingeFit& h, const std::vector<int>& knots) {
    fit.knots = knots;
    fit.slopes.clear();
    fit.intercepts.clear();
    double slope = h.coef(1);
    double intercept = h.coef(0);
    fit.slopes.push_back(slope);
    fit.intercepts.push_back(intercept);
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const double c = h.coef(2 + static_cast<int>(k));
        slope += c;
        intercept -= c * s.x[knots[k]];
        fit.slopes.push_back(slope);
        fit.intercepts.push_back(intercept);
    }
    fit.sse = h.sse;
}

double total_sum_squares(const LogSeries& s) {
    const double mean = std::accumulate(s.y.begin(), s.y.end(), 0.0) / s.size();
    double acc = 0.0;
    for (double y : s.y) acc += (y - mean) * (y - mean);
    return acc;
}

// SSE values below this are roundoff; flooring keeps the log-based criteria finite.
double effective_sse(double sse, double sst) { return std::max(sse, 1e-24 * std::max(sst, 1e-300)); }

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::L1: return "L1";
        case Family::L2: return "L2";
        case Family::L3: return "L3";
        case Family::IL: return "I+L";
        case Family::ILL: return "I+LL";
    }
    return "L1";
}

Family family_from_string(std::string_view name) {
    for (Family f : kAllFamilies)
        if (to_string(f) == name) return f;
    throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

LogSeries::LogSeries(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
    if (x.size() != y.size()) throw std::invalid_argument("LogSeries: x and y lengths differ");
    if (x.size() < 2) throw std::invalid_argument("LogSeries: need at least two points");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("LogSeries: non-finite value");
        if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("LogSeries: x must be strictly increasing");
    }
}

LogSeries LogSeries::from_curve(const std::vector<int>& n, const std::vector<double>& holevo) {
    if (n.size() != holevo.size()) throw std::invalid_argument("curve: N and V_H lengths differ");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] < 1 || !(holevo[i] > 0.0)) throw std::invalid_argument("curve: N and V_H must be positive");
        xs.push_back(std::log(static_cast<double>(n[i])));
        ys.push_back(std::log(holevo[i]));
    }
    return LogSeries(std::move(xs), std::move(ys));
}

LineFit fit_linear(const LogSeries& s, int lo, int hi) {
    if (lo < 0 || hi >= s.size() || hi - lo < 1) throw std::invalid_argument("fit_linear: window needs two points");
    const int n = hi - lo + 1;
    double mx = 0.0, my = 0.0;
    for (int i = lo; i <= hi; ++i) {
        mx += s.x[i];
        my += s.y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = lo; i <= hi; ++i) {
        sxx += (s.x[i] - mx) * (s.x[i] - mx);
        sxy += (s.x[i] - mx) * (s.y[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_linear: degenerate x values");
    LineFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    for (int i = lo; i <= hi; ++i) {
        const double r = s.y[i] - (out.slope * s.x[i] + out.intercept);
        out.sse += r * r;
    }
    return out;
}

int minimum_points(Family family) {
    switch (family) {
        case Family::L1: return 3;
        case Family::L2: return 5;
        case Family::L3: return 8;
        case Family::IL:
        case Family::ILL: return 8;
    }
    return 3;
}

std::vector<std::pair<int, int>> PiecewiseFit::segment_ranges(int v) const {
    std::vector<std::pair<int, int>> out;
    int start = interp_points;
    for (int k : knots) {
        out.emplace_back(start, k);
        start = k;
    }
    out.emplace_back(start, v - 1);
    return out;
}

double PiecewiseFit::fitted(const LogSeries& series, int i) const {
    if (i < interp_points) return series.y[i];
    std::size_t seg = 0;
    while (seg < knots.size() && i > knots[seg]) ++seg;
    return slopes[seg] * series.x[i] + intercepts[seg];
}

PiecewiseFit fit_family(const LogSeries& s, Family family, const RegressOptions& opt) {
    PiecewiseFit fit;
    fit.family = family;
    const int v = s.size();
    if (v < minimum_points(family)) {
        fit.note = "needs at least " + std::to_string(minimum_points(family)) + " points";
        return fit;
    }
    const Segmenter seg{s, opt, s.x.back() - s.x.front()};

    if (family == Family::L1 || family == Family::L2 || family == Family::L3) {
        const int pieces = family == Family::L1 ? 1 : (family == Family::L2 ? 2 : 3);
        auto [h, knots] = seg.best(0, v - 1, pieces);
        if (!std::isfinite(h.sse)) {
            fit.note = "no admissible breakpoints";
            return fit;
        }
        fill_segments(fit, s, h, knots);
        fit.b = 2 * pieces;
        fit.feasible = true;
        return fit;
    }

    // Interpolation families: the stop is where the trailing fit's SSE drops most.
    const int pieces = family == Family::IL ? 1 : 2;
    const int max_stop = static_cast<int>(std::floor(opt.max_interp_fraction * v));
    std::vector<double> trailing(static_cast<std::size_t>(max_stop) + 1, kInf);
    for (int stop = 0; stop <= max_stop; ++stop) trailing[stop] = seg.best(stop, v - 1, pieces).first.sse;
    int stop = -1;
    double best_drop = -kInf;
    for (int k = 1; k <= max_stop; ++k) {
        if (!std::isfinite(trailing[k - 1]) || !std::isfinite(trailing[k]) || !(trailing[k - 1] > 0.0)) continue;
        const double drop = (trailing[k - 1] - trailing[k]) / trailing[k - 1];
        if (drop > best_drop) {
            best_drop = drop;
            stop = k;
        }
    }
    if (stop < 0 || best_drop < opt.interp_drop) {
        fit.note = "no single-step SSE drop reaches the interpolation threshold";
        return fit;
    }
    auto [h, knots] = seg.best(stop, v - 1, pieces);
    fill_segments(fit, s, h, knots);
    fit.interp_points = stop;
    fit.b = stop + (pieces == 1 ? 3 : 5);
    fit.feasible = true;
    return fit;
}

void compute_criteria(PiecewiseFit& fit, const PiecewiseFit& full, const LogSeries& s) {
    fit.criteria = Criteria{};
    if (!fit.feasible) return;
    const double v = s.size();
    const double b = fit.b;
    const double sst = total_sum_squares(s);
    const double sse = effective_sse(fit.sse, sst);
    if (v - b - 1.0 > 0.0) {
        const double r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
        fit.criteria.adj_r2 = r2 - b / (v - b - 1.0) * (1.0 - r2);
        fit.criteria.aicc = v * std::log(sse / v) + 2.0 * b + 2.0 * b * (b + 1.0) / (v - b - 1.0);
    }
    if (!full.feasible || &fit == &full || fit.family == full.family) return;
    const double bf = full.b;
    if (!(v - bf > 0.0)) return;
    const double sse_full = effective_sse(full.sse, sst);
    const double sigma2 = sse_full / (v - bf);
    // Only reductions of the full model (fewer parameters) are compared against it.
    if (!(b < bf)) return;
    fit.criteria.f_value = ((sse - sse_full) / (bf - b)) / sigma2;
    fit.criteria.cp = sse / sigma2 - v + 2.0 * b;
}

double asymptotic_exponent(const PiecewiseFit& fit) {
    if (fit.slopes.empty()) throw std::invalid_argument("asymptotic_exponent: fit has no segments");
    return -fit.last_slope();
}

Selection select_model(const std::vector<PiecewiseFit>& fits, const RegressOptions& opt) {
    int fitted = 0;
    for (const auto& f : fits) fitted += f.feasible ? 1 : 0;
    if (fitted < 2) throw std::invalid_argument("select_model: need at least two fitted families");

    Selection sel;
    sel.votes.assign(fits.size(), 0);
    std::vector<double> rank_sum(fits.size(), 0.0);

    // Score where lower is better; empty when the criterion is missing.
    const std::vector<std::function<std::optional<double>(const PiecewiseFit&)>> scores = {
        [](const PiecewiseFit& f) -> std::optional<double> {
            if (!f.criteria.adj_r2) return std::nullopt;
            return -*f.criteria.adj_r2;
        },
        [](const PiecewiseFit& f) { return f.criteria.aicc; },
        [](const PiecewiseFit& f) { return f.criteria.f_value; },
        [](const PiecewiseFit& f) -> std::optional<double> {
            if (!f.criteria.cp) return std::nullopt;
            return std::abs(*f.criteria.cp - f.b);
        },
    };
    auto fewer_params = [&](int a, int b) {
        if (fits[a].b != fits[b].b) return fits[a].b < fits[b].b;
        return static_cast<int>(fits[a].family) < static_cast<int>(fits[b].family);
    };
    for (const auto& score : scores) {
        std::vector<std::pair<double, int>> ranked;
        for (int i = 0; i < static_cast<int>(fits.size()); ++i) {
            if (!fits[i].feasible) continue;
            if (auto val = score(fits[i])) ranked.emplace_back(*val, i);
        }
        std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return fewer_params(a.second, b.second);
        });
        std::vector<int> order;
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            order.push_back(ranked[r].second);
            rank_sum[ranked[r].second] += static_cast<double>(r);
        }
        if (!order.empty()) ++sel.votes[order.front()];
        sel.rankings.push_back(std::move(order));
    }

    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(fits.size()); ++i)
        if (fits[i].feasible) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (sel.votes[a] != sel.votes[b]) return sel.votes[a] > sel.votes[b];
        if (rank_sum[a] != rank_sum[b]) return rank_sum[a] < rank_sum[b];
        return fewer_params(a, b);
    });
    // Equal vote counts resolve to the most parsimonious family.
    int winner = order.front();
    for (int i : order)
        if (sel.votes[i] == sel.votes[winner] && fewer_params(i, winner)) winner = i;
    sel.voted = winner;
    for (int i : order) {
        if (i == winner) continue;
        if (sel.runner_up < 0 || sel.votes[i] > sel.votes[sel.runner_up] ||
            (sel.votes[i] == sel.votes[sel.runner_up] && fewer_params(i, sel.runner_up)))
            sel.runner_up = i;
    }
    sel.chosen = winner;
    if (fits[winner].family == Family::L3 && sel.runner_up >= 0) {
        const double wp_full = asymptotic_exponent(fits[winner]) / 2.0;
        const double wp_alt = asymptotic_exponent(fits[sel.runner_up]) / 2.0;
        if (std::abs(wp_full - wp_alt) <= opt.guard) {
            sel.chosen = sel.runner_up;
            sel.guard_applied = true;
        }
    }
    sel.exponent = asymptotic_exponent(fits[sel.chosen]);
    return sel;
}

FitReport fit_series(const LogSeries& series, const RegressOptions& options) {
    FitReport report;
    for (Family f : kAllFamilies) {
        auto fit = fit_family(series, f, options);
        if (!fit.feasible) report.skipped.push_back(std::string(to_string(f)) + ": " + fit.note);
        report.fits.push_back(std::move(fit));
    }
    // Full model: L3, or the largest linear family that could be fitted.
    int full = -1;
    for (Family f : {Family::L3, Family::L2, Family::L1}) {
        const int idx = static_cast<int>(f);
        if (report.fits[idx].feasible) {
            full = idx;
            break;
        }
    }
    if (full < 0) throw std::invalid_argument("fit_series: no linear family could be fitted");
    if (options.full_is_largest_b)
        for (int i = 0; i < static_cast<int>(report.fits.size()); ++i)
            if (report.fits[i].feasible && report.fits[i].b > report.fits[full].b) full = i;
    const PiecewiseFit full_fit = report.fits[full];
    for (auto& fit : report.fits) compute_criteria(fit, full_fit, series);
    report.selection = select_model(report.fits, options);
    return report;
}

nlohmann::json fit_to_json(const PiecewiseFit& fit, const LogSeries& series, const std::vector<int>& n_values) {
    nlohmann::json j;
    j["family"] = std::string(to_string(fit.family));
    j["feasible"] = fit.feasible;
    if (!fit.feasible) {
        j["note"] = fit.note;
        return j;
    }
    auto n_at = [&](int i) -> nlohmann::json {
        if (i >= 0 && i < static_cast<int>(n_values.size())) return n_values[i];
        return std::exp(series.x[i]);
    };
    j["b"] = fit.b;
    j["sse"] = fit.sse;
    j["interpolated_points"] = fit.interp_points;
    nlohmann::json bps = nlohmann::json::array();
    if (fit.interp_points > 0) bps.push_back(n_at(fit.interp_points));
    for (int k : fit.knots) bps.push_back(n_at(k));
    j["breakpoints"] = bps;
    nlohmann::json segs = nlohmann::json::array();
    const auto ranges = fit.segment_ranges(series.size());
    for (std::size_t i = 0; i < fit.slopes.size(); ++i)
        segs.push_back({{"from_n", n_at(ranges[i].first)},
                        {"to_n", n_at(ranges[i].second)},
                        {"slope", fit.slopes[i]},
                        {"intercept", fit.intercepts[i]}});
    j["segments"] = segs;
    auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(); };
    j["criteria"] = {{"adj_r2", opt(fit.criteria.adj_r2)},
                     {"aicc", opt(fit.criteria.aicc)},
                     {"f_value", opt(fit.criteria.f_value)},
                     {"cp", opt(fit.criteria.cp)}};
    j["two_wp"] = asymptotic_exponent(fit);
    return j;
}

nlohmann::json report_to_json(const FitReport& report, const LogSeries& series, const std::vector<int>& n_values,
                              const RegressOptions& options) {
    nlohmann::json j;
    nlohmann::json fits = nlohmann::json::array();
    for (std::size_t i = 0; i < report.fits.size(); ++i) {
        auto f = fit_to_json(report.fits[i], series, n_values);
        f["chosen"] = static_cast<int>(i) == report.selection.chosen;
        f["votes"] = report.selection.votes[i];
        fits.push_back(std::move(f));
    }
    j["fits"] = fits;
    j["chosen"] = std::string(to_string(report.chosen().family));
    j["voted"] = std::string(to_string(report.fits[report.selection.voted].family));
    j["guard_applied"] = report.selection.guard_applied;
    j["two_wp"] = report.selection.exponent;
    j["skipped"] = report.skipped;
    j["conventions"] = {
        {"breakpoint_search", "exhaustive over data indices"},
        {"parameter_counts", "L1=2, L2=4, L3=6, I+L=s+3, I+LL=s+5 (s interpolated points)"},
        {"full_model", options.full_is_largest_b ? "feasible family with the largest b" : "L3 (largest linear family available)"},
        {"f_value_ranking", "smaller is better; undefined for the full model and larger b"},
        {"cp_ranking", "smallest |Cp - b|; undefined for the full model"},
        {"interp_drop", options.interp_drop},
        {"min_segment_points", options.min_segment_points},
        {"min_segment_fraction", options.min_segment_fraction},
        {"max_interp_fraction", options.max_interp_fraction},
        {"min_segment_span", options.min_segment_span},
        {"guard", options.guard},
        {"vote_tie_break", "fewest parameters"}};
    return j;
}

}  // namespace aqem
