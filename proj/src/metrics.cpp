#include "speedcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "speedcal/errors.hpp"

namespace speedcal {

void validate(const GroundTruthTrace& trace) {
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        if (!(trace.samples[i].second >= 0.0))
            throw Error("ground-truth speeds must be non-negative");
        if (i > 0 && !(trace.samples[i].first > trace.samples[i - 1].first))
            throw Error("ground-truth timestamps must be strictly increasing");
    }
    if (!(trace.source_rate > 0.0)) throw Error("ground-truth source rate must be positive");
}

namespace {

double interpolate(const GroundTruthTrace& trace, double t) {
    const auto& s = trace.samples;
    auto it = std::lower_bound(s.begin(), s.end(), t,
                               [](const std::pair<double, double>& a, double v) {
                                   return a.first < v;
                               });
    if (it == s.begin()) return it->second;      // t == first timestamp
    if (it == s.end()) return s.back().second;   // t == last timestamp (callers bound t)
    const auto& [t1, v1] = *(it - 1);
    const auto& [t2, v2] = *it;
    if (t == t2) return v2;  // exact at sample instants
    if (t == t1) return v1;
    const double w = (t - t1) / (t2 - t1);
    return v1 + w * (v2 - v1);
}

}  // namespace

std::vector<std::pair<double, double>> align(const GroundTruthTrace& trace,
                                             const SpeedProfile& profile, double fps,
                                             double t0_offset, SpeedKind kind) {
    if (trace.samples.empty()) throw NoOverlap("ground-truth trace is empty");
    const double t_first = trace.samples.front().first;
    const double t_last = trace.samples.back().first;

    std::vector<std::pair<double, double>> pairs;
    for (const SpeedSample& s : profile.samples) {
        const double t = static_cast<double>(s.frame) / fps + t0_offset;
        if (t < t_first || t > t_last) continue;
        const double est =
            kind == SpeedKind::Smoothed ? s.smoothed_speed.value_or(s.raw_speed) : s.raw_speed;
        pairs.emplace_back(interpolate(trace, t), est);
    }
    if (pairs.empty())
        throw NoOverlap("no profile frames fall inside the ground-truth time span");
    return pairs;
}

ValidationReport validation_report(std::span<const std::pair<double, double>> pairs,
                                   std::span<const Appearance> appearances) {
    if (pairs.size() < 2)
        throw InsufficientData("need at least 2 (true, estimated) pairs, got " +
                               std::to_string(pairs.size()));

    ValidationReport rep;
    rep.n_instances = pairs.size();
    const double n = static_cast<double>(pairs.size());

    double sum_err = 0.0, sum_abs = 0.0, sum_sq = 0.0, sum_true = 0.0;
    for (const auto& [truth, est] : pairs) {
        const double e = est - truth;
        sum_err += e;
        sum_abs += std::abs(e);
        sum_sq += e * e;
        sum_true += truth;
    }
    rep.mean_error = sum_err / n;
    rep.mae = sum_abs / n;
    rep.rmse = std::sqrt(sum_sq / n);
    // population sigma, second pass around the mean; together with RMSE and
    // mean_error this satisfies sigma^2 = RMSE^2 - mean_error^2
    double centered_sq = 0.0;
    for (const auto& [truth, est] : pairs) {
        const double d = est - truth - rep.mean_error;
        centered_sq += d * d;
    }
    rep.sigma = std::sqrt(centered_sq / n);

    const double mean_true = sum_true / n;
    double ss_tot = 0.0;
    for (const auto& [truth, est] : pairs) ss_tot += (truth - mean_true) * (truth - mean_true);
    const double ss_res = sum_sq;
    if (ss_tot > 0.0)
        rep.r_squared = 1.0 - ss_res / ss_tot;
    else
        rep.r_squared = ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();

    for (const Appearance& app : appearances) {
        if (app.begin >= app.end || app.end > pairs.size())
            throw InsufficientData("appearance '" + app.id + "' has an empty or invalid range");
        double mt = 0.0, me = 0.0;
        for (std::size_t i = app.begin; i < app.end; ++i) {
            mt += pairs[i].first;
            me += pairs[i].second;
        }
        const double cnt = static_cast<double>(app.end - app.begin);
        mt /= cnt;
        me /= cnt;
        rep.appearances.push_back({app.id, app.label, mt, me, me - mt});
    }
    return rep;
}

double estimate_offset(const GroundTruthTrace& trace, const SpeedProfile& profile, double fps,
                       double search_span_s, double step_s, SpeedKind kind) {
    if (!(step_s > 0.0) || !(search_span_s > 0.0))
        throw Error("offset search span and step must be positive");
    double best_offset = 0.0;
    double best_mse = std::numeric_limits<double>::infinity();
    const auto steps = static_cast<long>(std::floor(search_span_s / step_s));
    for (long i = -steps; i <= steps; ++i) {
        const double offset = static_cast<double>(i) * step_s;
        std::vector<std::pair<double, double>> pairs;
        try {
            pairs = align(trace, profile, fps, offset, kind);
        } catch (const NoOverlap&) {
            continue;
        }
        if (pairs.size() < 10) continue;  // too little overlap to trust
        double mse = 0.0;
        for (const auto& [truth, est] : pairs) mse += (est - truth) * (est - truth);
        mse /= static_cast<double>(pairs.size());
        if (mse < best_mse) {
            best_mse = mse;
            best_offset = offset;
        }
    }
    if (!std::isfinite(best_mse))
        throw NoOverlap("no offset in the search span produced enough overlap");
    return best_offset;
}

std::string format_validation_report(
    std::span<const std::pair<std::string, ValidationReport>> rows) {
    std::string out;
    char buf[256];
    out += "Speed validation report\n";
    out += "=======================\n\n";
    out += "series                 N  mean_err     sigma       MAE      RMSE       R^2\n";
    for (const auto& [label, rep] : rows) {
        std::snprintf(buf, sizeof(buf), "%-18s %7zu  %8.3f  %8.3f  %8.3f  %8.3f  %8.4f\n",
                      label.c_str(), rep.n_instances, rep.mean_error, rep.sigma, rep.mae,
                      rep.rmse, rep.r_squared);
        out += buf;
    }
    for (const auto& [label, rep] : rows) {
        if (rep.appearances.empty()) continue;
        std::snprintf(buf, sizeof(buf), "\nPer-appearance average speeds (%s)\n", label.c_str());
        out += buf;
        out += "appearance    state        true (m/s)   est (m/s)  error (m/s)\n";
        double sum_t = 0.0, sum_e = 0.0;
        for (const AppearanceRow& row : rep.appearances) {
            std::snprintf(buf, sizeof(buf), "%-12s  %-10s  %10.2f  %10.2f  %+10.2f\n",
                          row.id.c_str(), row.label.c_str(), row.mean_true, row.mean_estimated,
                          row.error);
            out += buf;
            sum_t += row.mean_true;
            sum_e += row.mean_estimated;
        }
        const double cnt = static_cast<double>(rep.appearances.size());
        std::snprintf(buf, sizeof(buf), "%-12s  %-10s  %10.2f  %10.2f  %+10.2f\n", "average", "",
                      sum_t / cnt, sum_e / cnt, (sum_e - sum_t) / cnt);
        out += buf;
    }
    return out;
}

}  // namespace speedcal
