// Seizure-detection evaluation protocol: confusion metrics, geometric-mean
// aggregation with degenerate-patient exclusion, Wilcoxon signed-rank
// significance, repeated experiments over both training arms, and report /
// histogram emission.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ictgan/common.hpp"
#include "ictgan/data.hpp"
#include "ictgan/features.hpp"
#include "ictgan/forest.hpp"

namespace ictgan {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;  // ictal is the positive class
};

struct GmeanResult {
    double value = 0;
    bool degenerate = false;  // an empty class was reported as 0
};

// sqrt(sensitivity * specificity), in [0, 1].
inline GmeanResult gmean(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0) return {0.0, true};
    const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return {std::sqrt(sens * spec), false};
}

struct AggregateResult {
    double value = 0;
    bool zero_flag = false;  // some input was 0, forcing the geometric total to 0
};

// Geometric mean over included patients' gmeans.
inline AggregateResult aggregate(const std::vector<double>& values) {
    if (values.empty()) throw StateError("aggregate: empty input");
    double log_sum = 0;
    for (double v : values) {
        if (v < 0) throw StateError("aggregate: negative value");
        if (v == 0) return {0.0, true};
        log_sum += std::log(v);
    }
    return {std::exp(log_sum / static_cast<double>(values.size())), false};
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

struct WilcoxonResult {
    double statistic = 0;  // W+ = sum of positive ranks
    double p_value = 1.0;
    int n = 0;  // non-zero differences
};

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

// Two-sided test; zero differences discarded, tied absolute values receive
// average ranks. Exact sign enumeration for n <= 25, otherwise the normal
// approximation with tie and continuity corrections.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences) {
    std::vector<double> d;
    for (double v : differences)
        if (v != 0.0) d.push_back(v);
    const int n = static_cast<int>(d.size());
    if (n == 0) return {0.0, 1.0, 0};
    if (n < 6 && static_cast<int>(differences.size()) >= 6) {
        // fallthrough: still computable, just low-powered
    }
    if (static_cast<int>(differences.size()) < 6)
        throw StateError("wilcoxon: need at least 6 differences");

    // Average ranks of |d|.
    std::vector<int> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> rank(d.size());
    double tie_term = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() &&
               std::abs(d[order[j]]) == std::abs(d[order[i]]))
            ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    double w_plus = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) w_plus += rank[i];

    WilcoxonResult res;
    res.statistic = w_plus;
    res.n = n;
    if (n <= 25) {
        // Exact null distribution of 2*W+ by subset-sum convolution.
        std::vector<std::int64_t> r2(d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            r2[i] = static_cast<std::int64_t>(std::llround(2.0 * rank[i]));
        const std::int64_t max2 = std::accumulate(r2.begin(), r2.end(), std::int64_t{0});
        std::vector<double> dist(static_cast<std::size_t>(max2) + 1, 0.0);
        dist[0] = 1.0;
        std::int64_t reach = 0;
        for (auto r : r2) {
            for (std::int64_t s = reach; s >= 0; --s)
                if (dist[static_cast<std::size_t>(s)] > 0)
                    dist[static_cast<std::size_t>(s + r)] += dist[static_cast<std::size_t>(s)];
            reach += r;
        }
        const double total = std::pow(2.0, n);
        const auto w2 = static_cast<std::int64_t>(std::llround(2.0 * w_plus));
        double p_le = 0, p_ge = 0;
        for (std::int64_t s = 0; s <= max2; ++s) {
            if (s <= w2) p_le += dist[static_cast<std::size_t>(s)];
            if (s >= w2) p_ge += dist[static_cast<std::size_t>(s)];
        }
        res.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge) / total);
    } else {
        const double mu = static_cast<double>(n) * (n + 1) / 4.0;
        const double var =
            static_cast<double>(n) * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
        const double delta = w_plus - mu;
        const double cc = delta > 0 ? -0.5 : (delta < 0 ? 0.5 : 0.0);  // continuity
        const double z = (delta + cc) / std::sqrt(var);
        res.p_value = 2.0 * (1.0 - detail::normal_cdf(std::abs(z)));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Histogram of per-patient differences (percentage points, 1-point bins)
// ---------------------------------------------------------------------------

struct HistogramBin {
    double lo = 0;  // bin covers [lo, lo + width)
    int count = 0;
};

inline std::vector<HistogramBin> histogram(const std::vector<double>& differences,
                                           double bin_width = 1.0) {
    std::vector<HistogramBin> bins;
    if (differences.empty()) return bins;
    std::map<std::int64_t, int> counts;
    for (double v : differences)
        counts[static_cast<std::int64_t>(std::floor(v / bin_width))] += 1;
    for (auto idx = counts.begin()->first; idx <= counts.rbegin()->first; ++idx)
        bins.push_back({static_cast<double>(idx) * bin_width,
                        counts.count(idx) ? counts[idx] : 0});
    return bins;
}

inline void write_histogram_csv(const std::string& path, const std::vector<HistogramBin>& bins,
                                double bin_width = 1.0) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open histogram CSV: " + path);
    f << "bin_lo,bin_hi,count\n";
    for (const auto& b : bins) f << b.lo << "," << b.lo + bin_width << "," << b.count << "\n";
}

inline void write_histogram_svg(const std::string& path, const std::vector<HistogramBin>& bins,
                                double bin_width = 1.0) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open histogram SVG: " + path);
    const int w = 640, h = 360, margin = 40;
    int max_count = 1;
    for (const auto& b : bins) max_count = std::max(max_count, b.count);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n";
    const double bar_w =
        bins.empty() ? 0 : static_cast<double>(w - 2 * margin) / static_cast<double>(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const double bh = static_cast<double>(bins[i].count) / max_count * (h - 2 * margin);
        f << "<rect x=\"" << margin + bar_w * static_cast<double>(i) << "\" y=\""
          << h - margin - bh << "\" width=\"" << bar_w * 0.9 << "\" height=\"" << bh
          << "\" fill=\"#4472c4\"/>\n";
        f << "<text x=\"" << margin + bar_w * (static_cast<double>(i) + 0.45) << "\" y=\""
          << h - margin + 14 << "\" font-size=\"9\" text-anchor=\"middle\">" << bins[i].lo
          << "</text>\n";
    }
    f << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
      << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    f << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct PatientResult {
    std::string patient_id;
    double baseline_gmean = 0;   // fraction in [0,1], mean over repeats
    double synthetic_gmean = 0;
    double baseline_sd = 0;
    double synthetic_sd = 0;
    int repeats = 0;
    bool excluded = false;
};

struct ExperimentReport {
    std::vector<PatientResult> patients;
    std::vector<std::string> exclusions;               // below-floor patients
    std::vector<std::pair<std::string, std::string>> skips;  // patient, reason
    double baseline_total = 0;   // percent
    double synthetic_total = 0;  // percent
    double total_difference = 0;
    bool zero_flag = false;
    WilcoxonResult wilcoxon;
    std::vector<HistogramBin> difference_histogram;  // percentage points
    WarningLog warnings;
};

struct ExperimentConfig {
    int repeats = 15;
    int train_per_class = 2000;
    double exclusion_floor = 0.30;  // both arms below this fraction -> excluded
    std::uint64_t seed = 1;
    SegmentConfig segment;
    FeatureConfig features;
    ForestConfig forest;  // tree_count 100 by default
    std::vector<std::string> only_patients;  // empty = evaluate every patient
};

namespace detail {

// Feature cache keyed by sample content (FNV-1a over values + identity).
class FeatureCache {
public:
    explicit FeatureCache(const FeatureConfig& cfg, WarningLog* warnings)
        : cfg_(cfg), warnings_(warnings) {}

    const FeatureVector& get(const EegSample& s) {
        const std::uint64_t key = hash(s);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(key, extract_features(s, cfg_, warnings_)).first->second;
    }

private:
    static std::uint64_t hash(const EegSample& s) {
        std::uint64_t h = 1469598103934665603ULL;
        auto mix = [&h](const void* p, std::size_t len) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < len; ++i) {
                h ^= b[i];
                h *= 1099511628211ULL;
            }
        };
        mix(s.values.data(), s.values.size() * sizeof(float));
        mix(s.patient_id.data(), s.patient_id.size());
        const int meta[2] = {static_cast<int>(s.label), static_cast<int>(s.origin)};
        mix(meta, sizeof(meta));
        return h;
    }

    FeatureConfig cfg_;
    WarningLog* warnings_;
    std::map<std::uint64_t, FeatureVector> cache_;
};

inline double stddev(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0;
    double s = 0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

inline void finalize_report(ExperimentReport& report, double exclusion_floor);

// Runs the two-arm protocol: per patient and repeat, build evaluation sets,
// extract features, fit a forest per arm, and score on the shared test set.
// Patients whose both arms fall below the exclusion floor are excluded from
// the totals; patients whose test sets cannot be built are skipped.
inline ExperimentReport run_experiment(
    const Dataset& dataset,
    const std::map<std::string, std::vector<EegSample>>& synthetic_pools,
    const ExperimentConfig& cfg) {
    ExperimentReport report;
    detail::FeatureCache cache(cfg.features, &report.warnings);

    // Cross-patient real ictal pools (training windows from everyone else).
    std::map<std::string, std::vector<EegSample>> cross_pools;
    for (const auto& target : dataset.patients) {
        auto& pool = cross_pools[target.patient_id];
        for (const auto& other : dataset.patients) {
            if (other.patient_id == target.patient_id) continue;
            auto windows = segment(other, SegmentPurpose::detector_train, Label::ictal,
                                   cfg.segment, &report.warnings);
            pool.insert(pool.end(), windows.begin(), windows.end());
        }
    }

    for (const auto& target : dataset.patients) {
        if (!cfg.only_patients.empty() &&
            std::find(cfg.only_patients.begin(), cfg.only_patients.end(), target.patient_id) ==
                cfg.only_patients.end())
            continue;
        const auto synth_it = synthetic_pools.find(target.patient_id);
        if (synth_it == synthetic_pools.end() || synth_it->second.empty()) {
            report.skips.emplace_back(target.patient_id, "no synthetic pool");
            continue;
        }
        std::vector<double> base_runs, synth_runs;
        std::string skip_reason;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            EvalSetConfig ev;
            ev.train_per_class = cfg.train_per_class;
            ev.seed = Rng::derive_seed(cfg.seed,
                                       std::hash<std::string>{}(target.patient_id) * 1000 +
                                           static_cast<std::uint64_t>(rep));
            EvalSets sets;
            try {
                sets = build_eval_sets(target, synth_it->second, cross_pools[target.patient_id],
                                       cfg.segment, ev, &report.warnings);
            } catch (const StateError& e) {
                skip_reason = e.what();
                break;
            }

            auto arm_gmean = [&](const std::vector<EegSample>& train) {
                std::vector<std::vector<double>> rows;
                std::vector<int> labels;
                for (const auto& s : train) {
                    rows.push_back(cache.get(s).values);
                    labels.push_back(s.label == Label::ictal ? 1 : 0);
                }
                RandomForest forest;
                forest.config = cfg.forest;
                forest.config.seed = Rng::derive_seed(ev.seed, 0xF03E57);
                forest.fit(rows, labels);
                ConfusionCounts c;
                for (const auto& s : sets.test) {
                    const int truth = s.label == Label::ictal ? 1 : 0;
                    const int pred = forest.predict(cache.get(s).values);
                    if (truth == 1 && pred == 1) ++c.tp;
                    else if (truth == 1) ++c.fn;
                    else if (pred == 0) ++c.tn;
                    else ++c.fp;
                }
                return gmean(c).value;
            };
            base_runs.push_back(arm_gmean(sets.baseline_train));
            synth_runs.push_back(arm_gmean(sets.target_train));
        }
        if (!skip_reason.empty() || base_runs.empty()) {
            report.skips.emplace_back(target.patient_id,
                                      skip_reason.empty() ? "no repeats completed" : skip_reason);
            continue;
        }
        PatientResult pr;
        pr.patient_id = target.patient_id;
        pr.repeats = static_cast<int>(base_runs.size());
        for (double v : base_runs) pr.baseline_gmean += v;
        pr.baseline_gmean /= static_cast<double>(base_runs.size());
        for (double v : synth_runs) pr.synthetic_gmean += v;
        pr.synthetic_gmean /= static_cast<double>(synth_runs.size());
        pr.baseline_sd = detail::stddev(base_runs, pr.baseline_gmean);
        pr.synthetic_sd = detail::stddev(synth_runs, pr.synthetic_gmean);
        report.patients.push_back(std::move(pr));
    }

    finalize_report(report, cfg.exclusion_floor);
    return report;
}

// Applies the exclusion rule and recomputes totals, significance, and the
// difference histogram from the per-patient rows.
inline void finalize_report(ExperimentReport& report, double exclusion_floor) {
    report.exclusions.clear();
    std::vector<double> base_vals, synth_vals, diffs_pct;
    for (auto& pr : report.patients) {
        pr.excluded =
            pr.baseline_gmean < exclusion_floor && pr.synthetic_gmean < exclusion_floor;
        if (pr.excluded) {
            report.exclusions.push_back(pr.patient_id);
            continue;
        }
        base_vals.push_back(pr.baseline_gmean * 100.0);
        synth_vals.push_back(pr.synthetic_gmean * 100.0);
        diffs_pct.push_back((pr.synthetic_gmean - pr.baseline_gmean) * 100.0);
    }
    if (base_vals.empty()) {
        report.baseline_total = report.synthetic_total = report.total_difference = 0;
        return;
    }
    const auto base_agg = aggregate(base_vals);
    const auto synth_agg = aggregate(synth_vals);
    report.baseline_total = base_agg.value;
    report.synthetic_total = synth_agg.value;
    report.total_difference = synth_agg.value - base_agg.value;
    report.zero_flag = base_agg.zero_flag || synth_agg.zero_flag;
    report.wilcoxon = diffs_pct.size() >= 6 ? wilcoxon_signed_rank(diffs_pct)
                                            : WilcoxonResult{0, 1.0, 0};
    report.difference_histogram = histogram(diffs_pct, 1.0);
}

// Self-consistency: totals must be recomputable from the per-patient rows.
inline bool verify_report_consistency(const ExperimentReport& report, double tol = 1e-9) {
    std::vector<double> base_vals, synth_vals;
    for (const auto& pr : report.patients) {
        if (pr.excluded) continue;
        base_vals.push_back(pr.baseline_gmean * 100.0);
        synth_vals.push_back(pr.synthetic_gmean * 100.0);
    }
    if (base_vals.empty()) return report.baseline_total == 0;
    return std::abs(aggregate(base_vals).value - report.baseline_total) < tol &&
           std::abs(aggregate(synth_vals).value - report.synthetic_total) < tol &&
           std::abs(report.synthetic_total - report.baseline_total - report.total_difference) <
               tol;
}

inline void write_report_csv(const std::string& path, const ExperimentReport& report) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open report CSV: " + path);
    f.precision(6);
    f << "patient,baseline_pct,synthetic_pct,difference_pct,baseline_sd,synthetic_sd,repeats,"
         "excluded\n";
    for (const auto& pr : report.patients)
        f << pr.patient_id << "," << pr.baseline_gmean * 100 << "," << pr.synthetic_gmean * 100
          << "," << (pr.synthetic_gmean - pr.baseline_gmean) * 100 << "," << pr.baseline_sd * 100
          << "," << pr.synthetic_sd * 100 << "," << pr.repeats << "," << (pr.excluded ? 1 : 0)
          << "\n";
    f << "TOTAL," << report.baseline_total << "," << report.synthetic_total << ","
      << report.total_difference << ",,,,\n";
}

inline void write_report_json(const std::string& path, const ExperimentReport& report) {
    nlohmann::json j;
    j["patients"] = nlohmann::json::array();
    for (const auto& pr : report.patients)
        j["patients"].push_back({{"patient", pr.patient_id},
                                 {"baseline_pct", pr.baseline_gmean * 100},
                                 {"synthetic_pct", pr.synthetic_gmean * 100},
                                 {"difference_pct", (pr.synthetic_gmean - pr.baseline_gmean) * 100},
                                 {"baseline_sd", pr.baseline_sd * 100},
                                 {"synthetic_sd", pr.synthetic_sd * 100},
                                 {"repeats", pr.repeats},
                                 {"excluded", pr.excluded}});
    j["exclusions"] = report.exclusions;
    j["skips"] = nlohmann::json::array();
    for (const auto& [pid, reason] : report.skips)
        j["skips"].push_back({{"patient", pid}, {"reason", reason}});
    j["baseline_total"] = report.baseline_total;
    j["synthetic_total"] = report.synthetic_total;
    j["total_difference"] = report.total_difference;
    j["wilcoxon"] = {{"statistic", report.wilcoxon.statistic},
                     {"p_value", report.wilcoxon.p_value},
                     {"n", report.wilcoxon.n}};
    j["histogram"] = nlohmann::json::array();
    for (const auto& b : report.difference_histogram)
        j["histogram"].push_back({{"bin_lo", b.lo}, {"count", b.count}});
    j["warnings"] = report.warnings;
    std::ofstream f(path);
    if (!f) throw IoError("cannot open report JSON: " + path);
    f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Published per-patient reference table (fixture)
// ---------------------------------------------------------------------------

struct ReferenceRow {
    std::string patient_id;
    double baseline_pct = 0;
    double synthetic_pct = 0;
};

inline std::vector<ReferenceRow> read_reference_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open reference table: " + path);
    std::vector<ReferenceRow> rows;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string pid, b, s;
        if (!std::getline(ss, pid, ',') || !std::getline(ss, b, ',') || !std::getline(ss, s))
            throw FormatError("reference table: bad row '" + line + "'");
        rows.push_back({pid, std::stod(b), std::stod(s)});
    }
    if (rows.empty()) throw FormatError("reference table is empty: " + path);
    return rows;
}

// Recomputes the published aggregates from the fixture: totals, significance,
// and the two histogram claims.
struct VerificationCheck {
    std::string name;
    double value = 0;
    double expected = 0;
    double tolerance = 0;
    bool passed = false;
};

struct VerificationResult {
    std::vector<VerificationCheck> checks;
    bool all_passed = true;
};

inline VerificationResult run_reference_verification(const std::vector<ReferenceRow>& rows,
                                                     double total_tol = 0.15,
                                                     double diff_tol = 0.1,
                                                     double p_tol = 0.003,
                                                     double exclusion_floor_pct = 30.0) {
    std::vector<double> base, synth, diffs;
    for (const auto& r : rows) {
        if (r.baseline_pct < exclusion_floor_pct && r.synthetic_pct < exclusion_floor_pct)
            continue;
        base.push_back(r.baseline_pct);
        synth.push_back(r.synthetic_pct);
        diffs.push_back(r.synthetic_pct - r.baseline_pct);
    }
    VerificationResult res;
    auto add = [&](const std::string& name, double value, double expected, double tol) {
        VerificationCheck c{name, value, expected, tol, std::abs(value - expected) <= tol};
        res.all_passed = res.all_passed && c.passed;
        res.checks.push_back(std::move(c));
    };
    add("baseline_total", aggregate(base).value, 74.57, total_tol);
    add("synthetic_total", aggregate(synth).value, 75.78, total_tol);
    add("total_difference", aggregate(synth).value - aggregate(base).value, 1.21, diff_tol);
    add("wilcoxon_p", wilcoxon_signed_rank(diffs).p_value, 0.0098, p_tol);
    int above = 0, below = 0;
    for (double d : diffs) {
        if (d > 1.0) ++above;
        if (d < -1.0) ++below;
    }
    add("improved_above_1pct", above, 20, 0);
    add("degraded_below_1pct", below, 4, 0);
    return res;
}

}  // namespace ictgan
