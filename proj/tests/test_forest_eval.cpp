// Classifier and evaluation-protocol tests: forest behavior on separable
// data, the gmean/aggregation arithmetic, the signed-rank test against the
// bundled reference table, and report plumbing.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "ictgan/eval.hpp"
#include "ictgan/forest.hpp"

using namespace ictgan;

namespace {

// Linearly separable two-cluster data in d dimensions.
void separable_data(Rng& rng, int n_per_class, int d,
                    std::vector<std::vector<double>>& rows, std::vector<int>& labels) {
    for (int cls = 0; cls < 2; ++cls)
        for (int i = 0; i < n_per_class; ++i) {
            std::vector<double> row(static_cast<std::size_t>(d));
            for (auto& v : row) v = rng.uniform(0.0, 1.0) + (cls ? 3.0 : 0.0);
            rows.push_back(std::move(row));
            labels.push_back(cls);
        }
}

#ifndef FIXTURE_PATH
#define FIXTURE_PATH "data/table1_reference.csv"
#endif

std::vector<ReferenceRow> fixture_rows() {
    return read_reference_table(FIXTURE_PATH);
}

}  // namespace

TEST_CASE("forest achieves perfect accuracy on separable data") {
    Rng rng(2);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    separable_data(rng, 60, 5, rows, labels);
    RandomForest forest;
    forest.config.tree_count = 20;
    forest.config.seed = 9;
    forest.fit(rows, labels);
    for (std::size_t i = 0; i < rows.size(); ++i) REQUIRE(forest.predict(rows[i]) == labels[i]);
    REQUIRE(forest.predict_proba(rows[0]) <= 0.5);
    REQUIRE(forest.predict_proba(rows.back()) > 0.5);
}

TEST_CASE("forest training is deterministic per seed and rejects bad input") {
    Rng rng(4);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    separable_data(rng, 30, 4, rows, labels);
    RandomForest a, b;
    a.config.tree_count = b.config.tree_count = 10;
    a.config.seed = b.config.seed = 17;
    a.fit(rows, labels);
    b.fit(rows, labels);
    REQUIRE(a.serialize() == b.serialize());

    RandomForest c;
    c.config.seed = 18;
    c.config.tree_count = 10;
    c.fit(rows, labels);
    REQUIRE(a.serialize() != c.serialize());

    RandomForest bad;
    std::vector<std::vector<double>> one_class_rows = {{1.0}, {2.0}};
    REQUIRE_THROWS_AS(bad.fit(one_class_rows, std::vector<int>{1, 1}), StateError);
    REQUIRE_THROWS_AS(bad.fit({}, {}), DimensionError);

    RandomForest fitted = a;
    REQUIRE_THROWS_AS(fitted.predict(std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("forest is invariant under monotone feature transforms") {
    Rng rng(6);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    separable_data(rng, 40, 3, rows, labels);
    auto transformed = rows;
    for (auto& r : transformed)
        for (auto& v : r) v = std::exp(v);  // strictly increasing

    RandomForest a, b;
    a.config.tree_count = b.config.tree_count = 15;
    a.config.seed = b.config.seed = 3;
    a.fit(rows, labels);
    b.fit(transformed, labels);
    for (std::size_t i = 0; i < rows.size(); ++i)
        REQUIRE(a.predict(rows[i]) == b.predict(transformed[i]));
}

TEST_CASE("gmean arithmetic") {
    // sens 0.81, spec 0.64 -> gmean 0.72.
    ConfusionCounts c;
    c.tp = 81;
    c.fn = 19;
    c.tn = 64;
    c.fp = 36;
    auto g = gmean(c);
    REQUIRE(!g.degenerate);
    REQUIRE(g.value == Catch::Approx(0.72).margin(1e-12));

    ConfusionCounts empty_pos;
    empty_pos.tn = 10;
    auto d = gmean(empty_pos);
    REQUIRE(d.degenerate);
    REQUIRE(d.value == 0.0);
}

TEST_CASE("aggregation is the geometric mean and flags zeros") {
    auto r = aggregate({4.0, 9.0});
    REQUIRE(r.value == Catch::Approx(6.0).margin(1e-12));
    REQUIRE(!r.zero_flag);
    auto z = aggregate({4.0, 0.0});
    REQUIRE(z.value == 0.0);
    REQUIRE(z.zero_flag);
    REQUIRE_THROWS_AS(aggregate({}), StateError);
}

TEST_CASE("published totals are recomputed from the reference table") {
    const auto rows = fixture_rows();
    REQUIRE(rows.size() == 30);
    const auto res = run_reference_verification(rows);
    for (const auto& c : res.checks) {
        INFO(c.name << ": got " << c.value << ", expected " << c.expected << " +/- "
                    << c.tolerance);
        REQUIRE(c.passed);
    }
    REQUIRE(res.all_passed);
}

TEST_CASE("a tampered reference table fails verification naming the check") {
    auto rows = fixture_rows();
    rows[0].synthetic_pct = 40.0;  // break patient 1
    const auto res = run_reference_verification(rows);
    REQUIRE(!res.all_passed);
    bool total_failed = false;
    for (const auto& c : res.checks)
        if (c.name == "synthetic_total" && !c.passed) total_failed = true;
    REQUIRE(total_failed);
}

TEST_CASE("signed-rank exact branch agrees with the approximation at n = 20") {
    Rng rng(11);
    std::vector<double> diffs;
    for (int i = 0; i < 20; ++i) diffs.push_back(rng.uniform(-2.0, 3.0));
    const auto exact = wilcoxon_signed_rank(diffs);  // n = 20 <= 25: exact DP
    REQUIRE(exact.n == 20);

    // Force the approximate branch by padding with pairs of opposite
    // differences is not size-neutral; instead compare against scaled copies:
    // replicate each difference with a tiny distinct perturbation so ranks are
    // preserved in structure while n grows past 25.
    std::vector<double> grown;
    for (double d : diffs) {
        grown.push_back(d);
        grown.push_back(d * 1.0000001);
    }
    const auto approx = wilcoxon_signed_rank(grown);
    REQUIRE(approx.n == 40);
    // Doubling consistent evidence must not weaken significance.
    REQUIRE(approx.p_value <= exact.p_value + 0.05);
}

TEST_CASE("signed-rank edge cases") {
    REQUIRE(wilcoxon_signed_rank({0, 0, 0, 0, 0, 0}).p_value == 1.0);
    REQUIRE_THROWS_AS(wilcoxon_signed_rank({1.0, 2.0}), StateError);

    // All positive: one-sided mass 1/2^n at the top, doubled.
    std::vector<double> pos = {1, 2, 3, 4, 5, 6};
    const auto r = wilcoxon_signed_rank(pos);
    REQUIRE(r.statistic == Catch::Approx(21.0));
    REQUIRE(r.p_value == Catch::Approx(2.0 / 64.0).margin(1e-12));
}

TEST_CASE("signed-rank handles ties via average ranks") {
    // |d| = {1,1,2,2,2,3}: ranks 1.5,1.5,4,4,4,6.
    std::vector<double> d = {1, -1, 2, 2, -2, 3};
    const auto r = wilcoxon_signed_rank(d);
    REQUIRE(r.statistic == Catch::Approx(1.5 + 4 + 4 + 6));
}

TEST_CASE("histogram bins differences at one-point width") {
    std::vector<double> diffs = {-1.4, -0.2, 0.1, 0.4, 1.2, 2.7, 2.9};
    auto bins = histogram(diffs, 1.0);
    REQUIRE(bins.front().lo == -2.0);
    REQUIRE(bins.back().lo == 2.0);
    std::int64_t total = 0;
    for (const auto& b : bins) total += b.count;
    REQUIRE(total == 7);
    for (const auto& b : bins)
        if (b.lo == 2.0) REQUIRE(b.count == 2);
    // Fixture claims: 20 improved above +1, exactly 4 degraded below -1.
    const auto rows = fixture_rows();
    int above = 0, below = 0;
    for (const auto& r : rows) {
        if (r.baseline_pct < 30 && r.synthetic_pct < 30) continue;
        const double diff = r.synthetic_pct - r.baseline_pct;
        if (diff > 1.0) ++above;
        if (diff < -1.0) ++below;
    }
    REQUIRE(above == 20);
    REQUIRE(below == 4);
}

TEST_CASE("report finalization applies the exclusion floor and self-checks") {
    ExperimentReport report;
    PatientResult a;
    a.patient_id = "a";
    a.baseline_gmean = 0.80;
    a.synthetic_gmean = 0.85;
    PatientResult b;
    b.patient_id = "b";
    b.baseline_gmean = 0.20;  // both below the floor: excluded
    b.synthetic_gmean = 0.10;
    PatientResult c;
    c.patient_id = "c";
    c.baseline_gmean = 0.25;  // one arm above the floor: kept
    c.synthetic_gmean = 0.55;
    report.patients = {a, b, c};
    finalize_report(report, 0.30);

    REQUIRE(report.exclusions == std::vector<std::string>{"b"});
    REQUIRE(report.patients[1].excluded);
    REQUIRE(!report.patients[2].excluded);
    REQUIRE(report.baseline_total ==
            Catch::Approx(std::sqrt(80.0 * 25.0)).margin(1e-9));
    REQUIRE(report.synthetic_total ==
            Catch::Approx(std::sqrt(85.0 * 55.0)).margin(1e-9));
    REQUIRE(verify_report_consistency(report));

    report.baseline_total += 1.0;  // tamper
    REQUIRE(!verify_report_consistency(report));
}

TEST_CASE("report emission writes JSON, CSV, and histogram artifacts") {
    ExperimentReport report;
    PatientResult a;
    a.patient_id = "a";
    a.baseline_gmean = 0.8;
    a.synthetic_gmean = 0.9;
    a.repeats = 2;
    report.patients = {a};
    finalize_report(report, 0.3);

    write_report_json("test_report.json", report);
    write_report_csv("test_report.csv", report);
    write_histogram_csv("test_hist.csv", report.difference_histogram);
    write_histogram_svg("test_hist.svg", report.difference_histogram);

    std::ifstream j("test_report.json");
    std::string all((std::istreambuf_iterator<char>(j)), std::istreambuf_iterator<char>());
    REQUIRE(all.find("baseline_total") != std::string::npos);
    std::ifstream c("test_report.csv");
    std::string header;
    std::getline(c, header);
    REQUIRE(header.rfind("patient,baseline_pct,synthetic_pct", 0) == 0);
    std::ifstream s("test_hist.svg");
    std::string svg((std::istreambuf_iterator<char>(s)), std::istreambuf_iterator<char>());
    REQUIRE(svg.find("<svg") != std::string::npos);
    for (const char* p : {"test_report.json", "test_report.csv", "test_hist.csv", "test_hist.svg"})
        std::remove(p);
}
