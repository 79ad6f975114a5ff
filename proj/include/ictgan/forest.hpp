// Random-forest classifier: bootstrap-resampled Gini trees with sqrt(d)
// feature subsampling per split.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ictgan/common.hpp"

namespace ictgan {

struct ForestConfig {
    int tree_count = 100;
    int min_leaf = 1;
    int max_depth = 0;  // 0 = unlimited
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;          // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    std::int64_t class_counts[2] = {0, 0};  // leaf only: [negative, positive]
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    int predict_leaf(const std::vector<double>& x) const {
        int idx = 0;
        while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(idx)];
            idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return idx;
    }

    int predict(const std::vector<double>& x) const {
        const auto& leaf = nodes[static_cast<std::size_t>(predict_leaf(x))];
        return leaf.class_counts[1] > leaf.class_counts[0] ? 1 : 0;
    }
};

class RandomForest {
public:
    ForestConfig config;
    std::vector<DecisionTree> trees;
    int feature_count = 0;

    // Labels are 0 (interictal) / 1 (ictal). Deterministic per seed; per-tree
    // sub-seeds are derived so results do not depend on build order.
    void fit(const std::vector<std::vector<double>>& features, const std::vector<int>& labels) {
        if (features.size() != labels.size() || features.empty())
            throw DimensionError("forest fit: rows and labels must match and be non-empty");
        const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
        const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
        if (!has0 || !has1) throw StateError("forest fit: training set has a single class");
        feature_count = static_cast<int>(features[0].size());
        const int mtry =
            std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(feature_count)))));
        trees.clear();
        trees.reserve(static_cast<std::size_t>(config.tree_count));
        for (int t = 0; t < config.tree_count; ++t) {
            Rng rng(Rng::derive_seed(config.seed, static_cast<std::uint64_t>(t) + 7919));
            std::vector<std::size_t> rows;
            if (config.bootstrap) {
                rows.resize(features.size());
                for (auto& r : rows)
                    r = static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(features.size()) - 1));
            } else {
                rows.resize(features.size());
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            DecisionTree tree;
            grow(tree, features, labels, std::move(rows), mtry, 0, rng);
            trees.push_back(std::move(tree));
        }
    }

    // Fraction of trees voting ictal.
    double predict_proba(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != feature_count)
            throw DimensionError("forest predict: feature dimension " + std::to_string(x.size()) +
                                 " does not match training dimension " +
                                 std::to_string(feature_count));
        int votes = 0;
        for (const auto& t : trees) votes += t.predict(x);
        return static_cast<double>(votes) / static_cast<double>(trees.size());
    }

    // Majority vote; exact ties go to interictal.
    int predict(const std::vector<double>& x) const { return predict_proba(x) > 0.5 ? 1 : 0; }

    // Canonical text form, used for determinism checks.
    std::string serialize() const {
        std::ostringstream os;
        os.precision(17);
        os << feature_count << ";" << trees.size() << "\n";
        for (const auto& t : trees) {
            for (const auto& n : t.nodes)
                os << n.feature << "," << n.threshold << "," << n.left << "," << n.right << ","
                   << n.class_counts[0] << "," << n.class_counts[1] << ";";
            os << "\n";
        }
        return os.str();
    }

private:
    void grow(DecisionTree& tree, const std::vector<std::vector<double>>& features,
              const std::vector<int>& labels, std::vector<std::size_t> rows, int mtry, int depth,
              Rng& rng) {
        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        std::int64_t counts[2] = {0, 0};
        for (auto r : rows) counts[labels[r]] += 1;

        const bool pure = counts[0] == 0 || counts[1] == 0;
        const bool depth_capped = config.max_depth > 0 && depth >= config.max_depth;
        if (pure || depth_capped || static_cast<int>(rows.size()) <= config.min_leaf) {
            make_leaf(tree, node_idx, counts);
            return;
        }

        // Best Gini split over a random feature subset; thresholds are
        // midpoints between consecutive distinct observed values.
        int best_feature = -1;
        double best_threshold = 0, best_impurity = gini(counts);
        std::vector<int> candidates(static_cast<std::size_t>(feature_count));
        std::iota(candidates.begin(), candidates.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(i, static_cast<std::int64_t>(candidates.size()) - 1));
            std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
        }
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (int ci = 0; ci < mtry; ++ci) {
            const int f = candidates[static_cast<std::size_t>(ci)];
            vals.clear();
            for (auto r : rows) vals.emplace_back(features[r][static_cast<std::size_t>(f)], labels[r]);
            std::sort(vals.begin(), vals.end());
            std::int64_t left[2] = {0, 0};
            std::int64_t right[2] = {counts[0], counts[1]};
            const auto total = static_cast<double>(rows.size());
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left[vals[i].second] += 1;
                right[vals[i].second] -= 1;
                if (vals[i].first == vals[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1), nr = total - nl;
                const double imp = (nl * gini(left) + nr * gini(right)) / total;
                if (imp < best_impurity - 1e-12) {
                    best_impurity = imp;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }
        if (best_feature < 0) {
            make_leaf(tree, node_idx, counts);
            return;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) {
            if (features[r][static_cast<std::size_t>(best_feature)] <= best_threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        if (left_rows.empty() || right_rows.empty()) {
            make_leaf(tree, node_idx, counts);
            return;
        }
        rows.clear();
        rows.shrink_to_fit();
        tree.nodes[static_cast<std::size_t>(node_idx)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_idx)].threshold = best_threshold;
        const int left_idx = static_cast<int>(tree.nodes.size());
        tree.nodes[static_cast<std::size_t>(node_idx)].left = left_idx;
        grow(tree, features, labels, std::move(left_rows), mtry, depth + 1, rng);
        const int right_idx = static_cast<int>(tree.nodes.size());
        tree.nodes[static_cast<std::size_t>(node_idx)].right = right_idx;
        grow(tree, features, labels, std::move(right_rows), mtry, depth + 1, rng);
    }

    static void make_leaf(DecisionTree& tree, int idx, const std::int64_t counts[2]) {
        auto& n = tree.nodes[static_cast<std::size_t>(idx)];
        n.feature = -1;
        n.class_counts[0] = counts[0];
        n.class_counts[1] = counts[1];
    }

    static double gini(const std::int64_t counts[2]) {
        const double n = static_cast<double>(counts[0] + counts[1]);
        if (n == 0) return 0;
        const double p0 = static_cast<double>(counts[0]) / n;
        const double p1 = static_cast<double>(counts[1]) / n;
        return 1.0 - p0 * p0 - p1 * p1;
    }
};

}  // namespace ictgan
