#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace anteriseg::eval {

// ---------------------------------------------------------------------------
// Distribution functions

double cdf_normal(double z);
double cdf_chi2(double x, double df);
double cdf_f(double x, double d1, double d2);

// ---------------------------------------------------------------------------
// Classification metrics

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);

    std::size_t classes() const { return c_; }
    std::size_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * c_ + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * c_ + pred]; }

    std::size_t total() const;
    std::size_t tp(std::size_t c) const { return at(c, c); }
    std::size_t fp(std::size_t c) const;
    std::size_t fn(std::size_t c) const;
    std::size_t tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

    nlohmann::json to_json() const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t c_;
    std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t classes);

struct ClassMetrics {
    double precision = 0, recall = 0, f1 = 0;
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    double accuracy = 0;
    /// Classes where a 0/0 ratio was replaced by 0.
    std::vector<std::string> warnings;

    nlohmann::json to_json(std::span<const std::string> class_names = {}) const;
};

MetricsReport metrics(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// Ranking curves

struct CurvePoint {
    double x, y;
};

struct ClassCurves {
    std::vector<CurvePoint> roc;  // (FPR, TPR) from (0,0) to (1,1)
    std::vector<CurvePoint> pr;   // (recall, precision)
    double auc = 0;
    double average_precision = 0;
};

struct CurveSet {
    /// Absent when the class has no positives or no negatives.
    std::vector<std::optional<ClassCurves>> per_class;
    std::vector<CurvePoint> macro_roc;
    std::vector<CurvePoint> macro_pr;
    double macro_auc = 0;
    double macro_ap = 0;
};

/// One-vs-rest curves for a single score column.
std::optional<ClassCurves> binary_curves(std::span<const double> scores, std::span<const bool> positive);

/// scores is row-major [samples x classes]; rows must sum to 1.
CurveSet roc_pr(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t classes);

// ---------------------------------------------------------------------------
// Hypothesis tests

struct StatResult {
    std::string test;
    double statistic = 0;
    std::optional<double> df1, df2;
    double p_value = 1;
    std::string correction = "none";
    std::optional<double> raw_p_value;
    std::string label;  // e.g. "Normal vs Controlled" for pairwise tests

    nlohmann::json to_json() const;
};

using Groups = std::vector<std::vector<double>>;

StatResult anova_oneway(const Groups& groups);
StatResult kruskal_wallis(const Groups& groups);
std::vector<StatResult> dunn_posthoc(const Groups& groups, const std::vector<std::string>& names = {});
StatResult cohens_kappa(std::span<const std::size_t> rater_a, std::span<const std::size_t> rater_b,
                        std::size_t classes);

/// Mid-ranks (1-based) of the pooled values; ties share their average rank.
std::vector<double> midranks(std::span<const double> values);

struct Summary {
    std::size_t n = 0;
    double mean = 0, sd = 0;  // sample sd (n - 1); 0 when n < 2
};
Summary summarize(std::span<const double> values);

}  // namespace anteriseg::eval
