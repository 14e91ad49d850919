#include "anteriseg/evalstat.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>

#include "anteriseg/error.hpp"

namespace anteriseg::eval {

// ---------------------------------------------------------------------------
// Distribution functions. Upper tails go through the complemented special
// functions so tiny p-values keep their relative accuracy.

namespace {

double sf_normal(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double sf_chi2(double x, double df) {
    require(df > 0 && std::isfinite(df), "chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw ValidationError("chi-square argument is NaN");
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double sf_f(double x, double d1, double d2) {
    require(d1 > 0 && d2 > 0 && std::isfinite(d1) && std::isfinite(d2), "F degrees of freedom must be positive");
    if (std::isnan(x)) throw ValidationError("F argument is NaN");
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    // Upper tail as I_{d2/(d2+d1 x)}(d2/2, d1/2) avoids cancellation.
    return boost::math::ibeta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x));
}

}  // namespace

double cdf_normal(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double cdf_chi2(double x, double df) {
    require(df > 0 && std::isfinite(df), "chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw ValidationError("chi-square argument is NaN");
    if (x <= 0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

double cdf_f(double x, double d1, double d2) {
    require(d1 > 0 && d2 > 0 && std::isfinite(d1) && std::isfinite(d2), "F degrees of freedom must be positive");
    if (std::isnan(x)) throw ValidationError("F argument is NaN");
    if (x <= 0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::ibeta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : c_(classes), counts_(classes * classes, 0) {
    require(classes >= 1, "confusion matrix needs at least one class");
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::fp(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < c_; ++t)
        if (t != c) s += at(t, c);
    return s;
}

std::size_t ConfusionMatrix::fn(std::size_t c) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < c_; ++p)
        if (p != c) s += at(c, p);
    return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
    auto rows = nlohmann::json::array();
    for (std::size_t t = 0; t < c_; ++t) {
        auto row = nlohmann::json::array();
        for (std::size_t p = 0; p < c_; ++p) row.push_back(at(t, p));
        rows.push_back(row);
    }
    return rows;
}

ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t classes) {
    require(labels.size() == predictions.size(), "labels and predictions differ in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] < classes && predictions[i] < classes, "class index out of range");
        ++cm.at(labels[i], predictions[i]);
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    require(cm.total() > 0, "metrics require at least one sample");
    MetricsReport r;
    const std::size_t c = cm.classes();
    std::size_t correct = 0;
    for (std::size_t k = 0; k < c; ++k) {
        correct += cm.tp(k);
        const double tp = static_cast<double>(cm.tp(k));
        const double pden = tp + static_cast<double>(cm.fp(k));
        const double rden = tp + static_cast<double>(cm.fn(k));
        ClassMetrics m;
        if (pden > 0)
            m.precision = tp / pden;
        else
            r.warnings.push_back("class " + std::to_string(k) + ": precision 0/0 set to 0");
        if (rden > 0)
            m.recall = tp / rden;
        else
            r.warnings.push_back("class " + std::to_string(k) + ": recall 0/0 set to 0");
        m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        r.per_class.push_back(m);
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
    }
    r.macro_precision /= static_cast<double>(c);
    r.macro_recall /= static_cast<double>(c);
    r.macro_f1 /= static_cast<double>(c);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(cm.total());
    return r;
}

nlohmann::json MetricsReport::to_json(std::span<const std::string> class_names) const {
    nlohmann::json j;
    auto per = nlohmann::json::array();
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        per.push_back({{"class", k < class_names.size() ? class_names[k] : std::to_string(k)},
                       {"precision", per_class[k].precision},
                       {"recall", per_class[k].recall},
                       {"f1", per_class[k].f1}});
    }
    j["per_class"] = per;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    j["accuracy"] = accuracy;
    j["warnings"] = warnings;
    return j;
}

// ---------------------------------------------------------------------------

std::optional<ClassCurves> binary_curves(std::span<const double> scores, std::span<const bool> positive) {
    require(scores.size() == positive.size(), "scores and labels differ in length");
    const auto npos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    const std::size_t nneg = positive.size() - npos;
    if (npos == 0 || nneg == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    ClassCurves out;
    out.roc.push_back({0.0, 0.0});
    out.pr.push_back({0.0, 1.0});
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (positive[order[i]])
            ++tp;
        else
            ++fp;
        const bool group_end = i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]];
        if (!group_end) continue;
        const double tpr = static_cast<double>(tp) / static_cast<double>(npos);
        const double fpr = static_cast<double>(fp) / static_cast<double>(nneg);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const CurvePoint last = out.roc.back();
        out.auc += (fpr - last.x) * (tpr + last.y) * 0.5;
        out.average_precision += (tpr - prev_recall) * precision;
        prev_recall = tpr;
        out.roc.push_back({fpr, tpr});
        out.pr.push_back({tpr, precision});
    }
    return out;
}

namespace {

/// Linear interpolation of y at x over a curve sorted by x; for repeated x
/// (vertical segments) the highest y wins.
double interp_max(const std::vector<CurvePoint>& curve, double x) {
    double best = 0;
    bool found = false;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve[i].x == x) {
            best = found ? std::max(best, curve[i].y) : curve[i].y;
            found = true;
        }
    }
    if (found) return best;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i - 1].x < x && x < curve[i].x) {
            const double t = (x - curve[i - 1].x) / (curve[i].x - curve[i - 1].x);
            return curve[i - 1].y + t * (curve[i].y - curve[i - 1].y);
        }
    }
    return curve.back().y;
}

/// Interpolated precision: best precision at any recall >= r.
double interp_precision(const std::vector<CurvePoint>& pr, double r) {
    double best = 0;
    for (const auto& p : pr)
        if (p.x >= r) best = std::max(best, p.y);
    return best;
}

}  // namespace

CurveSet roc_pr(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t classes) {
    require(classes >= 2, "curves need at least two classes");
    require(scores.size() == labels.size() * classes, "score matrix must be samples x classes");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] < classes, "label out of range");
        double row = 0;
        for (std::size_t k = 0; k < classes; ++k) row += scores[i * classes + k];
        require(std::fabs(row - 1.0) <= 1e-6, "score rows must sum to 1");
    }
    CurveSet set;
    std::vector<double> col(labels.size());
    std::vector<double> fpr_grid, recall_grid;
    for (std::size_t k = 0; k < classes; ++k) {
        std::unique_ptr<bool[]> pos(new bool[labels.size()]);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            col[i] = scores[i * classes + k];
            pos[i] = labels[i] == k;
        }
        auto curves = binary_curves(col, std::span<const bool>(pos.get(), labels.size()));
        if (curves) {
            for (const auto& p : curves->roc) fpr_grid.push_back(p.x);
            for (const auto& p : curves->pr) recall_grid.push_back(p.x);
        }
        set.per_class.push_back(std::move(curves));
    }
    std::size_t present = 0;
    for (const auto& c : set.per_class)
        if (c) {
            ++present;
            set.macro_auc += c->auc;
            set.macro_ap += c->average_precision;
        }
    if (present == 0) return set;
    set.macro_auc /= static_cast<double>(present);
    set.macro_ap /= static_cast<double>(present);

    std::sort(fpr_grid.begin(), fpr_grid.end());
    fpr_grid.erase(std::unique(fpr_grid.begin(), fpr_grid.end()), fpr_grid.end());
    for (double x : fpr_grid) {
        double y = 0;
        for (const auto& c : set.per_class)
            if (c) y += interp_max(c->roc, x);
        set.macro_roc.push_back({x, y / static_cast<double>(present)});
    }
    std::sort(recall_grid.begin(), recall_grid.end());
    recall_grid.erase(std::unique(recall_grid.begin(), recall_grid.end()), recall_grid.end());
    for (double r : recall_grid) {
        double y = 0;
        for (const auto& c : set.per_class)
            if (c) y += interp_precision(c->pr, r);
        set.macro_pr.push_back({r, y / static_cast<double>(present)});
    }
    return set;
}

// ---------------------------------------------------------------------------

nlohmann::json StatResult::to_json() const {
    nlohmann::json j = {{"test", test}, {"statistic", statistic}, {"p_value", p_value}, {"correction", correction}};
    if (df1) j["df1"] = *df1;
    if (df2) j["df2"] = *df2;
    if (raw_p_value) j["raw_p_value"] = *raw_p_value;
    if (!label.empty()) j["label"] = label;
    return j;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = values.size();
    if (s.n == 0) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    if (s.n >= 2) {
        double ss = 0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

StatResult anova_oneway(const Groups& groups) {
    require(groups.size() >= 2, "ANOVA needs at least two groups");
    std::size_t n = 0;
    double grand = 0;
    for (const auto& g : groups) {
        require(g.size() >= 2, "each ANOVA group needs at least two values");
        n += g.size();
        grand += std::accumulate(g.begin(), g.end(), 0.0);
    }
    require(n >= 3, "ANOVA needs at least three values");
    grand /= static_cast<double>(n);
    double ssb = 0, ssw = 0;
    for (const auto& g : groups) {
        const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
        for (double v : g) ssw += (v - mean) * (v - mean);
    }
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(n - groups.size());
    StatResult r{"anova_oneway", 0.0, df1, df2, 1.0, "none", std::nullopt, ""};
    if (ssw <= 0) {
        if (ssb > 0) {
            r.statistic = std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.statistic = (ssb / df1) / (ssw / df2);
    r.p_value = sf_f(r.statistic, df1, df2);
    return r;
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

struct Pooled {
    std::vector<double> ranks;
    std::vector<std::size_t> owner;
    double tie_sum = 0;  // sum over tie groups of t^3 - t
    std::size_t n = 0;
};

Pooled pool_ranks(const Groups& groups) {
    Pooled p;
    std::vector<double> all;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (double v : groups[g]) {
            require(std::isfinite(v), "statistical inputs must be finite");
            all.push_back(v);
            p.owner.push_back(g);
        }
    p.n = all.size();
    p.ranks = midranks(all);
    std::map<double, std::size_t> ties;
    for (double v : all) ++ties[v];
    for (const auto& [v, t] : ties) {
        const double td = static_cast<double>(t);
        p.tie_sum += td * td * td - td;
    }
    return p;
}

}  // namespace

StatResult kruskal_wallis(const Groups& groups) {
    require(groups.size() >= 2, "Kruskal-Wallis needs at least two groups");
    for (const auto& g : groups) require(!g.empty(), "Kruskal-Wallis groups must be non-empty");
    const Pooled p = pool_ranks(groups);
    require(p.n >= 3, "Kruskal-Wallis needs at least three values");
    const double n = static_cast<double>(p.n);
    std::vector<double> rank_sum(groups.size(), 0.0);
    for (std::size_t i = 0; i < p.n; ++i) rank_sum[p.owner[i]] += p.ranks[i];
    double h = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    const double df = static_cast<double>(groups.size() - 1);
    StatResult r{"kruskal_wallis", 0.0, df, std::nullopt, 1.0, "none", std::nullopt, ""};
    const double correction = 1.0 - p.tie_sum / (n * n * n - n);
    if (correction <= 0) return r;
    r.statistic = std::max(0.0, h / correction);
    r.p_value = sf_chi2(r.statistic, df);
    return r;
}

std::vector<StatResult> dunn_posthoc(const Groups& groups, const std::vector<std::string>& names) {
    require(groups.size() >= 2, "Dunn's test needs at least two groups");
    for (const auto& g : groups) require(!g.empty(), "Dunn's test groups must be non-empty");
    const Pooled p = pool_ranks(groups);
    const double n = static_cast<double>(p.n);
    std::vector<double> mean_rank(groups.size(), 0.0);
    for (std::size_t i = 0; i < p.n; ++i) mean_rank[p.owner[i]] += p.ranks[i];
    for (std::size_t g = 0; g < groups.size(); ++g) mean_rank[g] /= static_cast<double>(groups[g].size());
    const double base = n * (n + 1.0) / 12.0 - (n > 1 ? p.tie_sum / (12.0 * (n - 1.0)) : 0.0);
    const double pairs = static_cast<double>(groups.size() * (groups.size() - 1) / 2);
    auto name = [&](std::size_t g) { return g < names.size() ? names[g] : std::to_string(g); };

    std::vector<StatResult> out;
    for (std::size_t a = 0; a < groups.size(); ++a)
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            const double var = base * (1.0 / static_cast<double>(groups[a].size()) +
                                       1.0 / static_cast<double>(groups[b].size()));
            StatResult r{"dunn", 0.0, std::nullopt, std::nullopt, 1.0, "bonferroni", 1.0, name(a) + " vs " + name(b)};
            if (var > 1e-12) {
                r.statistic = (mean_rank[a] - mean_rank[b]) / std::sqrt(var);
                const double raw = std::min(1.0, 2.0 * sf_normal(std::fabs(r.statistic)));
                r.raw_p_value = raw;
                r.p_value = std::min(1.0, pairs * raw);
            }
            out.push_back(std::move(r));
        }
    return out;
}

StatResult cohens_kappa(std::span<const std::size_t> rater_a, std::span<const std::size_t> rater_b,
                        std::size_t classes) {
    require(rater_a.size() == rater_b.size(), "raters must rate the same number of items");
    require(!rater_a.empty(), "kappa needs at least one rated item");
    const double n = static_cast<double>(rater_a.size());
    std::vector<double> ma(classes, 0.0), mb(classes, 0.0);
    double agree = 0;
    for (std::size_t i = 0; i < rater_a.size(); ++i) {
        require(rater_a[i] < classes && rater_b[i] < classes, "rating out of range");
        ma[rater_a[i]] += 1;
        mb[rater_b[i]] += 1;
        if (rater_a[i] == rater_b[i]) agree += 1;
    }
    const double po = agree / n;
    double pe = 0, cross = 0;
    for (std::size_t k = 0; k < classes; ++k) {
        const double a = ma[k] / n, b = mb[k] / n;
        pe += a * b;
        cross += a * b * (a + b);
    }
    StatResult r{"cohens_kappa", 0.0, std::nullopt, std::nullopt, 1.0, "none", std::nullopt, ""};
    if (pe >= 1.0) {
        r.statistic = po >= 1.0 ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (po - pe) / (1.0 - pe);
    // Large-sample standard error under the null of chance agreement.
    const double var0 = (pe + pe * pe - cross) / (n * (1.0 - pe) * (1.0 - pe));
    if (var0 > 0) r.p_value = std::min(1.0, 2.0 * sf_normal(std::fabs(r.statistic) / std::sqrt(var0)));
    return r;
}

}  // namespace anteriseg::eval
