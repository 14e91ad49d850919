#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "anteriseg/error.hpp"
#include "anteriseg/evalstat.hpp"
#include "anteriseg/rng.hpp"
#include "oracles.hpp"
#include "reference_values.hpp"

using namespace anteriseg;
using namespace anteriseg::eval;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<std::size_t>>& rows) {
    ConfusionMatrix cm(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t p = 0; p < rows.size(); ++p) cm.at(t, p) = rows[t][p];
    return cm;
}

double two_sided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace

// --- CDFs -----------------------------------------------------------------

TEST(Cdf, ReferenceTable) {
    for (const auto& c : oracle::kCdfTable) {
        double got = 0;
        if (c.dist == "normal")
            got = cdf_normal(c.x);
        else if (c.dist == "chi2")
            got = cdf_chi2(c.x, c.p1);
        else
            got = cdf_f(c.x, c.p1, c.p2);
        EXPECT_LE(oracle::rel_err(got, c.expected), 1e-10) << c.dist << "(" << c.x << ")";
        EXPECT_NEAR(got, c.expected, 1e-8);
    }
}

TEST(Cdf, Examples) {
    EXPECT_DOUBLE_EQ(cdf_normal(0.0), 0.5);
    EXPECT_NEAR(1.0 - cdf_chi2(7.2, 2), 0.0273, 1e-4);
    for (double d : {1.0, 2.0, 7.0, 30.0, 500.0}) EXPECT_NEAR(cdf_f(1.0, d, d), 0.5, 1e-12);
}

TEST(Cdf, MonotoneAndBounded) {
    for (double df : {0.5, 1.0, 3.0, 10.0, 80.0}) {
        double prev_c = 0, prev_f = 0;
        for (double x = 0; x <= 60; x += 0.25) {
            const double c = cdf_chi2(x, df), f = cdf_f(x, df, df + 2);
            ASSERT_GE(c, prev_c);
            ASSERT_GE(f, prev_f);
            ASSERT_LE(c, 1.0);
            ASSERT_LE(f, 1.0);
            prev_c = c;
            prev_f = f;
        }
    }
    double prev = 0;
    for (double z = -40; z <= 40; z += 0.1) {
        const double p = cdf_normal(z);
        ASSERT_GE(p, prev);
        ASSERT_LE(p, 1.0);
        prev = p;
    }
}

TEST(Cdf, Errors) {
    EXPECT_THROW(cdf_chi2(1.0, 0.0), ValidationError);
    EXPECT_THROW(cdf_f(1.0, 1.0, -2.0), ValidationError);
}

// --- Metrics --------------------------------------------------------------

TEST(Confusion, Examples) {
    const std::vector<std::size_t> y{0, 1, 2, 2}, p{0, 2, 2, 1};
    EXPECT_EQ(confusion(y, p, 3), from_rows({{1, 0, 0}, {0, 0, 1}, {0, 1, 1}}));
    EXPECT_EQ(confusion(y, y, 3), from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
    const std::vector<std::size_t> zeros{0, 0, 0, 0};
    EXPECT_EQ(confusion(y, zeros, 3), from_rows({{1, 0, 0}, {1, 0, 0}, {2, 0, 0}}));
    const std::vector<std::size_t> shorter{0};
    EXPECT_THROW(confusion(y, shorter, 3), ValidationError);
}

TEST(Metrics, HandMatrices) {
    const auto diag = metrics(from_rows({{2, 0, 0}, {0, 2, 0}, {0, 0, 2}}));
    EXPECT_DOUBLE_EQ(diag.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(diag.macro_f1, 1.0);
    EXPECT_DOUBLE_EQ(diag.macro_precision, 1.0);
    EXPECT_DOUBLE_EQ(diag.macro_recall, 1.0);

    const auto half = metrics(from_rows({{1, 1}, {1, 1}}));
    EXPECT_DOUBLE_EQ(half.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(half.per_class[0].f1, 0.5);
    EXPECT_DOUBLE_EQ(half.per_class[1].f1, 0.5);

    // P0 = 5/7, R0 = 5/6; P1 = 3/5, R1 = 3/4; P2 = 2/2, R2 = 2/4
    const auto m = metrics(from_rows({{5, 1, 0}, {1, 3, 0}, {1, 1, 2}}));
    const std::array<double, 3> p{5.0 / 7, 3.0 / 5, 1.0}, r{5.0 / 6, 3.0 / 4, 0.5};
    double f1_sum = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(m.per_class[c].precision, p[c]);
        EXPECT_DOUBLE_EQ(m.per_class[c].recall, r[c]);
        const double f1 = 2 * p[c] * r[c] / (p[c] + r[c]);
        EXPECT_DOUBLE_EQ(m.per_class[c].f1, f1);
        f1_sum += f1;
    }
    EXPECT_DOUBLE_EQ(m.macro_f1, f1_sum / 3);
    EXPECT_DOUBLE_EQ(m.accuracy, 10.0 / 14);
}

TEST(Metrics, AbsentClassIsZeroWithWarning) {
    const auto m = metrics(from_rows({{3, 1, 0}, {0, 2, 0}, {0, 0, 0}}));
    EXPECT_EQ(m.per_class[2].precision, 0.0);
    EXPECT_EQ(m.per_class[2].recall, 0.0);
    EXPECT_EQ(m.per_class[2].f1, 0.0);
    EXPECT_FALSE(m.warnings.empty());
    EXPECT_FALSE(std::isnan(m.macro_f1));
    EXPECT_THROW(metrics(ConfusionMatrix(3)), ValidationError);
}

TEST(Metrics, MacroF1BetweenExtremes) {
    Rng rng(2);
    for (int i = 0; i < 300; ++i) {
        ConfusionMatrix cm(3);
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t p = 0; p < 3; ++p) cm.at(t, p) = rng.index(20);
        if (cm.total() == 0) continue;
        const auto m = metrics(cm);
        double lo = 1, hi = 0;
        for (const auto& c : m.per_class) {
            lo = std::min(lo, c.f1);
            hi = std::max(hi, c.f1);
            ASSERT_GE(c.precision, 0.0);
            ASSERT_LE(c.recall, 1.0);
        }
        ASSERT_GE(m.macro_f1, lo - 1e-15);
        ASSERT_LE(m.macro_f1, hi + 1e-15);
    }
}

// --- Curves ---------------------------------------------------------------

TEST(Curves, FourSampleFixture) {
    const std::vector<double> s{0.9, 0.6, 0.4, 0.1};
    const bool pos[] = {true, false, true, false};
    const auto c = binary_curves(s, pos);
    ASSERT_TRUE(c);
    EXPECT_DOUBLE_EQ(c->auc, 0.75);
    EXPECT_DOUBLE_EQ(c->roc.front().x, 0.0);
    EXPECT_DOUBLE_EQ(c->roc.front().y, 0.0);
    EXPECT_DOUBLE_EQ(c->roc.back().x, 1.0);
    EXPECT_DOUBLE_EQ(c->roc.back().y, 1.0);
    EXPECT_DOUBLE_EQ(c->average_precision, 0.5 * 1.0 + 0.5 * (2.0 / 3));

    const std::vector<double> s2{0.1, 0.4, 0.35, 0.8};
    const bool pos2[] = {false, false, true, true};
    EXPECT_DOUBLE_EQ(binary_curves(s2, pos2)->auc, 0.75);
}

TEST(Curves, PerfectAndChance) {
    const std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
    std::vector<double> perfect, flat;
    for (auto l : y)
        for (std::size_t k = 0; k < 3; ++k) {
            perfect.push_back(k == l ? 0.8 : 0.1);
            flat.push_back(1.0 / 3);
        }
    const auto p = roc_pr(perfect, y, 3);
    EXPECT_DOUBLE_EQ(p.macro_auc, 1.0);
    EXPECT_DOUBLE_EQ(p.macro_ap, 1.0);
    const auto f = roc_pr(flat, y, 3);
    for (const auto& c : f.per_class) EXPECT_DOUBLE_EQ(c->auc, 0.5);
}

TEST(Curves, AbsentClassAndErrors) {
    const std::vector<std::size_t> y{0, 1, 0, 1};
    const std::vector<double> s{0.7, 0.2, 0.1, 0.6, 0.2, 0.2, 0.3, 0.6, 0.1, 0.4, 0.3, 0.3};
    const auto c = roc_pr(s, y, 3);
    EXPECT_FALSE(c.per_class[2].has_value());
    EXPECT_TRUE(c.per_class[0].has_value());
    std::vector<double> bad = s;
    bad[0] = 0.9;
    EXPECT_THROW(roc_pr(bad, y, 3), ValidationError);
}

TEST(Curves, AucMatchesOracleAndIsMonotoneInvariant) {
    Rng rng(5);
    for (int d = 0; d < 100; ++d) {
        const std::size_t n = 5 + rng.index(60);
        std::vector<double> s(n), t(n);
        std::unique_ptr<bool[]> pos(new bool[n]);
        std::vector<bool> posv(n);
        for (std::size_t i = 0; i < n; ++i) {
            posv[i] = pos[i] = rng.bernoulli(0.4);
            s[i] = std::round(rng.uniform() * 20) / 20;  // ties on purpose
            t[i] = std::exp(3 * s[i]) - 7;
        }
        const auto a = binary_curves(s, std::span<const bool>(pos.get(), n));
        if (!a) continue;
        const auto b = binary_curves(t, std::span<const bool>(pos.get(), n));
        ASSERT_NEAR(a->auc, oracle::auc_oracle(s, posv), 1e-12);
        ASSERT_DOUBLE_EQ(a->auc, b->auc);
        ASSERT_DOUBLE_EQ(a->average_precision, b->average_precision);
    }
}

// --- Hypothesis tests -----------------------------------------------------

TEST(Anova, Examples) {
    const auto same = anova_oneway({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    EXPECT_DOUBLE_EQ(same.statistic, 0.0);
    EXPECT_DOUBLE_EQ(same.p_value, 1.0);
    const auto flat = anova_oneway({{2, 2}, {2, 2}});
    EXPECT_DOUBLE_EQ(flat.statistic, 0.0);

    Rng rng(7);
    Groups g(3);
    const std::array<double, 3> mu{26.5, 37.2, 39.9}, sd{4.2, 7.3, 5.3};
    for (std::size_t c = 0; c < 3; ++c)
        for (int i = 0; i < 100; ++i) g[c].push_back(rng.normal(mu[c], sd[c]));
    const auto r = anova_oneway(g);
    EXPECT_LT(r.p_value, 1e-3);
    EXPECT_EQ(*r.df1, 2.0);
    EXPECT_EQ(*r.df2, 297.0);
}

TEST(Anova, TwoGroupsEqualsSquaredT) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(5 + rng.index(20)), b(5 + rng.index(20));
        for (auto& x : a) x = rng.normal(0, 1);
        for (auto& x : b) x = rng.normal(0.5, 1);
        const auto sa = summarize(a), sb = summarize(b);
        const double na = a.size(), nb = b.size();
        const double sp2 = ((na - 1) * sa.sd * sa.sd + (nb - 1) * sb.sd * sb.sd) / (na + nb - 2);
        const double t = (sa.mean - sb.mean) / std::sqrt(sp2 * (1 / na + 1 / nb));
        EXPECT_NEAR(anova_oneway({a, b}).statistic, t * t, 1e-9 * std::max(1.0, t * t));
    }
}

TEST(KruskalWallis, HandFixture) {
    const auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    EXPECT_NEAR(r.statistic, 7.2, 1e-9);
    EXPECT_NEAR(r.p_value, 0.0273, 1e-4);
    EXPECT_NEAR(r.p_value, std::exp(-3.6), 1e-12);  // chi2 df=2 survival
    EXPECT_EQ(*r.df1, 2.0);
}

TEST(KruskalWallis, TiesAndInvariance) {
    const auto same = kruskal_wallis({{4, 4, 4}, {4, 4}, {4, 4, 4}});
    EXPECT_DOUBLE_EQ(same.statistic, 0.0);
    EXPECT_DOUBLE_EQ(same.p_value, 1.0);
    EXPECT_DOUBLE_EQ(kruskal_wallis({{1, 2, 3}, {1, 2, 3}}).statistic, 0.0);

    // Tie-corrected value by hand: ranks {1.5,1.5,3}, {4,5.5,5.5}
    // H = 12/(6*7) * (6^2/3 + 15^2/3) - 3*7 = 3.857142857, C = 1 - 12/210
    const auto tied = kruskal_wallis({{1, 1, 2}, {3, 4, 4}});
    EXPECT_NEAR(tied.statistic, (12.0 / 42 * (36.0 / 3 + 225.0 / 3) - 21) / (1 - 12.0 / 210), 1e-12);

    Rng rng(9);
    Groups g(3);
    for (auto& grp : g)
        for (int i = 0; i < 12; ++i) grp.push_back(std::round(rng.normal(0, 2)));
    Groups t = g;
    for (auto& grp : t)
        for (auto& v : grp) v = std::exp(v / 3) * 10 + 4;
    EXPECT_NEAR(kruskal_wallis(g).statistic, kruskal_wallis(t).statistic, 1e-12);
    Groups perm = g;
    for (auto& grp : perm) std::reverse(grp.begin(), grp.end());
    std::swap(perm[0], perm[2]);
    EXPECT_NEAR(kruskal_wallis(g).statistic, kruskal_wallis(perm).statistic, 1e-12);
}

TEST(Dunn, HandFixtureBonferroni) {
    const auto res = dunn_posthoc({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}, {"a", "b", "c"});
    ASSERT_EQ(res.size(), 3u);
    const double se = std::sqrt(7.5 * (2.0 / 3));
    const std::array<double, 3> z{3 / se, 6 / se, 3 / se};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(std::fabs(res[i].statistic), z[i], 1e-12);
        EXPECT_NEAR(*res[i].raw_p_value, two_sided(z[i]), 1e-12);
        EXPECT_DOUBLE_EQ(res[i].p_value, std::min(1.0, 3 * *res[i].raw_p_value));
        EXPECT_EQ(res[i].correction, "bonferroni");
    }
    EXPECT_EQ(res[0].label, "a vs b");
}

TEST(Dunn, IdenticalGroupsAndSeparatedGroups) {
    for (const auto& r : dunn_posthoc({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}})) EXPECT_DOUBLE_EQ(r.p_value, 1.0);
    Rng rng(10);
    Groups g(3);
    const std::array<double, 3> mu{15.2, 32.7, 47.6};
    for (std::size_t c = 0; c < 3; ++c)
        for (int i = 0; i < 60; ++i) g[c].push_back(rng.normal(mu[c], 3));
    for (const auto& r : dunn_posthoc(g)) {
        EXPECT_LT(r.p_value, 1e-3);
        EXPECT_GE(r.p_value, *r.raw_p_value);
        EXPECT_LE(r.p_value, 1.0);
    }
    EXPECT_THROW(dunn_posthoc({{1, 2}, {}}), ValidationError);
}

TEST(Kappa, Fixtures) {
    const std::vector<std::size_t> a{0, 0, 1, 1}, anti{1, 1, 0, 0}, constant{1, 1, 1, 1};
    EXPECT_EQ(cohens_kappa(a, a, 2).statistic, 1.0);
    EXPECT_EQ(cohens_kappa(a, anti, 2).statistic, -1.0);
    EXPECT_EQ(cohens_kappa(a, constant, 2).statistic, 0.0);
    EXPECT_EQ(cohens_kappa(constant, constant, 2).statistic, 1.0);

    // p_o = 0.7, p_e = 0.5*0.6 + 0.5*0.4 = 0.5
    const std::vector<std::size_t> r1{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, r2{0, 0, 0, 0, 1, 1, 1, 1, 0, 0};
    EXPECT_NEAR(cohens_kappa(r1, r2, 2).statistic, 0.4, 1e-12);
    const std::vector<std::size_t> empty;
    EXPECT_THROW(cohens_kappa(empty, empty, 2), ValidationError);
    EXPECT_THROW(cohens_kappa(a, r1, 2), ValidationError);
}

TEST(Ranks, MidRanks) {
    const std::vector<double> v{10, 20, 10, 30, 20, 20};
    EXPECT_EQ(midranks(v), (std::vector<double>{1.5, 4, 1.5, 6, 4, 4}));
}

TEST(StatResult, JsonShape) {
    const auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    const auto j = r.to_json();
    EXPECT_EQ(j.at("test"), "kruskal_wallis");
    EXPECT_TRUE(j.contains("p_value"));
    EXPECT_TRUE(j.contains("df1"));
}
