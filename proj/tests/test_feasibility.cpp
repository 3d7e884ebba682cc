#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace stq;

namespace {

Verdict check_file(const std::string& f) { return check_task(stq::testing::load(f)); }

bool has(const Verdict& v, Condition c, std::vector<std::string> w) {
    std::sort(w.begin(), w.end());
    for (auto x : v.violations) {
        std::sort(x.witness.begin(), x.witness.end());
        if (x.condition == c && x.witness == w) return true;
    }
    return false;
}

TaskSpec summoning_task(const std::vector<Diamond>& ds, SummoningVariant variant) {
    TaskSpec t;
    t.kind = TaskKind::Summoning;
    t.variant = variant;
    t.dim = ds.front().dim();
    t.start = SpacetimePoint(-100, std::vector<double>(t.dim, 0.0));
    for (std::size_t i = 0; i < ds.size(); ++i) t.diamonds.push_back({"D" + std::to_string(i), ds[i]});
    return t;
}

}  // namespace

TEST(Verdicts, LocalizeExcludeFixtures) {
    EXPECT_TRUE(check_file("FIG1.stq").feasible);
    EXPECT_TRUE(check_file("FIG10.stq").feasible);
    EXPECT_TRUE(check_file("FIG5.stq").feasible);

    const auto a = check_file("FIG7A.stq");
    EXPECT_FALSE(a.feasible);
    EXPECT_TRUE(has(a, Condition::I_A, {"A1"}));
    const auto b = check_file("FIG7B.stq");
    EXPECT_FALSE(b.feasible);
    EXPECT_TRUE(has(b, Condition::I_B, {"U1"}));
    const auto c = check_file("FIG7C.stq");
    EXPECT_FALSE(c.feasible);
    EXPECT_TRUE(has(c, Condition::II, {"A1", "A2"}));
    const auto d = check_file("FIG7D.stq");
    EXPECT_FALSE(d.feasible);
    EXPECT_TRUE(has(d, Condition::III, {"A1", "U1"}));
}

TEST(Verdicts, FeasibleMeansNoViolations) {
    for (const char* f : {"FIG1", "FIG5", "FIG7A", "FIG7B", "FIG7C", "FIG7D", "FIG10", "FIG11", "FIG12", "FIG13", "FIG14",
                          "FIG15"}) {
        const auto v = check_file(std::string(f) + ".stq");
        EXPECT_EQ(v.feasible, v.violations.empty()) << f;
    }
}

TEST(Verdicts, AssemblyFixtures) {
    const auto v11 = check_file("FIG11.stq");
    EXPECT_FALSE(v11.feasible);
    EXPECT_TRUE(has(v11, Condition::II, {"D1", "D2"}));
    EXPECT_TRUE(check_file("FIG13.stq").feasible);

    auto t = stq::testing::load("FIG13.stq");
    // Second authorized set moved far outside every light cone of the first.
    for (auto& d : t.diamonds)
        if (d.name.back() == '2') {
            d.diamond.c.x[0] += 100;
            d.diamond.r.x[0] += 100;
        }
    t.start.x[0] += 50;
    t.start.t -= 200;
    const auto v = check_assembly(t);
    EXPECT_FALSE(v.feasible);
    EXPECT_TRUE(v.has(Condition::II));
}

TEST(Verdicts, SummoningFixtures) {
    EXPECT_TRUE(check_file("FIG12.stq").feasible);
    auto t = stq::testing::load("FIG14.stq");
    EXPECT_TRUE(check_summoning(t).feasible);
    t.variant = SummoningVariant::UnrestrictedCallSingleReturn;
    const auto v = check_summoning(t);
    EXPECT_FALSE(v.feasible);
    ASSERT_EQ(v.violations.size(), 1u);
    EXPECT_TRUE(has(v, Condition::B1, {"D0", "D1", "D2"}));

    const auto spacelike = summoning_task({Diamond({0, 0.0}, {1, 0.0}), Diamond({0, 10.0}, {1, 10.0})},
                                          SummoningVariant::SingleCallSingleReturn);
    EXPECT_TRUE(check_summoning(spacelike).has(Condition::II));
}

TEST(Verdicts, TransferTopology) {
    EXPECT_TRUE(check_file("FIG15.stq").feasible);
    auto t = stq::testing::load("FIG15.stq");
    t.diamonds[2].diamond.c.x[0] = t.diamonds[0].diamond.c.x[0];
    t.diamonds[2].diamond.c.x[1] = t.diamonds[0].diamond.c.x[1];
    t.diamonds[2].diamond.r.x[0] = t.diamonds[0].diamond.r.x[0];
    t.diamonds[2].diamond.r.x[1] = t.diamonds[0].diamond.r.x[1];
    EXPECT_FALSE(check_pit_topology(t).feasible);
}

TEST(Verdicts, HigherDimensionNeedsWitnesses) {
    TaskSpec t;
    t.kind = TaskKind::LocalizeExclude;
    t.dim = 2;
    t.start = SpacetimePoint(0, std::vector<double>{0, 0});
    t.regions.push_back(Region{"A1", 2, {Diamond(SpacetimePoint(2, std::vector<double>{0, 0}), SpacetimePoint(3, std::vector<double>{0, 0}))}});
    t.regions.push_back(Region{"U1", 2, {Diamond(SpacetimePoint(1, std::vector<double>{5, 0}), SpacetimePoint(1.5, std::vector<double>{5, 0}))}});
    t.authorized = {{"A1"}};
    t.unauthorized = {{"U1"}};
    EXPECT_THROW(check_localize_exclude(t), UndecidableError);

    WitnessCurves w;
    const Polyline up{{SpacetimePoint(-1, std::vector<double>{0, 0}), SpacetimePoint(4, std::vector<double>{0, 0})}};
    w[{"s", "U1"}] = up;
    w[{"A1", "U1"}] = up;
    EXPECT_TRUE(check_localize_exclude(t, &w).feasible);
}

TEST(Verdicts, ReportsAllViolations) {
    auto t = stq::testing::load("FIG7C.stq");
    // A third spacelike region gives two more no-cloning pairs.
    t.regions.push_back(Region{"A3", 1, {Diamond({0, 40.0}, {1, 40.0})}});
    t.authorized.push_back({"A3"});
    const auto v = check_localize_exclude(t);
    EXPECT_GE(std::count_if(v.violations.begin(), v.violations.end(), [](const Violation& x) { return x.condition == Condition::II; }),
              2);
}

TEST(AccessStructures, Examples) {
    AccessStructure fig8{3, {{1, 2}, {2, 3}, {1, 2, 3}}, {}};
    EXPECT_TRUE(check_access_structure(fig8).feasible);
    EXPECT_TRUE(check_localize_exclude(embed_access_structure(fig8)).feasible);

    AccessStructure disjoint{2, {{1}, {2}}, {}};
    EXPECT_TRUE(check_access_structure(disjoint).has(Condition::II));
    EXPECT_TRUE(check_localize_exclude(embed_access_structure(disjoint)).has(Condition::II));

    AccessStructure mono{3, {{1, 2}}, {{1, 2, 3}}};
    EXPECT_TRUE(check_access_structure(mono).has(Condition::III));
    EXPECT_TRUE(check_localize_exclude(embed_access_structure(mono)).has(Condition::III));
}

TEST(AccessStructures, ReductionConsistency) {
    std::mt19937_64 rng(99);
    int disagreements = 0;
    for (int k = 0; k < 200; ++k) {
        const auto a = stq::testing::random_access_structure(rng);
        if (!stq::testing::same_shape(check_access_structure(a), check_localize_exclude(embed_access_structure(a)))) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(Properties, TwoRegionsWithoutUnauthorized) {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 300; ++k) {
        auto t = stq::testing::random_le_task(rng, 2, 0);
        t.start = SpacetimePoint::from_uv(std::uniform_int_distribution<int>(-5, 20)(rng), std::uniform_int_distribution<int>(-5, 20)(rng));
        const auto& a1 = t.regions[0].diamonds[0];
        const auto& a2 = t.regions[1].diamonds[0];
        // Both in the future of s, and some causal curve between them.
        const bool direct = causal_leq(t.start, a1.r) && causal_leq(t.start, a2.r) &&
                            (causal_leq(a1.c, a2.r) || causal_leq(a2.c, a1.r));
        EXPECT_EQ(check_localize_exclude(t).feasible, direct);
    }
}

TEST(Properties, UnrestrictedImpliesSingleCall) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> pos(-2, 2), dt(0, 3);
    int unrestricted = 0;
    for (int k = 0; k < 400; ++k) {
        const int n = 2 + static_cast<int>(rng() % 5);
        std::vector<Diamond> ds;
        for (int i = 0; i < n; ++i) {
            const SpacetimePoint c(pos(rng), std::vector<double>{pos(rng), pos(rng)});
            SpacetimePoint r = c;
            r.t += dt(rng);
            ds.emplace_back(c, r);
        }
        auto t = summoning_task(ds, SummoningVariant::UnrestrictedCallSingleReturn);
        const bool b1 = check_summoning(t).feasible;
        t.variant = SummoningVariant::SingleCallSingleReturn;
        if (b1) {
            ++unrestricted;
            EXPECT_TRUE(check_summoning(t).feasible);
        }
    }
    EXPECT_GT(unrestricted, 10);
}

TEST(Properties, AddingUnauthorizedNeverHelps) {
    std::mt19937_64 rng(31);
    for (int k = 0; k < 300; ++k) {
        auto t = stq::testing::random_le_task(rng, 1 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 3));
        const bool before = check_localize_exclude(t).feasible;
        const std::string name = "U" + std::to_string(t.unauthorized.size() + 1);
        t.regions.push_back(Region{name, 1, {stq::testing::to_diamond(stq::testing::random_box(rng, -10, 40, 6))}});
        t.unauthorized.push_back({name});
        if (!before) {
            EXPECT_FALSE(check_localize_exclude(t).feasible);
        }
    }
}
