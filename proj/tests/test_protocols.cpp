#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "support.hpp"

using namespace stq;

namespace {

constexpr double kTol = 1e-9;

Outcome run_access(const ProtocolPlan& p, const TaskSpec& t, const std::string& access, std::uint64_t seed = 1,
                   ViewMode view = ViewMode::Auto) {
    Scenario s;
    s.access = access;
    s.seed = seed;
    s.view = view;
    return execute(p, t, s);
}

Outcome run_calls(const ProtocolPlan& p, const TaskSpec& t, const NameSet& calls, std::uint64_t seed = 1,
                  ViewMode view = ViewMode::Auto) {
    Scenario s;
    s.calls = CallPattern::of(t, calls);
    s.seed = seed;
    s.view = view;
    return execute(p, t, s);
}

NameSet mask_names(const TaskSpec& t, unsigned mask) {
    NameSet out;
    for (std::size_t i = 0; i < t.diamonds.size(); ++i)
        if (mask >> i & 1u) out.push_back(t.diamonds[i].name);
    return out;
}

template <class T>
int count_events(const ProtocolPlan& p) {
    return static_cast<int>(std::count_if(p.events.begin(), p.events.end(), [](const Event& e) { return std::holds_alternative<T>(e); }));
}

int count_scheme(const ProtocolPlan& p, SchemeKind k) {
    int n = 0;
    for (const auto& e : p.events)
        if (const auto* s = std::get_if<EncodeScheme>(&e); s && s->scheme == k) ++n;
    return n;
}

}  // namespace

TEST(Cost, Counts) {
    for (int n = 2; n <= 6; ++n) EXPECT_EQ(scheme_cost(n, 0, 8).paper_qubits, n * (n - 1));
    EXPECT_EQ(scheme_cost(4, 0, 1).paper_qubits, 12);
    EXPECT_EQ(scheme_cost(2, 0, 128).xor_bits, 0);
    EXPECT_EQ(scheme_cost(2, 0, 128).shamir_bits, "0");
    EXPECT_EQ(scheme_cost(3, 2, 8).xor_bits, 144);
    EXPECT_EQ(scheme_cost(3, 2, 8).quantum_shares, 3);
    EXPECT_NE(format_cost(scheme_cost(3, 2, 8)).find("asymptotic"), std::string::npos);
    EXPECT_THROW(scheme_cost(1, 0, 8), std::invalid_argument);
}

TEST(Planner, LocalizeExcludeShapes) {
    const auto fig1 = stq::testing::load("FIG1.stq");
    const auto p1 = plan_task(fig1);
    EXPECT_EQ(p1.decoder.code.shares(), 1u);
    EXPECT_EQ(count_scheme(p1, SchemeKind::QotpKeygen), 1);
    // Key copies at s and at both authorized regions, each a single share for m = 1.
    ASSERT_EQ(p1.decoder.keys.size(), 1u);
    EXPECT_EQ(p1.decoder.keys[0].copies.size(), 3u);
    for (const auto& c : p1.decoder.keys[0].copies) EXPECT_EQ(c.size(), 1u);
    int avoiding = 0;
    for (const auto& e : p1.events)
        if (const auto* m = std::get_if<MoveToken>(&e); m && m->avoid) ++avoiding;
    EXPECT_EQ(avoiding, 3);

    const auto fig10 = stq::testing::load("FIG10.stq");
    const auto p10 = plan_task(fig10);
    ASSERT_EQ(p10.decoder.keys.size(), 1u);
    for (const auto& c : p10.decoder.keys[0].copies) EXPECT_EQ(c.size(), 2u);

    const auto fig5 = stq::testing::load("FIG5.stq");
    const auto p5 = plan_task(fig5);
    EXPECT_EQ(p5.decoder.code.shares(), 3u);
    EXPECT_EQ(p5.decoder.code.mode, EdgeCodeMode::Code23);
    EXPECT_EQ(count_scheme(p5, SchemeKind::QotpKeygen), 0);
}

TEST(Planner, RefusesExactlyWhenInfeasible) {
    for (const char* f : {"FIG7A", "FIG7B", "FIG7C", "FIG7D", "FIG11"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        try {
            plan_task(t);
            ADD_FAILURE() << f << " planned";
        } catch (const PlanRefused& e) {
            ASSERT_TRUE(e.verdict.has_value()) << f;
            EXPECT_FALSE(e.verdict->feasible);
        }
    }
    std::mt19937_64 rng(404);
    int planned = 0, refused = 0;
    for (int k = 0; k < 300; ++k) {
        const auto t = stq::testing::random_le_task(rng, 1 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 4));
        const bool feasible = check_localize_exclude(t).feasible;
        bool ok = true;
        try {
            plan_localize_exclude(t);
        } catch (const PlanRefused&) {
            ok = false;
        }
        EXPECT_EQ(ok, feasible) << serialize_task(t);
        (ok ? planned : refused)++;
    }
    EXPECT_GT(planned, 20);
    EXPECT_GT(refused, 20);
}

TEST(Planner, UnrestrictedSummoningRefusedWithWitness) {
    auto t = stq::testing::load("FIG14.stq");
    t.variant = SummoningVariant::UnrestrictedCallSingleReturn;
    try {
        plan_task(t);
        FAIL() << "planned";
    } catch (const PlanRefused& e) {
        ASSERT_TRUE(e.verdict.has_value());
        EXPECT_TRUE(e.verdict->has(Condition::B1));
        EXPECT_NE(std::string(e.what()).find("D0"), std::string::npos);
    }
}

TEST(Planner, AssemblyWithoutUnauthorizedHasNoKeys) {
    auto t = stq::testing::load("FIG13.stq");
    t.unauthorized.clear();
    const auto p = plan_task(t);
    EXPECT_EQ(count_scheme(p, SchemeKind::QotpKeygen), 0);
    EXPECT_EQ(count_scheme(p, SchemeKind::XorSplit), 0);
    EXPECT_TRUE(validate_plan(p, t).ok());
    for (unsigned m = 0; m < 16; ++m) {
        const auto o = run_calls(p, t, mask_names(t, m));
        EXPECT_EQ(o.disjoint_reconstructing_pairs, 0);
    }
}

TEST(Planner, SerializationIsStable) {
    for (const char* f : {"FIG1", "FIG5", "FIG10", "FIG12", "FIG13", "FIG14", "FIG15"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto a = serialize_plan(plan_task(t));
        EXPECT_EQ(a, serialize_plan(plan_task(t))) << f;
        // One event per numbered line.
        std::istringstream in(a);
        int events = 0;
        for (std::string l; std::getline(in, l);)
            if (std::regex_match(l, std::regex("^[0-9]+ .*"))) ++events;
        EXPECT_EQ(static_cast<std::size_t>(events), plan_task(t).events.size()) << f;
    }
}

TEST(Audits, FixturePlansPass) {
    for (const char* f : {"FIG1", "FIG5", "FIG10", "FIG12", "FIG13", "FIG14", "FIG15"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto rep = validate_plan(plan_task(t), t);
        EXPECT_TRUE(rep.ok()) << f << "\n" << rep.to_string();
    }
    const auto t15 = stq::testing::load("FIG15.stq");
    EXPECT_TRUE(validate_plan(plan_pit(t15, true), t15).ok());
}

TEST(Audits, DetectHandCraftedFaults) {
    const auto t = stq::testing::load("FIG1.stq");
    const auto base = plan_task(t);
    const SpacetimePoint s = t.start;

    // Moving the secret twice along diverging paths duplicates it.
    {
        auto p = base;
        p.events.push_back(MoveToken{"S1", Polyline{{SpacetimePoint(10, 0.0), SpacetimePoint(30, 0.0)}}, std::nullopt, ""});
        p.events.push_back(EncodeScheme{SchemeKind::EdgeCode, {"A"}, {"S_dup"}, "", s});
        EXPECT_TRUE(validate_plan(p, t).failed('c'));
    }
    // Bell measurement on the same quantum token twice.
    {
        ProtocolPlan p;
        p.events.push_back(CreateEntangled{3, "E", "F", s});
        p.events.push_back(BellMeasure{"A", "E", "O1", s});
        p.events.push_back(BellMeasure{"A", "F", "O2", s});
        EXPECT_TRUE(validate_plan(p, t).failed('c'));
    }
    // Backwards path.
    {
        ProtocolPlan p;
        p.events.push_back(MoveToken{"A", Polyline{{s, SpacetimePoint(-5, 0.0)}}, std::nullopt, ""});
        EXPECT_TRUE(validate_plan(p, t).failed('a'));
    }
    // Escape path that crosses the region it claims to avoid.
    {
        ProtocolPlan p;
        p.events.push_back(EncodeScheme{SchemeKind::QotpKeygen, {}, {"K"}, "", s});
        p.events.push_back(MoveToken{"K", Polyline{{s, SpacetimePoint(20, 0.0)}}, NameSet{"U1"}, ""});
        EXPECT_TRUE(validate_plan(p, t).failed('d'));
    }
    // Predicate reading a call that is spacelike to the decision point.
    {
        const auto t14 = stq::testing::load("FIG14.stq");
        ProtocolPlan p;
        p.kind = t14.kind;
        const auto& c0 = t14.diamond("D0").c;
        p.events.push_back(MoveToken{"A", Polyline{{t14.start, c0}}, std::nullopt, ""});
        p.events.push_back(ConditionalRoute{"A", c0, {Branch{called("D1"), Polyline{{c0, t14.diamond("D0").r}}, "D0"}}, ""});
        EXPECT_TRUE(validate_plan(p, t14).failed('b'));
    }
    // Unknown diamond in a predicate.
    {
        const auto t14 = stq::testing::load("FIG14.stq");
        ProtocolPlan p;
        p.events.push_back(HandOver{"A", "D0", called("Nope")});
        EXPECT_TRUE(validate_plan(p, t14).failed('b'));
    }
}

TEST(Engine, LocalizeExcludeFixtures) {
    for (const char* f : {"FIG1", "FIG10", "FIG5"}) {
        SCOPED_TRACE(f);
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto p = plan_task(t);
        for (const auto& a : t.authorized) {
            const auto o = run_access(p, t, join_names(a));
            EXPECT_TRUE(o.audit.ok());
            EXPECT_TRUE(o.reconstructed) << join_names(a);
            ASSERT_TRUE(o.fidelity.has_value());
            EXPECT_GE(*o.fidelity, 1 - kTol);
        }
        for (const auto& u : t.unauthorized) {
            const auto o = run_access(p, t, join_names(u));
            EXPECT_FALSE(o.reconstructed);
            ASSERT_TRUE(o.factorization_distance.has_value());
            EXPECT_LE(*o.factorization_distance, kTol) << join_names(u);
        }
    }
}

TEST(Engine, TwirlMatchesEnumeration) {
    for (const char* f : {"FIG1", "FIG10"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto p = plan_task(t);
        for (const auto& u : t.unauthorized)
            for (std::uint64_t seed : {1u, 2u, 3u}) {
                const auto a = run_access(p, t, join_names(u), seed, ViewMode::Twirl);
                const auto b = run_access(p, t, join_names(u), seed, ViewMode::Enumerate);
                ASSERT_TRUE(a.view_state && b.view_state);
                EXPECT_LT(qsim::trace_distance(*a.view_state, *b.view_state), 1e-9) << f;
            }
    }
    const auto t = stq::testing::load("FIG13.stq");
    const auto p = plan_task(t);
    for (unsigned m = 0; m < 16; ++m) {
        const auto a = run_calls(p, t, mask_names(t, m), 5, ViewMode::Twirl);
        const auto b = run_calls(p, t, mask_names(t, m), 5, ViewMode::Enumerate);
        if (a.view_state && b.view_state) { EXPECT_LT(qsim::trace_distance(*a.view_state, *b.view_state), 1e-9) << m; }
    }
}

TEST(Engine, AssemblyAllPatterns) {
    const auto t = stq::testing::load("FIG13.stq");
    const auto p = plan_task(t);
    for (unsigned m = 0; m < 16; ++m) {
        const auto calls = mask_names(t, m);
        const auto o = run_calls(p, t, calls);
        SCOPED_TRACE(join_names(calls, ","));
        EXPECT_TRUE(o.audit.ok());
        EXPECT_EQ(o.disjoint_reconstructing_pairs, 0);
        const int k = __builtin_popcount(m);
        const bool set1 = std::find(calls.begin(), calls.end(), "Da1") != calls.end() &&
                          std::find(calls.begin(), calls.end(), "Db1") != calls.end();
        const bool set2 = std::find(calls.begin(), calls.end(), "Da2") != calls.end() &&
                          std::find(calls.begin(), calls.end(), "Db2") != calls.end();
        if (k >= 3) {
            EXPECT_FALSE(o.reconstructed);
            ASSERT_TRUE(o.factorization_distance.has_value());
            EXPECT_LE(*o.factorization_distance, kTol);
        } else if (set1 || set2) {
            EXPECT_TRUE(o.reconstructed);
            ASSERT_TRUE(o.fidelity.has_value());
            EXPECT_GE(*o.fidelity, 1 - kTol);
        }
    }
}

TEST(Engine, SummoningSingleCalls) {
    for (const char* f : {"FIG12", "FIG14"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto p = plan_task(t);
        for (const auto& d : t.diamonds) {
            const auto o = run_calls(p, t, {d.name});
            EXPECT_TRUE(o.audit.ok());
            EXPECT_TRUE(o.reconstructed) << f << " " << d.name;
            ASSERT_TRUE(o.fidelity.has_value());
            EXPECT_GE(*o.fidelity, 1 - kTol);
            // Material handed over only at the called diamond.
            for (const auto& [i, what] : o.event_outcomes) {
                const auto* h = std::get_if<HandOver>(&p.events[i]);
                if (h && what == "handed") {
                    EXPECT_EQ(h->diamond, d.name) << f << " event " << i;
                }
            }
        }
    }
}

TEST(Engine, SummoningOneCopyUnderAnyPattern) {
    const auto t = stq::testing::load("FIG14.stq");
    const auto p = plan_task(t);
    for (unsigned m = 0; m < 8; ++m) EXPECT_EQ(run_calls(p, t, mask_names(t, m)).disjoint_reconstructing_pairs, 0) << m;
}

TEST(Engine, NoSignalling) {
    for (const char* f : {"FIG12", "FIG13", "FIG14", "FIG15"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto p = plan_task(t);
        const unsigned n = static_cast<unsigned>(t.diamonds.size());
        for (unsigned m = 0; m < (1u << n); ++m)
            for (unsigned j = 0; j < n; ++j) {
                if (m >> j & 1u) continue;
                const auto a = run_calls(p, t, mask_names(t, m), 9);
                const auto b = run_calls(p, t, mask_names(t, m | (1u << j)), 9);
                const auto& cj = t.diamonds[j].diamond.c;
                for (const auto& [i, outcome] : a.event_outcomes) {
                    const auto anchor = detail::anchor(p.events[i], t);
                    if (causal_leq(cj, anchor)) continue;
                    EXPECT_EQ(outcome, b.event_outcomes.at(i)) << f << " event " << i << " bit " << t.diamonds[j].name;
                }
            }
    }
}

TEST(Engine, Deterministic) {
    for (const char* f : {"FIG1", "FIG10", "FIG13", "FIG15"}) {
        const auto t = stq::testing::load(std::string(f) + ".stq");
        const auto p = plan_task(t);
        for (const auto& ns : default_scenarios(t, 42)) {
            const auto a = execute(p, t, ns.scenario);
            const auto b = execute(p, t, ns.scenario);
            EXPECT_EQ(report(a), report(b));
            if (a.view_state && b.view_state) {
                EXPECT_EQ(a.view_state->density_matrix(), b.view_state->density_matrix());
            }
        }
    }
}

TEST(Engine, EventOrderIndependentForSpacelikeTies) {
    const auto t = stq::testing::load("FIG10.stq");
    const auto p = plan_task(t);
    // Reverse the plan order within each group of mutually spacelike, consecutive events.
    auto q = p;
    for (std::size_t i = 0; i + 1 < q.events.size(); ++i) {
        const auto a = detail::anchor(q.events[i], t), b = detail::anchor(q.events[i + 1], t);
        if (!causal_leq(a, b) && !causal_leq(b, a)) std::swap(q.events[i], q.events[i + 1]), ++i;
    }
    for (const auto& ns : default_scenarios(t, 3)) {
        const auto a = execute(p, t, ns.scenario), b = execute(q, t, ns.scenario);
        EXPECT_EQ(a.reconstructed, b.reconstructed);
        if (a.fidelity) { EXPECT_NEAR(*a.fidelity, *b.fidelity, kTol); }
        if (a.factorization_distance) { EXPECT_NEAR(*a.factorization_distance, *b.factorization_distance, kTol); }
    }
}

TEST(Engine, SymbolicModeForFourRegions) {
    TaskSpec t;
    t.kind = TaskKind::LocalizeExclude;
    t.dim = 1;
    t.start = SpacetimePoint(0, 0.0);
    for (int i = 1; i <= 4; ++i) {
        // Four diamonds on a timelike line: every pair connected.
        const std::string n = "A" + std::to_string(i);
        t.regions.push_back(Region{n, 1, {Diamond(SpacetimePoint(3.0 * i, 0.0), SpacetimePoint(3.0 * i + 1, 0.0))}});
        t.authorized.push_back({n});
    }
    const auto p = plan_task(t);
    EXPECT_TRUE(p.symbolic());
    EXPECT_TRUE(validate_plan(p, t).ok());
    for (const auto& a : t.authorized) {
        const auto o = run_access(p, t, join_names(a));
        EXPECT_TRUE(o.reconstructed);
        EXPECT_FALSE(o.fidelity.has_value());
        EXPECT_FALSE(o.factorization_distance.has_value());
    }
}

TEST(Engine, PlannerTotalityOnRandomTasks) {
    std::mt19937_64 rng(2718);
    int done = 0, tries = 0;
    while (done < 200 && tries < 20000) {
        ++tries;
        const int n = 1 + static_cast<int>(rng() % 3), m = static_cast<int>(rng() % 4);
        const auto t = stq::testing::random_le_task(rng, n, m);
        if (!check_localize_exclude(t).feasible) continue;
        ++done;
        ProtocolPlan p;
        ASSERT_NO_THROW(p = plan_localize_exclude(t)) << serialize_task(t);
        EXPECT_TRUE(validate_plan(p, t).ok()) << serialize_task(t) << validate_plan(p, t).to_string();
        for (const auto& ns : default_scenarios(t, static_cast<std::uint64_t>(done))) {
            const auto o = execute(p, t, ns.scenario);
            EXPECT_TRUE(outcome_passes(o, ns.expect, p.symbolic(), kTol)) << serialize_task(t) << report(o);
        }
    }
    EXPECT_EQ(done, 200);
}

TEST(Transfer, HonestRuns) {
    const auto t = stq::testing::load("FIG15.stq");
    const auto p = plan_pit(t);
    std::set<int> receivers;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto sc = pit_scenario(t, seed);
        Scenario s;
        s.calls = sc.calls;
        s.seed = seed;
        const auto o = execute(p, t, s);
        ASSERT_TRUE(o.receiver.has_value()) << seed;
        EXPECT_EQ(*o.receiver, sc.receiver);
        receivers.insert(*o.receiver);
        ASSERT_TRUE(o.fidelity && o.chi_pass_probability);
        EXPECT_GE(*o.fidelity, 1 - kTol);
        EXPECT_NEAR(*o.chi_pass_probability, 1.0, kTol);
    }
    EXPECT_EQ(receivers.size(), 2u);
}

TEST(Transfer, BothDiamondsOfPairCalledWithholdsShare) {
    const auto t = stq::testing::load("FIG15.stq");
    const auto p = plan_pit(t);
    const auto o = run_calls(p, t, {"a1", "a2", "b1", "c1"});
    for (const auto& tok : o.collected) EXPECT_NE(tok, "Ta") << "share of a pair with both calls was handed over";
    EXPECT_FALSE(std::find(o.collected.begin(), o.collected.end(), "Tb") == o.collected.end());
}

TEST(Transfer, CheatMatchesBruteForce) {
    const auto t = stq::testing::load("FIG15.stq");
    const auto p = plan_pit(t, true);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Scenario s;
        s.calls = pit_scenario(t, seed).calls;
        s.seed = seed;
        const auto o = execute(p, t, s);
        ASSERT_TRUE(o.chi_pass_probability.has_value());
        EXPECT_NEAR(*o.chi_pass_probability, 1.0 / 9.0, kTol);
        EXPECT_NEAR(*o.chi_pass_probability, stq::testing::brute_force_chi(1, 2, true), kTol);
    }
}

TEST(Render, Fig1Elements) {
    const auto t = stq::testing::load("FIG1.stq");
    const auto svg = render_svg(t);
    auto count = [&](const std::string& needle) {
        std::size_t n = 0;
        for (auto pos = svg.find(needle); pos != std::string::npos; pos = svg.find(needle, pos + 1)) ++n;
        return n;
    };
    EXPECT_EQ(count("class=\"region authorized\""), 2u);
    EXPECT_EQ(count("class=\"region unauthorized\""), 1u);
    EXPECT_EQ(count("class=\"start\""), 1u);
    EXPECT_NE(svg.find("#f2c200"), std::string::npos);
    EXPECT_EQ(svg, render_svg(t));
    const auto p = plan_task(t);
    const auto with = render_svg(t, &p);
    EXPECT_GT(with.find("class=\"quantum\""), 0u);
    EXPECT_NE(with.find("class=\"classical\""), std::string::npos);
    EXPECT_EQ(with, render_svg(t, &p));
}
