#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "feasibility.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "schemes.hpp"

namespace stq {

// Predicates over call bits.

struct Literal {
    std::string diamond;
    int value = 1;

    friend bool operator<(const Literal& a, const Literal& b) { return std::tie(a.diamond, a.value) < std::tie(b.diamond, b.value); }
    friend bool operator==(const Literal&, const Literal&) = default;
};

struct Predicate {
    std::vector<Literal> literals;

    bool eval(const CallPattern& p) const {
        for (const auto& l : literals)
            if (static_cast<int>(p.called(l.diamond)) != l.value) return false;
        return true;
    }
    Predicate conjoin(const Predicate& o) const {
        Predicate out = *this;
        for (const auto& l : o.literals)
            if (std::find(out.literals.begin(), out.literals.end(), l) == out.literals.end()) out.literals.push_back(l);
        std::sort(out.literals.begin(), out.literals.end(), [](const Literal& a, const Literal& b) {
            return a.value != b.value ? a.value > b.value : a.diamond < b.diamond;
        });
        return out;
    }
    // Contradictory literals make the predicate unsatisfiable.
    bool satisfiable() const {
        for (const auto& a : literals)
            for (const auto& b : literals)
                if (a.diamond == b.diamond && a.value != b.value) return false;
        return true;
    }
    std::string to_string() const {
        if (literals.empty()) return "true";
        std::string out;
        for (std::size_t i = 0; i < literals.size(); ++i)
            out += (i ? "&" : "") + std::string(literals[i].value ? "" : "!") + literals[i].diamond;
        return out;
    }
};

inline Predicate called(const std::string& d) { return Predicate{{{d, 1}}}; }

// Plan events.

struct CreateEntangled {
    int d = 3;
    std::string a, b;
    SpacetimePoint at;
};

struct MoveToken {
    std::string token;
    Polyline path;
    std::optional<NameSet> avoid;
    std::string dest;
};

struct BellMeasure {
    std::string a, b, outcome;
    SpacetimePoint at;
};

struct BroadcastClassical {
    std::string token;
    std::vector<Polyline> paths;
    std::vector<std::string> dests;
    std::optional<NameSet> avoid;
};

enum class SchemeKind { EdgeCode, Code23, QotpKeygen, XorSplit, Qotp };

inline const char* to_string(SchemeKind k) {
    switch (k) {
        case SchemeKind::EdgeCode: return "edge_code";
        case SchemeKind::Code23: return "code23";
        case SchemeKind::QotpKeygen: return "qotp_keygen";
        case SchemeKind::XorSplit: return "xor_split";
        case SchemeKind::Qotp: return "qotp";
    }
    return "?";
}

struct EncodeScheme {
    SchemeKind scheme = SchemeKind::EdgeCode;
    std::vector<std::string> inputs, outputs;
    std::string key;
    SpacetimePoint at;
};

struct Branch {
    Predicate when;
    Polyline path;
    std::string dest;
};

struct ConditionalRoute {
    std::string token;
    SpacetimePoint at;
    std::vector<Branch> branches;
    std::string fallback_dest;
};

struct HandOver {
    std::string token;
    std::string diamond;
    Predicate when;
};

using Event = std::variant<CreateEntangled, MoveToken, BellMeasure, BroadcastClassical, EncodeScheme, ConditionalRoute, HandOver>;

// Decoder recipe.

struct ShareRecipe {
    std::string carrier;
    std::string outcome;  // teleportation outcome, empty when carried directly
    std::string key;      // pad key, empty when unpadded
};

struct KeyRecipe {
    std::string key;
    std::vector<std::vector<std::string>> copies;  // XOR shares of each copy
};

struct PitShare {
    std::string token;
    int encoding = 0;  // index into the plan's secrets
    int index = 1;     // share index 1..3
};

struct Decoder {
    EdgeCode code = trivial_code();
    std::vector<std::string> vertices;
    std::vector<NameSet> vertex_sets;
    std::vector<ShareRecipe> shares;
    std::vector<KeyRecipe> keys;
    std::vector<PitShare> pit_shares;
    std::vector<std::vector<std::string>> pit_encodings;  // share token names per encoding
};

struct SecretSlot {
    std::string system = "A";
    std::string reference = "R";
};

struct ProtocolPlan {
    TaskKind kind = TaskKind::LocalizeExclude;
    int d = 3;
    std::vector<SecretSlot> secrets{{"A", "R"}};
    std::vector<Event> events;
    Decoder decoder;
    std::vector<std::string> notes;
    bool cheat = false;

    bool symbolic() const { return decoder.code.mode == EdgeCodeMode::Symbolic; }
};

class PlanRefused : public std::runtime_error {
public:
    PlanRefused(std::string reason, std::optional<Verdict> v = std::nullopt)
        : std::runtime_error(reason + (v ? "\n" + v->to_string() : "")), verdict(std::move(v)) {}
    std::optional<Verdict> verdict;
};

// Directed causal-connection graph over authorized sets.

struct CausalGraph {
    std::vector<std::string> vertices;
    std::vector<std::pair<int, int>> edges;

    bool has_edge(int i, int j) const { return std::find(edges.begin(), edges.end(), std::pair{i, j}) != edges.end(); }
    bool complete_undirected() const {
        for (std::size_t i = 0; i < vertices.size(); ++i)
            for (std::size_t j = i + 1; j < vertices.size(); ++j)
                if (!has_edge(static_cast<int>(i), static_cast<int>(j)) && !has_edge(static_cast<int>(j), static_cast<int>(i)))
                    return false;
        return true;
    }
};

inline CausalGraph build_causal_graph(const std::vector<std::string>& names, const std::vector<std::vector<Diamond>>& sets) {
    CausalGraph g{names, {}};
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = 0; j < sets.size(); ++j) {
            if (i == j) continue;
            bool edge = false;
            for (const auto& a : sets[i])
                for (const auto& b : sets[j]) edge = edge || causal_leq(a.c, b.r);
            if (edge) g.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    return g;
}

namespace detail {

inline Polyline polyline(std::initializer_list<SpacetimePoint> pts) {
    Polyline p;
    for (const auto& q : pts)
        if (p.vertices.empty() || !(p.vertices.back() == q)) p.vertices.push_back(q);
    return p;
}

inline std::vector<SpacetimePoint> task_points(const TaskSpec& t) {
    std::vector<SpacetimePoint> pts{t.start};
    for (const auto& r : t.regions)
        for (const auto& d : r.diamonds) {
            pts.push_back(d.c);
            pts.push_back(d.r);
        }
    for (const auto& d : t.diamonds) {
        pts.push_back(d.diamond.c);
        pts.push_back(d.diamond.r);
    }
    return pts;
}

inline constexpr double kPastMargin = 2.0;

// A point in the causal past of every task coordinate, at the spatial origin.
inline SpacetimePoint far_past(const TaskSpec& t) {
    double tmin = std::numeric_limits<double>::infinity();
    for (const auto& p : task_points(t)) {
        double r2 = 0;
        for (double x : p.x) r2 += x * x;
        tmin = std::min(tmin, p.t - std::sqrt(r2));
    }
    return SpacetimePoint(std::floor(tmin) - kPastMargin, std::vector<double>(t.dim, 0.0));
}

inline std::string edge_label(const EdgeCode& code, int k) {
    if (code.mode == EdgeCodeMode::Trivial) return "1";
    return std::to_string(code.edges[k].first) + "_" + std::to_string(code.edges[k].second);
}

struct Carrier {
    std::vector<Event> events;
    std::string carrier;
    std::string outcome;
};

// Direct curve from s through a then b; entry points are the earliest ones reachable.
inline std::optional<Polyline> direct_curve(const SpacetimePoint& s, const std::vector<Diamond>& a, const std::vector<Diamond>& b) {
    for (const auto& d1 : a) {
        if (!causal_leq(s, d1.r)) continue;
        const auto p = entry_point(s, d1);
        if (!d1.contains(p) || !causal_leq(s, p)) continue;
        for (const auto& d2 : b) {
            if (!causal_leq(p, d2.r)) continue;
            const auto q = entry_point(p, d2);
            if (!d2.contains(q) || !causal_leq(p, q)) continue;
            return polyline({s, p, q});
        }
    }
    return std::nullopt;
}

inline std::optional<SpacetimePoint> first_entry(const SpacetimePoint& s, const std::vector<Diamond>& a) {
    for (const auto& d : a) {
        if (!causal_leq(s, d.r)) continue;
        const auto p = entry_point(s, d);
        if (d.contains(p) && causal_leq(s, p)) return p;
    }
    return std::nullopt;
}

// Moves share `token` (located at s) through both regions, directly or by teleportation.
inline Carrier transport_through(const SpacetimePoint& s, const SpacetimePoint& e, const std::string& token,
                                 const std::string& label, int d, const std::string& name_a, const std::vector<Diamond>& a,
                                 const std::string& name_b, const std::vector<Diamond>& b) {
    Carrier out;
    if (auto p = direct_curve(s, a, b)) {
        out.events.push_back(MoveToken{token, *p, std::nullopt, name_b});
        out.carrier = token;
        return out;
    }
    if (auto p = direct_curve(s, b, a)) {
        out.events.push_back(MoveToken{token, *p, std::nullopt, name_a});
        out.carrier = token;
        return out;
    }
    const std::string E = "E" + label, F = "Ebar" + label, O = "O" + label;
    std::optional<Polyline> far;
    for (int swap = 0; swap < 2 && !far; ++swap) {
        const auto& x = swap ? b : a;
        const auto& y = swap ? a : b;
        for (const auto& d1 : x) {
            if (far) break;
            for (const auto& d2 : y) {
                if (!causal_leq(d1.c, d2.r)) continue;
                const auto q = entry_point(d1.c, d2);
                if (!d2.contains(q)) continue;
                far = polyline({e, d1.c, q});
                break;
            }
        }
    }
    const auto oa = first_entry(s, a);
    const auto ob = first_entry(s, b);
    if (!far || !oa || !ob) throw PlanRefused("no transport route between " + name_a + " and " + name_b);
    out.events.push_back(CreateEntangled{d, E, F, e});
    out.events.push_back(MoveToken{E, polyline({e, s}), std::nullopt, "s"});
    out.events.push_back(MoveToken{F, *far, std::nullopt, name_a + "," + name_b});
    out.events.push_back(BellMeasure{token, E, O, s});
    out.events.push_back(BroadcastClassical{O, {polyline({s, *oa}), polyline({s, *ob})}, {name_a, name_b}, std::nullopt});
    out.carrier = F;
    out.outcome = O;
    return out;
}

inline std::vector<Diamond> set_diamonds(const TaskSpec& t, const NameSet& names) {
    std::vector<Diamond> out;
    for (const auto& n : names) out.push_back(t.diamond(n));
    return out;
}

inline EdgeCode code_for(int n, int d) { return n == 1 ? trivial_code() : edge_code_build(n, d); }

inline std::vector<std::string> share_tokens(const EdgeCode& code) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < code.shares(); ++k) out.push_back("S" + edge_label(code, static_cast<int>(k)));
    return out;
}

// Vertex pair of share k (1-based vertex indices).
inline std::vector<int> share_vertices(const EdgeCode& code, int k) {
    if (code.mode == EdgeCodeMode::Trivial) return {1};
    return {code.edges[k].first, code.edges[k].second};
}

}  // namespace detail

inline ProtocolPlan plan_localize_exclude(const TaskSpec& t) {
    const Verdict v = check_localize_exclude(t);
    if (!v.feasible) throw PlanRefused("task is infeasible", v);
    const int n = static_cast<int>(t.authorized.size());
    const int m = static_cast<int>(t.unauthorized.size());
    if (n == 0) throw PlanRefused("no authorized regions");
    if (m > 0 && t.dim != 1) throw PlanRefused("key routing around unauthorized regions is supported in 1+1 only");

    ProtocolPlan plan;
    plan.kind = t.kind;
    plan.d = t.secret_dim;
    const EdgeCode code = detail::code_for(n, t.secret_dim);
    plan.decoder.code = code;
    for (const auto& a : t.authorized) {
        plan.decoder.vertices.push_back(join_names(a));
        plan.decoder.vertex_sets.push_back(a);
    }
    const auto shares = detail::share_tokens(code);
    const SpacetimePoint s = t.start;
    const SpacetimePoint e = detail::far_past(t);

    plan.events.push_back(EncodeScheme{SchemeKind::EdgeCode, {"A"}, shares, "", s});

    std::vector<std::vector<Diamond>> auth;
    for (const auto& a : t.authorized) auth.push_back(t.union_region(a).diamonds);
    std::vector<Region> unauth;
    for (const auto& u : t.unauthorized) unauth.push_back(t.union_region(u));

    // Key routes: per share, copies for s and each endpoint region, one XOR share per unauthorized region.
    struct KeyRoute {
        std::string token;
        Polyline path;
        NameSet avoid;
        std::string dest;
    };
    std::vector<std::vector<KeyRoute>> key_routes(shares.size());
    std::vector<KeyRecipe> key_recipes;
    if (m > 0) {
        for (std::size_t k = 0; k < shares.size(); ++k) {
            const std::string K = "K" + detail::edge_label(code, static_cast<int>(k));
            KeyRecipe rec{K, {}};
            std::vector<std::pair<std::string, std::optional<Region>>> targets{{"s", std::nullopt}};
            for (int vtx : detail::share_vertices(code, static_cast<int>(k)))
                targets.emplace_back(plan.decoder.vertices[vtx - 1], t.union_region(t.authorized[vtx - 1]));
            for (const auto& [tname, treg] : targets) {
                std::vector<std::string> copy;
                for (int l = 0; l < m; ++l) {
                    const auto path = treg ? extract_escape_path(*treg, unauth[l]) : extract_escape_path(s, unauth[l]);
                    if (!path) throw std::logic_error("escape path missing for a feasible task");
                    const std::string tok = K + "/" + tname + "/" + join_names(t.unauthorized[l]);
                    key_routes[k].push_back({tok, *path, t.unauthorized[l], tname});
                    copy.push_back(tok);
                }
                rec.copies.push_back(copy);
            }
            key_recipes.push_back(rec);
        }
        // Key generation below every route start.
        double umin = s.u(), vmin = s.v();
        for (const auto& routes : key_routes)
            for (const auto& r : routes) {
                umin = std::min(umin, r.path.front().u());
                vmin = std::min(vmin, r.path.front().v());
            }
        const SpacetimePoint g = SpacetimePoint::from_uv(umin - 1, vmin - 1);
        for (std::size_t k = 0; k < shares.size(); ++k) {
            const auto& rec = key_recipes[k];
            plan.events.push_back(EncodeScheme{SchemeKind::QotpKeygen, {}, {rec.key}, "", g});
            for (const auto& copy : rec.copies) plan.events.push_back(EncodeScheme{SchemeKind::XorSplit, {rec.key}, copy, rec.key, g});
            for (const auto& r : key_routes[k]) {
                Polyline p = r.path;
                p.vertices.insert(p.vertices.begin(), g);
                plan.events.push_back(MoveToken{r.token, p, r.avoid, r.dest});
            }
        }
    }

    for (std::size_t k = 0; k < shares.size(); ++k) {
        const std::string label = detail::edge_label(code, static_cast<int>(k));
        ShareRecipe rec;
        if (m > 0) {
            plan.events.push_back(EncodeScheme{SchemeKind::Qotp, {shares[k]}, {shares[k]}, key_recipes[k].key, s});
            rec.key = key_recipes[k].key;
        }
        const auto vs = detail::share_vertices(code, static_cast<int>(k));
        if (vs.size() == 1) {
            const auto p = detail::first_entry(s, auth[0]);
            if (!p) throw std::logic_error("authorized region unreachable for a feasible task");
            plan.events.push_back(MoveToken{shares[k], detail::polyline({s, *p}), std::nullopt, plan.decoder.vertices[0]});
            rec.carrier = shares[k];
        } else {
            const int i = vs[0] - 1, j = vs[1] - 1;
            auto c = detail::transport_through(s, e, shares[k], label, t.secret_dim, plan.decoder.vertices[i], auth[i],
                                               plan.decoder.vertices[j], auth[j]);
            plan.events.insert(plan.events.end(), c.events.begin(), c.events.end());
            rec.carrier = c.carrier;
            rec.outcome = c.outcome;
        }
        plan.decoder.shares.push_back(rec);
    }
    plan.decoder.keys = key_recipes;
    return plan;
}

namespace detail {

// Carrier routing between two diamond sets under calls: the share reaches D' or D''
// depending on the call bit of D'.
inline void route_share_on_call(const TaskSpec& t, const SpacetimePoint& e, const std::string& token, const std::string& label,
                                const NameSet& x, const NameSet& y, ProtocolPlan& plan, ShareRecipe& rec) {
    const SpacetimePoint s = t.start;
    // Shared diamond: no decision needed.
    for (const auto& n : x)
        if (std::find(y.begin(), y.end(), n) != y.end() && causal_leq(s, t.diamond(n).r)) {
            const auto& D = t.diamond(n);
            const auto p = entry_point(s, D);
            if (!D.contains(p)) continue;
            plan.events.push_back(MoveToken{token, polyline({s, p, D.r}), std::nullopt, n});
            plan.events.push_back(HandOver{token, n, called(n)});
            rec.carrier = token;
            return;
        }
    struct Choice {
        std::string d1, d2;
    };
    std::vector<Choice> choices;
    for (int swap = 0; swap < 2; ++swap) {
        const auto& a = swap ? y : x;
        const auto& b = swap ? x : y;
        for (const auto& n1 : a)
            for (const auto& n2 : b) {
                const auto& D1 = t.diamond(n1);
                const auto& D2 = t.diamond(n2);
                if (causal_leq(D1.c, D2.r) && causal_leq(s, D1.r) && causal_leq(s, D2.r)) choices.push_back({n1, n2});
            }
    }
    if (choices.empty()) throw PlanRefused("no call-routing pair between " + join_names(x) + " and " + join_names(y));
    // Direct transport when some choice allows it.
    for (const auto& ch : choices) {
        const auto& D1 = t.diamond(ch.d1);
        const auto& D2 = t.diamond(ch.d2);
        const auto p = entry_point(s, D1);
        if (!D1.contains(p) || !causal_leq(s, p) || !causal_leq(p, D2.r)) continue;
        plan.events.push_back(MoveToken{token, polyline({s, p}), std::nullopt, ""});
        plan.events.push_back(ConditionalRoute{token, p,
                                               {Branch{called(ch.d1), polyline({p, D1.r}), ch.d1},
                                                Branch{Predicate{{{ch.d1, 0}}}, polyline({p, D2.r}), ch.d2}},
                                               ""});
        plan.events.push_back(HandOver{token, ch.d1, called(ch.d1)});
        plan.events.push_back(HandOver{token, ch.d2, called(ch.d2)});
        rec.carrier = token;
        return;
    }
    const auto& ch = choices.front();
    const auto& D1 = t.diamond(ch.d1);
    const auto& D2 = t.diamond(ch.d2);
    const std::string E = "E" + label, F = "Ebar" + label, O = "O" + label;
    plan.events.push_back(CreateEntangled{plan.d, E, F, e});
    plan.events.push_back(MoveToken{E, polyline({e, s}), std::nullopt, "s"});
    plan.events.push_back(MoveToken{F, polyline({e, D1.c}), std::nullopt, ""});
    plan.events.push_back(BellMeasure{token, E, O, s});
    plan.events.push_back(BroadcastClassical{O, {polyline({s, D1.r}), polyline({s, D2.r})}, {ch.d1, ch.d2}, std::nullopt});
    plan.events.push_back(ConditionalRoute{F, D1.c,
                                           {Branch{called(ch.d1), polyline({D1.c, D1.r}), ch.d1},
                                            Branch{Predicate{{{ch.d1, 0}}}, polyline({D1.c, D2.r}), ch.d2}},
                                           ""});
    for (const auto& n : {ch.d1, ch.d2}) {
        plan.events.push_back(HandOver{F, n, called(n)});
        plan.events.push_back(HandOver{O, n, called(n)});
    }
    rec.carrier = F;
    rec.outcome = O;
}

// Key-share placement for authorized set x against each unauthorized set: merged by target diamond.
inline std::vector<std::pair<std::string, Predicate>> key_targets(const TaskSpec& t, const NameSet& x) {
    std::vector<std::pair<std::string, Predicate>> out;
    auto add = [&](const std::string& d, const Predicate& p) {
        for (auto& [n, q] : out)
            if (n == d) {
                q = q.conjoin(p);
                return;
            }
        out.emplace_back(d, called(d).conjoin(p));
    };
    if (t.unauthorized.empty()) {
        add(x.front(), {});
        return out;
    }
    for (const auto& u : t.unauthorized) {
        std::optional<std::string> outside;
        for (const auto& n : x)
            if (std::find(u.begin(), u.end(), n) == u.end()) {
                outside = n;
                break;
            }
        if (outside) {
            add(*outside, {});
            continue;
        }
        NameSet extra;
        for (const auto& n : u)
            if (std::find(x.begin(), x.end(), n) == x.end()) extra.push_back(n);
        bool placed = false;
        for (const auto& n : x) {
            Predicate none;
            for (const auto& w : extra)
                if (causal_leq(t.diamond(w).c, t.diamond(n).r)) none.literals.push_back({w, 0});
            if (none.literals.empty()) continue;
            add(n, none);
            placed = true;
            break;
        }
        if (!placed) throw PlanRefused("no diamond of " + join_names(x) + " sees a call of " + join_names(extra));
    }
    return out;
}

// Shared construction for assembly and many-call summoning.
inline ProtocolPlan plan_on_calls(const TaskSpec& t, const std::vector<NameSet>& sets, bool pad) {
    ProtocolPlan plan;
    plan.kind = t.kind;
    plan.d = t.secret_dim;
    const int n = static_cast<int>(sets.size());
    const EdgeCode code = code_for(n, t.secret_dim);
    plan.decoder.code = code;
    for (const auto& x : sets) {
        plan.decoder.vertices.push_back(join_names(x));
        plan.decoder.vertex_sets.push_back(x);
    }
    const auto shares = share_tokens(code);
    const SpacetimePoint s = t.start;
    const SpacetimePoint e = far_past(t);
    plan.events.push_back(EncodeScheme{SchemeKind::EdgeCode, {"A"}, shares, "", s});
    for (std::size_t k = 0; k < shares.size(); ++k) {
        const std::string label = edge_label(code, static_cast<int>(k));
        const auto vs = share_vertices(code, static_cast<int>(k));
        ShareRecipe rec;
        if (pad) {
            const std::string K = "K" + label;
            KeyRecipe kr{K, {}};
            plan.events.push_back(EncodeScheme{SchemeKind::QotpKeygen, {}, {K}, "", e});
            plan.events.push_back(BroadcastClassical{K, {polyline({e, s})}, {"s"}, std::nullopt});
            for (int vtx : vs) {
                const auto& x = sets[vtx - 1];
                const auto targets = key_targets(t, x);
                std::vector<std::string> copy;
                for (const auto& [dn, pred] : targets) copy.push_back(K + "/" + join_names(x) + "/" + dn);
                plan.events.push_back(EncodeScheme{SchemeKind::XorSplit, {K}, copy, K, e});
                for (std::size_t i = 0; i < targets.size(); ++i) {
                    const auto& D = t.diamond(targets[i].first);
                    plan.events.push_back(MoveToken{copy[i], polyline({e, D.r}), std::nullopt, targets[i].first});
                    plan.events.push_back(HandOver{copy[i], targets[i].first, targets[i].second});
                }
                kr.copies.push_back(copy);
            }
            plan.decoder.keys.push_back(kr);
            plan.events.push_back(EncodeScheme{SchemeKind::Qotp, {shares[k]}, {shares[k]}, K, s});
            rec.key = K;
        }
        const auto& x = sets[vs[0] - 1];
        const auto& y = sets[vs.size() > 1 ? vs[1] - 1 : vs[0] - 1];
        route_share_on_call(t, e, shares[k], label, x, y, plan, rec);
        plan.decoder.shares.push_back(rec);
    }
    return plan;
}

}  // namespace detail

inline ProtocolPlan plan_assembly(const TaskSpec& t) {
    const Verdict v = check_assembly(t);
    if (!v.feasible) throw PlanRefused("task is infeasible", v);
    return detail::plan_on_calls(t, t.authorized, !t.unauthorized.empty());
}

inline ProtocolPlan plan_summoning(const TaskSpec& t) {
    const Verdict v = check_summoning(t);
    if (!v.feasible) throw PlanRefused("task is infeasible", v);
    if (t.variant == SummoningVariant::UnrestrictedCallSingleReturn)
        throw PlanRefused("unrestricted-call single-return planning is not supported");
    return detail::plan_on_calls(t, t.authorized_sets(), false);
}

struct PitLayout {
    std::vector<SpacetimePoint> decision;  // one per pair
};

inline PitLayout pit_layout(const TaskSpec& t) {
    PitLayout out;
    for (int x = 0; x < 3; ++x) {
        const auto& a = t.diamonds[2 * x].diamond;
        const auto& b = t.diamonds[2 * x + 1].diamond;
        std::vector<double> mid(t.dim);
        for (int i = 0; i < t.dim; ++i) mid[i] = 0.5 * (a.c.x[i] + b.c.x[i]);
        double tt = -std::numeric_limits<double>::infinity();
        for (const auto* c : {&a.c, &b.c}) {
            double r2 = 0;
            for (int i = 0; i < t.dim; ++i) r2 += (c->x[i] - mid[i]) * (c->x[i] - mid[i]);
            tt = std::max(tt, c->t + std::sqrt(r2));
        }
        SpacetimePoint p(tt, mid);
        if (!causal_leq(a.c, p) || !causal_leq(b.c, p) || !causal_leq(p, a.r) || !causal_leq(p, b.r) ||
            !causal_leq(t.start, p))
            throw PlanRefused("pair " + std::to_string(x + 1) + " has no decision point seeing both calls");
        out.decision.push_back(p);
    }
    return out;
}

inline ProtocolPlan plan_pit(const TaskSpec& t, bool cheat = false) {
    if (t.kind != TaskKind::PartyIndependentTransfer) throw PlanRefused("task is not party_independent_transfer");
    const Verdict v = check_pit_topology(t);
    if (!v.feasible) throw PlanRefused("wrong diamond topology", v);
    if (t.secret_dim != 3) throw PlanRefused("party-independent transfer needs secret_dim 3");
    const auto layout = pit_layout(t);
    ProtocolPlan plan;
    plan.kind = t.kind;
    plan.d = 3;
    plan.cheat = cheat;
    if (cheat) plan.secrets.push_back({"A'", "R'"});
    const char* pair_names[3] = {"a", "b", "c"};
    const int encodings = cheat ? 2 : 1;
    for (int enc = 0; enc < encodings; ++enc) {
        std::vector<std::string> toks;
        for (int x = 0; x < 3; ++x) toks.push_back(std::string("T") + pair_names[x] + (enc ? "'" : ""));
        plan.events.push_back(EncodeScheme{SchemeKind::Code23, {plan.secrets[enc].system}, toks, "", t.start});
        plan.decoder.pit_encodings.push_back(toks);
        for (int x = 0; x < 3; ++x) plan.decoder.pit_shares.push_back({toks[x], enc, x + 1});
    }
    for (int x = 0; x < 3; ++x) {
        const auto& n1 = t.diamonds[2 * x].name;
        const auto& n2 = t.diamonds[2 * x + 1].name;
        const auto& D1 = t.diamonds[2 * x].diamond;
        const auto& D2 = t.diamonds[2 * x + 1].diamond;
        const auto& p = layout.decision[x];
        const Predicate only1{{{n1, 1}, {n2, 0}}};
        const Predicate only2{{{n1, 0}, {n2, 1}}};
        for (int enc = 0; enc < encodings; ++enc) {
            const auto& tok = plan.decoder.pit_encodings[enc][x];
            plan.events.push_back(MoveToken{tok, detail::polyline({t.start, p}), std::nullopt, ""});
            std::vector<Branch> br;
            if (!cheat || enc == 0) br.push_back({only1, detail::polyline({p, D1.r}), n1});
            if (!cheat || enc == 1) br.push_back({only2, detail::polyline({p, D2.r}), n2});
            plan.events.push_back(ConditionalRoute{tok, p, br, ""});
            for (const auto& b : br) plan.events.push_back(HandOver{tok, b.dest, b.when});
        }
    }
    plan.notes.push_back("pairs: " + t.diamonds[0].name + "/" + t.diamonds[1].name + ", " + t.diamonds[2].name + "/" +
                         t.diamonds[3].name + ", " + t.diamonds[4].name + "/" + t.diamonds[5].name);
    return plan;
}

inline ProtocolPlan plan_task(const TaskSpec& t) {
    switch (t.kind) {
        case TaskKind::LocalizeExclude: return plan_localize_exclude(t);
        case TaskKind::StateAssembly: return plan_assembly(t);
        case TaskKind::Summoning: return plan_summoning(t);
        case TaskKind::PartyIndependentTransfer: return plan_pit(t);
    }
    throw std::logic_error("unreachable");
}

// Resource counts.

struct SchemeCost {
    int n = 0, m = 0, key_bits = 0;
    long quantum_shares = 0;
    long paper_qubits = 0;
    long xor_bits = 0;
    std::string shamir_bits = "O(m^2 n^2 log m)";
};

inline long binomial2(long n) { return n * (n - 1) / 2; }

inline SchemeCost scheme_cost(int n, int m, int key_bits) {
    if (n < 2 || m < 0 || key_bits < 0) throw std::invalid_argument("need n >= 2, m >= 0, L >= 0");
    SchemeCost c;
    c.n = n;
    c.m = m;
    c.key_bits = key_bits;
    c.quantum_shares = binomial2(n);
    c.paper_qubits = 2 * binomial2(n);
    c.xor_bits = 3L * m * binomial2(n) * key_bits;
    if (m == 0) c.shamir_bits = "0";
    return c;
}

inline std::string format_cost(const SchemeCost& c) {
    std::ostringstream o;
    o << "n " << c.n << "\nm " << c.m << "\nkey_bits " << c.key_bits << "\nquantum_shares " << c.quantum_shares
      << "\nqubits_formula " << c.paper_qubits << "\nxor_classical_bits " << c.xor_bits << "\nshamir_classical_bits "
      << c.shamir_bits << (c.m ? " (asymptotic)" : "") << '\n';
    return o.str();
}

// Event log.

inline std::string format_polyline(const Polyline& p) {
    std::string out;
    for (std::size_t i = 0; i < p.vertices.size(); ++i) out += (i ? "->" : "") + format_point(p.vertices[i]);
    return out;
}

inline std::string describe(const Event& ev) {
    std::ostringstream o;
    std::visit(
        [&](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, CreateEntangled>) {
                o << "create_entangled d=" << e.d << " a=" << e.a << " b=" << e.b << " at=" << format_point(e.at);
            } else if constexpr (std::is_same_v<T, MoveToken>) {
                o << "move token=" << e.token << " path=" << format_polyline(e.path);
                if (e.avoid) o << " avoid=" << join_names(*e.avoid);
                if (!e.dest.empty()) o << " dest=" << e.dest;
            } else if constexpr (std::is_same_v<T, BellMeasure>) {
                o << "bell_measure a=" << e.a << " b=" << e.b << " outcome=" << e.outcome << " at=" << format_point(e.at);
            } else if constexpr (std::is_same_v<T, BroadcastClassical>) {
                o << "broadcast token=" << e.token;
                for (std::size_t i = 0; i < e.paths.size(); ++i)
                    o << " to=" << e.dests[i] << " path=" << format_polyline(e.paths[i]);
                if (e.avoid) o << " avoid=" << join_names(*e.avoid);
            } else if constexpr (std::is_same_v<T, EncodeScheme>) {
                o << "encode scheme=" << to_string(e.scheme) << " in=" << join_names(e.inputs, ",")
                  << " out=" << join_names(e.outputs, ",");
                if (!e.key.empty()) o << " key=" << e.key;
                o << " at=" << format_point(e.at);
            } else if constexpr (std::is_same_v<T, ConditionalRoute>) {
                o << "route token=" << e.token << " at=" << format_point(e.at);
                for (const auto& b : e.branches)
                    o << " if=" << b.when.to_string() << " to=" << b.dest << " path=" << format_polyline(b.path);
                o << " else=" << (e.fallback_dest.empty() ? "stay" : e.fallback_dest);
            } else if constexpr (std::is_same_v<T, HandOver>) {
                o << "hand_over token=" << e.token << " diamond=" << e.diamond << " if=" << e.when.to_string();
            }
        },
        ev);
    return o.str();
}

inline std::string serialize_plan(const ProtocolPlan& p) {
    std::ostringstream o;
    o << "plan " << to_string(p.kind) << " d=" << p.d << " code=" << to_string(p.decoder.code.mode)
      << " vertices=" << p.decoder.vertices.size() << (p.cheat ? " cheat" : "") << '\n';
    for (const auto& n : p.notes) o << "note " << n << '\n';
    for (std::size_t i = 0; i < p.events.size(); ++i) o << i << ' ' << describe(p.events[i]) << '\n';
    for (std::size_t k = 0; k < p.decoder.shares.size(); ++k) {
        const auto& s = p.decoder.shares[k];
        o << "share " << k << " carrier=" << s.carrier;
        if (!s.outcome.empty()) o << " outcome=" << s.outcome;
        if (!s.key.empty()) o << " key=" << s.key;
        o << '\n';
    }
    for (const auto& k : p.decoder.keys) {
        o << "key " << k.key;
        for (const auto& c : k.copies) o << " copy=" << join_names(c, ",");
        o << '\n';
    }
    for (std::size_t v = 0; v < p.decoder.vertices.size(); ++v) {
        o << "vertex " << p.decoder.vertices[v] << " star=";
        const auto st = p.decoder.code.star(static_cast<int>(v) + 1);
        for (std::size_t i = 0; i < st.size(); ++i) o << (i ? "," : "") << st[i];
        o << '\n';
    }
    for (const auto& s : p.decoder.pit_shares) o << "pit_share " << s.token << " encoding=" << s.encoding << " index=" << s.index << '\n';
    return o.str();
}

}  // namespace stq
