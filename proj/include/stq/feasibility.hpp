#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "model.hpp"

namespace stq {

enum class Condition { I_A, I_B, II, III, B1 };

inline const char* to_string(Condition c) {
    switch (c) {
        case Condition::I_A: return "I_A";
        case Condition::I_B: return "I_B";
        case Condition::II: return "II";
        case Condition::III: return "III";
        case Condition::B1: return "B1";
    }
    return "?";
}

struct Violation {
    Condition condition;
    std::vector<std::string> witness;

    friend bool operator<(const Violation& a, const Violation& b) {
        return std::tie(a.condition, a.witness) < std::tie(b.condition, b.witness);
    }
    friend bool operator==(const Violation& a, const Violation& b) {
        return a.condition == b.condition && a.witness == b.witness;
    }
};

struct Verdict {
    bool feasible = true;
    std::vector<Violation> violations;

    void add(Condition c, std::vector<std::string> w) {
        violations.push_back({c, std::move(w)});
        feasible = false;
    }
    void finish() { std::sort(violations.begin(), violations.end()); }

    bool has(Condition c) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.condition == c; });
    }

    std::string to_string() const {
        std::ostringstream o;
        o << (feasible ? "feasible" : "infeasible") << '\n';
        for (const auto& v : violations) {
            o << "  violation " << stq::to_string(v.condition) << " (";
            for (std::size_t i = 0; i < v.witness.size(); ++i) o << (i ? ", " : "") << v.witness[i];
            o << ")\n";
        }
        return o.str();
    }
};

class UndecidableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Witness curves for higher-dimensional escape checks, keyed by (through, avoided)
// names; the start point is named "s".
using WitnessCurves = std::map<std::pair<std::string, std::string>, Polyline>;

inline constexpr double kWitnessStep = 0.01;

namespace detail {

inline std::vector<std::pair<std::string, Region>> authorized_regions(const TaskSpec& t) {
    std::vector<std::pair<std::string, Region>> out;
    for (const auto& s : t.authorized) out.emplace_back(join_names(s), t.union_region(s));
    return out;
}

inline std::vector<std::pair<std::string, Region>> unauthorized_regions(const TaskSpec& t) {
    std::vector<std::pair<std::string, Region>> out;
    for (const auto& s : t.unauthorized) out.emplace_back(join_names(s), t.union_region(s));
    return out;
}

inline std::vector<std::string> sorted_pair(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return {a, b};
}

inline bool sets_connected(const TaskSpec& t, const NameSet& a, const NameSet& b) {
    for (const auto& x : a)
        for (const auto& y : b)
            if (diamonds_connected(t.diamond(x), t.diamond(y))) return true;
    return false;
}

inline bool set_in_future(const TaskSpec& t, const NameSet& a) {
    for (const auto& x : a)
        if (causal_leq(t.start, t.diamond(x).r)) return true;
    return false;
}

inline void check_pairs_connected(const TaskSpec& t, const std::vector<NameSet>& sets, Verdict& v) {
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j)
            if (!sets_connected(t, sets[i], sets[j])) v.add(Condition::II, sorted_pair(join_names(sets[i]), join_names(sets[j])));
}

}  // namespace detail

inline Verdict check_localize_exclude(const TaskSpec& t, const WitnessCurves* witnesses = nullptr) {
    if (t.kind != TaskKind::LocalizeExclude) throw std::invalid_argument("task is not localize_exclude");
    Verdict v;
    const auto A = detail::authorized_regions(t);
    const auto U = detail::unauthorized_regions(t);
    if (t.dim > 1 && !U.empty() && !witnesses) throw UndecidableError("undecidable in this mode");

    auto escapes = [&](const std::string& through_name, const Region& through, const std::string& avoid_name,
                       const Region& avoid) {
        if (t.dim == 1) return escape_exists(through, avoid);
        auto it = witnesses->find({through_name, avoid_name});
        if (it == witnesses->end()) throw UndecidableError("undecidable in this mode");
        return verify_witness_curve(it->second, through, avoid, kWitnessStep);
    };

    for (const auto& [name, reg] : A)
        if (!region_in_future(t.start, reg)) v.add(Condition::I_A, {name});
    const Region s_region = point_region(t.start, "s");
    for (const auto& [name, reg] : U)
        if (!escapes("s", s_region, name, reg)) v.add(Condition::I_B, {name});
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = i + 1; j < A.size(); ++j)
            if (!regions_causally_connected(A[i].second, A[j].second))
                v.add(Condition::II, detail::sorted_pair(A[i].first, A[j].first));
    for (const auto& [an, ar] : A)
        for (const auto& [un, ur] : U)
            if (!escapes(an, ar, un, ur)) v.add(Condition::III, {an, un});
    v.finish();
    return v;
}

inline Verdict check_assembly(const TaskSpec& t) {
    if (t.kind != TaskKind::StateAssembly) throw std::invalid_argument("task is not state_assembly");
    Verdict v;
    for (const auto& a : t.authorized)
        if (!detail::set_in_future(t, a)) v.add(Condition::I_A, {join_names(a)});
    detail::check_pairs_connected(t, t.authorized, v);
    for (const auto& a : t.authorized)
        for (const auto& u : t.unauthorized) {
            NameSet a_minus_u, u_minus_a;
            for (const auto& x : a)
                if (std::find(u.begin(), u.end(), x) == u.end()) a_minus_u.push_back(x);
            if (!a_minus_u.empty()) continue;
            for (const auto& x : u)
                if (std::find(a.begin(), a.end(), x) == a.end()) u_minus_a.push_back(x);
            if (u_minus_a.empty() || !detail::sets_connected(t, u_minus_a, a))
                v.add(Condition::III, {join_names(a), join_names(u)});
        }
    v.finish();
    return v;
}

inline constexpr int kMaxSubsetDiamonds = 20;

inline Verdict check_summoning(const TaskSpec& t) {
    if (t.kind != TaskKind::Summoning) throw std::invalid_argument("task is not summoning");
    Verdict v;
    switch (t.variant) {
        case SummoningVariant::SingleCallSingleReturn:
        case SummoningVariant::ManyCallManyReturn: {
            const auto sets = t.authorized_sets();
            for (const auto& a : sets)
                if (!detail::set_in_future(t, a)) v.add(Condition::I_A, {join_names(a)});
            detail::check_pairs_connected(t, sets, v);
            break;
        }
        case SummoningVariant::UnrestrictedCallSingleReturn: {
            const int n = static_cast<int>(t.diamonds.size());
            if (n > kMaxSubsetDiamonds) throw std::invalid_argument("too many diamonds for subset enumeration");
            for (const auto& d : t.diamonds)
                if (!causal_leq(t.start, d.diamond.r)) v.add(Condition::I_A, {d.name});
            // Subsets by size, then lexicographically by member index.
            std::vector<unsigned> masks;
            for (unsigned m = 1; m < (1u << n); ++m) masks.push_back(m);
            std::stable_sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
                const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
                if (pa != pb) return pa < pb;
                for (unsigned bit = 1; bit; bit <<= 1)
                    if ((a & bit) != (b & bit)) return (a & bit) != 0;
                return false;
            });
            for (unsigned m : masks) {
                bool ok = false;
                for (int s = 0; s < n && !ok; ++s) {
                    if (!(m >> s & 1u)) continue;
                    bool all = true;
                    for (int i = 0; i < n && all; ++i)
                        if (m >> i & 1u) all = causal_leq(t.diamonds[i].diamond.c, t.diamonds[s].diamond.r);
                    ok = all;
                }
                if (!ok) {
                    std::vector<std::string> w;
                    for (int i = 0; i < n; ++i)
                        if (m >> i & 1u) w.push_back(t.diamonds[i].name);
                    v.add(Condition::B1, w);
                    break;
                }
            }
            break;
        }
    }
    v.finish();
    return v;
}

inline std::string party_set_name(std::vector<int> s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
}

// No-cloning violations are reported as II, monotonicity violations as III,
// mirroring the localize-exclude conditions they embed into.
inline Verdict check_access_structure(const AccessStructure& a) {
    a.validate();
    Verdict v;
    auto as_set = [](const std::vector<int>& s) { return std::set<int>(s.begin(), s.end()); };
    const auto& A = a.authorized_subsets;
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = i + 1; j < A.size(); ++j) {
            const auto x = as_set(A[i]), y = as_set(A[j]);
            const bool meet = std::any_of(x.begin(), x.end(), [&](int p) { return y.count(p) > 0; });
            if (!meet) v.add(Condition::II, detail::sorted_pair(party_set_name(A[i]), party_set_name(A[j])));
        }
    for (const auto& s : A)
        for (const auto& u : a.unauthorized_subsets) {
            const auto x = as_set(s), y = as_set(u);
            if (std::includes(y.begin(), y.end(), x.begin(), x.end()))
                v.add(Condition::III, {party_set_name(s), party_set_name(u)});
        }
    v.finish();
    return v;
}

// Six-diamond transfer layout: consecutive diamonds form a pair. II flags a pair
// that is not connected both ways, III a connection across pairs.
inline Verdict check_pit_topology(const TaskSpec& t) {
    if (t.kind != TaskKind::PartyIndependentTransfer) throw std::invalid_argument("task is not party_independent_transfer");
    Verdict v;
    if (t.diamonds.size() != 6) throw std::invalid_argument("party_independent_transfer needs 6 diamonds");
    for (const auto& d : t.diamonds)
        if (!causal_leq(t.start, d.diamond.c)) v.add(Condition::I_A, {d.name});
    for (int p = 0; p < 3; ++p) {
        const auto& a = t.diamonds[2 * p];
        const auto& b = t.diamonds[2 * p + 1];
        if (!causal_leq(a.diamond.c, b.diamond.r) || !causal_leq(b.diamond.c, a.diamond.r))
            v.add(Condition::II, detail::sorted_pair(a.name, b.name));
        for (int q = p + 1; q < 3; ++q)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const auto& x = t.diamonds[2 * p + i];
                    const auto& y = t.diamonds[2 * q + j];
                    if (diamonds_connected(x.diamond, y.diamond)) v.add(Condition::III, detail::sorted_pair(x.name, y.name));
                }
    }
    v.finish();
    return v;
}

inline Verdict check_task(const TaskSpec& t, const WitnessCurves* witnesses = nullptr) {
    switch (t.kind) {
        case TaskKind::LocalizeExclude: return check_localize_exclude(t, witnesses);
        case TaskKind::StateAssembly: return check_assembly(t);
        case TaskKind::Summoning: return check_summoning(t);
        case TaskKind::PartyIndependentTransfer: return check_pit_topology(t);
    }
    throw std::logic_error("unreachable");
}

}  // namespace stq
