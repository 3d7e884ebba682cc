#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "model.hpp"
#include "planner.hpp"
#include "qsim.hpp"
#include "schemes.hpp"

namespace stq {

enum class ViewMode { Auto, Twirl, Enumerate };

inline const char* to_string(ViewMode m) {
    switch (m) {
        case ViewMode::Auto: return "auto";
        case ViewMode::Twirl: return "twirl";
        case ViewMode::Enumerate: return "enumerate";
    }
    return "?";
}

inline constexpr std::size_t kAutoEnumerateBranches = 81;
inline constexpr std::size_t kMaxEnumerateBranches = 6561;
inline constexpr int kMaxAuditPatternDiamonds = 12;

struct Scenario {
    std::optional<std::string> access;
    std::optional<CallPattern> calls;
    std::uint64_t seed = 0;
    ViewMode view = ViewMode::Auto;

    std::string to_string() const {
        std::string out;
        if (access) out = "access " + *access;
        if (calls) {
            const auto c = calls->called_set();
            out = "calls " + (c.empty() ? std::string("none") : join_names(c, ","));
        }
        return out + " seed " + std::to_string(seed);
    }
};

struct AuditFailure {
    char audit = 'a';
    std::size_t event = 0;
    std::string message;
};

struct AuditReport {
    std::vector<AuditFailure> failures;

    bool ok() const { return failures.empty(); }
    bool failed(char a) const {
        return std::any_of(failures.begin(), failures.end(), [&](const AuditFailure& f) { return f.audit == a; });
    }
    std::string to_string() const {
        std::ostringstream o;
        for (char a : {'a', 'b', 'c', 'd'}) {
            const bool bad = failed(a);
            o << "audit " << a << ' ' << (bad ? "fail" : "pass") << '\n';
            for (const auto& f : failures)
                if (f.audit == a) o << "  event " << f.event << ": " << f.message << '\n';
        }
        return o.str();
    }
};

struct Outcome {
    std::string scenario;
    std::vector<std::string> collected;
    std::vector<std::string> known_keys;
    std::vector<std::string> reconstructing_vertices;
    bool reconstructed = false;
    int disjoint_reconstructing_pairs = 0;
    std::optional<double> fidelity;
    std::optional<double> factorization_distance;
    std::optional<qsim::QState> view_state;
    std::optional<qsim::QState> reconstruction;
    std::string view_mode;
    std::map<std::size_t, std::string> event_outcomes;
    AuditReport audit;
    std::optional<int> receiver;
    std::optional<double> chi_pass_probability;
};

namespace detail {

struct TokenInfo {
    bool quantum = false;
    std::size_t created_by = 0;
    SpacetimePoint origin;
};


inline SpacetimePoint anchor(const Event& ev, const TaskSpec& t) {
    return std::visit(
        [&](const auto& e) -> SpacetimePoint {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, MoveToken>) return e.path.vertices.empty() ? t.start : e.path.front();
            else if constexpr (std::is_same_v<T, BroadcastClassical>)
                return e.paths.empty() || e.paths.front().vertices.empty() ? t.start : e.paths.front().front();
            else if constexpr (std::is_same_v<T, HandOver>) {
                const auto* d = t.find_diamond(e.diamond);
                return d ? d->diamond.r : t.start;
            } else return e.at;
        },
        ev);
}

// Linear extension of the causal order on event anchors; ties by index.
inline std::vector<std::size_t> causal_order(const ProtocolPlan& p, const TaskSpec& t) {
    const std::size_t n = p.events.size();
    std::vector<SpacetimePoint> pts;
    for (const auto& e : p.events) pts.push_back(anchor(e, t));
    std::vector<bool> done(n, false);
    std::vector<std::size_t> order;
    for (std::size_t step = 0; step < n; ++step) {
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i]) continue;
            bool ready = true;
            for (std::size_t j = 0; j < n && ready; ++j)
                if (!done[j] && j != i && !(pts[j] == pts[i]) && causal_leq(pts[j], pts[i])) ready = false;
            if (ready) {
                done[i] = true;
                order.push_back(i);
                break;
            }
        }
    }
    return order;
}

inline std::vector<CallPattern> all_patterns(const TaskSpec& t) {
    std::vector<CallPattern> out;
    const int n = static_cast<int>(t.diamonds.size());
    if (n == 0 || n > kMaxAuditPatternDiamonds) {
        out.push_back(CallPattern::of(t, {}));
        return out;
    }
    for (unsigned m = 0; m < (1u << n); ++m) {
        NameSet c;
        for (int i = 0; i < n; ++i)
            if (m >> i & 1u) c.push_back(t.diamonds[i].name);
        out.push_back(CallPattern::of(t, c));
    }
    return out;
}

// Where a token ends up under a call pattern.
inline std::string final_dest(const ProtocolPlan& p, const std::string& token, const CallPattern& calls) {
    std::string dest;
    for (const auto& ev : p.events) {
        if (const auto* m = std::get_if<MoveToken>(&ev); m && m->token == token) dest = m->dest;
        if (const auto* r = std::get_if<ConditionalRoute>(&ev); r && r->token == token) {
            dest = r->fallback_dest;
            for (const auto& b : r->branches)
                if (b.when.eval(calls)) {
                    dest = b.dest;
                    break;
                }
        }
    }
    return dest;
}

inline std::optional<Region> resolve_region(const TaskSpec& t, const NameSet& names) {
    for (const auto& n : names)
        if (!t.find_region(n)) return std::nullopt;
    return t.union_region(names);
}

}  // namespace detail

inline AuditReport validate_plan(const ProtocolPlan& p, const TaskSpec& t) {
    AuditReport rep;
    auto fail = [&](char a, std::size_t i, std::string msg) { rep.failures.push_back({a, i, std::move(msg)}); };
    std::map<std::string, detail::TokenInfo> tokens;
    for (const auto& sec : p.secrets) tokens[sec.system] = {true, 0, t.start};
    std::map<std::string, int> moves;
    auto create = [&](const std::string& name, bool quantum, std::size_t i, const SpacetimePoint& at) {
        if (tokens.count(name)) {
            fail('c', i, "token " + name + " created twice");
            return;
        }
        tokens[name] = {quantum, i, at};
    };
    auto known = [&](const std::string& name, std::size_t i) {
        if (!tokens.count(name)) {
            fail('c', i, "token " + name + " used before creation");
            return false;
        }
        return true;
    };
    auto check_path = [&](const Polyline& path, std::size_t i, const std::string& what) {
        if (path.vertices.empty()) fail('a', i, what + " has an empty worldline");
        else if (!causal_polyline(path)) fail('a', i, what + " worldline is not a causal curve");
    };
    auto check_avoid = [&](const Polyline& path, const std::optional<NameSet>& avoid, std::size_t i, const std::string& what) {
        if (!avoid) return;
        const auto reg = detail::resolve_region(t, *avoid);
        if (!reg) {
            fail('d', i, what + " avoids an unknown region");
            return;
        }
        if (!path.vertices.empty() && worldline_intersects(path, *reg)) fail('d', i, what + " enters " + join_names(*avoid));
    };
    auto check_pred = [&](const Predicate& pr, const SpacetimePoint& at, std::size_t i) {
        for (const auto& l : pr.literals) {
            const auto* d = t.find_diamond(l.diamond);
            if (!d) fail('b', i, "predicate reads unknown diamond " + l.diamond);
            else if (!causal_leq(d->diamond.c, at)) fail('b', i, "predicate reads call bit of " + l.diamond + " outside the past");
        }
    };

    for (std::size_t i = 0; i < p.events.size(); ++i) {
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, CreateEntangled>) {
                    create(e.a, true, i, e.at);
                    create(e.b, true, i, e.at);
                } else if constexpr (std::is_same_v<T, MoveToken>) {
                    check_path(e.path, i, "move of " + e.token);
                    check_avoid(e.path, e.avoid, i, "move of " + e.token);
                    if (known(e.token, i)) {
                        const auto& info = tokens[e.token];
                        if (!e.path.vertices.empty() && !causal_leq(info.origin, e.path.front()))
                            fail('a', i, "move of " + e.token + " starts outside the future of its origin");
                        if (info.quantum && ++moves[e.token] > 1) fail('c', i, "quantum token " + e.token + " moved twice");
                    }
                } else if constexpr (std::is_same_v<T, BellMeasure>) {
                    known(e.a, i);
                    known(e.b, i);
                    create(e.outcome, false, i, e.at);
                } else if constexpr (std::is_same_v<T, BroadcastClassical>) {
                    if (known(e.token, i) && tokens[e.token].quantum) fail('c', i, "broadcast of quantum token " + e.token);
                    for (const auto& path : e.paths) {
                        check_path(path, i, "broadcast of " + e.token);
                        check_avoid(path, e.avoid, i, "broadcast of " + e.token);
                    }
                    if (e.paths.size() != e.dests.size()) fail('a', i, "broadcast destinations do not match paths");
                } else if constexpr (std::is_same_v<T, EncodeScheme>) {
                    for (const auto& in : e.inputs) known(in, i);
                    if (!e.key.empty()) known(e.key, i);
                    if (e.scheme == SchemeKind::Qotp) return;
                    const bool q = e.scheme == SchemeKind::EdgeCode || e.scheme == SchemeKind::Code23;
                    for (const auto& out : e.outputs) create(out, q, i, e.at);
                } else if constexpr (std::is_same_v<T, ConditionalRoute>) {
                    if (known(e.token, i) && !causal_leq(tokens[e.token].origin, e.at))
                        fail('a', i, "route of " + e.token + " decides outside the future of its origin");
                    for (const auto& b : e.branches) {
                        check_path(b.path, i, "branch of " + e.token);
                        if (!b.path.vertices.empty() && !(b.path.front() == e.at))
                            fail('a', i, "branch of " + e.token + " does not start at the decision point");
                        check_pred(b.when, e.at, i);
                    }
                } else if constexpr (std::is_same_v<T, HandOver>) {
                    known(e.token, i);
                    const auto* d = t.find_diamond(e.diamond);
                    if (!d) fail('b', i, "hand-over at unknown diamond " + e.diamond);
                    else check_pred(e.when, d->diamond.r, i);
                }
            },
            p.events[i]);
    }

    // Linearity per call pattern.
    for (const auto& calls : detail::all_patterns(t)) {
        std::map<std::string, int> consumed;
        auto consume = [&](const std::string& tok, std::size_t i) {
            auto it = tokens.find(tok);
            if (it == tokens.end() || !it->second.quantum) return;
            if (++consumed[tok] > 1) fail('c', i, "quantum token " + tok + " consumed twice under calls {" +
                                                    join_names(calls.called_set(), ",") + "}");
        };
        for (std::size_t i = 0; i < p.events.size(); ++i) {
            if (const auto* b = std::get_if<BellMeasure>(&p.events[i])) {
                consume(b->a, i);
                consume(b->b, i);
            } else if (const auto* e = std::get_if<EncodeScheme>(&p.events[i])) {
                if (e->scheme == SchemeKind::EdgeCode || e->scheme == SchemeKind::Code23)
                    for (const auto& in : e->inputs) consume(in, i);
            } else if (const auto* h = std::get_if<HandOver>(&p.events[i])) {
                if (h->when.eval(calls) && detail::final_dest(p, h->token, calls) == h->diamond) consume(h->token, i);
            }
        }
    }
    // Deduplicate repeated failures across patterns.
    std::vector<AuditFailure> uniq;
    for (const auto& f : rep.failures)
        if (std::none_of(uniq.begin(), uniq.end(), [&](const AuditFailure& g) { return g.audit == f.audit && g.event == f.event; }))
            uniq.push_back(f);
    rep.failures = uniq;
    return rep;
}

namespace detail {

struct Live {
    bool quantum = false;
    bool consumed = false;
    SpacetimePoint origin;
    std::vector<Polyline> paths;
    std::string dest;
    ClassicalKey value;
    std::vector<std::string> copies;
};

inline std::optional<Region> access_region(const TaskSpec& t, const std::string& name) {
    for (const auto* fam : {&t.authorized, &t.unauthorized})
        for (const auto& s : *fam)
            if (join_names(s) == name) return t.union_region(s);
    if (t.find_region(name)) return t.region(name);
    return std::nullopt;
}

inline bool token_in_region(const Live& tok, const Region& reg) {
    if (tok.paths.empty()) return reg.contains(tok.origin);
    for (const auto& p : tok.paths)
        if (worldline_intersects(p, reg)) return true;
    return false;
}

// Replaces a slot by I/d, keeping the reduced state of the others.
inline qsim::QState twirl_slot(const qsim::QState& rho, const std::string& slot) {
    const auto labels = rho.reg().labels();
    const int d = rho.reg().dim(slot);
    if (labels.size() == 1) return qsim::maximally_mixed(slot, d);
    std::vector<std::string> rest;
    for (const auto& l : labels)
        if (l != slot) rest.push_back(l);
    const auto reduced = qsim::partial_trace(rho, rest);
    return qsim::reorder(qsim::tensor(reduced, qsim::maximally_mixed(slot, d)), labels);
}

inline double factorization_distance(const qsim::QState& view, const std::string& ref) {
    const auto labels = view.reg().labels();
    const int d = view.reg().dim(ref);
    if (labels.size() == 1) return qsim::trace_distance(view, qsim::maximally_mixed(ref, d));
    std::vector<std::string> rest;
    for (const auto& l : labels)
        if (l != ref) rest.push_back(l);
    const auto product = qsim::tensor(qsim::partial_trace(view, rest), qsim::maximally_mixed(ref, d));
    return qsim::trace_distance(qsim::reorder(view, [&] {
                                    auto o = rest;
                                    o.push_back(ref);
                                    return o;
                                }()),
                                product);
}

inline std::pair<int, int> symbols(const ClassicalKey& k) {
    if (k.bytes.size() != 2) throw std::logic_error("expected a two-symbol value");
    return {k.bytes[0], k.bytes[1]};
}

}  // namespace detail

class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline Outcome execute(const ProtocolPlan& plan, const TaskSpec& t, const Scenario& sc) {
    Outcome out;
    out.scenario = sc.to_string();
    out.audit = validate_plan(plan, t);
    if (!out.audit.ok()) return out;
    if (sc.access && sc.calls) throw std::invalid_argument("scenario names both an access region and calls");
    const CallPattern calls = sc.calls ? *sc.calls : CallPattern::of(t, {});
    std::optional<Region> region;
    if (sc.access) {
        region = detail::access_region(t, *sc.access);
        if (!region) throw std::invalid_argument("unknown access region '" + *sc.access + "'");
    }
    for (const auto& [k, b] : calls.bits)
        if (!t.find_diamond(k)) throw std::invalid_argument("call to unknown diamond '" + k + "'");

    const int d = plan.d;
    const bool sv = !plan.symbolic();
    std::mt19937_64 rng(sc.seed);
    std::map<std::string, detail::Live> toks;
    qsim::QState state;
    bool have_state = false;
    for (const auto& sec : plan.secrets) {
        toks[sec.system] = {true, false, t.start, {}, "", {}, {}};
        if (!sv) continue;
        auto pair = qsim::maximally_entangled(d, sec.reference, sec.system);
        state = have_state ? qsim::tensor(state, pair) : pair;
        have_state = true;
    }
    std::set<std::string> handed;

    for (std::size_t i : detail::causal_order(plan, t)) {
        const auto& ev = plan.events[i];
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, CreateEntangled>) {
                    toks[e.a] = {true, false, e.at, {}, "", {}, {}};
                    toks[e.b] = {true, false, e.at, {}, "", {}, {}};
                    if (sv) state = qsim::tensor(state, qsim::maximally_entangled(e.d, e.a, e.b));
                } else if constexpr (std::is_same_v<T, MoveToken>) {
                    auto& tk = toks.at(e.token);
                    tk.paths.push_back(e.path);
                    tk.dest = e.dest;
                } else if constexpr (std::is_same_v<T, BellMeasure>) {
                    int a = 0, b = 0;
                    if (sv) {
                        auto res = qsim::bell_measure(state, e.a, e.b, rng);
                        a = res.a;
                        b = res.b;
                        state = qsim::normalized(qsim::project_out(state, {e.a, e.b}, qsim::bell_vector(d, a, b)));
                    } else {
                        const int k = static_cast<int>(qsim::uniform01(rng) * d * d);
                        a = k / d;
                        b = k % d;
                    }
                    toks.at(e.a).consumed = true;
                    toks.at(e.b).consumed = true;
                    detail::Live o{false, false, e.at, {}, "", {}, {}};
                    o.value.bytes = {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
                    toks[e.outcome] = o;
                    out.event_outcomes[i] = "outcome " + std::to_string(a) + "," + std::to_string(b);
                } else if constexpr (std::is_same_v<T, BroadcastClassical>) {
                    auto& tk = toks.at(e.token);
                    tk.paths.insert(tk.paths.end(), e.paths.begin(), e.paths.end());
                    tk.copies.insert(tk.copies.end(), e.dests.begin(), e.dests.end());
                } else if constexpr (std::is_same_v<T, EncodeScheme>) {
                    switch (e.scheme) {
                        case SchemeKind::EdgeCode:
                        case SchemeKind::Code23: {
                            const auto& in = e.inputs.at(0);
                            if (sv) {
                                if (e.scheme == SchemeKind::Code23) state = code23_encode(state, in, e.outputs);
                                else state = plan.decoder.code.encode(state, in, e.outputs);
                            }
                            toks.at(in).consumed = true;
                            for (const auto& o : e.outputs) toks[o] = {true, false, e.at, {}, "", {}, {}};
                            break;
                        }
                        case SchemeKind::QotpKeygen: {
                            detail::Live k{false, false, e.at, {}, "", qotp_key_to_bytes(random_qotp_key(d, 1, rng)), {}};
                            toks[e.outputs.at(0)] = k;
                            break;
                        }
                        case SchemeKind::XorSplit: {
                            const auto parts = xor_mm_split(toks.at(e.inputs.at(0)).value, static_cast<int>(e.outputs.size()), rng);
                            for (std::size_t j = 0; j < parts.size(); ++j) toks[e.outputs[j]] = {false, false, e.at, {}, "", parts[j], {}};
                            break;
                        }
                        case SchemeKind::Qotp: {
                            if (sv) state = qotp_encrypt(state, e.inputs, qotp_key_from_bytes(toks.at(e.key).value, d));
                            break;
                        }
                    }
                } else if constexpr (std::is_same_v<T, ConditionalRoute>) {
                    auto& tk = toks.at(e.token);
                    std::string dest = e.fallback_dest;
                    std::string taken = "stay";
                    for (const auto& b : e.branches)
                        if (b.when.eval(calls)) {
                            tk.paths.push_back(b.path);
                            dest = b.dest;
                            taken = b.when.to_string();
                            break;
                        }
                    tk.dest = dest;
                    out.event_outcomes[i] = "route " + taken + " to " + (dest.empty() ? "none" : dest);
                } else if constexpr (std::is_same_v<T, HandOver>) {
                    const auto& tk = toks.at(e.token);
                    const bool there = tk.dest == e.diamond ||
                                       std::find(tk.copies.begin(), tk.copies.end(), e.diamond) != tk.copies.end();
                    const bool fire = e.when.eval(calls) && there && !tk.consumed;
                    if (fire) handed.insert(e.token);
                    out.event_outcomes[i] = fire ? "handed" : "withheld";
                }
            },
            ev);
    }

    // Collection.
    std::set<std::string> got;
    if (region) {
        for (const auto& [name, tk] : toks)
            if (!(tk.quantum && tk.consumed) && detail::token_in_region(tk, *region)) got.insert(name);
    } else {
        got = handed;
    }
    out.collected.assign(got.begin(), got.end());

    // Classical knowledge.
    std::map<std::string, ClassicalKey> known;
    for (const auto& n : got)
        if (!toks.at(n).quantum) known[n] = toks.at(n).value;
    for (const auto& kr : plan.decoder.keys) {
        if (known.count(kr.key)) continue;
        for (const auto& copy : kr.copies) {
            if (!std::all_of(copy.begin(), copy.end(), [&](const std::string& s) { return got.count(s) > 0; })) continue;
            std::vector<ClassicalKey> parts;
            for (const auto& s : copy) parts.push_back(toks.at(s).value);
            const auto k = xor_mm_reconstruct(parts);
            if (!(k == toks.at(kr.key).value)) throw EngineError("key copy of " + kr.key + " reconstructs a wrong value");
            known[kr.key] = k;
            break;
        }
        if (known.count(kr.key)) out.known_keys.push_back(kr.key);
    }
    auto is_known = [&](const std::string& n) { return n.empty() || known.count(n) > 0; };

    const auto& dec = plan.decoder;
    std::vector<std::string> carriers;
    for (const auto& s : dec.shares) carriers.push_back(s.carrier);

    if (plan.kind == TaskKind::PartyIndependentTransfer) {
        // Parties own alternating diamonds of each pair.
        std::vector<std::vector<const PitShare*>> party(2);
        for (const auto& ps : dec.pit_shares) {
            if (!got.count(ps.token)) continue;
            const std::string& dst = toks.at(ps.token).dest;
            for (std::size_t k = 0; k < t.diamonds.size(); ++k)
                if (t.diamonds[k].name == dst) party[k % 2].push_back(&ps);
        }
        for (int pidx = 0; pidx < 2; ++pidx) {
            if (party[pidx].size() < 2) continue;
            auto mine = party[pidx];
            std::sort(mine.begin(), mine.end(), [](const PitShare* a, const PitShare* b) { return a->index < b->index; });
            const PitShare* p = mine[0];
            const PitShare* q = mine[1];
            if (p->encoding != q->encoding) continue;
            out.receiver = pidx + 1;
            const auto& shares = dec.pit_encodings[p->encoding];
            auto decoded = code23_decode(state, shares, std::pair<int, int>{p->index, q->index});
            const auto& sec = plan.secrets[p->encoding];
            const auto pairstate = qsim::partial_trace(decoded, {p->token, sec.reference});
            out.fidelity = qsim::fidelity(pairstate, qsim::maximally_entangled(d, p->token, sec.reference));
            out.reconstructed = *out.fidelity > 0.5;
            out.reconstruction = qsim::partial_trace(decoded, {p->token});
            out.reconstructing_vertices.push_back("party" + std::to_string(pidx + 1));
            const auto& other = party[1 - pidx];
            if (other.size() == 1) {
                const auto test = qsim::partial_trace(decoded, {q->token, other[0]->token});
                const qsim::Vec chi = qsim::maximally_entangled(3).amplitudes();
                out.chi_pass_probability = (chi.adjoint() * test.density_ref() * chi)(0, 0).real();
            }
            break;
        }
        return out;
    }

    // Reconstruction at each vertex star.
    std::vector<std::vector<std::string>> rec_sets;
    for (std::size_t v = 0; v < dec.vertices.size(); ++v) {
        const auto st = dec.code.star(static_cast<int>(v) + 1);
        bool ok = true;
        for (int k : st) {
            const auto& s = dec.shares[k];
            ok = ok && got.count(s.carrier) && !toks.at(s.carrier).consumed && is_known(s.outcome) && is_known(s.key);
        }
        if (!ok) continue;
        out.reconstructing_vertices.push_back(dec.vertices[v]);
        std::vector<std::string> set;
        for (int k : st) set.push_back(dec.shares[k].carrier);
        rec_sets.push_back(set);
        if (!sv) continue;
        qsim::QState work = state;
        for (int k : st) {
            const auto& s = dec.shares[k];
            if (!s.outcome.empty()) {
                const auto [a, b] = detail::symbols(known.at(s.outcome));
                work = qsim::apply(work, qsim::weyl(d, a, b), {s.carrier});
            }
            if (!s.key.empty()) work = qotp_decrypt(work, {s.carrier}, qotp_key_from_bytes(known.at(s.key), d));
        }
        const std::string slot = dec.code.decode_star(work, static_cast<int>(v) + 1, carriers);
        const auto& ref = plan.secrets[0].reference;
        const double f = qsim::fidelity(qsim::partial_trace(work, {slot, ref}), qsim::maximally_entangled(d, slot, ref));
        if (!out.fidelity || f < *out.fidelity) {
            out.fidelity = f;
            out.reconstruction = qsim::partial_trace(work, {slot});
        }
    }
    out.reconstructed = !rec_sets.empty();
    for (std::size_t a = 0; a < rec_sets.size(); ++a)
        for (std::size_t b = a + 1; b < rec_sets.size(); ++b) {
            bool meet = false;
            for (const auto& x : rec_sets[a]) meet = meet || std::find(rec_sets[b].begin(), rec_sets[b].end(), x) != rec_sets[b].end();
            if (!meet) ++out.disjoint_reconstructing_pairs;
        }

    if (!sv) return out;

    // Adversary view: collected live quantum slots plus the reference.
    const auto& ref = plan.secrets[0].reference;
    std::vector<std::string> slots;
    for (const auto& n : out.collected)
        if (toks.at(n).quantum && !toks.at(n).consumed && state.reg().has(n)) slots.push_back(n);
    auto keep = slots;
    keep.push_back(ref);
    qsim::QState view = qsim::partial_trace(state, keep);

    // Hidden classical data guarding each collected slot.
    struct Hidden {
        std::string name;
        std::vector<std::string> slots;
        bool outcome;
    };
    std::vector<Hidden> hidden;
    auto add_hidden = [&](const std::string& name, const std::string& slot, bool outcome) {
        for (auto& h : hidden)
            if (h.name == name) {
                h.slots.push_back(slot);
                return;
            }
        hidden.push_back({name, {slot}, outcome});
    };
    for (const auto& sl : slots)
        for (const auto& s : dec.shares)
            if (s.carrier == sl) {
                if (!s.key.empty() && !is_known(s.key)) add_hidden(s.key, sl, false);
                if (!s.outcome.empty() && !is_known(s.outcome)) add_hidden(s.outcome, sl, true);
            }
    std::size_t branches = 1;
    for (std::size_t h = 0; h < hidden.size() && branches <= kMaxEnumerateBranches; ++h) branches *= static_cast<std::size_t>(d * d);
    ViewMode mode = sc.view;
    if (mode == ViewMode::Auto) mode = branches <= kAutoEnumerateBranches ? ViewMode::Enumerate : ViewMode::Twirl;
    if (mode == ViewMode::Enumerate && branches > kMaxEnumerateBranches) throw EngineError("too many hidden branches to enumerate");
    out.view_mode = to_string(mode);

    if (mode == ViewMode::Twirl) {
        std::set<std::string> twirled;
        for (const auto& h : hidden)
            for (const auto& sl : h.slots)
                if (twirled.insert(sl).second) view = detail::twirl_slot(view, sl);
    } else if (!hidden.empty()) {
        // Branch over alternative values: slot state becomes W' W_true^dagger (key) or W'^dagger W_true (outcome).
        qsim::Mat acc = qsim::Mat::Zero(view.density_ref().rows(), view.density_ref().cols());
        std::vector<int> digit(hidden.size(), 0);
        const int base = d * d;
        for (std::size_t br = 0; br < branches; ++br) {
            std::size_t code = br;
            for (std::size_t h = 0; h < hidden.size(); ++h) {
                digit[h] = static_cast<int>(code % base);
                code /= base;
            }
            qsim::QState w = view;
            for (std::size_t h = 0; h < hidden.size(); ++h) {
                const auto [ta, tb] = detail::symbols(toks.at(hidden[h].name).value);
                const qsim::Mat truth = qsim::weyl(d, ta, tb);
                const qsim::Mat alt = qsim::weyl(d, digit[h] / d, digit[h] % d);
                const qsim::Mat u = hidden[h].outcome ? qsim::Mat(alt.adjoint() * truth) : qsim::Mat(alt * truth.adjoint());
                for (const auto& sl : hidden[h].slots) w = qsim::apply(w, u, {sl});
            }
            acc += w.density_ref();
        }
        view = qsim::QState::density(view.reg(), acc / static_cast<double>(branches));
    }
    out.factorization_distance = detail::factorization_distance(view, ref);
    out.view_state = view;
    return out;
}

// Protocol 1 scenario: fair coin picks the receiver, who calls two random pairs on
// their side; the other party calls the remaining pair on theirs.
struct PitScenario {
    int receiver = 1;
    int other_pair = 0;
    CallPattern calls;
};

inline PitScenario pit_scenario(const TaskSpec& t, std::uint64_t seed) {
    if (t.kind != TaskKind::PartyIndependentTransfer) throw std::invalid_argument("task is not party_independent_transfer");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    PitScenario s;
    s.receiver = qsim::uniform01(rng) < 0.5 ? 1 : 2;
    s.other_pair = static_cast<int>(qsim::uniform01(rng) * 3);
    NameSet c;
    for (int x = 0; x < 3; ++x) {
        const int side = x == s.other_pair ? 3 - s.receiver : s.receiver;
        c.push_back(t.diamonds[2 * x + side - 1].name);
    }
    s.calls = CallPattern::of(t, c);
    return s;
}

// Expectation attached to a default scenario.
enum class Expect { Reconstruct, Exclude, Transfer };

struct NamedScenario {
    Scenario scenario;
    Expect expect = Expect::Reconstruct;
};

inline std::vector<NamedScenario> default_scenarios(const TaskSpec& t, std::uint64_t seed) {
    std::vector<NamedScenario> out;
    switch (t.kind) {
        case TaskKind::LocalizeExclude:
            for (const auto& a : t.authorized) out.push_back({Scenario{join_names(a), std::nullopt, seed}, Expect::Reconstruct});
            for (const auto& u : t.unauthorized) out.push_back({Scenario{join_names(u), std::nullopt, seed}, Expect::Exclude});
            break;
        case TaskKind::StateAssembly:
        case TaskKind::Summoning:
            for (const auto& a : t.authorized_sets())
                out.push_back({Scenario{std::nullopt, CallPattern::of(t, a), seed}, Expect::Reconstruct});
            for (const auto& u : t.unauthorized)
                out.push_back({Scenario{std::nullopt, CallPattern::of(t, u), seed}, Expect::Exclude});
            break;
        case TaskKind::PartyIndependentTransfer:
            out.push_back({Scenario{std::nullopt, pit_scenario(t, seed).calls, seed}, Expect::Transfer});
            break;
    }
    return out;
}

inline bool outcome_passes(const Outcome& o, Expect e, bool symbolic, double tol) {
    if (!o.audit.ok()) return false;
    switch (e) {
        case Expect::Reconstruct: return o.reconstructed && (symbolic || (o.fidelity && *o.fidelity >= 1 - tol));
        case Expect::Exclude:
            return !o.reconstructed && (symbolic || (o.factorization_distance && *o.factorization_distance <= tol));
        case Expect::Transfer:
            return o.receiver && o.fidelity && *o.fidelity >= 1 - tol && o.chi_pass_probability &&
                   std::abs(*o.chi_pass_probability - 1) <= tol;
    }
    return false;
}

inline std::string format_metric(double v) {
    std::ostringstream o;
    o.precision(3);
    o << std::scientific << v;
    return o.str();
}

inline std::string report(const Outcome& o) {
    std::ostringstream s;
    s << "scenario " << o.scenario << '\n';
    s << "collected " << (o.collected.empty() ? "none" : join_names(o.collected, ",")) << '\n';
    if (!o.known_keys.empty()) s << "known_keys " << join_names(o.known_keys, ",") << '\n';
    s << "reconstructed " << (o.reconstructed ? "yes" : "no");
    if (!o.reconstructing_vertices.empty()) s << " at " << join_names(o.reconstructing_vertices, ",");
    s << '\n';
    if (o.receiver) s << "receiver party" << *o.receiver << '\n';
    if (o.fidelity) s << "fidelity " << std::fixed << std::setprecision(12) << *o.fidelity << '\n' << std::defaultfloat;
    if (o.factorization_distance)
        s << "factorization_distance " << format_metric(*o.factorization_distance) << " (" << o.view_mode << ")\n";
    if (o.chi_pass_probability) s << "chi_test_pass " << std::fixed << std::setprecision(12) << *o.chi_pass_probability << '\n' << std::defaultfloat;
    if (o.disjoint_reconstructing_pairs) s << "disjoint_reconstructing_pairs " << o.disjoint_reconstructing_pairs << '\n';
    for (const auto& [i, what] : o.event_outcomes) s << "event " << i << ' ' << what << '\n';
    s << o.audit.to_string();
    return s.str();
}

}  // namespace stq
