#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "geometry.hpp"

namespace stq {

enum class TaskKind { LocalizeExclude, StateAssembly, Summoning, PartyIndependentTransfer };
enum class SummoningVariant { SingleCallSingleReturn, ManyCallManyReturn, UnrestrictedCallSingleReturn };

inline const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::LocalizeExclude: return "localize_exclude";
        case TaskKind::StateAssembly: return "state_assembly";
        case TaskKind::Summoning: return "summoning";
        case TaskKind::PartyIndependentTransfer: return "party_independent_transfer";
    }
    return "?";
}

inline const char* to_string(SummoningVariant v) {
    switch (v) {
        case SummoningVariant::SingleCallSingleReturn: return "single_call_single_return";
        case SummoningVariant::ManyCallManyReturn: return "many_call_many_return";
        case SummoningVariant::UnrestrictedCallSingleReturn: return "unrestricted_call_single_return";
    }
    return "?";
}

inline SummoningVariant parse_variant(const std::string& s) {
    if (s == "single_call_single_return" || s == "single_call") return SummoningVariant::SingleCallSingleReturn;
    if (s == "many_call_many_return" || s == "many_call") return SummoningVariant::ManyCallManyReturn;
    if (s == "unrestricted_call_single_return" || s == "unrestricted_call")
        return SummoningVariant::UnrestrictedCallSingleReturn;
    throw std::invalid_argument("unknown summoning variant '" + s + "'");
}

using NameSet = std::vector<std::string>;

inline std::string join_names(const NameSet& names, const std::string& sep = "+") {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? sep : "") + names[i];
    return out;
}

struct NamedDiamond {
    std::string name;
    Diamond diamond;
};

struct TaskSpec {
    TaskKind kind = TaskKind::LocalizeExclude;
    SummoningVariant variant = SummoningVariant::SingleCallSingleReturn;
    int dim = 1;
    SpacetimePoint start{0.0, 0.0};
    std::vector<Region> regions;
    std::vector<NamedDiamond> diamonds;
    std::vector<NameSet> authorized;
    std::vector<NameSet> unauthorized;
    int secret_dim = 3;

    const Region* find_region(const std::string& n) const {
        for (const auto& r : regions)
            if (r.name == n) return &r;
        return nullptr;
    }
    const NamedDiamond* find_diamond(const std::string& n) const {
        for (const auto& d : diamonds)
            if (d.name == n) return &d;
        return nullptr;
    }
    const Region& region(const std::string& n) const {
        if (auto* r = find_region(n)) return *r;
        throw std::invalid_argument("unknown region '" + n + "'");
    }
    const Diamond& diamond(const std::string& n) const {
        if (auto* d = find_diamond(n)) return d->diamond;
        throw std::invalid_argument("unknown diamond '" + n + "'");
    }

    // Union of the named regions as one region named by joining the names.
    Region union_region(const NameSet& names) const {
        Region out{join_names(names), dim, {}};
        for (const auto& n : names) {
            const auto& r = region(n);
            out.diamonds.insert(out.diamonds.end(), r.diamonds.begin(), r.diamonds.end());
        }
        return out;
    }

    std::vector<std::string> diamond_names() const {
        std::vector<std::string> out;
        for (const auto& d : diamonds) out.push_back(d.name);
        return out;
    }

    // Authorized sets, with the implicit one-diamond sets of single-return summoning.
    std::vector<NameSet> authorized_sets() const {
        if (kind == TaskKind::Summoning && variant != SummoningVariant::ManyCallManyReturn && authorized.empty()) {
            std::vector<NameSet> out;
            for (const auto& d : diamonds) out.push_back({d.name});
            return out;
        }
        return authorized;
    }
};

struct CallPattern {
    std::map<std::string, int> bits;

    bool called(const std::string& d) const {
        auto it = bits.find(d);
        return it != bits.end() && it->second != 0;
    }
    NameSet called_set() const {
        NameSet out;
        for (const auto& [k, b] : bits)
            if (b) out.push_back(k);
        return out;
    }
    static CallPattern of(const TaskSpec& t, const NameSet& calls) {
        CallPattern p;
        for (const auto& d : t.diamonds) p.bits[d.name] = 0;
        for (const auto& c : calls) {
            if (!p.bits.count(c)) throw std::invalid_argument("call to unknown diamond '" + c + "'");
            p.bits[c] = 1;
        }
        return p;
    }
};

struct AccessStructure {
    int n_parties = 0;
    std::vector<std::vector<int>> authorized_subsets;
    std::vector<std::vector<int>> unauthorized_subsets;

    void validate() const {
        if (n_parties < 1) throw std::invalid_argument("access structure needs at least one party");
        for (const auto* fam : {&authorized_subsets, &unauthorized_subsets})
            for (const auto& s : *fam) {
                if (s.empty()) throw std::invalid_argument("empty party subset");
                for (int p : s)
                    if (p < 1 || p > n_parties) throw std::invalid_argument("party index out of range");
            }
    }
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_point(const SpacetimePoint& p) {
    std::string out = "(" + format_number(p.t);
    for (double xi : p.x) out += "," + format_number(xi);
    return out + ")";
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

inline double parse_number(const std::string& s, int line) {
    const std::string t = trim(s);
    double v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v))
        throw ParseError(line, "bad number '" + s + "'");
    return v;
}

inline std::vector<double> parse_tuple(const std::string& s, char open, char close, int line) {
    const std::string t = trim(s);
    if (t.size() < 2 || t.front() != open || t.back() != close) throw ParseError(line, "malformed tuple '" + s + "'");
    std::vector<double> out;
    std::string inner = t.substr(1, t.size() - 2);
    std::size_t pos = 0;
    while (true) {
        const auto comma = inner.find(',', pos);
        out.push_back(parse_number(inner.substr(pos, comma - pos), line));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline SpacetimePoint parse_point(const std::string& s, int dim, int line) {
    auto v = parse_tuple(s, '(', ')', line);
    if (static_cast<int>(v.size()) != dim + 1)
        throw ParseError(line, "point '" + s + "' does not have " + std::to_string(dim + 1) + " coordinates");
    return SpacetimePoint(v[0], std::vector<double>(v.begin() + 1, v.end()));
}

// Reads "key=value" where value may contain no spaces.
inline std::string keyed(const std::string& word, const std::string& key, int line) {
    if (word.rfind(key + "=", 0) != 0) throw ParseError(line, "expected " + key + "=...");
    return word.substr(key.size() + 1);
}

inline Diamond parse_diamond_fields(const std::vector<std::string>& w, std::size_t from, int dim, int line) {
    if (w.size() != from + 2) throw ParseError(line, "diamond needs c=(...) r=(...)");
    auto c = parse_point(keyed(w[from], "c", line), dim, line);
    auto r = parse_point(keyed(w[from + 1], "r", line), dim, line);
    if (!causal_leq(c, r)) throw ParseError(line, "diamond not causal");
    return Diamond(c, r);
}

inline Diamond parse_region_entry(const std::string& entry, int dim, int line) {
    auto w = split_ws(entry);
    if (w.empty()) throw ParseError(line, "empty region entry");
    if (w[0] == "diamond") return parse_diamond_fields(w, 1, dim, line);
    if (w[0] == "box") {
        if (dim != 1) throw ParseError(line, "box sugar is only available in dim 1");
        if (w.size() != 3) throw ParseError(line, "box needs u=[a,b] v=[c,d]");
        auto u = parse_tuple(keyed(w[1], "u", line), '[', ']', line);
        auto v = parse_tuple(keyed(w[2], "v", line), '[', ']', line);
        if (u.size() != 2 || v.size() != 2 || u[0] > u[1] || v[0] > v[1]) throw ParseError(line, "diamond not causal");
        return Diamond::from_box(u[0], u[1], v[0], v[1]);
    }
    throw ParseError(line, "unknown region entry '" + w[0] + "'");
}

}  // namespace detail

inline TaskSpec parse_task(const std::string& text) {
    TaskSpec t;
    bool have_kind = false, have_dim = false, have_start = false;
    std::set<std::string> names;
    std::map<std::string, int> name_line;
    std::vector<std::pair<int, NameSet>> auth_lines, unauth_lines;
    bool secret_dim_given = false;

    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        for (std::string l; std::getline(in, l);) lines.push_back(l);
    }
    auto strip = [](std::string l) {
        const auto h = l.find('#');
        if (h != std::string::npos) l = l.substr(0, h);
        return detail::trim(l);
    };
    auto need_dim = [&](int line) {
        if (!have_dim) throw ParseError(line, "dim must be declared before geometry");
    };
    auto claim = [&](const std::string& n, int line) {
        if (!names.insert(n).second) throw ParseError(line, "duplicate name '" + n + "'");
        name_line[n] = line;
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int ln = static_cast<int>(i) + 1;
        std::string l = strip(lines[i]);
        if (l.empty()) continue;
        auto w = detail::split_ws(l);
        const std::string& head = w[0];
        if (head == "task") {
            if (have_kind) throw ParseError(ln, "duplicate task line");
            if (w.size() < 2) throw ParseError(ln, "task needs a kind");
            const std::string& k = w[1];
            if (k == "localize_exclude") t.kind = TaskKind::LocalizeExclude;
            else if (k == "state_assembly") t.kind = TaskKind::StateAssembly;
            else if (k == "party_independent_transfer") t.kind = TaskKind::PartyIndependentTransfer;
            else if (k == "summoning") {
                t.kind = TaskKind::Summoning;
                if (w.size() != 3) throw ParseError(ln, "summoning needs a variant");
                try {
                    t.variant = parse_variant(w[2]);
                } catch (const std::invalid_argument& e) {
                    throw ParseError(ln, e.what());
                }
            } else
                throw ParseError(ln, "unknown task kind '" + k + "'");
            if (t.kind != TaskKind::Summoning && w.size() != 2) throw ParseError(ln, "unexpected tokens after kind");
            have_kind = true;
        } else if (head == "dim") {
            if (have_dim) throw ParseError(ln, "duplicate dim line");
            if (w.size() != 2) throw ParseError(ln, "dim needs one value");
            const double d = detail::parse_number(w[1], ln);
            if (d < 1 || d != std::floor(d) || d > 3) throw ParseError(ln, "dim must be 1, 2 or 3");
            t.dim = static_cast<int>(d);
            have_dim = true;
        } else if (head == "secret_dim") {
            if (w.size() != 2) throw ParseError(ln, "secret_dim needs one value");
            const double d = detail::parse_number(w[1], ln);
            if (d < 2 || d != std::floor(d) || d > 64) throw ParseError(ln, "secret_dim must be an integer in [2,64]");
            t.secret_dim = static_cast<int>(d);
            secret_dim_given = true;
        } else if (head == "start") {
            need_dim(ln);
            if (have_start) throw ParseError(ln, "duplicate start line");
            if (w.size() != 2) throw ParseError(ln, "start needs one point");
            t.start = detail::parse_point(w[1], t.dim, ln);
            have_start = true;
        } else if (head == "diamond") {
            need_dim(ln);
            if (w.size() < 2) throw ParseError(ln, "diamond needs a name");
            claim(w[1], ln);
            t.diamonds.push_back({w[1], detail::parse_diamond_fields(w, 2, t.dim, ln)});
        } else if (head == "region") {
            need_dim(ln);
            if (w.size() < 2) throw ParseError(ln, "region needs a name");
            const std::string name = w[1];
            claim(name, ln);
            std::string body = l.substr(l.find(name, 6) + name.size());
            body = detail::trim(body);
            if (body.empty() || body.front() != '{') throw ParseError(ln, "region body must start with '{'");
            body = body.substr(1);
            // Collect entries until the closing brace, possibly across lines.
            Region r{name, t.dim, {}};
            int entry_line = ln;
            while (true) {
                const auto close = body.find('}');
                std::string chunk = close == std::string::npos ? body : body.substr(0, close);
                std::size_t pos = 0;
                while (pos <= chunk.size()) {
                    const auto semi = chunk.find(';', pos);
                    std::string e = detail::trim(chunk.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos));
                    if (!e.empty()) r.diamonds.push_back(detail::parse_region_entry(e, t.dim, entry_line));
                    if (semi == std::string::npos) break;
                    pos = semi + 1;
                }
                if (close != std::string::npos) {
                    if (!detail::trim(body.substr(close + 1)).empty())
                        throw ParseError(entry_line, "unexpected text after '}'");
                    break;
                }
                if (++i >= lines.size()) throw ParseError(ln, "unterminated region block");
                entry_line = static_cast<int>(i) + 1;
                body = strip(lines[i]);
            }
            if (r.diamonds.empty()) throw ParseError(ln, "region '" + name + "' has no diamonds");
            t.regions.push_back(std::move(r));
        } else if (head == "authorized" || head == "unauthorized") {
            if (w.size() < 2) throw ParseError(ln, head + " needs at least one name");
            NameSet s(w.begin() + 1, w.end());
            std::set<std::string> u(s.begin(), s.end());
            if (u.size() != s.size()) throw ParseError(ln, "duplicate name in set");
            (head == "authorized" ? auth_lines : unauth_lines).emplace_back(ln, s);
        } else {
            throw ParseError(ln, "unknown directive '" + head + "'");
        }
    }
    const int end_line = static_cast<int>(lines.size());
    if (!have_kind) throw ParseError(end_line, "missing task line");
    if (!have_dim) throw ParseError(end_line, "missing dim line");
    if (!have_start) throw ParseError(end_line, "missing start line");

    const bool wants_regions = t.kind == TaskKind::LocalizeExclude;
    if (wants_regions && !t.diamonds.empty())
        throw ParseError(name_line[t.diamonds.front().name], "localize_exclude tasks take regions, not diamonds");
    if (!wants_regions && !t.regions.empty())
        throw ParseError(name_line[t.regions.front().name], std::string(to_string(t.kind)) + " tasks take diamonds, not regions");

    auto resolve = [&](const std::vector<std::pair<int, NameSet>>& src, std::vector<NameSet>& dst) {
        for (const auto& [ln, s] : src) {
            for (const auto& n : s) {
                const bool ok = wants_regions ? t.find_region(n) != nullptr : t.find_diamond(n) != nullptr;
                if (!ok) throw ParseError(ln, "unknown name '" + n + "'");
            }
            dst.push_back(s);
        }
    };
    resolve(auth_lines, t.authorized);
    resolve(unauth_lines, t.unauthorized);

    auto canon = [](NameSet s) {
        std::sort(s.begin(), s.end());
        return s;
    };
    for (std::size_t a = 0; a < t.authorized.size(); ++a)
        for (std::size_t u = 0; u < t.unauthorized.size(); ++u)
            if (canon(t.authorized[a]) == canon(t.unauthorized[u]))
                throw ParseError(unauth_lines[u].first, "set is both authorized and unauthorized");
    for (const auto* fam : {&auth_lines, &unauth_lines})
        for (std::size_t a = 0; a < fam->size(); ++a)
            for (std::size_t b = a + 1; b < fam->size(); ++b)
                if (canon((*fam)[a].second) == canon((*fam)[b].second))
                    throw ParseError((*fam)[b].first, "duplicate set");

    switch (t.kind) {
        case TaskKind::LocalizeExclude:
            if (t.regions.empty()) throw ParseError(end_line, "localize_exclude needs regions");
            break;
        case TaskKind::StateAssembly:
            if (t.authorized.empty()) throw ParseError(end_line, "state_assembly needs authorized sets");
            break;
        case TaskKind::Summoning:
            if (t.diamonds.empty()) throw ParseError(end_line, "summoning needs diamonds");
            if (t.variant == SummoningVariant::ManyCallManyReturn && t.authorized.empty())
                throw ParseError(end_line, "many_call_many_return needs authorized sets");
            if (t.variant != SummoningVariant::ManyCallManyReturn && !auth_lines.empty())
                throw ParseError(auth_lines.front().first, "single-return summoning takes no authorized sets");
            if (!unauth_lines.empty()) throw ParseError(unauth_lines.front().first, "summoning takes no unauthorized sets");
            break;
        case TaskKind::PartyIndependentTransfer:
            if (t.diamonds.size() != 6)
                throw ParseError(end_line, "party_independent_transfer needs exactly 6 diamonds in 3 pairs");
            if (!auth_lines.empty() || !unauth_lines.empty())
                throw ParseError((auth_lines.empty() ? unauth_lines : auth_lines).front().first,
                                 "party_independent_transfer takes no access sets");
            break;
    }
    (void)secret_dim_given;
    return t;
}

inline std::string serialize_task(const TaskSpec& t) {
    std::ostringstream o;
    o << "task " << to_string(t.kind);
    if (t.kind == TaskKind::Summoning) o << ' ' << to_string(t.variant);
    o << "\ndim " << t.dim << "\nsecret_dim " << t.secret_dim << "\nstart " << format_point(t.start) << '\n';
    for (const auto& r : t.regions) {
        o << "region " << r.name << " {\n";
        for (const auto& d : r.diamonds) o << "  diamond c=" << format_point(d.c) << " r=" << format_point(d.r) << '\n';
        o << "}\n";
    }
    for (const auto& d : t.diamonds)
        o << "diamond " << d.name << " c=" << format_point(d.diamond.c) << " r=" << format_point(d.diamond.r) << '\n';
    for (const auto& s : t.authorized) o << "authorized " << join_names(s, " ") << '\n';
    for (const auto& s : t.unauthorized) o << "unauthorized " << join_names(s, " ") << '\n';
    return o.str();
}

inline std::string party_region_name(int p) { return "S" + std::to_string(p); }

inline TaskSpec embed_access_structure(const AccessStructure& a, double spacing = 2.0) {
    a.validate();
    if (!(spacing > 0)) throw std::invalid_argument("spacing must be positive");
    TaskSpec t;
    t.kind = TaskKind::LocalizeExclude;
    t.dim = 1;
    for (int p = 1; p <= a.n_parties; ++p) {
        const SpacetimePoint q(0.0, (p - 1) * spacing);
        t.regions.push_back(Region{party_region_name(p), 1, {Diamond::point(q)}});
    }
    // Halfway between parties, early enough to see all of them.
    t.start = SpacetimePoint(-(a.n_parties * spacing + 1.0), -0.5 * spacing);
    auto names = [](const std::vector<int>& s) {
        std::vector<int> sorted(s);
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        NameSet out;
        for (int p : sorted) out.push_back(party_region_name(p));
        return out;
    };
    for (const auto& s : a.authorized_subsets) t.authorized.push_back(names(s));
    for (const auto& s : a.unauthorized_subsets) t.unauthorized.push_back(names(s));
    return t;
}

inline AccessStructure parse_access_structure(const std::string& text) {
    AccessStructure a;
    std::istringstream in(text);
    int ln = 0;
    bool have_parties = false;
    for (std::string l; std::getline(in, l);) {
        ++ln;
        const auto h = l.find('#');
        if (h != std::string::npos) l = l.substr(0, h);
        auto w = detail::split_ws(l);
        if (w.empty()) continue;
        if (w[0] == "parties") {
            if (w.size() != 2) throw ParseError(ln, "parties needs one value");
            const double n = detail::parse_number(w[1], ln);
            if (n < 1 || n != std::floor(n) || n > 64) throw ParseError(ln, "bad party count");
            a.n_parties = static_cast<int>(n);
            have_parties = true;
        } else if (w[0] == "authorized" || w[0] == "unauthorized") {
            if (!have_parties) throw ParseError(ln, "parties must be declared first");
            if (w.size() < 2) throw ParseError(ln, "subset needs at least one party");
            std::vector<int> s;
            for (std::size_t i = 1; i < w.size(); ++i) {
                const double p = detail::parse_number(w[i], ln);
                if (p != std::floor(p) || p < 1 || p > a.n_parties) throw ParseError(ln, "party index out of range");
                s.push_back(static_cast<int>(p));
            }
            (w[0] == "authorized" ? a.authorized_subsets : a.unauthorized_subsets).push_back(s);
        } else {
            throw ParseError(ln, "unknown directive '" + w[0] + "'");
        }
    }
    if (!have_parties) throw ParseError(ln, "missing parties line");
    return a;
}

}  // namespace stq
