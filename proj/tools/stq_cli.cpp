#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "stq/stq.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kUsage = 1;
constexpr int kFail = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
}

stq::TaskSpec load_task(const std::string& path, const std::string& variant) {
    auto t = stq::parse_task(read_file(path));
    if (!variant.empty()) {
        if (t.kind != stq::TaskKind::Summoning) throw std::invalid_argument("--variant applies to summoning tasks only");
        t.variant = stq::parse_variant(variant);
    }
    return t;
}

std::string machine_block(const stq::Verdict& v) {
    std::ostringstream o;
    o << "---\nfeasible " << (v.feasible ? "true" : "false") << '\n';
    for (const auto& x : v.violations) o << "violation " << stq::to_string(x.condition) << ' ' << stq::join_names(x.witness, ",") << '\n';
    return o.str();
}

stq::NameSet split_list(const std::string& s) {
    stq::NameSet out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

stq::Expect expectation_for(const stq::TaskSpec& t, const stq::Scenario& sc, bool& judged) {
    judged = true;
    auto same = [](stq::NameSet a, stq::NameSet b) {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return a == b;
    };
    if (t.kind == stq::TaskKind::PartyIndependentTransfer) return stq::Expect::Transfer;
    if (sc.access) {
        for (const auto& a : t.authorized)
            if (stq::join_names(a) == *sc.access) return stq::Expect::Reconstruct;
        for (const auto& u : t.unauthorized)
            if (stq::join_names(u) == *sc.access) return stq::Expect::Exclude;
    }
    if (sc.calls) {
        const auto c = sc.calls->called_set();
        for (const auto& a : t.authorized_sets())
            if (same(a, c)) return stq::Expect::Reconstruct;
        for (const auto& u : t.unauthorized)
            if (same(u, c)) return stq::Expect::Exclude;
    }
    judged = false;
    return stq::Expect::Reconstruct;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spacetime quantum task checker, planner and simulator"};
    app.require_subcommand(1);

    std::string file, out, variant, access, calls, view = "auto";
    std::uint64_t seed = 0;
    double tol = 1e-9;
    bool cheat = false, with_plan = false;
    double spacing = 2.0;
    int n = 2, m = 0, bits = 8;

    auto add_file = [&](CLI::App* sub) {
        auto* pos = sub->add_option("FILE", file, "task file");
        auto* flag = sub->add_option("--task", file, "task file");
        pos->excludes(flag);
    };

    auto* check = app.add_subcommand("check", "decide feasibility");
    add_file(check);
    check->add_option("--variant", variant, "summoning variant override");

    auto* plan = app.add_subcommand("plan", "synthesize a protocol plan");
    add_file(plan);
    plan->add_option("--variant", variant, "summoning variant override");
    plan->add_flag("--cheat", cheat, "two-encoding variant of the transfer protocol");
    plan->add_option("-o", out, "output file");

    auto* sim = app.add_subcommand("simulate", "execute the plan under scenarios");
    add_file(sim);
    auto* acc = sim->add_option("--access", access, "accessed region or set name");
    auto* cal = sim->add_option("--calls", calls, "comma-separated called diamonds");
    acc->excludes(cal);
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--tol", tol, "metric tolerance")->check(CLI::PositiveNumber);
    sim->add_option("--variant", variant, "summoning variant override");
    sim->add_option("--view", view, "exclusion view mode")->check(CLI::IsMember({"auto", "twirl", "enumerate"}));
    sim->add_flag("--cheat", cheat, "two-encoding variant of the transfer protocol");

    auto* emb = app.add_subcommand("embed", "embed an access structure as a localize-exclude task");
    add_file(emb);
    emb->add_option("--spacing", spacing, "party spacing")->check(CLI::PositiveNumber);
    emb->add_option("-o", out, "output file");

    auto* cost = app.add_subcommand("cost", "resource counts");
    cost->add_option("--n", n, "authorized regions")->required();
    cost->add_option("--m", m, "unauthorized regions");
    cost->add_option("--bits", bits, "key length in bits");

    auto* ren = app.add_subcommand("render", "draw an SVG spacetime diagram");
    add_file(ren);
    ren->add_flag("--plan", with_plan, "overlay the synthesized plan");
    ren->add_option("-o", out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    try {
        auto need_file = [&] {
            if (file.empty()) throw CLI::RequiredError("FILE");
        };
        if (*check) {
            need_file();
            if (ends_with(file, ".access")) {
                const auto v = stq::check_access_structure(stq::parse_access_structure(read_file(file)));
                std::cout << v.to_string() << machine_block(v);
                return v.feasible ? kPass : kFail;
            }
            const auto t = load_task(file, variant);
            try {
                const auto v = stq::check_task(t);
                std::cout << v.to_string() << machine_block(v);
                return v.feasible ? kPass : kFail;
            } catch (const stq::UndecidableError& e) {
                std::cout << "undecidable: " << e.what() << "\n---\nfeasible unknown\n";
                return kFail;
            }
        }
        if (*plan) {
            need_file();
            const auto t = load_task(file, variant);
            try {
                const auto p = t.kind == stq::TaskKind::PartyIndependentTransfer ? stq::plan_pit(t, cheat) : stq::plan_task(t);
                emit(stq::serialize_plan(p), out);
                return kPass;
            } catch (const stq::PlanRefused& e) {
                std::cout << "refused: " << e.what() << '\n';
                return kFail;
            }
        }
        if (*sim) {
            need_file();
            const auto t = load_task(file, variant);
            stq::ProtocolPlan p;
            try {
                p = t.kind == stq::TaskKind::PartyIndependentTransfer ? stq::plan_pit(t, cheat) : stq::plan_task(t);
            } catch (const stq::PlanRefused& e) {
                std::cout << "refused: " << e.what() << '\n';
                return kFail;
            }
            const stq::ViewMode vm = view == "twirl" ? stq::ViewMode::Twirl
                                     : view == "enumerate" ? stq::ViewMode::Enumerate
                                                           : stq::ViewMode::Auto;
            std::vector<stq::NamedScenario> scenarios;
            if (!access.empty() || !calls.empty()) {
                stq::Scenario sc;
                sc.seed = seed;
                if (!access.empty()) sc.access = access;
                else sc.calls = stq::CallPattern::of(t, split_list(calls));
                bool judged = false;
                const auto ex = expectation_for(t, sc, judged);
                scenarios.push_back({sc, ex});
                if (!judged) std::cout << "note: scenario is neither authorized nor unauthorized; only audits are judged\n";
                for (auto& s : scenarios) s.scenario.view = vm;
                bool all = true;
                for (const auto& s : scenarios) {
                    const auto o = stq::execute(p, t, s.scenario);
                    const bool ok = judged ? stq::outcome_passes(o, s.expect, p.symbolic(), tol) : o.audit.ok();
                    std::cout << stq::report(o) << "result " << (ok ? "pass" : "fail") << "\n";
                    all = all && ok;
                }
                return all ? kPass : kFail;
            }
            scenarios = stq::default_scenarios(t, seed);
            bool all = true;
            for (auto& s : scenarios) {
                s.scenario.view = vm;
                const auto o = stq::execute(p, t, s.scenario);
                const bool ok = stq::outcome_passes(o, s.expect, p.symbolic(), tol);
                std::cout << stq::report(o) << "result " << (ok ? "pass" : "fail") << "\n\n";
                all = all && ok;
            }
            std::cout << "summary " << (all ? "pass" : "fail") << '\n';
            return all ? kPass : kFail;
        }
        if (*emb) {
            need_file();
            const auto a = stq::parse_access_structure(read_file(file));
            emit(stq::serialize_task(stq::embed_access_structure(a, spacing)), out);
            return kPass;
        }
        if (*cost) {
            std::cout << stq::format_cost(stq::scheme_cost(n, m, bits));
            return kPass;
        }
        if (*ren) {
            need_file();
            const auto t = load_task(file, variant);
            std::optional<stq::ProtocolPlan> p;
            if (with_plan) p = stq::plan_task(t);
            emit(stq::render_svg(t, p ? &*p : nullptr), out);
            return kPass;
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const stq::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::length_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
