#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stq/stq.hpp"

namespace stq::testing {

inline std::string fixture_path(const std::string& name) { return std::string(STQ_FIXTURE_DIR) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
    std::ifstream in(fixture_path(name));
    if (!in) throw std::runtime_error("missing fixture " + name);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline TaskSpec load(const std::string& name) { return parse_task(read_fixture(name)); }

// Integer light-cone box, closed.
struct IBox {
    int u0, u1, v0, v1;
};

inline Diamond to_diamond(const IBox& b) { return Diamond::from_box(b.u0, b.u1, b.v0, b.v1); }

inline Region to_region(const std::vector<IBox>& boxes, const std::string& name) {
    Region r{name, 1, {}};
    for (const auto& b : boxes) r.diamonds.push_back(to_diamond(b));
    return r;
}

// Uniform raster over integer coordinates 0..126: pixel 2k+1 is the line k, even
// pixels the open gaps. Monotone (up/right) lattice paths corner to corner.
class RasterOracle {
public:
    static constexpr int N = 256;

    bool escape(const std::vector<IBox>& through, const std::vector<IBox>& avoid) const {
        std::vector<char> blocked(N * N, 0), target(N * N, 0);
        auto paint = [&](std::vector<char>& g, const IBox& b) {
            for (int i = 2 * b.u0 + 1; i <= 2 * b.u1 + 1; ++i)
                for (int j = 2 * b.v0 + 1; j <= 2 * b.v1 + 1; ++j) g[i * N + j] = 1;
        };
        for (const auto& b : avoid) paint(blocked, b);
        for (const auto& b : through) paint(target, b);
        // State: reachable without / with a target visit.
        std::vector<char> r0(N * N, 0), r1(N * N, 0);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const int k = i * N + j;
                if (blocked[k]) continue;
                bool a = i == 0 && j == 0, b = false;
                if (i > 0) a = a || r0[k - N], b = b || r1[k - N];
                if (j > 0) a = a || r0[k - 1], b = b || r1[k - 1];
                if (target[k]) b = b || a;
                r0[k] = a;
                r1[k] = b;
            }
        return r1[N * N - 1] != 0;
    }
};

inline IBox random_box(std::mt19937_64& rng, int lo, int hi, int max_side) {
    std::uniform_int_distribution<int> pos(lo, hi), side(0, max_side);
    IBox b{};
    b.u0 = pos(rng);
    b.v0 = pos(rng);
    b.u1 = std::min(hi, b.u0 + side(rng));
    b.v1 = std::min(hi, b.v0 + side(rng));
    return b;
}

struct EscapeInstance {
    std::vector<IBox> through;
    std::vector<IBox> avoid;
};

// Mixes point targets and box targets; obstacles at most 6.
inline EscapeInstance random_escape_instance(std::mt19937_64& rng) {
    EscapeInstance e;
    std::uniform_int_distribution<int> nobs(1, 6), kind(0, 2);
    const int k = kind(rng);
    if (k == 0) {
        const auto b = random_box(rng, 0, 126, 0);
        e.through.push_back({b.u0, b.u0, b.v0, b.v0});
    } else {
        e.through.push_back(random_box(rng, 20, 100, 10));
        if (k == 2) e.through.push_back(random_box(rng, 20, 100, 10));
    }
    const int n = nobs(rng);
    for (int i = 0; i < n; ++i) e.avoid.push_back(random_box(rng, 0, 126, 110));
    return e;
}

// Random 1+1 localize-exclude task with single-diamond regions.
inline TaskSpec random_le_task(std::mt19937_64& rng, int n, int m) {
    TaskSpec t;
    t.kind = TaskKind::LocalizeExclude;
    t.dim = 1;
    t.start = SpacetimePoint::from_uv(0, 0);
    auto add = [&](const std::string& name, const IBox& b) { t.regions.push_back(Region{name, 1, {to_diamond(b)}}); };
    for (int i = 1; i <= n; ++i) {
        add("A" + std::to_string(i), random_box(rng, 1, 30, 12));
        t.authorized.push_back({"A" + std::to_string(i)});
    }
    for (int l = 1; l <= m; ++l) {
        add("U" + std::to_string(l), random_box(rng, -10, 40, 6));
        t.unauthorized.push_back({"U" + std::to_string(l)});
    }
    return t;
}

inline std::vector<int> random_subset(std::mt19937_64& rng, int n) {
    std::vector<int> s;
    while (s.empty())
        for (int p = 1; p <= n; ++p)
            if (rng() & 1u) s.push_back(p);
    return s;
}

inline AccessStructure random_access_structure(std::mt19937_64& rng) {
    AccessStructure a;
    a.n_parties = std::uniform_int_distribution<int>(1, 5)(rng);
    const int na = std::uniform_int_distribution<int>(1, 6)(rng);
    const int nu = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int i = 0; i < na; ++i) a.authorized_subsets.push_back(random_subset(rng, a.n_parties));
    for (int i = 0; i < nu; ++i) a.unauthorized_subsets.push_back(random_subset(rng, a.n_parties));
    return a;
}

// Verdicts agree on feasibility and on the count of each violated condition.
inline bool same_shape(const Verdict& a, const Verdict& b) {
    if (a.feasible != b.feasible) return false;
    for (auto c : {Condition::I_A, Condition::I_B, Condition::II, Condition::III, Condition::B1}) {
        auto count = [&](const Verdict& v) {
            return std::count_if(v.violations.begin(), v.violations.end(), [&](const Violation& x) { return x.condition == c; });
        };
        if (count(a) != count(b)) return false;
    }
    return true;
}

// Explicit transfer test state. Encoding x is decoded on shares (p,q); the
// partner share comes from encoding x (honest) or from an independent encoding y
// (cheat). Returns <chi|rho|chi> on (q, partner).
inline double brute_force_chi(int p, int q, bool cheat) {
    using namespace qsim;
    const double r3 = 1.0 / std::sqrt(3.0);
    // |i> -> sum_j |j, j+i, j+2i> / sqrt3, written out directly.
    Mat v = Mat::Zero(27, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v(9 * j + 3 * ((j + i) % 3) + (j + 2 * i) % 3, i) = r3;
    auto enc = [&](const std::string& a, const std::string& r, const std::string& pre) {
        return apply_isometry(maximally_entangled(3, a, r), a, {{pre + "1", 3}, {pre + "2", 3}, {pre + "3", 3}}, v);
    };
    auto s = tensor(enc("A", "R", "x"), enc("B", "S", "y"));
    const int e = 6 - p - q;
    const int mult[3] = {0, 1, 2};
    Mat u = Mat::Zero(9, 9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            u(3 * i + (j + mult[e - 1] * i) % 3, 3 * ((j + mult[p - 1] * i) % 3) + (j + mult[q - 1] * i) % 3) = 1.0;
    s = apply(s, u, {"x" + std::to_string(p), "x" + std::to_string(q)});
    const std::string partner = (cheat ? "y" : "x") + std::to_string(e);
    const auto rho = partial_trace(s, {"x" + std::to_string(q), partner}).density_matrix();
    Vec chi = Vec::Zero(9);
    for (int j = 0; j < 3; ++j) chi(4 * j) = r3;
    return (chi.adjoint() * rho * chi)(0, 0).real();
}

}  // namespace stq::testing
