#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stq {

// Point in (1+dim) Minkowski spacetime, c = 1.
struct SpacetimePoint {
    double t = 0.0;
    std::vector<double> x;

    SpacetimePoint() = default;
    SpacetimePoint(double t_, std::vector<double> x_) : t(t_), x(std::move(x_)) {}
    SpacetimePoint(double t_, double x_) : t(t_), x{x_} {}

    int dim() const { return static_cast<int>(x.size()); }

    // Light-cone coordinates, 1+1 only.
    double u() const { return t - x.at(0); }
    double v() const { return t + x.at(0); }

    static SpacetimePoint from_uv(double u, double v) { return {(u + v) / 2.0, (v - u) / 2.0}; }

    friend bool operator==(const SpacetimePoint& a, const SpacetimePoint& b) {
        return a.t == b.t && a.x == b.x;
    }
    friend bool operator!=(const SpacetimePoint& a, const SpacetimePoint& b) { return !(a == b); }
};

inline void require_same_dim(const SpacetimePoint& p, const SpacetimePoint& q) {
    if (p.dim() != q.dim() || p.dim() < 1)
        throw std::invalid_argument("spacetime points have mismatched dimensions");
}

inline bool causal_leq(const SpacetimePoint& p, const SpacetimePoint& q) {
    require_same_dim(p, q);
    if (p.dim() == 1) return q.u() >= p.u() && q.v() >= p.v();
    const double dt = q.t - p.t;
    if (dt < 0) return false;
    double r2 = 0.0;
    for (int i = 0; i < p.dim(); ++i) {
        const double d = q.x[i] - p.x[i];
        r2 += d * d;
    }
    return dt * dt >= r2;
}

struct LightConeBox {
    double u_min, u_max, v_min, v_max;
};

struct Diamond {
    SpacetimePoint c;
    SpacetimePoint r;

    Diamond() = default;
    Diamond(SpacetimePoint c_, SpacetimePoint r_) : c(std::move(c_)), r(std::move(r_)) {
        if (!causal_leq(c, r)) throw std::invalid_argument("diamond not causal");
    }
    static Diamond point(const SpacetimePoint& p) { return Diamond(p, p); }
    static Diamond from_box(double u0, double u1, double v0, double v1) {
        return Diamond(SpacetimePoint::from_uv(u0, v0), SpacetimePoint::from_uv(u1, v1));
    }

    int dim() const { return c.dim(); }
    LightConeBox box() const { return {c.u(), r.u(), c.v(), r.v()}; }
    bool contains(const SpacetimePoint& p) const { return causal_leq(c, p) && causal_leq(p, r); }
};

inline bool diamonds_connected(const Diamond& a, const Diamond& b) {
    return causal_leq(a.c, b.r) || causal_leq(b.c, a.r);
}

struct Region {
    std::string name;
    int dim = 1;
    std::vector<Diamond> diamonds;

    bool contains(const SpacetimePoint& p) const {
        return std::any_of(diamonds.begin(), diamonds.end(),
                           [&](const Diamond& d) { return d.contains(p); });
    }
};

inline Region point_region(const SpacetimePoint& p, std::string name = "s") {
    return Region{std::move(name), p.dim(), {Diamond::point(p)}};
}

struct Polyline {
    std::vector<SpacetimePoint> vertices;

    bool empty() const { return vertices.empty(); }
    const SpacetimePoint& front() const { return vertices.front(); }
    const SpacetimePoint& back() const { return vertices.back(); }
};

inline void require_same_dim(const Region& a, const Region& b) {
    if (a.dim != b.dim) throw std::invalid_argument("regions have mismatched dimensions");
}

inline bool regions_causally_connected(const Region& a, const Region& b) {
    require_same_dim(a, b);
    for (const auto& da : a.diamonds)
        for (const auto& db : b.diamonds)
            if (diamonds_connected(da, db)) return true;
    return false;
}

inline bool region_in_future(const SpacetimePoint& s, const Region& a) {
    for (const auto& d : a.diamonds)
        if (causal_leq(s, d.r)) return true;
    return false;
}

// Earliest-available point of d inside J+(s); requires causal_leq(s, d.r).
// Exact join in 1+1; in higher dimensions falls back to c, s or r.
inline SpacetimePoint entry_point(const SpacetimePoint& s, const Diamond& d) {
    if (s.dim() == 1) return SpacetimePoint::from_uv(std::max(s.u(), d.c.u()), std::max(s.v(), d.c.v()));
    if (causal_leq(s, d.c)) return d.c;
    if (d.contains(s)) return s;
    return d.r;
}

inline bool causal_polyline(const Polyline& p) {
    for (std::size_t i = 1; i < p.vertices.size(); ++i)
        if (!causal_leq(p.vertices[i - 1], p.vertices[i])) return false;
    return true;
}

namespace detail {

// Parameter interval of segment a->b inside [lo,hi] on one axis; false if empty.
inline bool clip_axis(double a, double b, double lo, double hi, double& t0, double& t1) {
    const double d = b - a;
    if (d == 0.0) return a >= lo && a <= hi;
    double l0 = (lo - a) / d, l1 = (hi - a) / d;
    if (l0 > l1) std::swap(l0, l1);
    t0 = std::max(t0, l0);
    t1 = std::min(t1, l1);
    return t0 <= t1;
}

inline bool segment_hits_box(double u0, double v0, double u1, double v1, const LightConeBox& b) {
    double t0 = 0.0, t1 = 1.0;
    return clip_axis(u0, u1, b.u_min, b.u_max, t0, t1) && clip_axis(v0, v1, b.v_min, b.v_max, t0, t1);
}

inline std::vector<SpacetimePoint> sample_segment(const SpacetimePoint& a, const SpacetimePoint& b, double step) {
    double len2 = (b.t - a.t) * (b.t - a.t);
    for (int i = 0; i < a.dim(); ++i) len2 += (b.x[i] - a.x[i]) * (b.x[i] - a.x[i]);
    const auto n = static_cast<std::size_t>(std::ceil(std::sqrt(len2) / step));
    std::vector<SpacetimePoint> out;
    out.push_back(a);
    for (std::size_t k = 1; k < n; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(n);
        SpacetimePoint p = a;
        p.t = a.t + f * (b.t - a.t);
        for (int i = 0; i < a.dim(); ++i) p.x[i] = a.x[i] + f * (b.x[i] - a.x[i]);
        out.push_back(p);
    }
    out.push_back(b);
    return out;
}

}  // namespace detail

inline constexpr double kDefaultSampleStep = 0.01;

// Exact in 1+1 (segments against (u,v) boxes, closed); sampled in higher dimensions.
inline bool worldline_intersects(const Polyline& w, const Region& region, double step = kDefaultSampleStep) {
    if (w.empty()) return false;
    if (w.vertices.size() == 1) return region.contains(w.front());
    if (region.dim == 1) {
        for (std::size_t i = 1; i < w.vertices.size(); ++i) {
            const auto& a = w.vertices[i - 1];
            const auto& b = w.vertices[i];
            for (const auto& d : region.diamonds)
                if (detail::segment_hits_box(a.u(), a.v(), b.u(), b.v(), d.box())) return true;
        }
        return false;
    }
    for (std::size_t i = 1; i < w.vertices.size(); ++i)
        for (const auto& p : detail::sample_segment(w.vertices[i - 1], w.vertices[i], step))
            if (region.contains(p)) return true;
    return false;
}

enum class WitnessCheck { Valid, NotCausal, MissesThrough, EntersAvoiding };

inline const char* to_string(WitnessCheck w) {
    switch (w) {
        case WitnessCheck::Valid: return "valid";
        case WitnessCheck::NotCausal: return "not a causal curve";
        case WitnessCheck::MissesThrough: return "misses target";
        case WitnessCheck::EntersAvoiding: return "enters avoided region";
    }
    return "?";
}

inline WitnessCheck check_witness_curve(const Polyline& curve, const Region& through, const Region& avoiding,
                                        double step) {
    if (curve.empty()) throw std::invalid_argument("witness curve is empty");
    if (!(step > 0)) throw std::invalid_argument("sampling step must be positive");
    if (!causal_polyline(curve)) return WitnessCheck::NotCausal;
    bool hit = false;
    auto visit = [&](const SpacetimePoint& p) {
        if (avoiding.contains(p)) return false;
        if (through.contains(p)) hit = true;
        return true;
    };
    if (curve.vertices.size() == 1) {
        if (!visit(curve.front())) return WitnessCheck::EntersAvoiding;
    }
    for (std::size_t i = 1; i < curve.vertices.size(); ++i)
        for (const auto& p : detail::sample_segment(curve.vertices[i - 1], curve.vertices[i], step))
            if (!visit(p)) return WitnessCheck::EntersAvoiding;
    return hit ? WitnessCheck::Valid : WitnessCheck::MissesThrough;
}

inline bool verify_witness_curve(const Polyline& curve, const Region& through, const Region& avoiding,
                                 double step) {
    return check_witness_curve(curve, through, avoiding, step) == WitnessCheck::Valid;
}

namespace detail {

// Stratified grid over the (u,v) plane: along each axis, element 2i+1 is the
// breakpoint b_i and element 2i is the open interval (b_{i-1}, b_i).
class EscapeGrid {
public:
    EscapeGrid(const std::vector<Diamond>& through, const std::vector<Diamond>& avoiding) {
        for (const auto* set : {&through, &avoiding})
            for (const auto& d : *set) {
                if (d.dim() != 1) throw std::invalid_argument("escape search is only supported in 1+1");
                const auto b = d.box();
                us_.push_back(b.u_min);
                us_.push_back(b.u_max);
                vs_.push_back(b.v_min);
                vs_.push_back(b.v_max);
                corners_.push_back(d.c);
                corners_.push_back(d.r);
            }
        normalize(us_);
        normalize(vs_);
        nu_ = 2 * us_.size() + 1;
        nv_ = 2 * vs_.size() + 1;
        free_.assign(nu_ * nv_, 1);
        target_.assign(nu_ * nv_, 0);
        for (const auto& d : avoiding) paint(d, free_, 0);
        for (const auto& d : through) paint(d, target_, 1);

        fwd_.assign(nu_ * nv_, 0);
        for (std::size_t i = 0; i < nu_; ++i)
            for (std::size_t j = 0; j < nv_; ++j) {
                if (!free_[at(i, j)]) continue;
                fwd_[at(i, j)] = (i == 0 && j == 0) || (i > 0 && fwd_[at(i - 1, j)]) || (j > 0 && fwd_[at(i, j - 1)]);
            }
        bwd_.assign(nu_ * nv_, 0);
        for (std::size_t i = nu_; i-- > 0;)
            for (std::size_t j = nv_; j-- > 0;) {
                if (!free_[at(i, j)]) continue;
                bwd_[at(i, j)] = (i + 1 == nu_ && j + 1 == nv_) || (i + 1 < nu_ && bwd_[at(i + 1, j)]) ||
                                 (j + 1 < nv_ && bwd_[at(i, j + 1)]);
            }
    }

    std::optional<std::pair<std::size_t, std::size_t>> witness_cell() const {
        for (std::size_t i = 0; i < nu_; ++i)
            for (std::size_t j = 0; j < nv_; ++j) {
                const auto k = at(i, j);
                if (target_[k] && fwd_[k] && bwd_[k]) return std::make_pair(i, j);
            }
        return std::nullopt;
    }

    Polyline path_through(std::pair<std::size_t, std::size_t> cell) const {
        std::vector<std::pair<std::size_t, std::size_t>> back;
        auto [i, j] = cell;
        while (i != 0 || j != 0) {
            if (i > 0 && fwd_[at(i - 1, j)]) --i;
            else --j;
            back.emplace_back(i, j);
        }
        std::vector<std::pair<std::size_t, std::size_t>> cells(back.rbegin(), back.rend());
        const std::size_t mark = cells.size();
        cells.push_back(cell);
        std::tie(i, j) = cell;
        while (i + 1 != nu_ || j + 1 != nv_) {
            if (i + 1 < nu_ && bwd_[at(i + 1, j)]) ++i;
            else ++j;
            cells.emplace_back(i, j);
        }

        // Representative points; collinear runs collapse except at the target cell.
        std::vector<SpacetimePoint> pts;
        std::vector<std::pair<double, double>> uv;
        std::vector<bool> keep;
        for (std::size_t k = 0; k < cells.size(); ++k) {
            uv.emplace_back(rep(us_, cells[k].first), rep(vs_, cells[k].second));
            keep.push_back(k == mark || k == 0 || k + 1 == cells.size());
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (!keep[k]) {
                const auto& a = uv[k - 1];
                const auto& b = uv[k + 1];
                const bool straight = (a.first == uv[k].first && b.first == uv[k].first) ||
                                      (a.second == uv[k].second && b.second == uv[k].second);
                if (straight) continue;
            }
            pts.push_back(to_point(cells[k], uv[k]));
        }
        Polyline out;
        for (auto& p : pts)
            if (out.vertices.empty() || out.vertices.back() != p) out.vertices.push_back(p);
        return out;
    }

private:
    static void normalize(std::vector<double>& b) {
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
    }
    std::size_t at(std::size_t i, std::size_t j) const { return i * nv_ + j; }
    static std::size_t element(const std::vector<double>& b, double x) {
        return 2 * static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), x) - b.begin()) + 1;
    }
    void paint(const Diamond& d, std::vector<char>& grid, char value) const {
        const auto b = d.box();
        const auto i0 = element(us_, b.u_min), i1 = element(us_, b.u_max);
        const auto j0 = element(vs_, b.v_min), j1 = element(vs_, b.v_max);
        for (auto i = i0; i <= i1; ++i)
            for (auto j = j0; j <= j1; ++j) grid[at(i, j)] = value;
    }
    static double rep(const std::vector<double>& b, std::size_t e) {
        const double span = b.back() - b.front();
        const double margin = std::max(1.0, span);
        if (e % 2 == 1) return b[e / 2];
        if (e == 0) return b.front() - margin;
        if (e / 2 == b.size()) return b.back() + margin;
        return 0.5 * (b[e / 2 - 1] + b[e / 2]);
    }
    SpacetimePoint to_point(std::pair<std::size_t, std::size_t> cell, std::pair<double, double> uv) const {
        if (cell.first % 2 == 1 && cell.second % 2 == 1)
            for (const auto& p : corners_)
                if (p.u() == uv.first && p.v() == uv.second) return p;
        return SpacetimePoint::from_uv(uv.first, uv.second);
    }

    std::vector<double> us_, vs_;
    std::vector<SpacetimePoint> corners_;
    std::size_t nu_ = 0, nv_ = 0;
    std::vector<char> free_, target_, fwd_, bwd_;
};

}  // namespace detail

inline bool escape_exists(const Region& through, const Region& avoiding) {
    require_same_dim(through, avoiding);
    if (through.dim != 1) throw std::invalid_argument("escape search is only supported in 1+1");
    return detail::EscapeGrid(through.diamonds, avoiding.diamonds).witness_cell().has_value();
}

inline bool escape_exists(const SpacetimePoint& through, const Region& avoiding) {
    return escape_exists(point_region(through), avoiding);
}

inline std::optional<Polyline> extract_escape_path(const Region& through, const Region& avoiding) {
    require_same_dim(through, avoiding);
    if (through.dim != 1) throw std::invalid_argument("escape search is only supported in 1+1");
    detail::EscapeGrid grid(through.diamonds, avoiding.diamonds);
    auto cell = grid.witness_cell();
    if (!cell) return std::nullopt;
    return grid.path_through(*cell);
}

inline std::optional<Polyline> extract_escape_path(const SpacetimePoint& through, const Region& avoiding) {
    return extract_escape_path(point_region(through), avoiding);
}

}  // namespace stq
