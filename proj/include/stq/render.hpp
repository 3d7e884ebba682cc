#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "model.hpp"
#include "planner.hpp"

namespace stq {

struct RenderStyle {
    double width = 640;
    double height = 640;
    double margin = 40;
    std::string authorized = "#1f4fd8";
    std::string unauthorized = "#d81f1f";
    std::string start = "#f2c200";
    std::string quantum = "#222222";
    std::string classical = "#2a8c2a";
};

namespace detail {

struct Frame {
    double xmin, xmax, tmin, tmax, scale, ox, oy;

    double sx(double x) const { return ox + (x - xmin) * scale; }
    double sy(double t) const { return oy - (t - tmin) * scale; }
};

inline std::string num(double v) {
    const double r = std::round(v * 100.0) / 100.0;
    return format_number(r == 0 ? 0.0 : r);
}

// Diamond corners projected onto the (t, x) plane.
inline std::vector<std::pair<double, double>> diamond_outline(const Diamond& d) {
    const double u0 = d.c.t - d.c.x[0], v0 = d.c.t + d.c.x[0];
    const double u1 = d.r.t - d.r.x[0], v1 = d.r.t + d.r.x[0];
    auto tx = [](double u, double v) { return std::pair{(v - u) / 2.0, (u + v) / 2.0}; };
    return {tx(u0, v0), tx(u1, v0), tx(u1, v1), tx(u0, v1)};
}

inline std::string polygon(const Frame& f, const std::vector<std::pair<double, double>>& pts) {
    std::string out;
    for (std::size_t i = 0; i < pts.size(); ++i) out += (i ? " " : "") + num(f.sx(pts[i].first)) + "," + num(f.sy(pts[i].second));
    return out;
}

inline std::string polyline_points(const Frame& f, const Polyline& p) {
    std::string out;
    for (std::size_t i = 0; i < p.vertices.size(); ++i)
        out += (i ? " " : "") + num(f.sx(p.vertices[i].x[0])) + "," + num(f.sy(p.vertices[i].t));
    return out;
}

}  // namespace detail

inline std::string render_svg(const TaskSpec& t, const ProtocolPlan* plan = nullptr, const RenderStyle& st = {}) {
    std::vector<std::pair<double, double>> pts{{t.start.x[0], t.start.t}};
    auto add_diamond = [&](const Diamond& d) {
        for (const auto& p : detail::diamond_outline(d)) pts.push_back(p);
    };
    for (const auto& r : t.regions)
        for (const auto& d : r.diamonds) add_diamond(d);
    for (const auto& d : t.diamonds) add_diamond(d.diamond);
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, tmin = xmin, tmax = -xmin;
    for (const auto& [x, tt] : pts) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        tmin = std::min(tmin, tt);
        tmax = std::max(tmax, tt);
    }
    const double pad = std::max(1.0, 0.05 * std::max(xmax - xmin, tmax - tmin));
    xmin -= pad;
    xmax += pad;
    tmin -= pad;
    tmax += pad;
    const double scale = std::min((st.width - 2 * st.margin) / (xmax - xmin), (st.height - 2 * st.margin) / (tmax - tmin));
    const detail::Frame f{xmin, xmax, tmin, tmax, scale, st.margin, st.height - st.margin};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::num(st.width) << "\" height=\""
      << detail::num(st.height) << "\" viewBox=\"0 0 " << detail::num(st.width) << ' ' << detail::num(st.height) << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Future light cone of s, clipped to the frame.
    const double h = tmax - t.start.t;
    o << "<polygon class=\"cone\" points=\""
      << detail::polygon(f, {{t.start.x[0], t.start.t}, {t.start.x[0] + h, tmax}, {t.start.x[0] - h, tmax}})
      << "\" fill=\"" << st.start << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";

    // Axes.
    o << "<line class=\"axis\" x1=\"" << detail::num(f.sx(xmin)) << "\" y1=\"" << detail::num(f.sy(tmin)) << "\" x2=\""
      << detail::num(f.sx(xmax)) << "\" y2=\"" << detail::num(f.sy(tmin)) << "\" stroke=\"black\"/>\n";
    o << "<line class=\"axis\" x1=\"" << detail::num(f.sx(xmin)) << "\" y1=\"" << detail::num(f.sy(tmin)) << "\" x2=\""
      << detail::num(f.sx(xmin)) << "\" y2=\"" << detail::num(f.sy(tmax)) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << detail::num(f.sx(xmax) - 10) << "\" y=\"" << detail::num(f.sy(tmin) + 20) << "\">x</text>\n";
    o << "<text x=\"" << detail::num(f.sx(xmin) - 20) << "\" y=\"" << detail::num(f.sy(tmax) + 10) << "\">t</text>\n";

    auto region_group = [&](const std::string& cls, const std::string& color, const std::string& name,
                            const std::vector<Diamond>& ds) {
        o << "<g class=\"region " << cls << "\" data-name=\"" << name << "\">\n";
        for (const auto& d : ds)
            o << "  <polygon points=\"" << detail::polygon(f, detail::diamond_outline(d)) << "\" fill=\"" << color
              << "\" fill-opacity=\"0.12\" stroke=\"" << color << "\" stroke-dasharray=\"6 4\"/>\n";
        const auto c = detail::diamond_outline(ds.front());
        o << "  <text x=\"" << detail::num(f.sx(c[0].first) + 4) << "\" y=\"" << detail::num(f.sy(c[0].second) - 4)
          << "\" fill=\"" << color << "\">" << name << "</text>\n";
        o << "</g>\n";
    };
    if (t.kind == TaskKind::LocalizeExclude) {
        for (const auto& a : t.authorized) region_group("authorized", st.authorized, join_names(a), t.union_region(a).diamonds);
        for (const auto& u : t.unauthorized)
            region_group("unauthorized", st.unauthorized, join_names(u), t.union_region(u).diamonds);
    } else {
        for (const auto& d : t.diamonds) region_group("diamond", st.authorized, d.name, {d.diamond});
    }

    if (plan) {
        auto line = [&](const Polyline& p, bool classical) {
            if (p.vertices.size() < 2) return;
            if (classical) {
                o << "<polyline class=\"classical\" points=\"" << detail::polyline_points(f, p) << "\" fill=\"none\" stroke=\""
                  << st.classical << "\" stroke-width=\"4\"/>\n";
                o << "<polyline points=\"" << detail::polyline_points(f, p)
                  << "\" fill=\"none\" stroke=\"white\" stroke-width=\"1.5\"/>\n";
            } else {
                o << "<polyline class=\"quantum\" points=\"" << detail::polyline_points(f, p) << "\" fill=\"none\" stroke=\""
                  << st.quantum << "\" stroke-width=\"1.5\"/>\n";
            }
        };
        std::vector<std::string> quantum{"A"};
        for (const auto& ev : plan->events) {
            if (const auto* e = std::get_if<CreateEntangled>(&ev)) {
                quantum.push_back(e->a);
                quantum.push_back(e->b);
            } else if (const auto* e = std::get_if<EncodeScheme>(&ev)) {
                if (e->scheme == SchemeKind::EdgeCode || e->scheme == SchemeKind::Code23)
                    quantum.insert(quantum.end(), e->outputs.begin(), e->outputs.end());
            }
        }
        auto is_q = [&](const std::string& n) { return std::find(quantum.begin(), quantum.end(), n) != quantum.end(); };
        for (const auto& ev : plan->events) {
            if (const auto* e = std::get_if<MoveToken>(&ev)) line(e->path, !is_q(e->token));
            else if (const auto* e = std::get_if<BroadcastClassical>(&ev))
                for (const auto& p : e->paths) line(p, true);
            else if (const auto* e = std::get_if<ConditionalRoute>(&ev))
                for (const auto& b : e->branches) line(b.path, !is_q(e->token));
        }
    }

    o << "<circle class=\"start\" cx=\"" << detail::num(f.sx(t.start.x[0])) << "\" cy=\"" << detail::num(f.sy(t.start.t))
      << "\" r=\"5\" fill=\"" << st.start << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << detail::num(f.sx(t.start.x[0]) + 7) << "\" y=\"" << detail::num(f.sy(t.start.t) + 4) << "\">s</text>\n";
    o << "</svg>\n";
    return o.str();
}

}  // namespace stq
