#include "platoon/render_svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

namespace platoon {
namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 640.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 25.0;
constexpr double kMarginTop = 50.0;
constexpr double kMarginBottom = 50.0;
constexpr double kPanelGap = 45.0;

const char* kAvColor = "#1f77b4";
const char* kHdvColor = "#2ca02c";
const char* kCrashColor = "#d62728";

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

struct Panel {
    double x0, y0, w, h;  // y0 = top
};

struct Mapping {
    Panel panel[2];
    double t_min, t_max, x_min, x_max;

    double tx(double t) const {
        const double f = t_max > t_min ? (t - t_min) / (t_max - t_min) : 0.5;
        return panel[0].x0 + f * panel[0].w;
    }
    double xy(int lane, double x) const {
        const double f = x_max > x_min ? (x - x_min) / (x_max - x_min) : 0.5;
        return panel[lane].y0 + panel[lane].h * (1.0 - f);
    }
};

void draw_axes(std::string& svg, const Mapping& map) {
    for (int lane = 0; lane < 2; ++lane) {
        const Panel& p = map.panel[lane];
        svg += "<rect x=\"" + num(p.x0) + "\" y=\"" + num(p.y0) + "\" width=\"" + num(p.w) +
               "\" height=\"" + num(p.h) +
               "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + num(p.x0 + 4) + "\" y=\"" + num(p.y0 - 6) +
               "\" font-size=\"13\" fill=\"#333\">lane " + std::to_string(lane) + "</text>\n";
        // ticks
        for (int i = 0; i <= 5; ++i) {
            const double t = map.t_min + (map.t_max - map.t_min) * i / 5.0;
            const double px = map.tx(t);
            svg += "<line x1=\"" + num(px) + "\" y1=\"" + num(p.y0 + p.h) + "\" x2=\"" +
                   num(px) + "\" y2=\"" + num(p.y0 + p.h + 4) + "\" stroke=\"#333\"/>\n";
            svg += "<text x=\"" + num(px) + "\" y=\"" + num(p.y0 + p.h + 16) +
                   "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">" +
                   std::to_string(static_cast<int>(std::lround(t))) + "</text>\n";

            const double x = map.x_min + (map.x_max - map.x_min) * i / 5.0;
            const double py = map.xy(lane, x);
            svg += "<line x1=\"" + num(p.x0 - 4) + "\" y1=\"" + num(py) + "\" x2=\"" +
                   num(p.x0) + "\" y2=\"" + num(py) + "\" stroke=\"#333\"/>\n";
            svg += "<text x=\"" + num(p.x0 - 7) + "\" y=\"" + num(py + 4) +
                   "\" font-size=\"11\" text-anchor=\"end\" fill=\"#333\">" +
                   std::to_string(static_cast<int>(std::lround(x))) + "</text>\n";
        }
        svg += "<text x=\"" + num(p.x0 + p.w / 2) + "\" y=\"" + num(p.y0 + p.h + 32) +
               "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\">step</text>\n";
        svg += "<text x=\"" + num(16.0) + "\" y=\"" + num(p.y0 + p.h / 2) +
               "\" font-size=\"12\" fill=\"#333\" transform=\"rotate(-90 16 " +
               num(p.y0 + p.h / 2) + ")\" text-anchor=\"middle\">x (m)</text>\n";
    }
    // legend
    svg += "<line x1=\"" + num(kMarginLeft) + "\" y1=\"18\" x2=\"" + num(kMarginLeft + 26) +
           "\" y2=\"18\" stroke=\"" + std::string(kAvColor) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kMarginLeft + 32) +
           "\" y=\"22\" font-size=\"12\" fill=\"#333\">AV</text>\n";
    svg += "<line x1=\"" + num(kMarginLeft + 70) + "\" y1=\"18\" x2=\"" +
           num(kMarginLeft + 96) + "\" y2=\"18\" stroke=\"" + std::string(kHdvColor) +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kMarginLeft + 102) +
           "\" y=\"22\" font-size=\"12\" fill=\"#333\">HDV</text>\n";
    svg += "<text x=\"" + num(kMarginLeft + 150) + "\" y=\"22\" font-size=\"12\" fill=\"" +
           std::string(kCrashColor) + "\">x collision</text>\n";
}

void draw_cross(std::string& svg, double cx, double cy) {
    const double r = 5.0;
    svg += "<line x1=\"" + num(cx - r) + "\" y1=\"" + num(cy - r) + "\" x2=\"" + num(cx + r) +
           "\" y2=\"" + num(cy + r) + "\" stroke=\"" + std::string(kCrashColor) +
           "\" stroke-width=\"2\"/>\n";
    svg += "<line x1=\"" + num(cx - r) + "\" y1=\"" + num(cy + r) + "\" x2=\"" + num(cx + r) +
           "\" y2=\"" + num(cy - r) + "\" stroke=\"" + std::string(kCrashColor) +
           "\" stroke-width=\"2\"/>\n";
}

Mapping make_mapping(const std::vector<TraceStep>& steps) {
    Mapping map;
    const double panel_h = (kHeight - kMarginTop - kMarginBottom - kPanelGap) / 2.0;
    const double panel_w = kWidth - kMarginLeft - kMarginRight;
    map.panel[0] = {kMarginLeft, kMarginTop, panel_w, panel_h};
    map.panel[1] = {kMarginLeft, kMarginTop + panel_h + kPanelGap, panel_w, panel_h};
    map.t_min = 0.0;
    map.t_max = 1.0;
    map.x_min = 0.0;
    map.x_max = kRoadLength;
    if (!steps.empty()) {
        map.t_max = std::max(1, steps.back().step);
        double lo = 1e300;
        double hi = -1e300;
        for (const auto& s : steps) {
            for (const auto& v : s.vehicles) {
                lo = std::min(lo, v.x);
                hi = std::max(hi, v.x);
            }
        }
        if (lo <= hi) {
            const double pad = std::max(10.0, 0.02 * (hi - lo));
            map.x_min = lo - pad;
            map.x_max = hi + pad;
        }
    }
    return map;
}

std::string render_episode(const std::vector<TraceStep>& steps) {
    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
           "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " +
           num(kHeight) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const Mapping map = make_mapping(steps);
    draw_axes(svg, map);

    // Per-vehicle samples in step order.
    std::map<int, std::vector<std::pair<int, TraceVehicle>>> by_vehicle;
    for (const auto& s : steps) {
        for (const auto& v : s.vehicles) by_vehicle[v.id].push_back({s.step, v});
    }
    for (const auto& [id, samples] : by_vehicle) {
        const char* color = samples.front().second.is_av ? kAvColor : kHdvColor;
        // Split the trajectory into contiguous same-lane segments.
        std::size_t i = 0;
        while (i < samples.size()) {
            const int lane = samples[i].second.lane;
            std::string points;
            std::size_t j = i;
            for (; j < samples.size() && samples[j].second.lane == lane; ++j) {
                points += num(map.tx(samples[j].first)) + "," +
                          num(map.xy(lane, samples[j].second.x)) + " ";
            }
            if (j == i + 1) {
                // Single sample: draw a dot so the step is still visible.
                svg += "<circle cx=\"" + num(map.tx(samples[i].first)) + "\" cy=\"" +
                       num(map.xy(lane, samples[i].second.x)) + "\" r=\"1.5\" fill=\"" +
                       std::string(color) + "\"/>\n";
            } else {
                svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                       "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
            }
            i = j;
        }
    }

    // Collision markers at the recorded step.
    for (const auto& s : steps) {
        for (const auto& c : s.collisions) {
            for (const auto& v : s.vehicles) {
                if (v.id != c.a && v.id != c.b) continue;
                draw_cross(svg, map.tx(s.step), map.xy(v.lane, v.x));
            }
        }
    }

    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::filesystem::path> render_trace(const std::filesystem::path& trace_path,
                                                const std::filesystem::path& out_dir) {
    const std::vector<TraceStep> all_steps = read_trace(trace_path);
    std::filesystem::create_directories(out_dir);

    std::map<int, std::vector<TraceStep>> by_episode;
    for (const auto& s : all_steps) by_episode[s.episode].push_back(s);

    std::vector<std::filesystem::path> written;
    if (by_episode.empty()) {
        const auto path = out_dir / "trace_empty.svg";
        std::ofstream out(path);
        out << render_episode({});
        written.push_back(path);
        return written;
    }
    for (const auto& [episode, steps] : by_episode) {
        char name[48];
        std::snprintf(name, sizeof(name), "trace_ep%03d.svg", episode);
        const auto path = out_dir / name;
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << render_episode(steps);
        written.push_back(path);
    }
    return written;
}

}  // namespace platoon
