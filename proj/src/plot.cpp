#include "maxroam/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "maxroam/errors.hpp"

namespace maxroam {

PlotKind parse_plot_kind(std::string_view name) {
    if (name == "bars_vs_p") return PlotKind::bars_vs_p;
    if (name == "heat_delta_r") return PlotKind::heat_delta_r;
    if (name == "lines_selection") return PlotKind::lines_selection;
    throw ConfigError("unknown plot kind '" + std::string(name) +
                      "' (expected bars_vs_p | heat_delta_r | lines_selection)");
}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("csv has no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!l.empty() && l.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (t.header.empty()) {
            t.header = split(line);
        } else {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Point {
    std::string series;
    double x = 0.0;  // numeric axis value
    double y = 0.0;  // mean score
};

/// Mean of usable rows grouped by (series, x) or (x, y) pairs.
struct Aggregate {
    std::map<std::pair<std::string, double>, std::pair<double, std::size_t>> sums;

    void add(const std::string& series, double x, double score) {
        auto& s = sums[{series, x}];
        s.first += score;
        s.second += 1;
    }
    std::vector<Point> points() const {
        std::vector<Point> out;
        for (const auto& [k, v] : sums) out.push_back({k.first, k.second, v.first / static_cast<double>(v.second)});
        return out;
    }
};

struct Frame {
    double lo = 0.0, hi = 1.0;

    double y(double v) const {
        const double plot_h = kHeight - kTop - kBottom;
        return kTop + plot_h * (1.0 - (v - lo) / (hi - lo));
    }
};

Frame frame_for(const std::vector<Point>& pts) {
    double lo = pts.front().y, hi = pts.front().y;
    for (const auto& p : pts) {
        lo = std::min(lo, p.y);
        hi = std::max(hi, p.y);
    }
    const double pad = hi > lo ? 0.1 * (hi - lo) : std::max(0.05, 0.05 * std::abs(hi));
    return {lo - pad, hi + pad};
}

std::string open_svg(const std::string& title) {
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    return o.str();
}

std::string y_axis(const Frame& f, const std::string& label) {
    std::ostringstream o;
    const double x0 = kLeft;
    o << "<line x1=\"" << x0 << "\" y1=\"" << kTop << "\" x2=\"" << x0 << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = f.lo + (f.hi - f.lo) * k / 4.0;
        const double y = f.y(v);
        o << "<line x1=\"" << x0 - 4 << "\" y1=\"" << y << "\" x2=\"" << x0 << "\" y2=\"" << y
          << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    o << "<text transform=\"translate(18," << (kTop + kHeight - kBottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << label << "</text>\n";
    return o.str();
}

std::string legend(const std::vector<std::string>& series) {
    std::ostringstream o;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double y = kTop + 10 + 20.0 * static_cast<double>(k);
        o << "<rect x=\"" << kWidth - kRight + 20 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\""
          << kPalette[k % 6] << "\"/>\n"
          << "<text x=\"" << kWidth - kRight + 38 << "\" y=\"" << y + 1 << "\">" << series[k] << "</text>\n";
    }
    return o.str();
}

std::vector<std::string> series_of(const std::vector<Point>& pts, std::vector<std::string> preferred) {
    std::vector<std::string> out;
    for (const auto& s : preferred) {
        if (std::any_of(pts.begin(), pts.end(), [&](const Point& p) { return p.series == s; })) out.push_back(s);
    }
    for (const auto& p : pts) {
        if (std::find(out.begin(), out.end(), p.series) == out.end()) out.push_back(p.series);
    }
    return out;
}

std::vector<double> xs_of(const std::vector<Point>& pts) {
    std::vector<double> xs;
    for (const auto& p : pts) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

bool usable(const CsvTable& t, const std::vector<std::string>& row, double& score) {
    if (row.size() < t.header.size() - 1) return false;
    const auto si = t.column("score");
    if (si >= row.size()) return false;
    const auto st = std::find(t.header.begin(), t.header.end(), "status");
    if (st != t.header.end()) {
        const auto idx = static_cast<std::size_t>(st - t.header.begin());
        if (idx < row.size() && row[idx] != "ok") return false;
    }
    try {
        score = std::stod(row[si]);
    } catch (const std::exception&) {
        return false;
    }
    return std::isfinite(score);
}

std::string bars(const CsvTable& t) {
    const auto pc = t.column("p"), mc = t.column("mode");
    Aggregate agg;
    for (const auto& r : t.rows) {
        double s;
        if (usable(t, r, s)) agg.add(r[mc], std::stod(r[pc]), s);
    }
    const auto pts = agg.points();
    if (pts.empty()) throw std::invalid_argument("no rows");
    const auto f = frame_for(pts);
    const auto series = series_of(pts, {"mr", "fixed"});
    const auto xs = xs_of(pts);

    std::ostringstream o;
    o << open_svg("Mean best validation score vs sharing ratio p") << y_axis(f, "score");
    const double plot_w = kWidth - kLeft - kRight;
    const double group_w = plot_w / static_cast<double>(xs.size());
    const double bar_w = 0.8 * group_w / static_cast<double>(series.size());
    const double base = kHeight - kBottom;
    for (std::size_t g = 0; g < xs.size(); ++g) {
        const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
        for (std::size_t k = 0; k < series.size(); ++k) {
            const auto it = std::find_if(pts.begin(), pts.end(),
                                         [&](const Point& p) { return p.series == series[k] && p.x == xs[g]; });
            if (it == pts.end()) continue;
            const double y = f.y(it->y);
            o << "<rect class=\"bar\" data-series=\"" << series[k] << "\" data-p=\"" << num(xs[g]) << "\" x=\""
              << gx + bar_w * static_cast<double>(k) << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
              << base - y << "\" fill=\"" << kPalette[k % 6] << "\"><title>" << series[k] << " p=" << num(xs[g])
              << ": " << num(it->y) << "</title></rect>\n";
        }
        o << "<text x=\"" << gx + 0.4 * group_w << "\" y=\"" << base + 18 << "\" text-anchor=\"middle\">"
          << num(xs[g]) << "</text>\n";
    }
    o << "<line x1=\"" << kLeft << "\" y1=\"" << base << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << base
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">p</text>\n"
      << legend(series) << "</svg>\n";
    return o.str();
}

std::string heat(const CsvTable& t) {
    const auto dc = t.column("delta"), rc = t.column("target_r");
    Aggregate agg;  // series = delta as text, x = target_r
    std::map<std::string, double> delta_value;
    for (const auto& r : t.rows) {
        double s;
        if (!usable(t, r, s)) continue;
        agg.add(r[dc], std::stod(r[rc]), s);
        delta_value[r[dc]] = std::stod(r[dc]);
    }
    const auto pts = agg.points();
    if (pts.empty()) throw std::invalid_argument("no rows");
    const auto xs = xs_of(pts);
    std::vector<std::pair<double, std::string>> deltas;
    for (const auto& [k, v] : delta_value) deltas.emplace_back(v, k);
    std::sort(deltas.begin(), deltas.end());
    double lo = pts.front().y, hi = pts.front().y;
    for (const auto& p : pts) {
        lo = std::min(lo, p.y);
        hi = std::max(hi, p.y);
    }

    std::ostringstream o;
    o << open_svg("Mean best validation score over update interval and completion rate");
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double cw = plot_w / static_cast<double>(xs.size());
    const double ch = plot_h / static_cast<double>(deltas.size());
    for (std::size_t row = 0; row < deltas.size(); ++row) {
        const double y = kTop + ch * static_cast<double>(row);
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"end\">"
          << num(deltas[row].first) << "</text>\n";
        for (std::size_t col = 0; col < xs.size(); ++col) {
            const auto it = std::find_if(pts.begin(), pts.end(), [&](const Point& p) {
                return p.series == deltas[row].second && p.x == xs[col];
            });
            if (it == pts.end()) continue;
            const double u = hi > lo ? (it->y - lo) / (hi - lo) : 0.5;
            const int red = static_cast<int>(255 * u), blue = static_cast<int>(255 * (1 - u));
            o << "<rect class=\"cell\" data-delta=\"" << num(deltas[row].first) << "\" data-r=\"" << num(xs[col])
              << "\" x=\"" << kLeft + cw * static_cast<double>(col) << "\" y=\"" << y << "\" width=\"" << cw
              << "\" height=\"" << ch << "\" fill=\"rgb(" << red << ",80," << blue << ")\"/>\n"
              << "<text x=\"" << kLeft + cw * (static_cast<double>(col) + 0.5) << "\" y=\"" << y + ch / 2 + 4
              << "\" text-anchor=\"middle\" fill=\"white\">" << num(it->y) << "</text>\n";
        }
    }
    for (std::size_t col = 0; col < xs.size(); ++col) {
        o << "<text x=\"" << kLeft + cw * (static_cast<double>(col) + 0.5) << "\" y=\"" << kHeight - kBottom + 18
          << "\" text-anchor=\"middle\">" << num(xs[col]) << "</text>\n";
    }
    o << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">completion rate r</text>\n"
      << "<text transform=\"translate(18," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">delta (epochs)</text>\n"
      << "</svg>\n";
    return o.str();
}

std::string lines(const CsvTable& t) {
    const auto sc = t.column("selection"), rc = t.column("target_r");
    Aggregate agg;
    for (const auto& r : t.rows) {
        double s;
        if (usable(t, r, s)) agg.add(r[sc], std::stod(r[rc]), s);
    }
    const auto pts = agg.points();
    if (pts.empty()) throw std::invalid_argument("no rows");
    const auto f = frame_for(pts);
    const auto series = series_of(pts, {"uniform", "cosine"});
    const auto xs = xs_of(pts);
    const double x_lo = xs.front(), x_hi = xs.size() > 1 ? xs.back() : xs.front() + 1.0;
    const double plot_w = kWidth - kLeft - kRight;
    auto px = [&](double x) { return kLeft + 10 + (plot_w - 20) * (x - x_lo) / (x_hi - x_lo); };

    std::ostringstream o;
    o << open_svg("Mean best validation score vs completion rate by selection") << y_axis(f, "score");
    const double base = kHeight - kBottom;
    o << "<line x1=\"" << kLeft << "\" y1=\"" << base << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << base
      << "\" stroke=\"black\"/>\n";
    for (auto x : xs) {
        o << "<text x=\"" << px(x) << "\" y=\"" << base + 18 << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        o << "<polyline class=\"series\" data-series=\"" << series[k] << "\" fill=\"none\" stroke=\""
          << kPalette[k % 6] << "\" stroke-width=\"2\" points=\"";
        for (const auto& p : pts) {
            if (p.series == series[k]) o << px(p.x) << ',' << f.y(p.y) << ' ';
        }
        o << "\"/>\n";
        for (const auto& p : pts) {
            if (p.series == series[k]) {
                o << "<circle cx=\"" << px(p.x) << "\" cy=\"" << f.y(p.y) << "\" r=\"3\" fill=\"" << kPalette[k % 6]
                  << "\"/>\n";
            }
        }
    }
    o << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">completion rate r</text>\n"
      << legend(series) << "</svg>\n";
    return o.str();
}

}  // namespace

std::string render_svg(const CsvTable& table, PlotKind kind) {
    if (table.rows.empty()) throw std::invalid_argument("no rows");
    switch (kind) {
        case PlotKind::bars_vs_p: return bars(table);
        case PlotKind::heat_delta_r: return heat(table);
        case PlotKind::lines_selection: return lines(table);
    }
    throw std::invalid_argument("unknown plot kind");
}

void plot(const std::filesystem::path& csv_path, PlotKind kind, const std::filesystem::path& svg_path) {
    const auto svg = render_svg(read_csv(csv_path), kind);
    if (svg_path.has_parent_path()) std::filesystem::create_directories(svg_path.parent_path());
    std::ofstream out(svg_path);
    if (!out) throw std::runtime_error("cannot write " + svg_path.string());
    out << svg;
}

}  // namespace maxroam
