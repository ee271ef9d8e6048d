#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kgl/error.hpp"
#include "kgl/experiment.hpp"

namespace kgl {

namespace fs = std::filesystem;

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
};

Table read_csv(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorKind::io, "cannot open " + file.string());
    Table t;
    std::string line;
    std::getline(in, line);
    std::stringstream hs(line);
    for (std::string h; std::getline(hs, h, ',');) t.header.push_back(h);
    t.cols.resize(t.header.size());
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::size_t c = 0;
        for (std::string cell; std::getline(ls, cell, ',') && c < t.cols.size(); ++c)
            t.cols[c].push_back(std::strtod(cell.c_str(), nullptr));
    }
    return t;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

constexpr double W = 640, H = 420, L = 70, R = 150, Tm = 40, B = 50;

// x column 0 against every other column; non-finite points break the polyline
std::string line_chart(const Table& t, const std::string& title) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (std::size_t c = 1; c < t.cols.size(); ++c)
        for (std::size_t i = 0; i < t.cols[c].size(); ++i) {
            const double x = t.cols[0][i], y = t.cols[c][i];
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    if (!(x0 < x1)) x0 -= 1, x1 += 1;
    if (!(y0 < y1)) y0 -= 1, y1 += 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tm - B); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    s << "<rect x=\"" << L << "\" y=\"" << Tm << "\" width=\"" << W - L - R << "\" height=\"" << H - Tm - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double x = x0 + (x1 - x0) * k / 4, y = y0 + (y1 - y0) * k / 4;
        s << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
        s << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << t.header[0] << "</text>\n";
    for (std::size_t c = 1; c < t.cols.size(); ++c) {
        const char* colour = palette[(c - 1) % std::size(palette)];
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
            pts.clear();
        };
        for (std::size_t i = 0; i < t.cols[c].size(); ++i) {
            const double x = t.cols[0][i], y = t.cols[c][i];
            if (!std::isfinite(x) || !std::isfinite(y)) {
                flush();
                continue;
            }
            pts += num(px(x)) + "," + num(py(y)) + " ";
        }
        flush();
        const double ly = Tm + 16 * static_cast<double>(c);
        s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << t.header[c] << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

// columns i, j, value on the lattice, block-averaged down to at most 128
// cells a side; NaN cells grey
std::string heatmap(const Table& t, const std::string& title) {
    int si = 0, sj = 0;
    for (std::size_t k = 0; k < t.cols.at(2).size(); ++k)
        si = std::max(si, static_cast<int>(t.cols[0][k]) + 1), sj = std::max(sj, static_cast<int>(t.cols[1][k]) + 1);
    const int f = std::max(1, (std::max(si, sj) + 127) / 128);
    const int bi = (si + f - 1) / f, bj = (sj + f - 1) / f;
    std::vector<double> sum(static_cast<std::size_t>(bi) * bj, 0.0), cnt(sum.size(), 0.0);
    for (std::size_t k = 0; k < t.cols[2].size(); ++k) {
        const double v = t.cols[2][k];
        if (!std::isfinite(v)) continue;
        const std::size_t c = static_cast<std::size_t>(static_cast<int>(t.cols[1][k]) / f) * bi + static_cast<int>(t.cols[0][k]) / f;
        sum[c] += v;
        cnt[c] += 1;
    }
    std::vector<double> I, J, V;
    for (int j = 0; j < bj; ++j)
        for (int i = 0; i < bi; ++i) {
            const std::size_t c = static_cast<std::size_t>(j) * bi + i;
            I.push_back(i);
            J.push_back(j);
            V.push_back(cnt[c] > 0 ? sum[c] / cnt[c] : NAN);
        }
    double ni = bi, nj = bj, v0 = INFINITY, v1 = -INFINITY;
    for (double v : V)
        if (std::isfinite(v)) v0 = std::min(v0, v), v1 = std::max(v1, v);
    if (!(v0 < v1)) v0 -= 1, v1 += 1;
    const double side = 400, cw = side / std::max(ni, 1.0), ch = side / std::max(nj, 1.0);
    auto colour = [&](double v) {
        if (!std::isfinite(v)) return std::string("#bbbbbb");
        const double s = (v - v0) / (v1 - v0);
        // dark blue through white to dark red
        const int r = static_cast<int>(255 * std::min(1.0, 2 * s)), b = static_cast<int>(255 * std::min(1.0, 2 - 2 * s));
        const int g = static_cast<int>(255 * (1 - std::abs(2 * s - 1)));
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return std::string(buf);
    };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side + 160 << "\" height=\"" << side + 60
      << "\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << side / 2 + 20 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    for (std::size_t k = 0; k < V.size(); ++k)
        s << "<rect x=\"" << num(20 + I[k] * cw) << "\" y=\"" << num(40 + (nj - 1 - J[k]) * ch) << "\" width=\""
          << num(cw + 0.05) << "\" height=\"" << num(ch + 0.05) << "\" fill=\"" << colour(V[k]) << "\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = v0 + (v1 - v0) * k / 4;
        const double y = 40 + side - side * k / 4;
        s << "<rect x=\"" << side + 40 << "\" y=\"" << y - 10 << "\" width=\"20\" height=\"10\" fill=\"" << colour(v) << "\"/>\n";
        s << "<text x=\"" << side + 66 << "\" y=\"" << y << "\">" << num(v) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace

std::vector<fs::path> plot_artifacts(const fs::path& dir) {
    const auto csv_dir = dir / "csv";
    if (!fs::is_directory(csv_dir)) throw Error(ErrorKind::usage, dir.string() + " has no csv/ directory");
    fs::create_directories(dir / "plots");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(csv_dir))
        if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<fs::path> written;
    for (const auto& f : files) {
        const auto stem = f.stem().string();
        std::string svg;
        if (stem == "u0") continue;  // per-node dump, plotted through heat_density_t0
        const auto t = read_csv(f);
        if (t.cols.size() < 2 || t.cols[0].empty()) continue;
        if (stem.starts_with("heat_"))
            svg = heatmap(t, stem.substr(5));
        else if (stem == "energy")
            svg = line_chart(t, "I(u_t) against t");
        else if (stem == "profiles")
            svg = line_chart(t, "dual profiles against tau");
        else if (stem == "slices")
            svg = line_chart(t, "t-slices along one lattice row");
        else
            svg = line_chart(t, stem);
        const auto out = dir / "plots" / (stem + ".svg");
        std::ofstream o(out);
        if (!o) throw Error(ErrorKind::io, "cannot write " + out.string());
        o << svg;
        written.push_back(out);
    }
    return written;
}

}  // namespace kgl
