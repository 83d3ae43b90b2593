// SPDX-License-Identifier: Apache-2.0
#include "glukit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glukit::svg {

namespace {

constexpr double kWidth = 720, kHeight = 540;
constexpr double kLeft = 72, kRight = 24, kTop = 44, kBottom = 56;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '&') out += "&amp;";
        else if (ch == '<') out += "&lt;";
        else if (ch == '>') out += "&gt;";
        else out += ch;
    }
    return out;
}

struct Frame {
    double x0, x1, y0, y1;  // data ranges
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const {
        return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
    }
};

void open_svg(std::ostringstream& out) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void title_and_axes(std::ostringstream& out, const Frame& fr, const std::string& title,
                    const std::string& xlab, const std::string& ylab) {
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << escape(title) << "</text>\n";
    out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << escape(xlab)
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 18 " << (kTop + kHeight - kBottom) / 2 << ")\">" << escape(ylab)
        << "</text>\n";
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
        << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    (void)fr;
}

}  // namespace

std::string loglog_plot(const std::vector<Series>& series, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
    if (series.empty()) throw std::invalid_argument("loglog_plot: no series");

    double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.xs.size(); ++i) {
            if (!(s.xs[i] > 0.0) || !(s.ys[i] > 0.0)) continue;
            lx0 = std::min(lx0, std::log10(s.xs[i]));
            lx1 = std::max(lx1, std::log10(s.xs[i]));
            ly0 = std::min(ly0, std::log10(s.ys[i]));
            ly1 = std::max(ly1, std::log10(s.ys[i]));
        }
    if (lx0 > lx1) throw std::invalid_argument("loglog_plot: no positive points");
    const double padx = std::max(0.05 * (lx1 - lx0), 0.05);
    const double pady = std::max(0.05 * (ly1 - ly0), 0.05);
    Frame fr{lx0 - padx, lx1 + padx, ly0 - pady, ly1 + pady};

    std::ostringstream out;
    open_svg(out);

    // decade gridlines
    for (int e = static_cast<int>(std::floor(fr.x0)); e <= static_cast<int>(std::ceil(fr.x1));
         ++e) {
        if (e < fr.x0 || e > fr.x1) continue;
        const double x = fr.px(e);
        out << "<line x1=\"" << fmt(x) << "\" y1=\"" << kTop << "\" x2=\"" << fmt(x) << "\" y2=\""
            << kHeight - kBottom << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << fmt(x) << "\" y=\"" << kHeight - kBottom + 16
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">1e" << e
            << "</text>\n";
    }
    for (int e = static_cast<int>(std::floor(fr.y0)); e <= static_cast<int>(std::ceil(fr.y1));
         ++e) {
        if (e < fr.y0 || e > fr.y1) continue;
        const double y = fr.py(e);
        out << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y) << "\" x2=\"" << kWidth - kRight
            << "\" y2=\"" << fmt(y) << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">1e" << e
            << "</text>\n";
    }
    title_and_axes(out, fr, title, x_label, y_label);

    int ci = 0;
    double legend_y = kTop + 16;
    for (const auto& s : series) {
        const std::string color = s.color.empty() ? kPalette[ci % 6] : s.color;
        ++ci;
        if (s.fit) {
            const auto [slope, intercept] = *s.fit;
            const double ya = slope * fr.x0 + intercept, yb = slope * fr.x1 + intercept;
            out << "<line x1=\"" << fmt(fr.px(fr.x0)) << "\" y1=\"" << fmt(fr.py(ya)) << "\" x2=\""
                << fmt(fr.px(fr.x1)) << "\" y2=\"" << fmt(fr.py(yb)) << "\" stroke=\"" << color
                << "\" stroke-dasharray=\"6 3\" opacity=\"0.7\"/>\n";
        }
        for (size_t i = 0; i < s.xs.size(); ++i) {
            if (!(s.xs[i] > 0.0) || !(s.ys[i] > 0.0)) continue;
            out << "<circle cx=\"" << fmt(fr.px(std::log10(s.xs[i]))) << "\" cy=\""
                << fmt(fr.py(std::log10(s.ys[i]))) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
        }
        std::string label = s.label;
        if (s.fit) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), " (slope %.2f)", s.fit->first);
            label += buf;
        }
        out << "<circle cx=\"" << kWidth - kRight - 170 << "\" cy=\"" << legend_y - 4
            << "\" r=\"4\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << kWidth - kRight - 160 << "\" y=\"" << legend_y
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << escape(label) << "</text>\n";
        legend_y += 18;
    }
    out << "</svg>\n";
    return out.str();
}

std::string model_view_1d(const ModelParams& params, const TargetFunction* target, double lo,
                          double hi, int samples) {
    if (params.arch.dim_x != 1 || params.arch.dim_y != 1)
        throw std::invalid_argument("1d view requires dim_x == dim_y == 1");
    if (samples < 8) throw std::invalid_argument("too few samples");

    Matrix X(samples, 1);
    for (int i = 0; i < samples; ++i)
        X(i, 0) = lo + (hi - lo) * static_cast<double>(i) / (samples - 1);
    const Matrix Ym = forward(params, X);
    const auto neurons = neuron_decomposition(params, X);

    double y0 = Ym.minCoeff(), y1 = Ym.maxCoeff();
    Vector Yt;
    if (target) {
        Yt = target->eval(X).col(0);
        y0 = std::min(y0, Yt.minCoeff());
        y1 = std::max(y1, Yt.maxCoeff());
    }
    for (const auto& na : neurons) {
        y0 = std::min(y0, na.values.minCoeff());
        y1 = std::max(y1, na.values.maxCoeff());
    }
    if (y1 <= y0) y1 = y0 + 1.0;
    const double pady = 0.06 * (y1 - y0);
    Frame fr{lo, hi, y0 - pady, y1 + pady};

    std::ostringstream out;
    open_svg(out);
    title_and_axes(out, fr, std::string(to_string(params.arch.kind)) + " model, n=" +
                                std::to_string(params.arch.n),
                   "x", "y");

    for (double knot : cell_boundaries_1d(params, lo, hi))
        out << "<line class=\"knot\" x1=\"" << fmt(fr.px(knot)) << "\" y1=\"" << kTop
            << "\" x2=\"" << fmt(fr.px(knot)) << "\" y2=\"" << kHeight - kBottom
            << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";

    auto polyline = [&](const Vector& ys, const std::string& attrs, const std::string& cls) {
        out << "<polyline class=\"" << cls << "\" fill=\"none\" " << attrs << " points=\"";
        for (int i = 0; i < samples; ++i)
            out << fmt(fr.px(X(i, 0))) << "," << fmt(fr.py(ys[i])) << " ";
        out << "\"/>\n";
    };
    int ci = 0;
    for (const auto& na : neurons) {
        polyline(na.values,
                 "stroke=\"" + std::string(kPalette[ci % 6]) + "\" stroke-width=\"1\" opacity=\"0.6\"",
                 "neuron");
        ++ci;
    }
    if (target) polyline(Yt, "stroke=\"#1f77b4\" stroke-width=\"2.5\" opacity=\"0.85\"", "target");
    polyline(Ym.col(0), "stroke=\"black\" stroke-width=\"1.8\"", "model");
    out << "</svg>\n";
    return out.str();
}

std::string model_view_2d(const ModelParams& params, const std::array<double, 4>& box, int grid) {
    if (params.arch.dim_x != 2 || params.arch.dim_y != 1)
        throw std::invalid_argument("2d view requires dim_x == 2, dim_y == 1");
    if (grid < 2) throw std::invalid_argument("grid too small");

    const double xlo = box[0], xhi = box[1], ylo = box[2], yhi = box[3];
    Matrix X(grid * grid, 2);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            X(i * grid + j, 0) = xlo + (xhi - xlo) * (j + 0.5) / grid;
            X(i * grid + j, 1) = ylo + (yhi - ylo) * (i + 0.5) / grid;
        }
    const Vector Z = forward(params, X).col(0);
    const double zmax = std::max(std::abs(Z.minCoeff()), std::abs(Z.maxCoeff()));
    const double zscale = zmax > 0.0 ? zmax : 1.0;

    Frame fr{xlo, xhi, ylo, yhi};
    std::ostringstream out;
    open_svg(out);
    title_and_axes(out, fr, std::string(to_string(params.arch.kind)) + " surface, n=" +
                                std::to_string(params.arch.n),
                   "x1", "x2");

    const double cw = (kWidth - kLeft - kRight) / grid;
    const double ch = (kHeight - kTop - kBottom) / grid;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            const double t = std::clamp(Z[i * grid + j] / zscale, -1.0, 1.0);
            // diverging blue-white-red
            const int r = t >= 0 ? 255 : static_cast<int>(255 * (1.0 + t));
            const int b = t <= 0 ? 255 : static_cast<int>(255 * (1.0 - t));
            const int gch = static_cast<int>(255 * (1.0 - 0.85 * std::abs(t)));
            out << "<rect x=\"" << fmt(kLeft + j * cw) << "\" y=\""
                << fmt(kHeight - kBottom - (i + 1) * ch) << "\" width=\"" << fmt(cw + 0.5)
                << "\" height=\"" << fmt(ch + 0.5) << "\" fill=\"rgb(" << r << "," << gch << ","
                << b << ")\"/>\n";
        }

    for (const auto& seg : cell_boundaries_2d(params, box))
        out << "<line class=\"hinge\" x1=\"" << fmt(fr.px(seg.a.x())) << "\" y1=\""
            << fmt(fr.py(seg.a.y())) << "\" x2=\"" << fmt(fr.px(seg.b.x())) << "\" y2=\""
            << fmt(fr.py(seg.b.y())) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    out << "</svg>\n";
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace glukit::svg
