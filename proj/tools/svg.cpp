#include "svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace pmlab {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 150, kTop = 40, kBottom = 56;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string fixed(double v) {
  char buf[48];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  if (ec != std::errc()) return "0";
  return std::string(buf, end);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) *
                                   (kHeight - kTop - kBottom);
  }
};

std::string header(const ChartLabels& labels) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth) +
                  "\" height=\"" + fixed(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(labels.title) + "</text>\n";
  return s;
}

std::string axes(const Frame& f, const ChartLabels& labels) {
  std::string s;
  const double bx = kLeft, by = kHeight - kBottom, ex = kWidth - kRight;
  s += "<line x1=\"" + fixed(bx) + "\" y1=\"" + fixed(by) + "\" x2=\"" + fixed(ex) +
       "\" y2=\"" + fixed(by) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fixed(bx) + "\" y1=\"" + fixed(by) + "\" x2=\"" + fixed(bx) +
       "\" y2=\"" + fixed(kTop) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + fixed(f.px(xv)) + "\" y=\"" + fixed(by + 16) +
         "\" text-anchor=\"middle\">" + fixed(xv) + "</text>\n";
    s += "<text x=\"" + fixed(bx - 6) + "\" y=\"" + fixed(f.py(yv) + 4) +
         "\" text-anchor=\"end\">" + fixed(yv) + "</text>\n";
  }
  s += "<text x=\"" + fixed((bx + ex) / 2) + "\" y=\"" + fixed(kHeight - 14) +
       "\" text-anchor=\"middle\">" + escape(labels.x_axis) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fixed((by + kTop) / 2) + "\" transform=\"rotate(-90 16 " +
       fixed((by + kTop) / 2) + ")\" text-anchor=\"middle\">" + escape(labels.y_axis) +
       "</text>\n";
  return s;
}

std::string legend_entry(std::size_t i, const std::string& label, const char* colour) {
  const double y = kTop + 16.0 * static_cast<double>(i);
  const double x = kWidth - kRight + 12;
  return "<rect x=\"" + fixed(x) + "\" y=\"" + fixed(y - 9) +
         "\" width=\"10\" height=\"10\" fill=\"" + colour + "\"/>\n<text x=\"" + fixed(x + 14) +
         "\" y=\"" + fixed(y) + "\">" + escape(label) + "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const ChartLabels& labels) {
  Frame f{0, 1, 0, 1};
  bool first = true;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("line_chart_svg: ragged series");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        f = {s.x[i], s.x[i], s.y[i], s.y[i]};
        first = false;
      }
      f.x0 = std::min(f.x0, s.x[i]);
      f.x1 = std::max(f.x1, s.x[i]);
      f.y0 = std::min(f.y0, s.y[i]);
      f.y1 = std::max(f.y1, s.y[i]);
    }
  }
  std::string out = header(labels) + axes(f, labels);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* colour = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      if (!std::isfinite(series[k].x[i]) || !std::isfinite(series[k].y[i])) continue;
      points += fixed(f.px(series[k].x[i])) + "," + fixed(f.py(series[k].y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    out += legend_entry(k, series[k].label, colour);
  }
  return out + "</svg>\n";
}

std::string histogram_svg(const std::vector<double>& edges,
                          const std::vector<double>& first, const std::string& first_label,
                          const std::vector<double>& second, const std::string& second_label,
                          const ChartLabels& labels) {
  if (edges.size() != first.size() + 1 || first.size() != second.size()) {
    throw std::invalid_argument("histogram_svg: edges and counts disagree");
  }
  double top = 1.0;
  for (std::size_t i = 0; i < first.size(); ++i) top = std::max({top, first[i], second[i]});
  const Frame f{edges.front(), edges.back(), 0.0, top};
  std::string out = header(labels) + axes(f, labels);
  const std::vector<double>* data[] = {&first, &second};
  for (int k = 0; k < 2; ++k) {
    const char* colour = kPalette[k];
    for (std::size_t i = 0; i < first.size(); ++i) {
      const double x0 = f.px(edges[i]), x1 = f.px(edges[i + 1]);
      const double half = (x1 - x0) / 2.0;
      const double y = f.py((*data[k])[i]);
      out += "<rect x=\"" + fixed(x0 + k * half) + "\" y=\"" + fixed(y) + "\" width=\"" +
             fixed(half) + "\" height=\"" + fixed(kHeight - kBottom - y) + "\" fill=\"" +
             colour + "\" fill-opacity=\"0.8\"/>\n";
    }
    out += legend_entry(static_cast<std::size_t>(k), k == 0 ? first_label : second_label, colour);
  }
  return out + "</svg>\n";
}

}  // namespace pmlab
