#include "paint/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "paint/common.hpp"

namespace paint {

namespace {
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}
}  // namespace

void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log_y) {
    const double W = 720, H = 480, ml = 80, mr = 160, mt = 50, mb = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (log_y) {
                if (y <= 0) continue;
                y = std::log10(y);
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double yv) {
        double y = log_y ? std::log10(std::max(yv, 1e-300)) : yv;
        return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
    };

    std::ofstream os(path);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16' "
       << "font-family='sans-serif'>" << title << "</text>\n";

    // axes
    os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
       << "' stroke='black'/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        os << "<line x1='" << px(fx) << "' y1='" << H - mb << "' x2='" << px(fx) << "' y2='"
           << H - mb + 5 << "' stroke='black'/>\n";
        os << "<text x='" << px(fx) << "' y='" << H - mb + 20
           << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << fmt(fx)
           << "</text>\n";
        const double ty = H - mb - (fy - ymin) / (ymax - ymin) * (H - mt - mb);
        os << "<line x1='" << ml - 5 << "' y1='" << ty << "' x2='" << ml << "' y2='" << ty
           << "' stroke='black'/>\n";
        os << "<text x='" << ml - 9 << "' y='" << ty + 4
           << "' text-anchor='end' font-size='11' font-family='sans-serif'>"
           << fmt(log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    os << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 15
       << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label
       << "</text>\n";
    os << "<text x='18' y='" << (mt + H - mb) / 2
       << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 18 "
       << (mt + H - mb) / 2 << ")'>" << y_label << (log_y ? " (log scale)" : "") << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 8];
        os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.6' points='";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (log_y && s.y[i] <= 0) continue;
            os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        os << "'/>\n";
        const double ly = mt + 18.0 * si;
        os << "<line x1='" << W - mr + 10 << "' y1='" << ly << "' x2='" << W - mr + 34 << "' y2='"
           << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
        os << "<text x='" << W - mr + 40 << "' y='" << ly + 4
           << "' font-size='12' font-family='sans-serif'>" << s.name << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) throw io_error("write failed for '" + path.string() + "'");
}

}  // namespace paint
