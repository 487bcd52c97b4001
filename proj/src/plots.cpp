#include "attachnlp/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "attachnlp/errors.hpp"

namespace attachnlp {

namespace {

const char* kLabelColors[kNumLabels] = {"#d95f02", "#1b9e77", "#7570b3"};

std::string fmt(double value, int digits = 2) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

void svg_open(std::ostringstream& out, int width, int height) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void svg_text(std::ostringstream& out, double x, double y, const std::string& text,
              int size = 12, const char* anchor = "start", const char* fill = "#222") {
  out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
      << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
      << "\">" << text << "</text>\n";
}

void svg_line(std::ostringstream& out, double x1, double y1, double x2, double y2,
              const char* stroke = "#444", double width = 1.0) {
  out << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
      << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
      << fmt(width) << "\"/>\n";
}

void svg_rect(std::ostringstream& out, double x, double y, double w, double h,
              const std::string& fill, const char* stroke = "none") {
  out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
      << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
      << "\"/>\n";
}

}  // namespace

std::string render_turn_length_histogram_svg(const TurnLengthHistogram& histogram) {
  const std::size_t bins = histogram.bin_count();
  const int width = 160 + static_cast<int>(bins) * 90;
  const int height = 360;
  const double plot_left = 70.0;
  const double plot_top = 50.0;
  const double plot_bottom = height - 60.0;
  const double plot_height = plot_bottom - plot_top;

  std::int64_t peak = 1;
  for (const auto& per_label : histogram.counts) {
    for (std::int64_t count : per_label) peak = std::max(peak, count);
  }

  std::ostringstream out;
  svg_open(out, width, height);
  svg_text(out, width / 2.0, 24, "Patient speech turn length per class", 15, "middle");
  svg_line(out, plot_left, plot_top, plot_left, plot_bottom);
  svg_line(out, plot_left, plot_bottom, width - 40.0, plot_bottom);
  svg_text(out, 20, plot_top + plot_height / 2.0, "turns", 12, "middle");
  svg_text(out, width / 2.0, height - 12.0, "turn length (words)", 12, "middle");

  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = plot_bottom - frac * plot_height;
    svg_line(out, plot_left - 4, y, plot_left, y);
    svg_text(out, plot_left - 8, y + 4,
             std::to_string(static_cast<std::int64_t>(std::llround(frac * static_cast<double>(peak)))),
             10, "end");
  }

  const double group_width = 84.0;
  const double bar_width = group_width / (kNumLabels + 1);
  for (std::size_t bin = 0; bin < bins; ++bin) {
    const double group_x = plot_left + 10.0 + static_cast<double>(bin) * 90.0;
    for (std::size_t label = 0; label < kNumLabels; ++label) {
      const double value = static_cast<double>(histogram.counts[label][bin]);
      const double bar_height = plot_height * value / static_cast<double>(peak);
      svg_rect(out, group_x + static_cast<double>(label) * bar_width,
               plot_bottom - bar_height, bar_width - 2.0, bar_height, kLabelColors[label]);
    }
    svg_text(out, group_x + group_width / 2.0 - bar_width / 2.0, plot_bottom + 16.0,
             histogram.bin_name(bin), 10, "middle");
  }

  for (std::size_t label = 0; label < kNumLabels; ++label) {
    const double x = plot_left + static_cast<double>(label) * 120.0;
    svg_rect(out, x, 32.0, 10, 10, kLabelColors[label]);
    svg_text(out, x + 14, 41.0, std::string(label_name(kLabelOrder[label])), 11);
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_confusion_grid_svg(
    const std::vector<std::pair<std::string, ConfusionMatrix>>& matrices) {
  if (matrices.empty()) throw EmptyInput("no confusion matrices to render");

  const int cell = 46;
  const int matrix_size = cell * static_cast<int>(kNumLabels);
  const int panel_width = matrix_size + 90;
  const int panel_height = matrix_size + 90;
  const int columns = std::min<int>(3, static_cast<int>(matrices.size()));
  const int rows = (static_cast<int>(matrices.size()) + columns - 1) / columns;
  const int width = columns * panel_width + 30;
  const int height = rows * panel_height + 30;

  std::ostringstream out;
  svg_open(out, width, height);
  for (std::size_t m = 0; m < matrices.size(); ++m) {
    const auto& [title, cm] = matrices[m];
    const double origin_x = 70.0 + static_cast<double>(m % columns) * panel_width;
    const double origin_y = 50.0 + static_cast<double>(m / columns) * panel_height;
    svg_text(out, origin_x + matrix_size / 2.0, origin_y - 26.0, title, 13, "middle");

    for (std::size_t g = 0; g < kNumLabels; ++g) {
      const std::int64_t row_total = cm.row_sum(g);
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        const double share =
            row_total > 0 ? static_cast<double>(cm.counts[g][p]) / static_cast<double>(row_total)
                          : 0.0;
        const int shade = static_cast<int>(std::lround(255.0 - 175.0 * share));
        char color[8];
        std::snprintf(color, sizeof(color), "#%02x%02xff", shade, shade);
        const double x = origin_x + static_cast<double>(p) * cell;
        const double y = origin_y + static_cast<double>(g) * cell;
        svg_rect(out, x, y, cell - 1.0, cell - 1.0, color, "#888");
        svg_text(out, x + cell / 2.0, y + cell / 2.0 + 4.0,
                 std::to_string(cm.counts[g][p]), 12, "middle");
      }
    }
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      const std::string name(label_name(kLabelOrder[i]).substr(0, 1));
      svg_text(out, origin_x + static_cast<double>(i) * cell + cell / 2.0,
               origin_y - 8.0, name, 11, "middle");
      svg_text(out, origin_x - 10.0, origin_y + static_cast<double>(i) * cell + cell / 2.0 + 4.0,
               name, 11, "end");
    }
    svg_text(out, origin_x + matrix_size / 2.0, origin_y + matrix_size + 18.0, "predicted",
             10, "middle", "#666");
    svg_text(out, origin_x - 40.0, origin_y + matrix_size / 2.0, "gold", 10, "middle", "#666");
  }
  out << "</svg>\n";
  return out.str();
}

std::string render_sweep_errorbars_svg(const SweepReport& report) {
  if (report.rows.empty()) throw EmptyRuns("no sweep rows to render");

  const int width = 560;
  const int height = 380;
  const double plot_left = 70.0;
  const double plot_right = width - 40.0;
  const double plot_top = 50.0;
  const double plot_bottom = height - 60.0;

  double y_min = 1e300;
  double y_max = -1e300;
  for (const SweepRow& row : report.rows) {
    y_min = std::min(y_min, row.mean - row.std_dev);
    y_max = std::max(y_max, row.mean + row.std_dev);
  }
  const double pad = std::max(0.02, (y_max - y_min) * 0.15);
  y_min -= pad;
  y_max += pad;

  const std::int64_t x_min = report.rows.front().min_length;
  const std::int64_t x_max = std::max(report.rows.back().min_length, x_min + 1);
  auto x_of = [&](std::int64_t value) {
    return plot_left + (plot_right - plot_left) * static_cast<double>(value - x_min) /
                           static_cast<double>(x_max - x_min);
  };
  auto y_of = [&](double value) {
    return plot_bottom - (plot_bottom - plot_top) * (value - y_min) / (y_max - y_min);
  };

  std::ostringstream out;
  svg_open(out, width, height);
  svg_text(out, width / 2.0, 24, "Accuracy over minimum input length (mean +- std)", 14,
           "middle");
  svg_line(out, plot_left, plot_top, plot_left, plot_bottom);
  svg_line(out, plot_left, plot_bottom, plot_right, plot_bottom);
  svg_text(out, width / 2.0, height - 14.0, "minimum input length (words)", 12, "middle");

  for (int tick = 0; tick <= 4; ++tick) {
    const double value = y_min + (y_max - y_min) * tick / 4.0;
    const double y = y_of(value);
    svg_line(out, plot_left - 4, y, plot_left, y);
    svg_text(out, plot_left - 8, y + 4, fmt(value, 3), 10, "end");
  }

  std::string polyline = "<polyline fill=\"none\" stroke=\"#1b6ca8\" stroke-width=\"1.5\" points=\"";
  for (const SweepRow& row : report.rows) {
    const double x = x_of(row.min_length);
    const double y_mid = y_of(row.mean);
    const double y_hi = y_of(row.mean + row.std_dev);
    const double y_lo = y_of(row.mean - row.std_dev);
    svg_line(out, x, y_hi, x, y_lo, "#1b6ca8", 1.2);
    svg_line(out, x - 5, y_hi, x + 5, y_hi, "#1b6ca8", 1.2);
    svg_line(out, x - 5, y_lo, x + 5, y_lo, "#1b6ca8", 1.2);
    out << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y_mid)
        << "\" r=\"3.5\" fill=\"#1b6ca8\"/>\n";
    svg_text(out, x, plot_bottom + 16.0, std::to_string(row.min_length), 10, "middle");
    svg_text(out, x, y_mid - 10.0, fmt(row.mean, 3), 9, "middle", "#555");
    polyline += fmt(x) + "," + fmt(y_mid) + " ";
  }
  polyline += "\"/>\n";
  out << polyline;
  out << "</svg>\n";
  return out.str();
}

}  // namespace attachnlp
