#include "varcpo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace varcpo {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw PlotError(source + ": missing column '" + name + "'");
  const auto idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& cell = rows[r][idx];
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(cell, &pos));
      if (pos != cell.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw PlotError(source + ": column '" + name + "' row " + std::to_string(r + 1) + " is not numeric");
    }
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PlotError("cannot read '" + path.string() + "'");
  CsvTable t;
  t.source = path.string();
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw PlotError(t.source + ": empty CSV");
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw PlotError(t.source + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                      std::to_string(cells.size()) + " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.rows.empty()) throw PlotError(t.source + ": CSV has no data rows");
  return t;
}

Band aggregate(const std::vector<CsvTable>& runs, const std::string& column, const std::string& x_column) {
  if (runs.empty()) throw PlotError("no input runs");
  std::vector<std::vector<double>> series;
  std::size_t len = SIZE_MAX;
  for (const auto& r : runs) {
    series.push_back(r.column(column));
    len = std::min(len, series.back().size());
  }
  Band b;
  b.x = runs.front().column(x_column);
  b.x.resize(len);
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < len; ++i) {
    double mean = 0.0;
    for (const auto& s : series) mean += s[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& s : series) ss += (s[i] - mean) * (s[i] - mean);
    b.mean.push_back(mean);
    b.stddev.push_back(runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
  }
  return b;
}

const std::vector<Panel>& standard_panels() {
  static const std::vector<Panel> panels = {
      {"reward_return", "Reward Return", "reward_return.svg"},
      {"mu", "Expected Cost Return", "expected_cost_return.svg"},
      {"cost_p95", "95th Percentile Cost Return", "cost_p95.svg"},
      {"ice_visitation", "Ice Tile Visitation", "ice_visitation.svg"},
  };
  return panels;
}

std::string render_svg(const Panel& panel, const Band& band) {
  constexpr double W = 480, H = 320, left = 60, right = 20, top = 36, bottom = 44;
  const double pw = W - left - right;
  const double ph = H - top - bottom;

  double x0 = band.x.empty() ? 0.0 : band.x.front();
  double x1 = band.x.empty() ? 1.0 : band.x.back();
  if (x1 <= x0) x1 = x0 + 1.0;
  double y0 = 0.0, y1 = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < band.mean.size(); ++i) {
    const double lo = band.mean[i] - band.stddev[i];
    const double hi = band.mean[i] + band.stddev[i];
    if (first) {
      y0 = lo;
      y1 = hi;
      first = false;
    }
    y0 = std::min(y0, lo);
    y1 = std::max(y1, hi);
  }
  if (y1 - y0 < 1e-9) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << panel.title << "</text>\n";
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double xv = x0 + (x1 - x0) * k / 4.0;
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << tick(yv) << "</text>\n";
    o << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << tick(xv) << "</text>\n";
  }
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 8)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">env steps</text>\n";

  if (!band.mean.empty()) {
    o << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < band.mean.size(); ++i)
      o << (i ? " " : "") << num(sx(band.x[i])) << ',' << num(sy(band.mean[i] + band.stddev[i]));
    for (std::size_t i = band.mean.size(); i-- > 0;)
      o << ' ' << num(sx(band.x[i])) << ',' << num(sy(band.mean[i] - band.stddev[i]));
    o << "\"/>\n";
    o << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < band.mean.size(); ++i)
      o << (i ? " " : "") << num(sx(band.x[i])) << ',' << num(sy(band.mean[i]));
    o << "\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::filesystem::path> write_plots(const std::vector<std::filesystem::path>& inputs,
                                               const std::filesystem::path& out_dir) {
  if (inputs.empty()) throw PlotError("plot needs at least one metrics CSV");
  std::vector<CsvTable> runs;
  for (const auto& p : inputs) runs.push_back(read_csv(p));
  // Validate every panel before writing anything.
  std::vector<Band> bands;
  for (const auto& panel : standard_panels()) bands.push_back(aggregate(runs, panel.column));
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto path = out_dir / standard_panels()[i].file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PlotError("cannot write '" + path.string() + "'");
    out << render_svg(standard_panels()[i], bands[i]);
    written.push_back(path);
  }
  return written;
}

}  // namespace varcpo
