#include "scenerep/train/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scenerep/errors.hpp"

namespace scenerep::train {

using nlohmann::json;

std::vector<double> ema(const std::vector<double>& x, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw UsageError("ema: beta must be in [0, 1)");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = i == 0 ? x[0] : beta * out[i - 1] + (1.0 - beta) * x[i];
  return out;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << "\n";
}

Curve aggregate_runs(const std::string& label, const std::vector<std::vector<json>>& runs, const std::string& key,
                     double beta) {
  if (runs.empty()) throw UsageError("aggregate_runs: no runs");
  std::size_t len = runs.front().size();
  for (const auto& r : runs) len = std::min(len, r.size());
  std::vector<std::vector<double>> smooth;
  for (const auto& r : runs) {
    std::vector<double> v;
    double last = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const auto it = r[i].find(key);
      if (it != r[i].end() && it->is_number()) last = it->get<double>();
      v.push_back(last);
    }
    smooth.push_back(ema(v, beta));
  }
  Curve c;
  c.label = label;
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < len; ++i) {
    c.steps.push_back(runs.front()[i].value("step", static_cast<double>(i)));
    double m = 0.0;
    for (const auto& s : smooth) m += s[i];
    m /= n;
    double var = 0.0;
    for (const auto& s : smooth) var += (s[i] - m) * (s[i] - m);
    c.mean.push_back(m);
    c.stderr_band.push_back(runs.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0);
  }
  return c;
}

namespace {

const char* kColours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string tick(double v) {
  std::ostringstream s;
  s.precision(std::abs(v) >= 1000 ? 6 : 3);
  s << v;
  return s.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else out += ch;
  }
  return out;
}

}  // namespace

std::string curves_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label) {
  const double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.steps.size(); ++i) {
      const double lo = c.mean[i] - c.stderr_band[i], hi = c.mean[i] + c.stderr_band[i];
      if (first) {
        x0 = x1 = c.steps[i];
        y0 = lo;
        y1 = hi;
        first = false;
      }
      x0 = std::min(x0, c.steps[i]);
      x1 = std::max(x1, c.steps[i]);
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title) << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << tick(xv)
      << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << tick(yv)
      << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  s << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
    << ")\" text-anchor=\"middle\" font-size=\"12\">" << escape(y_label) << "</text>\n";

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* colour = kColours[ci % std::size(kColours)];
    if (c.steps.empty()) continue;
    s << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.steps.size(); ++i) s << px(c.steps[i]) << "," << py(c.mean[i] + c.stderr_band[i]) << " ";
    for (std::size_t i = c.steps.size(); i-- > 0;) s << px(c.steps[i]) << "," << py(c.mean[i] - c.stderr_band[i]) << " ";
    s << "\"/>\n<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.steps.size(); ++i) s << px(c.steps[i]) << "," << py(c.mean[i]) << " ";
    s << "\"/>\n";
    const double ly = T + 16 + 18 * static_cast<double>(ci);
    s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << escape(c.label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string attention_svg(const json& step, const std::string& level) {
  const auto& levels = step.at("levels");
  if (!levels.contains(level)) throw UsageError("attention step has no level " + level);
  // Collect rows as (label, keys, weights).
  std::vector<std::string> row_labels, keys;
  std::vector<std::vector<double>> rows;
  const auto& lv = levels.at(level);
  if (level == "motion") {
    for (const auto& m : lv) {
      const auto w = m.at("weights").get<std::vector<std::vector<double>>>();
      // Attention of the most recent step over the history.
      row_labels.push_back(m.at("agent").get<std::string>());
      rows.push_back(w.back());
    }
    for (std::size_t t = 0; !rows.empty() && t < rows.front().size(); ++t) keys.push_back("t" + std::to_string(t));
  } else {
    const auto items = lv.is_array() ? lv : json::array({lv});
    for (const auto& item : items) {
      row_labels.push_back(item.at("query").get<std::string>());
      rows.push_back(item.at("weights").get<std::vector<double>>());
      keys = item.at("keys").get<std::vector<std::string>>();
    }
  }
  const double cell = 36, L = 70, T = 60;
  const double W = L + cell * static_cast<double>(std::max<std::size_t>(keys.size(), 1)) + 20;
  const double H = T + cell * static_cast<double>(std::max<std::size_t>(rows.size(), 1)) + 20;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"10\" y=\"20\" font-size=\"14\">" << escape(level) << " step " << step.value("step", 0) << "</text>\n";
  for (std::size_t j = 0; j < keys.size(); ++j)
    s << "<text x=\"" << L + cell * (j + 0.5) << "\" y=\"" << T - 8 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << escape(keys[j]) << "</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * (i + 0.5) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
      << escape(row_labels[i]) << "</text>\n";
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(rows[i][j], 0.0, 1.0))));
      s << "<rect x=\"" << L + cell * j << "\" y=\"" << T + cell * i << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"><title>" << rows[i][j] << "</title></rect>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string scatter_svg(const std::vector<std::array<double, 2>>& points, const std::vector<double>& values,
                        const std::string& title) {
  if (points.size() != values.size()) throw UsageError("scatter_svg: one value per point");
  const double W = 480, H = 480, M = 40;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0, v0 = 0, v1 = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == 0) {
      x0 = x1 = points[i][0];
      y0 = y1 = points[i][1];
      v0 = v1 = values[i];
    }
    x0 = std::min(x0, points[i][0]);
    x1 = std::max(x1, points[i][0]);
    y0 = std::min(y0, points[i][1]);
    y1 = std::max(y1, points[i][1]);
    v0 = std::min(v0, values[i]);
    v1 = std::max(v1, values[i]);
  }
  // Degenerate ranges collapse to the centre.
  auto unit = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << " (colour: Q " << v0 << " .. " << v1 << ")</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double cx = M + unit(points[i][0], x0, x1) * (W - 2 * M);
    const double cy = H - M - unit(points[i][1], y0, y1) * (H - 2 * M);
    const double t = unit(values[i], v0, v1);
    const int r = static_cast<int>(std::lround(255 * t)), b = 255 - r;
    s << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"2.5\" fill=\"rgb(" << r << ",60," << b << ")\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace scenerep::train
