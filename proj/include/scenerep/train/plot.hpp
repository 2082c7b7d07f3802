#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace scenerep::train {

/// m_0 = x_0, m_t = beta m_{t-1} + (1 - beta) x_t.
std::vector<double> ema(const std::vector<double>& x, double beta = 0.99);

/// One line per record; blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

/// Mean curve across seeds with a standard-error band.
struct Curve {
  std::string label;
  std::vector<double> steps;
  std::vector<double> mean;
  std::vector<double> stderr_band;  // 0 for a single run
};

/// Smooths `key` of every run with the EMA, then averages over runs step by
/// step. Runs are truncated to the shortest one; rows with a null value carry
/// the previous value forward.
Curve aggregate_runs(const std::string& label, const std::vector<std::vector<nlohmann::json>>& runs,
                     const std::string& key, double beta = 0.99);

std::string curves_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label);

/// Heatmap of one exported attention step at `level` (aggregation, output,
/// cross or motion).
std::string attention_svg(const nlohmann::json& step, const std::string& level);

/// Scatter of 2-D points coloured by `values` (blue low, red high).
std::string scatter_svg(const std::vector<std::array<double, 2>>& points, const std::vector<double>& values,
                        const std::string& title);

}  // namespace scenerep::train
