#pragma once

#include "mimdarts/config.hpp"
#include "mimdarts/losses.hpp"
#include "mimdarts/search_space.hpp"

#include <string>
#include <vector>

namespace mimdarts {

constexpr int kMetricsSchemaVersion = 1;

struct MetricRow {
  int epoch = 0;
  double l_cls = 0, l_mse = 0, lambda = 0, total = 0;
  bool epsilon_guard_triggered = false;
  double skip_fraction = 0, alpha_std_total = 0, val_acc = 0, wall_clock_s = 0;
};

struct AlphaSnapshot {
  int epoch = 0;
  int num_edges = 0, num_ops = 0;
  std::vector<float> normal;
  std::vector<float> reduce;  // empty for nb201

  std::string to_json() const;
  static AlphaSnapshot from_json(const std::string& text);
};

struct RunRecord {
  int schema_version = kMetricsSchemaVersion;
  SearchConfig config;
  std::vector<MetricRow> rows;
  std::vector<AlphaSnapshot> snapshots;
  Genotype genotype;
  std::string abort_reason;               // empty on success
  std::vector<JointLossReport> step_reports;  // per w-step, in-memory only
};

/// metrics.csv: schema_version first, fixed column order, one row per epoch.
std::string metrics_csv_header();
std::string metric_row_csv(const MetricRow& row);
void write_metrics_csv(const RunRecord& rec, const std::string& path);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

/// Writes config.cfg, metrics.csv, genotype.json, alpha_<epoch>.json and
/// status.txt into run_dir (created if needed).
void write_run_dir(const RunRecord& rec, const std::string& run_dir);

struct EvalReport {
  double accuracy = 0;
  int n_test = 0;
  int epochs = 0;
  double final_train_loss = 0;

  std::string to_json() const;
};

}  // namespace mimdarts
