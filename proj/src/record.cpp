#include "mimdarts/record.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mimdarts {

using ordered_json = nlohmann::ordered_json;

std::string AlphaSnapshot::to_json() const {
  ordered_json j;
  j["epoch"] = epoch;
  j["num_edges"] = num_edges;
  j["num_ops"] = num_ops;
  j["normal"] = normal;
  j["reduce"] = reduce;
  return j.dump(2) + "\n";
}

AlphaSnapshot AlphaSnapshot::from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  AlphaSnapshot s;
  s.epoch = j.at("epoch").get<int>();
  s.num_edges = j.at("num_edges").get<int>();
  s.num_ops = j.at("num_ops").get<int>();
  s.normal = j.at("normal").get<std::vector<float>>();
  s.reduce = j.at("reduce").get<std::vector<float>>();
  return s;
}

std::string metrics_csv_header() {
  return "schema_version,epoch,l_cls,l_mse,lambda,total,epsilon_guard_triggered,"
         "skip_fraction,alpha_std_total,val_acc,wall_clock_s";
}

std::string metric_row_csv(const MetricRow& r) {
  char buf[512];
  // %.17g keeps doubles exact through a parse round-trip (resume replays rows)
  std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.3f",
                kMetricsSchemaVersion, r.epoch, r.l_cls, r.l_mse, r.lambda, r.total,
                int(r.epsilon_guard_triggered), r.skip_fraction, r.alpha_std_total, r.val_acc,
                r.wall_clock_s);
  return buf;
}

void write_metrics_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << metrics_csv_header() << "\n";
  for (const auto& r : rec.rows) f << metric_row_csv(r) << "\n";
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty metrics file " + path);
  if (line != metrics_csv_header())
    throw std::runtime_error("unexpected metrics header in " + path);
  std::vector<MetricRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    MetricRow r;
    int schema = 0, guard = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf,%lf,%d,%lf,%lf,%lf,%lf", &schema, &r.epoch,
                    &r.l_cls, &r.l_mse, &r.lambda, &r.total, &guard, &r.skip_fraction,
                    &r.alpha_std_total, &r.val_acc, &r.wall_clock_s) != 11)
      throw std::runtime_error("malformed metrics row: " + line);
    r.epsilon_guard_triggered = guard != 0;
    rows.push_back(r);
  }
  return rows;
}

void write_run_dir(const RunRecord& rec, const std::string& run_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);
  rec.config.save(run_dir + "/config.cfg");
  write_metrics_csv(rec, run_dir + "/metrics.csv");
  {
    std::ofstream f(run_dir + "/genotype.json");
    f << rec.genotype.to_json();
  }
  for (const auto& snap : rec.snapshots) {
    std::ofstream f(run_dir + "/alpha_" + std::to_string(snap.epoch) + ".json");
    f << snap.to_json();
  }
  {
    std::ofstream f(run_dir + "/status.txt");
    f << (rec.abort_reason.empty() ? std::string("ok") : "aborted: " + rec.abort_reason) << "\n";
  }
}

std::string EvalReport::to_json() const {
  ordered_json j;
  j["accuracy"] = accuracy;
  j["n_test"] = n_test;
  j["epochs"] = epochs;
  j["final_train_loss"] = final_train_loss;
  return j.dump(2) + "\n";
}

}  // namespace mimdarts
