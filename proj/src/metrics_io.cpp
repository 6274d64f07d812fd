#include "fairk/metrics_io.hpp"

#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fairk {

MetricsWriter::MetricsWriter(const std::string& out_dir,
                             std::size_t flush_every)
    : flush_every_(flush_every == 0 ? 1 : flush_every) {
  std::filesystem::create_directories(out_dir);
  jsonl_path_ = out_dir + "/metrics.jsonl";
  summary_path_ = out_dir + "/summary.csv";
  jsonl_.open(jsonl_path_, std::ios::trunc);
  if (!jsonl_) {
    throw std::runtime_error("cannot open for writing: " + jsonl_path_);
  }
}

MetricsWriter::~MetricsWriter() {
  try {
    finalize();
  } catch (...) {
    // Destructor path: the run is already unwinding, keep what we have.
  }
}

void MetricsWriter::append(const RoundMetrics& m) {
  jsonl_ << metrics_to_json_line(m) << '\n';
  if (!jsonl_) {
    throw std::runtime_error("write failed: " + jsonl_path_);
  }
  if (++since_flush_ >= flush_every_) {
    jsonl_.flush();
    since_flush_ = 0;
  }
  rows_.push_back(m);
}

void MetricsWriter::finalize() {
  if (finalized_) return;
  finalized_ = true;
  jsonl_.flush();
  jsonl_.close();

  std::ofstream csv(summary_path_, std::ios::trunc);
  if (!csv) {
    throw std::runtime_error("cannot open for writing: " + summary_path_);
  }
  csv << "round,train_loss,test_accuracy,avg_aou,max_aou,grad_sq_norm,"
         "wall_time\n";
  csv << std::setprecision(17);
  for (const auto& m : rows_) {
    csv << m.round << ',' << m.train_loss << ',' << m.test_accuracy << ','
        << m.avg_aou << ',' << m.max_aou << ',' << m.grad_sq_norm << ','
        << m.wall_time << '\n';
  }
  if (!csv) {
    throw std::runtime_error("write failed: " + summary_path_);
  }
}

std::string metrics_to_json_line(const RoundMetrics& m) {
  nlohmann::json j;
  j["round"] = m.round;
  j["train_loss"] = m.train_loss;
  j["test_accuracy"] = m.test_accuracy;
  j["avg_aou"] = m.avg_aou;
  j["max_aou"] = m.max_aou;
  j["grad_sq_norm"] = m.grad_sq_norm;
  j["participation"] = m.participation;
  return j.dump();
}

RoundMetrics metrics_from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  RoundMetrics m;
  m.round = j.at("round").get<std::size_t>();
  m.train_loss = j.at("train_loss").get<double>();
  m.test_accuracy = j.at("test_accuracy").get<double>();
  m.avg_aou = j.at("avg_aou").get<double>();
  m.max_aou = j.at("max_aou").get<std::int64_t>();
  m.grad_sq_norm = j.at("grad_sq_norm").get<double>();
  m.participation = j.at("participation").get<std::vector<std::uint64_t>>();
  return m;
}

std::vector<RoundMetrics> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<RoundMetrics> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(metrics_from_json_line(line));
  }
  return rows;
}

}  // namespace fairk
