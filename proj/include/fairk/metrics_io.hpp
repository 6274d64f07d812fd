#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "fairk/training.hpp"

namespace fairk {

// Streams per-round records as JSON lines and keeps a buffered copy for
// the closing summary. Wall time stays out of the JSONL stream so repeat
// runs of one config produce identical bytes; the summary carries it.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& out_dir,
                         std::size_t flush_every = 10);
  ~MetricsWriter();

  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void append(const RoundMetrics& m);

  // Flushes the line stream and writes summary.csv; runs at most once and
  // is also triggered by the destructor so aborted runs keep their rows.
  void finalize();

  const std::string& jsonl_path() const { return jsonl_path_; }
  const std::string& summary_path() const { return summary_path_; }

 private:
  std::string jsonl_path_;
  std::string summary_path_;
  std::ofstream jsonl_;
  std::vector<RoundMetrics> rows_;
  std::size_t flush_every_;
  std::size_t since_flush_ = 0;
  bool finalized_ = false;
};

std::string metrics_to_json_line(const RoundMetrics& m);
RoundMetrics metrics_from_json_line(const std::string& line);
std::vector<RoundMetrics> read_metrics_jsonl(const std::string& path);

}  // namespace fairk
