#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfm/data.hpp"
#include "mfm/net.hpp"

namespace mfm {

struct MetricsReport {
  double top1_error = 0.0;
  std::vector<double> per_class_recall;
  double mean_recall = 0.0;
  std::vector<std::vector<int64_t>> confusion;  // rows true, cols predicted
  std::vector<double> predicted_histogram;      // fraction predicted per class
  int64_t total = 0;
};

// Plain (unmodulated) inference; argmax ties break to the lowest class index.
MetricsReport evaluate(const ClassifierNet& net, const ParamSet& params,
                       const Dataset& test, int64_t batch_size = 256);

// report.csv: metric,value rows. confusion.csv: square count matrix.
void write_report_csv(const std::string& path, const MetricsReport& report);
void write_confusion_csv(const std::string& path, const MetricsReport& report);

}  // namespace mfm
