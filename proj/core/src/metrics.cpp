#include "mfm/metrics.hpp"

#include <algorithm>
#include <fstream>

#include "mfm/ops.hpp"

namespace mfm {

MetricsReport evaluate(const ClassifierNet& net, const ParamSet& params,
                       const Dataset& test, int64_t batch_size) {
  if (test.size() == 0) throw DataError("evaluate: empty test set");
  const int64_t c = net.num_classes();
  MetricsReport report;
  report.confusion.assign(static_cast<size_t>(c), std::vector<int64_t>(static_cast<size_t>(c), 0));
  report.total = test.size();

  NoGradGuard ng;
  for (int64_t start = 0; start < test.size(); start += batch_size) {
    const int64_t end = std::min<int64_t>(start + batch_size, test.size());
    std::vector<int64_t> rows(static_cast<size_t>(end - start));
    for (int64_t i = start; i < end; ++i) rows[static_cast<size_t>(i - start)] = i;
    Tensor logits = forward_plain(net, params, test.gather_batch(rows));
    const auto& lv = logits.data();
    for (int64_t i = 0; i < end - start; ++i) {
      const int64_t pred =
          argmax_row({lv.data() + i * c, static_cast<size_t>(c)});
      const int32_t truth = test.labels[static_cast<size_t>(start + i)];
      ++report.confusion[static_cast<size_t>(truth)][static_cast<size_t>(pred)];
    }
  }

  int64_t correct = 0;
  report.per_class_recall.assign(static_cast<size_t>(c), 0.0);
  report.predicted_histogram.assign(static_cast<size_t>(c), 0.0);
  for (int64_t k = 0; k < c; ++k) {
    int64_t row_sum = 0, col_sum = 0;
    for (int64_t j = 0; j < c; ++j) {
      row_sum += report.confusion[static_cast<size_t>(k)][static_cast<size_t>(j)];
      col_sum += report.confusion[static_cast<size_t>(j)][static_cast<size_t>(k)];
    }
    correct += report.confusion[static_cast<size_t>(k)][static_cast<size_t>(k)];
    report.per_class_recall[static_cast<size_t>(k)] =
        row_sum == 0 ? 0.0
                     : static_cast<double>(
                           report.confusion[static_cast<size_t>(k)][static_cast<size_t>(k)]) /
                           static_cast<double>(row_sum);
    report.predicted_histogram[static_cast<size_t>(k)] =
        static_cast<double>(col_sum) / static_cast<double>(report.total);
  }
  report.top1_error =
      1.0 - static_cast<double>(correct) / static_cast<double>(report.total);
  double recall_sum = 0.0;
  for (double r : report.per_class_recall) recall_sum += r;
  report.mean_recall = recall_sum / static_cast<double>(c);
  return report;
}

void write_report_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("report: cannot write " + path);
  char buf[64];
  auto emit = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << name << ',' << buf << '\n';
  };
  out << "metric,value\n";
  emit("top1_error", report.top1_error);
  emit("mean_recall", report.mean_recall);
  emit("total", static_cast<double>(report.total));
  for (size_t k = 0; k < report.per_class_recall.size(); ++k) {
    emit("recall_" + std::to_string(k), report.per_class_recall[k]);
  }
  for (size_t k = 0; k < report.predicted_histogram.size(); ++k) {
    emit("predicted_fraction_" + std::to_string(k), report.predicted_histogram[k]);
  }
  if (!out) throw IoError("report: write failed for " + path);
}

void write_confusion_csv(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("confusion: cannot write " + path);
  const size_t c = report.confusion.size();
  out << "true\\pred";
  for (size_t j = 0; j < c; ++j) out << ',' << j;
  out << '\n';
  for (size_t k = 0; k < c; ++k) {
    out << k;
    for (size_t j = 0; j < c; ++j) out << ',' << report.confusion[k][j];
    out << '\n';
  }
  if (!out) throw IoError("confusion: write failed for " + path);
}

}  // namespace mfm
