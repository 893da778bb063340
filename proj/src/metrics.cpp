#include "mcpnet/metrics.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include "mcpnet/common.hpp"

namespace mcpnet {

namespace {

void check_lengths(const std::vector<int>& pred, const LabeledPointSet& truth) {
  if (static_cast<Index>(pred.size()) != truth.base.size() ||
      truth.labels.size() != pred.size())
    throw LengthMismatch("prediction length " + std::to_string(pred.size()) +
                         " does not match point set of " + std::to_string(truth.base.size()));
}

}  // namespace

double p_metric(const std::vector<int>& pred, const LabeledPointSet& truth) {
  check_lengths(pred, truth);
  const auto n = static_cast<std::size_t>(truth.base.n_original);
  long correct = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (pred[i] == truth.labels[i]) ++correct;
  return double(correct) / double(n);
}

ComponentCount c_metric(const std::vector<int>& pred, const LabeledPointSet& truth) {
  check_lengths(pred, truth);
  const auto n = static_cast<std::size_t>(truth.base.n_original);

  std::map<int, std::pair<long, long>> by_label;  // label -> (size, correct)
  for (std::size_t i = 0; i < n; ++i) {
    auto& entry = by_label[truth.labels[i]];
    ++entry.first;
    if (pred[i] == truth.labels[i]) ++entry.second;
  }

  ComponentCount out;
  for (const auto& [label, entry] : by_label) {
    ++out.total;
    // Inclusive threshold: exactly 75% counts as correct.
    if (4 * entry.second >= 3 * entry.first) ++out.correct;
  }
  return out;
}

ReportBuilder::ReportBuilder(int num_classes)
    : confusion_(Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_classes,
                                                                           num_classes)) {}

void ReportBuilder::add(const std::string& category, const std::vector<int>& pred,
                        const LabeledPointSet& truth) {
  check_lengths(pred, truth);
  CategoryScore& score = scores_[category];
  score.category = category;
  ++score.sketches;

  const auto n = static_cast<std::size_t>(truth.base.n_original);
  for (std::size_t i = 0; i < n; ++i) {
    ++score.points;
    if (pred[i] == truth.labels[i]) ++score.correct_points;
    confusion_(truth.labels[i], pred[i]) += 1;
  }

  const ComponentCount cc = c_metric(pred, truth);
  score.components += cc.total;
  score.correct_components += cc.correct;
}

EvalReport ReportBuilder::finish() const {
  if (scores_.empty()) throw EmptyDataset("no sketches were added to the report");

  EvalReport report;
  report.confusion = confusion_;
  for (const auto& [name, score] : scores_) {
    report.categories.push_back(score);
    report.overall_p += score.p();
    report.overall_c += score.c();
    report.n_sketches += score.sketches;
    report.n_points += score.points;
    report.n_components += score.components;
  }
  report.overall_p /= double(report.categories.size());
  report.overall_c /= double(report.categories.size());
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(14) << "category" << std::right << std::setw(10) << "P-metric"
     << std::setw(10) << "C-metric" << std::setw(10) << "sketches" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const CategoryScore& s : categories) {
    os << std::left << std::setw(14) << s.category << std::right << std::setw(10) << s.p()
       << std::setw(10) << s.c() << std::setw(10) << s.sketches << '\n';
  }
  os << std::left << std::setw(14) << "Average" << std::right << std::setw(10) << overall_p
     << std::setw(10) << overall_c << std::setw(10) << n_sketches << '\n';
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "category,p_metric,c_metric,sketches,points,components\n";
  os << std::setprecision(10);
  for (const CategoryScore& s : categories) {
    os << s.category << ',' << s.p() << ',' << s.c() << ',' << s.sketches << ',' << s.points
       << ',' << s.components << '\n';
  }
  os << "Average," << overall_p << ',' << overall_c << ',' << n_sketches << ',' << n_points << ','
     << n_components << '\n';
  return os.str();
}

}  // namespace mcpnet
