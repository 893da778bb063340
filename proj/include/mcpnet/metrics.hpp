#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpnet/pointset.hpp"

namespace mcpnet {

// Fraction of original (non-padded) points with the correct label.
double p_metric(const std::vector<int>& pred, const LabeledPointSet& truth);

struct ComponentCount {
  long correct = 0;
  long total = 0;
};

// A component is the set of original points sharing one ground-truth label
// within a sketch; it counts as correct when at least 75% of its points are
// predicted with that label. Counts are returned so callers can aggregate
// before dividing.
ComponentCount c_metric(const std::vector<int>& pred, const LabeledPointSet& truth);

struct CategoryScore {
  std::string category;
  long sketches = 0;
  long points = 0;           // original points evaluated
  long correct_points = 0;
  long components = 0;
  long correct_components = 0;

  double p() const { return points ? double(correct_points) / double(points) : 0.0; }
  double c() const { return components ? double(correct_components) / double(components) : 0.0; }
};

struct EvalReport {
  std::vector<CategoryScore> categories;
  double overall_p = 0.0;  // unweighted mean over categories
  double overall_c = 0.0;
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> confusion;  // truth x predicted
  long n_sketches = 0;
  long n_points = 0;
  long n_components = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

// Accumulates one sketch at a time; num_classes spans the joint label space.
class ReportBuilder {
 public:
  explicit ReportBuilder(int num_classes);

  void add(const std::string& category, const std::vector<int>& pred,
           const LabeledPointSet& truth);

  EvalReport finish() const;

 private:
  std::map<std::string, CategoryScore> scores_;
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> confusion_;
};

}  // namespace mcpnet
