#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kcmp {

// Every scorer in the toolkit emits "higher means more likely a member".

struct ScoreEntry {
  std::string sample_id;
  double score = 0.0;
  std::optional<int> label;  // 1 member, 0 non-member
};

struct ScoreSet {
  std::string method;
  std::vector<ScoreEntry> entries;

  /// Throws InvalidInput on duplicate ids, non-finite scores or labels
  /// other than 0/1.
  void validate() const;

  /// Scores of labeled entries with the given label.
  std::vector<double> scores_with_label(int label) const;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1), FPR non-decreasing
  double auc = 0.0;
};

/// Mann-Whitney AUC with half credit for ties:
/// (#{p > n} + 0.5 #{p == n}) / (|pos| |neg|).
double auc(std::span<const double> positives, std::span<const double> negatives);

/// ROC by sweeping thresholds over the distinct scores in descending order.
/// All entries must be labeled and both classes present.
RocCurve roc_curve(const ScoreSet& scores);

double mean(std::span<const double> values);

}  // namespace kcmp
