#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace w2fair {

// Row-normalized confusion matrices stratified by group. Class ids are
// 1-based; matrix row k-1, column j-1 is the share of group members with
// true class k predicted as j. Rows of an empty (class, group) stratum are
// all zero and the stratum is undefined for rate comparisons.
struct GroupConfusion {
  int num_classes = 0;
  std::vector<std::vector<double>> matrix0;
  std::vector<std::vector<double>> matrix1;
  std::vector<long> support0;
  std::vector<long> support1;
};

GroupConfusion confusion_by_group(std::span<const int> preds,
                                  std::span<const int> labels,
                                  std::span<const int> groups, int num_classes);

// Per-class true-positive-rate gap, group 1 minus group 0 (the diagonal
// difference of the group confusion matrices). Undefined (nullopt) when
// either stratum is empty.
std::vector<std::optional<double>> tpr_gaps(const GroupConfusion& confusion);

struct Scores {
  double accuracy = 0.0;
  double f1_macro = 0.0;     // mean F1 over classes present in the labels
  double f1_weighted = 0.0;  // support-weighted mean F1
};

// Precision and recall use the 0-when-undefined convention, so F1 of a class
// that is never predicted is 0.
Scores accuracy_f1(std::span<const int> preds, std::span<const int> labels,
                   int num_classes);

struct AuditReport {
  int num_classes = 0;
  GroupConfusion confusion;
  std::vector<std::vector<double>> confusion_diff;  // matrix1 - matrix0
  std::vector<std::optional<double>> tpr_gap;
  Scores scores;
};

AuditReport build_audit_report(std::span<const int> preds,
                               std::span<const int> labels,
                               std::span<const int> groups, int num_classes);

struct SelectionRule {
  double tau = 0.1;
  long min_support = 100;
};

// Classes whose defined |gap| exceeds tau, split by the support floor:
// both strata at or above min_support -> selected, otherwise flagged but
// excluded. Both lists are ordered by |gap| descending (ties by class id).
struct ClassSelection {
  std::vector<int> selected;
  std::vector<int> flagged_excluded;
};

ClassSelection select_classes(const AuditReport& report,
                              const SelectionRule& rule);

// JSON document (schema in README); byte-stable for identical reports.
std::string audit_report_to_json(const AuditReport& report);
AuditReport audit_report_from_json(const std::string& text);
void save_audit_json(const AuditReport& report, const std::string& path);
AuditReport load_audit_json(const std::string& path);

// Per-class CSV: class, support and TPR per group, gap (empty if undefined).
void save_audit_csv(const AuditReport& report, const std::string& path);

}  // namespace w2fair
