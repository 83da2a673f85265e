#include "w2fair/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace w2fair {

namespace {

using nlohmann::json;

void require_arrays(std::span<const int> preds, std::span<const int> labels,
                    std::span<const int> groups, int num_classes,
                    const char* who) {
  if (num_classes < 1)
    throw std::invalid_argument(std::string(who) + ": num_classes must be >= 1");
  if (preds.size() != labels.size() ||
      (groups.data() != nullptr && groups.size() != labels.size()))
    throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (labels.empty())
    throw std::invalid_argument(std::string(who) + ": empty input");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > num_classes || preds[i] < 1 ||
        preds[i] > num_classes)
      throw std::invalid_argument(std::string(who) +
                                  ": class id outside [1, num_classes]");
    if (groups.data() != nullptr && groups[i] != 0 && groups[i] != 1)
      throw std::invalid_argument(std::string(who) + ": group outside {0, 1}");
  }
}

std::string format_double(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

GroupConfusion confusion_by_group(std::span<const int> preds,
                                  std::span<const int> labels,
                                  std::span<const int> groups,
                                  int num_classes) {
  require_arrays(preds, labels, groups, num_classes, "confusion_by_group");
  if (groups.data() == nullptr)
    throw std::invalid_argument("confusion_by_group: groups required");

  GroupConfusion out;
  out.num_classes = num_classes;
  const std::vector<double> zero_row(num_classes, 0.0);
  out.matrix0.assign(num_classes, zero_row);
  out.matrix1.assign(num_classes, zero_row);
  out.support0.assign(num_classes, 0);
  out.support1.assign(num_classes, 0);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int r = labels[i] - 1;
    const int c = preds[i] - 1;
    if (groups[i] == 0) {
      out.matrix0[r][c] += 1.0;
      ++out.support0[r];
    } else {
      out.matrix1[r][c] += 1.0;
      ++out.support1[r];
    }
  }
  for (int k = 0; k < num_classes; ++k) {
    if (out.support0[k] > 0)
      for (double& v : out.matrix0[k]) v /= static_cast<double>(out.support0[k]);
    if (out.support1[k] > 0)
      for (double& v : out.matrix1[k]) v /= static_cast<double>(out.support1[k]);
  }
  return out;
}

std::vector<std::optional<double>> tpr_gaps(const GroupConfusion& confusion) {
  std::vector<std::optional<double>> gaps(confusion.num_classes);
  for (int k = 0; k < confusion.num_classes; ++k)
    if (confusion.support0[k] > 0 && confusion.support1[k] > 0)
      gaps[k] = confusion.matrix1[k][k] - confusion.matrix0[k][k];
  return gaps;
}

Scores accuracy_f1(std::span<const int> preds, std::span<const int> labels,
                   int num_classes) {
  require_arrays(preds, labels, {}, num_classes, "accuracy_f1");
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (preds[i] == labels[i]) {
      ++correct;
      ++tp[labels[i] - 1];
    } else {
      ++fp[preds[i] - 1];
      ++fn[labels[i] - 1];
    }
  }
  Scores s;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  double macro_sum = 0.0, weighted_sum = 0.0;
  long present = 0;
  for (int k = 0; k < num_classes; ++k) {
    const long support = tp[k] + fn[k];
    if (support == 0) continue;
    ++present;
    const double p = tp[k] + fp[k] > 0
                         ? static_cast<double>(tp[k]) / (tp[k] + fp[k])
                         : 0.0;
    const double r = static_cast<double>(tp[k]) / support;
    const double f1 = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    macro_sum += f1;
    weighted_sum += f1 * static_cast<double>(support);
  }
  s.f1_macro = macro_sum / static_cast<double>(present);
  s.f1_weighted = weighted_sum / static_cast<double>(labels.size());
  return s;
}

AuditReport build_audit_report(std::span<const int> preds,
                               std::span<const int> labels,
                               std::span<const int> groups, int num_classes) {
  AuditReport report;
  report.num_classes = num_classes;
  report.confusion = confusion_by_group(preds, labels, groups, num_classes);
  report.tpr_gap = tpr_gaps(report.confusion);
  report.confusion_diff.assign(num_classes, std::vector<double>(num_classes));
  for (int i = 0; i < num_classes; ++i)
    for (int j = 0; j < num_classes; ++j)
      report.confusion_diff[i][j] =
          report.confusion.matrix1[i][j] - report.confusion.matrix0[i][j];
  report.scores = accuracy_f1(preds, labels, num_classes);
  return report;
}

ClassSelection select_classes(const AuditReport& report,
                              const SelectionRule& rule) {
  if (!(rule.tau >= 0.0) || rule.min_support < 0)
    throw std::invalid_argument("select_classes: invalid rule");
  struct Hit {
    int cls;
    double magnitude;
    bool supported;
  };
  std::vector<Hit> hits;
  for (int k = 0; k < report.num_classes; ++k) {
    const auto& gap = report.tpr_gap[k];
    if (!gap.has_value() || std::abs(*gap) <= rule.tau) continue;
    const bool supported = report.confusion.support0[k] >= rule.min_support &&
                           report.confusion.support1[k] >= rule.min_support;
    hits.push_back({k + 1, std::abs(*gap), supported});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.cls < b.cls;
  });
  ClassSelection sel;
  for (const Hit& h : hits)
    (h.supported ? sel.selected : sel.flagged_excluded).push_back(h.cls);
  return sel;
}

std::string audit_report_to_json(const AuditReport& report) {
  json doc;
  doc["format"] = "w2fair-audit";
  doc["version"] = 1;
  doc["num_classes"] = report.num_classes;
  doc["accuracy"] = report.scores.accuracy;
  doc["f1_macro"] = report.scores.f1_macro;
  doc["f1_weighted"] = report.scores.f1_weighted;
  doc["support"]["group0"] = report.confusion.support0;
  doc["support"]["group1"] = report.confusion.support1;
  doc["confusion"]["group0"] = report.confusion.matrix0;
  doc["confusion"]["group1"] = report.confusion.matrix1;
  doc["confusion_diff"] = report.confusion_diff;
  json gaps = json::array();
  for (const auto& g : report.tpr_gap) {
    if (g.has_value())
      gaps.push_back(*g);
    else
      gaps.push_back(nullptr);
  }
  doc["tpr_gap"] = std::move(gaps);
  return doc.dump(2) + "\n";
}

AuditReport audit_report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("audit report: bad JSON: ") + e.what());
  }
  if (doc.value("format", "") != "w2fair-audit" || doc.value("version", 0) != 1)
    throw std::runtime_error("audit report: unrecognized document");
  AuditReport report;
  report.num_classes = doc.at("num_classes").get<int>();
  report.scores.accuracy = doc.at("accuracy").get<double>();
  report.scores.f1_macro = doc.at("f1_macro").get<double>();
  report.scores.f1_weighted = doc.at("f1_weighted").get<double>();
  report.confusion.num_classes = report.num_classes;
  doc.at("support").at("group0").get_to(report.confusion.support0);
  doc.at("support").at("group1").get_to(report.confusion.support1);
  doc.at("confusion").at("group0").get_to(report.confusion.matrix0);
  doc.at("confusion").at("group1").get_to(report.confusion.matrix1);
  doc.at("confusion_diff").get_to(report.confusion_diff);
  for (const json& g : doc.at("tpr_gap"))
    report.tpr_gap.push_back(g.is_null() ? std::optional<double>{}
                                         : std::optional<double>{g.get<double>()});
  if (static_cast<int>(report.tpr_gap.size()) != report.num_classes ||
      static_cast<int>(report.confusion.matrix0.size()) != report.num_classes)
    throw std::runtime_error("audit report: shape mismatch");
  return report;
}

void save_audit_json(const AuditReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_audit_json: cannot open " + path);
  out << audit_report_to_json(report);
  if (!out) throw std::runtime_error("save_audit_json: write failed: " + path);
}

AuditReport load_audit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_audit_json: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return audit_report_from_json(text);
}

void save_audit_csv(const AuditReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_audit_csv: cannot open " + path);
  out << "class,support_group0,support_group1,tpr_group0,tpr_group1,tpr_gap\n";
  for (int k = 0; k < report.num_classes; ++k) {
    out << (k + 1) << "," << report.confusion.support0[k] << ","
        << report.confusion.support1[k] << ",";
    if (report.confusion.support0[k] > 0)
      out << format_double(report.confusion.matrix0[k][k]);
    out << ",";
    if (report.confusion.support1[k] > 0)
      out << format_double(report.confusion.matrix1[k][k]);
    out << ",";
    if (report.tpr_gap[k].has_value()) out << format_double(*report.tpr_gap[k]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_audit_csv: write failed: " + path);
}

}  // namespace w2fair
