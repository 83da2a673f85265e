#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "testutil.hpp"
#include "w2fair/audit.hpp"
#include "w2fair/rng.hpp"

using namespace w2fair;

namespace {

struct Sample {
  std::vector<int> preds, labels, groups;
};

Sample random_sample(Rng& rng, int n, int num_classes) {
  Sample s;
  s.preds.reserve(n);
  s.labels.reserve(n);
  s.groups.reserve(n);
  for (int i = 0; i < n; ++i) {
    s.preds.push_back(1 + static_cast<int>(rng.next_u64() % num_classes));
    s.labels.push_back(1 + static_cast<int>(rng.next_u64() % num_classes));
    s.groups.push_back(static_cast<int>(rng.next_u64() % 2));
  }
  return s;
}

}  // namespace

TEST_CASE("accuracy and F1 match hand-computed values") {
  // labels {1,2,3,3}, preds {1,2,2,2}: classes 1 and 2 each have one true
  // positive; class 2 has two false positives (precision 1/3, recall 1,
  // F1 1/2); class 3 is never predicted (F1 0).
  const std::vector<int> labels = {1, 2, 3, 3};
  const std::vector<int> preds = {1, 2, 2, 2};
  const Scores s = accuracy_f1(preds, labels, 3);
  CHECK(s.accuracy == doctest::Approx(0.5));
  CHECK(s.f1_macro == doctest::Approx(0.5));       // (1 + 0.5 + 0) / 3
  CHECK(s.f1_weighted == doctest::Approx(0.375));  // (1*1 + 1*0.5 + 2*0) / 4
}

TEST_CASE("perfect predictor yields identity confusion rows and zero gaps") {
  std::vector<int> labels, preds, groups;
  for (int c = 1; c <= 4; ++c)
    for (int g = 0; g <= 1; ++g)
      for (int r = 0; r < 3; ++r) {
        labels.push_back(c);
        preds.push_back(c);
        groups.push_back(g);
      }
  const AuditReport rep = build_audit_report(preds, labels, groups, 4);
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) {
      const double want = (k == j) ? 1.0 : 0.0;
      CHECK(rep.confusion.matrix0[k][j] == want);
      CHECK(rep.confusion.matrix1[k][j] == want);
      CHECK(rep.confusion_diff[k][j] == 0.0);
    }
    REQUIRE(rep.tpr_gap[k].has_value());
    CHECK(*rep.tpr_gap[k] == 0.0);
  }
  CHECK(rep.scores.accuracy == 1.0);
  CHECK(rep.scores.f1_macro == 1.0);
}

TEST_CASE("single example fills exactly one confusion cell") {
  const std::vector<int> labels = {2}, preds = {3}, groups = {0};
  const GroupConfusion c = confusion_by_group(preds, labels, groups, 3);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      CHECK(c.matrix0[k][j] == ((k == 1 && j == 2) ? 1.0 : 0.0));
      CHECK(c.matrix1[k][j] == 0.0);
    }
  CHECK(c.support0 == std::vector<long>{0, 1, 0});
  CHECK(c.support1 == std::vector<long>{0, 0, 0});
}

TEST_CASE("strata with no members leave the gap undefined") {
  // class 2 never appears for group 1
  const std::vector<int> labels = {1, 1, 2, 2};
  const std::vector<int> preds = {1, 1, 2, 1};
  const std::vector<int> groups = {0, 1, 0, 0};
  const AuditReport rep = build_audit_report(preds, labels, groups, 2);
  REQUIRE(rep.tpr_gap.size() == 2);
  CHECK(rep.tpr_gap[0].has_value());
  CHECK(!rep.tpr_gap[1].has_value());
}

TEST_CASE("selection picks classes above tau and orders by gap magnitude") {
  // Build a sample whose gaps are approximately {0.25, -0.12, 0.05}: per
  // class, 20 members per group; group-1 TPR minus group-0 TPR set by counts.
  auto add = [](Sample& s, int cls, int group, int hits, int total) {
    for (int i = 0; i < total; ++i) {
      s.labels.push_back(cls);
      s.preds.push_back(i < hits ? cls : (cls % 3) + 1);
      s.groups.push_back(group);
    }
  };
  Sample s;
  add(s, 1, 0, 10, 20);  // TPR 0.50
  add(s, 1, 1, 15, 20);  // TPR 0.75 -> gap +0.25
  add(s, 2, 0, 22, 25);  // TPR 0.88
  add(s, 2, 1, 19, 25);  // TPR 0.76 -> gap -0.12
  add(s, 3, 0, 10, 20);  // TPR 0.50
  add(s, 3, 1, 11, 20);  // TPR 0.55 -> gap +0.05
  const AuditReport rep = build_audit_report(s.preds, s.labels, s.groups, 3);
  REQUIRE(rep.tpr_gap[0].has_value());
  REQUIRE(rep.tpr_gap[1].has_value());
  REQUIRE(rep.tpr_gap[2].has_value());
  CHECK(*rep.tpr_gap[0] == doctest::Approx(0.25));
  CHECK(*rep.tpr_gap[1] == doctest::Approx(-0.12));
  CHECK(*rep.tpr_gap[2] == doctest::Approx(0.05));

  const ClassSelection sel = select_classes(rep, {0.1, 10});
  CHECK(sel.selected == std::vector<int>{1, 2});  // |0.25| then |-0.12|
  CHECK(sel.flagged_excluded.empty());

  // Raising min_support above the class-1 strata size moves it to flagged.
  const ClassSelection strict = select_classes(rep, {0.1, 21});
  CHECK(strict.selected == std::vector<int>{2});
  CHECK(strict.flagged_excluded == std::vector<int>{1});

  // tau at/above the largest |gap| selects nothing (strict inequality).
  const ClassSelection none = select_classes(rep, {0.25, 10});
  CHECK(none.selected.empty());
  CHECK(none.flagged_excluded.empty());
}

TEST_CASE("selection treats an exactly-tau gap as not exceeding") {
  Sample s;
  for (int g = 0; g <= 1; ++g)
    for (int i = 0; i < 10; ++i) {
      s.labels.push_back(1);
      s.preds.push_back((g == 1 || i < 9) ? 1 : 2);  // TPR 0.9 vs 1.0
      s.groups.push_back(g);
    }
  const AuditReport rep = build_audit_report(s.preds, s.labels, s.groups, 2);
  REQUIRE(rep.tpr_gap[0].has_value());
  CHECK(*rep.tpr_gap[0] == doctest::Approx(0.1));
  const ClassSelection at = select_classes(rep, {0.1 - 1e-9, 1});
  CHECK(at.selected == std::vector<int>{1});
  const ClassSelection above = select_classes(rep, {*rep.tpr_gap[0], 1});
  CHECK(above.selected.empty());
}

TEST_CASE("audit invariants hold on random inputs") {
  Rng rng(20240817);
  for (int rep_i = 0; rep_i < 1000; ++rep_i) {
    const int num_classes = 2 + static_cast<int>(rng.next_u64() % 5);
    const int n = 1 + static_cast<int>(rng.next_u64() % 200);
    Sample s = random_sample(rng, n, num_classes);
    const AuditReport rep =
        build_audit_report(s.preds, s.labels, s.groups, num_classes);

    // Rows of each non-empty stratum sum to 1 (empty strata to 0).
    for (int k = 0; k < num_classes; ++k) {
      double sum0 = 0.0, sum1 = 0.0;
      for (int j = 0; j < num_classes; ++j) {
        sum0 += rep.confusion.matrix0[k][j];
        sum1 += rep.confusion.matrix1[k][j];
      }
      CHECK(sum0 == doctest::Approx(rep.confusion.support0[k] > 0 ? 1.0 : 0.0)
                        .epsilon(1e-12));
      CHECK(sum1 == doctest::Approx(rep.confusion.support1[k] > 0 ? 1.0 : 0.0)
                        .epsilon(1e-12));
    }

    // The reported gap is the diagonal difference, to 1e-9.
    for (int k = 0; k < num_classes; ++k) {
      const bool defined =
          rep.confusion.support0[k] > 0 && rep.confusion.support1[k] > 0;
      REQUIRE(rep.tpr_gap[k].has_value() == defined);
      if (defined) {
        const double diag =
            rep.confusion.matrix1[k][k] - rep.confusion.matrix0[k][k];
        CHECK(std::abs(*rep.tpr_gap[k] - diag) <= 1e-9);
      }
      // confusion_diff is matrix1 - matrix0 entrywise.
      for (int j = 0; j < num_classes; ++j)
        CHECK(rep.confusion_diff[k][j] ==
              rep.confusion.matrix1[k][j] - rep.confusion.matrix0[k][j]);
    }

    // Swapping the group labels negates every defined gap exactly.
    std::vector<int> swapped(s.groups);
    for (int& g : swapped) g = 1 - g;
    const AuditReport srep =
        build_audit_report(s.preds, s.labels, swapped, num_classes);
    for (int k = 0; k < num_classes; ++k) {
      REQUIRE(srep.tpr_gap[k].has_value() == rep.tpr_gap[k].has_value());
      if (rep.tpr_gap[k].has_value())
        CHECK(*srep.tpr_gap[k] == -*rep.tpr_gap[k]);
    }

    // Reordering the examples changes nothing.
    if (n > 1) {
      std::vector<std::size_t> perm(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_u64() % i]);
      Sample p;
      for (std::size_t idx : perm) {
        p.preds.push_back(s.preds[idx]);
        p.labels.push_back(s.labels[idx]);
        p.groups.push_back(s.groups[idx]);
      }
      const AuditReport prep =
          build_audit_report(p.preds, p.labels, p.groups, num_classes);
      CHECK(prep.confusion.matrix0 == rep.confusion.matrix0);
      CHECK(prep.confusion.matrix1 == rep.confusion.matrix1);
      CHECK(prep.scores.accuracy == rep.scores.accuracy);
    }
  }
}

TEST_CASE("raising tau never grows the selected set") {
  Rng rng(7);
  for (int rep_i = 0; rep_i < 50; ++rep_i) {
    const Sample s = random_sample(rng, 120, 4);
    const AuditReport rep = build_audit_report(s.preds, s.labels, s.groups, 4);
    std::vector<int> prev_sel;
    bool first = true;
    for (double tau : {0.0, 0.05, 0.1, 0.2, 0.5, 1.0}) {
      ClassSelection sel = select_classes(rep, {tau, 1});
      std::vector<int> cur(sel.selected);
      std::sort(cur.begin(), cur.end());
      if (!first) {
        // cur must be a subset of prev_sel
        for (int c : cur)
          CHECK(std::find(prev_sel.begin(), prev_sel.end(), c) !=
                prev_sel.end());
        CHECK(cur.size() <= prev_sel.size());
      }
      prev_sel = cur;
      first = false;
    }
  }
}

TEST_CASE("audit report JSON round-trips exactly") {
  Rng rng(99);
  const Sample s = random_sample(rng, 150, 3);
  const AuditReport rep = build_audit_report(s.preds, s.labels, s.groups, 3);
  const std::string text = audit_report_to_json(rep);
  const AuditReport back = audit_report_from_json(text);
  CHECK(back.num_classes == rep.num_classes);
  CHECK(back.confusion.matrix0 == rep.confusion.matrix0);
  CHECK(back.confusion.matrix1 == rep.confusion.matrix1);
  CHECK(back.confusion.support0 == rep.confusion.support0);
  CHECK(back.confusion.support1 == rep.confusion.support1);
  CHECK(back.confusion_diff == rep.confusion_diff);
  REQUIRE(back.tpr_gap.size() == rep.tpr_gap.size());
  for (std::size_t k = 0; k < rep.tpr_gap.size(); ++k) {
    REQUIRE(back.tpr_gap[k].has_value() == rep.tpr_gap[k].has_value());
    if (rep.tpr_gap[k]) CHECK(*back.tpr_gap[k] == *rep.tpr_gap[k]);
  }
  CHECK(back.scores.accuracy == rep.scores.accuracy);
  CHECK(back.scores.f1_macro == rep.scores.f1_macro);
  CHECK(back.scores.f1_weighted == rep.scores.f1_weighted);
  // Serialization is byte-stable.
  CHECK(audit_report_to_json(back) == text);
}

TEST_CASE("audit files are written where asked") {
  testutil::TempDir tmp;
  Rng rng(5);
  const Sample s = random_sample(rng, 80, 3);
  const AuditReport rep = build_audit_report(s.preds, s.labels, s.groups, 3);

  const std::string jpath = tmp.file("audit.json");
  save_audit_json(rep, jpath);
  const AuditReport back = load_audit_json(jpath);
  CHECK(audit_report_to_json(back) == audit_report_to_json(rep));

  const std::string cpath = tmp.file("audit.csv");
  save_audit_csv(rep, cpath);
  std::ifstream in(cpath);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header ==
        "class,support_group0,support_group1,tpr_group0,tpr_group1,tpr_gap");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("audit rejects malformed inputs") {
  const std::vector<int> ok = {1, 2};
  const std::vector<int> groups = {0, 1};
  CHECK_THROWS_AS(build_audit_report(ok, ok, std::vector<int>{0}, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      build_audit_report(std::vector<int>{1, 3}, ok, groups, 2),
      std::invalid_argument);
  CHECK_THROWS_AS(
      build_audit_report(ok, std::vector<int>{0, 2}, groups, 2),
      std::invalid_argument);
  CHECK_THROWS_AS(
      build_audit_report(ok, ok, std::vector<int>{0, 2}, 2),
      std::invalid_argument);
  CHECK_THROWS_AS(build_audit_report(ok, ok, groups, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(select_classes(AuditReport{}, {-0.1, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(audit_report_from_json("{"), std::runtime_error);
}
