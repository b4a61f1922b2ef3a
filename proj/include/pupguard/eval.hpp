#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "pupguard/classify.hpp"
#include "pupguard/dataset.hpp"

namespace pupguard {

// Positive class is Legitimate: FP counts attacks accepted as normal.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws ProtocolError if a verdict has no label or an Unlabeled one.
ConfusionMatrix confusion(std::span<const Verdict> verdicts,
                          const std::map<std::string, Label>& labels);

std::map<std::string, Label> labels_of(const Dataset& ds);

// Exact rational metric value. Undefined when the denominator is zero.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const { return den != 0; }
  std::optional<double> value() const;
  // Half-up rounding to `decimals` places of (scale * num / den), computed in
  // integer arithmetic. "n/a" when undefined.
  std::string rounded(int scale, int decimals) const;
};

struct EvalReport {
  ConfusionMatrix cm;
  Ratio accuracy;
  Ratio fpr;
  Ratio recall;
  Ratio precision;
  Ratio f1;  // 2PR/(P+R) == 2tp / (2tp + fp + fn); undefined if P, R or P+R is 0

  std::string accuracy_pct() const { return accuracy.rounded(100, 2) + (accuracy.defined() ? "%" : ""); }
  std::string fpr_pct() const { return fpr.rounded(100, 2) + (fpr.defined() ? "%" : ""); }
  std::string recall_pct() const { return recall.rounded(100, 2) + (recall.defined() ? "%" : ""); }
  std::string precision_pct() const { return precision.rounded(100, 2) + (precision.defined() ? "%" : ""); }
  std::string f1_text() const { return f1.rounded(1, 2); }
};

EvalReport metrics(const ConfusionMatrix& cm);

// Human-readable multi-line report.
std::string report_text(const EvalReport& report);
// `metric,value` rows; undefined values are written as `nan`.
std::string report_csv(const EvalReport& report);

}  // namespace pupguard
