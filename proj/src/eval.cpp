#include "pupguard/eval.hpp"

#include <limits>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

ConfusionMatrix confusion(std::span<const Verdict> verdicts,
                          const std::map<std::string, Label>& labels) {
  ConfusionMatrix cm;
  for (const auto& v : verdicts) {
    const auto it = labels.find(v.pair_id);
    if (it == labels.end() || it->second == Label::Unlabeled) {
      throw ProtocolError(fmt::format("confusion: pair '{}' has no label", v.pair_id));
    }
    const bool legit = it->second == Label::Legitimate;
    const bool normal = v.prediction == Prediction::Normal;
    if (legit) {
      (normal ? cm.tp : cm.fn) += 1;
    } else {
      (normal ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

std::map<std::string, Label> labels_of(const Dataset& ds) {
  std::map<std::string, Label> out;
  for (const auto& p : ds.pairs) out[p.pair_id] = p.label;
  return out;
}

std::optional<double> Ratio::value() const {
  if (!defined()) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Ratio::rounded(int scale, int decimals) const {
  if (!defined()) return "n/a";
  std::uint64_t factor = static_cast<std::uint64_t>(scale);
  for (int i = 0; i < decimals; ++i) factor *= 10;
  // floor(x + 1/2) with x = num * factor / den
  const unsigned __int128 scaled = static_cast<unsigned __int128>(num) * factor * 2 + den;
  const auto units = static_cast<std::uint64_t>(scaled / (static_cast<unsigned __int128>(den) * 2));
  std::uint64_t pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  if (decimals == 0) return fmt::format("{}", units);
  return fmt::format("{}.{:0{}}", units / pow10, units % pow10, decimals);
}

EvalReport metrics(const ConfusionMatrix& cm) {
  EvalReport r;
  r.cm = cm;
  r.accuracy = {cm.tp + cm.tn, cm.total()};
  r.fpr = {cm.fp, cm.fp + cm.tn};
  r.recall = {cm.tp, cm.tp + cm.fn};
  r.precision = {cm.tp, cm.tp + cm.fp};
  // With P and R defined, P + R = 0 iff tp = 0.
  if (r.precision.defined() && r.recall.defined() && cm.tp > 0) {
    r.f1 = {2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn};
  } else {
    r.f1 = {0, 0};
  }
  return r;
}

std::string report_text(const EvalReport& r) {
  return fmt::format(
      "TP={} FP={} TN={} FN={} (n={})\n"
      "accuracy  {}\n"
      "fpr       {}\n"
      "recall    {}\n"
      "precision {}\n"
      "f1        {}\n",
      r.cm.tp, r.cm.fp, r.cm.tn, r.cm.fn, r.cm.total(), r.accuracy_pct(), r.fpr_pct(),
      r.recall_pct(), r.precision_pct(), r.f1_text());
}

std::string report_csv(const EvalReport& r) {
  const auto v = [](const Ratio& ratio) {
    const auto x = ratio.value();
    return x ? fmt::format("{:.6f}", *x) : std::string("nan");
  };
  return fmt::format(
      "metric,value\ntp,{}\nfp,{}\ntn,{}\nfn,{}\naccuracy,{}\nfpr,{}\nrecall,{}\nprecision,{}\nf1,{}\n",
      r.cm.tp, r.cm.fp, r.cm.tn, r.cm.fn, v(r.accuracy), v(r.fpr), v(r.recall), v(r.precision),
      v(r.f1));
}

}  // namespace pupguard
