#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "phantomqa/labels.hpp"

namespace phantomqa {

// Confusion-matrix metrics in exact integer arithmetic. Rationals are kept
// unreduced (counts never overflow 64 bits at any realistic scale) and only
// rounded at the presentation step.

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool undefined = false;  // zero denominator; value reported as 0

  double value() const { return undefined ? 0.0 : static_cast<double>(num) / den; }
};

// Round to two decimals half up and return hundredths (0.569 -> 57).
int round2_hundredths(const Rational& r);
std::string format2(const Rational& r);  // "0.57"

struct ConfusionMatrix {
  // m[truth][predicted], canonical class order.
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> m{};

  void add(SliceLabel truth, SliceLabel pred, std::int64_t n = 1) {
    m[static_cast<std::size_t>(static_cast<int>(truth))]
     [static_cast<std::size_t>(static_cast<int>(pred))] += n;
  }
  std::int64_t row_sum(int k) const;
  std::int64_t col_sum(int k) const;
  std::int64_t trace() const;
  std::int64_t total() const;
};

struct ClassMetrics {
  Rational precision;  // m[k][k] / col_sum(k)
  Rational recall;     // m[k][k] / row_sum(k)
  Rational f1;         // 2*m[k][k] / (row_sum(k) + col_sum(k))
};

struct EvalReport {
  ConfusionMatrix cm;
  std::array<ClassMetrics, kNumClasses> per_class;
  Rational accuracy;           // trace / total
  Rational weighted_accuracy;  // support-weighted recall; equals accuracy
};

EvalReport metrics_from_confusion(const ConfusionMatrix& cm);

// Plain text table: one row per class plus the accuracy line.
std::string render_report(const EvalReport& report);

}  // namespace phantomqa
