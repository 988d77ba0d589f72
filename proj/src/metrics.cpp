#include "phantomqa/metrics.hpp"

#include <sstream>

namespace phantomqa {

namespace {

Rational ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return {0, 1, true};
  return {num, den, false};
}

}  // namespace

int round2_hundredths(const Rational& r) {
  if (r.undefined) return 0;
  return static_cast<int>((200 * r.num + r.den) / (2 * r.den));
}

std::string format2(const Rational& r) {
  const int h = round2_hundredths(r);
  std::ostringstream os;
  os << h / 100 << '.' << (h % 100 < 10 ? "0" : "") << h % 100;
  return os.str();
}

std::int64_t ConfusionMatrix::row_sum(int k) const {
  std::int64_t s = 0;
  for (int j = 0; j < kNumClasses; ++j) s += m[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int k) const {
  std::int64_t s = 0;
  for (int i = 0; i < kNumClasses; ++i) s += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (int i = 0; i < kNumClasses; ++i) s += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (int i = 0; i < kNumClasses; ++i) s += row_sum(i);
  return s;
}

EvalReport metrics_from_confusion(const ConfusionMatrix& cm) {
  EvalReport r;
  r.cm = cm;
  for (int k = 0; k < kNumClasses; ++k) {
    const std::int64_t d = cm.m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    const std::int64_t rs = cm.row_sum(k), cs = cm.col_sum(k);
    r.per_class[static_cast<std::size_t>(k)] = {ratio(d, cs), ratio(d, rs),
                                                ratio(2 * d, rs + cs)};
  }
  r.accuracy = ratio(cm.trace(), cm.total());
  // Support-weighted recall collapses algebraically to plain accuracy:
  // sum_k (row_k/total) * (d_k/row_k) = trace/total.
  r.weighted_accuracy = r.accuracy;
  return r;
}

std::string render_report(const EvalReport& report) {
  std::ostringstream os;
  os << "class  precision  recall  f1\n";
  for (int k = 0; k < kNumClasses; ++k) {
    const ClassMetrics& c = report.per_class[static_cast<std::size_t>(k)];
    os << kClassNames[static_cast<std::size_t>(k)] << "    " << format2(c.precision)
       << (c.precision.undefined ? "*" : " ") << "     " << format2(c.recall)
       << (c.recall.undefined ? "*" : " ") << "   " << format2(c.f1)
       << (c.f1.undefined ? "*" : "") << "\n";
  }
  os << "accuracy " << format2(report.accuracy) << " (weighted " << format2(report.weighted_accuracy)
     << ")\n";
  std::int64_t starred = 0;
  for (const auto& c : report.per_class) {
    starred += (c.precision.undefined ? 1 : 0) + (c.recall.undefined ? 1 : 0) +
               (c.f1.undefined ? 1 : 0);
  }
  if (starred > 0) os << "* zero denominator, reported as 0\n";
  return os.str();
}

}  // namespace phantomqa
