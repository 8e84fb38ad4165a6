#include "redace/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "redace/errors.hpp"
#include "redace/random.hpp"
#include "redace/train.hpp"

namespace redace {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DataError(fmt::format("prediction has {} entries but gold has {}", a, b));
  }
}

void add_word_counts(const LabelSequence& pred, const LabelSequence& gold, std::size_t& tp,
                     std::size_t& fp, std::size_t& fn) {
  require_same_length(pred.size(), gold.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = is_error(pred[i]);
    bool g = is_error(gold[i]);
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
}

void add_span_counts(const LabelSequence& pred, const LabelSequence& gold, std::size_t& tp,
                     std::size_t& fp, std::size_t& fn) {
  require_same_length(pred.size(), gold.size());
  const auto ps = extract_spans(pred);
  const auto gs = extract_spans(gold);
  // Both lists are sorted by start and spans within one list never overlap.
  std::size_t matched = 0;
  std::size_t j = 0;
  for (const Span& s : ps) {
    while (j < gs.size() && gs[j].start < s.start) ++j;
    if (j < gs.size() && gs[j] == s) ++matched;
  }
  tp += matched;
  fp += ps.size() - matched;
  fn += gs.size() - matched;
}

}  // namespace

double harmonic_f1(double precision, double recall) {
  double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

PRF PRF::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = harmonic_f1(r.precision, r.recall);
  return r;
}

PRF word_prf(const LabelSequence& pred, const LabelSequence& gold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  add_word_counts(pred, gold, tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

PRF word_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold) {
  require_same_length(pred.size(), gold.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) add_word_counts(pred[i], gold[i], tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

PRF span_prf(const LabelSequence& pred, const LabelSequence& gold) {
  std::size_t tp = 0, fp = 0, fn = 0;
  add_span_counts(pred, gold, tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

PRF span_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold) {
  require_same_length(pred.size(), gold.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) add_span_counts(pred[i], gold[i], tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

TuningCurve tune_threshold(std::span<const double> grid, const ParameterizedDetector& detector,
                           std::span<const LabelSequence> dev_gold) {
  if (grid.empty()) throw ConfigError("tuning grid is empty");
  if (dev_gold.empty()) throw DataError("dev set is empty");
  TuningCurve curve;
  curve.grid.assign(grid.begin(), grid.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto pred = detector(grid[i]);
    const double f1 = word_prf(pred, dev_gold).f1;
    curve.f1.push_back(f1);
    if (f1 > curve.f1[curve.selected_index]) curve.selected_index = i;
  }
  return curve;
}

std::vector<double> threshold_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 101; ++i) g.push_back(static_cast<double>(i) / 100.0);
  return g;
}

std::vector<double> k_grid(std::size_t vocab_size, std::size_t points) {
  std::vector<double> g;
  if (vocab_size == 0) return g;
  points = std::max<std::size_t>(points, 2);
  const double log_max = std::log(static_cast<double>(vocab_size));
  for (std::size_t i = 0; i < points; ++i) {
    double v = std::round(std::exp(log_max * static_cast<double>(i) /
                                   static_cast<double>(points - 1)));
    v = std::clamp(v, 1.0, static_cast<double>(vocab_size));
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

double brier(std::span<const double> confidences, std::span<const Label> gold) {
  require_same_length(confidences.size(), gold.size());
  if (confidences.empty()) throw DataError("brier score of an empty set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw RangeError(fmt::format("confidence {} outside [0,1]", c));
    double y = is_error(gold[i]) ? 0.0 : 1.0;
    sum += (c - y) * (c - y);
  }
  return sum / static_cast<double>(confidences.size());
}

double f1_delta_pct(double f1_b, double f1_a) {
  if (f1_a == 0.0) throw DataError("relative F1 change against a zero baseline is undefined");
  return 100.0 * (f1_b - f1_a) / f1_a;
}

double students_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

SignificanceResult significance_test(const LabelSequence& pred_a, const LabelSequence& pred_b,
                                     const LabelSequence& gold, std::size_t n_subsets,
                                     std::uint64_t seed) {
  require_same_length(pred_a.size(), gold.size());
  require_same_length(pred_b.size(), gold.size());
  if (n_subsets < 2) throw ConfigError("significance test needs at least 2 subsets");
  if (gold.size() < n_subsets) {
    throw DataError(fmt::format("{} words cannot fill {} subsets", gold.size(), n_subsets));
  }
  std::vector<std::size_t> order(gold.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 400));
  rng.shuffle(order);

  SignificanceResult res;
  const std::size_t base = gold.size() / n_subsets;
  const std::size_t extra = gold.size() % n_subsets;
  std::size_t pos = 0;
  std::vector<double> deltas;
  for (std::size_t s = 0; s < n_subsets; ++s) {
    const std::size_t size = base + (s < extra ? 1 : 0);
    LabelSequence a, b, g;
    for (std::size_t i = pos; i < pos + size; ++i) {
      a.push_back(pred_a[order[i]]);
      b.push_back(pred_b[order[i]]);
      g.push_back(gold[order[i]]);
    }
    pos += size;
    if (std::none_of(g.begin(), g.end(), is_error)) ++res.zero_error_subsets;
    res.subset_sizes.push_back(size);
    res.f1_a.push_back(word_prf(a, g).f1);
    res.f1_b.push_back(word_prf(b, g).f1);
    deltas.push_back(res.f1_b.back() - res.f1_a.back());
  }

  const auto n = static_cast<double>(n_subsets);
  res.df = n_subsets - 1;
  res.mean_delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : deltas) ss += (d - res.mean_delta) * (d - res.mean_delta);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    res.t_statistic = res.mean_delta == 0.0
                          ? 0.0
                          : std::copysign(std::numeric_limits<double>::infinity(), res.mean_delta);
  } else {
    res.t_statistic = res.mean_delta / (sd / std::sqrt(n));
  }
  res.p_value = students_t_two_sided_p(res.t_statistic, static_cast<double>(res.df));
  res.significant = res.p_value < 0.05;
  return res;
}

LabelSequence flatten(std::span<const LabelSequence> seqs) {
  LabelSequence out;
  for (const auto& s : seqs) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string curve_csv(const TuningCurve& curve) {
  std::string out = "param,f1\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    out += fmt::format("{},{:.6f}\n", curve.grid[i], curve.f1.at(i));
  }
  out += fmt::format("# selected,{}\n", curve.selected());
  return out;
}

void export_curve(const TuningCurve& curve, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write {}", path.string()));
  f << curve_csv(curve);
  if (!f) throw DataError(fmt::format("failed writing {}", path.string()));
}

}  // namespace redace
