#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "redace/align.hpp"

namespace redace {

// Error is the positive class. Empty denominators give 0.
struct PRF {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static PRF from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  bool operator==(const PRF&) const = default;
};

double harmonic_f1(double precision, double recall);

PRF word_prf(const LabelSequence& pred, const LabelSequence& gold);
PRF word_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold);

// A predicted span counts as a true positive only on an exact (start, end)
// match with a gold span.
PRF span_prf(const LabelSequence& pred, const LabelSequence& gold);
PRF span_prf(std::span<const LabelSequence> pred, std::span<const LabelSequence> gold);

struct TuningCurve {
  std::vector<double> grid;
  std::vector<double> f1;
  std::size_t selected_index = 0;

  double selected() const { return grid.at(selected_index); }
};

using ParameterizedDetector = std::function<std::vector<LabelSequence>(double)>;

// Word F1 at each grid point; the first maximum wins, so ties go to the
// smallest value when the grid is ascending.
TuningCurve tune_threshold(std::span<const double> grid, const ParameterizedDetector& detector,
                           std::span<const LabelSequence> dev_gold);

// 0.00, 0.01, …, 1.01.
std::vector<double> threshold_grid();

// Ascending distinct integers from 1 to vocab_size, roughly log-spaced.
std::vector<double> k_grid(std::size_t vocab_size, std::size_t points = 40);

// Mean of (c − y)² with y = 1 for NotError and y = 0 for Error.
double brier(std::span<const double> confidences, std::span<const Label> gold);

// 100 · (f1_b − f1_a) / f1_a. Throws DataError when f1_a is 0.
double f1_delta_pct(double f1_b, double f1_a);

struct SignificanceResult {
  std::vector<double> f1_a;
  std::vector<double> f1_b;
  std::vector<std::size_t> subset_sizes;
  std::size_t zero_error_subsets = 0;
  double mean_delta = 0.0;  // mean of f1_b − f1_a
  double t_statistic = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  bool significant = false;  // p < 0.05
};

// Shuffles word positions with a seeded generator, cuts them into n_subsets
// contiguous chunks whose sizes differ by at most one, and runs a two-sided
// paired Student's t-test on the per-chunk F1 scores.
SignificanceResult significance_test(const LabelSequence& pred_a, const LabelSequence& pred_b,
                                     const LabelSequence& gold, std::size_t n_subsets = 100,
                                     std::uint64_t seed = 0);

// Two-sided tail probability of Student's t with df degrees of freedom.
double students_t_two_sided_p(double t, double df);

LabelSequence flatten(std::span<const LabelSequence> seqs);

// "param,f1" header, one row per grid point, then "# selected,<value>".
std::string curve_csv(const TuningCurve& curve);
void export_curve(const TuningCurve& curve, const std::filesystem::path& path);

}  // namespace redace
