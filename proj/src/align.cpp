#include "redace/align.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

std::string normalize_word(std::string_view word, const NormalizerConfig& norm) {
  std::string out;
  out.reserve(word.size());
  for (char ch : word) {
    auto c = static_cast<unsigned char>(ch);
    // Only ASCII is case-folded or stripped; multi-byte UTF-8 passes through.
    if (norm.strip_punctuation && c < 0x80 && std::ispunct(c)) continue;
    if (norm.lowercase && c < 0x80) c = static_cast<unsigned char>(std::tolower(c));
    out.push_back(static_cast<char>(c));
  }
  return out;
}

WordSequence normalize(const WordSequence& words, const NormalizerConfig& norm) {
  WordSequence out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(normalize_word(w, norm));
  return out;
}

void validate_example(const LabeledExample& ex) {
  if (ex.confidences.size() != ex.hyp.size() || ex.labels.size() != ex.hyp.size()) {
    throw DataError(fmt::format(
        "example '{}': {} hypothesis words but {} confidences and {} labels", ex.id,
        ex.hyp.size(), ex.confidences.size(), ex.labels.size()));
  }
  for (std::size_t i = 0; i < ex.hyp.size(); ++i) {
    if (ex.hyp[i].empty()) {
      throw DataError(fmt::format("example '{}': empty word at index {}", ex.id, i));
    }
    double c = ex.confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw RangeError(
          fmt::format("example '{}': confidence {} at index {} outside [0,1]", ex.id, c, i));
    }
  }
}

EditPath align(const WordSequence& hyp, const WordSequence& ref,
               const NormalizerConfig& norm) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  const WordSequence h = normalize(hyp, norm);
  const WordSequence r = normalize(ref, norm);

  // dist[i][j]: edits between hyp[0,i) and ref[0,j).
  std::vector<std::size_t> dist((n + 1) * (m + 1));
  auto at = [m, &dist](std::size_t i, std::size_t j) -> std::size_t& {
    return dist[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t diag = at(i - 1, j - 1) + (h[i - 1] == r[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditPath path;
  path.cost = at(n, m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      bool same = h[i - 1] == r[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        path.ops.push_back({same ? EditKind::kEqual : EditKind::kSubstitute, i - 1, j - 1});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      path.ops.push_back({EditKind::kDelete, i - 1, std::nullopt});
      --i;
    } else {
      path.ops.push_back({EditKind::kInsert, std::nullopt, j - 1});
      --j;
    }
  }
  std::reverse(path.ops.begin(), path.ops.end());
  return path;
}

void validate_path(const EditPath& path, std::size_t hyp_len, std::size_t ref_len) {
  std::size_t next_hyp = 0;
  std::size_t next_ref = 0;
  std::size_t cost = 0;
  for (std::size_t k = 0; k < path.ops.size(); ++k) {
    const EditOp& op = path.ops[k];
    bool wants_hyp = op.kind != EditKind::kInsert;
    bool wants_ref = op.kind != EditKind::kDelete;
    if (wants_hyp != op.hyp_index.has_value() || wants_ref != op.ref_index.has_value()) {
      throw StructuralError(fmt::format("edit op {} carries the wrong index set", k));
    }
    if (wants_hyp) {
      if (*op.hyp_index != next_hyp) {
        throw StructuralError(fmt::format("edit op {}: hypothesis index {} but expected {}",
                                          k, *op.hyp_index, next_hyp));
      }
      ++next_hyp;
    }
    if (wants_ref) {
      if (*op.ref_index != next_ref) {
        throw StructuralError(fmt::format("edit op {}: reference index {} but expected {}", k,
                                          *op.ref_index, next_ref));
      }
      ++next_ref;
    }
    if (op.kind != EditKind::kEqual) ++cost;
  }
  if (next_hyp != hyp_len || next_ref != ref_len) {
    throw StructuralError(fmt::format(
        "edit path covers {}/{} hypothesis and {}/{} reference words", next_hyp, hyp_len,
        next_ref, ref_len));
  }
  if (cost != path.cost) {
    throw StructuralError(
        fmt::format("edit path cost {} disagrees with its {} non-Equal ops", path.cost, cost));
  }
}

LabelSequence label_errors(const EditPath& path, std::size_t hyp_len) {
  LabelSequence labels(hyp_len, Label::kNotError);
  std::size_t next_hyp = 0;
  for (const EditOp& op : path.ops) {
    if (op.kind == EditKind::kInsert) {
      if (op.hyp_index) throw StructuralError("Insert op carries a hypothesis index");
      continue;
    }
    if (!op.hyp_index || *op.hyp_index != next_hyp || next_hyp >= hyp_len) {
      throw StructuralError(
          fmt::format("edit path does not cover hypothesis index {} exactly once", next_hyp));
    }
    if (op.kind == EditKind::kSubstitute || op.kind == EditKind::kDelete) {
      labels[next_hyp] = Label::kError;
    }
    ++next_hyp;
  }
  if (next_hyp != hyp_len) {
    throw StructuralError(
        fmt::format("edit path covers {} of {} hypothesis words", next_hyp, hyp_len));
  }
  return labels;
}

std::size_t levenshtein_distance(const WordSequence& hyp, const WordSequence& ref) {
  std::vector<std::size_t> prev(ref.size() + 1);
  std::vector<std::size_t> cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    cur[0] = i + 1;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      cur[j + 1] = std::min({cur[j] + 1, prev[j + 1] + 1,
                             prev[j] + (hyp[i] == ref[j] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

DatasetStats dataset_stats(const std::vector<LabeledExample>& examples) {
  DatasetStats s;
  s.num_examples = examples.size();
  for (const auto& ex : examples) {
    s.num_words += ex.labels.size();
    s.num_errors += static_cast<std::size_t>(
        std::count(ex.labels.begin(), ex.labels.end(), Label::kError));
  }
  if (s.num_words > 0) {
    s.error_rate = static_cast<double>(s.num_errors) / static_cast<double>(s.num_words);
    s.error_rate_defined = true;
  }
  return s;
}

}  // namespace redace
