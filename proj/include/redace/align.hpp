#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace redace {

using WordSequence = std::vector<std::string>;

enum class Label : unsigned char { kNotError = 0, kError = 1 };

using LabelSequence = std::vector<Label>;

inline bool is_error(Label l) { return l == Label::kError; }

struct NormalizerConfig {
  bool lowercase = true;
  bool strip_punctuation = false;
};

std::string normalize_word(std::string_view word, const NormalizerConfig& norm);
WordSequence normalize(const WordSequence& words, const NormalizerConfig& norm);

enum class EditKind : unsigned char { kEqual, kSubstitute, kDelete, kInsert };

// Delete consumes a hypothesis word, Insert consumes a reference word.
struct EditOp {
  EditKind kind;
  std::optional<std::size_t> hyp_index;
  std::optional<std::size_t> ref_index;

  bool operator==(const EditOp&) const = default;
};

struct EditPath {
  std::vector<EditOp> ops;
  std::size_t cost = 0;

  bool operator==(const EditPath&) const = default;
};

// One annotated AED record: hypothesis words with their ASR confidences and
// Error/NotError labels, optionally with the reference transcript.
struct LabeledExample {
  std::string id;
  WordSequence hyp;
  std::vector<double> confidences;
  LabelSequence labels;
  std::optional<WordSequence> ref;

  bool operator==(const LabeledExample&) const = default;
};

// Throws DataError when the per-word vectors disagree in length or a
// confidence is outside [0,1].
void validate_example(const LabeledExample& ex);

// Minimum-edit-distance alignment with unit costs. Among cost-minimal paths
// the backtrace from (|hyp|,|ref|) prefers the diagonal, then Delete, then
// Insert, so the result is deterministic.
EditPath align(const WordSequence& hyp, const WordSequence& ref,
               const NormalizerConfig& norm = {});

// Throws StructuralError unless the path covers every hypothesis and reference
// index exactly once, in increasing order, and its cost matches its ops.
void validate_path(const EditPath& path, std::size_t hyp_len, std::size_t ref_len);

// Substitute/Delete → Error; Equal → NotError. Insert ops yield no label.
LabelSequence label_errors(const EditPath& path, std::size_t hyp_len);

// Plain two-row DP word edit distance; independent of align's full table.
std::size_t levenshtein_distance(const WordSequence& hyp, const WordSequence& ref);

struct DatasetStats {
  std::size_t num_examples = 0;
  std::size_t num_words = 0;
  std::size_t num_errors = 0;
  double error_rate = 0.0;
  // False when the dataset has no words and error_rate is meaningless.
  bool error_rate_defined = false;
};

DatasetStats dataset_stats(const std::vector<LabeledExample>& examples);

}  // namespace redace
