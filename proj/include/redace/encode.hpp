#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "redace/align.hpp"

namespace redace {

// Reserved piece indices; learned pieces start at kNumSpecial.
enum SpecialToken : int { kPad = 0, kUnk = 1, kCls = 2, kSep = 3, kMask = 4, kNumSpecial = 5 };

inline constexpr std::string_view kContinuation = "##";
inline constexpr std::size_t kDefaultMaxLen = 128;

// Splits UTF-8 into code points; invalid bytes come back as single-byte units.
std::vector<std::string> utf8_chars(std::string_view s);

class Vocabulary {
 public:
  Vocabulary() = default;

  // pieces[0..kNumSpecial) must be the special tokens in SpecialToken order.
  static Vocabulary from_pieces(std::vector<std::string> pieces);

  const std::vector<std::string>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  std::optional<int> find(std::string_view piece) const;
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }

  // Greedy longest match: a word-initial piece, then "##" continuations.
  // A character no piece covers becomes UNK.
  std::vector<int> tokenize_word(std::string_view word) const;

  // FNV-1a over the newline-joined piece list, as 16 hex digits.
  std::string hash() const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

std::vector<std::string> special_pieces();

// Deterministic frequency-greedy inventory: specials, every observed character
// in initial and "##" form, whole words seen at least min_word_count times by
// descending count, then frequent multi-character substrings by count × length.
// Throws ConfigError if target_size cannot hold specials plus the alphabet.
Vocabulary build_vocab(std::span<const WordSequence> corpus, std::size_t target_size,
                       std::size_t min_word_count = 2);

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const TokenRange&) const = default;
};

struct Tokenization {
  std::vector<int> token_ids;               // padded to max_len
  std::vector<TokenRange> word_to_tokens;   // one entry per retained word
  std::size_t attention_len = 0;            // CLS + content + SEP
};

// Words that do not fit are dropped whole from the end; SEP always follows
// the last retained word.
Tokenization tokenize(const WordSequence& words, const Vocabulary& vocab,
                      std::size_t max_len = kDefaultMaxLen);

enum class BinningAlgorithm { kEqualWidth, kQuantile };

struct BinningConfig {
  BinningAlgorithm algorithm = BinningAlgorithm::kEqualWidth;
  std::size_t num_bins = 10;
  std::vector<double> boundaries;  // quantile only, num_bins − 1 entries

  // Content scores map to [0, num_bins); special tokens use num_bins.
  int bin(double score) const;
  int special_bin() const { return static_cast<int>(num_bins); }
  std::string hash() const;

  bool operator==(const BinningConfig&) const = default;
};

void validate(const BinningConfig& cfg);

// min(floor(score·B), B−1). Throws RangeError outside [0,1].
int bin_equal_width(double score, std::size_t num_bins);

// Boundaries at the empirical i/B quantiles (linear interpolation between
// order statistics). A score's bin counts the boundaries at or below it, as
// in equal-width binning.
BinningConfig fit_quantile_bins(std::span<const double> train_scores, std::size_t num_bins);

BinningConfig equal_width_bins(std::size_t num_bins);

// Content tokens inherit their word's bin; others get the special bin.
std::vector<int> propagate_confidence(std::span<const double> word_scores,
                                      std::span<const TokenRange> word_to_tokens,
                                      const BinningConfig& binning, std::size_t num_tokens);

struct TokenizedExample {
  std::string id;
  std::vector<int> token_ids;
  std::vector<TokenRange> word_to_tokens;
  std::vector<int> conf_bins;
  // Raw word confidence per token; 0.0 at CLS/SEP/PAD.
  std::vector<double> conf_values;
  std::size_t attention_len = 0;
  std::vector<Label> labels_tok;
  std::size_t num_words = 0;  // before truncation
};

// Every token of an Error word is labelled Error; CLS/SEP are NotError.
TokenizedExample encode_example(const LabeledExample& ex, const Vocabulary& vocab,
                                const BinningConfig& binning,
                                std::size_t max_len = kDefaultMaxLen);

struct EncodedCorpus {
  std::string vocab_hash;
  std::string binning_hash;
  std::vector<TokenizedExample> examples;
};

EncodedCorpus encode_corpus(std::span<const LabeledExample> examples, const Vocabulary& vocab,
                            const BinningConfig& binning,
                            std::size_t max_len = kDefaultMaxLen);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace redace
