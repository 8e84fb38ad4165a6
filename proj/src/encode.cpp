#include "redace/encode.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

namespace {

constexpr std::size_t kMaxSubstringChars = 12;

std::string join(const std::vector<std::string>& chars, std::size_t begin, std::size_t end) {
  std::string s;
  for (std::size_t i = begin; i < end; ++i) s += chars[i];
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::vector<std::string> utf8_chars(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > s.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> special_pieces() {
  return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary Vocabulary::from_pieces(std::vector<std::string> pieces) {
  const auto specials = special_pieces();
  if (pieces.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), pieces.begin())) {
    throw ConfigError("vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i].empty()) throw ConfigError(fmt::format("empty vocabulary piece at {}", i));
    if (!v.index_.emplace(pieces[i], static_cast<int>(i)).second) {
      throw ConfigError(fmt::format("duplicate vocabulary piece '{}'", pieces[i]));
    }
  }
  v.pieces_ = std::move(pieces);
  return v;
}

std::optional<int> Vocabulary::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocabulary::tokenize_word(std::string_view word) const {
  const auto chars = utf8_chars(word);
  std::vector<int> ids;
  std::size_t pos = 0;
  while (pos < chars.size()) {
    const std::string prefix = pos == 0 ? "" : std::string(kContinuation);
    std::optional<int> hit;
    std::size_t hit_end = pos;
    for (std::size_t end = chars.size(); end > pos; --end) {
      if (auto id = find(prefix + join(chars, pos, end))) {
        hit = id;
        hit_end = end;
        break;
      }
    }
    if (hit) {
      ids.push_back(*hit);
      pos = hit_end;
    } else {
      ids.push_back(kUnk);
      ++pos;
    }
  }
  return ids;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : pieces_) {
    h = fnv1a64(p, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

Vocabulary build_vocab(std::span<const WordSequence> corpus, std::size_t target_size,
                       std::size_t min_word_count) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& seq : corpus) {
    for (const auto& w : seq) {
      if (!w.empty()) ++word_counts[w];
    }
  }
  if (word_counts.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");

  std::set<std::string> alphabet;
  for (const auto& [w, _] : word_counts) {
    for (auto& c : utf8_chars(w)) alphabet.insert(std::move(c));
  }

  std::vector<std::string> pieces = special_pieces();
  std::set<std::string> taken(pieces.begin(), pieces.end());
  for (const auto& c : alphabet) {
    pieces.push_back(c);
    pieces.push_back(std::string(kContinuation) + c);
  }
  if (target_size < pieces.size()) {
    throw ConfigError(fmt::format(
        "vocabulary target {} is below the {} specials and character pieces", target_size,
        pieces.size()));
  }
  taken.insert(pieces.begin(), pieces.end());
  auto add = [&](const std::string& p) {
    if (pieces.size() < target_size && taken.insert(p).second) pieces.push_back(p);
  };

  std::vector<std::pair<std::string, std::size_t>> words(word_counts.begin(), word_counts.end());
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [w, count] : words) {
    if (count < min_word_count) break;
    add(w);
  }

  if (pieces.size() < target_size) {
    std::map<std::string, std::size_t> sub_counts;
    for (const auto& [w, count] : word_counts) {
      const auto chars = utf8_chars(w);
      const std::size_t n = chars.size();
      for (std::size_t begin = 0; begin < n; ++begin) {
        for (std::size_t end = begin + 2; end <= std::min(n, begin + kMaxSubstringChars);
             ++end) {
          std::string s = join(chars, begin, end);
          if (begin > 0) s = std::string(kContinuation) + s;
          sub_counts[s] += count * (end - begin);
        }
      }
    }
    std::vector<std::pair<std::string, std::size_t>> subs(sub_counts.begin(), sub_counts.end());
    std::stable_sort(subs.begin(), subs.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [s, _] : subs) {
      if (pieces.size() >= target_size) break;
      add(s);
    }
  }
  return Vocabulary::from_pieces(std::move(pieces));
}

Tokenization tokenize(const WordSequence& words, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("max_len must be at least 3");
  const std::size_t budget = max_len - 2;
  Tokenization t;
  t.token_ids.reserve(max_len);
  t.token_ids.push_back(kCls);
  for (const auto& w : words) {
    auto ids = vocab.tokenize_word(w);
    std::size_t used = t.token_ids.size() - 1;
    if (used + ids.size() > budget) break;
    TokenRange r{t.token_ids.size(), t.token_ids.size() + ids.size()};
    t.token_ids.insert(t.token_ids.end(), ids.begin(), ids.end());
    t.word_to_tokens.push_back(r);
  }
  t.token_ids.push_back(kSep);
  t.attention_len = t.token_ids.size();
  t.token_ids.resize(max_len, kPad);
  return t;
}

int bin_equal_width(double score, std::size_t num_bins) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw RangeError(fmt::format("confidence {} outside [0,1]", score));
  }
  if (num_bins == 0) throw ConfigError("num_bins must be at least 1");
  auto b = static_cast<std::size_t>(std::floor(score * static_cast<double>(num_bins)));
  return static_cast<int>(std::min(b, num_bins - 1));
}

void validate(const BinningConfig& cfg) {
  if (cfg.num_bins < 1) throw ConfigError("num_bins must be at least 1");
  if (cfg.algorithm == BinningAlgorithm::kQuantile) {
    if (cfg.boundaries.size() != cfg.num_bins - 1) {
      throw ConfigError(fmt::format("quantile binning with {} bins needs {} boundaries, got {}",
                                    cfg.num_bins, cfg.num_bins - 1, cfg.boundaries.size()));
    }
    for (std::size_t i = 0; i < cfg.boundaries.size(); ++i) {
      double b = cfg.boundaries[i];
      if (!(b >= 0.0 && b <= 1.0) || (i > 0 && b < cfg.boundaries[i - 1])) {
        throw ConfigError("quantile boundaries must be sorted and within [0,1]");
      }
    }
  }
}

int BinningConfig::bin(double score) const {
  if (algorithm == BinningAlgorithm::kEqualWidth) return bin_equal_width(score, num_bins);
  if (!(score >= 0.0 && score <= 1.0)) {
    throw RangeError(fmt::format("confidence {} outside [0,1]", score));
  }
  auto below = static_cast<std::size_t>(
      std::upper_bound(boundaries.begin(), boundaries.end(), score) - boundaries.begin());
  return static_cast<int>(std::min(below, num_bins - 1));
}

std::string BinningConfig::hash() const {
  std::string s = fmt::format("{}|{}", algorithm == BinningAlgorithm::kQuantile ? "quantile"
                                                                                 : "equal_width",
                              num_bins);
  for (double b : boundaries) s += fmt::format("|{:.17g}", b);
  return hex64(fnv1a64(s));
}

BinningConfig equal_width_bins(std::size_t num_bins) {
  BinningConfig cfg{BinningAlgorithm::kEqualWidth, num_bins, {}};
  validate(cfg);
  return cfg;
}

BinningConfig fit_quantile_bins(std::span<const double> train_scores, std::size_t num_bins) {
  if (train_scores.empty()) throw DataError("cannot fit quantile bins on an empty score list");
  if (num_bins < 1) throw ConfigError("num_bins must be at least 1");
  std::vector<double> sorted(train_scores.begin(), train_scores.end());
  for (double s : sorted) {
    if (!(s >= 0.0 && s <= 1.0)) throw RangeError(fmt::format("confidence {} outside [0,1]", s));
  }
  std::sort(sorted.begin(), sorted.end());
  BinningConfig cfg{BinningAlgorithm::kQuantile, num_bins, {}};
  const double last = static_cast<double>(sorted.size() - 1);
  for (std::size_t i = 1; i < num_bins; ++i) {
    double h = last * static_cast<double>(i) / static_cast<double>(num_bins);
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    cfg.boundaries.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  return cfg;
}

std::vector<int> propagate_confidence(std::span<const double> word_scores,
                                      std::span<const TokenRange> word_to_tokens,
                                      const BinningConfig& binning, std::size_t num_tokens) {
  if (num_tokens < 2) throw StructuralError("a token sequence needs at least CLS and SEP");
  if (word_to_tokens.size() > word_scores.size()) {
    throw StructuralError(fmt::format("{} mapped words but only {} word scores",
                                      word_to_tokens.size(), word_scores.size()));
  }
  std::vector<int> bins(num_tokens, binning.special_bin());
  std::size_t next = 1;
  for (std::size_t w = 0; w < word_to_tokens.size(); ++w) {
    const TokenRange& r = word_to_tokens[w];
    if (r.begin != next || r.end < r.begin || r.end > num_tokens - 1) {
      throw StructuralError(fmt::format("word {} maps to tokens [{},{}) but token {} is next",
                                        w, r.begin, r.end, next));
    }
    const int b = binning.bin(word_scores[w]);
    for (std::size_t t = r.begin; t < r.end; ++t) bins[t] = b;
    next = r.end;
  }
  if (next != num_tokens - 1) {
    throw StructuralError(fmt::format("content tokens [{},{}) are not covered by any word", next,
                                      num_tokens - 1));
  }
  return bins;
}

TokenizedExample encode_example(const LabeledExample& ex, const Vocabulary& vocab,
                                const BinningConfig& binning, std::size_t max_len) {
  validate_example(ex);
  Tokenization t = tokenize(ex.hyp, vocab, max_len);
  TokenizedExample out;
  out.id = ex.id;
  out.attention_len = t.attention_len;
  out.num_words = ex.hyp.size();
  out.conf_bins = propagate_confidence(ex.confidences, t.word_to_tokens, binning, t.attention_len);
  out.conf_bins.resize(max_len, binning.special_bin());
  out.conf_values.assign(max_len, 0.0);
  out.labels_tok.assign(max_len, Label::kNotError);
  for (std::size_t w = 0; w < t.word_to_tokens.size(); ++w) {
    for (std::size_t k = t.word_to_tokens[w].begin; k < t.word_to_tokens[w].end; ++k) {
      out.conf_values[k] = ex.confidences[w];
      out.labels_tok[k] = ex.labels[w];
    }
  }
  out.token_ids = std::move(t.token_ids);
  out.word_to_tokens = std::move(t.word_to_tokens);
  return out;
}

EncodedCorpus encode_corpus(std::span<const LabeledExample> examples, const Vocabulary& vocab,
                            const BinningConfig& binning, std::size_t max_len) {
  EncodedCorpus c;
  c.vocab_hash = vocab.hash();
  c.binning_hash = binning.hash();
  c.examples.reserve(examples.size());
  for (const auto& ex : examples) c.examples.push_back(encode_example(ex, vocab, binning, max_len));
  return c;
}

}  // namespace redace
