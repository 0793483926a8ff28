#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ade/tensor.hpp"

namespace ade {

// One conversation turn: up to max_context_messages of history (oldest first)
// and the response that followed. Messages and response are non-empty after
// trimming; the loader enforces this.
struct Dialogue {
  std::vector<std::string> context;
  std::string response;
};

// Token ids with a padding mask. The mask is a prefix of ones (real tokens
// pack to the front), ids at masked positions are exactly the pad id, and at
// least one position is real.
struct TokenSequence {
  std::vector<std::int32_t> ids;
  Mask mask;

  std::size_t capacity() const { return ids.size(); }
  std::size_t length() const { return mask_count(mask); }
};

// Token <-> id mapping. Ids 0..2 are reserved for padding, unknown and the
// message separator; real tokens follow ordered by descending corpus
// frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kSep = 2;

  static Vocabulary build(const std::vector<Dialogue>& corpus, std::size_t min_count);
  // Rebuild from a previously serialized full token list (reserved entries
  // first). Rejects lists that do not start with the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t id_or_unk(const std::string& token) const;
  const std::string& token(std::int32_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

// Lowercases, splits punctuation into single-character tokens and breaks on
// whitespace. Bytes outside ASCII are treated as word characters, so UTF-8
// words survive intact. Never produces the reserved tokens.
std::vector<std::string> tokenize(const std::string& text);

std::string trim(const std::string& s);

// Reads one JSON object per line: {"context": ["...", ...], "response": "..."}.
// Contexts longer than max_context_messages keep only the most recent
// messages. Any parse or validation failure aborts with the 1-based line
// number (DataError); unknown keys are ignored.
std::vector<Dialogue> load_dialogues_jsonl(const std::string& path,
                                           std::size_t max_context_messages);

struct EncodedPair {
  TokenSequence context;
  TokenSequence response;
  std::size_t source_index = 0;  // position in the originating dialogue list
};

// Context messages are joined with the separator token, truncated from the
// front when over max_len (most recent tokens win); responses are truncated
// from the back. Out-of-vocabulary tokens map to the unknown id.
EncodedPair encode_dialogue(const Dialogue& d, const Vocabulary& vocab,
                            std::size_t max_len, std::size_t source_index = 0);

TokenSequence encode_response_text(const std::string& text, const Vocabulary& vocab,
                                   std::size_t max_len);

std::vector<EncodedPair> encode_corpus(const std::vector<Dialogue>& corpus,
                                       const Vocabulary& vocab, std::size_t max_len);

// n distinct positive pairs drawn uniformly without replacement, in draw
// order. Requires 2 <= n <= dataset size.
struct Batch {
  std::vector<TokenSequence> contexts;
  std::vector<TokenSequence> responses;
  std::vector<std::size_t> indices;  // into the sampled dataset

  std::size_t size() const { return contexts.size(); }
};

Batch sample_batch(const std::vector<EncodedPair>& dataset, std::size_t n,
                   std::mt19937_64& rng);
Batch sample_batch(const std::vector<EncodedPair>& dataset, std::size_t n,
                   std::uint64_t seed);

// Like sample_batch but redraws (up to max_attempts whole-batch retries) when
// two sampled pairs share identical response token ids, to avoid false
// negatives in the in-batch objective. Falls back to the last draw when the
// dataset cannot satisfy distinctness.
Batch sample_batch_distinct_responses(const std::vector<EncodedPair>& dataset,
                                      std::size_t n, std::mt19937_64& rng,
                                      std::size_t max_attempts = 16);

// Fixed candidate pool: the top_l most frequent distinct responses with
// frequencies renormalized over the kept set (positive, summing to 1).
struct CandidateList {
  std::vector<std::string> responses;
  std::vector<TokenSequence> encoded;
  std::vector<double> freq;

  std::size_t size() const { return responses.size(); }
};

// Requires top_l >= 2; throws DataError naming the shortfall when fewer
// distinct responses exist.
CandidateList build_candidate_list(const std::vector<Dialogue>& corpus,
                                   std::size_t top_l, const Vocabulary& vocab,
                                   std::size_t max_len);

}  // namespace ade
