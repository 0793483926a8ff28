#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/objectives.hpp"
#include "ade/params.hpp"

namespace ade {

// Scores every candidate response text against one dialogue context in a
// single call (so implementations can encode the context once); larger is
// better. Must be deterministic for fixed inputs.
using Scorer = std::function<std::vector<double>(
    const Dialogue&, const std::vector<std::string>&)>;

// Scorer backed by a trained model; caches candidate encodings by text, so
// repeated candidate sets (a fixed list, a shared distractor pool) are cheap.
Scorer model_scorer(const ParameterStore& store, const ModelConfig& cfg,
                    const Vocabulary& vocab, std::size_t max_len);

// One ranked instance.
struct RankingResult {
  std::size_t rank = 0;              // 1-based position of the ground truth
  std::vector<std::size_t> order;    // candidate indices, best first
  std::vector<double> scores;        // aligned with order, non-increasing
};

// Sorts candidates by score descending (ties keep the lower candidate index
// first) and locates the ground truth. If log_priors is given, each
// candidate's score is first shifted by its entry.
RankingResult rank_candidates(const std::vector<double>& scores,
                              std::size_t truth_index,
                              const std::vector<double>* log_priors = nullptr);

// Fraction of instances whose ground truth ranks within the top k.
double recall_at_k(const std::vector<RankingResult>& results, std::size_t k);

// Document frequencies for the word-overlap baseline, built over training
// response texts with the shared tokenizer.
struct TfIdfStats {
  std::unordered_map<std::string, std::size_t> df;
  std::size_t documents = 0;
};
TfIdfStats tfidf_stats(const std::vector<std::string>& docs);

// Cosine between term-weight vectors: raw term count times
// log((1 + documents) / (1 + df)) + 1. Zero if either text has no tokens.
double tfidf_score(const std::string& a, const std::string& b,
                   const TfIdfStats& stats);

// Scorer over tfidf_score; context messages are joined with spaces.
Scorer tfidf_scorer(TfIdfStats stats);

struct EvalMetrics {
  std::vector<std::pair<std::size_t, double>> recall_at;  // (k, fraction)
  std::size_t instances = 0;
  std::string protocol;
};

// Scores each instance whose ground-truth response appears in the candidate
// list against the whole list; instances without a match are skipped. With
// use_prior, candidate scores are shifted by the log of their list frequency.
// Throws DataError when no instance is evaluable.
EvalMetrics evaluate_fixed_list(const Scorer& scorer,
                                const std::vector<Dialogue>& dataset,
                                const CandidateList& list,
                                const std::vector<std::size_t>& ks,
                                bool use_prior);

// Ranks each instance's ground truth against 19 responses sampled without
// replacement from the other instances (never one whose text equals the
// ground truth). Sampling is per-instance seeded, so results do not depend
// on evaluation order. Throws DataError when an instance has fewer than 19
// eligible distractors.
EvalMetrics evaluate_distractor19(const Scorer& scorer,
                                  const std::vector<Dialogue>& dataset,
                                  const std::vector<std::size_t>& ks,
                                  std::uint64_t seed);

// {"recall_at": {"1": ...}, "instances": n, "protocol": "..."} as a string.
std::string metrics_json(const EvalMetrics& m);

// Fixed-width plain-text table, one "recall@k" row per entry.
std::string metrics_table(const EvalMetrics& m);

}  // namespace ade
