#include "ade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ade/errors.hpp"
#include "ade/rng.hpp"

namespace ade {

namespace {

std::unordered_map<std::string, double> term_counts(const std::string& text) {
  std::unordered_map<std::string, double> counts;
  for (const std::string& tok : tokenize(text)) counts[tok] += 1.0;
  return counts;
}

double idf(const TfIdfStats& stats, const std::string& term) {
  const auto it = stats.df.find(term);
  const double df = it == stats.df.end() ? 0.0 : double(it->second);
  return std::log((1.0 + double(stats.documents)) / (1.0 + df)) + 1.0;
}

std::string joined_context(const Dialogue& d) {
  std::string text;
  for (const std::string& msg : d.context) {
    if (!text.empty()) text += ' ';
    text += msg;
  }
  return text;
}

std::vector<double> list_log_priors(const CandidateList& list) {
  std::vector<double> lp(list.freq.size());
  for (std::size_t i = 0; i < list.freq.size(); ++i)
    lp[i] = std::log(list.freq[i]);
  return lp;
}

}  // namespace

Scorer model_scorer(const ParameterStore& store, const ModelConfig& cfg,
                    const Vocabulary& vocab, std::size_t max_len) {
  auto cache =
      std::make_shared<std::unordered_map<std::string, SeqFeatures>>();
  return [&store, cfg, &vocab, max_len,
          cache](const Dialogue& d,
                 const std::vector<std::string>& candidates) {
    const EncodedPair enc = encode_dialogue(d, vocab, max_len);
    const SeqFeatures ctx = encode_plain(store, cfg, enc.context, true);
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const std::string& text : candidates) {
      auto it = cache->find(text);
      if (it == cache->end()) {
        const TokenSequence seq = encode_response_text(text, vocab, max_len);
        it = cache->emplace(text, encode_plain(store, cfg, seq, false)).first;
      }
      scores.push_back(variant_score(cfg, ctx, it->second));
    }
    return scores;
  };
}

RankingResult rank_candidates(const std::vector<double>& scores,
                              std::size_t truth_index,
                              const std::vector<double>* log_priors) {
  if (scores.empty()) throw std::invalid_argument("no candidates to rank");
  if (truth_index >= scores.size())
    throw std::invalid_argument("truth index out of range");
  if (log_priors && log_priors->size() != scores.size())
    throw std::invalid_argument("prior count does not match candidate count");

  std::vector<double> effective = scores;
  if (log_priors)
    for (std::size_t i = 0; i < effective.size(); ++i)
      effective[i] += (*log_priors)[i];

  RankingResult r;
  r.order.resize(effective.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return effective[a] > effective[b];
                   });
  r.scores.reserve(effective.size());
  for (std::size_t idx : r.order) r.scores.push_back(effective[idx]);
  for (std::size_t pos = 0; pos < r.order.size(); ++pos)
    if (r.order[pos] == truth_index) r.rank = pos + 1;
  return r;
}

double recall_at_k(const std::vector<RankingResult>& results, std::size_t k) {
  if (results.empty()) throw std::invalid_argument("no ranking results");
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  std::size_t hits = 0;
  for (const RankingResult& r : results)
    if (r.rank <= k) ++hits;
  return double(hits) / double(results.size());
}

TfIdfStats tfidf_stats(const std::vector<std::string>& docs) {
  TfIdfStats stats;
  stats.documents = docs.size();
  for (const std::string& doc : docs) {
    for (const auto& [term, count] : term_counts(doc)) {
      (void)count;
      ++stats.df[term];
    }
  }
  return stats;
}

double tfidf_score(const std::string& a, const std::string& b,
                   const TfIdfStats& stats) {
  const auto ca = term_counts(a);
  const auto cb = term_counts(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [term, count] : ca) {
    const double wa = count * idf(stats, term);
    na += wa * wa;
    const auto it = cb.find(term);
    if (it != cb.end()) dot += wa * it->second * idf(stats, term);
  }
  for (const auto& [term, count] : cb) {
    const double wb = count * idf(stats, term);
    nb += wb * wb;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Scorer tfidf_scorer(TfIdfStats stats) {
  return [stats = std::move(stats)](const Dialogue& d,
                                    const std::vector<std::string>& candidates) {
    const std::string ctx = joined_context(d);
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const std::string& text : candidates)
      scores.push_back(tfidf_score(ctx, text, stats));
    return scores;
  };
}

EvalMetrics evaluate_fixed_list(const Scorer& scorer,
                                const std::vector<Dialogue>& dataset,
                                const CandidateList& list,
                                const std::vector<std::size_t>& ks,
                                bool use_prior) {
  if (list.size() == 0) throw std::invalid_argument("empty candidate list");
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < list.responses.size(); ++i)
    index_of.emplace(list.responses[i], i);

  const std::vector<double> lp = list_log_priors(list);
  std::vector<RankingResult> results;
  for (const Dialogue& d : dataset) {
    const auto it = index_of.find(d.response);
    if (it == index_of.end()) continue;
    const std::vector<double> scores = scorer(d, list.responses);
    results.push_back(
        rank_candidates(scores, it->second, use_prior ? &lp : nullptr));
  }
  if (results.empty())
    throw DataError("no instance has its response in the candidate list");

  EvalMetrics m;
  m.protocol = "fixed";
  m.instances = results.size();
  for (std::size_t k : ks) m.recall_at.emplace_back(k, recall_at_k(results, k));
  return m;
}

EvalMetrics evaluate_distractor19(const Scorer& scorer,
                                  const std::vector<Dialogue>& dataset,
                                  const std::vector<std::size_t>& ks,
                                  std::uint64_t seed) {
  constexpr std::size_t kDistractors = 19;
  std::vector<RankingResult> results;
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    const Dialogue& d = dataset[n];
    std::vector<std::size_t> eligible;
    for (std::size_t j = 0; j < dataset.size(); ++j)
      if (dataset[j].response != d.response) eligible.push_back(j);
    if (eligible.size() < kDistractors)
      throw DataError("instance " + std::to_string(n) + " has only " +
                      std::to_string(eligible.size()) +
                      " eligible distractors (need " +
                      std::to_string(kDistractors) + ")");

    std::mt19937_64 rng(mix64(seed, n));
    std::vector<std::string> candidates = {d.response};
    for (std::size_t pick :
         sample_without_replacement(rng, eligible.size(), kDistractors))
      candidates.push_back(dataset[eligible[pick]].response);

    results.push_back(rank_candidates(scorer(d, candidates), 0));
  }
  if (results.empty()) throw DataError("no instances to evaluate");

  EvalMetrics m;
  m.protocol = "distractor19";
  m.instances = results.size();
  for (std::size_t k : ks) m.recall_at.emplace_back(k, recall_at_k(results, k));
  return m;
}

std::string metrics_json(const EvalMetrics& m) {
  nlohmann::ordered_json recall;
  for (const auto& [k, v] : m.recall_at) recall[std::to_string(k)] = v;
  nlohmann::ordered_json j;
  j["recall_at"] = recall;
  j["instances"] = m.instances;
  j["protocol"] = m.protocol;
  return j.dump(2);
}

std::string metrics_table(const EvalMetrics& m) {
  std::ostringstream out;
  out << "protocol: " << m.protocol << "  instances: " << m.instances << "\n";
  for (const auto& [k, v] : m.recall_at) {
    out << "recall@" << k << "\t";
    out.setf(std::ios::fixed);
    out.precision(4);
    out << v << "\n";
  }
  return out.str();
}

}  // namespace ade
