#include "ade/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

#include "ade/errors.hpp"
#include "ade/rng.hpp"

namespace ade {

namespace {

const char* kReserved[] = {"<pad>", "<unk>", "<sep>"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

[[noreturn]] void line_fail(const std::string& path, std::size_t line, const std::string& why) {
  throw DataError(path + " line " + std::to_string(line) + ": " + why);
}

}  // namespace

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::vector<Dialogue>& corpus, std::size_t min_count) {
  if (corpus.empty()) throw DataError("empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const Dialogue& d : corpus) {
    for (const std::string& msg : d.context) {
      for (auto& tok : tokenize(msg)) ++counts[tok];
    }
    for (auto& tok : tokenize(d.response)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  kept.reserve(counts.size());
  for (auto& [tok, count] : counts) {
    if (count >= min_count) kept.emplace_back(tok, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const char* r : kReserved) v.tokens_.emplace_back(r);
  for (auto& [tok, count] : kept) v.tokens_.push_back(tok);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i));
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3) throw DataError("vocabulary list too short");
  for (int i = 0; i < 3; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kReserved[i]) {
      throw DataError("vocabulary list does not start with the reserved tokens");
    }
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [it, fresh] = v.ids_.emplace(v.tokens_[i], static_cast<std::int32_t>(i));
    if (!fresh) throw DataError("duplicate token in vocabulary list: " + v.tokens_[i]);
  }
  return v;
}

std::int32_t Vocabulary::id_or_unk(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<Dialogue> load_dialogues_jsonl(const std::string& path,
                                           std::size_t max_context_messages) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::vector<Dialogue> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      line_fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) line_fail(path, lineno, "expected a JSON object");
    if (!j.contains("context") || !j["context"].is_array()) {
      line_fail(path, lineno, "missing \"context\" array");
    }
    if (!j.contains("response") || !j["response"].is_string()) {
      line_fail(path, lineno, "missing \"response\" string");
    }
    Dialogue d;
    for (const auto& msg : j["context"]) {
      if (!msg.is_string()) line_fail(path, lineno, "context entries must be strings");
      const std::string text = trim(msg.get<std::string>());
      if (text.empty()) line_fail(path, lineno, "empty context message");
      d.context.push_back(text);
    }
    if (d.context.empty()) line_fail(path, lineno, "context has no messages");
    if (d.context.size() > max_context_messages) {
      d.context.erase(d.context.begin(),
                      d.context.end() - static_cast<std::ptrdiff_t>(max_context_messages));
    }
    d.response = trim(j["response"].get<std::string>());
    if (d.response.empty()) line_fail(path, lineno, "empty response");
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

TokenSequence pack_ids(std::vector<std::int32_t> ids, std::size_t max_len, bool keep_tail) {
  if (ids.empty()) throw std::logic_error("cannot encode an empty token sequence");
  if (ids.size() > max_len) {
    if (keep_tail) {
      ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(max_len));
    } else {
      ids.resize(max_len);
    }
  }
  TokenSequence seq;
  seq.ids.assign(max_len, Vocabulary::kPad);
  seq.mask.assign(max_len, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    seq.ids[i] = ids[i];
    seq.mask[i] = 1;
  }
  return seq;
}

std::vector<std::int32_t> text_ids(const std::string& text, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id_or_unk(tok));
  return ids;
}

}  // namespace

EncodedPair encode_dialogue(const Dialogue& d, const Vocabulary& vocab,
                            std::size_t max_len, std::size_t source_index) {
  std::vector<std::int32_t> ctx;
  for (std::size_t m = 0; m < d.context.size(); ++m) {
    if (m) ctx.push_back(Vocabulary::kSep);
    for (std::int32_t id : text_ids(d.context[m], vocab)) ctx.push_back(id);
  }
  EncodedPair pair;
  pair.context = pack_ids(std::move(ctx), max_len, /*keep_tail=*/true);
  pair.response = pack_ids(text_ids(d.response, vocab), max_len, /*keep_tail=*/false);
  pair.source_index = source_index;
  return pair;
}

TokenSequence encode_response_text(const std::string& text, const Vocabulary& vocab,
                                   std::size_t max_len) {
  return pack_ids(text_ids(text, vocab), max_len, /*keep_tail=*/false);
}

std::vector<EncodedPair> encode_corpus(const std::vector<Dialogue>& corpus,
                                       const Vocabulary& vocab, std::size_t max_len) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.push_back(encode_dialogue(corpus[i], vocab, max_len, i));
  }
  return out;
}

Batch sample_batch(const std::vector<EncodedPair>& dataset, std::size_t n,
                   std::mt19937_64& rng) {
  if (n < 2) throw std::invalid_argument("batch size must be >= 2, got " + std::to_string(n));
  if (n > dataset.size()) {
    throw std::invalid_argument("batch size " + std::to_string(n) +
                                " exceeds dataset size " + std::to_string(dataset.size()));
  }
  Batch b;
  b.indices = sample_without_replacement(rng, dataset.size(), n);
  b.contexts.reserve(n);
  b.responses.reserve(n);
  for (std::size_t idx : b.indices) {
    b.contexts.push_back(dataset[idx].context);
    b.responses.push_back(dataset[idx].response);
  }
  return b;
}

Batch sample_batch(const std::vector<EncodedPair>& dataset, std::size_t n,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_batch(dataset, n, rng);
}

Batch sample_batch_distinct_responses(const std::vector<EncodedPair>& dataset,
                                      std::size_t n, std::mt19937_64& rng,
                                      std::size_t max_attempts) {
  for (std::size_t attempt = 0;; ++attempt) {
    Batch b = sample_batch(dataset, n, rng);
    bool dup = false;
    for (std::size_t i = 0; i < n && !dup; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (b.responses[i].ids == b.responses[j].ids) {
          dup = true;
          break;
        }
      }
    }
    if (!dup || attempt + 1 >= max_attempts) return b;
  }
}

CandidateList build_candidate_list(const std::vector<Dialogue>& corpus,
                                   std::size_t top_l, const Vocabulary& vocab,
                                   std::size_t max_len) {
  if (top_l < 2) throw std::invalid_argument("candidate list needs at least 2 entries");
  std::map<std::string, std::size_t> counts;
  for (const Dialogue& d : corpus) ++counts[d.response];
  if (counts.size() < top_l) {
    throw DataError("requested " + std::to_string(top_l) +
                    " candidates but the corpus has only " + std::to_string(counts.size()) +
                    " distinct responses");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ranked.resize(top_l);

  CandidateList list;
  std::size_t total = 0;
  for (auto& [text, count] : ranked) total += count;
  for (auto& [text, count] : ranked) {
    list.responses.push_back(text);
    list.encoded.push_back(encode_response_text(text, vocab, max_len));
    list.freq.push_back(static_cast<double>(count) / static_cast<double>(total));
  }
  return list;
}

}  // namespace ade
