#pragma once

#include <string>
#include <vector>

#include "ade/corpus.hpp"
#include "ade/objectives.hpp"
#include "ade/params.hpp"

namespace ade {

struct WeightedToken {
  std::string text;
  double weight = 0.0;  // in [0,1]; each side's maximum is exactly 1
};

struct HeatmapDocument {
  std::vector<WeightedToken> context;
  std::vector<WeightedToken> response;
  double score = 0.0;   // variant score of the pair, unnormalized
  std::string variant;  // scoring variant name
};

// Position-importance weights for one context/response pair, normalized per
// side by that side's maximum so the strongest token renders fully opaque.
// Token texts are the surface forms kept after truncation (the context keeps
// its tail, the response its head). Throws DataError when either text
// tokenizes to nothing.
HeatmapDocument build_heatmap(const ParameterStore& store,
                              const ModelConfig& cfg, const Vocabulary& vocab,
                              std::size_t max_len,
                              const std::string& context_text,
                              const std::string& response_text);

// Standalone HTML page: exactly one span per token, background opacity equal
// to the token weight. Token text is HTML-escaped.
std::string render_html(const HeatmapDocument& doc);

// Terminal rendering using eight 256-color background shades, light to dark.
std::string render_ansi(const HeatmapDocument& doc);

}  // namespace ade
