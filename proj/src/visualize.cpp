#include "ade/visualize.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "ade/attention.hpp"
#include "ade/errors.hpp"

namespace ade {

namespace {

std::vector<WeightedToken> side_tokens(std::vector<std::string> tokens,
                                       std::size_t max_len, bool keep_tail,
                                       const TokenSequence& encoded,
                                       const std::vector<double>& weights) {
  if (tokens.size() > max_len) {
    if (keep_tail)
      tokens.erase(tokens.begin(), tokens.end() - std::ptrdiff_t(max_len));
    else
      tokens.resize(max_len);
  }
  if (tokens.size() != encoded.length())
    throw std::logic_error("token/id alignment mismatch");

  double wmax = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    wmax = std::max(wmax, weights[i]);

  std::vector<WeightedToken> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.push_back({tokens[i], wmax > 0.0 ? weights[i] / wmax : 0.0});
  return out;
}

std::string escape_html(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void html_side(std::ostringstream& out, const char* label,
               const std::vector<WeightedToken>& tokens) {
  out << "<h2>" << label << "</h2>\n<p class=\"tokens\">";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << ' ';
    out << "<span style=\"background: rgba(214,93,14," << format4(tokens[i].weight)
        << ")\">" << escape_html(tokens[i].text) << "</span>";
  }
  out << "</p>\n";
}

void ansi_side(std::ostringstream& out, const char* label,
               const std::vector<WeightedToken>& tokens) {
  // Light-to-dark orange ramp in the 256-color palette.
  static const int kRamp[8] = {231, 230, 229, 223, 222, 216, 215, 208};
  out << label << ":\n  ";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << ' ';
    const int level = std::min(7, int(tokens[i].weight * 8.0));
    out << "\x1b[30;48;5;" << kRamp[level] << "m" << tokens[i].text
        << "\x1b[0m";
  }
  out << "\n";
}

}  // namespace

HeatmapDocument build_heatmap(const ParameterStore& store,
                              const ModelConfig& cfg, const Vocabulary& vocab,
                              std::size_t max_len,
                              const std::string& context_text,
                              const std::string& response_text) {
  std::vector<std::string> ctx_tokens = tokenize(context_text);
  std::vector<std::string> resp_tokens = tokenize(response_text);
  if (ctx_tokens.empty()) throw DataError("context text has no tokens");
  if (resp_tokens.empty()) throw DataError("response text has no tokens");

  const EncodedPair enc =
      encode_dialogue({{context_text}, response_text}, vocab, max_len);
  const SeqFeatures ctx = encode_plain(store, cfg, enc.context, true);
  const SeqFeatures resp = encode_plain(store, cfg, enc.response, false);
  const PairAttention pa =
      attend(ctx.features, ctx.mask, resp.features, resp.mask);

  HeatmapDocument doc;
  doc.context = side_tokens(std::move(ctx_tokens), max_len, true, enc.context,
                            pa.weights.context);
  doc.response = side_tokens(std::move(resp_tokens), max_len, false,
                             enc.response, pa.weights.response);
  doc.score = variant_score(cfg, ctx, resp);
  doc.variant = variant_name(cfg.variant);
  return doc;
}

std::string render_html(const HeatmapDocument& doc) {
  std::ostringstream out;
  out << "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>attention heatmap</title>\n<style>\n"
      << "body { font-family: sans-serif; margin: 2rem; background: #fff; "
         "color: #111; }\n"
      << ".tokens { line-height: 2.2; font-size: 1.1rem; }\n"
      << ".tokens span { padding: 0.15rem 0.3rem; border-radius: 3px; }\n"
      << "h2 { font-size: 0.9rem; text-transform: uppercase; letter-spacing: "
         "0.08em; color: #555; }\n"
      << ".meta { color: #555; font-size: 0.9rem; }\n"
      << "</style>\n</head>\n<body>\n"
      << "<p class=\"meta\">variant: " << escape_html(doc.variant)
      << " | score: " << format4(doc.score) << "</p>\n";
  html_side(out, "context", doc.context);
  html_side(out, "response", doc.response);
  out << "</body>\n</html>\n";
  return out.str();
}

std::string render_ansi(const HeatmapDocument& doc) {
  std::ostringstream out;
  out << "variant: " << doc.variant << " | score: " << format4(doc.score)
      << "\n";
  ansi_side(out, "context", doc.context);
  ansi_side(out, "response", doc.response);
  return out.str();
}

}  // namespace ade
