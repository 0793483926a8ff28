#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ade/checkpoint.hpp"
#include "ade/errors.hpp"
#include "ade/evaluation.hpp"
#include "ade/rng.hpp"
#include "ade/runconfig.hpp"
#include "ade/trainer.hpp"
#include "ade/visualize.hpp"

namespace {

using namespace ade;

// Parameter init stream; the trainer reserves streams 1..3 of the same seed.
constexpr std::uint64_t kInitStream = 4;

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("ADE_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

std::string meta_path(const std::string& checkpoint) {
  return checkpoint + ".meta.json";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

// ----- model metadata sidecar ------------------------------------------------

nlohmann::ordered_json model_meta(const RunConfig& rc, const Vocabulary& vocab) {
  const ModelConfig& m = rc.train.model;
  nlohmann::ordered_json j;
  j["variant"] = variant_name(m.variant);
  j["gamma"] = m.gamma;
  j["beta"] = m.beta;
  j["reg_symmetric"] = m.reg_symmetric;
  j["layers"] = m.encoder.layers;
  j["model_dim"] = m.encoder.model_dim;
  j["heads"] = m.encoder.heads;
  j["word_dim"] = m.encoder.word_dim;
  j["ffn_dim"] = m.encoder.ffn_dim;
  j["dropout"] = m.encoder.dropout;
  j["alpha"] = m.encoder.alpha;
  j["max_len"] = rc.max_len;
  j["context_messages"] = rc.context_messages;
  j["vocab"] = vocab.tokens();
  return j;
}

struct LoadedModel {
  ParameterStore store;
  ModelConfig cfg;
  Vocabulary vocab;
  std::size_t max_len = 0;
  std::size_t context_messages = 5;
};

LoadedModel load_model(const std::string& checkpoint) {
  std::ifstream in(meta_path(checkpoint), std::ios::binary);
  if (!in) throw DataError("cannot read model metadata: " + meta_path(checkpoint));

  LoadedModel m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    m.cfg.variant = parse_variant(j.at("variant").get<std::string>());
    m.cfg.gamma = j.at("gamma").get<double>();
    m.cfg.beta = j.at("beta").get<double>();
    m.cfg.reg_symmetric = j.at("reg_symmetric").get<bool>();
    m.cfg.encoder.layers = j.at("layers").get<std::size_t>();
    m.cfg.encoder.model_dim = j.at("model_dim").get<std::size_t>();
    m.cfg.encoder.heads = j.at("heads").get<std::size_t>();
    m.cfg.encoder.word_dim = j.at("word_dim").get<std::size_t>();
    m.cfg.encoder.ffn_dim = j.at("ffn_dim").get<std::size_t>();
    m.cfg.encoder.dropout = j.at("dropout").get<double>();
    m.cfg.encoder.alpha = j.at("alpha").get<double>();
    m.max_len = j.at("max_len").get<std::size_t>();
    m.context_messages = j.at("context_messages").get<std::size_t>();
    m.vocab = Vocabulary::from_tokens(
        j.at("vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model metadata " + meta_path(checkpoint) + ": " +
                    e.what());
  }

  m.store = load_checkpoint(checkpoint);
  const Tensor& table = m.store.at("embedding/table").value;
  if (table.rows() != m.vocab.size())
    throw DataError("checkpoint/vocabulary size mismatch: embedding has " +
                    std::to_string(table.rows()) +
                    " rows, metadata vocabulary has " +
                    std::to_string(m.vocab.size()) + " tokens");
  return m;
}

// ----- train -----------------------------------------------------------------

nlohmann::ordered_json report_json(const TrainReport& r,
                                   const std::string& checkpoint) {
  nlohmann::ordered_json j;
  j["train_pairs"] = r.train_pairs;
  j["val_pairs"] = r.val_pairs;
  j["steps"] = r.history.size();
  j["wall_seconds"] = r.wall_seconds;
  j["checkpoint"] = checkpoint;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const StepRecord& s : r.history) {
    hist.push_back({{"step", s.step},
                    {"total", s.total},
                    {"retrieval", s.retrieval},
                    {"mi", s.mi},
                    {"grad_norm", s.grad_norm},
                    {"critic_bound", s.critic_bound}});
  }
  j["history"] = std::move(hist);
  nlohmann::ordered_json vals = nlohmann::ordered_json::array();
  for (const ValRecord& v : r.val_history) {
    vals.push_back({{"step", v.step},
                    {"retrieval", v.retrieval},
                    {"recall_at_1", v.recall1}});
  }
  j["val_history"] = std::move(vals);
  return j;
}

int cmd_train(const std::string& config_path) {
  const LogLevel log = log_level();
  const RunConfig rc = load_run_config(config_path);

  const std::vector<Dialogue> dialogues =
      load_dialogues_jsonl(rc.data, rc.context_messages);
  const Vocabulary vocab = Vocabulary::build(dialogues, rc.min_count);
  const std::vector<EncodedPair> dataset =
      encode_corpus(dialogues, vocab, rc.max_len);
  if (log != LogLevel::Quiet)
    std::cerr << "loaded " << dataset.size() << " pairs, vocabulary "
              << vocab.size() << " tokens\n";

  ParameterStore store;
  std::mt19937_64 init_rng(mix64(rc.train.seed, kInitStream));
  create_model_params(store, rc.train.model, vocab.size(), init_rng);

  write_text_file(meta_path(rc.checkpoint), model_meta(rc, vocab).dump(2));

  const std::size_t stride =
      std::max<std::size_t>(1, rc.train.steps / 10);
  const StepHook on_step = [&](const StepRecord& s) {
    if (log == LogLevel::Quiet) return;
    if (log == LogLevel::Debug || s.step % stride == 0 ||
        s.step == rc.train.steps) {
      std::cerr << "step " << s.step << "  total " << s.total << "  retrieval "
                << s.retrieval;
      if (variant_regularized(rc.train.model.variant))
        std::cerr << "  leftover-info " << s.mi << "  critic " << s.critic_bound;
      std::cerr << "\n";
    }
  };
  const EvalHook on_eval = [&](const TrainReport& so_far) {
    save_checkpoint(store, rc.checkpoint);
    if (log == LogLevel::Quiet) return;
    const ValRecord& v = so_far.val_history.back();
    std::cerr << "validation @ step " << v.step << "  loss " << v.retrieval
              << "  recall@1 " << v.recall1 << "\n";
  };

  const TrainReport report = train(store, rc.train, dataset, on_eval, on_step);
  save_checkpoint(store, rc.checkpoint);
  write_text_file(rc.checkpoint + ".report.json",
                  report_json(report, rc.checkpoint).dump(2));

  std::cout << "trained " << report.history.size() << " steps ("
            << report.train_pairs << " train / " << report.val_pairs
            << " validation pairs) in " << report.wall_seconds << "s\n"
            << "final total " << report.history.back().total << "\n"
            << "checkpoint: " << rc.checkpoint << "\n"
            << "report: " << rc.checkpoint << ".report.json\n";
  return 0;
}

// ----- eval ------------------------------------------------------------------

std::vector<std::size_t> parse_k_list(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::string item;
  std::istringstream in(spec);
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
    if (end == item.c_str() || *end != '\0' || v == 0)
      throw UsageError("--k expects positive integers, got '" + item + "'");
    ks.push_back(std::size_t(v));
  }
  if (ks.empty()) throw UsageError("--k list is empty");
  return ks;
}

int cmd_eval(const std::string& checkpoint, const std::string& data,
             const std::string& protocol, const std::string& k_spec,
             bool use_prior, std::size_t top_l, std::uint64_t seed,
             const std::string& out_path) {
  const std::vector<std::size_t> ks = parse_k_list(k_spec);
  if (protocol != "fixed" && protocol != "distractor19")
    throw UsageError("unknown protocol '" + protocol +
                     "' (valid: fixed, distractor19)");
  if (use_prior && protocol != "fixed")
    throw UsageError("--prior applies to the fixed protocol only");

  const LoadedModel m = load_model(checkpoint);
  const std::vector<Dialogue> dialogues =
      load_dialogues_jsonl(data, m.context_messages);
  const Scorer scorer = model_scorer(m.store, m.cfg, m.vocab, m.max_len);

  EvalMetrics metrics;
  if (protocol == "fixed") {
    const CandidateList list =
        build_candidate_list(dialogues, top_l, m.vocab, m.max_len);
    metrics = evaluate_fixed_list(scorer, dialogues, list, ks, use_prior);
  } else {
    metrics = evaluate_distractor19(scorer, dialogues, ks, seed);
  }

  std::cout << metrics_table(metrics) << metrics_json(metrics) << "\n";
  if (!out_path.empty()) write_text_file(out_path, metrics_json(metrics));
  return 0;
}

// ----- visualize ---------------------------------------------------------------

int cmd_visualize(const std::string& checkpoint, const std::string& context,
                  const std::string& response, const std::string& format,
                  const std::string& out_path) {
  if (format != "html" && format != "ansi")
    throw UsageError("unknown format '" + format + "' (valid: html, ansi)");
  const LoadedModel m = load_model(checkpoint);
  const HeatmapDocument doc =
      build_heatmap(m.store, m.cfg, m.vocab, m.max_len, context, response);
  const std::string rendered =
      format == "html" ? render_html(doc) : render_ansi(doc);
  if (out_path.empty())
    std::cout << rendered;
  else
    write_text_file(out_path, rendered);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attentive dual-encoder dialogue response retrieval"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", config_path, "key = value run config file")
      ->required();

  std::string checkpoint, data, protocol = "fixed", k_spec = "1";
  std::string out_path;
  bool use_prior = false;
  std::size_t top_l = 1000;
  std::uint64_t eval_seed = 1;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint path")
      ->required();
  eval_cmd->add_option("--data", data, "evaluation dialogues (JSON lines)")
      ->required();
  eval_cmd->add_option("--protocol", protocol, "fixed | distractor19");
  eval_cmd->add_option("--k", k_spec, "comma-separated cutoffs, e.g. 1,5");
  eval_cmd->add_flag("--prior", use_prior,
                     "add log candidate frequency to scores (fixed protocol)");
  eval_cmd->add_option("--top-l", top_l,
                       "fixed protocol: candidate list size cap");
  eval_cmd->add_option("--seed", eval_seed, "distractor sampling seed");
  eval_cmd->add_option("--out", out_path, "also write metrics JSON here");

  std::string vis_checkpoint, vis_context, vis_response, vis_format = "html";
  std::string vis_out;
  CLI::App* vis_cmd =
      app.add_subcommand("visualize", "export a token-importance heatmap");
  vis_cmd->add_option("--checkpoint", vis_checkpoint, "model checkpoint path")
      ->required();
  vis_cmd->add_option("--context", vis_context, "context text")->required();
  vis_cmd->add_option("--response", vis_response, "response text")->required();
  vis_cmd->add_option("--format", vis_format, "html | ansi");
  vis_cmd->add_option("--out", vis_out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return cmd_train(config_path);
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint, data, protocol, k_spec, use_prior, top_l,
                      eval_seed, out_path);
    if (vis_cmd->parsed())
      return cmd_visualize(vis_checkpoint, vis_context, vis_response,
                           vis_format, vis_out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
