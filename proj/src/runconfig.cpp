#include "ade/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ade/errors.hpp"

namespace ade {

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0' ||
      value.find('-') != std::string::npos)
    throw UsageError("config key '" + key + "': invalid count '" + value + "'");
  return std::size_t(v);
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw UsageError("config key '" + key + "': invalid number '" + value +
                     "'");
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config key '" + key + "': expected true or false, got '" +
                   value + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (data.empty()) throw UsageError("config key 'data' is required");
  if (checkpoint.empty())
    throw UsageError("config key 'checkpoint' is required");
  if (max_len < 1) throw UsageError("config key 'max_len' must be >= 1");
  if (min_count < 1) throw UsageError("config key 'min_count' must be >= 1");
  if (context_messages < 1)
    throw UsageError("config key 'context_messages' must be >= 1");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    // Range errors on config-supplied values are usage errors at this layer.
    throw UsageError(e.what());
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig rc;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trimmed(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected key = value, got '" + line + "'");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty())
      throw UsageError("config line " + std::to_string(line_no) +
                       ": missing key before '='");

    if (key == "data") rc.data = value;
    else if (key == "checkpoint") rc.checkpoint = value;
    else if (key == "variant") rc.train.model.variant = parse_variant(value);
    else if (key == "steps") rc.train.steps = parse_size(key, value);
    else if (key == "batch") rc.train.batch = parse_size(key, value);
    else if (key == "critic_steps") rc.train.critic_steps = parse_size(key, value);
    else if (key == "seed") rc.train.seed = parse_size(key, value);
    else if (key == "eval_every") rc.train.eval_every = parse_size(key, value);
    else if (key == "lr") rc.train.lr = parse_real(key, value);
    else if (key == "gamma") rc.train.model.gamma = parse_real(key, value);
    else if (key == "beta") rc.train.model.beta = parse_real(key, value);
    else if (key == "alpha") rc.train.model.encoder.alpha = parse_real(key, value);
    else if (key == "grad_clip") rc.train.grad_clip = parse_real(key, value);
    else if (key == "ema_decay") rc.train.ema_decay = parse_real(key, value);
    else if (key == "val_fraction") rc.train.val_fraction = parse_real(key, value);
    else if (key == "dropout") rc.train.model.encoder.dropout = parse_real(key, value);
    else if (key == "layers") rc.train.model.encoder.layers = parse_size(key, value);
    else if (key == "model_dim") rc.train.model.encoder.model_dim = parse_size(key, value);
    else if (key == "heads") rc.train.model.encoder.heads = parse_size(key, value);
    else if (key == "word_dim") rc.train.model.encoder.word_dim = parse_size(key, value);
    else if (key == "ffn_dim") rc.train.model.encoder.ffn_dim = parse_size(key, value);
    else if (key == "max_len") rc.max_len = parse_size(key, value);
    else if (key == "min_count") rc.min_count = parse_size(key, value);
    else if (key == "context_messages") rc.context_messages = parse_size(key, value);
    else if (key == "reg_symmetric") rc.train.model.reg_symmetric = parse_flag(key, value);
    else throw UsageError("unknown config key '" + key + "'");
  }
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace ade
