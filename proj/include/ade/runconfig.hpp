#pragma once

#include <string>

#include "ade/trainer.hpp"

namespace ade {

// Everything a training run needs, read from a flat key=value file.
struct RunConfig {
  std::string data;        // training dialogues, JSON-lines
  std::string checkpoint;  // output model path
  TrainConfig train;
  std::size_t max_len = 60;          // token positions per encoded sequence
  std::size_t min_count = 1;         // vocabulary frequency threshold
  std::size_t context_messages = 5;  // most recent messages kept per dialogue

  void validate() const;  // throws UsageError naming the offending key
};

// Parses `key = value` lines; '#' starts a comment, blank lines are ignored,
// the last occurrence of a repeated key wins. Unknown keys, malformed lines,
// bad values, missing required keys (data, checkpoint), and out-of-range
// settings raise UsageError naming the key. Keys:
//   data checkpoint variant steps batch critic_steps seed eval_every
//   lr gamma beta alpha grad_clip ema_decay val_fraction dropout
//   layers model_dim heads word_dim ffn_dim
//   max_len min_count context_messages reg_symmetric
RunConfig parse_run_config(const std::string& text);

// Reads the file (DataError naming the path if unreadable) and parses it.
RunConfig load_run_config(const std::string& path);

}  // namespace ade
