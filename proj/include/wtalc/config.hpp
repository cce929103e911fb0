#pragma once

// Flat "key = value" configuration files. '#' starts a comment.

#include <filesystem>
#include <map>
#include <string>

#include "wtalc/optim.hpp"

namespace wtalc {

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

// Keys match the train command's flag names: lambda, alpha, delta, s,
// keep_prob, T_seconds, lr, batch_size, min_pairs, iterations, seed, F, D,
// beta1, beta2, adam_epsilon, checkpoint_every, checkpoint_dir.
// Throws DomainError for an unknown key or an unparsable value.
void apply_config_value(TrainConfig& config, const std::string& key, const std::string& value);
void apply_key_values(TrainConfig& config, const std::map<std::string, std::string>& values);

// One "key = value" line per field, in the order above.
std::string to_key_values(const TrainConfig& config);

}  // namespace wtalc
