#include "wtalc/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "wtalc/errors.hpp"

namespace wtalc {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw DomainError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw DomainError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

}  // namespace

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "lambda") c.lambda = to_double(key, value);
  else if (key == "alpha") c.alpha = to_double(key, value);
  else if (key == "delta") c.margin = to_double(key, value);
  else if (key == "s") c.k_divisor = to_unsigned(key, value);
  else if (key == "keep_prob") c.keep_prob = to_double(key, value);
  else if (key == "T_seconds") c.clip_seconds = to_double(key, value);
  else if (key == "lr") c.learning_rate = to_double(key, value);
  else if (key == "batch_size") c.batch_size = to_unsigned(key, value);
  else if (key == "min_pairs") c.min_pairs = to_unsigned(key, value);
  else if (key == "iterations") c.iterations = to_unsigned(key, value);
  else if (key == "seed") c.seed = to_unsigned(key, value);
  else if (key == "F") c.feature_dim = to_unsigned(key, value);
  else if (key == "D") c.hidden_dim = to_unsigned(key, value);
  else if (key == "beta1") c.beta1 = to_double(key, value);
  else if (key == "beta2") c.beta2 = to_double(key, value);
  else if (key == "adam_epsilon") c.adam_epsilon = to_double(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = to_unsigned(key, value);
  else if (key == "checkpoint_dir") c.checkpoint_dir = value;
  else throw DomainError("unknown config key '" + key + "'");
}

void apply_key_values(TrainConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) apply_config_value(config, key, value);
}

std::string to_key_values(const TrainConfig& c) {
  std::ostringstream out;
  out << "lambda = " << format_double(c.lambda) << '\n'
      << "alpha = " << format_double(c.alpha) << '\n'
      << "delta = " << format_double(c.margin) << '\n'
      << "s = " << c.k_divisor << '\n'
      << "keep_prob = " << format_double(c.keep_prob) << '\n'
      << "T_seconds = " << format_double(c.clip_seconds) << '\n'
      << "lr = " << format_double(c.learning_rate) << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "min_pairs = " << c.min_pairs << '\n'
      << "iterations = " << c.iterations << '\n'
      << "seed = " << c.seed << '\n'
      << "F = " << c.feature_dim << '\n'
      << "D = " << c.hidden_dim << '\n'
      << "beta1 = " << format_double(c.beta1) << '\n'
      << "beta2 = " << format_double(c.beta2) << '\n'
      << "adam_epsilon = " << format_double(c.adam_epsilon) << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n';
  if (!c.checkpoint_dir.empty()) out << "checkpoint_dir = " << c.checkpoint_dir.string() << '\n';
  return out.str();
}

}  // namespace wtalc
