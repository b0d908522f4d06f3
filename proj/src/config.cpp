#include "foldcast/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace foldcast {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get_str(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (it->second.empty() || end != it->second.c_str() + it->second.size())
    throw ConfigError("config key '" + key + "': '" + it->second + "' is not an integer");
  return static_cast<std::int64_t>(v);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || end != it->second.c_str() + it->second.size())
    throw ConfigError("config key '" + key + "': '" + it->second + "' is not a number");
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key) const {
  auto it = kv_.find(key);
  std::vector<int> out;
  if (it == kv_.end()) return out;
  std::stringstream ss(it->second);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    char* end = nullptr;
    const long v = std::strtol(cell.c_str(), &end, 10);
    if (end != cell.c_str() + cell.size())
      throw ConfigError("config key '" + key + "': '" + cell + "' is not an integer");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void KeyValueConfig::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : kv_) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw ConfigError(origin_ + ": unknown config key '" + key + "'");
  }
}

RunOptions options_from_config(const KeyValueConfig& cfg) {
  cfg.require_known({"seed",     "lr",        "batch_size", "max_epochs", "patience",
                     "beta1",    "beta2",     "adam_eps",   "clip_norm",  "dropout",
                     "embed_dim", "heads",    "k",          "rho",        "blocks",
                     "context",  "horizon",   "periods",    "use_decomposition",
                     "use_intra", "use_inter", "use_cross", "split",      "norm_guard"});
  RunOptions o;
  o.train.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
  o.train.lr = cfg.get_double("lr", o.train.lr);
  o.train.batch_size = static_cast<int>(cfg.get_int("batch_size", o.train.batch_size));
  o.train.max_epochs = static_cast<int>(cfg.get_int("max_epochs", o.train.max_epochs));
  o.train.patience = static_cast<int>(cfg.get_int("patience", o.train.patience));
  o.train.beta1 = cfg.get_double("beta1", o.train.beta1);
  o.train.beta2 = cfg.get_double("beta2", o.train.beta2);
  o.train.adam_eps = cfg.get_double("adam_eps", o.train.adam_eps);
  o.train.clip_norm = cfg.get_double("clip_norm", o.train.clip_norm);

  o.model.dropout = cfg.get_double("dropout", o.model.dropout);
  o.model.embed_dim = static_cast<int>(cfg.get_int("embed_dim", o.model.embed_dim));
  o.model.heads = static_cast<int>(cfg.get_int("heads", o.model.heads));
  o.model.top_k = static_cast<int>(cfg.get_int("k", o.model.top_k));
  o.model.rho = static_cast<int>(cfg.get_int("rho", o.model.rho));
  o.model.blocks = static_cast<int>(cfg.get_int("blocks", o.model.blocks));
  o.model.context = cfg.get_int("context", o.model.context);
  o.model.horizon = cfg.get_int("horizon", o.model.horizon);
  o.model.preset_periods = cfg.get_int_list("periods");
  o.model.ablation.use_decomposition =
      cfg.get_bool("use_decomposition", o.model.ablation.use_decomposition);
  o.model.ablation.use_intra = cfg.get_bool("use_intra", o.model.ablation.use_intra);
  o.model.ablation.use_inter = cfg.get_bool("use_inter", o.model.ablation.use_inter);
  o.model.ablation.use_cross = cfg.get_bool("use_cross", o.model.ablation.use_cross);

  o.data.split = cfg.get_str("split", o.data.split);
  o.data.epsilon_guard = cfg.get_bool("norm_guard", o.data.epsilon_guard);
  return o;
}

}  // namespace foldcast
