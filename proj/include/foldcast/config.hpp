#pragma once

#include <map>
#include <string>
#include <vector>

#include "foldcast/data.hpp"
#include "foldcast/model.hpp"
#include "foldcast/training.hpp"

namespace foldcast {

/// Flat `key = value` configuration text: one pair per line, `#` starts a
/// comment, lists are comma-separated. Unknown keys are rejected.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key) const;

  /// Throws ConfigError on any key outside `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> kv_;
  std::string origin_;
};

/// Everything a run needs, bundled.
struct RunOptions {
  ModelConfig model;
  TrainConfig train;
  LoadOptions data;
};

/// Builds options from a config file, validating keys. Flags applied by the
/// CLI afterwards take precedence over file values.
RunOptions options_from_config(const KeyValueConfig& cfg);

}  // namespace foldcast
