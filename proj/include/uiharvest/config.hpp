#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "uiharvest/coordinator.hpp"
#include "uiharvest/worker.hpp"

namespace uiharvest {

/// Reads the TOML subset used by the config file: [table] and [a.b]
/// headers, bare or quoted keys, strings, integers, floats, booleans and
/// single-line arrays of those. Throws Error{parse} naming the line.
nlohmann::json parse_toml(std::string_view text);

// Settings shared by all subcommands. Relative paths are resolved against
// the directory of the config file.
struct ToolConfig {
  std::string coordinator_address = "http://127.0.0.1:8700";
  std::optional<std::filesystem::path> dataset_root;
  std::string dataset_salt = "uiharvest";
  std::optional<std::filesystem::path> profiles;
  std::optional<std::filesystem::path> probes_dir;
  std::optional<std::filesystem::path> seed_file;
  std::optional<std::filesystem::path> public_suffix_list;
  std::optional<std::filesystem::path> snapshot_path;
  std::string browser_endpoint = "http://127.0.0.1:9222";
  CoordinatorConfig coordinator;
  CaptureBudget budget;

  /// Throws Error{config} on an unknown key, a mistyped value, an invalid
  /// setting or a referenced path that does not exist.
  static ToolConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  static ToolConfig load(const std::filesystem::path& path);
};

/// The explicit path if given, else $UIHARVEST_CONFIG if set.
std::optional<std::filesystem::path> config_path(const std::optional<std::string>& explicit_path);

/// Defaults when no config path is known.
ToolConfig load_tool_config(const std::optional<std::string>& explicit_path);

}  // namespace uiharvest
