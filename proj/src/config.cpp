#include "uiharvest/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>

#include "uiharvest/errors.hpp"
#include "uiharvest/store.hpp"

namespace uiharvest {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TomlLine {
 public:
  TomlLine(std::string_view text, std::size_t number) : s_(text), line_(number) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::parse, "config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  bool at_end() {
    skip_ws();
    return i_ >= s_.size() || s_[i_] == '#';
  }
  bool eat(char c) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  std::string key() {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == '"') return basic_string();
    const std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                              s_[i_] == '-')) {
      ++i_;
    }
    if (i_ == start) fail("expected a key");
    return std::string(s_.substr(start, i_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    while (eat('.')) parts.push_back(key());
    return parts;
  }

  json value() {
    skip_ws();
    if (i_ >= s_.size()) fail("missing value");
    const char c = s_[i_];
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    return number();
  }

 private:
  std::string basic_string() {
    ++i_;
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\') {
        if (i_ >= s_.size()) fail("unterminated escape");
        switch (s_[i_++]) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail("unsupported escape");
        }
      }
      out += c;
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return out;
  }

  std::string literal_string() {
    ++i_;
    const std::size_t end = s_.find('\'', i_);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(i_, end - i_));
    i_ = end + 1;
    return out;
  }

  json array() {
    ++i_;
    json out = json::array();
    while (true) {
      if (eat(']')) return out;
      out.push_back(value());
      if (eat(']')) return out;
      expect(',');
    }
  }

  json number() {
    const std::size_t start = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '+' ||
                              s_[i_] == '-' || s_[i_] == '.' || s_[i_] == '_')) {
      ++i_;
    }
    std::string text;
    for (char c : s_.substr(start, i_ - start)) {
      if (c != '_') text += c;
    }
    if (text.empty()) fail("expected a value");
    const bool is_float = text.find_first_of(".eE") != std::string::npos;
    const char* first = text.data() + (text[0] == '+' ? 1 : 0);
    const char* last = text.data() + text.size();
    if (is_float) {
      char* end = nullptr;
      const double v = std::strtod(first, &end);
      if (end != last) fail("bad number '" + text + "'");
      return v;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("bad number '" + text + "'");
    return v;
  }

  std::string_view s_;
  std::size_t i_ = 0;
  std::size_t line_;
};

json& descend(json& root, const std::vector<std::string>& parts, std::size_t count,
              const TomlLine& line) {
  json* node = &root;
  for (std::size_t k = 0; k < count; ++k) {
    json& next = (*node)[parts[k]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) line.fail("'" + parts[k] + "' is not a table");
    node = &next;
  }
  return *node;
}

}  // namespace

json parse_toml(std::string_view text) {
  json root = json::object();
  std::vector<std::string> table;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    pos = end + 1;
    TomlLine line(raw, ++number);
    if (line.at_end()) continue;
    if (line.eat('[')) {
      table = line.dotted_key();
      line.expect(']');
      if (!line.at_end()) line.fail("trailing characters");
      descend(root, table, table.size(), line);
      continue;
    }
    const auto key = line.dotted_key();
    line.expect('=');
    json v = line.value();
    if (!line.at_end()) line.fail("trailing characters");
    json& parent = descend(descend(root, table, table.size(), line), key, key.size() - 1, line);
    if (parent.contains(key.back())) line.fail("duplicate key '" + key.back() + "'");
    parent[key.back()] = std::move(v);
  }
  return root;
}

namespace {

// Walks one table, handing each key to its reader and rejecting the rest.
class Reader {
 public:
  Reader(const json& table, std::string prefix, const fs::path& base)
      : table_(table), prefix_(std::move(prefix)), base_(base) {
    if (!table_.is_object()) fail(prefix_, "must be a table");
  }

  static void fail(const std::string& key, const std::string& what) {
    throw Error(ErrorKind::config, "config key '" + key + "' " + what);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw std::invalid_argument("number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() || (std::is_unsigned_v<T> && v->get<std::int64_t>() < 0)) {
          throw std::invalid_argument("integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("string");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      fail(full(key), "has the wrong type");
    }
  }

  /// Existing path (or, with must_exist false, a path whose parent exists).
  void path(const std::string& key, std::optional<fs::path>& out, bool must_exist = true) {
    std::string text;
    if (!find(key)) return;
    get(key, text);
    fs::path p = fs::path(text).is_relative() ? base_ / text : fs::path(text);
    p = p.lexically_normal();
    const fs::path check = must_exist ? p : (p.has_parent_path() ? p.parent_path() : fs::path("."));
    if (!fs::exists(check)) fail(full(key), "refers to a missing path: " + check.string());
    out = p;
  }

  const json* sub(const std::string& key) { return find(key); }

  void finish() const {
    for (const auto& [k, v] : table_.items()) {
      if (!seen_.count(k)) fail(full(k), "is not recognized");
    }
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &*it;
  }
  std::string full(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json& table_;
  std::string prefix_;
  fs::path base_;
  std::set<std::string> seen_;
};

}  // namespace

ToolConfig ToolConfig::from_json(const json& doc, const fs::path& base_dir) {
  ToolConfig cfg;
  Reader top(doc, "", base_dir);
  static const json empty = json::object();
  auto section = [&](const std::string& name, const std::function<void(Reader&)>& body) {
    const json* t = top.sub(name);
    Reader r(t ? *t : empty, name, base_dir);
    body(r);
    r.finish();
  };

  section("coordinator", [&](Reader& r) {
    r.get("address", cfg.coordinator_address);
    r.get("lease_ttl_secs", cfg.coordinator.lease_ttl_secs);
    r.get("snapshot_every", cfg.coordinator.snapshot_every);
    r.get("device_plan", cfg.coordinator.device_plan);
    r.path("seed_file", cfg.seed_file);
    r.path("snapshot_path", cfg.snapshot_path, false);
    r.path("public_suffix_list", cfg.public_suffix_list);
  });
  section("frontier", [&](Reader& r) {
    r.get("p_min", cfg.coordinator.frontier.p_min);
    r.get("max_queued_per_host", cfg.coordinator.frontier.max_queued_per_host);
  });
  section("dataset", [&](Reader& r) {
    r.path("root", cfg.dataset_root);
    r.get("salt", cfg.dataset_salt);
  });
  section("worker", [&](Reader& r) {
    r.get("browser_endpoint", cfg.browser_endpoint);
    r.path("profiles", cfg.profiles);
    r.path("probes_dir", cfg.probes_dir);
  });
  section("budget", [&](Reader& r) {
    r.get("total_secs", cfg.budget.total_secs);
    r.get("per_device_nav_secs", cfg.budget.per_device_nav_secs);
    r.get("settle_quiet_secs", cfg.budget.settle_quiet_secs);
    r.get("height_cap", cfg.budget.height_cap);
    r.get("image_quality", cfg.budget.image_quality);
  });
  top.finish();

  cfg.coordinator.snapshot_path = cfg.snapshot_path;
  cfg.coordinator.validate();
  if (cfg.budget.total_secs <= 0 || cfg.budget.per_device_nav_secs <= 0 ||
      cfg.budget.settle_quiet_secs < 0 || cfg.budget.height_cap < 1 ||
      cfg.budget.image_quality < 1 || cfg.budget.image_quality > 100) {
    throw Error(ErrorKind::config, "budget settings out of range");
  }
  return cfg;
}

ToolConfig ToolConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorKind::config, "cannot read config " + path.string());
  }
  json doc;
  try {
    doc = parse_toml(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::optional<fs::path> config_path(const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return fs::path(*explicit_path);
  if (const char* env = std::getenv("UIHARVEST_CONFIG"); env && *env) return fs::path(env);
  return std::nullopt;
}

ToolConfig load_tool_config(const std::optional<std::string>& explicit_path) {
  if (auto p = config_path(explicit_path)) return ToolConfig::load(*p);
  return ToolConfig{};
}

}  // namespace uiharvest
