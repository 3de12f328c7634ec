#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "uiharvest/geometry.hpp"

namespace uiharvest {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// "2026-10-15T08:30:00.250Z"
std::string format_timestamp(Timestamp t);
/// Compact form used in directory names: "20261015T083000250Z".
std::string format_timestamp_compact(Timestamp t);
/// Parses the ISO form produced by format_timestamp. Throws Error{parse}.
Timestamp parse_timestamp(std::string_view text);

// One accessibility-tree node with layout and style.
struct AxNode {
  std::int64_t node_id = 0;
  std::optional<std::int64_t> parent_id;
  std::string role;
  std::optional<std::string> name;
  std::int64_t dom_index = 0;
  std::optional<BoxModel> boxes;
  std::map<std::string, std::string> style;
  bool clickable = false;
  bool negative_margin = false;

  friend bool operator==(const AxNode&, const AxNode&) = default;
};

// Outputs of the in-page probe scripts. A field is null when its probe did
// not run or failed.
struct ProbeReport {
  std::optional<int> overlays_dismissed;
  std::optional<bool> content_width_ok;
  std::optional<bool> has_viewport_meta;
  std::vector<std::string> links;

  friend bool operator==(const ProbeReport&, const ProbeReport&) = default;
};

struct Viewport {
  int width = 0;
  int height = 0;
  double scale = 1.0;

  friend bool operator==(const Viewport&, const Viewport&) = default;
};

// One (URL, device, time) capture.
struct PageSample {
  std::string sample_id;
  std::string url;
  std::string registrable_domain;
  std::string device;
  Timestamp captured_at{};
  Viewport viewport;
  std::string viewport_image_ref;
  std::string fullpage_image_ref;
  int fullpage_height = 0;  // CSS px, after the height cap
  bool fullpage_truncated = false;
  std::vector<AxNode> axtree;
  std::optional<ProbeReport> probe;
  std::map<std::string, double> timings;  // phase -> ms

  friend bool operator==(const PageSample&, const PageSample&) = default;
};

inline constexpr int kSchemaVersion = 1;

/// Content hash of (url, device, captured_at).
std::string compute_sample_id(std::string_view url, std::string_view device,
                              Timestamp captured_at);

void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const AxNode& n);
void from_json(const nlohmann::json& j, AxNode& n);
void to_json(nlohmann::json& j, const ProbeReport& p);
void from_json(const nlohmann::json& j, ProbeReport& p);

/// meta.json document (every field except the tree).
nlohmann::json sample_meta_json(const PageSample& s);
/// Fills the non-tree fields of s from a meta.json document.
void read_sample_meta(const nlohmann::json& meta, PageSample& s);

// Parent/child index over a flat node list.
class AxTree {
 public:
  /// Throws Error{validation} unless there is exactly one root, every
  /// parent_id names a node, ids are unique, there are no cycles and all
  /// boxes have non-negative extents.
  explicit AxTree(const std::vector<AxNode>& nodes);

  const AxNode& node(std::int64_t id) const { return *nodes_[pos_.at(id)]; }
  const AxNode* find(std::int64_t id) const;
  const AxNode* parent(const AxNode& n) const;
  const std::vector<std::int64_t>& children(std::int64_t id) const;
  const AxNode& root() const { return *nodes_[root_]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<const AxNode*>& nodes() const noexcept { return nodes_; }
  bool is_leaf(const AxNode& n) const { return children(n.node_id).empty(); }

 private:
  std::vector<const AxNode*> nodes_;
  std::unordered_map<std::int64_t, std::size_t> pos_;
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> children_;
  std::size_t root_ = 0;
};

}  // namespace uiharvest
