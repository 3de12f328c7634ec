#include "uiharvest/sample.hpp"

#include <cstdio>
#include <unordered_set>

#include "uiharvest/errors.hpp"
#include "uiharvest/hash.hpp"

namespace uiharvest {

using nlohmann::json;

namespace {

struct Civil {
  int year;
  unsigned month, day, hour, minute, second, millis;
};

Civil to_civil(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const auto ms = (t - day_point).count();
  return Civil{int(ymd.year()),         unsigned(ymd.month()),
               unsigned(ymd.day()),     unsigned(ms / 3'600'000),
               unsigned(ms / 60'000 % 60), unsigned(ms / 1000 % 60),
               unsigned(ms % 1000)};
}

}  // namespace

std::string format_timestamp(Timestamp t) {
  const Civil c = to_civil(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02u.%03uZ", c.year,
                c.month, c.day, c.hour, c.minute, c.second, c.millis);
  return buf;
}

std::string format_timestamp_compact(Timestamp t) {
  const Civil c = to_civil(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d%02u%02uT%02u%02u%02u%03uZ", c.year,
                c.month, c.day, c.hour, c.minute, c.second, c.millis);
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  int consumed = 0;
  const std::string copy(text);
  const int n = std::sscanf(copy.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u.%3uZ%n", &y, &mo,
                            &d, &h, &mi, &s, &ms, &consumed);
  if (n != 7 || consumed != static_cast<int>(copy.size())) {
    throw Error(ErrorKind::parse, "bad timestamp: " + copy);
  }
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
    throw Error(ErrorKind::parse, "bad timestamp: " + copy);
  }
  return Timestamp{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} +
                   seconds{s} + milliseconds{ms}};
}

std::string compute_sample_id(std::string_view url, std::string_view device,
                              Timestamp captured_at) {
  std::string key(url);
  key += '\n';
  key += device;
  key += '\n';
  key += format_timestamp(captured_at);
  return sha256_hex(key, 32);
}

void to_json(json& j, const Rect& r) { j = json::array({r.x, r.y, r.w, r.h}); }

void from_json(const json& j, Rect& r) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorKind::validation, "rectangle must be [x, y, w, h]");
  }
  r = Rect{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
           j[3].get<double>()};
}

void to_json(json& j, const AxNode& n) {
  j = json{{"node_id", n.node_id},
           {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
           {"role", n.role},
           {"name", n.name ? json(*n.name) : json(nullptr)},
           {"dom_index", n.dom_index},
           {"style", n.style},
           {"clickable", n.clickable},
           {"negative_margin", n.negative_margin}};
  if (n.boxes) {
    j["boxes"] = json{{"content", n.boxes->content},
                      {"padding", n.boxes->padding},
                      {"border", n.boxes->border},
                      {"margin", n.boxes->margin}};
  } else {
    j["boxes"] = nullptr;
  }
}

void from_json(const json& j, AxNode& n) {
  n.node_id = j.at("node_id").get<std::int64_t>();
  const auto& parent = j.at("parent_id");
  n.parent_id = parent.is_null() ? std::nullopt
                                 : std::optional<std::int64_t>(parent.get<std::int64_t>());
  n.role = j.at("role").get<std::string>();
  const auto& name = j.at("name");
  n.name = name.is_null() ? std::nullopt : std::optional<std::string>(name.get<std::string>());
  n.dom_index = j.at("dom_index").get<std::int64_t>();
  n.style = j.value("style", std::map<std::string, std::string>{});
  n.clickable = j.value("clickable", false);
  n.negative_margin = j.value("negative_margin", false);
  const auto boxes = j.find("boxes");
  if (boxes == j.end() || boxes->is_null()) {
    n.boxes.reset();
  } else {
    n.boxes = BoxModel{boxes->at("content").get<Rect>(), boxes->at("padding").get<Rect>(),
                       boxes->at("border").get<Rect>(), boxes->at("margin").get<Rect>()};
  }
}

namespace {

template <typename T>
json nullable(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> read_nullable(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(json& j, const ProbeReport& p) {
  j = json{{"overlays_dismissed", nullable(p.overlays_dismissed)},
           {"content_width_ok", nullable(p.content_width_ok)},
           {"has_viewport_meta", nullable(p.has_viewport_meta)},
           {"links", p.links}};
}

void from_json(const json& j, ProbeReport& p) {
  p.overlays_dismissed = read_nullable<int>(j, "overlays_dismissed");
  p.content_width_ok = read_nullable<bool>(j, "content_width_ok");
  p.has_viewport_meta = read_nullable<bool>(j, "has_viewport_meta");
  p.links = j.value("links", std::vector<std::string>{});
}

json sample_meta_json(const PageSample& s) {
  return json{
      {"schema_version", kSchemaVersion},
      {"sample_id", s.sample_id},
      {"url", s.url},
      {"registrable_domain", s.registrable_domain},
      {"device", s.device},
      {"captured_at", format_timestamp(s.captured_at)},
      {"viewport",
       {{"width", s.viewport.width}, {"height", s.viewport.height}, {"scale", s.viewport.scale}}},
      {"viewport_image_ref", s.viewport_image_ref},
      {"fullpage_image_ref", s.fullpage_image_ref},
      {"fullpage_height", s.fullpage_height},
      {"fullpage_truncated", s.fullpage_truncated},
      {"probe", s.probe ? json(*s.probe) : json(nullptr)},
      {"timings", s.timings},
  };
}

void read_sample_meta(const json& meta, PageSample& s) {
  if (meta.value("schema_version", 0) != kSchemaVersion) {
    throw Error(ErrorKind::validation, "unsupported schema_version");
  }
  s.sample_id = meta.at("sample_id").get<std::string>();
  s.url = meta.at("url").get<std::string>();
  s.registrable_domain = meta.at("registrable_domain").get<std::string>();
  s.device = meta.at("device").get<std::string>();
  s.captured_at = parse_timestamp(meta.at("captured_at").get<std::string>());
  const auto& vp = meta.at("viewport");
  s.viewport = Viewport{vp.at("width").get<int>(), vp.at("height").get<int>(),
                        vp.at("scale").get<double>()};
  s.viewport_image_ref = meta.at("viewport_image_ref").get<std::string>();
  s.fullpage_image_ref = meta.at("fullpage_image_ref").get<std::string>();
  s.fullpage_height = meta.at("fullpage_height").get<int>();
  s.fullpage_truncated = meta.at("fullpage_truncated").get<bool>();
  const auto& probe = meta.at("probe");
  s.probe = probe.is_null() ? std::nullopt : std::optional<ProbeReport>(probe.get<ProbeReport>());
  s.timings = meta.value("timings", std::map<std::string, double>{});
}

AxTree::AxTree(const std::vector<AxNode>& nodes) {
  if (nodes.empty()) throw Error(ErrorKind::validation, "accessibility tree is empty");
  std::size_t roots = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const AxNode& n = nodes[i];
    if (!pos_.emplace(n.node_id, i).second) {
      throw Error(ErrorKind::validation, "duplicate node_id " + std::to_string(n.node_id));
    }
    nodes_.push_back(&n);
    if (!n.parent_id) {
      ++roots;
      root_ = i;
    }
    if (n.boxes) {
      for (const Rect* r : {&n.boxes->content, &n.boxes->padding, &n.boxes->border,
                            &n.boxes->margin}) {
        if (r->w < 0 || r->h < 0) {
          throw Error(ErrorKind::validation,
                      "negative box extent on node " + std::to_string(n.node_id));
        }
      }
    }
  }
  if (roots != 1) {
    throw Error(ErrorKind::validation,
                "expected exactly one root, found " + std::to_string(roots));
  }
  for (const AxNode* n : nodes_) {
    if (!n->parent_id) continue;
    if (!pos_.contains(*n->parent_id)) {
      throw Error(ErrorKind::validation, "node " + std::to_string(n->node_id) +
                                             " has unknown parent " +
                                             std::to_string(*n->parent_id));
    }
    children_[*n->parent_id].push_back(n->node_id);
  }
  // With one root and every parent present, the tree is acyclic iff every
  // node reaches the root.
  std::unordered_set<std::int64_t> reaches_root{nodes_[root_]->node_id};
  for (const AxNode* start : nodes_) {
    std::vector<std::int64_t> path;
    const AxNode* cur = start;
    std::unordered_set<std::int64_t> seen;
    while (!reaches_root.contains(cur->node_id)) {
      if (!seen.insert(cur->node_id).second) {
        throw Error(ErrorKind::validation,
                    "parent cycle through node " + std::to_string(cur->node_id));
      }
      path.push_back(cur->node_id);
      cur = nodes_[pos_.at(*cur->parent_id)];
    }
    reaches_root.insert(path.begin(), path.end());
  }
}

const AxNode* AxTree::find(std::int64_t id) const {
  const auto it = pos_.find(id);
  return it == pos_.end() ? nullptr : nodes_[it->second];
}

const AxNode* AxTree::parent(const AxNode& n) const {
  return n.parent_id ? find(*n.parent_id) : nullptr;
}

const std::vector<std::int64_t>& AxTree::children(std::int64_t id) const {
  static const std::vector<std::int64_t> kNone;
  const auto it = children_.find(id);
  return it == children_.end() ? kNone : it->second;
}

}  // namespace uiharvest
