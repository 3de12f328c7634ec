#include "uiharvest/worker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "uiharvest/analysis.hpp"
#include "uiharvest/coordinator.hpp"
#include "uiharvest/errors.hpp"
#include "uiharvest/image.hpp"
#include "uiharvest/store.hpp"
#include "uiharvest/url.hpp"

namespace uiharvest {

namespace {

using nlohmann::json;

constexpr const char* kMobileUserAgent =
    "Mozilla/5.0 (iPhone; CPU iPhone OS 17_0 like Mac OS X) AppleWebKit/605.1.15 "
    "(KHTML, like Gecko) Version/17.0 Mobile/15E148 Safari/604.1";
constexpr const char* kTabletUserAgent =
    "Mozilla/5.0 (iPad; CPU OS 17_0 like Mac OS X) AppleWebKit/605.1.15 "
    "(KHTML, like Gecko) Version/17.0 Mobile/15E148 Safari/604.1";

const std::set<std::string>& clickable_roles() {
  static const std::set<std::string> roles{"link",     "button",   "checkbox", "radio",
                                           "menuitem", "tab",      "switch",   "option",
                                           "combobox", "textbox",  "searchbox", "slider"};
  return roles;
}

std::string id_key(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw Error(ErrorKind::parse, "bad accessibility node id: " + v.dump());
}

std::int64_t numeric_id(const std::string& key) {
  std::size_t used = 0;
  std::int64_t id = 0;
  try {
    id = std::stoll(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != key.size()) {
    throw Error(ErrorKind::parse, "non-numeric accessibility node id: " + key);
  }
  return id;
}

std::optional<Rect> quad_rect(const json& quad) {
  if (!quad.is_array() || quad.size() != 8) return std::nullopt;
  double xs[4], ys[4];
  for (int i = 0; i < 4; ++i) {
    if (!quad[2 * i].is_number() || !quad[2 * i + 1].is_number()) return std::nullopt;
    xs[i] = quad[2 * i].get<double>();
    ys[i] = quad[2 * i + 1].get<double>();
  }
  const auto [x0, x1] = std::minmax_element(xs, xs + 4);
  const auto [y0, y1] = std::minmax_element(ys, ys + 4);
  return Rect{*x0, *y0, *x1 - *x0, *y1 - *y0};
}

std::optional<BoxModel> box_model(const json& model) {
  if (!model.is_object()) return std::nullopt;
  BoxModel b;
  const std::pair<const char*, Rect*> parts[] = {
      {"content", &b.content}, {"padding", &b.padding}, {"border", &b.border}, {"margin", &b.margin}};
  for (const auto& [key, rect] : parts) {
    if (!model.contains(key)) return std::nullopt;
    const auto r = quad_rect(model[key]);
    if (!r) return std::nullopt;
    *rect = *r;
  }
  return b;
}

const json* lookup(const json& bundle, const char* table, const std::string& backend) {
  if (backend.empty() || !bundle.contains(table) || !bundle[table].is_object()) return nullptr;
  const auto it = bundle[table].find(backend);
  return it == bundle[table].end() ? nullptr : &*it;
}

std::string string_value(const json& node, const char* key) {
  if (!node.contains(key) || !node[key].is_object()) return {};
  const auto it = node[key].find("value");
  if (it == node[key].end() || !it->is_string()) return {};
  return it->get<std::string>();
}

double ms_since(const SteadyClock& clock, double start) { return (clock() - start) * 1000.0; }

void read_probes(CaptureContext& ctx, ProbeReport& report) {
  const auto run = [&](const std::optional<std::string>& script) -> std::optional<json> {
    if (!script) return std::nullopt;
    try {
      return ctx.browser.evaluate(*script);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::service_unavailable) throw;
      return std::nullopt;
    }
  };
  if (const auto v = run(ctx.scripts.dismiss_overlays); v && v->is_number_integer()) {
    report.overlays_dismissed = v->get<int>();
  }
  if (const auto v = run(ctx.scripts.measure_responsiveness); v && v->is_object()) {
    if (v->contains("content_width_ok") && (*v)["content_width_ok"].is_boolean()) {
      report.content_width_ok = (*v)["content_width_ok"].get<bool>();
    }
    if (v->contains("has_viewport_meta") && (*v)["has_viewport_meta"].is_boolean()) {
      report.has_viewport_meta = (*v)["has_viewport_meta"].get<bool>();
    }
  }
  if (const auto v = run(ctx.scripts.collect_links); v && v->is_array()) {
    for (const auto& href : *v) {
      if (href.is_string() && !href.get<std::string>().empty()) {
        report.links.push_back(href.get<std::string>());
      }
    }
  }
}

std::optional<std::string> read_optional(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void to_json(nlohmann::json& j, const DeviceProfile& p) {
  j = {{"name", p.name},
       {"viewport_width", p.viewport_width},
       {"viewport_height", p.viewport_height},
       {"device_scale", p.device_scale},
       {"user_agent", p.user_agent},
       {"is_mobile", p.is_mobile}};
}

void from_json(const nlohmann::json& j, DeviceProfile& p) {
  p.name = j.at("name").get<std::string>();
  p.viewport_width = j.at("viewport_width").get<int>();
  p.viewport_height = j.at("viewport_height").get<int>();
  p.device_scale = j.value("device_scale", 1.0);
  p.user_agent = j.value("user_agent", std::string{});
  p.is_mobile = j.value("is_mobile", false);
}

const std::vector<DeviceProfile>& default_profiles() {
  static const std::vector<DeviceProfile> profiles{
      {"desktop-1920x1080", 1920, 1080, 1.0, "", false},
      {"desktop-1366x768", 1366, 768, 1.0, "", false},
      {"desktop-1536x864", 1536, 864, 1.0, "", false},
      {"desktop-1280x720", 1280, 720, 1.0, "", false},
      {"tablet-768x1024", 768, 1024, 2.0, kTabletUserAgent, true},
      {"phone-390x844", 390, 844, 3.0, kMobileUserAgent, true},
  };
  return profiles;
}

void validate_profiles(std::span<const DeviceProfile> profiles) {
  if (profiles.empty()) throw Error(ErrorKind::validation, "no device profiles");
  std::set<std::string> names;
  for (const auto& p : profiles) {
    if (p.name.empty()) throw Error(ErrorKind::validation, "device profile without a name");
    if (p.viewport_width <= 0 || p.viewport_height <= 0 || !(p.device_scale > 0)) {
      throw Error(ErrorKind::validation, "device profile " + p.name + " has a non-positive size");
    }
    if (!names.insert(p.name).second) {
      throw Error(ErrorKind::validation, "duplicate device profile " + p.name);
    }
  }
}

std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot read profiles file " + path.string());
  std::vector<DeviceProfile> profiles;
  try {
    profiles = json::parse(in).get<std::vector<DeviceProfile>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "bad profiles file " + path.string() + ": " + e.what());
  }
  try {
    validate_profiles(profiles);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  return profiles;
}

ProbeScripts ProbeScripts::load(const std::filesystem::path& dir) {
  return ProbeScripts{read_optional(dir / "dismiss_overlays.js"),
                      read_optional(dir / "measure_responsiveness.js"),
                      read_optional(dir / "collect_links.js")};
}

const std::vector<std::string>& captured_style_keys() {
  static const std::vector<std::string> keys{"font-size", "font-weight", "color",
                                             "background-color", "display", "position",
                                             "z-index", "visibility", "opacity"};
  return keys;
}

std::vector<AxNode> parse_axtree(const json& bundle) {
  if (!bundle.is_object() || !bundle.contains("axtree") || !bundle["axtree"].is_object() ||
      !bundle["axtree"].contains("nodes") || !bundle["axtree"]["nodes"].is_array()) {
    throw Error(ErrorKind::parse, "payload has no accessibility tree");
  }
  const json& raw = bundle["axtree"]["nodes"];
  std::unordered_map<std::string, const json*> by_id;
  std::vector<std::string> order;
  for (const auto& n : raw) {
    if (!n.is_object() || !n.contains("nodeId")) {
      throw Error(ErrorKind::parse, "accessibility node without nodeId");
    }
    const std::string key = id_key(n["nodeId"]);
    if (!by_id.emplace(key, &n).second) {
      throw Error(ErrorKind::parse, "duplicate accessibility node " + key);
    }
    order.push_back(key);
  }
  const json* root = nullptr;
  for (const auto& key : order) {
    const json& n = *by_id[key];
    if (!n.contains("parentId") || !by_id.contains(id_key(n["parentId"]))) {
      root = &n;
      break;
    }
  }
  if (!root) throw Error(ErrorKind::parse, "accessibility tree has no root");

  const auto& keys = captured_style_keys();
  std::vector<AxNode> out;
  std::unordered_set<std::string> seen;
  // (node, nearest kept ancestor id)
  std::vector<std::pair<const json*, std::optional<std::int64_t>>> stack{{root, std::nullopt}};
  while (!stack.empty()) {
    const auto [n, parent] = stack.back();
    stack.pop_back();
    const std::string key = id_key((*n)["nodeId"]);
    if (!seen.insert(key).second) continue;
    std::optional<std::int64_t> kept = parent;
    const bool ignored = n->value("ignored", false) && n != root;
    if (!ignored) {
      AxNode node;
      node.node_id = numeric_id(key);
      node.parent_id = parent;
      node.role = canonical_role(string_value(*n, "role"));
      if (auto name = string_value(*n, "name"); !name.empty()) node.name = std::move(name);
      node.dom_index = std::int64_t(out.size());
      const std::string backend =
          n->contains("backendDOMNodeId") ? id_key((*n)["backendDOMNodeId"]) : std::string{};
      if (const json* model = lookup(bundle, "box_models", backend)) {
        node.boxes = box_model(*model);
        if (node.boxes) node.negative_margin = !node.boxes->margin.contains(node.boxes->border);
      }
      if (const json* styles = lookup(bundle, "computed_styles", backend); styles && styles->is_array()) {
        for (const auto& prop : *styles) {
          if (!prop.is_object() || !prop.contains("name") || !prop["name"].is_string()) continue;
          const auto name = prop["name"].get<std::string>();
          if (std::find(keys.begin(), keys.end(), name) != keys.end() && prop.contains("value") &&
              prop["value"].is_string()) {
            node.style[name] = prop["value"].get<std::string>();
          }
        }
      }
      node.clickable = clickable_roles().contains(node.role);
      kept = node.node_id;
      out.push_back(std::move(node));
    }
    if (n->contains("childIds") && (*n)["childIds"].is_array()) {
      const json& children = (*n)["childIds"];
      for (auto it = children.rbegin(); it != children.rend(); ++it) {
        const auto child = by_id.find(id_key(*it));
        if (child != by_id.end()) stack.emplace_back(child->second, kept);
      }
    }
  }
  return out;
}

CapturedPage capture_page(CaptureContext& ctx, const std::string& url,
                          const DeviceProfile& profile, double nav_timeout_secs) {
  const UrlRecord record = normalize_url(url);
  CapturedPage page;
  PageSample& s = page.sample;
  s.url = record.url;
  s.registrable_domain = record.registrable_domain;
  s.device = profile.name;
  s.viewport = Viewport{profile.viewport_width, profile.viewport_height, profile.device_scale};

  double t = ctx.steady();
  const NavOutcome nav =
      ctx.browser.navigate(s.url, profile, nav_timeout_secs, ctx.budget.settle_quiet_secs);
  s.timings["navigate"] = ms_since(ctx.steady, t);
  if (nav.http_status && *nav.http_status >= 400) {
    throw Error(ErrorKind::capture_failed, "HTTP " + std::to_string(*nav.http_status));
  }
  if (!nav.dom_present) {
    if (nav.timed_out) throw Error(ErrorKind::nav_timeout, "navigation timed out");
    throw Error(ErrorKind::capture_failed, "navigation failed: " + nav.error);
  }
  s.captured_at = ctx.wall();

  t = ctx.steady();
  if (ctx.scripts.dismiss_overlays || ctx.scripts.measure_responsiveness ||
      ctx.scripts.collect_links) {
    ProbeReport report;
    read_probes(ctx, report);
    s.probe = std::move(report);
  }
  s.timings["probes"] = ms_since(ctx.steady, t);

  t = ctx.steady();
  page.viewport_image = ctx.browser.screenshot_viewport(ctx.budget.image_quality);
  GrayImage shot;
  try {
    shot = decode_gray(page.viewport_image);
  } catch (const Error& e) {
    throw Error(ErrorKind::capture_failed, std::string("viewport screenshot: ") + e.what());
  }
  const auto want_w = std::lround(profile.viewport_width * profile.device_scale);
  const auto want_h = std::lround(profile.viewport_height * profile.device_scale);
  if (shot.cols() != want_w || shot.rows() != want_h) {
    throw Error(ErrorKind::capture_failed,
                "viewport screenshot is " + std::to_string(shot.cols()) + "x" +
                    std::to_string(shot.rows()) + ", expected " + std::to_string(want_w) + "x" +
                    std::to_string(want_h));
  }
  const int doc_height = std::max(1, ctx.browser.document_height());
  s.fullpage_height = std::min(doc_height, ctx.budget.height_cap);
  s.fullpage_truncated = doc_height > ctx.budget.height_cap;
  page.fullpage_image = ctx.browser.screenshot_fullpage(s.fullpage_height, ctx.budget.image_quality);
  if (page.fullpage_image.empty()) throw Error(ErrorKind::capture_failed, "empty full-page screenshot");
  s.timings["screenshots"] = ms_since(ctx.steady, t);

  t = ctx.steady();
  try {
    s.axtree = parse_axtree(ctx.browser.axtree_bundle());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::service_unavailable) throw;
    throw Error(ErrorKind::capture_failed, std::string("accessibility tree: ") + e.what());
  }
  s.timings["axtree"] = ms_since(ctx.steady, t);
  s.sample_id = compute_sample_id(s.url, s.device, s.captured_at);
  return page;
}

CrawlResult crawl_url(CaptureContext& ctx, const TaskLease& lease,
                      std::span<const DeviceProfile> profiles, DatasetStore& store) {
  const double start = ctx.steady();
  CrawlResult result;
  result.lease_id = lease.lease_id;

  std::vector<const DeviceProfile*> plan;
  for (const auto& p : profiles) {
    if (lease.device_plan.empty() ||
        std::find(lease.device_plan.begin(), lease.device_plan.end(), p.name) !=
            lease.device_plan.end()) {
      plan.push_back(&p);
    }
  }

  std::unordered_set<std::string> seen_links;
  bool unreachable = false;
  bool timed_out = false;
  for (const DeviceProfile* p : plan) {
    const double remaining = ctx.budget.total_secs - (ctx.steady() - start);
    if (unreachable) {
      result.per_device_status[p->name] = DeviceStatus::error;
      continue;
    }
    if (remaining <= 0) {
      result.per_device_status[p->name] = DeviceStatus::skipped;
      continue;
    }
    try {
      CapturedPage page =
          capture_page(ctx, lease.url, *p, std::min(ctx.budget.per_device_nav_secs, remaining));
      if (page.sample.probe) {
        for (const auto& href : page.sample.probe->links) {
          try {
            auto link = normalize_url(href, std::string_view(page.sample.url));
            if (seen_links.insert(link.url).second) result.discovered_urls.push_back(link.url);
          } catch (const Error&) {
            // unusable href
          }
        }
      }
      result.sample_refs.push_back(
          store.put_sample(std::move(page.sample),
                           EncodedImages{std::move(page.viewport_image),
                                         std::move(page.fullpage_image), "jpg"}));
      result.per_device_status[p->name] = DeviceStatus::ok;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::service_unavailable) unreachable = true;
      if (e.kind() == ErrorKind::nav_timeout) timed_out = true;
      result.per_device_status[p->name] = DeviceStatus::error;
    }
  }

  if (!result.sample_refs.empty()) {
    result.status =
        result.sample_refs.size() == plan.size() ? CrawlStatus::ok : CrawlStatus::partial;
  } else if (!unreachable && (timed_out || ctx.steady() - start >= ctx.budget.total_secs)) {
    result.status = CrawlStatus::timeout;
  } else {
    result.status = CrawlStatus::nav_error;
  }
  return result;
}

std::size_t run_worker(LeaseChannel& channel, CaptureContext& ctx,
                       std::span<const DeviceProfile> profiles, DatasetStore& store,
                       const WorkerLoopOptions& options) {
  std::size_t done = 0;
  while (options.max_leases == 0 || done < options.max_leases) {
    const auto lease = channel.lease(options.worker_id);
    if (!lease) {
      if (options.exit_when_idle) break;
      std::this_thread::sleep_for(std::chrono::duration<double>(options.idle_poll_secs));
      continue;
    }
    const CrawlResult result = crawl_url(ctx, *lease, profiles, store);
    channel.submit(result);
    ++done;
  }
  return done;
}

SteadyClock system_steady_clock() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

WallClock system_wall_clock() {
  return [] {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
  };
}

}  // namespace uiharvest
