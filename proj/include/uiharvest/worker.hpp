#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "uiharvest/protocol.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

class DatasetStore;
class LeaseChannel;

struct DeviceProfile {
  std::string name;
  int viewport_width = 0;
  int viewport_height = 0;
  double device_scale = 1.0;
  std::string user_agent;
  bool is_mobile = false;
};

void to_json(nlohmann::json& j, const DeviceProfile& p);
void from_json(const nlohmann::json& j, DeviceProfile& p);

/// Four desktops, a tablet and a phone, in capture order.
const std::vector<DeviceProfile>& default_profiles();

/// Throws Error{validation} on non-positive dimensions or duplicate names.
void validate_profiles(std::span<const DeviceProfile> profiles);

/// JSON array of profiles. Throws Error{config}.
std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path);

struct CaptureBudget {
  double total_secs = 360;
  double per_device_nav_secs = 45;
  double settle_quiet_secs = 2;
  int height_cap = 20000;  // CSS px
  int image_quality = 80;  // JPEG
};

// In-page probe scripts, injected verbatim. A missing script leaves its
// report fields null.
struct ProbeScripts {
  std::optional<std::string> dismiss_overlays;
  std::optional<std::string> measure_responsiveness;
  std::optional<std::string> collect_links;

  /// Reads dismiss_overlays.js, measure_responsiveness.js and
  /// collect_links.js from dir when present.
  static ProbeScripts load(const std::filesystem::path& dir);
};

struct NavOutcome {
  bool dom_present = false;
  bool timed_out = false;
  std::optional<int> http_status;
  std::string error;
};

// One browser tab. Implementations throw Error{service_unavailable} when
// the browser cannot be reached.
class Browser {
 public:
  virtual ~Browser() = default;

  /// Applies the device profile, loads url and waits for the load event plus
  /// settle_secs of network quiet, giving up after timeout_secs.
  virtual NavOutcome navigate(const std::string& url, const DeviceProfile& profile,
                              double timeout_secs, double settle_secs) = 0;
  /// Script completion value; nullopt if the script threw.
  virtual std::optional<nlohmann::json> evaluate(const std::string& script) = 0;
  virtual std::string screenshot_viewport(int quality) = 0;
  /// Document height in CSS px.
  virtual int document_height() = 0;
  virtual std::string screenshot_fullpage(int height, int quality) = 0;
  /// {"axtree": {"nodes": [...]}, "box_models": {backendId: model},
  ///  "computed_styles": {backendId: [{"name", "value"}]}}
  virtual nlohmann::json axtree_bundle() = 0;
};

/// Computed-style keys kept on each node.
const std::vector<std::string>& captured_style_keys();

/// Accessibility nodes from a protocol bundle. Ignored nodes are dropped and
/// their children attached to the nearest kept ancestor; dom_index is the
/// pre-order position. Throws Error{parse} when the tree is missing.
std::vector<AxNode> parse_axtree(const nlohmann::json& bundle);

using SteadyClock = std::function<double()>;  // seconds
using WallClock = std::function<Timestamp()>;

struct CaptureContext {
  Browser& browser;
  CaptureBudget budget;
  ProbeScripts scripts;
  SteadyClock steady;
  WallClock wall;
};

struct CapturedPage {
  PageSample sample;
  std::string viewport_image;
  std::string fullpage_image;
};

/// Navigates, runs the probes, takes both screenshots and reads the tree.
/// Throws Error{nav_timeout} when the DOM never appears within the timeout
/// and Error{capture_failed} for any other capture failure.
CapturedPage capture_page(CaptureContext& ctx, const std::string& url,
                          const DeviceProfile& profile, double nav_timeout_secs);

/// Captures the leased URL under each planned profile in order until the
/// total budget runs out, storing every sample.
CrawlResult crawl_url(CaptureContext& ctx, const TaskLease& lease,
                      std::span<const DeviceProfile> profiles, DatasetStore& store);

struct WorkerLoopOptions {
  std::string worker_id = "worker";
  std::size_t max_leases = 0;  // 0: no limit
  bool exit_when_idle = true;
  double idle_poll_secs = 5;
};

/// Leases, crawls and reports until the channel runs dry (or max_leases).
/// Returns the number of leases completed.
std::size_t run_worker(LeaseChannel& channel, CaptureContext& ctx,
                       std::span<const DeviceProfile> profiles, DatasetStore& store,
                       const WorkerLoopOptions& options);

SteadyClock system_steady_clock();
WallClock system_wall_clock();

}  // namespace uiharvest
