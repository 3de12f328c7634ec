#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "uiharvest/worker.hpp"

namespace uiharvest {

std::string decode_base64(std::string_view text);

// WebSocket session with a DevTools-protocol endpoint. Responses are matched
// to calls by id; everything else is queued as an event.
class CdpConnection {
 public:
  /// ws://host:port/path. Throws Error{service_unavailable}.
  static std::unique_ptr<CdpConnection> open(const std::string& ws_url);
  ~CdpConnection();

  CdpConnection(const CdpConnection&) = delete;
  CdpConnection& operator=(const CdpConnection&) = delete;

  /// Throws Error{service_unavailable} on timeout or a dropped connection,
  /// Error{capture_failed} when the endpoint answers with an error.
  nlohmann::json call(const std::string& method, nlohmann::json params = nlohmann::json::object(),
                      const std::string& session_id = {}, double timeout_secs = 30);

  /// Next queued event, waiting up to timeout_secs.
  std::optional<nlohmann::json> next_event(double timeout_secs);
  void clear_events();

 private:
  struct Impl;
  explicit CdpConnection(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Accepts a ws:// URL as is; for http://host:port asks /json/version for
/// the browser's WebSocket URL.
std::string resolve_browser_ws_url(const std::string& endpoint);

// A fresh tab in a running browser, driven over the DevTools protocol.
class CdpBrowser : public Browser {
 public:
  explicit CdpBrowser(const std::string& endpoint);
  ~CdpBrowser() override;

  NavOutcome navigate(const std::string& url, const DeviceProfile& profile, double timeout_secs,
                      double settle_secs) override;
  std::optional<nlohmann::json> evaluate(const std::string& script) override;
  std::string screenshot_viewport(int quality) override;
  int document_height() override;
  std::string screenshot_fullpage(int height, int quality) override;
  nlohmann::json axtree_bundle() override;

 private:
  nlohmann::json call(const std::string& method, nlohmann::json params = nlohmann::json::object());

  std::unique_ptr<CdpConnection> conn_;
  std::string target_id_;
  std::string session_id_;
  std::string default_user_agent_;
  DeviceProfile profile_;
};

}  // namespace uiharvest
