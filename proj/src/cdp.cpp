#include "uiharvest/cdp.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <openssl/evp.h>

#include "httplib.h"
#include "uiharvest/errors.hpp"

namespace uiharvest {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

Clock::duration secs(double s) {
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s));
}

struct WsUrl {
  std::string host;
  std::string port;
  std::string path;
};

WsUrl parse_ws_url(const std::string& url) {
  static const std::regex re(R"(^ws://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorKind::config, "not a ws:// URL: " + url);
  }
  return WsUrl{m[1], m[2].matched ? m[2].str() : "80", m[3].matched ? m[3].str() : "/"};
}

}  // namespace

std::string decode_base64(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  }
  if (clean.size() % 4 != 0) throw Error(ErrorKind::decode, "bad base64 length");
  std::string out(clean.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                int(clean.size()));
  if (n < 0) throw Error(ErrorKind::decode, "bad base64");
  std::size_t len = std::size_t(n);
  for (auto it = clean.rbegin(); it != clean.rend() && *it == '='; ++it) --len;
  out.resize(len);
  return out;
}

struct CdpConnection::Impl {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws{ioc};
  beast::flat_buffer buffer;
  std::deque<std::string> outbox;
  std::thread thread;

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::int64_t, json> responses;
  std::deque<json> events;
  bool closed = false;
  std::int64_t next_id = 1;

  void fail() {
    std::lock_guard lock(mu);
    closed = true;
    cv.notify_all();
  }

  void do_read() {
    ws.async_read(buffer, [this](beast::error_code ec, std::size_t) {
      if (ec) return fail();
      json msg = json::parse(beast::buffers_to_string(buffer.data()), nullptr, false);
      buffer.consume(buffer.size());
      if (msg.is_object()) {
        std::lock_guard lock(mu);
        if (msg.contains("id") && msg["id"].is_number_integer()) {
          const auto id = msg["id"].get<std::int64_t>();
          responses[id] = std::move(msg);
        } else {
          events.push_back(std::move(msg));
        }
        cv.notify_all();
      }
      do_read();
    });
  }

  void do_write() {
    ws.async_write(net::buffer(outbox.front()), [this](beast::error_code ec, std::size_t) {
      if (ec) return fail();
      outbox.pop_front();
      if (!outbox.empty()) do_write();
    });
  }

  void send(std::string text) {
    net::post(ioc, [this, text = std::move(text)]() mutable {
      outbox.push_back(std::move(text));
      if (outbox.size() == 1) do_write();
    });
  }
};

CdpConnection::CdpConnection(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

std::unique_ptr<CdpConnection> CdpConnection::open(const std::string& ws_url) {
  const WsUrl url = parse_ws_url(ws_url);
  auto impl = std::make_unique<Impl>();
  try {
    tcp::resolver resolver(impl->ioc);
    auto& socket = beast::get_lowest_layer(impl->ws);
    socket.expires_after(std::chrono::seconds(10));
    socket.connect(resolver.resolve(url.host, url.port));
    socket.expires_never();
    impl->ws.read_message_max(512u << 20);
    impl->ws.text(true);
    impl->ws.handshake(url.host + ":" + url.port, url.path);
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorKind::service_unavailable, "cannot reach " + ws_url + ": " + e.what());
  }
  Impl* raw = impl.get();
  raw->do_read();
  raw->thread = std::thread([raw] { raw->ioc.run(); });
  return std::unique_ptr<CdpConnection>(new CdpConnection(std::move(impl)));
}

CdpConnection::~CdpConnection() {
  net::post(impl_->ioc, [impl = impl_.get()] {
    impl->ws.async_close(websocket::close_code::normal, [](beast::error_code) {});
  });
  {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait_for(lock, std::chrono::seconds(2), [&] { return impl_->closed; });
  }
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

json CdpConnection::call(const std::string& method, json params, const std::string& session_id,
                         double timeout_secs) {
  std::int64_t id = 0;
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->closed) throw Error(ErrorKind::service_unavailable, "DevTools connection closed");
    id = impl_->next_id++;
  }
  json msg{{"id", id}, {"method", method}, {"params", std::move(params)}};
  if (!session_id.empty()) msg["sessionId"] = session_id;
  impl_->send(msg.dump());

  std::unique_lock lock(impl_->mu);
  const bool done = impl_->cv.wait_for(lock, secs(timeout_secs), [&] {
    return impl_->closed || impl_->responses.contains(id);
  });
  const auto it = impl_->responses.find(id);
  if (it == impl_->responses.end()) {
    throw Error(ErrorKind::service_unavailable,
                method + (done ? ": DevTools connection closed" : ": no reply"));
  }
  json reply = std::move(it->second);
  impl_->responses.erase(it);
  if (reply.contains("error")) {
    throw Error(ErrorKind::capture_failed,
                method + ": " + reply["error"].value("message", std::string("error")));
  }
  return reply.value("result", json::object());
}

std::optional<json> CdpConnection::next_event(double timeout_secs) {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait_for(lock, secs(std::max(0.0, timeout_secs)),
                     [&] { return impl_->closed || !impl_->events.empty(); });
  if (impl_->events.empty()) {
    if (impl_->closed) throw Error(ErrorKind::service_unavailable, "DevTools connection closed");
    return std::nullopt;
  }
  json ev = std::move(impl_->events.front());
  impl_->events.pop_front();
  return ev;
}

void CdpConnection::clear_events() {
  std::lock_guard lock(impl_->mu);
  impl_->events.clear();
}

std::string resolve_browser_ws_url(const std::string& endpoint) {
  if (endpoint.rfind("ws://", 0) == 0) return endpoint;
  if (endpoint.rfind("http://", 0) != 0) {
    throw Error(ErrorKind::config, "browser endpoint must be ws:// or http://: " + endpoint);
  }
  httplib::Client client(endpoint);
  client.set_connection_timeout(5);
  const auto res = client.Get("/json/version");
  if (!res || res->status != 200) {
    throw Error(ErrorKind::service_unavailable, "no DevTools endpoint at " + endpoint);
  }
  const json info = json::parse(res->body, nullptr, false);
  if (!info.is_object() || !info.contains("webSocketDebuggerUrl")) {
    throw Error(ErrorKind::service_unavailable, "bad /json/version reply from " + endpoint);
  }
  return info["webSocketDebuggerUrl"].get<std::string>();
}

CdpBrowser::CdpBrowser(const std::string& endpoint)
    : conn_(CdpConnection::open(resolve_browser_ws_url(endpoint))) {
  default_user_agent_ = conn_->call("Browser.getVersion").value("userAgent", std::string{});
  target_id_ = conn_->call("Target.createTarget", {{"url", "about:blank"}})
                   .at("targetId")
                   .get<std::string>();
  session_id_ = conn_->call("Target.attachToTarget", {{"targetId", target_id_}, {"flatten", true}})
                    .at("sessionId")
                    .get<std::string>();
  for (const char* domain : {"Page", "Network", "DOM", "CSS", "Runtime", "Accessibility"}) {
    call(std::string(domain) + ".enable");
  }
}

CdpBrowser::~CdpBrowser() {
  try {
    conn_->call("Target.closeTarget", {{"targetId", target_id_}}, {}, 5);
  } catch (const Error&) {
    // browser already gone
  }
}

json CdpBrowser::call(const std::string& method, json params) {
  return conn_->call(method, std::move(params), session_id_);
}

NavOutcome CdpBrowser::navigate(const std::string& url, const DeviceProfile& profile,
                                double timeout_secs, double settle_secs) {
  profile_ = profile;
  call("Emulation.setDeviceMetricsOverride", {{"width", profile.viewport_width},
                                              {"height", profile.viewport_height},
                                              {"deviceScaleFactor", profile.device_scale},
                                              {"mobile", profile.is_mobile}});
  call("Emulation.setUserAgentOverride",
       {{"userAgent", profile.user_agent.empty() ? default_user_agent_ : profile.user_agent}});
  conn_->clear_events();

  const auto start = Clock::now();
  const auto deadline = start + secs(timeout_secs);
  NavOutcome out;
  const json nav = call("Page.navigate", {{"url", url}});
  if (const auto err = nav.value("errorText", std::string{}); !err.empty()) {
    out.error = err;
    return out;
  }
  const std::string frame = nav.value("frameId", std::string{});

  std::set<std::string> inflight;
  bool loaded = false;
  auto last_activity = Clock::now();
  while (true) {
    const auto now = Clock::now();
    if (loaded && inflight.empty() && now - last_activity >= secs(settle_secs)) break;
    if (now >= deadline) {
      out.timed_out = true;
      break;
    }
    const double wait = std::chrono::duration<double>(std::min(deadline - now, secs(0.1))).count();
    const auto ev = conn_->next_event(wait);
    if (!ev || ev->value("sessionId", std::string{}) != session_id_) continue;
    const std::string method = ev->value("method", std::string{});
    const json params = ev->value("params", json::object());
    if (method == "Network.requestWillBeSent") {
      inflight.insert(params.value("requestId", std::string{}));
      last_activity = Clock::now();
    } else if (method == "Network.loadingFinished" || method == "Network.loadingFailed") {
      inflight.erase(params.value("requestId", std::string{}));
      last_activity = Clock::now();
    } else if (method == "Network.responseReceived") {
      if (params.value("type", std::string{}) == "Document" &&
          params.value("frameId", std::string{}) == frame && params.contains("response")) {
        out.http_status = params["response"].value("status", 0);
      }
    } else if (method == "Page.domContentEventFired") {
      out.dom_present = true;
    } else if (method == "Page.loadEventFired") {
      out.dom_present = true;
      loaded = true;
      last_activity = Clock::now();
    }
  }
  if (!out.dom_present) {
    const auto state = evaluate("document.readyState");
    out.dom_present = state && state->is_string() && *state != "loading";
  }
  return out;
}

std::optional<json> CdpBrowser::evaluate(const std::string& script) {
  const json r = call("Runtime.evaluate", {{"expression", script},
                                           {"returnByValue", true},
                                           {"awaitPromise", true},
                                           {"timeout", 5000}});
  if (r.contains("exceptionDetails")) return std::nullopt;
  const json result = r.value("result", json::object());
  return result.contains("value") ? result["value"] : json(nullptr);
}

std::string CdpBrowser::screenshot_viewport(int quality) {
  const json r = call("Page.captureScreenshot", {{"format", "jpeg"}, {"quality", quality}});
  return decode_base64(r.at("data").get<std::string>());
}

int CdpBrowser::document_height() {
  const json m = call("Page.getLayoutMetrics");
  const json size = m.contains("cssContentSize") ? m["cssContentSize"] : m.value("contentSize", json::object());
  return int(std::ceil(size.value("height", 0.0)));
}

std::string CdpBrowser::screenshot_fullpage(int height, int quality) {
  const json clip{{"x", 0}, {"y", 0}, {"width", profile_.viewport_width}, {"height", height}, {"scale", 1}};
  const json r = call("Page.captureScreenshot", {{"format", "jpeg"},
                                                 {"quality", quality},
                                                 {"captureBeyondViewport", true},
                                                 {"clip", clip}});
  return decode_base64(r.at("data").get<std::string>());
}

json CdpBrowser::axtree_bundle() {
  json bundle{{"axtree", call("Accessibility.getFullAXTree")},
              {"box_models", json::object()},
              {"computed_styles", json::object()}};
  std::vector<std::int64_t> backend_ids;
  for (const auto& node : bundle["axtree"].value("nodes", json::array())) {
    if (node.value("ignored", false) || !node.contains("backendDOMNodeId")) continue;
    backend_ids.push_back(node["backendDOMNodeId"].get<std::int64_t>());
  }
  for (std::int64_t id : backend_ids) {
    try {
      bundle["box_models"][std::to_string(id)] =
          call("DOM.getBoxModel", {{"backendNodeId", id}}).at("model");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::service_unavailable) throw;  // no layout: boxes stay null
    }
  }
  if (backend_ids.empty()) return bundle;
  call("DOM.getDocument", {{"depth", 0}});
  const json pushed = call("DOM.pushNodesByBackendIdsToFrontend", {{"backendNodeIds", backend_ids}});
  const auto node_ids = pushed.value("nodeIds", std::vector<std::int64_t>{});
  for (std::size_t i = 0; i < node_ids.size() && i < backend_ids.size(); ++i) {
    if (node_ids[i] == 0) continue;
    try {
      bundle["computed_styles"][std::to_string(backend_ids[i])] =
          call("CSS.getComputedStyleForNode", {{"nodeId", node_ids[i]}}).at("computedStyle");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::service_unavailable) throw;  // text nodes have no style
    }
  }
  return bundle;
}

}  // namespace uiharvest
