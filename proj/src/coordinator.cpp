#include "uiharvest/coordinator.hpp"

#include <chrono>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "uiharvest/errors.hpp"
#include "uiharvest/store.hpp"
#include "uiharvest/url.hpp"

namespace uiharvest {

namespace {

using nlohmann::json;
constexpr int kSnapshotVersion = 1;

Timestamp system_now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string random_epoch() {
  std::random_device rd;
  std::ostringstream ss;
  ss << std::hex << std::setw(8) << std::setfill('0') << rd();
  return ss.str();
}

std::string rng_state(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

json error_body(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}};
}

}  // namespace

void CoordinatorConfig::validate() const {
  frontier.validate();
  if (!(lease_ttl_secs > 0)) throw Error(ErrorKind::config, "lease_ttl_secs must be positive");
  if (snapshot_every == 0) throw Error(ErrorKind::config, "snapshot_every must be at least 1");
}

json CoordinatorStats::to_json() const {
  json hosts_json = json::array();
  for (const auto& h : hosts) {
    hosts_json.push_back(
        {{"host", h.host}, {"queued", h.queued}, {"leased", h.leased}, {"visited", h.visited}});
  }
  json j{{"queued", queued},       {"leased", leased},   {"visited", visited},
         {"completed", completed}, {"expired", expired}, {"hosts", hosts_json}};
  j["last_snapshot_error"] = last_snapshot_error ? json(*last_snapshot_error) : json(nullptr);
  return j;
}

Coordinator::Coordinator(CoordinatorConfig cfg, Rng rng, const PublicSuffixList* psl, Clock clock)
    : cfg_(std::move(cfg)),
      psl_(psl),
      clock_(clock ? std::move(clock) : Clock(system_now)),
      frontier_((cfg_.validate(), cfg_.frontier)),
      rng_(std::move(rng)),
      epoch_(random_epoch()) {}

std::size_t Coordinator::seed(std::span<const std::string> urls) {
  std::lock_guard lock(mu_);
  std::size_t accepted = 0;
  for (const auto& raw : urls) {
    try {
      accepted += frontier_.enqueue(normalize_url(raw, std::nullopt, psl_), rng_);
    } catch (const Error&) {
      // unusable seed
    }
  }
  return accepted;
}

std::size_t Coordinator::expire_locked(Timestamp now) {
  std::size_t n = 0;
  for (auto it = open_.begin(); it != open_.end();) {
    if (it->second.expires_at <= now) {
      frontier_.release(it->second.url);
      closed_.insert(it->first);
      it = open_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  expired_ += n;
  return n;
}

std::size_t Coordinator::expire_leases() {
  std::lock_guard lock(mu_);
  return expire_locked(clock_());
}

std::optional<TaskLease> Coordinator::lease_task(const std::string& /*worker_id*/) {
  std::lock_guard lock(mu_);
  const Timestamp now = clock_();
  expire_locked(now);
  const auto record = frontier_.next_url(rng_);
  if (!record) return std::nullopt;
  TaskLease lease;
  lease.lease_id = epoch_ + "-" + std::to_string(++lease_seq_);
  lease.url = record->url;
  lease.device_plan = cfg_.device_plan;
  lease.issued_at = now;
  lease.expires_at =
      now + std::chrono::milliseconds(std::max<std::int64_t>(1, std::llround(cfg_.lease_ttl_secs * 1000)));
  if (hook_) {
    try {
      hook_(lease);
    } catch (const std::exception& e) {
      frontier_.release(lease.url);
      throw Error(ErrorKind::service_unavailable, std::string("cannot record lease: ") + e.what());
    }
  }
  open_.emplace(lease.lease_id, lease);
  return lease;
}

SubmitOutcome Coordinator::submit_result(const CrawlResult& result) {
  std::lock_guard lock(mu_);
  expire_locked(clock_());
  SubmitOutcome out;
  const auto it = open_.find(result.lease_id);
  if (it == open_.end()) {
    if (closed_.contains(result.lease_id)) return out;
    throw Error(ErrorKind::stale_lease, "unknown lease " + result.lease_id);
  }
  const TaskLease lease = it->second;
  open_.erase(it);
  closed_.insert(lease.lease_id);
  frontier_.mark_visited(lease.url);
  for (const auto& raw : result.discovered_urls) {
    try {
      if (frontier_.enqueue(normalize_url(raw, std::string_view(lease.url), psl_), rng_)) {
        ++out.enqueued;
      } else {
        ++out.rejected_urls;
      }
    } catch (const Error&) {
      ++out.rejected_urls;
    }
  }
  out.accepted = true;
  ++completed_;
  if (cfg_.snapshot_path && completed_ % cfg_.snapshot_every == 0) {
    try {
      snapshot_locked(*cfg_.snapshot_path);
      last_snapshot_error_.reset();
    } catch (const Error& e) {
      last_snapshot_error_ = e.what();
    }
  }
  return out;
}

CoordinatorStats Coordinator::stats() {
  std::lock_guard lock(mu_);
  expire_locked(clock_());
  CoordinatorStats s;
  s.queued = frontier_.queued_count();
  s.leased = frontier_.leased_count();
  s.visited = frontier_.visited_count();
  s.completed = completed_;
  s.expired = expired_;
  s.hosts = frontier_.host_counts();
  s.last_snapshot_error = last_snapshot_error_;
  return s;
}

std::vector<std::string> Coordinator::urls_in_state(UrlState state) {
  std::lock_guard lock(mu_);
  return frontier_.urls_in_state(state);
}

std::vector<TaskLease> Coordinator::open_leases() {
  std::lock_guard lock(mu_);
  std::vector<TaskLease> out;
  for (const auto& [id, lease] : open_) out.push_back(lease);
  std::sort(out.begin(), out.end(),
            [](const TaskLease& a, const TaskLease& b) { return a.lease_id < b.lease_id; });
  return out;
}

void Coordinator::set_lease_hook(LeaseHook hook) {
  std::lock_guard lock(mu_);
  hook_ = std::move(hook);
}

void Coordinator::snapshot(const std::filesystem::path& path) {
  std::lock_guard lock(mu_);
  snapshot_locked(path);
}

void Coordinator::snapshot_locked(const std::filesystem::path& path) {
  std::ostringstream frontier;
  frontier_.save(frontier);
  json leases = json::array();
  for (const auto& [id, lease] : open_) leases.push_back(lease);
  const json doc{{"version", kSnapshotVersion}, {"frontier", frontier.str()},
                 {"rng", rng_state(rng_)},      {"lease_seq", lease_seq_},
                 {"leases", leases},            {"completed", completed_},
                 {"expired", expired_}};
  try {
    write_file_atomic(path, doc.dump());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::snapshot_failed, e.what());
  }
}

std::unique_ptr<Coordinator> Coordinator::restore(const std::filesystem::path& path,
                                                  CoordinatorConfig cfg,
                                                  const PublicSuffixList* psl, Clock clock) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, "unreadable snapshot " + path.string() + ": " + e.what());
  }
  if (doc.value("version", 0) != kSnapshotVersion) {
    throw Error(ErrorKind::parse, "unsupported snapshot version in " + path.string());
  }
  auto c = std::make_unique<Coordinator>(std::move(cfg), Rng{}, psl, std::move(clock));
  try {
    std::istringstream frontier(doc.at("frontier").get<std::string>());
    c->frontier_ = Frontier::load(frontier, c->cfg_.frontier, psl);
    std::istringstream rng(doc.at("rng").get<std::string>());
    rng >> c->rng_;
    if (!rng) throw Error(ErrorKind::parse, "bad RNG state");
    c->lease_seq_ = doc.at("lease_seq").get<std::uint64_t>();
    c->completed_ = doc.value("completed", std::size_t{0});
    c->expired_ = doc.value("expired", std::size_t{0});
    for (const auto& l : doc.at("leases")) {
      TaskLease lease = l.get<TaskLease>();
      const UrlRecord* rec = c->frontier_.find(lease.url);
      if (!rec || rec->state != UrlState::leased) {
        throw Error(ErrorKind::parse, "lease for a URL that is not leased: " + lease.url);
      }
      c->open_.emplace(lease.lease_id, lease);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, "bad snapshot " + path.string() + ": " + e.what());
  }
  if (c->open_.size() != c->frontier_.leased_count()) {
    throw Error(ErrorKind::parse, "snapshot lease table does not match the frontier");
  }
  return c;
}

struct CoordinatorServer::Impl {
  httplib::Server server;
  std::thread thread;
};

CoordinatorServer::CoordinatorServer(Coordinator& coordinator) : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;
  auto send_json = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  svr.Post("/v1/lease", [&coordinator, send_json](const httplib::Request& req,
                                                   httplib::Response& res) {
    std::string worker = "anonymous";
    if (!req.body.empty()) {
      const json body = json::parse(req.body, nullptr, false);
      if (!body.is_object()) return send_json(res, 400, error_body("parse", "expected a JSON object"));
      if (body.contains("worker_id") && body["worker_id"].is_string()) worker = body["worker_id"];
    }
    try {
      const auto lease = coordinator.lease_task(worker);
      if (!lease) {
        res.status = 204;
        return;
      }
      send_json(res, 200, json(*lease));
    } catch (const Error& e) {
      send_json(res, e.kind() == ErrorKind::service_unavailable ? 503 : 500,
                error_body(to_string(e.kind()), e.what()));
    }
  });
  svr.Post("/v1/result", [&coordinator, send_json](const httplib::Request& req,
                                                    httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object()) return send_json(res, 400, error_body("parse", "expected a JSON object"));
    try {
      const auto out = coordinator.submit_result(body.get<CrawlResult>());
      send_json(res, 200,
                {{"accepted", out.accepted}, {"enqueued", out.enqueued},
                 {"rejected_urls", out.rejected_urls}});
    } catch (const Error& e) {
      const int status = e.kind() == ErrorKind::stale_lease ? 404
                         : e.kind() == ErrorKind::parse     ? 400
                                                            : 500;
      send_json(res, status, error_body(to_string(e.kind()), e.what()));
    }
  });
  svr.Get("/v1/stats", [&coordinator, send_json](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, coordinator.stats().to_json());
  });
}

CoordinatorServer::~CoordinatorServer() { stop(); }

int CoordinatorServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorKind::service_unavailable,
                "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void CoordinatorServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::service_unavailable,
                "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void CoordinatorServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

CoordinatorClient::CoordinatorClient(std::string base_url) : base_url_(std::move(base_url)) {}

namespace {

httplib::Client make_client(const std::string& base) {
  httplib::Client client(base);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  return client;
}

[[noreturn]] void fail_response(const std::string& what, const httplib::Result& res) {
  if (!res) {
    throw Error(ErrorKind::service_unavailable,
                what + ": " + httplib::to_string(res.error()));
  }
  const json body = json::parse(res->body, nullptr, false);
  const std::string msg =
      body.is_object() ? body.value("message", res->body) : res->body;
  if (res->status == 404) throw Error(ErrorKind::stale_lease, msg);
  if (res->status == 400) throw Error(ErrorKind::parse, msg);
  throw Error(ErrorKind::service_unavailable,
              what + ": HTTP " + std::to_string(res->status) + " " + msg);
}

}  // namespace

std::optional<TaskLease> CoordinatorClient::lease(const std::string& worker_id) {
  auto client = make_client(base_url_);
  const auto res =
      client.Post("/v1/lease", json{{"worker_id", worker_id}}.dump(), "application/json");
  if (res && res->status == 204) return std::nullopt;
  if (!res || res->status != 200) fail_response("lease", res);
  return json::parse(res->body).get<TaskLease>();
}

bool CoordinatorClient::submit(const CrawlResult& result) {
  auto client = make_client(base_url_);
  const auto res = client.Post("/v1/result", json(result).dump(), "application/json");
  if (!res || res->status != 200) fail_response("result", res);
  return json::parse(res->body).value("accepted", false);
}

json CoordinatorClient::stats() {
  auto client = make_client(base_url_);
  const auto res = client.Get("/v1/stats");
  if (!res || res->status != 200) fail_response("stats", res);
  return json::parse(res->body);
}

}  // namespace uiharvest
