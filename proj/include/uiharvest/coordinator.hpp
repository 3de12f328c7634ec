#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "uiharvest/frontier.hpp"
#include "uiharvest/protocol.hpp"
#include "uiharvest/random.hpp"

namespace uiharvest {

class PublicSuffixList;

struct CoordinatorConfig {
  FrontierConfig frontier;
  double lease_ttl_secs = 480;
  std::size_t snapshot_every = 500;  // completed leases between snapshots
  std::optional<std::filesystem::path> snapshot_path;
  std::vector<std::string> device_plan;

  void validate() const;
};

struct SubmitOutcome {
  bool accepted = false;
  std::size_t enqueued = 0;
  std::size_t rejected_urls = 0;  // malformed or refused by the frontier policy
};

struct CoordinatorStats {
  std::size_t queued = 0;
  std::size_t leased = 0;
  std::size_t visited = 0;
  std::size_t completed = 0;
  std::size_t expired = 0;
  std::vector<HostCounts> hosts;
  std::optional<std::string> last_snapshot_error;

  nlohmann::json to_json() const;
};

// Frontier behind a lease table. All methods are safe to call concurrently;
// state changes are serialized through one mutex.
class Coordinator {
 public:
  using Clock = std::function<Timestamp()>;
  /// Runs before a lease is handed out; throwing aborts the lease and the
  /// URL goes back to the queue.
  using LeaseHook = std::function<void(const TaskLease&)>;

  Coordinator(CoordinatorConfig cfg, Rng rng, const PublicSuffixList* psl = nullptr,
              Clock clock = {});

  /// Normalizes and enqueues seed URLs; returns how many were accepted.
  std::size_t seed(std::span<const std::string> urls);

  /// Next lease, or nullopt when nothing is queued. Throws
  /// Error{service_unavailable} when the lease hook fails.
  std::optional<TaskLease> lease_task(const std::string& worker_id);

  /// Closes the lease and feeds discovered URLs to the frontier. A repeated
  /// or late submission returns accepted=false; an id never issued throws
  /// Error{stale_lease}.
  SubmitOutcome submit_result(const CrawlResult& result);

  /// Requeues leases past their expiry; returns how many.
  std::size_t expire_leases();

  CoordinatorStats stats();
  std::vector<std::string> urls_in_state(UrlState state);
  std::vector<TaskLease> open_leases();

  /// Writes frontier, lease table and RNG state via temp file and rename.
  /// Throws Error{snapshot_failed}; the previous snapshot stays intact.
  void snapshot(const std::filesystem::path& path);
  static std::unique_ptr<Coordinator> restore(const std::filesystem::path& path,
                                              CoordinatorConfig cfg,
                                              const PublicSuffixList* psl = nullptr,
                                              Clock clock = {});

  void set_lease_hook(LeaseHook hook);

 private:
  std::size_t expire_locked(Timestamp now);
  void snapshot_locked(const std::filesystem::path& path);

  CoordinatorConfig cfg_;
  const PublicSuffixList* psl_;
  Clock clock_;
  std::mutex mu_;
  Frontier frontier_;
  Rng rng_;
  std::string epoch_;
  std::uint64_t lease_seq_ = 0;
  std::unordered_map<std::string, TaskLease> open_;
  std::set<std::string> closed_;
  std::size_t completed_ = 0;
  std::size_t expired_ = 0;
  std::optional<std::string> last_snapshot_error_;
  LeaseHook hook_;
};

// Minimal HTTP front end: POST /v1/lease, POST /v1/result, GET /v1/stats.
class CoordinatorServer {
 public:
  explicit CoordinatorServer(Coordinator& coordinator);
  ~CoordinatorServer();

  /// Binds and serves on a background thread; returns the bound port
  /// (port 0 picks a free one). Throws Error{service_unavailable}.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Where a worker gets leases and sends results.
class LeaseChannel {
 public:
  virtual ~LeaseChannel() = default;
  virtual std::optional<TaskLease> lease(const std::string& worker_id) = 0;
  virtual bool submit(const CrawlResult& result) = 0;
};

class CoordinatorClient : public LeaseChannel {
 public:
  /// base_url like "http://127.0.0.1:8700".
  explicit CoordinatorClient(std::string base_url);

  /// Throws Error{service_unavailable} when the coordinator cannot be reached.
  std::optional<TaskLease> lease(const std::string& worker_id) override;
  /// Throws Error{stale_lease} for a lease the coordinator never issued.
  bool submit(const CrawlResult& result) override;
  nlohmann::json stats();

 private:
  std::string base_url_;
};

}  // namespace uiharvest
