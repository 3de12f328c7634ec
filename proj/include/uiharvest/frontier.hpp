#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uiharvest/random.hpp"
#include "uiharvest/url.hpp"

namespace uiharvest {

struct FrontierConfig {
  double p_min = 0.05;  // revisit floor
  std::size_t max_queued_per_host = 1000;
  std::vector<std::string> seed_urls;

  /// Throws Error{config} unless p_min is in (0, 1] and the cap is >= 1.
  void validate() const;
};

/// Longest-common-prefix ratio of two segment lists; two empty paths are
/// identical (1.0).
double segment_similarity(std::span<const std::string> a,
                          std::span<const std::string> b);

/// Max segment_similarity of candidate against every visited record (all of
/// the same host); 0 when nothing on the host has been visited.
double path_similarity(const UrlRecord& candidate,
                       std::span<const UrlRecord> visited_same_host);

/// max(p_min, 1 - similarity).
double url_weight(double similarity, const FrontierConfig& cfg);

struct HostCounts {
  std::string host;
  std::size_t queued = 0;
  std::size_t leased = 0;
  std::size_t visited = 0;
};

// Diversity-weighted URL frontier. Queued URLs are grouped by host; a draw
// picks a non-empty host uniformly, then a URL within it proportionally to
// the weight assigned at enqueue time. Not internally synchronized.
class Frontier {
 public:
  explicit Frontier(FrontierConfig cfg);

  const FrontierConfig& config() const noexcept { return cfg_; }

  /// Stores a normalized record as queued. Rejects URLs already queued or
  /// leased, hosts at their queue cap, and visited URLs unless a revisit
  /// lottery draw falls below p_min.
  bool enqueue(UrlRecord record, Rng& rng);

  /// Leases one URL (queued -> leased), or nullopt when nothing is queued.
  std::optional<UrlRecord> next_url(Rng& rng);

  /// queued|leased -> visited. False when the URL is unknown or already
  /// visited.
  bool mark_visited(std::string_view url);

  /// leased -> queued (lease expiry). The record keeps its weight.
  bool release(std::string_view url);

  const UrlRecord* find(std::string_view url) const;

  /// URLs currently in the given state, sorted.
  std::vector<std::string> urls_in_state(UrlState state) const;

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t queued_count() const noexcept { return queued_total_; }
  std::size_t leased_count() const noexcept { return leased_total_; }
  std::size_t visited_count() const noexcept { return visited_total_; }
  std::vector<HostCounts> host_counts() const;

  /// Line-delimited "state \t weight \t url" records, hosts in first-seen
  /// order and queued URLs first in queue order, so that load() rebuilds an
  /// equivalent frontier (same future draws under the same RNG state).
  void save(std::ostream& out) const;
  static Frontier load(std::istream& in, FrontierConfig cfg,
                       const PublicSuffixList* psl = nullptr);

 private:
  struct Host {
    std::string name;
    std::vector<std::string> queued;   // queue order
    std::vector<std::string> members;  // every URL, insertion order
    std::vector<std::string> visited;
    std::size_t leased = 0;
  };

  Host& host_for(const std::string& name);
  double similarity_to_visited(const Host& host, const UrlRecord& record) const;
  void insert_loaded(UrlRecord record);

  FrontierConfig cfg_;
  std::vector<Host> hosts_;
  std::unordered_map<std::string, std::size_t> host_index_;
  std::unordered_map<std::string, UrlRecord> records_;
  std::size_t queued_total_ = 0;
  std::size_t leased_total_ = 0;
  std::size_t visited_total_ = 0;
};

}  // namespace uiharvest
