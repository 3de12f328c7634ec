#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

// Coordinator <-> worker messages.

struct TaskLease {
  std::string lease_id;
  std::string url;
  std::vector<std::string> device_plan;
  Timestamp issued_at{};
  Timestamp expires_at{};
};

enum class CrawlStatus { ok, partial, timeout, nav_error };
enum class DeviceStatus { ok, skipped, error };

const char* to_string(CrawlStatus status);
const char* to_string(DeviceStatus status);
CrawlStatus parse_crawl_status(std::string_view text);
DeviceStatus parse_device_status(std::string_view text);

struct CrawlResult {
  std::string lease_id;
  CrawlStatus status = CrawlStatus::nav_error;
  std::vector<std::string> discovered_urls;
  std::vector<std::string> sample_refs;
  std::map<std::string, DeviceStatus> per_device_status;

  /// sample_refs is non-empty exactly when status is ok or partial.
  bool consistent() const;
};

void to_json(nlohmann::json& j, const TaskLease& lease);
void from_json(const nlohmann::json& j, TaskLease& lease);
void to_json(nlohmann::json& j, const CrawlResult& result);
void from_json(const nlohmann::json& j, CrawlResult& result);

}  // namespace uiharvest
