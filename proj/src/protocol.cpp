#include "uiharvest/protocol.hpp"

#include "uiharvest/errors.hpp"

namespace uiharvest {

const char* to_string(CrawlStatus status) {
  switch (status) {
    case CrawlStatus::ok: return "ok";
    case CrawlStatus::partial: return "partial";
    case CrawlStatus::timeout: return "timeout";
    case CrawlStatus::nav_error: return "nav_error";
  }
  return "?";
}

const char* to_string(DeviceStatus status) {
  switch (status) {
    case DeviceStatus::ok: return "ok";
    case DeviceStatus::skipped: return "skipped";
    case DeviceStatus::error: return "error";
  }
  return "?";
}

CrawlStatus parse_crawl_status(std::string_view text) {
  for (auto s : {CrawlStatus::ok, CrawlStatus::partial, CrawlStatus::timeout,
                 CrawlStatus::nav_error}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorKind::parse, "unknown crawl status: " + std::string(text));
}

DeviceStatus parse_device_status(std::string_view text) {
  for (auto s : {DeviceStatus::ok, DeviceStatus::skipped, DeviceStatus::error}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorKind::parse, "unknown device status: " + std::string(text));
}

bool CrawlResult::consistent() const {
  const bool stored = status == CrawlStatus::ok || status == CrawlStatus::partial;
  return stored == !sample_refs.empty();
}

void to_json(nlohmann::json& j, const TaskLease& lease) {
  j = {{"lease_id", lease.lease_id},
       {"url", lease.url},
       {"device_plan", lease.device_plan},
       {"issued_at", format_timestamp(lease.issued_at)},
       {"expires_at", format_timestamp(lease.expires_at)}};
}

void from_json(const nlohmann::json& j, TaskLease& lease) {
  try {
    lease.lease_id = j.at("lease_id").get<std::string>();
    lease.url = j.at("url").get<std::string>();
    lease.device_plan = j.at("device_plan").get<std::vector<std::string>>();
    lease.issued_at = parse_timestamp(j.at("issued_at").get<std::string>());
    lease.expires_at = parse_timestamp(j.at("expires_at").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad lease: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const CrawlResult& result) {
  nlohmann::json devices = nlohmann::json::object();
  for (const auto& [name, status] : result.per_device_status) devices[name] = to_string(status);
  j = {{"lease_id", result.lease_id},
       {"status", to_string(result.status)},
       {"discovered_urls", result.discovered_urls},
       {"sample_refs", result.sample_refs},
       {"per_device_status", devices}};
}

void from_json(const nlohmann::json& j, CrawlResult& result) {
  try {
    result.lease_id = j.at("lease_id").get<std::string>();
    result.status = parse_crawl_status(j.at("status").get<std::string>());
    result.discovered_urls = j.value("discovered_urls", std::vector<std::string>{});
    result.sample_refs = j.value("sample_refs", std::vector<std::string>{});
    result.per_device_status.clear();
    const auto devices = j.value("per_device_status", nlohmann::json::object());
    for (const auto& [name, status] : devices.items()) {
      result.per_device_status[name] = parse_device_status(status.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad crawl result: ") + e.what());
  }
}

}  // namespace uiharvest
