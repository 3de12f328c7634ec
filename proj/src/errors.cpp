#include "uiharvest/errors.hpp"

namespace uiharvest {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::rejected_scheme: return "rejected-scheme";
    case ErrorKind::malformed_url: return "malformed-url";
    case ErrorKind::stale_lease: return "stale-lease";
    case ErrorKind::service_unavailable: return "service-unavailable";
    case ErrorKind::snapshot_failed: return "snapshot-failed";
    case ErrorKind::storage: return "storage";
    case ErrorKind::corrupt_sample: return "corrupt-sample";
    case ErrorKind::validation: return "validation";
    case ErrorKind::size: return "size";
    case ErrorKind::empty_corpus: return "empty-corpus";
    case ErrorKind::empty_table: return "empty-table";
    case ErrorKind::exhaustion: return "exhaustion";
    case ErrorKind::parse: return "parse";
    case ErrorKind::decode: return "decode";
    case ErrorKind::config: return "config";
    case ErrorKind::capture_failed: return "capture-failed";
    case ErrorKind::nav_timeout: return "nav-timeout";
  }
  return "unknown";
}

}  // namespace uiharvest
