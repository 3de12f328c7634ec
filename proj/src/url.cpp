#include "uiharvest/url.hpp"

#include <algorithm>
#include <cctype>

#include "uiharvest/errors.hpp"

namespace uiharvest {
namespace {

struct UrlParts {
  std::optional<std::string> scheme;
  std::optional<std::string> authority;
  std::string path;
  std::optional<std::string> query;
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool valid_scheme(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' ||
           c == '-' || c == '.';
  });
}

// Generic reference split per RFC 3986 appendix B; the fragment is dropped.
UrlParts split_reference(std::string_view ref) {
  UrlParts parts;
  if (auto hash = ref.find('#'); hash != std::string_view::npos) {
    ref = ref.substr(0, hash);
  }
  const auto colon = ref.find(':');
  const auto first_delim = ref.find_first_of("/?#");
  if (colon != std::string_view::npos &&
      (first_delim == std::string_view::npos || colon < first_delim) &&
      valid_scheme(ref.substr(0, colon))) {
    parts.scheme = lower(ref.substr(0, colon));
    ref.remove_prefix(colon + 1);
  }
  if (ref.starts_with("//")) {
    ref.remove_prefix(2);
    const auto end = ref.find_first_of("/?");
    parts.authority = std::string(ref.substr(0, end));
    ref = end == std::string_view::npos ? std::string_view{} : ref.substr(end);
  }
  const auto q = ref.find('?');
  parts.path = std::string(ref.substr(0, q));
  if (q != std::string_view::npos) parts.query = std::string(ref.substr(q + 1));
  return parts;
}

// RFC 3986 section 5.2.4.
std::string remove_dot_segments(std::string_view input) {
  std::string in(input);
  std::string out;
  while (!in.empty()) {
    if (in.starts_with("../")) {
      in.erase(0, 3);
    } else if (in.starts_with("./")) {
      in.erase(0, 2);
    } else if (in.starts_with("/./")) {
      in.erase(0, 2);
    } else if (in == "/.") {
      in = "/";
    } else if (in.starts_with("/../") || in == "/..") {
      in = in == "/.." ? "/" : in.substr(3);
      const auto slash = out.rfind('/');
      out.erase(slash == std::string::npos ? 0 : slash);
    } else if (in == "." || in == "..") {
      in.clear();
    } else {
      const auto next = in.find('/', in.front() == '/' ? 1 : 0);
      out.append(in.substr(0, next));
      in.erase(0, next == std::string::npos ? in.size() : next);
    }
  }
  return out;
}

std::string merge_paths(const UrlParts& base, std::string_view rel) {
  if (base.authority && base.path.empty()) return "/" + std::string(rel);
  const auto slash = base.path.rfind('/');
  if (slash == std::string::npos) return std::string(rel);
  return base.path.substr(0, slash + 1) + std::string(rel);
}

UrlParts resolve(const UrlParts& base, const UrlParts& rel) {
  UrlParts target;
  if (rel.scheme) {
    target = rel;
    target.path = remove_dot_segments(rel.path);
    return target;
  }
  target.scheme = base.scheme;
  if (rel.authority) {
    target.authority = rel.authority;
    target.path = remove_dot_segments(rel.path);
    target.query = rel.query;
    return target;
  }
  target.authority = base.authority;
  if (rel.path.empty()) {
    target.path = base.path;
    target.query = rel.query ? rel.query : base.query;
  } else {
    target.path = rel.path.front() == '/'
                      ? remove_dot_segments(rel.path)
                      : remove_dot_segments(merge_paths(base, rel.path));
    target.query = rel.query;
  }
  return target;
}

bool valid_host_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ||
         c == '_' || c == '%' || static_cast<unsigned char>(c) >= 0x80;
}

struct Authority {
  std::string userinfo;
  std::string host;
  std::string port;
};

Authority parse_authority(std::string_view raw, std::string_view whole) {
  Authority a;
  if (auto at = raw.rfind('@'); at != std::string_view::npos) {
    a.userinfo = std::string(raw.substr(0, at));
    raw.remove_prefix(at + 1);
  }
  std::string_view host = raw;
  if (raw.starts_with("[")) {
    const auto close = raw.find(']');
    if (close == std::string_view::npos) {
      throw Error(ErrorKind::malformed_url, "unterminated IPv6 host: " + std::string(whole));
    }
    host = raw.substr(0, close + 1);
    raw.remove_prefix(close + 1);
    if (!raw.empty() && raw.front() != ':') {
      throw Error(ErrorKind::malformed_url, "bad authority: " + std::string(whole));
    }
    if (!raw.empty()) a.port = std::string(raw.substr(1));
  } else if (auto colon = raw.rfind(':'); colon != std::string_view::npos) {
    host = raw.substr(0, colon);
    a.port = std::string(raw.substr(colon + 1));
  }
  if (host.empty()) {
    throw Error(ErrorKind::malformed_url, "missing host: " + std::string(whole));
  }
  if (host.front() != '[' &&
      !std::all_of(host.begin(), host.end(), valid_host_char)) {
    throw Error(ErrorKind::malformed_url, "invalid host: " + std::string(whole));
  }
  if (!std::all_of(a.port.begin(), a.port.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      }) || a.port.size() > 5) {
    throw Error(ErrorKind::malformed_url, "invalid port: " + std::string(whole));
  }
  a.host = lower(host);
  while (a.host.ends_with('.')) a.host.pop_back();
  if (a.host.empty()) {
    throw Error(ErrorKind::malformed_url, "missing host: " + std::string(whole));
  }
  return a;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

void check_scheme(const UrlParts& parts, std::string_view whole) {
  if (parts.scheme && *parts.scheme != "http" && *parts.scheme != "https") {
    throw Error(ErrorKind::rejected_scheme,
                "scheme not crawlable: " + std::string(whole));
  }
}

}  // namespace

const char* to_string(UrlState state) {
  switch (state) {
    case UrlState::queued: return "queued";
    case UrlState::leased: return "leased";
    case UrlState::visited: return "visited";
  }
  return "queued";
}

std::optional<UrlState> parse_url_state(std::string_view text) {
  if (text == "queued") return UrlState::queued;
  if (text == "leased") return UrlState::leased;
  if (text == "visited") return UrlState::visited;
  return std::nullopt;
}

std::vector<std::string> path_segments(std::string_view path,
                                       std::string_view query) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  while (start < path.size()) {
    auto slash = path.find('/', start);
    if (slash == std::string_view::npos) slash = path.size();
    if (slash > start) segments.emplace_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  if (!query.empty()) {
    std::vector<std::string> params;
    std::size_t pos = 0;
    while (pos <= query.size()) {
      auto amp = query.find('&', pos);
      if (amp == std::string_view::npos) amp = query.size();
      if (amp > pos) params.emplace_back(query.substr(pos, amp - pos));
      pos = amp + 1;
    }
    std::sort(params.begin(), params.end());
    std::string joined = "?";
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (i > 0) joined.push_back('&');
      joined += params[i];
    }
    segments.push_back(std::move(joined));
  }
  return segments;
}

std::string url_path_and_query(std::string_view normalized_url) {
  const auto scheme_end = normalized_url.find("://");
  if (scheme_end == std::string_view::npos) return "/";
  const auto path_start = normalized_url.find_first_of("/?", scheme_end + 3);
  if (path_start == std::string_view::npos) return "/";
  return std::string(normalized_url.substr(path_start));
}

UrlRecord normalize_url(std::string_view raw,
                        std::optional<std::string_view> base,
                        const PublicSuffixList* psl) {
  const std::string_view input = trim(raw);
  if (input.empty()) throw Error(ErrorKind::malformed_url, "empty url");
  if (input.front() == '#') {
    throw Error(ErrorKind::malformed_url,
                "same-document reference: " + std::string(input));
  }
  UrlParts parts = split_reference(input);
  check_scheme(parts, input);
  if (!parts.scheme) {
    if (!base) {
      throw Error(ErrorKind::malformed_url,
                  "relative url without base: " + std::string(input));
    }
    const UrlParts base_parts = split_reference(trim(*base));
    if (!base_parts.scheme || !base_parts.authority) {
      throw Error(ErrorKind::malformed_url, "base is not absolute: " + std::string(*base));
    }
    check_scheme(base_parts, *base);
    parts = resolve(base_parts, parts);
  } else {
    parts.path = remove_dot_segments(parts.path);
  }
  if (!parts.authority) {
    throw Error(ErrorKind::malformed_url, "missing authority: " + std::string(input));
  }
  const Authority auth = parse_authority(*parts.authority, input);
  const bool default_port = auth.port.empty() ||
                            (*parts.scheme == "http" && auth.port == "80") ||
                            (*parts.scheme == "https" && auth.port == "443");
  if (parts.path.empty()) parts.path = "/";
  if (parts.path.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(ErrorKind::malformed_url, "whitespace in path: " + std::string(input));
  }

  UrlRecord record;
  record.url = *parts.scheme + "://";
  if (!auth.userinfo.empty()) record.url += auth.userinfo + "@";
  record.url += auth.host;
  if (!default_port) record.url += ":" + auth.port;
  record.url += parts.path;
  const std::string query = parts.query.value_or("");
  if (!query.empty()) record.url += "?" + query;
  record.host = auth.host;
  record.registrable_domain = registrable_domain(auth.host, psl);
  record.path_segments = path_segments(parts.path, query);
  return record;
}

}  // namespace uiharvest
