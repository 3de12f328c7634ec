#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uiharvest/public_suffix.hpp"

namespace uiharvest {

enum class UrlState { queued, leased, visited };

const char* to_string(UrlState state);
std::optional<UrlState> parse_url_state(std::string_view text);

// Frontier unit: a normalized http(s) URL plus its host grouping.
struct UrlRecord {
  std::string url;
  std::string host;
  std::string registrable_domain;
  std::vector<std::string> path_segments;
  UrlState state = UrlState::queued;
  double weight = 1.0;
};

/// Normalizes raw (resolved against base when relative) into a record with
/// state queued and weight 1. Throws Error{rejected_scheme} for non-http(s)
/// schemes and Error{malformed_url} for anything unparseable, including
/// fragment-only references such as "#".
UrlRecord normalize_url(std::string_view raw,
                        std::optional<std::string_view> base = std::nullopt,
                        const PublicSuffixList* psl = nullptr);

/// Path split on '/' with empty components dropped. A non-empty query adds
/// one trailing "?k=v&..." segment with its parameters sorted.
std::vector<std::string> path_segments(std::string_view path,
                                       std::string_view query);

/// Path-and-query part of a normalized URL ("/a/b?x=1").
std::string url_path_and_query(std::string_view normalized_url);

}  // namespace uiharvest
