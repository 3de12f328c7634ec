#include "uiharvest/public_suffix.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <vector>

#include "uiharvest/errors.hpp"

namespace uiharvest {
namespace {

std::vector<std::string_view> split_labels(std::string_view host) {
  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (start <= host.size()) {
    const auto dot = host.find('.', start);
    const auto end = dot == std::string_view::npos ? host.size() : dot;
    labels.push_back(host.substr(start, end - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

// Suffix made of the last n labels.
std::string tail(const std::vector<std::string_view>& labels, std::size_t n) {
  std::string out;
  for (std::size_t i = labels.size() - n; i < labels.size(); ++i) {
    if (!out.empty()) out.push_back('.');
    out.append(labels[i]);
  }
  return out;
}

bool is_ip_literal(std::string_view host) {
  if (!host.empty() && host.front() == '[') return true;
  return !host.empty() && std::all_of(host.begin(), host.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  });
}

}  // namespace

PublicSuffixList PublicSuffixList::parse(std::istream& in) {
  PublicSuffixList psl;
  std::string line;
  while (std::getline(in, line)) {
    // Rules end at the first whitespace.
    const auto end = line.find_first_of(" \t\r");
    if (end != std::string::npos) line.resize(end);
    if (line.empty() || line.starts_with("//")) continue;
    std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (line.starts_with("!")) {
      psl.exceptions_.insert(line.substr(1));
    } else if (line.starts_with("*.")) {
      psl.wildcards_.insert(line.substr(2));
    } else {
      psl.rules_.insert(line);
    }
  }
  return psl;
}

PublicSuffixList PublicSuffixList::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open public suffix list: " + path);
  return parse(in);
}

std::string PublicSuffixList::registrable_domain(std::string_view host) const {
  if (is_ip_literal(host)) return std::string(host);
  const auto labels = split_labels(host);
  // Length (in labels) of the longest matching public suffix; the implicit
  // "*" rule makes it at least one.
  std::size_t suffix_len = 1;
  for (std::size_t n = 1; n <= labels.size(); ++n) {
    const std::string candidate = tail(labels, n);
    if (exceptions_.contains(candidate)) {
      suffix_len = n - 1;
      break;
    }
    if (rules_.contains(candidate)) suffix_len = std::max(suffix_len, n);
    if (n < labels.size() && wildcards_.contains(candidate)) {
      suffix_len = std::max(suffix_len, n + 1);
    }
  }
  if (suffix_len >= labels.size()) return std::string(host);
  return tail(labels, suffix_len + 1);
}

std::string registrable_domain(std::string_view host,
                               const PublicSuffixList* psl) {
  if (psl != nullptr && !psl->empty()) return psl->registrable_domain(host);
  if (is_ip_literal(host)) return std::string(host);
  const auto labels = split_labels(host);
  if (labels.size() <= 2) return std::string(host);
  return tail(labels, 2);
}

}  // namespace uiharvest
