#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <unordered_set>

namespace uiharvest {

// Public-suffix rule set in the publicsuffix.org list format (normal,
// "*." wildcard and "!" exception rules; comments start with "//").
class PublicSuffixList {
 public:
  PublicSuffixList() = default;

  static PublicSuffixList parse(std::istream& in);
  static PublicSuffixList load_file(const std::string& path);

  bool empty() const noexcept {
    return rules_.empty() && wildcards_.empty() && exceptions_.empty();
  }

  /// eTLD+1 of a lowercase host. A host that is itself a public suffix is
  /// returned unchanged.
  std::string registrable_domain(std::string_view host) const;

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;  // stored without "*."
  std::unordered_set<std::string> exceptions_;  // stored without "!"
};

/// eTLD+1 using psl when given and non-empty, otherwise the last two labels.
/// IP literals map to themselves.
std::string registrable_domain(std::string_view host,
                               const PublicSuffixList* psl = nullptr);

}  // namespace uiharvest
