#include <sstream>

#include "doctest.h"
#include "uiharvest/errors.hpp"
#include "uiharvest/public_suffix.hpp"
#include "uiharvest/url.hpp"

using namespace uiharvest;

namespace {

ErrorKind kind_of(std::string_view raw, std::optional<std::string_view> base = std::nullopt) {
  try {
    normalize_url(raw, base);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error for " << raw);
  return ErrorKind::parse;
}

}  // namespace

TEST_CASE("normalize_url lowercases scheme and host and drops the fragment") {
  const auto rec = normalize_url("HTTP://Example.COM/A#x");
  CHECK(rec.url == "http://example.com/A");
  CHECK(rec.host == "example.com");
  CHECK(rec.registrable_domain == "example.com");
  CHECK(rec.path_segments == std::vector<std::string>{"A"});
}

TEST_CASE("relative references resolve against the base") {
  CHECK(normalize_url("/user/beta", "http://example.com/user/alpha").url ==
        "http://example.com/user/beta");
  CHECK(normalize_url("beta", "http://example.com/user/alpha").url ==
        "http://example.com/user/beta");
  CHECK(normalize_url("../x/./y", "http://example.com/a/b/c").url ==
        "http://example.com/a/x/y");
  CHECK(normalize_url("?q=1", "http://example.com/a/b").url ==
        "http://example.com/a/b?q=1");
  CHECK(normalize_url("//other.org/p", "https://example.com/").url ==
        "https://other.org/p");
}

TEST_CASE("default ports are stripped, others kept") {
  CHECK(normalize_url("http://a.com:80/x").url == "http://a.com/x");
  CHECK(normalize_url("https://a.com:443").url == "https://a.com/");
  CHECK(normalize_url("http://a.com:8080/x").url == "http://a.com:8080/x");
}

TEST_CASE("non-http schemes and garbage are rejected") {
  CHECK(kind_of("javascript:void(0)") == ErrorKind::rejected_scheme);
  CHECK(kind_of("mailto:someone@example.com") == ErrorKind::rejected_scheme);
  CHECK(kind_of("ftp://example.com/") == ErrorKind::rejected_scheme);
  CHECK(kind_of("#", "http://example.com/") == ErrorKind::malformed_url);
  CHECK(kind_of("") == ErrorKind::malformed_url);
  CHECK(kind_of("/relative/only") == ErrorKind::malformed_url);
  CHECK(kind_of("http://") == ErrorKind::malformed_url);
  CHECK(kind_of("http://exa mple.com/") == ErrorKind::malformed_url);
  CHECK(kind_of("http://a.com:99x/") == ErrorKind::malformed_url);
}

TEST_CASE("query becomes one sorted trailing segment") {
  const auto rec = normalize_url("http://shop.example.com/list?size=m&color=red");
  CHECK(rec.url == "http://shop.example.com/list?size=m&color=red");
  CHECK(rec.path_segments == std::vector<std::string>{"list", "?color=red&size=m"});
  CHECK(normalize_url("http://a.com//x///y/").path_segments ==
        std::vector<std::string>{"x", "y"});
}

TEST_CASE("registrable domain falls back to the last two labels") {
  CHECK(registrable_domain("shop.example.com") == "example.com");
  CHECK(registrable_domain("example.com") == "example.com");
  CHECK(registrable_domain("localhost") == "localhost");
  CHECK(registrable_domain("10.0.0.1") == "10.0.0.1");
}

TEST_CASE("public suffix rules, wildcards and exceptions") {
  std::istringstream list(
      "// comment\n"
      "com\n"
      "co.uk\n"
      "uk\n"
      "*.ck\n"
      "!www.ck\n");
  const auto psl = PublicSuffixList::parse(list);
  CHECK(psl.registrable_domain("a.b.example.co.uk") == "example.co.uk");
  CHECK(psl.registrable_domain("shop.example.com") == "example.com");
  CHECK(psl.registrable_domain("a.foo.ck") == "a.foo.ck");
  CHECK(psl.registrable_domain("x.www.ck") == "www.ck");
  CHECK(psl.registrable_domain("co.uk") == "co.uk");
  CHECK(normalize_url("http://news.bbc.co.uk/", std::nullopt, &psl).registrable_domain ==
        "bbc.co.uk");
}

TEST_CASE("url_path_and_query") {
  CHECK(url_path_and_query("http://a.com/x/y?z=1") == "/x/y?z=1");
  CHECK(url_path_and_query("http://a.com") == "/");
}
