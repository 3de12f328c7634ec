#include <set>

#include "doctest.h"
#include "support/images.hpp"
#include "support/samples.hpp"
#include "uiharvest/errors.hpp"
#include "uiharvest/pairgen.hpp"

using namespace uiharvest;

namespace {

// Block means over a 9x8 grid with plain loops; exact when the image size
// is a multiple of the grid.
std::uint64_t oracle_dhash(const std::vector<std::uint8_t>& px, int width, int height) {
  const int bw = width / 9, bh = height / 8;
  double cell[8][9];
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 9; ++c) {
      double sum = 0;
      for (int y = r * bh; y < (r + 1) * bh; ++y) {
        for (int x = c * bw; x < (c + 1) * bw; ++x) sum += px[std::size_t(y * width + x)];
      }
      cell[r][c] = sum / (bw * bh);
    }
  }
  std::uint64_t h = 0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (cell[r][c] > cell[r][c + 1]) h |= std::uint64_t{1} << (r * 8 + c);
    }
  }
  return h;
}

PageSample page(const std::string& url, const std::string& device, std::int64_t ms,
                int fullpage_height = 844) {
  auto s = fixtures::sample(url, device, ms, {fixtures::node(1, std::nullopt, "rootwebarea")});
  s.fullpage_height = fullpage_height;
  return s;
}

void check_invariants(const PairResult& r, std::span<const PageSample> corpus) {
  std::map<std::string, const PageSample*> by_id;
  for (const auto& s : corpus) by_id[s.sample_id] = &s;
  for (const auto& p : r.pairs) {
    CHECK(p.a != p.b);
    CHECK(p.label == label_of(p.provenance));
    const auto* a = by_id.at(p.a.sample_id);
    const auto* b = by_id.at(p.b.sample_id);
    CHECK(a->device == b->device);
    switch (p.provenance) {
      case Provenance::revisit:
        CHECK(a->url == b->url);
        CHECK(a->captured_at != b->captured_at);
        break;
      case Provenance::scroll:
        CHECK(a == b);
        CHECK(p.a.crop_top.has_value());
        CHECK(p.b.crop_top.has_value());
        break;
      case Provenance::same_domain_diff_path:
        CHECK(a->registrable_domain == b->registrable_domain);
        CHECK(url_path_and_query(a->url) != url_path_and_query(b->url));
        break;
      case Provenance::cross_domain:
        CHECK(a->registrable_domain != b->registrable_domain);
        break;
    }
  }
}

}  // namespace

TEST_CASE("scroll_tops") {
  CHECK(scroll_tops(3000, 844, 422) == std::vector<int>{0, 422, 844, 1266, 1688, 2110, 2156});
  CHECK(scroll_tops(844, 844, 422) == std::vector<int>{0});
  CHECK(scroll_tops(500, 844, 422) == std::vector<int>{0});
  CHECK(scroll_tops(1688, 844, 422) == std::vector<int>{0, 422, 844});
  CHECK_THROWS_AS(scroll_tops(3000, 844, 0), Error);

  auto s = page("https://example.com/", "phone", 0, 3000);
  const auto crops = scroll_windows(s);
  REQUIRE(crops.size() == 7);
  CHECK(crops.back().window_top == 2156);
  CHECK(crops.back().window_height == 844);
  s.fullpage_height = 500;
  const auto clamped = scroll_windows(s);
  REQUIRE(clamped.size() == 1);
  CHECK(clamped[0].window_height == 500);
}

TEST_CASE("property: scroll windows fit the page and cover it") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const int vh = 100 + int(uniform_index(rng, 1000));
    const int h = 1 + int(uniform_index(rng, 20000));
    const int stride = 1 + int(uniform_index(rng, std::size_t(vh)));
    const auto tops = scroll_tops(h, vh, stride);
    CHECK(tops.front() == 0);
    CHECK(std::set<int>(tops.begin(), tops.end()).size() == tops.size());
    for (int t : tops) CHECK((t + vh <= h || (tops.size() == 1 && t == 0)));
    if (h > vh) CHECK(tops.back() == h - vh);
  }
}

TEST_CASE("ImageRef round trip") {
  CHECK(ImageRef::parse("abc").str() == "abc");
  const auto r = ImageRef::parse("abc#top=422");
  CHECK(r.sample_id == "abc");
  CHECK(r.crop_top == 422);
  CHECK(r.str() == "abc#top=422");
  CHECK_THROWS_AS(ImageRef::parse("abc#top=x"), Error);
  CHECK_THROWS_AS(ImageRef::parse("#top=1"), Error);
}

TEST_CASE("dhash") {
  const auto img = fixtures::block_page(1, 120, 200);
  const auto bytes = encode_gray(img, "png");
  CHECK(phash_distance(bytes, bytes) == 0);
  CHECK(hamming_distance(0b1011, 0b0011) == 1);
  CHECK(hamming_distance(~std::uint64_t{0}, 0) == 64);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = fixtures::textured_page(seed, 90, 160);
    CHECK(phash_distance(encode_gray(a, "png"), encode_gray(fixtures::invert(a), "png")) >= 32);
    // inversion flips every gradient bit except ties
    const auto flat = fixtures::block_page(seed, 90, 160);
    const GrayImage cells = area_downscale(flat, 8, 9);
    int ties = 0;
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) ties += cells(r, c) == cells(r, c + 1);
    }
    CHECK(hamming_distance(dhash(flat), dhash(fixtures::invert(flat))) == 64 - ties);
  }

  CHECK_THROWS_AS(phash_distance("not an image", bytes), Error);
  try {
    decode_gray("garbage");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::decode);
  }
}

TEST_CASE("dhash matches a loop oracle on grid-aligned random images") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 9 * (1 + int(uniform_index(rng, 8)));
    const int h = 8 * (1 + int(uniform_index(rng, 8)));
    std::vector<std::uint8_t> px(std::size_t(w * h));
    GrayImage img(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        px[std::size_t(y * w + x)] = std::uint8_t(uniform_index(rng, 256));
        img(y, x) = px[std::size_t(y * w + x)];
      }
    }
    CHECK(dhash(img) == oracle_dhash(px, w, h));
    CHECK(dhash(decode_gray(encode_gray(img, "png"))) == dhash(img));
  }
}

TEST_CASE("generate_pairs: single-provenance corpora") {
  Rng rng(1);
  SUBCASE("two captures of one URL give revisit pairs") {
    // short pages: no scroll; one domain one path: no different pairs
    const std::vector<PageSample> corpus{page("https://example.com/x", "phone", 1000),
                                         page("https://example.com/x", "phone", 2000)};
    const auto r = generate_pairs(corpus, 10, rng);
    REQUIRE(r.pairs.size() == 10);
    for (const auto& p : r.pairs) {
      CHECK(p.label == PairLabel::same);
      CHECK(p.provenance == Provenance::revisit);
    }
    CHECK(r.warnings.size() == 3);
  }
  SUBCASE("one tall page gives scroll pairs") {
    const std::vector<PageSample> corpus{page("https://example.com/x", "phone", 0, 1688)};
    const auto r = generate_pairs(corpus, 20, rng);
    REQUIRE(r.pairs.size() == 20);
    for (const auto& p : r.pairs) {
      CHECK(p.provenance == Provenance::scroll);
      CHECK(p.a.crop_top != p.b.crop_top);
    }
  }
  SUBCASE("two paths on one domain give same_domain_diff_path pairs") {
    const std::vector<PageSample> corpus{page("https://example.com/a", "phone", 0),
                                         page("https://example.com/b", "phone", 0)};
    const auto r = generate_pairs(corpus, 10, rng);
    for (const auto& p : r.pairs) {
      CHECK(p.label == PairLabel::different);
      CHECK(p.provenance == Provenance::same_domain_diff_path);
    }
  }
  SUBCASE("devices are never mixed") {
    const std::vector<PageSample> corpus{page("https://example.com/a", "phone", 0),
                                         page("https://example.org/a", "laptop", 0)};
    const auto r = generate_pairs(corpus, 5, rng);
    CHECK(r.pairs.empty());
    CHECK(r.warnings.back() == "generated 0 of 5 pairs");
  }
}

TEST_CASE("generate_pairs: balance, consistency, determinism") {
  std::vector<PageSample> corpus;
  for (int d = 0; d < 6; ++d) {
    for (const char* path : {"/", "/a", "/b/c"}) {
      for (const char* dev : {"phone", "tablet"}) {
        for (int t = 0; t < 1 + (d % 3); ++t) {
          corpus.push_back(page("https://site" + std::to_string(d) + ".org" + path, dev,
                                t * 1000, 844 + 300 * d));
        }
      }
    }
  }
  Rng rng(42);
  const auto r = generate_pairs(corpus, 10000, rng);
  REQUIRE(r.pairs.size() == 10000);
  CHECK(r.warnings.empty());
  check_invariants(r, corpus);
  std::map<Provenance, int> counts;
  for (const auto& p : r.pairs) ++counts[p.provenance];
  const double same = (counts[Provenance::revisit] + counts[Provenance::scroll]) / 10000.0;
  CHECK(same >= 0.47);
  CHECK(same <= 0.53);
  for (const auto& [prov, n] : counts) CHECK(std::abs(n / 10000.0 - 0.25) < 0.02);

  Rng r1(7), r2(7);
  const auto x = generate_pairs(corpus, 200, r1);
  auto shuffled = corpus;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto y = generate_pairs(shuffled, 200, r2);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(x.pairs[i].a == y.pairs[i].a);
    CHECK(x.pairs[i].b == y.pairs[i].b);
  }
}

TEST_CASE("duplicate filtering with a table hasher") {
  // revisits hash identically; scroll crops hash far apart
  std::vector<PageSample> corpus;
  for (int d = 0; d < 3; ++d) {
    for (int t = 0; t < 2; ++t) {
      corpus.push_back(page("https://s" + std::to_string(d) + ".net/p", "phone", t, 2000));
      corpus.push_back(page("https://s" + std::to_string(d) + ".net/q", "phone", t, 844));
    }
  }
  const ImageHasher hasher = [](const ImageRef& ref) -> std::uint64_t {
    return ref.crop_top ? stable_hash64(ref.str()) : 0;
  };
  PairConfig cfg;
  cfg.filter_duplicates = true;
  Rng rng(5);
  const auto r = generate_pairs(corpus, 2000, rng, cfg, hasher);
  REQUIRE(r.pairs.size() == 2000);
  check_invariants(r, corpus);
  int same = 0;
  for (const auto& p : r.pairs) {
    REQUIRE(p.phash_distance.has_value());
    CHECK(p.provenance != Provenance::revisit);
    if (p.label == PairLabel::same) {
      ++same;
      CHECK(*p.phash_distance > 4);
    }
  }
  CHECK(std::abs(same / 2000.0 - 0.5) < 0.04);
  CHECK(std::any_of(r.warnings.begin(), r.warnings.end(), [](const std::string& w) {
    return w.find("revisit") != std::string::npos;
  }));
  CHECK_THROWS_AS(generate_pairs(corpus, 1, rng, cfg), Error);
}

TEST_CASE("store-backed hashing over synthetic screenshots") {
  const auto root = fixtures::temp_dir("pairgen");
  DatasetStore store(root);
  const auto corpus = fixtures::build_pair_corpus(store, 3);
  StoreImageHasher hasher(store, corpus);

  const PageSample& s = corpus.front();
  const auto page_img = decode_gray(read_file(store.sample_dir(s.sample_id) / s.fullpage_image_ref));
  const int top = scroll_windows(s).at(1).window_top;
  const auto expected = dhash(page_img.middleRows(std::lround(top * fixtures::kImageScale),
                                                  std::lround(s.viewport.height * fixtures::kImageScale)));
  CHECK(hasher(ImageRef{s.sample_id, top}) == expected);
  CHECK(hasher(ImageRef{s.sample_id, std::nullopt}) ==
        dhash(decode_gray(read_file(store.sample_dir(s.sample_id) / s.viewport_image_ref))));

  PairConfig cfg;
  cfg.filter_duplicates = true;
  Rng rng(9);
  const auto r = generate_pairs(corpus, 500, rng, cfg, std::ref(hasher));
  REQUIRE(r.pairs.size() == 500);
  check_invariants(r, corpus);
  for (const auto& p : r.pairs) {
    if (p.label == PairLabel::same) CHECK(*p.phash_distance > 4);
  }
  std::filesystem::remove_all(root);
}
