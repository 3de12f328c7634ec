#include <unistd.h>

#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "support/samples.hpp"
#include "uiharvest/errors.hpp"
#include "uiharvest/store.hpp"

using namespace uiharvest;
namespace fs = std::filesystem;

namespace {

ErrorKind load_error(const DatasetStore& store, const std::string& id) {
  try {
    store.load_sample(id);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected load to fail");
  return ErrorKind::parse;
}

PageSample rich_sample() {
  auto s = fixtures::sample("https://shop.example.com/items/42?x=1", "phone", 1760000000123,
                            fixtures::small_page());
  s.axtree[1].name = "Home";
  s.axtree[1].clickable = true;
  s.axtree[2].style = {{"opacity", "1"}, {"z-index", "auto"}};
  s.axtree[3].boxes.reset();
  s.axtree[4].boxes = BoxModel{Rect{20, 90, 100, 50}, Rect{10, 80, 120, 70},
                               Rect{9, 79, 122, 72}, Rect{-1, 69, 142, 92}};
  s.axtree[4].negative_margin = true;
  s.probe = ProbeReport{1, true, std::nullopt, {"/a", "#"}};
  s.timings = {{"navigate", 812.5}, {"screenshot", 40}};
  s.fullpage_truncated = true;
  return s;
}

}  // namespace

TEST_CASE("assign_split groups by registrable domain and is deterministic") {
  const auto a = normalize_url("http://shop.example.com/x");
  const auto b = normalize_url("http://example.com/y");
  CHECK(a.registrable_domain == b.registrable_domain);
  CHECK(assign_split(a.registrable_domain, "s") == assign_split(b.registrable_domain, "s"));
  for (int i = 0; i < 100; ++i) {
    const std::string d = "d" + std::to_string(i) + ".org";
    CHECK(assign_split(d, "salt") == assign_split(d, "salt"));
  }
}

TEST_CASE("split fractions over 10,000 synthetic domains") {
  std::map<Split, int> counts;
  for (int i = 0; i < 10000; ++i) {
    ++counts[assign_split("site" + std::to_string(i) + ".example", "uiharvest")];
  }
  CHECK(std::abs(counts[Split::train] / 1e4 - 0.70) <= 0.02);
  CHECK(std::abs(counts[Split::val] / 1e4 - 0.10) <= 0.02);
  CHECK(std::abs(counts[Split::test] / 1e4 - 0.20) <= 0.02);
}

TEST_CASE("put then load is field-for-field identity") {
  const auto root = fixtures::temp_dir("store-rt");
  DatasetStore store(root);
  auto s = rich_sample();
  const auto id = store.put_sample(s, {"VIEWPORT", "FULLPAGE", "jpg"});
  CHECK(id == s.sample_id);
  s.viewport_image_ref = "viewport.jpg";
  s.fullpage_image_ref = "fullpage.jpg";
  const auto loaded = store.load_sample(id);
  CHECK(loaded == s);

  const auto dir = store.sample_dir(id);
  const auto rel = fs::relative(dir, root);
  auto part = rel.begin();
  CHECK(*part++ == to_string(assign_split("example.com", "uiharvest")));
  CHECK(*part++ == "example.com");
  ++part;  // url hash
  CHECK(*part++ == "phone");
  CHECK(*part == "20251009T085320123Z");
  for (auto f : {"meta.json", "axtree.json", "viewport.jpg", "fullpage.jpg"}) {
    CHECK(fs::exists(dir / f));
  }
  fs::remove_all(root);
}

TEST_CASE("duplicate put is an idempotent no-op") {
  const auto root = fixtures::temp_dir("store-dup");
  DatasetStore store(root);
  const auto s = rich_sample();
  const auto id1 = store.put_sample(s, {"A", "B", "jpg"});
  const auto id2 = store.put_sample(s, {"C", "D", "jpg"});
  CHECK(id1 == id2);
  std::ifstream in(store.sample_dir(id1) / "viewport.jpg");
  std::string bytes;
  in >> bytes;
  CHECK(bytes == "A");
  CHECK(store.list().size() == 1);
  fs::remove_all(root);
}

TEST_CASE("corrupt directories are detected") {
  const auto root = fixtures::temp_dir("store-corrupt");
  DatasetStore store(root);
  const auto id = store.put_sample(rich_sample(), {"A", "B", "jpg"});
  const auto dir = store.sample_dir(id);

  SUBCASE("axtree.json deleted") {
    fs::remove(dir / "axtree.json");
    CHECK(load_error(store, id) == ErrorKind::corrupt_sample);
    try {
      store.load_sample(id);
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("axtree.json") != std::string::npos);
    }
  }
  SUBCASE("image deleted") {
    fs::remove(dir / "fullpage.jpg");
    CHECK(load_error(store, id) == ErrorKind::corrupt_sample);
  }
  SUBCASE("parent cycle") {
    auto tree = nlohmann::json::parse(std::ifstream(dir / "axtree.json"));
    tree[1]["parent_id"] = 3;  // 2 -> 3 -> 2
    std::ofstream(dir / "axtree.json") << tree.dump();
    CHECK(load_error(store, id) == ErrorKind::validation);
  }
  SUBCASE("two roots") {
    auto tree = nlohmann::json::parse(std::ifstream(dir / "axtree.json"));
    tree[3]["parent_id"] = nullptr;
    std::ofstream(dir / "axtree.json") << tree.dump();
    CHECK(load_error(store, id) == ErrorKind::validation);
  }
  SUBCASE("tampered url breaks the id hash") {
    auto meta = nlohmann::json::parse(std::ifstream(dir / "meta.json"));
    meta["url"] = "https://shop.example.com/other";
    std::ofstream(dir / "meta.json") << meta.dump();
    CHECK(load_error(store, id) == ErrorKind::validation);
  }
  fs::remove_all(root);
}

TEST_CASE("put rejects invalid samples and leaves nothing behind") {
  const auto root = fixtures::temp_dir("store-invalid");
  DatasetStore store(root);
  auto s = rich_sample();
  s.axtree.clear();
  CHECK_THROWS_AS(store.put_sample(s, {"A", "B", "jpg"}), Error);
  CHECK(store.list().empty());

  // storage failure: the root is a regular file
  const auto file_root = root / "not-a-dir";
  std::ofstream(file_root) << "x";
  DatasetStore broken(file_root);
  try {
    broken.put_sample(rich_sample(), {"A", "B", "jpg"});
    FAIL("expected storage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::storage);
  }
  fs::remove_all(root);
}

TEST_CASE("interrupted writes leave only ignorable staging directories") {
  const auto root = fixtures::temp_dir("store-crash");
  DatasetStore store(root);
  const auto s = rich_sample();
  // What a crash between staging and rename leaves on disk.
  const auto staging = root / ".tmp" / (s.sample_id + "-crashed");
  fs::create_directories(staging);
  std::ofstream(staging / "viewport.jpg") << "partial";
  CHECK(store.list().empty());
  CHECK_THROWS_AS(store.load_sample(s.sample_id), Error);

  // A retry after restart commits normally.
  DatasetStore restarted(root);
  restarted.put_sample(s, {"A", "B", "jpg"});
  CHECK(restarted.load_sample(s.sample_id).url == s.url);
  restarted.clean_staging();
  CHECK_FALSE(fs::exists(root / ".tmp"));
  fs::remove_all(root);
}

TEST_CASE("make_subset samples the train split without replacement") {
  std::vector<std::string> train;
  for (int i = 0; i < 50; ++i) train.push_back("id" + std::to_string(i));
  SplitManifest m;
  Rng rng(3);
  CHECK(make_subset(m, "all", 50, train, rng).size() == 50);
  CHECK(std::set<std::string>(m.subsets["all"].begin(), m.subsets["all"].end()).size() == 50);
  CHECK(make_subset(m, "none", 0, train, rng).empty());
  CHECK_THROWS_AS(make_subset(m, "too-big", 51, train, rng), Error);

  Rng r1(8), r2(8);
  auto reversed = train;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(make_subset(m, "a", 7, train, r1) == make_subset(m, "b", 7, reversed, r2));

  const auto round = SplitManifest::from_json(m.to_json());
  CHECK(round.subsets == m.subsets);
}

TEST_CASE("timestamps round-trip") {
  const Timestamp t{std::chrono::milliseconds{1760000000123}};
  CHECK(format_timestamp(t) == "2025-10-09T08:53:20.123Z");
  CHECK(parse_timestamp(format_timestamp(t)) == t);
  CHECK_THROWS_AS(parse_timestamp("2025-13-01T00:00:00.000Z"), Error);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
}
