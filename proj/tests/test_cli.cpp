#include <fstream>
#include <set>

#include "doctest.h"
#include "support/cli_corpus.hpp"
#include "support/images.hpp"
#include "uiharvest/pairgen.hpp"
#include "uiharvest/store.hpp"

using namespace uiharvest;
using nlohmann::json;
namespace fs = std::filesystem;
using fixtures::run_cli;

TEST_CASE("exit codes") {
  const auto dir = fixtures::temp_dir("cli");
  DatasetStore store(dir / "data");
  fixtures::build_ten_screen_store(store);
  const std::string root = (dir / "data").string();

  auto stats = run_cli({"stats", "--dataset", root, "--json"});
  CHECK(stats.code == 0);
  const json s = json::parse(stats.out);
  CHECK(s["samples"] == 10);
  CHECK(s["domains"] == 10);
  CHECK(s["devices"]["phone-390x844"] == 10);
  CHECK(s["splits"]["train"].get<int>() + s["splits"]["val"].get<int>() +
            s["splits"]["test"].get<int>() ==
        10);

  auto big = run_cli({"resample", "--dataset", root, "--n", "999999"});
  CHECK(big.code == 1);
  CHECK(big.err.find("size") != std::string::npos);

  auto bogus = run_cli({"bogus"});
  CHECK(bogus.code == 2);
  CHECK(bogus.err.find("resample") != std::string::npos);  // help text
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"resample", "--dataset", root}).code == 2);         // --n missing
  CHECK(run_cli({"stats", "--dataset", root, "--nope"}).code == 2);
  CHECK(run_cli({"stats"}).code == 2);                               // no dataset at all
  CHECK(run_cli({"stats", "--dataset", (dir / "absent").string()}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("read-path subcommands") {
  const auto dir = fixtures::temp_dir("cli-read");
  DatasetStore store(dir / "data");
  fixtures::build_ten_screen_store(store);
  const std::string root = (dir / "data").string();

  SUBCASE("resample writes a subset and a ratio report") {
    const auto out = (dir / "subset.json").string();
    const auto report = (dir / "ratios.json").string();
    auto r = run_cli({"resample", "--dataset", root, "--split", "all", "--n", "4", "--seed", "3",
                      "--out", out, "--report", report, "--json"});
    REQUIRE(r.code == 0);
    const json subset = json::parse(read_file(out));
    CHECK(subset["sample_ids"].size() == 4);
    const std::set<std::string> distinct(subset["sample_ids"].begin(), subset["sample_ids"].end());
    CHECK(distinct.size() == 4);
    CHECK(json::parse(read_file(report))["classes"].is_array());
    CHECK(read_file(dir / "ratios.csv").rfind("class,", 0) == 0);
    // same seed, same subset
    const auto again = run_cli({"resample", "--dataset", root, "--split", "all", "--n", "4",
                                "--seed", "3", "--json"});
    CHECK(json::parse(again.out)["sample_ids"] == subset["sample_ids"]);
    CHECK(run_cli({"resample", "--dataset", root, "--split", "nope", "--n", "1"}).code == 2);
  }
  SUBCASE("subset records a named train subset") {
    const auto out = (dir / "manifest.json").string();
    const json st = json::parse(run_cli({"stats", "--dataset", root, "--json"}).out);
    const int train = st["splits"]["train"];
    auto r = run_cli({"subset", "--dataset", root, "--name", "web-small", "--n",
                      std::to_string(train), "--out", out});
    REQUIRE(r.code == 0);
    const json m = json::parse(read_file(out));
    CHECK(m["subsets"]["web-small"].size() == std::size_t(train));
    CHECK(run_cli({"subset", "--dataset", root, "--n", std::to_string(train + 1)}).code == 1);
  }
  SUBCASE("analyze") {
    const auto report = (dir / "report.json").string();
    const auto csv = (dir / "screens.csv").string();
    auto r = run_cli({"analyze", "--dataset", root, "--report", report, "--csv", csv,
                      "--jobs", "3", "--json"});
    REQUIRE(r.code == 0);
    const json doc = json::parse(read_file(report));
    CHECK(doc["composition"]["screens"] == 10);
    CHECK(doc["composition"]["top_classes"].size() <= 10);
    CHECK(doc["quality"].contains("screens"));
    CHECK(fs::exists(csv));
  }
  SUBCASE("config file supplies the dataset") {
    std::ofstream(dir / "cfg.toml") << "[dataset]\nroot = \"data\"\n";
    auto r = run_cli({"stats", "--config", (dir / "cfg.toml").string(), "--json"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["samples"] == 10);
    std::ofstream(dir / "bad.toml") << "[dataset]\nrooot = \"data\"\n";
    CHECK(run_cli({"stats", "--config", (dir / "bad.toml").string()}).code == 1);
  }
  SUBCASE("read paths leave the dataset untouched") {
    auto listing = [&] {
      std::vector<std::string> files;
      for (const auto& e : fs::recursive_directory_iterator(dir / "data")) {
        files.push_back(e.path().string() + ":" +
                        (e.is_regular_file() ? std::to_string(fs::file_size(e.path())) : "d"));
      }
      std::sort(files.begin(), files.end());
      return files;
    };
    const auto before = listing();
    run_cli({"stats", "--dataset", root});
    run_cli({"analyze", "--dataset", root});
    run_cli({"resample", "--dataset", root, "--split", "all", "--n", "2"});
    CHECK(listing() == before);
  }
  fs::remove_all(dir);
}

TEST_CASE("pairs subcommand") {
  const auto dir = fixtures::temp_dir("cli-pairs");
  DatasetStore store(dir / "data");
  fixtures::build_pair_corpus(store, 12);
  const std::string root = (dir / "data").string();
  for (const char* split : {"train", "test"}) {
    CAPTURE(split);
    const auto out = (dir / (std::string(split) + ".jsonl")).string();
    auto r = run_cli({"pairs", "--dataset", root, "--split", split, "--count", "200", "--seed",
                      "5", "--out", out, "--json"});
    REQUIRE(r.code == 0);
    std::ifstream in(out);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line); ++n) {
      const json p = json::parse(line);
      CHECK(p["a_ref"].is_string());
      ImageRef::parse(p["a_ref"].get<std::string>());
      if (std::string(split) == "test" && p["label"] == "same") CHECK(p["phash_distance"] > 4);
    }
    CHECK(n == json::parse(r.out)["generated"]);
  }
  CHECK(run_cli({"pairs", "--dataset", root, "--split", "dev", "--count", "1"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("seed and serve") {
  const auto dir = fixtures::temp_dir("cli-serve");
  std::ofstream(dir / "seeds.txt") << "# seeds\nhttps://a.example.com/\n\nhttps://b.example.org/x\n"
                                      "ftp://nope.example.com/\n";
  const auto snap = (dir / "snap.json").string();
  auto seeded = run_cli({"seed", "--seeds", (dir / "seeds.txt").string(), "--snapshot", snap,
                         "--json"});
  REQUIRE(seeded.code == 0);
  const json s = json::parse(seeded.out);
  CHECK(s["accepted"] == 2);
  CHECK(s["rejected"] == 1);

  auto served = run_cli({"serve", "--snapshot", snap, "--restore", "--port", "0", "--for-secs",
                         "0.3", "--json"});
  REQUIRE(served.code == 0);
  const json st = json::parse(served.out);
  CHECK(st["queued"] == 2);
  CHECK(served.err.find("serving on") != std::string::npos);
  CHECK(run_cli({"serve", "--restore", "--port", "0", "--for-secs", "0.1"}).code == 2);
  fs::remove_all(dir);
}
