#include "uiharvest/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "uiharvest/analysis.hpp"
#include "uiharvest/cdp.hpp"
#include "uiharvest/config.hpp"
#include "uiharvest/coordinator.hpp"
#include "uiharvest/errors.hpp"
#include "uiharvest/pairgen.hpp"
#include "uiharvest/public_suffix.hpp"
#include "uiharvest/resampler.hpp"
#include "uiharvest/store.hpp"
#include "uiharvest/url.hpp"
#include "uiharvest/worker.hpp"

namespace uiharvest {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct Globals {
  std::string config;
  bool json_output = false;
  unsigned jobs = 1;
};

void emit(std::ostream& out, const json& doc, bool as_json) {
  if (as_json) {
    out << doc.dump(2) << "\n";
    return;
  }
  for (const auto& [k, v] : doc.items()) {
    out << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  }
}

fs::path dataset_root(const std::string& flag, const ToolConfig& cfg) {
  if (!flag.empty()) {
    if (!fs::is_directory(flag)) throw Error(ErrorKind::config, "dataset root not found: " + flag);
    return flag;
  }
  if (cfg.dataset_root) return *cfg.dataset_root;
  throw UsageError("--dataset is required (or set dataset.root in the config)");
}

std::optional<PublicSuffixList> load_psl(const ToolConfig& cfg) {
  if (!cfg.public_suffix_list) return std::nullopt;
  return PublicSuffixList::load_file(cfg.public_suffix_list->string());
}

std::vector<PageSample> load_corpus(const DatasetStore& store, std::optional<Split> split) {
  std::vector<PageSample> out;
  for (const auto& loc : store.list()) {
    if (!split || loc.split == *split) out.push_back(store.load_sample(loc.sample_id));
  }
  return out;
}

std::optional<Split> split_option(const std::string& text) {
  if (text == "all") return std::nullopt;
  if (auto s = parse_split(text)) return s;
  throw UsageError("unknown split '" + text + "'");
}

std::vector<std::string> read_seed_file(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> urls;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    urls.push_back(line.substr(first, last - first + 1));
  }
  return urls;
}

void write_text(const fs::path& path, std::string_view text) {
  try {
    write_file_atomic(path, text);
  } catch (const Error& e) {
    throw Error(ErrorKind::storage, "cannot write " + path.string() + ": " + e.what());
  }
}

int port_of(const std::string& address, int fallback) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return fallback;
  try {
    return std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    return fallback;
  }
}

// ---- subcommands ----

json cmd_seed(const ToolConfig& cfg, const std::string& seeds_flag, const std::string& snap_flag,
              std::uint64_t seed) {
  const fs::path seeds = !seeds_flag.empty() ? fs::path(seeds_flag)
                         : cfg.seed_file     ? *cfg.seed_file
                                             : throw UsageError("--seeds is required");
  const fs::path snap = !snap_flag.empty()   ? fs::path(snap_flag)
                        : cfg.snapshot_path ? *cfg.snapshot_path
                                            : throw UsageError("--snapshot is required");
  const auto psl = load_psl(cfg);
  auto ccfg = cfg.coordinator;
  ccfg.snapshot_path.reset();
  Coordinator coordinator(ccfg, Rng(seed), psl ? &*psl : nullptr);
  const auto urls = read_seed_file(seeds);
  const std::size_t accepted = coordinator.seed(urls);
  coordinator.snapshot(snap);
  return {{"seeds", urls.size()},
          {"accepted", accepted},
          {"rejected", urls.size() - accepted},
          {"snapshot", snap.string()}};
}

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = -1;
  std::string seeds;
  std::string snapshot;
  bool restore = false;
  std::uint64_t seed = 0;
  double for_secs = 0;
};

json cmd_serve(const ToolConfig& cfg, const ServeOptions& opt, std::ostream& err) {
  auto ccfg = cfg.coordinator;
  if (!opt.snapshot.empty()) ccfg.snapshot_path = fs::path(opt.snapshot);
  const auto psl = load_psl(cfg);
  const PublicSuffixList* psl_ptr = psl ? &*psl : nullptr;

  std::unique_ptr<Coordinator> coordinator;
  if (opt.restore) {
    if (!ccfg.snapshot_path) throw UsageError("--restore needs a snapshot path");
    coordinator = Coordinator::restore(*ccfg.snapshot_path, ccfg, psl_ptr);
  } else {
    coordinator = std::make_unique<Coordinator>(ccfg, Rng(opt.seed), psl_ptr);
  }
  std::size_t seeded = 0;
  const fs::path seeds = !opt.seeds.empty() ? fs::path(opt.seeds)
                         : (!opt.restore && cfg.seed_file) ? *cfg.seed_file
                                                           : fs::path();
  if (!seeds.empty()) seeded = coordinator->seed(read_seed_file(seeds));

  CoordinatorServer server(*coordinator);
  const int port = server.start(opt.host, opt.port >= 0 ? opt.port
                                                        : port_of(cfg.coordinator_address, 8700));
  err << "serving on " << opt.host << ":" << port << "\n" << std::flush;

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto started = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (opt.for_secs > 0 &&
        std::chrono::steady_clock::now() - started >= std::chrono::duration<double>(opt.for_secs)) {
      break;
    }
  }
  server.stop();
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  if (ccfg.snapshot_path) coordinator->snapshot(*ccfg.snapshot_path);

  json out = coordinator->stats().to_json();
  out["port"] = port;
  out["seeded"] = seeded;
  return out;
}

struct WorkOptions {
  std::string coordinator;
  std::string browser_endpoint;
  std::string profiles;
  std::string probes;
  std::string dataset;
  double budget_secs = 0;
  std::size_t max_leases = 0;
  std::string worker_id = "worker";
  bool wait = false;
};

json cmd_work(const ToolConfig& cfg, const WorkOptions& opt) {
  const fs::path root = dataset_root(opt.dataset, cfg);
  std::vector<DeviceProfile> profiles = !opt.profiles.empty() ? load_profiles(opt.profiles)
                                        : cfg.profiles        ? load_profiles(*cfg.profiles)
                                                              : default_profiles();
  ProbeScripts scripts;
  if (!opt.probes.empty()) {
    scripts = ProbeScripts::load(opt.probes);
  } else if (cfg.probes_dir) {
    scripts = ProbeScripts::load(*cfg.probes_dir);
  }
  CaptureBudget budget = cfg.budget;
  if (opt.budget_secs > 0) budget.total_secs = opt.budget_secs;

  CdpBrowser browser(!opt.browser_endpoint.empty() ? opt.browser_endpoint : cfg.browser_endpoint);
  CaptureContext ctx{browser, budget, scripts, system_steady_clock(), system_wall_clock()};
  DatasetStore store(root, cfg.dataset_salt);
  CoordinatorClient channel(!opt.coordinator.empty() ? opt.coordinator : cfg.coordinator_address);
  WorkerLoopOptions loop;
  loop.worker_id = opt.worker_id;
  loop.max_leases = opt.max_leases;
  loop.exit_when_idle = !opt.wait;
  const std::size_t done = run_worker(channel, ctx, profiles, store, loop);
  return {{"completed_leases", done}, {"dataset", root.string()}};
}

json cmd_analyze(const ToolConfig& cfg, const std::string& dataset, const std::string& report,
                 const std::string& csv, unsigned jobs) {
  const DatasetStore store(dataset_root(dataset, cfg), cfg.dataset_salt);
  const auto corpus = load_corpus(store, std::nullopt);
  const auto composition = composition_stats(corpus);
  const auto quality = quality_report(corpus, jobs);

  json top = json::array();
  for (const auto& [cls, count] : composition.top(10)) top.push_back({{"class", cls}, {"count", count}});
  json doc{{"quality", quality.to_json()},
           {"composition",
            {{"screens", composition.screens},
             {"class_counts", composition.class_counts},
             {"top_classes", top},
             {"mean_elements", composition.mean_elements},
             {"mean_visible", composition.mean_visible},
             {"mean_clickable", composition.mean_clickable}}}};
  if (!csv.empty()) write_text(csv, quality.to_csv());
  if (report.empty()) return doc;
  write_text(report, doc.dump(2) + "\n");
  return {{"screens", composition.screens},
          {"fraction_screens_with_overlap", quality.fraction_screens_with_overlap},
          {"report", report}};
}

struct ResampleOptions {
  std::string dataset;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string split = "train";
  bool no_filter = false;
  std::string report;
};

json cmd_resample(const ToolConfig& cfg, const ResampleOptions& opt) {
  const DatasetStore store(dataset_root(opt.dataset, cfg), cfg.dataset_salt);
  const auto corpus = load_corpus(store, split_option(opt.split));
  const auto& vocab = default_vocabulary();

  std::vector<bool> excluded(corpus.size(), false);
  std::size_t eligible = corpus.size();
  if (!opt.no_filter) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      excluded[i] = has_visual_defect(corpus[i], vocab);
      eligible -= excluded[i];
    }
  }
  if (opt.n > eligible) {
    throw Error(ErrorKind::size, "requested " + std::to_string(opt.n) + " samples but only " +
                                     std::to_string(eligible) + " are eligible");
  }
  const auto table = build_frequency_table(corpus, vocab);
  Rng rng(opt.seed);
  const auto ids = resample_split(opt.n, table, rng, [&](std::size_t row) { return excluded[row]; });

  json doc{{"name", "resampled"}, {"split", opt.split}, {"n", opt.n},
           {"seed", opt.seed},    {"sample_ids", ids}};
  if (!opt.out.empty()) write_text(opt.out, doc.dump(2) + "\n");

  json summary{{"selected", ids.size()}, {"eligible", eligible}};
  if (!opt.out.empty()) summary["out"] = opt.out;
  if (!opt.report.empty()) {
    // Baseline: a uniform draw of the same size from the same eligible pool.
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!excluded[i]) pool.push_back(corpus[i].sample_id);
    }
    SplitManifest scratch;
    Rng base_rng(opt.seed);
    const auto uniform = make_subset(scratch, "uniform", opt.n, pool, base_rng);
    auto rows_of = [&](const std::vector<std::string>& chosen) {
      const std::set<std::string> want(chosen.begin(), chosen.end());
      Eigen::MatrixXd m(static_cast<Eigen::Index>(chosen.size()), table.counts.cols());
      Eigen::Index r = 0;
      for (std::size_t i = 0; i < table.sample_ids.size(); ++i) {
        if (want.contains(table.sample_ids[i])) m.row(r++) = table.counts.row(Eigen::Index(i));
      }
      return m;
    };
    const auto ratios = change_ratio_report(rows_of(uniform), rows_of(ids), table.classes);
    fs::path csv_path = opt.report;
    csv_path.replace_extension(".csv");
    write_text(opt.report, change_ratio_json(ratios).dump(2) + "\n");
    write_text(csv_path, change_ratio_csv(ratios));
    summary["report"] = opt.report;
    summary["report_csv"] = csv_path.string();
  }
  return opt.out.empty() && opt.report.empty() ? doc : summary;
}

json cmd_subset(const ToolConfig& cfg, const std::string& dataset, const std::string& name,
                std::size_t n, std::uint64_t seed, const std::string& manifest_in,
                const std::string& out) {
  const fs::path root = dataset_root(dataset, cfg);
  const DatasetStore store(root, cfg.dataset_salt);
  SplitManifest manifest;
  if (!manifest_in.empty()) {
    try {
      manifest = SplitManifest::from_json(json::parse(read_file(manifest_in)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, "manifest " + manifest_in + ": " + e.what());
    }
  } else {
    manifest.dataset_root = root.string();
    manifest.salt = cfg.dataset_salt;
  }
  std::vector<std::string> train;
  for (const auto& loc : store.list()) {
    if (loc.split == Split::train) train.push_back(loc.sample_id);
  }
  Rng rng(seed);
  const auto ids = make_subset(manifest, name, n, train, rng);
  if (out.empty()) return manifest.to_json();
  write_text(out, manifest.to_json().dump(2) + "\n");
  return {{"name", name}, {"size", ids.size()}, {"train", train.size()}, {"out", out}};
}

struct PairsOptions {
  std::string dataset;
  std::string split = "test";
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string out;
  int stride = 0;
  int dup_threshold = 4;
};

json cmd_pairs(const ToolConfig& cfg, const PairsOptions& opt) {
  const auto split = parse_split(opt.split);
  if (!split) throw UsageError("unknown split '" + opt.split + "'");
  const DatasetStore store(dataset_root(opt.dataset, cfg), cfg.dataset_salt);
  const auto corpus = load_corpus(store, split);
  PairConfig pc;
  pc.filter_duplicates = *split == Split::test;
  pc.dup_threshold = opt.dup_threshold;
  if (opt.stride > 0) pc.stride = opt.stride;
  StoreImageHasher hasher(store, corpus);
  Rng rng(opt.seed);
  const auto result = generate_pairs(corpus, opt.count, rng, pc, std::ref(hasher));

  std::string lines;
  std::size_t same = 0;
  for (const auto& p : result.pairs) {
    lines += to_json(p).dump() + "\n";
    same += p.label == PairLabel::same;
  }
  if (!opt.out.empty()) write_text(opt.out, lines);
  json summary{{"requested", opt.count},
               {"generated", result.pairs.size()},
               {"same", same},
               {"different", result.pairs.size() - same},
               {"filtered", pc.filter_duplicates},
               {"warnings", result.warnings}};
  if (!opt.out.empty()) summary["out"] = opt.out;
  return summary;
}

json cmd_stats(const ToolConfig& cfg, const std::string& dataset, const std::string& coordinator) {
  if (!coordinator.empty()) return CoordinatorClient(coordinator).stats();
  const fs::path root = dataset_root(dataset, cfg);
  const DatasetStore store(root, cfg.dataset_salt);
  std::map<std::string, std::size_t> splits{{"train", 0}, {"val", 0}, {"test", 0}};
  std::map<std::string, std::size_t> devices;
  std::set<std::string> domains;
  const auto locations = store.list();
  for (const auto& loc : locations) {
    ++splits[to_string(loc.split)];
    // <split>/<domain>/<url_hash>/<device>/<ts>
    ++devices[loc.dir.parent_path().filename().string()];
    domains.insert(loc.dir.parent_path().parent_path().parent_path().filename().string());
  }
  return {{"dataset", root.string()},
          {"samples", locations.size()},
          {"splits", splits},
          {"domains", domains.size()},
          {"devices", devices}};
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Web UI dataset toolkit", "uiharvest"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "TOML config (default: $UIHARVEST_CONFIG)");
  app.add_flag("--json", g.json_output, "Print machine-readable JSON");

  std::function<json(const ToolConfig&)> run;

  auto* seed = app.add_subcommand("seed", "Write an initial coordinator snapshot from a seed list");
  std::string seeds_file, snap_file;
  std::uint64_t rng_seed = 0;
  seed->add_option("--seeds", seeds_file, "File with one URL per line");
  seed->add_option("--snapshot", snap_file, "Snapshot to write");
  seed->add_option("--seed", rng_seed, "RNG seed");
  seed->callback([&] {
    run = [&](const ToolConfig& c) { return cmd_seed(c, seeds_file, snap_file, rng_seed); };
  });

  auto* serve = app.add_subcommand("serve", "Run the coordinator");
  ServeOptions so;
  serve->add_option("--host", so.host, "Bind address");
  serve->add_option("--port", so.port, "Port (0 picks a free one)");
  serve->add_option("--seeds", so.seeds, "Seed URL file");
  serve->add_option("--snapshot", so.snapshot, "Snapshot path");
  serve->add_flag("--restore", so.restore, "Resume from the snapshot");
  serve->add_option("--seed", so.seed, "RNG seed");
  serve->add_option("--for-secs", so.for_secs, "Stop after this many seconds");
  serve->callback([&] { run = [&](const ToolConfig& c) { return cmd_serve(c, so, err); }; });

  auto* work = app.add_subcommand("work", "Run one crawl worker");
  WorkOptions wo;
  work->add_option("--coordinator", wo.coordinator, "Coordinator URL");
  work->add_option("--browser-endpoint", wo.browser_endpoint, "Browser remote-debugging URL");
  work->add_option("--profiles", wo.profiles, "Device profile JSON");
  work->add_option("--probes", wo.probes, "Directory with probe scripts");
  work->add_option("--budget-secs", wo.budget_secs, "Per-page time budget");
  work->add_option("--dataset", wo.dataset, "Dataset root");
  work->add_option("--max-leases", wo.max_leases, "Stop after this many leases");
  work->add_option("--worker-id", wo.worker_id, "Worker name");
  work->add_flag("--wait", wo.wait, "Keep polling when the queue is empty");
  work->callback([&] { run = [&](const ToolConfig& c) { return cmd_work(c, wo); }; });

  auto* analyze = app.add_subcommand("analyze", "Quality and composition report");
  std::string an_dataset, an_report, an_csv;
  analyze->add_option("--dataset", an_dataset, "Dataset root");
  analyze->add_option("--report", an_report, "Report JSON to write");
  analyze->add_option("--csv", an_csv, "Per-screen CSV to write");
  analyze->add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  analyze->callback([&] {
    run = [&](const ToolConfig& c) { return cmd_analyze(c, an_dataset, an_report, an_csv, g.jobs); };
  });

  auto* resample = app.add_subcommand("resample", "Frequency-based resampled subset");
  ResampleOptions ro;
  resample->add_option("--dataset", ro.dataset, "Dataset root");
  resample->add_option("--n", ro.n, "Subset size")->required();
  resample->add_option("--seed", ro.seed, "RNG seed");
  resample->add_option("--out", ro.out, "Subset JSON to write");
  resample->add_option("--split", ro.split, "train, val, test or all");
  resample->add_flag("--no-filter", ro.no_filter, "Keep screens with visual defects");
  resample->add_option("--report", ro.report, "Change-ratio JSON (CSV written alongside)");
  resample->callback([&] { run = [&](const ToolConfig& c) { return cmd_resample(c, ro); }; });

  auto* subset = app.add_subcommand("subset", "Uniform named subset of the train split");
  std::string su_dataset, su_name = "subset", su_manifest, su_out;
  std::size_t su_n = 0;
  std::uint64_t su_seed = 0;
  subset->add_option("--dataset", su_dataset, "Dataset root");
  subset->add_option("--name", su_name, "Subset name");
  subset->add_option("--n", su_n, "Subset size")->required();
  subset->add_option("--seed", su_seed, "RNG seed");
  subset->add_option("--manifest", su_manifest, "Existing manifest to extend");
  subset->add_option("--out", su_out, "Manifest JSON to write");
  subset->callback([&] {
    run = [&](const ToolConfig& c) {
      return cmd_subset(c, su_dataset, su_name, su_n, su_seed, su_manifest, su_out);
    };
  });

  auto* pairs = app.add_subcommand("pairs", "Same/different screen pairs as JSONL");
  PairsOptions po;
  pairs->add_option("--dataset", po.dataset, "Dataset root");
  pairs->add_option("--split", po.split, "train, val or test");
  pairs->add_option("--count", po.count, "Pairs to draw")->required();
  pairs->add_option("--seed", po.seed, "RNG seed");
  pairs->add_option("--out", po.out, "JSONL output");
  pairs->add_option("--stride", po.stride, "Scroll stride in CSS px (default: half viewport)");
  pairs->add_option("--dup-threshold", po.dup_threshold, "Near-duplicate Hamming threshold");
  pairs->callback([&] { run = [&](const ToolConfig& c) { return cmd_pairs(c, po); }; });

  auto* stats = app.add_subcommand("stats", "Dataset or coordinator counters");
  std::string st_dataset, st_coordinator;
  stats->add_option("--dataset", st_dataset, "Dataset root");
  stats->add_option("--coordinator", st_coordinator, "Coordinator URL");
  stats->callback([&] {
    run = [&](const ToolConfig& c) { return cmd_stats(c, st_dataset, st_coordinator); };
  });

  std::vector<std::string> argv_store{"uiharvest"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
      !app.get_subcommand_no_throw(args[0])) {
    err << "usage error: unknown subcommand '" << args[0] << "'\n\n" << app.help();
    return 2;
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const ToolConfig cfg = load_tool_config(g.config.empty() ? std::nullopt
                                                             : std::optional<std::string>(g.config));
    emit(out, run(cfg), g.json_output);
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    if (g.json_output) {
      out << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump(2) << "\n";
    }
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uiharvest
