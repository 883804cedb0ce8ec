#pragma once

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fullbrain/bench.hpp"
#include "fullbrain/distance_index.hpp"
#include "fullbrain/engine.hpp"
#include "fullbrain/error.hpp"
#include "fullbrain/graph.hpp"
#include "fullbrain/leaderboard.hpp"
#include "fullbrain/service.hpp"
#include "fullbrain/suggest.hpp"

namespace fullbrain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

struct Paths {
  std::filesystem::path data;
  std::filesystem::path ledger;
  std::filesystem::path qlog;
  std::filesystem::path index;
};

inline Paths resolve_paths(const ServiceConfig& cfg) {
  Paths p;
  p.data = cfg.data.empty() ? std::filesystem::path("fullbrain-data/graph.jsonl") : cfg.data;
  const auto dir = p.data.parent_path();
  p.ledger = cfg.ledger.value_or(dir / "ledger.jsonl");
  p.qlog = cfg.qlog.value_or(dir / "qlog.jsonl");
  p.index = cfg.index.value_or(dir / "index.fbdi");
  return p;
}

inline std::shared_ptr<const GraphSnapshot> load_graph(const Paths& p) {
  Graph g;
  if (!std::filesystem::exists(p.data)) {
    throw Error(ErrorCode::DataLoadError, "no dataset at " + p.data.string() + " (run `ingest` first)");
  }
  g.ingest(p.data);
  if (g.entity_count() == 0) throw Error(ErrorCode::EmptyGraph, "dataset " + p.data.string() + " is empty");
  return g.snapshot();
}

inline std::optional<DistanceIndex> load_index(const Paths& p, const std::shared_ptr<const GraphSnapshot>& g) {
  if (!std::filesystem::exists(p.index)) return std::nullopt;
  std::ifstream in(p.index, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return DistanceIndex::deserialize(g, buf.str());
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline SearchEngine load_engine(const Paths& p, std::size_t landmarks) {
  auto g = load_graph(p);
  auto distances = load_index(p, g);
  if (!distances) distances = landmarks == 0 ? DistanceIndex::build(g) : DistanceIndex::build(g, landmarks);
  return SearchEngine(std::move(*distances), TextIndex::build(g));
}

inline std::function<bool(std::string_view)> user_check(std::shared_ptr<const GraphSnapshot> g) {
  return [g](std::string_view id) {
    auto n = g->find(id);
    return n && g->entity(*n).kind == EntityKind::User;
  };
}

inline nlohmann::ordered_json report_json(const CompressionReport& r) {
  return {{"stored_pairs", r.stored_pairs}, {"total_pairs", r.total_pairs}, {"saving_ratio", r.saving_ratio}};
}

inline void print_results(std::ostream& out, const std::vector<ScoredResult>& results, const GraphSnapshot& g) {
  char line[512];
  std::snprintf(line, sizeof line, "%-4s %-10s %-12s %-8s %-8s %-8s %s\n", "#", "kind", "id", "S", "S_T", "S_U",
                "name");
  out << line;
  std::size_t rank = 0;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-4zu %-10s %-12s %-8.4f %-8.4f %-8.4f %s\n", ++rank,
                  std::string(to_string(r.kind)).c_str(), r.id.c_str(), r.overall, r.topical, r.social,
                  g.entity(g.index_of(r.id)).name.c_str());
    out << line;
  }
}

inline void print_view(std::ostream& out, const LeaderboardView& v) {
  out << "leaderboard " << (v.context ? *v.context : "all") << " | " << to_string(v.window) << " | "
      << to_string(v.kind) << " | " << to_string(v.design) << "\n";
  char line[256];
  for (const auto& r : v.rows) {
    std::snprintf(line, sizeof line, "%s%4zu  %-16s %8.1f\n", r.active ? "> " : "  ", r.rank, r.user.c_str(),
                  r.score.value());
    out << line;
  }
}

inline std::vector<std::size_t> parse_levels(const std::string& csv) {
  std::vector<std::size_t> levels;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long long v = std::stoll(item);
      if (v <= 0) throw std::invalid_argument(item);
      levels.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--levels", "expected positive integers, got '" + item + "'");
    }
  }
  if (levels.empty()) throw CLI::ValidationError("--levels", "at least one level required");
  return levels;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::Paths;
  CLI::App app{"FullBrain social search, suggestion and leaderboard toolkit", "fullbrain"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool json = false;
  std::string data, ledger, qlog, index;
  std::size_t landmarks = 0;
  app.add_option("--config", config_path, "key = value config file");
  app.add_flag("--json", json, "structured JSON output");
  app.add_option("--data", data, "ingest-format dataset path");
  app.add_option("--ledger", ledger, "activity ledger path");
  app.add_option("--qlog", qlog, "query log path");
  app.add_option("--index", index, "distance index path");
  app.add_option("--landmarks", landmarks, "landmark count (0 = default)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate and append a JSON-lines file to the dataset");
  std::string ingest_file;
  ingest->add_option("file", ingest_file, "file to ingest")->required();

  // index
  auto* index_cmd = app.add_subcommand("index", "landmark distance index");
  index_cmd->require_subcommand(1);
  auto* index_build = index_cmd->add_subcommand("build", "build and persist the distance index");
  std::size_t build_k = 0;
  index_build->add_option("--landmarks", build_k, "landmark count (default max(16, ceil(sqrt(|V|))))");
  auto* index_report = index_cmd->add_subcommand("report", "print the storage compression report as JSON");

  // search / qac / qs
  std::string user, query, kinds;
  std::size_t limit = 0;
  bool no_log = false;
  auto* search = app.add_subcommand("search", "ranked search");
  search->add_option("--user", user, "searcher id")->required();
  search->add_option("--q", query, "query text")->required();
  search->add_option("--limit", limit, "max results (default 25)");
  search->add_option("--kinds", kinds, "comma-separated kinds to include");
  search->add_flag("--no-log", no_log, "do not record the query in the query log");

  auto* qac = app.add_subcommand("qac", "query autocomplete");
  qac->add_option("--user", user, "searcher id")->required();
  qac->add_option("--q", query, "typed prefix")->required();
  qac->add_option("--limit", limit, "max results (default 10)");

  Timestamp now = 0;
  auto* qs = app.add_subcommand("qs", "query suggestions before typing");
  qs->add_option("--user", user, "user id")->required();
  qs->add_option("--now", now, "reference time (epoch seconds, default: wall clock)");

  // activity
  auto* activity = app.add_subcommand("activity", "leaderboard activity ledger");
  activity->require_subcommand(1);
  auto* act_record = activity->add_subcommand("record", "record a point-bearing action");
  std::string actor, action, location, object;
  Timestamp ts = 0;
  ActivityId target = 0, activity_id = 0;
  act_record->add_option("--actor", actor)->required();
  act_record->add_option("--action", action, "e.g. source_add, post_like, include")->required();
  act_record->add_option("--location", location)->required();
  act_record->add_option("--object", object)->required();
  act_record->add_option("--ts", ts, "epoch seconds (default: wall clock)");
  act_record->add_option("--target", target, "comment activity id (upvotes only)");
  auto* act_delete = activity->add_subcommand("delete", "reverse one of the actor's own activities");
  act_delete->add_option("--actor", actor)->required();
  act_delete->add_option("--id", activity_id, "activity id")->required();
  act_delete->add_option("--ts", ts, "epoch seconds (default: wall clock)");

  // leaderboard
  auto* leaderboard = app.add_subcommand("leaderboard", "leaderboard views");
  leaderboard->require_subcommand(1);
  auto* lb_show = leaderboard->add_subcommand("show", "print a leaderboard view");
  std::string context = "all", window = "week", kind = "contributor", design;
  lb_show->add_option("--context", context, "concept/course/user id or 'all'");
  lb_show->add_option("--window", window, "week | month | semester | all")
      ->check(CLI::IsMember({"week", "month", "semester", "all"}));
  lb_show->add_option("--kind", kind, "contributor | responder")->check(CLI::IsMember({"contributor", "responder"}));
  lb_show->add_option("--design", design, "absolute | hybrid50 (default by context kind)")
      ->check(CLI::IsMember({"absolute", "hybrid50"}));
  lb_show->add_option("--user", user, "active user")->required();
  lb_show->add_option("--now", now, "reference time (epoch seconds, default: wall clock)");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string host;
  int port = -1;
  std::size_t threads = 0;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--threads", threads);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "dataset generation and load testing");
  bench_cmd->require_subcommand(1);
  auto* bench_gen = bench_cmd->add_subcommand("gen", "generate a synthetic dataset");
  std::uint64_t seed = 1;
  std::size_t entities = 5724, relationships = 21512;
  std::string out_path;
  bench_gen->add_option("--seed", seed);
  bench_gen->add_option("--entities", entities);
  bench_gen->add_option("--relationships", relationships);
  bench_gen->add_option("--out", out_path)->required();

  auto* bench_run = bench_cmd->add_subcommand("run", "stress an endpoint at increasing concurrency");
  std::string endpoint = "qs", levels_csv = "1,2,4,8,16,32,64", target_url = "http://127.0.0.1:8080", json_out;
  std::size_t total = 1000;
  bench_run->add_option("--endpoint", endpoint, "qs | qac | search")->check(CLI::IsMember({"qs", "qac", "search"}));
  bench_run->add_option("--total", total);
  bench_run->add_option("--levels", levels_csv);
  bench_run->add_option("--target", target_url);
  bench_run->add_option("--out", out_path, "CSV report path");
  bench_run->add_option("--json-out", json_out, "JSON report path");
  bench_run->add_option("--seed", seed, "query corpus seed");

  // debug
  auto* debug = app.add_subcommand("debug", "inspection helpers");
  debug->require_subcommand(1);
  auto* debug_sim = debug->add_subcommand("sim", "score breakdown for one entity");
  std::string entity;
  debug_sim->add_option("--user", user)->required();
  debug_sim->add_option("--q", query)->required();
  debug_sim->add_option("--entity", entity)->required();

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand-level help is reported as CallForHelp on the subcommand.
    if (e.get_exit_code() == 0) {
      out << e.what();
      return kExitOk;
    }
    err << nlohmann::ordered_json{{"error", "UsageError"}, {"message", e.what()}}.dump() << "\n";
    err << app.help();
    return kExitUsage;
  }

  try {
    ServiceConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    apply_env_overrides(cfg);
    if (!data.empty()) cfg.data = data;
    if (!ledger.empty()) cfg.ledger = ledger;
    if (!qlog.empty()) cfg.qlog = qlog;
    if (!index.empty()) cfg.index = index;
    if (landmarks != 0) cfg.landmarks = landmarks;
    const Paths paths = detail::resolve_paths(cfg);
    auto emit = [&](const nlohmann::ordered_json& j) { out << j.dump(2) << "\n"; };

    if (ingest->parsed()) {
      Graph g;
      if (std::filesystem::exists(paths.data)) g.ingest(paths.data);
      const IngestCounts counts = g.ingest(std::filesystem::path(ingest_file));
      if (!paths.data.parent_path().empty()) std::filesystem::create_directories(paths.data.parent_path());
      {
        std::ifstream src(ingest_file, std::ios::binary);
        std::ofstream dst(paths.data, std::ios::binary | std::ios::app);
        dst << src.rdbuf();
        // A file without a trailing newline must not glue onto the next ingest.
        dst.flush();
      }
      {
        std::ifstream check(paths.data, std::ios::binary | std::ios::ate);
        if (check.tellg() > 0) {
          check.seekg(-1, std::ios::end);
          if (check.get() != '\n') std::ofstream(paths.data, std::ios::app) << '\n';
        }
      }
      std::filesystem::remove(paths.index);
      if (json) {
        emit({{"entities", counts.entities}, {"edges", counts.edges}, {"total_entities", g.entity_count()},
              {"total_edges", g.edge_count()}});
      } else {
        out << "ingested " << counts.entities << " entities and " << counts.edges << " edges ("
            << g.entity_count() << " / " << g.edge_count() << " total)\n";
      }
      return kExitOk;
    }

    if (index_build->parsed()) {
      auto g = detail::load_graph(paths);
      const std::size_t k = build_k != 0 ? build_k : (cfg.landmarks != 0 ? cfg.landmarks : default_landmark_count(g->entity_count()));
      const auto idx = DistanceIndex::build(g, k);
      if (!paths.index.parent_path().empty()) std::filesystem::create_directories(paths.index.parent_path());
      std::ofstream(paths.index, std::ios::binary | std::ios::trunc) << idx.serialize();
      const auto report = idx.compression_report();
      if (json) {
        auto j = detail::report_json(report);
        j["landmarks"] = k;
        j["path"] = paths.index.string();
        emit(j);
      } else {
        out << "built index with " << k << " landmarks -> " << paths.index.string() << "\n"
            << "stored " << report.stored_pairs << " of " << report.total_pairs << " landmark-node pairs (saving "
            << report.saving_ratio * 100.0 << "%)\n";
      }
      return kExitOk;
    }

    if (index_report->parsed()) {
      auto g = detail::load_graph(paths);
      auto idx = detail::load_index(paths, g);
      if (!idx) idx = cfg.landmarks == 0 ? DistanceIndex::build(g) : DistanceIndex::build(g, cfg.landmarks);
      auto j = detail::report_json(idx->compression_report());
      j["landmarks"] = idx->landmarks().size();
      emit(j);
      return kExitOk;
    }

    if (search->parsed() || qac->parsed()) {
      const auto engine = detail::load_engine(paths, cfg.landmarks);
      std::vector<ScoredResult> results;
      if (search->parsed()) {
        std::vector<EntityKind> ks(kSearchKinds.begin(), kSearchKinds.end());
        if (!kinds.empty()) {
          ks.clear();
          std::stringstream ss(kinds);
          std::string item;
          while (std::getline(ss, item, ',')) {
            auto k = parse_entity_kind(item);
            if (!k) throw Error(ErrorCode::OutOfRangeInput, "unknown kind '" + item + "'");
            ks.push_back(*k);
          }
        }
        results = engine.search(user, query, limit == 0 ? cfg.search_limit : limit, ks);
        if (!no_log) {
          QuerySuggester log(detail::user_check(engine.distances().graph_ptr()), {}, paths.qlog);
          const auto logged = log.entries();
          const Timestamp at = std::max(wall_clock_now(), logged.empty() ? Timestamp{0} : logged.back().timestamp);
          log.log_query({user, query, "", at, std::nullopt});
        }
      } else {
        results = engine.autocomplete(user, query, limit == 0 ? cfg.qac_limit : limit);
      }
      if (json) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& r : results) arr.push_back(to_json(r, engine.graph()));
        emit({{"user", user}, {"q", query}, {"results", arr}});
      } else {
        detail::print_results(out, results, engine.graph());
      }
      return kExitOk;
    }

    if (qs->parsed()) {
      auto g = detail::load_graph(paths);
      SuggestConfig sc;
      sc.window = cfg.window;
      QuerySuggester suggester(detail::user_check(g), sc, paths.qlog);
      const auto list = suggester.suggest(user, now == 0 ? wall_clock_now() : now);
      if (json) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& s : list) arr.push_back(to_json(s));
        emit({{"user", user}, {"suggestions", arr}});
      } else {
        for (const auto& s : list) {
          out << (s.source == SuggestionSource::History ? "[recent]   " : "[trending] ")
              << (s.payload == PayloadKind::EntityLink ? "-> " : "") << s.value << "\n";
        }
      }
      return kExitOk;
    }

    if (act_record->parsed() || act_delete->parsed() || lb_show->parsed()) {
      auto g = detail::load_graph(paths);
      Ledger led([g](std::string_view id) { return g->contains(id); }, detail::user_check(g), {}, paths.ledger);
      if (lb_show->parsed()) {
        std::optional<std::string> ctx;
        if (context != "all") {
          if (!g->contains(context)) throw Error(ErrorCode::UnknownEntity, "no context '" + context + "'");
          ctx = context;
        }
        LeaderboardDesign d = LeaderboardDesign::HybridAbsolute;
        if (!design.empty()) {
          d = *parse_design(design);
        } else if (ctx && g->entity(g->index_of(*ctx)).kind == EntityKind::Course) {
          d = LeaderboardDesign::Hybrid5050;
        }
        const auto view = led.build_view(ctx, *parse_window(window), *parse_leaderboard_kind(kind),
                                         now == 0 ? wall_clock_now() : now, user, d);
        if (json) {
          emit(to_json(view));
        } else {
          detail::print_view(out, view);
        }
        return kExitOk;
      }
      const Timestamp at = ts == 0 ? wall_clock_now() : ts;
      Activity a;
      if (act_record->parsed()) {
        ActivityRequest req{actor, parse_action(action), location, object, at, std::nullopt};
        if (act_record->count("--target") > 0) req.target = target;
        a = led.record_activity(req);
      } else {
        a = led.record_delete(activity_id, actor, at);
      }
      if (json) {
        emit(Ledger::to_json(a));
      } else {
        out << "activity #" << a.id << " " << to_string(a.action) << " by " << a.actor << ": "
            << (a.points.tenths >= 0 ? "+" : "") << a.points.value() << " points\n";
      }
      return kExitOk;
    }

    if (serve->parsed()) {
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      if (threads != 0) cfg.threads = threads;
      cfg.data = paths.data;
      cfg.ledger = paths.ledger;
      cfg.qlog = paths.qlog;
      cfg.index = paths.index;
      Service service(cfg);
      const int bound = service.bind();
      out << "listening on http://" << cfg.host << ":" << bound << std::endl;
      static Service* running = nullptr;
      running = &service;
      std::signal(SIGINT, [](int) { if (running) running->stop(); });
      std::signal(SIGTERM, [](int) { if (running) running->stop(); });
      service.run();
      running = nullptr;
      return kExitOk;
    }

    if (bench_gen->parsed()) {
      bench::generate_dataset(seed, entities, relationships, std::filesystem::path(out_path));
      Graph g;
      const auto counts = g.ingest(std::filesystem::path(out_path));
      const auto report = DistanceIndex::build(g.snapshot()).compression_report();
      if (json) {
        emit({{"path", out_path}, {"entities", counts.entities}, {"relationships", counts.edges},
              {"compression", detail::report_json(report)}});
      } else {
        out << "wrote " << out_path << ": " << counts.entities << " entities, " << counts.edges
            << " relationships; landmark storage saving " << report.saving_ratio * 100.0 << "% (reference > 80%)\n";
      }
      return kExitOk;
    }

    if (bench_run->parsed()) {
      bench::BenchPlan plan;
      plan.levels = detail::parse_levels(levels_csv);
      auto g = detail::load_graph(paths);
      plan.endpoint = *parse_endpoint(endpoint);
      plan.total_requests = total;
      plan.users = bench::sample_users(*g, seed, 64);
      if (plan.endpoint != Endpoint::QS) plan.queries = bench::make_query_corpus(*g, plan.endpoint, seed);
      auto report = bench::run_bench(plan, target_url);
      report.compression = DistanceIndex::build(g).compression_report();
      if (!out_path.empty()) {
        std::ofstream csv(out_path, std::ios::trunc);
        bench::write_csv(report, csv);
      }
      if (!json_out.empty()) std::ofstream(json_out, std::ios::trunc) << bench::to_json(report).dump(2) << "\n";
      if (json) {
        emit(bench::to_json(report));
      } else {
        bench::write_csv(report, out);
      }
      if (report.failures() > 0) {
        throw Error(ErrorCode::PartialFailure, std::to_string(report.failures()) + " requests failed");
      }
      return kExitOk;
    }

    if (debug_sim->parsed()) {
      const auto engine = detail::load_engine(paths, cfg.landmarks);
      const auto b = engine.explain(user, query, entity);
      nlohmann::ordered_json j{{"S_Partial", b.partial}, {"S_Exact", b.exact}, {"S_T", b.topical},
                               {"S_U", b.social},        {"S", b.overall}};
      emit(j);
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    err << nlohmann::ordered_json{{"error", "UsageError"}, {"message", e.what()}}.dump() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    nlohmann::ordered_json j{{"error", to_string(e.code())}, {"message", e.what()}};
    if (e.line()) j["line"] = *e.line();
    err << j.dump() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << nlohmann::ordered_json{{"error", "InternalError"}, {"message", e.what()}}.dump() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace fullbrain::cli
