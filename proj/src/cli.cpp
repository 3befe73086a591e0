#include <algorithm>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "orag/error.hpp"
#include "orag/io.hpp"
#include "orag/snapshot.hpp"

namespace orag {

namespace {

constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kSnapshotFile = "catalog.orag";
constexpr const char* kRegretFile = "regret.csv";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kAccuracyFile = "accuracy.csv";

struct CliOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> k;
  std::optional<std::size_t> passes;
};

// A run is either the simulator or a replay of an ingested dump.
struct Source {
  RunConfig cfg;
  std::optional<Environment> env;
  std::optional<ReplayDump> dump;

  bool is_replay() const { return dump.has_value(); }
};

Source open_source(const CliOptions& opts, bool force_replay) {
  Source src{load_config(opts.config), std::nullopt, std::nullopt};
  auto& cfg = src.cfg;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.k) cfg.k = *opts.k;
  if (opts.passes) cfg.oracle_passes = *opts.passes;
  if (cfg.k == 0) throw Error(ErrorCode::kValidationError, "k: must be >= 1");
  if (cfg.oracle_passes == 0) throw Error(ErrorCode::kValidationError, "passes: must be >= 1");

  if (cfg.queries) {
    src.dump = ingest_embedding_dump(*cfg.queries, *cfg.items, *cfg.labels, cfg.episode.projection);
    auto& ep = cfg.episode;
    ep.I = src.dump->catalog.size();
    ep.d = src.dump->catalog.dim();
    ep.T = src.dump->stream.size();
    if (ep.K > ep.I) throw Error(ErrorCode::kValidationError, "K: must satisfy 1 <= K <= I");
  } else if (force_replay) {
    throw Error(ErrorCode::kValidationError, "queries: replay needs queries, items and labels");
  } else {
    src.env = make_environment(cfg.episode, cfg.seed);
  }
  return src;
}

std::filesystem::path output_dir(const CliOptions& opts, const RunConfig& cfg) {
  std::filesystem::path dir = opts.out ? std::filesystem::path(*opts.out) : cfg.out.value_or("orag_out");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create output directory " + dir.string());
  return dir;
}

EpisodeLog run(const Source& src) {
  if (src.is_replay()) return run_replay(*src.dump, src.cfg.episode, src.cfg.seed);
  return run_episode(*src.env, src.cfg.episode);
}

Catalog starting_catalog(const Source& src) {
  if (src.is_replay()) return src.dump->catalog;
  return initial_catalog(*src.env, src.cfg.episode.init_noise);
}

// (query, target) pairs of the whole stream, for offline evaluation.
std::vector<LabeledEvent> evaluation_events(const Source& src) {
  std::vector<LabeledEvent> events;
  if (src.is_replay()) {
    for (const auto& rq : src.dump->stream) events.push_back({rq.query.values, rq.target});
    return events;
  }
  const auto total = src.cfg.episode.T;
  for (std::uint64_t t = 1; t <= total; ++t) {
    for (auto& lq : src.env->round(t)) events.push_back({std::move(lq.query.values), lq.target});
  }
  return events;
}

std::vector<LabeledEvent> present_in(const Catalog& catalog, const std::vector<LabeledEvent>& events) {
  std::vector<LabeledEvent> kept;
  std::copy_if(events.begin(), events.end(), std::back_inserter(kept),
               [&](const LabeledEvent& e) { return catalog.contains(e.target); });
  return kept;
}

void write_run_outputs(const std::filesystem::path& dir, const EpisodeLog& log) {
  const auto records = to_event_records(log);
  write_event_log(dir / kEventsFile, records);
  save_snapshot(dir / kSnapshotFile, log.final_catalog);
}

double overall_accuracy(const EpisodeLog& log) {
  if (log.records.empty()) return 0.0;
  const auto hits = std::count_if(log.records.begin(), log.records.end(), [](const auto& r) { return r.success; });
  return static_cast<double>(hits) / static_cast<double>(log.records.size());
}

int cmd_simulate(const CliOptions& opts, std::ostream& out, bool replay) {
  const auto src = open_source(opts, replay);
  const auto dir = output_dir(opts, src.cfg);
  const auto log = run(src);
  write_run_outputs(dir, log);
  out << (replay ? "replay" : "simulate") << ": " << log.records.size() << " rounds, accuracy "
      << format_double(overall_accuracy(log)) << ", wrote " << (dir / kEventsFile).string() << " and "
      << (dir / kSnapshotFile).string() << '\n';
  return 0;
}

int cmd_regret(const CliOptions& opts, std::ostream& out) {
  const auto src = open_source(opts, false);
  const auto dir = output_dir(opts, src.cfg);
  const auto log = run(src);
  const auto events = labeled_events(log);
  OracleOptions oracle_options;
  oracle_options.max_passes = src.cfg.oracle_passes;
  oracle_options.learning_rate = src.cfg.oracle_lr;
  const auto oracle = train_oracle(events, log.initial, oracle_options);
  const auto ledger = regret_curve(log, oracle.theta);
  write_text_atomically(dir / kRegretFile, regret_csv(ledger));
  out << "regret: T=" << ledger.size() << " cum_regret=" << format_double(ledger.final_regret())
      << " oracle_passes=" << oracle.passes << ", wrote " << (dir / kRegretFile).string() << '\n';
  return 0;
}

int cmd_metrics(const CliOptions& opts, std::ostream& out) {
  const auto src = open_source(opts, false);
  const auto dir = output_dir(opts, src.cfg);
  const auto log = run(src);
  const auto events = evaluation_events(src);
  const std::size_t k = src.cfg.k;

  std::ostringstream table;
  table << "stage,k,recall_at_k,ndcg_at_k,accuracy,queries\n";
  for (const auto& [stage, catalog] : {std::pair<const char*, const Catalog*>{"initial", &log.initial},
                                       std::pair<const char*, const Catalog*>{"final", &log.final_catalog}}) {
    const auto usable = present_in(*catalog, events);
    if (usable.empty()) continue;
    const auto s = evaluate_retrieval(*catalog, usable, k);
    table << stage << ',' << k << ',' << format_double(s.recall) << ',' << format_double(s.ndcg) << ','
          << format_double(s.accuracy) << ',' << s.queries << '\n';
  }
  write_text_atomically(dir / kMetricsFile, table.str());

  const auto bits = success_bits(log);
  const std::size_t window = std::min(src.cfg.window.value_or(100), bits.size());
  const auto curve = rolling_accuracy(bits, window);
  std::ostringstream acc;
  acc << "t,rolling_accuracy\n";
  for (std::size_t i = 0; i < curve.size(); ++i) acc << (i + window) << ',' << format_double(curve[i]) << '\n';
  write_text_atomically(dir / kAccuracyFile, acc.str());

  out << "metrics: wrote " << (dir / kMetricsFile).string() << " and " << (dir / kAccuracyFile).string() << '\n';
  return 0;
}

int cmd_export(const CliOptions& opts, std::ostream& out) {
  const auto src = open_source(opts, false);
  const auto dir = output_dir(opts, src.cfg);
  const auto catalog = starting_catalog(src);
  save_snapshot(dir / kSnapshotFile, catalog);
  out << "export: " << catalog.size() << " items x " << catalog.dim() << " -> " << (dir / kSnapshotFile).string()
      << '\n';
  return 0;
}

bool is_validation(ErrorCode code) {
  return code == ErrorCode::kValidationError || code == ErrorCode::kParseError || code == ErrorCode::kInvalidConfig;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online-optimized retrieval: simulate, replay and evaluate embedding adaptation", "orag"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opts;
  app.add_option("--config", opts.config, "JSON run configuration");
  app.add_option("--seed", opts.seed, "override the config seed");
  app.add_option("--out", opts.out, "output directory");
  app.add_option("--k", opts.k, "cutoff for R@k / N@k");
  app.add_option("--passes", opts.passes, "oracle pass budget");

  auto* simulate = app.add_subcommand("simulate", "run an episode from the config; write event log and snapshot");
  auto* replay = app.add_subcommand("replay", "run the learner over an ingested embedding dump");
  auto* regret = app.add_subcommand("regret", "train the hindsight oracle and write the regret curve CSV");
  auto* metrics = app.add_subcommand("metrics", "write R@k / N@k / accuracy CSVs");
  auto* export_cmd = app.add_subcommand("export", "write the starting catalog snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  if (opts.config.empty()) {
    err << "error: --config is required\n" << app.help();
    return 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts, out, false);
    if (replay->parsed()) return cmd_simulate(opts, out, true);
    if (regret->parsed()) return cmd_regret(opts, out);
    if (metrics->parsed()) return cmd_metrics(opts, out);
    if (export_cmd->parsed()) return cmd_export(opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace orag
