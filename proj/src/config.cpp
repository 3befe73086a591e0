#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "orag/error.hpp"
#include "orag/io.hpp"

namespace orag {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 30> kKeys = {
    "I",          "d",           "T",          "K",          "seed",           "variant",
    "update_mode", "batch_size", "schedule",   "c",          "projection",     "repeat_passes",
    "sigma",      "sigma_init",  "alpha",      "shift_round", "shift_fraction", "hops",
    "withheld_fraction", "insert_round", "insert_noise", "propensity_floor", "out", "passes",
    "oracle_lr",  "k",           "window",     "queries",    "items",          "labels"};
constexpr std::string_view kItemsKey = "items";

[[noreturn]] void invalid(std::string_view field, const std::string& why) {
  throw Error(ErrorCode::kValidationError, std::string(field) + ": " + why);
}

std::uint64_t get_uint(const json& j, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number_integer()) invalid(key, "expected a non-negative integer");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto s = v.get<std::int64_t>();
  if (s < 0) invalid(key, "expected a non-negative integer");
  return static_cast<std::uint64_t>(s);
}

double get_double(const json& j, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_number()) invalid(key, "expected a number");
  return v.get<double>();
}

std::string get_string(const json& j, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_string()) invalid(key, "expected a string");
  return v.get<std::string>();
}

bool has(const json& j, std::string_view key) { return j.contains(std::string(key)); }

}  // namespace

std::span<const std::string_view> config_keys() { return kKeys; }

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "config must be a single JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      invalid(key, "unknown key");
    }
  }

  RunConfig cfg;
  auto& ep = cfg.episode;
  const bool replay = has(j, "queries") || has(j, kItemsKey) || has(j, "labels");
  if (replay) {
    for (std::string_view key : {std::string_view("queries"), kItemsKey, std::string_view("labels")}) {
      if (!has(j, key)) invalid(key, "replay needs queries, items and labels together");
    }
    cfg.queries = get_string(j, "queries");
    cfg.items = get_string(j, kItemsKey);
    cfg.labels = get_string(j, "labels");
  }
  for (std::string_view key : {"I", "d", "T"}) {
    if (!has(j, key) && !replay) invalid(key, "required");
  }
  if (has(j, "I")) ep.I = get_uint(j, "I");
  if (has(j, "d")) ep.d = get_uint(j, "d");
  if (has(j, "T")) ep.T = get_uint(j, "T");
  if (has(j, "K")) ep.K = get_uint(j, "K");
  if (has(j, "seed")) cfg.seed = get_uint(j, "seed");

  if (has(j, "variant")) {
    const auto v = get_string(j, "variant");
    if (v == "plain") ep.variant = Variant::kPlain;
    else if (v == "rerank") ep.variant = Variant::kRerank;
    else if (v == "dynamic") ep.variant = Variant::kDynamic;
    else if (v == "multihop") ep.variant = Variant::kMultihop;
    else invalid("variant", "expected plain, rerank, dynamic or multihop");
  }
  if (has(j, "update_mode")) {
    const auto v = get_string(j, "update_mode");
    if (v == "full") ep.update_mode = UpdateMode::full();
    else if (v == "chosen_only") ep.update_mode = UpdateMode::chosen_only();
    else if (v == "batched") ep.update_mode = UpdateMode::batched(1);
    else invalid("update_mode", "expected full, chosen_only or batched");
  }
  if (has(j, "batch_size")) {
    if (ep.update_mode.kind != UpdateKind::kBatched) invalid("batch_size", "only valid with update_mode=batched");
    ep.update_mode.batch_size = get_uint(j, "batch_size");
    if (ep.update_mode.batch_size == 0) invalid("batch_size", "must be >= 1");
  }
  if (has(j, "schedule")) {
    const auto v = get_string(j, "schedule");
    if (v == "constant") ep.schedule.kind = ScheduleKind::kConstant;
    else if (v == "inverse_sqrt") ep.schedule.kind = ScheduleKind::kInverseSqrt;
    else invalid("schedule", "expected constant or inverse_sqrt");
  }
  if (has(j, "c")) ep.schedule.c = get_double(j, "c");
  if (has(j, "projection")) {
    const auto v = get_string(j, "projection");
    if (v == "none") ep.projection = ProjectionMode::kNone;
    else if (v == "unit_ball") ep.projection = ProjectionMode::kUnitBall;
    else invalid("projection", "expected none or unit_ball");
  }
  if (has(j, "repeat_passes")) ep.repeat_passes = get_uint(j, "repeat_passes");
  if (has(j, "sigma")) ep.query_noise = get_double(j, "sigma");
  if (has(j, "sigma_init")) ep.init_noise = get_double(j, "sigma_init");
  if (has(j, "alpha")) ep.reranker_alpha = get_double(j, "alpha");
  if (has(j, "shift_round")) ep.shift_round = get_uint(j, "shift_round");
  if (has(j, "shift_fraction")) ep.shift_fraction = get_double(j, "shift_fraction");
  if (has(j, "hops")) ep.hops = get_uint(j, "hops");
  if (has(j, "withheld_fraction")) ep.withheld_fraction = get_double(j, "withheld_fraction");
  if (has(j, "insert_round")) ep.insert_round = get_uint(j, "insert_round");
  if (has(j, "insert_noise")) ep.insert_noise = get_double(j, "insert_noise");
  if (has(j, "propensity_floor")) {
    const double floor = get_double(j, "propensity_floor");
    if (!(floor > 0.0 && floor <= 1.0)) invalid("propensity_floor", "must lie in (0, 1]");
    ep.gradient.propensity_floor = floor;
  }
  if (has(j, "out")) cfg.out = get_string(j, "out");
  if (has(j, "passes")) {
    cfg.oracle_passes = get_uint(j, "passes");
    if (cfg.oracle_passes == 0) invalid("passes", "must be >= 1");
  }
  if (has(j, "oracle_lr")) {
    cfg.oracle_lr = get_double(j, "oracle_lr");
    if (!(cfg.oracle_lr > 0.0)) invalid("oracle_lr", "must be positive");
  }
  if (has(j, "k")) {
    cfg.k = get_uint(j, "k");
    if (cfg.k == 0) invalid("k", "must be >= 1");
  }
  if (has(j, "window")) {
    cfg.window = get_uint(j, "window");
    if (*cfg.window == 0) invalid("window", "must be >= 1");
  }

  // Replay configs get I, d and T from the dump; validate the rest now.
  EpisodeConfig probe = ep;
  if (replay) {
    if (!has(j, "I")) probe.I = std::max<std::size_t>(probe.K, 1);
    if (!has(j, "d")) probe.d = 1;
    if (!has(j, "T")) probe.T = 1;
  }
  try {
    probe.validate();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInvalidConfig) throw;
    const std::string what = e.what();
    const auto colon = what.find(": ");
    throw Error(ErrorCode::kValidationError, colon == std::string::npos ? what : what.substr(colon + 2));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace orag
