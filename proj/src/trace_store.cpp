#include "agentab/trace_store.hpp"

#include <algorithm>
#include <cmath>

namespace agentab {

namespace {

Json OptionalText(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

std::string CsvField(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Json ToJson(const StepRecord& s) {
  return {{"step_index", s.step_index},
          {"observation", ToJson(s.observation)},
          {"prompt_digest", s.prompt_digest},
          {"raw_model_text", s.raw_model_text},
          {"action", s.action ? ToJson(*s.action) : Json(nullptr)},
          {"parse_error", s.parse_error},
          {"repair_error", s.repair_error},
          {"exec", s.exec ? ToJson(*s.exec) : Json(nullptr)},
          {"rationale", OptionalText(s.rationale)},
          {"wall_time", s.wall_time}};
}

StepRecord StepRecordFromJson(const Json& j) {
  StepRecord s;
  s.step_index = j.at("step_index").get<int>();
  s.observation = ObservationFromJson(j.at("observation"));
  s.prompt_digest = j.at("prompt_digest").get<std::string>();
  s.raw_model_text = j.at("raw_model_text").get<std::string>();
  if (!j.at("action").is_null()) s.action = ActionFromJson(j.at("action"));
  s.parse_error = j.at("parse_error").get<std::string>();
  s.repair_error = j.value("repair_error", std::string());
  if (!j.at("exec").is_null()) s.exec = ExecResultFromJson(j.at("exec"));
  if (!j.at("rationale").is_null()) s.rationale = j.at("rationale").get<std::string>();
  s.wall_time = j.at("wall_time").get<double>();
  return s;
}

Json ToJson(const SessionTrace& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(ToJson(s));
  Json totals = Json::object();
  for (const auto& [k, c] : t.totals) totals[std::string(ToString(k))] = c;
  return {{"schema_version", t.schema_version},
          {"session_id", t.session_id},
          {"persona_id", t.persona_id},
          {"arm", t.arm},
          {"seed", t.seed},
          {"steps", steps},
          {"outcome",
           {{"kind", ToString(t.outcome.kind)},
            {"converted", t.outcome.converted},
            {"purchases", t.outcome.purchases},
            {"spend", t.outcome.spend},
            {"reason", t.outcome.reason}}},
          {"totals", totals},
          {"spend", t.spend},
          {"duration", t.duration}};
}

SessionTrace TraceFromJson(const Json& j) {
  SessionTrace t;
  try {
    t.schema_version = j.at("schema_version").get<int>();
    if (t.schema_version != kTraceSchemaVersion) {
      throw SchemaError("schema_version " + std::to_string(t.schema_version) + " (expected " +
                        std::to_string(kTraceSchemaVersion) + ")");
    }
    t.session_id = j.at("session_id").get<std::string>();
    t.persona_id = j.at("persona_id").get<std::string>();
    t.arm = j.at("arm").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("steps")) t.steps.push_back(StepRecordFromJson(s));
    const Json& o = j.at("outcome");
    t.outcome.kind = OutcomeKindFromString(o.at("kind").get<std::string>());
    t.outcome.converted = o.at("converted").get<bool>();
    t.outcome.purchases = o.at("purchases").get<int>();
    t.outcome.spend = o.at("spend").get<double>();
    t.outcome.reason = o.at("reason").get<std::string>();
    for (const auto& [k, c] : j.at("totals").items()) t.totals[ActionKindFromString(k)] = c.get<int>();
    t.spend = j.at("spend").get<double>();
    t.duration = j.at("duration").get<double>();
  } catch (const Json::exception& e) {
    throw SchemaError(e.what());
  } catch (const ValidationError& e) {
    throw SchemaError(e.what());
  }
  return t;
}

void ValidateTrace(const SessionTrace& t) {
  if (t.schema_version != kTraceSchemaVersion) throw SchemaError("schema_version mismatch");
  if (t.session_id.empty()) throw SchemaError("empty session_id");
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const StepRecord& s = t.steps[i];
    if (s.action.has_value() == !s.parse_error.empty()) {
      throw SchemaError("step " + std::to_string(i) + ": action and parse-failure marker must be exclusive");
    }
    if (s.action.has_value() != s.exec.has_value()) {
      throw SchemaError("step " + std::to_string(i) + ": exec result must accompany the action");
    }
  }
  if (t.totals != ComputeTotals(t.steps)) throw SchemaError("totals disagree with steps");
  const double spend = ComputeSpend(t.steps);
  if (std::abs(spend - t.spend) > 1e-9 || std::abs(spend - t.outcome.spend) > 1e-9) {
    throw SchemaError("spend disagrees with purchases in steps");
  }
  const int purchases = CountPurchases(t.steps);
  if (purchases != t.outcome.purchases) throw SchemaError("purchase count disagrees with steps");
  if (t.outcome.converted != (purchases >= 1)) throw SchemaError("converted flag disagrees with purchases");
}

std::string TraceDigest(const SessionTrace& t) {
  SessionTrace copy = t;
  copy.duration = 0.0;
  for (auto& s : copy.steps) {
    s.wall_time = 0.0;
    if (s.exec) s.exec->latency = 0.0;
  }
  return Sha256Hex(ToJson(copy).dump());
}

void WriteTrace(const SessionTrace& t, const std::filesystem::path& dir) {
  if (t.session_id.empty() || t.session_id.find_first_of("/\\") != std::string::npos) {
    throw ValidationError("session id unusable as a file name: '" + t.session_id + "'");
  }
  const std::string file = t.session_id + ".json";
  WriteJsonFile(dir / file, ToJson(t));
  Json line = {{"session_id", t.session_id}, {"persona_id", t.persona_id},
               {"arm", t.arm},               {"file", file},
               {"digest", TraceDigest(t)},   {"outcome", ToString(t.outcome.kind)}};
  std::ofstream index(dir / kIndexFileName, std::ios::app | std::ios::binary);
  if (!index) throw Error("cannot append to " + (dir / kIndexFileName).string());
  index << line.dump() << '\n';
  if (!index.flush()) throw Error("write failed: " + (dir / kIndexFileName).string());
}

TraceWriter::TraceWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void TraceWriter::Write(const SessionTrace& t) {
  std::lock_guard lock(mu_);
  WriteTrace(t, dir_);
}

LoadResult LoadTraces(const std::filesystem::path& dir) {
  LoadResult result;
  if (!std::filesystem::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      SessionTrace t = TraceFromJson(ReadJsonFile(f));
      ValidateTrace(t);
      if (f.stem().string() != t.session_id) throw SchemaError("file name does not match session_id");
      result.traces.push_back(std::move(t));
    } catch (const Error& e) {
      result.rejected.push_back({f.filename().string(), e.what()});
    }
  }
  std::sort(result.traces.begin(), result.traces.end(),
            [](const SessionTrace& a, const SessionTrace& b) { return a.session_id < b.session_id; });
  return result;
}

int ExportTabular(const std::vector<SessionTrace>& traces, const std::filesystem::path& path) {
  if (traces.empty()) throw ValidationError("no traces to export");
  std::string out(kCsvHeader);
  out.push_back('\n');
  auto count = [](const SessionTrace& t, ActionKind k) {
    auto it = t.totals.find(k);
    return std::to_string(it == t.totals.end() ? 0 : it->second);
  };
  for (const auto& t : traces) {
    out += CsvField(t.session_id) + "," + CsvField(t.persona_id) + "," + CsvField(t.arm);
    for (auto k : kAllActionKinds) out += "," + count(t, k);
    out += "," + std::to_string(t.TotalActions());
    out += std::string(",") + (t.outcome.converted ? "true" : "false");
    out += "," + FormatFixed(t.spend, 2);
    out += "," + std::string(ToString(t.outcome.kind));
    out += "," + FormatFixed(t.duration, 3);
    out.push_back('\n');
  }
  WriteFile(path, out);
  return static_cast<int>(traces.size());
}

}  // namespace agentab
