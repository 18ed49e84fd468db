#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "agentab/agent.hpp"

namespace agentab {

Json ToJson(const StepRecord& s);
StepRecord StepRecordFromJson(const Json& j);
Json ToJson(const SessionTrace& t);
// Structural parse only; see ValidateTrace for the invariants.
SessionTrace TraceFromJson(const Json& j);

// Throws SchemaError on a version mismatch or when totals, spend, or the
// outcome counters disagree with the steps.
void ValidateTrace(const SessionTrace& t);

// SHA-256 of the trace with every timing field zeroed, so runs under
// different clocks or schedules compare equal when behaviour is equal.
std::string TraceDigest(const SessionTrace& t);

inline constexpr std::string_view kIndexFileName = "index.jsonl";

// Writes <session id>.json and appends one line to index.jsonl. Not safe
// for concurrent use on the same directory; TraceWriter serializes.
void WriteTrace(const SessionTrace& t, const std::filesystem::path& dir);

class TraceWriter {
 public:
  explicit TraceWriter(std::filesystem::path dir);
  void Write(const SessionTrace& t);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

struct LoadDiagnostic {
  std::string file;
  std::string error;
};

struct LoadResult {
  std::vector<SessionTrace> traces;  // sorted by session id
  std::vector<LoadDiagnostic> rejected;
};

// Every *.json file in dir; bad files are reported, not thrown.
LoadResult LoadTraces(const std::filesystem::path& dir);

inline constexpr std::string_view kCsvHeader =
    "session_id,persona_id,arm,n_search,n_click_product,n_click_filter_option,n_purchase,n_stop,total_actions,"
    "converted,spend,outcome_kind,duration_s";

// One row per trace in the given order; returns the row count.
int ExportTabular(const std::vector<SessionTrace>& traces, const std::filesystem::path& path);

}  // namespace agentab
