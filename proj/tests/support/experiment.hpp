#pragma once

// Small experiment configs derived from the demo document.

#include "agentab/config.hpp"
#include "agentab/pipeline.hpp"
#include "paths.hpp"

namespace agentab::testing {

inline std::filesystem::path ConfigDir() { return DataDir() / "configs"; }

inline Json DemoDoc() { return ReadJsonFile(ConfigDir() / "demo.json"); }

// Demo document with an inline agent_spec of `count` personas, `sample_n`
// sampled, writing into a fresh scratch directory.
inline Json SmallDoc(const std::string& scratch, int count, int sample_n, int parallelism = 1) {
  Json doc = DemoDoc();
  Json spec = ReadJsonFile(DataDir() / "agent_spec.json");
  spec["count"] = count;
  doc["agent_spec"] = spec;
  doc["sample_n"] = sample_n;
  doc["parallelism"] = parallelism;
  doc["output_dir"] = ScratchDir(scratch).string();
  doc["analysis"].erase("stratify");
  return doc;
}

inline ExperimentConfig Parse(const Json& doc) { return ParseConfig(doc, ConfigDir()); }

// Personas and allocation written; returns the plan for the run stage.
inline ExperimentPlan PreparedPlan(const ExperimentConfig& cfg) {
  StagePersonas(cfg);
  StageAllocate(cfg);
  return BuildPlan(cfg);
}

}  // namespace agentab::testing
