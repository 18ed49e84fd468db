// agentab: persona generation, allocation, experiment run and analysis,
// driven by one experiment config document.

#include <CLI11.hpp>
#include <httplib.h>

#include <iostream>

#include "agentab/mock_shop.hpp"
#include "agentab/pipeline.hpp"

namespace {

using namespace agentab;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAbandoned = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> output_dir;
  std::optional<int> parallelism;
  std::optional<std::uint64_t> seed_personas, seed_sample, seed_allocation, seed_run;
  bool quiet = false;
};

void AddCommonFlags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--output-dir", o.output_dir, "override output_dir");
  cmd->add_option("--parallelism", o.parallelism, "override parallelism")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-personas", o.seed_personas, "override seeds.personas");
  cmd->add_option("--seed-sample", o.seed_sample, "override seeds.sample");
  cmd->add_option("--seed-allocation", o.seed_allocation, "override seeds.allocation");
  cmd->add_option("--seed-run", o.seed_run, "override seeds.run");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress records on stderr");
}

ExperimentConfig Load(const Overrides& o) {
  ExperimentConfig cfg = LoadConfig(o.config);
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.seed_personas) cfg.seeds.personas = *o.seed_personas;
  if (o.seed_sample) cfg.seeds.sample = *o.seed_sample;
  if (o.seed_allocation) cfg.seeds.allocation = *o.seed_allocation;
  if (o.seed_run) cfg.seeds.run = *o.seed_run;
  return cfg;
}

int Personas(const ExperimentConfig& cfg, bool announce = true) {
  const auto pool = StagePersonas(cfg);
  std::cerr << "generated " << pool.personas.size() << " personas\n";
  if (announce) std::cout << (cfg.output_dir / kPersonasFile).string() << '\n';
  return kExitOk;
}

int Allocate(const ExperimentConfig& cfg, bool announce = true) {
  const auto r = StageAllocate(cfg);
  std::cerr << "allocation " << (r.passed ? "balanced" : "NOT balanced") << " after " << r.attempts
            << " attempt(s); worst metric " << FormatFixed(r.report.MaxValue(), 4) << '\n';
  if (announce) std::cout << (cfg.output_dir / kAllocationFile).string() << '\n';
  return kExitOk;
}

int Run(const ExperimentConfig& cfg, bool quiet, bool announce = true) {
  const auto m = StageRun(cfg, quiet ? nullptr : &std::cerr);
  std::cerr << "sessions " << m.sessions.size() << ", abandoned " << m.Abandoned() << '\n';
  if (announce) std::cout << (cfg.output_dir / kManifestFile).string() << '\n';
  return kExitOk;
}

int Analyze(const ExperimentConfig& cfg) {
  const auto r = StageAnalyze(cfg, &std::cerr);
  std::cout << r.report_text.string() << '\n';
  if (r.abandoned_over_threshold) {
    std::cerr << "warning: " << r.abandoned << " of " << r.sessions << " sessions abandoned (limit "
              << FormatFixed(cfg.analysis.max_abandoned_fraction * 100, 1) << "%)\n";
    return kExitAbandoned;
  }
  return kExitOk;
}

int ServeShop(const std::string& catalog_path, const std::string& variant, double threshold, int port,
              const std::string& host) {
  auto catalog = std::make_shared<const Catalog>(Catalog::Load(catalog_path));
  VariantConfig v = variant == "reduced" ? VariantConfig::Reduced(threshold) : VariantConfig::Full();
  ShopRouter router(catalog, v, "");
  httplib::Server server;
  server.Get(".*", [&](const httplib::Request& req, httplib::Response& res) {
    if (auto html = router.Render(req.target)) {
      res.set_content(*html, "text/html; charset=utf-8");
    } else {
      res.status = 404;
      res.set_content("not found", "text/plain");
    }
  });
  std::cerr << "serving " << variant << " shop on http://" << host << ":" << port << "/\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent-based A/B testing of web shop designs"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Overrides o;
  auto* personas = app.add_subcommand("personas", "generate the persona pool");
  auto* allocate = app.add_subcommand("allocate", "sample personas and assign them to arms");
  auto* run = app.add_subcommand("run", "run every allocated session");
  auto* analyze = app.add_subcommand("analyze", "summarize traces into the report");
  auto* pipeline = app.add_subcommand("pipeline", "personas, allocate, run and analyze in sequence");
  for (auto* c : {personas, allocate, run, analyze, pipeline}) AddCommonFlags(c, o);

  std::string catalog = "data/catalog.json", variant = "full", host = "127.0.0.1";
  double threshold = 0.8;
  int port = 8080;
  auto* serve = app.add_subcommand("serve-shop", "serve the mock shop over HTTP for browser runs");
  serve->add_option("--catalog", catalog, "catalog JSON")->capture_default_str();
  serve->add_option("--variant", variant, "filter panel variant")
      ->check(CLI::IsMember({"full", "reduced"}))
      ->capture_default_str();
  serve->add_option("--threshold", threshold, "similarity threshold for the reduced panel")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (serve->parsed()) return ServeShop(catalog, variant, threshold, port, host);
    const ExperimentConfig cfg = Load(o);
    if (personas->parsed()) return Personas(cfg);
    if (allocate->parsed()) return Allocate(cfg);
    if (run->parsed()) return Run(cfg, o.quiet);
    if (analyze->parsed()) return Analyze(cfg);
    Personas(cfg, false);
    Allocate(cfg, false);
    Run(cfg, o.quiet, false);
    return Analyze(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
