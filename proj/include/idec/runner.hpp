#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "idec/analysis.hpp"
#include "idec/backend.hpp"
#include "idec/engine.hpp"
#include "idec/prompts.hpp"

namespace idec {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRunError = 1;
inline constexpr int kExitUsage = 2;

// Everything needed to reproduce a run. Serialized verbatim into every
// report as the config echo.
struct RunSpec {
  std::filesystem::path tasks_dir;
  std::size_t instances_per_task = 100;
  std::optional<std::uint64_t> instance_seed;
  std::optional<std::filesystem::path> labels_fixture;
  std::filesystem::path word_list;
  std::string template_name = "supnatinst";

  DecodeConfig decode;
  std::optional<NoisySpec> noisy;
  std::size_t shots = 0;

  std::string backend;
  std::optional<std::string> amateur_backend;

  std::filesystem::path report_dir;
  bool resume = false;
  int jobs = 1;

  // Throws ConfigError on an inconsistent spec.
  void validate() const;
  nlohmann::json to_json() const;
};

// Default epsilon: 0.3 zero-shot, 0.2 with demonstrations.
double default_epsilon(std::size_t shots);

// Backend specifications:
//   toy:hash[:SEED]    HashLM
//   toy:echo:TEXT      EchoLM
//   toy:biased:PATH    BiasedInstructionLM from a JSON config
//   http://HOST:PORT   RemoteBackend
std::shared_ptr<const Backend> make_backend(const std::string& spec);

// Output files inside RunSpec::report_dir.
struct ReportPaths {
  std::filesystem::path result_json;
  std::filesystem::path scores_csv;
  std::filesystem::path responses_jsonl;
  std::filesystem::path manifest_json;

  explicit ReportPaths(const std::filesystem::path& dir);
};

// Evaluates every task and writes result.json, scores.csv and
// responses.jsonl. On a backend failure the completed tasks are still
// written, together with manifest.json, and kExitRunError is returned. With
// resume set, tasks already complete in responses.jsonl are not re-run.
int run(const RunSpec& spec, std::ostream& log);

// Same as run, with backends supplied by the caller. `amateur` may be null.
int run_with_backends(const RunSpec& spec, std::shared_ptr<const Backend> base,
                      std::shared_ptr<const Backend> amateur, std::ostream& log);

// One run per epsilon in the grid, each reported under eps_<value>/, plus
// sweep.csv with an (epsilon, overall_rouge_l) row per grid point. With
// resume set, grid points already present in sweep.csv are kept.
int sweep(const RunSpec& spec, const EpsilonGrid& grid, std::ostream& log);

// Formats a double with the shortest round-trip representation.
std::string format_number(double v);

}  // namespace idec
