#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idec/backend.hpp"
#include "idec/evaluate.hpp"
#include "idec/prompts.hpp"
#include "idec/taskio.hpp"

namespace idec {

// Means in [0, 1]. Label metrics are absent when no scored task has a label space.
struct MetricMeans {
  double rouge_l = 0.0;
  double exact_match = 0.0;
  std::optional<double> label_adherence;
  std::optional<double> label_coherence;

  bool operator==(const MetricMeans&) const = default;
};

struct TaskScores {
  MetricMeans means;
  std::size_t n_scored = 0;
  std::size_t n_errors = 0;

  bool operator==(const TaskScores&) const = default;
};

struct RunResult {
  nlohmann::json config;
  std::map<std::string, TaskScores> per_task;
  // Unweighted mean over tasks with at least one scored instance.
  MetricMeans overall;

  nlohmann::json to_json() const;
  static RunResult from_json(const nlohmann::json& j);
  // Flat "task_id,metric,value" rows; overall rows use task id "__overall__".
  std::string to_csv() const;
};

// Throws ValidationError describing the first schema violation.
void validate_run_result(const nlohmann::json& j);

TaskScores summarize(const std::vector<InstanceRecord>& records);
MetricMeans overall_means(const std::map<std::string, TaskScores>& per_task);
RunResult make_run_result(const std::vector<TaskOutcome>& outcomes, nlohmann::json config);

// Sample Pearson correlation. Throws ValidationError for mismatched or too
// short input and UndefinedCorrelationError for zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct DegradationPoint {
  std::string variant;
  // Empty for variant-level points.
  std::string task_id;
  double degradation = 0.0;
  double boost = 0.0;
};

struct DegradationAnalysis {
  std::vector<DegradationPoint> points;
  double r = 0.0;
  std::vector<DegradationPoint> task_points;
  // Absent when the per-task correlation is undefined.
  std::optional<double> task_r;
};

// degradation = baseline - noisy_only, boost = id - baseline, per variant
// (overall Rouge-L) and per task x variant.
DegradationAnalysis degradation_vs_boost(const RunResult& baseline,
                                         const std::map<std::string, RunResult>& noisy_only,
                                         const std::map<std::string, RunResult>& id_runs);

struct WinningRate {
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
  std::size_t ties = 0;

  bool operator==(const WinningRate&) const = default;
};

// Per-task Rouge-L comparison; task sets must match.
WinningRate winning_rate(const RunResult& a, const RunResult& b);

struct EpsilonGrid {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.01;
};

// lo, lo + step, ..., hi. Values are snapped to 1e-9 so decimal steps do not
// accumulate drift. lo == hi yields a single point.
std::vector<double> epsilon_values(const EpsilonGrid& grid);

struct SweepPoint {
  double epsilon = 0.0;
  double overall_rouge_l = 0.0;
};

// Runs one full id-mode evaluation per grid point with `variant` as the noisy
// instruction. Deterministic backends are wrapped in a logit cache shared by
// all grid points. Any instance error aborts the sweep with the epsilon in
// the message.
std::vector<SweepPoint> epsilon_sweep(const std::vector<Task>& tasks,
                                      std::shared_ptr<const Backend> backend,
                                      const NoisySpec& variant, const EpsilonGrid& grid,
                                      EvalSettings settings);

}  // namespace idec
