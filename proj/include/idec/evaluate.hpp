#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idec/backend.hpp"
#include "idec/engine.hpp"
#include "idec/metrics.hpp"
#include "idec/prompts.hpp"
#include "idec/taskio.hpp"

namespace idec {

struct EvalSettings {
  DecodeConfig decode;
  std::optional<NoisySpec> noisy;
  std::size_t shots = 0;
  Template prompt_template = template_by_name("supnatinst");
  std::vector<std::string> word_list;
  int jobs = 1;
};

// One line of the per-instance response log. Exactly one of
// (response + scores) or error is set.
struct InstanceRecord {
  std::string task_id;
  std::string instance_id;
  std::string prompt_hash;
  std::optional<std::string> response;
  std::optional<ScoreRecord> scores;
  std::size_t steps = 0;
  std::size_t flips = 0;
  bool stopped_at_eos = false;
  std::optional<std::string> error;

  nlohmann::ordered_json to_json() const;
  static InstanceRecord from_json(const nlohmann::json& j);
  // Single JSON line without trailing newline; invalid UTF-8 is replaced.
  std::string to_jsonl() const;
};

struct TaskOutcome {
  std::string task_id;
  std::vector<InstanceRecord> records;
  // Set when the task was aborted by a backend failure; records are then partial.
  std::optional<std::string> fatal_error;
};

// Hex FNV-1a of the base and noisy prompts.
std::string prompt_hash(const PromptBundle& bundle);

// Per-instance seed for sampling, mixed from the run seed and the ids.
std::uint64_t instance_seed(std::uint64_t run_seed, const std::string& task_id,
                            const std::string& instance_id);

// Decodes and scores one task. Decode and configuration errors become error
// records; transport failures abort the task and set fatal_error.
TaskOutcome evaluate_task(const Task& task, const Backend& base, const Backend* contrast,
                          const EvalSettings& settings);

// Evaluates tasks on a pool of `settings.jobs` OpenMP threads. Results keep
// the input task order. `on_done` is invoked (serialized) as each task
// finishes. After a fatal task failure, tasks not yet started are skipped and
// returned with fatal_error = "skipped".
std::vector<TaskOutcome> evaluate(const std::vector<Task>& tasks, const Backend& base,
                                  const Backend* contrast, const EvalSettings& settings,
                                  const std::function<void(const TaskOutcome&)>& on_done = {});

}  // namespace idec
