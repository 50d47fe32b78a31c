#include "idec/evaluate.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "idec/errors.hpp"
#include "idec/rng.hpp"

namespace idec {

nlohmann::ordered_json InstanceRecord::to_json() const {
  nlohmann::ordered_json j{{"task_id", task_id}, {"instance_id", instance_id}, {"prompt_hash", prompt_hash}};
  if (error) {
    j["error"] = *error;
    return j;
  }
  j["response"] = response.value_or("");
  j["scores"] = scores ? scores->to_json() : nlohmann::ordered_json::object();
  j["trace"] = {{"steps", steps}, {"flips", flips}, {"eos", stopped_at_eos}};
  return j;
}

InstanceRecord InstanceRecord::from_json(const nlohmann::json& j) {
  InstanceRecord rec;
  try {
    rec.task_id = j.at("task_id").get<std::string>();
    rec.instance_id = j.at("instance_id").get<std::string>();
    rec.prompt_hash = j.at("prompt_hash").get<std::string>();
    if (j.contains("error")) {
      rec.error = j.at("error").get<std::string>();
      return rec;
    }
    rec.response = j.at("response").get<std::string>();
    const auto& s = j.at("scores");
    ScoreRecord sc;
    sc.rouge_l = s.at("rouge_l").get<double>();
    sc.exact_match = s.at("exact_match").get<bool>();
    if (s.contains("adherent")) sc.adherent = s.at("adherent").get<bool>();
    if (s.contains("coherent")) sc.coherent = s.at("coherent").get<bool>();
    rec.scores = sc;
    const auto& t = j.at("trace");
    rec.steps = t.at("steps").get<std::size_t>();
    rec.flips = t.at("flips").get<std::size_t>();
    rec.stopped_at_eos = t.at("eos").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("response record: ") + e.what());
  }
  return rec;
}

std::string InstanceRecord::to_jsonl() const {
  return to_json().dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string prompt_hash(const PromptBundle& bundle) {
  std::uint64_t h = fnv1a64(bundle.base_prompt);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(bundle.noisy_prompt, h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t instance_seed(std::uint64_t run_seed, const std::string& task_id,
                            const std::string& instance_id) {
  std::uint64_t h = fnv1a64(task_id, splitmix64(run_seed));
  h = fnv1a64("/", h);
  return splitmix64(fnv1a64(instance_id, h));
}

TaskOutcome evaluate_task(const Task& task, const Backend& base, const Backend* contrast,
                          const EvalSettings& settings) {
  TaskOutcome out;
  out.task_id = task.id;
  const std::optional<NoisySpec> noisy =
      uses_noisy_prompt(settings.decode.mode) ? settings.noisy : std::nullopt;

  for (const auto& inst : task.instances) {
    InstanceRecord rec;
    rec.task_id = task.id;
    rec.instance_id = inst.id;
    try {
      const PromptBundle bundle =
          assemble(task, inst, settings.shots, noisy, settings.prompt_template, settings.word_list);
      rec.prompt_hash = prompt_hash(bundle);
      DecodeConfig cfg = settings.decode;
      cfg.seed = instance_seed(settings.decode.seed, task.id, inst.id);
      DecodeResult res = decode(bundle, base, contrast, cfg);
      rec.scores = score_response(res.text, inst, task);
      rec.response = std::move(res.text);
      rec.steps = res.trace.per_step.size();
      rec.flips = res.trace.flips();
      rec.stopped_at_eos = res.trace.stopped_at_eos;
    } catch (const TransportError& e) {
      out.fatal_error = e.what();
      return out;
    } catch (const Error& e) {
      rec.error = e.what();
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::vector<TaskOutcome> evaluate(const std::vector<Task>& tasks, const Backend& base,
                                  const Backend* contrast, const EvalSettings& settings,
                                  const std::function<void(const TaskOutcome&)>& on_done) {
  std::vector<TaskOutcome> outcomes(tasks.size());
  std::atomic<bool> aborted{false};
  std::mutex done_mu;
  const int jobs = settings.jobs < 1 ? 1 : settings.jobs;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(tasks.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& slot = outcomes[static_cast<std::size_t>(i)];
    if (aborted.load()) {
      slot.task_id = tasks[static_cast<std::size_t>(i)].id;
      slot.fatal_error = "skipped";
      continue;
    }
    try {
      slot = evaluate_task(tasks[static_cast<std::size_t>(i)], base, contrast, settings);
    } catch (const std::exception& e) {
      slot.task_id = tasks[static_cast<std::size_t>(i)].id;
      slot.fatal_error = e.what();
    }
    if (slot.fatal_error) aborted.store(true);
    if (on_done) {
      std::lock_guard lock(done_mu);
      try {
        on_done(slot);
      } catch (...) {
        aborted.store(true);
      }
    }
  }
  return outcomes;
}

}  // namespace idec
