#include "idec/runner.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "idec/errors.hpp"
#include "idec/evaluate.hpp"
#include "idec/remote_backend.hpp"
#include "idec/taskio.hpp"
#include "idec/toy_backends.hpp"

namespace idec {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

// Writes each task's lines in task order, as soon as every earlier task is
// done. Calls are serialized by the caller.
class OrderedJsonlWriter {
 public:
  OrderedJsonlWriter(const fs::path& path, std::size_t n_tasks)
      : out_(path, std::ios::binary | std::ios::trunc), slots_(n_tasks) {
    if (!out_) throw Error("cannot write " + path.string());
  }

  void complete(std::size_t index, std::vector<std::string> lines) {
    slots_[index] = std::move(lines);
    while (next_ < slots_.size() && slots_[next_]) flush_slot(next_++);
  }

  // Marks a task as failed so later tasks are not held back by it.
  void fail(std::size_t index) {
    slots_[index] = std::vector<std::string>{};
    while (next_ < slots_.size() && slots_[next_]) flush_slot(next_++);
  }

  // Writes any completed tasks still waiting on an unfinished earlier one.
  void drain() {
    for (std::size_t i = next_; i < slots_.size(); ++i) {
      if (slots_[i]) flush_slot(i);
    }
    next_ = slots_.size();
    out_.flush();
  }

 private:
  void flush_slot(std::size_t i) {
    for (const auto& line : *slots_[i]) out_ << line << '\n';
    out_.flush();
  }

  std::ofstream out_;
  std::vector<std::optional<std::vector<std::string>>> slots_;
  std::size_t next_ = 0;
};

struct PriorTask {
  std::vector<std::string> lines;
  std::vector<InstanceRecord> records;
};

// Reads an earlier responses.jsonl and returns the tasks whose records cover
// exactly their selected instances, in order.
std::map<std::string, PriorTask> load_completed(const fs::path& jsonl,
                                                const std::vector<Task>& tasks) {
  std::map<std::string, PriorTask> by_task;
  if (!fs::exists(jsonl)) return by_task;
  std::istringstream in(read_file(jsonl));
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // last line lacks its newline: interrupted write
    InstanceRecord rec;
    try {
      rec = InstanceRecord::from_json(json::parse(line));
    } catch (const std::exception&) {
      continue;
    }
    auto& pt = by_task[rec.task_id];
    pt.lines.push_back(line);
    pt.records.push_back(std::move(rec));
  }
  std::map<std::string, PriorTask> done;
  for (const auto& t : tasks) {
    auto it = by_task.find(t.id);
    if (it == by_task.end() || it->second.records.size() != t.instances.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < t.instances.size(); ++i) {
      match = match && it->second.records[i].instance_id == t.instances[i].id;
    }
    if (match) done.emplace(t.id, std::move(it->second));
  }
  return done;
}

std::vector<Task> prepare_tasks(const RunSpec& spec, std::ostream& log) {
  std::vector<Task> tasks = load_tasks_dir(spec.tasks_dir);
  for (auto& t : tasks) t = select_instances(t, spec.instances_per_task, spec.instance_seed);
  if (spec.labels_fixture) {
    auto res = load_label_fixture(*spec.labels_fixture, std::move(tasks));
    for (const auto& w : res.warnings) log << "warning: " << w << '\n';
    tasks = std::move(res.tasks);
  }
  if (tasks.empty()) throw ConfigError("no task files found in " + spec.tasks_dir.string());
  for (const auto& t : tasks) {
    if (spec.shots > t.positive_examples.size()) {
      throw ConfigError("task " + t.id + " has only " + std::to_string(t.positive_examples.size()) +
                        " positive examples; --shots " + std::to_string(spec.shots) + " requested");
    }
  }
  return tasks;
}

EvalSettings make_settings(const RunSpec& spec) {
  EvalSettings s;
  s.decode = spec.decode;
  s.noisy = spec.noisy;
  s.shots = spec.shots;
  s.prompt_template = template_by_name(spec.template_name);
  if (spec.noisy && spec.noisy->kind == NoisyKind::rand_words) {
    s.word_list = load_word_list(spec.word_list);
  }
  s.jobs = spec.jobs;
  return s;
}

}  // namespace

std::string format_number(double v) { return json(v).dump(); }

double default_epsilon(std::size_t shots) { return shots > 0 ? 0.2 : 0.3; }

void RunSpec::validate() const {
  if (tasks_dir.empty()) throw ConfigError("--tasks is required");
  if (backend.empty()) throw ConfigError("--backend is required");
  if (report_dir.empty()) throw ConfigError("--report is required");
  if (instances_per_task < 1) throw ConfigError("--instances-per-task must be >= 1");
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  decode.validate();
  if (needs_amateur(decode.mode) != amateur_backend.has_value()) {
    throw ConfigError(needs_amateur(decode.mode)
                          ? "mode " + to_string(decode.mode) + " requires --amateur-backend"
                          : "--amateur-backend is only valid for cd and id_amateur modes");
  }
  if (uses_noisy_prompt(decode.mode) && !noisy) {
    throw ConfigError("mode " + to_string(decode.mode) + " requires --noisy");
  }
  if (noisy) {
    try {
      noisy->validate();
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  template_by_name(template_name);
}

json RunSpec::to_json() const {
  json j{{"tasks_dir", tasks_dir.generic_string()},
         {"instances_per_task", instances_per_task},
         {"instance_seed", instance_seed ? json(*instance_seed) : json(nullptr)},
         {"labels_fixture", labels_fixture ? json(labels_fixture->generic_string()) : json(nullptr)},
         {"template", template_name},
         {"shots", shots},
         {"decode", decode.to_json()},
         {"noisy", noisy ? noisy->to_json() : json(nullptr)},
         {"backend", backend},
         {"amateur_backend", amateur_backend ? json(*amateur_backend) : json(nullptr)},
         {"jobs", jobs}};
  if (noisy && noisy->kind == NoisyKind::rand_words) j["word_list"] = word_list.generic_string();
  return j;
}

std::shared_ptr<const Backend> make_backend(const std::string& spec) {
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    return std::make_shared<RemoteBackend>(spec);
  }
  if (spec == "toy:hash") return std::make_shared<HashLM>();
  if (spec.rfind("toy:hash:", 0) == 0) {
    try {
      return std::make_shared<HashLM>(std::stoull(spec.substr(9)));
    } catch (const std::logic_error&) {
      throw ConfigError("bad hash seed in backend spec: " + spec);
    }
  }
  if (spec.rfind("toy:echo:", 0) == 0) return std::make_shared<EchoLM>(spec.substr(9));
  if (spec.rfind("toy:biased:", 0) == 0) {
    return std::make_shared<BiasedInstructionLM>(BiasedLMConfig::load(spec.substr(11)));
  }
  throw ConfigError("unrecognized backend: " + spec);
}

ReportPaths::ReportPaths(const fs::path& dir)
    : result_json(dir / "result.json"),
      scores_csv(dir / "scores.csv"),
      responses_jsonl(dir / "responses.jsonl"),
      manifest_json(dir / "manifest.json") {}

int run(const RunSpec& spec, std::ostream& log) {
  std::shared_ptr<const Backend> base, amateur;
  try {
    spec.validate();
    base = make_backend(spec.backend);
    if (spec.amateur_backend) amateur = make_backend(*spec.amateur_backend);
  } catch (const ConnectivityError& e) {
    log << "error: " << e.what() << '\n';
    return kExitRunError;
  } catch (const Error& e) {
    log << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  return run_with_backends(spec, std::move(base), std::move(amateur), log);
}

int run_with_backends(const RunSpec& spec, std::shared_ptr<const Backend> base,
                      std::shared_ptr<const Backend> amateur, std::ostream& log) {
  std::vector<Task> tasks;
  EvalSettings settings;
  try {
    spec.validate();
    tasks = prepare_tasks(spec, log);
    settings = make_settings(spec);
    if (amateur) check_compatible(*base, *amateur);
  } catch (const Error& e) {
    log << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    fs::create_directories(spec.report_dir);
    const ReportPaths paths(spec.report_dir);

    std::map<std::string, PriorTask> prior;
    if (spec.resume) prior = load_completed(paths.responses_jsonl, tasks);

    std::vector<Task> pending;
    std::vector<std::size_t> pending_index;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (!prior.contains(tasks[i].id)) {
        pending.push_back(tasks[i]);
        pending_index.push_back(i);
      }
    }
    if (spec.resume) {
      log << "resume: " << prior.size() << " of " << tasks.size() << " tasks already complete\n";
    }

    OrderedJsonlWriter writer(paths.responses_jsonl, tasks.size());
    std::mutex writer_mu;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto it = prior.find(tasks[i].id);
      if (it != prior.end()) writer.complete(i, it->second.lines);
    }

    std::map<std::string, std::size_t> position;
    for (std::size_t k = 0; k < pending.size(); ++k) position[pending[k].id] = pending_index[k];

    const Backend* contrast = amateur.get();
    auto outcomes = evaluate(pending, *base, contrast, settings, [&](const TaskOutcome& o) {
      std::lock_guard lock(writer_mu);
      const std::size_t idx = position.at(o.task_id);
      if (o.fatal_error) {
        writer.fail(idx);
        return;
      }
      std::vector<std::string> lines;
      lines.reserve(o.records.size());
      for (const auto& r : o.records) lines.push_back(r.to_jsonl());
      writer.complete(idx, std::move(lines));
    });
    writer.drain();

    // Merge prior and fresh outcomes back into task order.
    std::vector<TaskOutcome> all(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto it = prior.find(tasks[i].id);
      if (it != prior.end()) all[i] = {tasks[i].id, std::move(it->second.records), std::nullopt};
    }
    for (std::size_t k = 0; k < outcomes.size(); ++k) all[pending_index[k]] = std::move(outcomes[k]);

    json completed = json::array(), failed = json::array(), skipped = json::array();
    for (const auto& o : all) {
      if (!o.fatal_error) {
        completed.push_back(o.task_id);
      } else if (*o.fatal_error == "skipped") {
        skipped.push_back(o.task_id);
      } else {
        failed.push_back({{"task_id", o.task_id}, {"error", *o.fatal_error}});
      }
    }

    if (!failed.empty() || !skipped.empty()) {
      const json manifest{{"completed", completed}, {"failed", failed}, {"skipped", skipped},
                          {"config", spec.to_json()}};
      write_file_atomic(paths.manifest_json, manifest.dump(2) + "\n");
      for (const auto& f : failed) {
        log << "error: task " << f.at("task_id").get<std::string>() << ": "
            << f.at("error").get<std::string>() << '\n';
      }
      log << "partial report: " << completed.size() << " of " << all.size()
          << " tasks completed; see " << paths.manifest_json.string() << '\n';
      return kExitRunError;
    }

    if (fs::exists(paths.manifest_json)) fs::remove(paths.manifest_json);
    const RunResult result = make_run_result(all, spec.to_json());
    write_file_atomic(paths.result_json, result.to_json().dump(2) + "\n");
    write_file_atomic(paths.scores_csv, result.to_csv());

    std::size_t errors = 0;
    for (const auto& [_, ts] : result.per_task) errors += ts.n_errors;
    log << "tasks: " << result.per_task.size() << "  overall rouge_l: "
        << format_number(result.overall.rouge_l) << "  instance errors: " << errors << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRunError;
  }
}

int sweep(const RunSpec& spec, const EpsilonGrid& grid, std::ostream& log) {
  std::vector<double> values;
  std::shared_ptr<const Backend> base, amateur;
  try {
    spec.validate();
    if (spec.decode.mode != DecodeMode::id && spec.decode.mode != DecodeMode::id_amateur) {
      throw ConfigError("sweep requires --mode id or id_amateur");
    }
    values = epsilon_values(grid);
    base = make_backend(spec.backend);
    if (spec.amateur_backend) amateur = make_backend(*spec.amateur_backend);
  } catch (const ConnectivityError& e) {
    log << "error: " << e.what() << '\n';
    return kExitRunError;
  } catch (const Error& e) {
    log << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (base->deterministic()) base = std::make_shared<CachingBackend>(base);
  if (amateur && amateur->deterministic()) amateur = std::make_shared<CachingBackend>(amateur);

  try {
    fs::create_directories(spec.report_dir);
    const fs::path csv = spec.report_dir / "sweep.csv";

    std::map<std::string, std::string> kept;
    if (spec.resume && fs::exists(csv)) {
      std::istringstream in(read_file(csv));
      std::string line;
      bool header = true;
      while (std::getline(in, line)) {
        if (in.eof()) break;  // partial trailing row
        if (header) {
          header = false;
          continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma + 1 >= line.size()) continue;
        kept.emplace(line.substr(0, comma), line.substr(comma + 1));
      }
    }

    std::string rows = "epsilon,overall_rouge_l\n";
    write_file_atomic(csv, rows);
    for (double e : values) {
      const std::string key = format_number(e);
      auto it = kept.find(key);
      std::string value;
      if (it != kept.end()) {
        value = it->second;
      } else {
        RunSpec point = spec;
        point.decode.epsilon = e;
        point.report_dir = spec.report_dir / ("eps_" + key);
        const int rc = run_with_backends(point, base, amateur, log);
        if (rc != kExitOk) {
          log << "sweep stopped at epsilon " << key << '\n';
          return rc;
        }
        const json result = json::parse(read_file(ReportPaths(point.report_dir).result_json));
        value = format_number(result.at("overall").at("rouge_l").get<double>());
      }
      rows += key + "," + value + "\n";
      write_file_atomic(csv, rows);
    }
    log << "sweep: " << values.size() << " grid points written to " << csv.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRunError;
  }
}

}  // namespace idec
