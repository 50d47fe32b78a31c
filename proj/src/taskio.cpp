#include "idec/taskio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "idec/errors.hpp"
#include "idec/rng.hpp"

namespace idec {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": key '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void validate(const Task& task) {
  if (task.definition.empty()) {
    throw ValidationError("task " + task.id + ": empty definition");
  }
  if (task.instances.empty()) {
    throw ValidationError("task " + task.id + ": no instances");
  }
  std::unordered_set<std::string> seen;
  for (const auto& inst : task.instances) {
    if (inst.references.empty()) {
      throw ValidationError("task " + task.id + ": instance " + inst.id +
                            " has no reference output");
    }
    if (!seen.insert(inst.id).second) {
      throw ValidationError("task " + task.id + ": duplicate instance id " + inst.id);
    }
  }
  if (task.expanded_labels) {
    if (!task.label_space) {
      throw ValidationError("task " + task.id + ": expanded labels without a label space");
    }
    for (const auto& [label, _] : *task.expanded_labels) {
      if (!task.label_space->contains(label)) {
        throw ValidationError("task " + task.id + ": expanded label '" + label +
                              "' is not in the label space");
      }
    }
  }
}

Task task_from_json(const json& doc, const std::string& id) {
  const std::string where = "task " + id;
  Task task;
  task.id = id;

  const json& defs = require(doc, "Definition", where);
  if (!defs.is_array() || defs.empty() || !defs.front().is_string()) {
    throw ParseError(where + ": 'Definition' must be a non-empty list of strings");
  }
  // Only the first (English) definition is used.
  task.definition = defs.front().get<std::string>();

  const json& pos = require(doc, "Positive Examples", where);
  if (!pos.is_array()) throw ParseError(where + ": 'Positive Examples' must be a list");
  for (const auto& ex : pos) {
    Demonstration d;
    d.input = require_string(ex, "input", where + " positive example");
    d.output = require_string(ex, "output", where + " positive example");
    if (ex.contains("explanation") && ex.at("explanation").is_string()) {
      d.explanation = ex.at("explanation").get<std::string>();
    }
    task.positive_examples.push_back(std::move(d));
  }

  const json& insts = require(doc, "Instances", where);
  if (!insts.is_array()) throw ParseError(where + ": 'Instances' must be a list");
  for (const auto& raw : insts) {
    Instance inst;
    inst.id = require_string(raw, "id", where + " instance");
    inst.input = require_string(raw, "input", where + " instance " + inst.id);
    const json& out = require(raw, "output", where + " instance " + inst.id);
    if (out.is_string()) {
      inst.references.push_back(out.get<std::string>());
    } else if (out.is_array()) {
      for (const auto& r : out) {
        if (!r.is_string()) throw ParseError(where + " instance " + inst.id + ": non-string output");
        inst.references.push_back(r.get<std::string>());
      }
    } else {
      throw ParseError(where + " instance " + inst.id + ": 'output' must be a list of strings");
    }
    task.instances.push_back(std::move(inst));
  }

  if (doc.contains("Categories") && doc.at("Categories").is_array() &&
      !doc.at("Categories").empty() && doc.at("Categories").front().is_string()) {
    task.category = doc.at("Categories").front().get<std::string>();
  }

  validate(task);
  return task;
}

json task_to_json(const Task& task) {
  json doc;
  doc["Definition"] = json::array({task.definition});
  json pos = json::array();
  for (const auto& d : task.positive_examples) {
    json ex{{"input", d.input}, {"output", d.output}};
    if (d.explanation) ex["explanation"] = *d.explanation;
    pos.push_back(std::move(ex));
  }
  doc["Positive Examples"] = std::move(pos);
  json insts = json::array();
  for (const auto& i : task.instances) {
    insts.push_back({{"id", i.id}, {"input", i.input}, {"output", i.references}});
  }
  doc["Instances"] = std::move(insts);
  if (task.category) doc["Categories"] = json::array({*task.category});
  return doc;
}

Task load_task(const std::filesystem::path& path, std::optional<std::size_t> max_instances) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  Task task = task_from_json(doc, path.stem().string());
  if (max_instances && task.instances.size() > *max_instances) {
    task.instances.resize(*max_instances);
  }
  return task;
}

std::vector<Task> load_tasks_dir(const std::filesystem::path& dir,
                                 std::optional<std::size_t> max_instances) {
  if (!std::filesystem::is_directory(dir)) {
    throw ParseError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Task> tasks;
  tasks.reserve(files.size());
  for (const auto& f : files) tasks.push_back(load_task(f, max_instances));
  return tasks;
}

Task select_instances(const Task& task, std::size_t n, std::optional<std::uint64_t> seed) {
  if (n == 0) throw ValidationError("select_instances: n must be >= 1");
  Task out = task;
  if (n >= task.instances.size()) return out;
  if (!seed) {
    out.instances.resize(n);
    return out;
  }
  // Partial Fisher-Yates over indices, then restore file order.
  std::vector<std::size_t> idx(task.instances.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(*seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_below(rng, idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  out.instances.clear();
  for (std::size_t i : idx) out.instances.push_back(task.instances[i]);
  return out;
}

LabelFixtureResult apply_label_fixture(const json& fixture, std::vector<Task> tasks) {
  if (!fixture.is_object()) throw ParseError("label fixture must be a JSON object");
  LabelFixtureResult result;
  for (const auto& [task_id, entry] : fixture.items()) {
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const Task& t) { return t.id == task_id; });
    if (it == tasks.end()) {
      result.warnings.push_back("label fixture references unknown task " + task_id);
      continue;
    }
    const std::string where = "label fixture entry " + task_id;
    const json& labels = require(entry, "labels", where);
    if (!labels.is_array()) throw ParseError(where + ": 'labels' must be a list");
    std::set<std::string> space;
    for (const auto& l : labels) space.insert(l.get<std::string>());
    if (space.empty()) throw ValidationError(where + ": empty label space");

    std::map<std::string, std::set<std::string>> expanded;
    if (entry.contains("expanded")) {
      for (const auto& [label, keywords] : entry.at("expanded").items()) {
        if (!space.contains(label)) {
          throw ValidationError(where + ": expanded label '" + label +
                                "' is not in the label space");
        }
        auto& set = expanded[label];
        for (const auto& k : keywords) set.insert(k.get<std::string>());
      }
    }
    it->label_space = std::move(space);
    if (!expanded.empty()) it->expanded_labels = std::move(expanded);
    validate(*it);
  }
  result.tasks = std::move(tasks);
  return result;
}

LabelFixtureResult load_label_fixture(const std::filesystem::path& path,
                                      std::vector<Task> tasks) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return apply_label_fixture(doc, std::move(tasks));
}

}  // namespace idec
