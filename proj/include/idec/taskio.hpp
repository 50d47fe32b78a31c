#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace idec {

struct Demonstration {
  std::string input;
  std::string output;
  std::optional<std::string> explanation;

  bool operator==(const Demonstration&) const = default;
};

struct Instance {
  std::string id;
  std::string input;
  std::vector<std::string> references;

  bool operator==(const Instance&) const = default;
};

// One benchmark task in SupNatInst layout. `definition` is the instruction
// the model is conditioned on; the label fields are only set for
// classification tasks listed in a label fixture.
struct Task {
  std::string id;
  std::string definition;
  std::vector<Demonstration> positive_examples;
  std::vector<Instance> instances;
  std::optional<std::string> category;
  std::optional<std::set<std::string>> label_space;
  std::optional<std::map<std::string, std::set<std::string>>> expanded_labels;

  bool operator==(const Task&) const = default;
};

// Throws ValidationError when an invariant of Task/Instance is broken.
void validate(const Task& task);

// Builds a Task from a parsed task document. `id` is usually the file stem.
Task task_from_json(const nlohmann::json& doc, const std::string& id);

// Inverse of task_from_json for the fields the loader reads.
nlohmann::json task_to_json(const Task& task);

// Loads a task file. The task id is the file stem. With `max_instances`
// set, only the first that-many instances in file order are kept.
Task load_task(const std::filesystem::path& path,
               std::optional<std::size_t> max_instances = std::nullopt);

// Every *.json file in `dir`, ordered by file name.
std::vector<Task> load_tasks_dir(const std::filesystem::path& dir,
                                 std::optional<std::size_t> max_instances = std::nullopt);

// First n instances in file order, or a seeded uniform sample without
// replacement (kept in file order) when a seed is given.
Task select_instances(const Task& task, std::size_t n,
                      std::optional<std::uint64_t> seed = std::nullopt);

struct LabelFixtureResult {
  std::vector<Task> tasks;
  std::vector<std::string> warnings;
};

// Applies a label fixture (task id -> {"labels": [...], "expanded": {...}})
// to `tasks`. Unknown task ids produce warnings rather than errors.
LabelFixtureResult apply_label_fixture(const nlohmann::json& fixture,
                                       std::vector<Task> tasks);

LabelFixtureResult load_label_fixture(const std::filesystem::path& path,
                                      std::vector<Task> tasks);

// Reads a whole file; throws ParseError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace idec
