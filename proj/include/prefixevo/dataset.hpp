#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prefixevo/evaluators.hpp"

namespace prefixevo {

// One JSON object per line:
//   {"id": "m1", "task": "exact", "query": "...", "answer": "42"}
//   {"id": "q1", "task": "choice", "query": "...", "answer": "B"}
//   {"id": "i1", "task": "constraints", "query": "...",
//    "constraints": [{"kind": "must_include", "phrase": "vote", "times": 2}]}
//   {"id": "s1", "task": "safety", "query": "...", "label": "unsafe"}

void to_json(nlohmann::json& j, const Constraint& c);
void from_json(const nlohmann::json& j, Constraint& c);
void to_json(nlohmann::json& j, const TaskItem& item);
void from_json(const nlohmann::json& j, TaskItem& item);

struct Dataset {
  std::string id;  ///< digest of the file contents
  std::filesystem::path path;
  std::vector<TaskItem> items;
};

Dataset parse_dataset(std::string_view jsonl, std::string_view source = "<memory>");
Dataset load_dataset(const std::filesystem::path& path);
std::string dump_jsonl(const std::vector<TaskItem>& items);

/// DatasetError unless every item's gold form fits `task`.
void check_dataset_task(const Dataset& ds, TaskKind task);

struct DatasetSplit {
  std::vector<TaskItem> validation;
  std::vector<TaskItem> test;
};

/// Seeded shuffle, then the first ceil(fraction * N) items form the validation split.
DatasetSplit split_dataset(const std::vector<TaskItem>& items, double fraction = 0.2,
                           std::uint64_t seed = 0);

}  // namespace prefixevo
