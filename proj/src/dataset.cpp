#include "prefixevo/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "prefixevo/error.hpp"
#include "prefixevo/text.hpp"

namespace prefixevo {

void to_json(nlohmann::json& j, const Constraint& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}};
  using K = Constraint::Kind;
  switch (c.kind) {
    case K::LowercaseOnly: break;
    case K::MustInclude:
      j["phrase"] = c.phrase;
      j["times"] = c.n;
      break;
    case K::MustExclude:
    case K::EndsWith: j["phrase"] = c.phrase; break;
    default: j["n"] = c.n;
  }
}

void from_json(const nlohmann::json& j, Constraint& c) {
  c.kind = parse_constraint_kind(j.at("kind").get<std::string>());
  c.phrase = j.value("phrase", std::string{});
  c.n = c.kind == Constraint::Kind::MustInclude ? j.value("times", 1) : j.value("n", 0);
  c.validate();
}

void to_json(nlohmann::json& j, const TaskItem& item) {
  j = nlohmann::json{{"id", item.id}};
  std::visit(
      [&](const auto& gold) {
        using T = std::decay_t<decltype(gold)>;
        if constexpr (std::is_same_v<T, ExactAnswer>) {
          j["task"] = "exact";
          j["query"] = item.query;
          j["answer"] = gold.value;
        } else if constexpr (std::is_same_v<T, MultipleChoice>) {
          j["task"] = "choice";
          j["query"] = item.query;
          j["answer"] = std::string(1, gold.letter);
        } else if constexpr (std::is_same_v<T, ConstraintSet>) {
          j["task"] = "constraints";
          j["query"] = item.query;
          j["constraints"] = gold;
        } else {
          j["task"] = "safety";
          j["query"] = item.query;
          j["label"] = gold == SafetyLabel::Safe ? "safe" : "unsafe";
        }
      },
      item.gold);
}

void from_json(const nlohmann::json& j, TaskItem& item) {
  item.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  item.query = j.at("query").get<std::string>();
  const auto task = text::to_lower(j.at("task").get<std::string>());
  if (task == "exact") {
    const auto& a = j.at("answer");
    item.gold = ExactAnswer{a.is_string() ? a.get<std::string>() : a.dump()};
  } else if (task == "choice") {
    auto a = text::to_upper(text::trim(j.at("answer").get<std::string>()));
    if (a.size() != 1 || a[0] < 'A' || a[0] > 'E') {
      fail(ErrorCode::DatasetError, "choice answer must be a letter A-E");
    }
    item.gold = MultipleChoice{a[0]};
  } else if (task == "constraints") {
    item.gold = j.at("constraints").get<ConstraintSet>();
  } else if (task == "safety") {
    const auto label = text::to_lower(j.at("label").get<std::string>());
    if (label != "safe" && label != "unsafe") {
      fail(ErrorCode::DatasetError, "safety label must be 'safe' or 'unsafe'");
    }
    item.gold = label == "safe" ? SafetyLabel::Safe : SafetyLabel::Unsafe;
  } else {
    fail(ErrorCode::DatasetError, "unknown task '" + task + "'");
  }
}

Dataset parse_dataset(std::string_view jsonl, std::string_view source) {
  Dataset ds;
  ds.id = text::sha256_hex(jsonl).substr(0, 16);
  ds.path = std::string(source);
  std::set<std::string> ids;
  int lineno = 0;
  for (auto line : text::split_lines(jsonl)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(lineno);
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::DatasetError, where + ": not a JSON object");
    TaskItem item;
    try {
      item = j.get<TaskItem>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::DatasetError, where + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::DatasetError, where + ": " + e.what());
    }
    if (!ids.insert(item.id).second) fail(ErrorCode::DatasetError, where + ": duplicate id " + item.id);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto ds = parse_dataset(buf.str(), path.string());
  ds.path = path;
  return ds;
}

std::string dump_jsonl(const std::vector<TaskItem>& items) {
  std::string out;
  for (const auto& item : items) {
    out += nlohmann::json(item).dump();
    out += '\n';
  }
  return out;
}

void check_dataset_task(const Dataset& ds, TaskKind task) {
  if (ds.items.empty()) fail(ErrorCode::DatasetError, ds.path.string() + " holds no items");
  for (const auto& item : ds.items) {
    const auto kind = gold_kind(item.gold);
    bool ok = false;
    switch (task) {
      case TaskKind::EfficientReasoning:
      case TaskKind::Logic: ok = kind == GoldKind::Exact || kind == GoldKind::Choice; break;
      case TaskKind::InstructionFollowing: ok = kind == GoldKind::Constraints; break;
      case TaskKind::Safety: ok = kind == GoldKind::Safety; break;
    }
    if (!ok) {
      fail(ErrorCode::DatasetError, "item " + item.id + " does not fit task " +
                                        std::string(to_string(task)));
    }
  }
}

DatasetSplit split_dataset(const std::vector<TaskItem>& items, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(ErrorCode::DomainError, "split fraction must lie in (0, 1)");
  }
  if (items.size() < 2) fail(ErrorCode::DomainError, "splitting needs at least 2 items");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  text::shuffle(order, rng);
  // 0.2 * 10 must give 2, not 3, so shave floating-point noise before the ceiling.
  auto n_val = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(items.size()) - 1e-9));
  n_val = std::clamp<std::size_t>(n_val, 1, items.size() - 1);
  DatasetSplit out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_val ? out.validation : out.test).push_back(items[order[k]]);
  }
  return out;
}

}  // namespace prefixevo
