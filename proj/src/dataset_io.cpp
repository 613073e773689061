#include "paretohqd/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace paretohqd {

namespace {

// nlohmann rejects bare NaN/Infinity, which would otherwise surface as a
// generic syntax error.
bool has_bare_nonfinite_literal(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      continue;
    }
    for (std::string_view lit : {"NaN", "nan", "Infinity", "inf"}) {
      if (line.substr(i, lit.size()) == lit) return true;
    }
  }
  return false;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

const std::string& required_string(const nlohmann::ordered_json& j,
                                   const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw DataError(std::string("missing or non-string field '") + key + "'");
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

ScoredExample example_from_json(const nlohmann::ordered_json& j,
                                std::size_t objective_count) {
  if (!j.is_object()) throw DataError("record is not an object");
  ScoredExample ex;
  ex.id = required_string(j, "id");
  ex.prompt = required_string(j, "prompt");
  ex.response = required_string(j, "response");
  if (auto it = j.find("rewards"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw DataError("'rewards' must be an array");
    std::vector<double> values;
    for (const auto& v : *it) {
      if (!v.is_number()) throw DataError("non-numeric reward");
      values.push_back(v.get<double>());
    }
    if (values.size() != objective_count) {
      throw ArityError("reward arity mismatch for id '" + ex.id +
                       "': expected " + std::to_string(objective_count) +
                       ", got " + std::to_string(values.size()));
    }
    try {
      ex.rewards = RewardVector(std::move(values));
    } catch (const DataError&) {
      throw DataError("non-finite reward");
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key != "id" && key != "prompt" && key != "response" && key != "rewards") {
      ex.extra[key] = it.value();
    }
  }
  return ex;
}

nlohmann::ordered_json example_to_json(const ScoredExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["prompt"] = ex.prompt;
  j["response"] = ex.response;
  if (ex.rewards) {
    j["rewards"] = std::vector<double>(ex.rewards->begin(), ex.rewards->end());
  }
  for (auto it = ex.extra.begin(); it != ex.extra.end(); ++it) {
    j[it.key()] = it.value();
  }
  return j;
}

Dataset ingest_dataset(std::istream& in, std::vector<std::string> objective_names) {
  Dataset d(std::move(objective_names));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::string where = " at line " + std::to_string(line_no);
    if (has_bare_nonfinite_literal(line)) throw DataError("non-finite reward" + where);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("malformed record" + where + ": " + e.what());
    }
    try {
      d.add(example_from_json(j, d.objective_count()));
    } catch (const ArityError& e) {
      throw ArityError(e.what() + where);
    } catch (const DataError& e) {
      throw DataError(e.what() + where);
    }
  }
  return d;
}

Dataset ingest_dataset(std::istream& in, std::size_t objective_count) {
  return ingest_dataset(in, Dataset::with_objectives(objective_count).objective_names());
}

Dataset read_dataset_file(const std::filesystem::path& path,
                          std::vector<std::string> objective_names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return ingest_dataset(in, std::move(objective_names));
}

Dataset read_dataset_file(const std::filesystem::path& path,
                          std::size_t objective_count) {
  return read_dataset_file(
      path, Dataset::with_objectives(objective_count).objective_names());
}

void write_dataset(std::ostream& out, const Dataset& d) {
  for (const auto& ex : d.examples()) out << example_to_json(ex).dump() << '\n';
}

void write_dataset_file(const std::filesystem::path& path, const Dataset& d) {
  std::ostringstream os;
  write_dataset(os, d);
  write_file_atomic(path, os.str());
}

nlohmann::ordered_json bounds_to_json(const RewardBounds& b) {
  nlohmann::ordered_json j;
  j["min"] = std::vector<double>(b.min.begin(), b.min.end());
  j["max"] = std::vector<double>(b.max.begin(), b.max.end());
  return j;
}

RewardBounds bounds_from_json(const nlohmann::ordered_json& j) {
  RewardBounds b{RewardVector(j.at("min").get<std::vector<double>>()),
                 RewardVector(j.at("max").get<std::vector<double>>())};
  require_same_arity(b.min.size(), b.max.size(), "bounds");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.min[i] > b.max[i]) throw DataError("bounds min exceeds max");
  }
  return b;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace paretohqd
