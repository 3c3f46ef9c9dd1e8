#include "cascade/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cascade/csv.hpp"
#include "cascade/errors.hpp"
#include "cascade/rng.hpp"

namespace cascade {

namespace fs = std::filesystem;
using nlohmann::json;

Corpus::Corpus(std::vector<Document> documents, std::vector<std::string> classes)
    : documents_(std::move(documents)), classes_(std::move(classes)) {
  if (classes_.empty()) throw InputError("corpus has no classes");
  std::unordered_set<std::string> seen_classes;
  for (const auto& c : classes_) {
    if (!seen_classes.insert(c).second) throw InputError(fmt::format("duplicate class name '{}'", c));
  }
  std::unordered_set<std::string> seen_ids;
  for (const auto& d : documents_) {
    if (!seen_ids.insert(d.id).second) throw InputError(fmt::format("duplicate document id '{}'", d.id));
    if (d.label && *d.label >= classes_.size()) {
      throw InputError(fmt::format("document '{}' has label {} outside {} classes", d.id, *d.label,
                                   classes_.size()));
    }
  }
}

std::optional<ClassIndex> Corpus::class_index(std::string_view name) const {
  const auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) return std::nullopt;
  return static_cast<ClassIndex>(it - classes_.begin());
}

bool Corpus::fully_labeled() const {
  return std::all_of(documents_.begin(), documents_.end(), [](const Document& d) { return d.label.has_value(); });
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) out.push_back(d.id);
  return out;
}

std::vector<ClassIndex> Corpus::labels() const {
  std::vector<ClassIndex> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) {
    if (!d.label) throw InputError(fmt::format("document '{}' is unlabeled", d.id));
    out.push_back(*d.label);
  }
  return out;
}

Corpus Corpus::subset(const std::vector<std::size_t>& positions) const {
  std::vector<Document> docs;
  docs.reserve(positions.size());
  for (const auto p : positions) docs.push_back(documents_.at(p));
  return Corpus(std::move(docs), classes_);
}

namespace {

struct RawRecord {
  std::string id;
  std::string text;
  std::optional<std::string> label;
  std::size_t line;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<RawRecord> parse_jsonl(const std::string& text) {
  std::vector<RawRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(fmt::format("line {}: malformed JSON ({})", lineno, e.what()));
    }
    if (!obj.is_object()) throw InputError(fmt::format("line {}: expected a JSON object", lineno));
    if (!obj.contains("id") || !obj["id"].is_string()) {
      throw InputError(fmt::format("line {}: missing string field 'id'", lineno));
    }
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw InputError(fmt::format("line {}: missing string field 'text'", lineno));
    }
    RawRecord rec{obj["id"].get<std::string>(), obj["text"].get<std::string>(), std::nullopt, lineno};
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw InputError(fmt::format("line {}: 'label' must be a string", lineno));
      rec.label = obj["label"].get<std::string>();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawRecord> parse_csv(const std::string& text) {
  auto rows = csv::parse(text);
  if (rows.empty()) return {};
  const auto& header = rows.front().fields;
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column("id");
  const auto text_col = column("text");
  const auto label_col = column("label");
  if (!id_col || !text_col) throw InputError("csv header must contain 'id' and 'text' columns");

  std::vector<RawRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw InputError(fmt::format("line {}: expected {} fields, found {}", row.line, header.size(),
                                   row.fields.size()));
    }
    RawRecord rec{row.fields[*id_col], row.fields[*text_col], std::nullopt, row.line};
    if (rec.id.empty()) throw InputError(fmt::format("line {}: empty id", row.line));
    if (label_col && !row.fields[*label_col].empty()) rec.label = row.fields[*label_col];
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<std::string> read_classes(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("'{}': malformed classes file ({})", path.string(), e.what()));
  }
  if (!j.is_array()) throw InputError(fmt::format("'{}': expected an array of class names", path.string()));
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw InputError(fmt::format("'{}': class names must be strings", path.string()));
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

CorpusFormat format_from_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return CorpusFormat::csv;
  if (ext == ".jsonl" || ext == ".json") return CorpusFormat::jsonl;
  throw InputError(fmt::format("cannot infer corpus format from '{}'", path.string()));
}

Corpus load_corpus(const fs::path& path, CorpusFormat format, const LoadOptions& options) {
  const std::string text = read_file(path);
  auto records = format == CorpusFormat::jsonl ? parse_jsonl(text) : parse_csv(text);
  if (records.empty()) throw InputError(fmt::format("'{}': empty corpus", path.string()));

  std::vector<std::string> classes;
  bool declared = true;
  if (options.classes) {
    classes = *options.classes;
  } else {
    fs::path sidecar = options.classes_path.value_or(path.parent_path() / "classes.json");
    if (fs::exists(sidecar)) {
      classes = read_classes(sidecar);
    } else {
      declared = false;
      for (const auto& r : records) {
        if (r.label && std::find(classes.begin(), classes.end(), *r.label) == classes.end()) {
          classes.push_back(*r.label);
        }
      }
      if (classes.empty()) throw InputError(fmt::format("'{}': no class list and no labels", path.string()));
      fmt::print(stderr, "warning: '{}': no classes.json; inferred class order [{}]\n", path.string(),
                 fmt::join(classes, ", "));
    }
  }

  std::unordered_set<std::string> ids;
  std::vector<Document> docs;
  docs.reserve(records.size());
  for (auto& r : records) {
    if (!ids.insert(r.id).second) throw InputError(fmt::format("line {}: duplicate id '{}'", r.line, r.id));
    Document d{std::move(r.id), std::move(r.text), std::nullopt};
    if (r.label) {
      const auto it = std::find(classes.begin(), classes.end(), *r.label);
      if (it == classes.end()) {
        throw InputError(fmt::format("record '{}' (line {}): label '{}' not in {} classes [{}]", d.id, r.line,
                                     *r.label, declared ? "declared" : "inferred", fmt::join(classes, ", ")));
      }
      d.label = static_cast<ClassIndex>(it - classes.begin());
    }
    docs.push_back(std::move(d));
  }
  return Corpus(std::move(docs), std::move(classes));
}

void write_corpus_jsonl(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& d : corpus.documents()) {
    json j{{"id", d.id}, {"text", d.text}};
    if (d.label) j["label"] = corpus.classes()[*d.label];
    out << j.dump() << '\n';
  }
}

void write_classes_json(const std::vector<std::string>& classes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << json(classes).dump() << '\n';
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const Corpus& corpus) {
  std::vector<std::vector<std::size_t>> members(corpus.class_count());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus[i];
    if (!d.label) throw InputError(fmt::format("document '{}' is unlabeled; folds need labels", d.id));
    members[*d.label].push_back(i);
  }
  return members;
}

constexpr std::uint64_t kFoldStream = 0x666f6c64;        // "fold"
constexpr std::uint64_t kValidationStream = 0x76616c69;  // "vali"

}  // namespace

FoldPlan stratified_folds(const Corpus& corpus, std::uint32_t k, std::uint64_t seed) {
  if (k < 2) throw InputError(fmt::format("fold count must be >= 2, got {}", k));
  auto members = members_by_class(corpus);
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty() && members[c].size() < k) {
      throw InputError(fmt::format("class '{}' has {} documents, fewer than k={}", corpus.classes()[c],
                                   members[c].size(), k));
    }
  }

  FoldPlan plan{k, seed, std::vector<std::uint32_t>(corpus.size(), 0)};
  std::size_t offset = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& idx = members[c];
    Xoshiro256StarStar rng(derive_seed(seed, {kFoldStream, c}));
    shuffle(std::span<std::size_t>(idx), rng);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      plan.assignment[idx[j]] = static_cast<std::uint32_t>((offset + j) % k);
    }
    offset = (offset + idx.size()) % k;
  }
  return plan;
}

Split split(const Corpus& corpus, const FoldPlan& plan, std::uint32_t test_fold, double validation_fraction) {
  if (test_fold >= plan.k) throw InputError(fmt::format("test fold {} out of range for k={}", test_fold, plan.k));
  if (plan.assignment.size() != corpus.size()) throw InputError("fold plan does not match corpus size");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InputError(fmt::format("validation fraction must lie in (0,1), got {}", validation_fraction));
  }

  Split out;
  std::vector<std::vector<std::size_t>> pool(corpus.class_count());
  std::size_t pool_size = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (plan.assignment[i] == test_fold) {
      out.test.push_back(i);
      continue;
    }
    const auto& d = corpus[i];
    if (!d.label) throw InputError(fmt::format("document '{}' is unlabeled", d.id));
    pool[*d.label].push_back(i);
    ++pool_size;
  }

  // Largest-remainder quotas: total is exactly round(fraction * pool size).
  const auto target = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(pool_size)));
  std::vector<std::size_t> quota(pool.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < pool.size(); ++c) {
    const double exact = validation_fraction * static_cast<double>(pool[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r) {
    const auto c = remainders[r].second;
    if (quota[c] < pool[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<char> is_validation(corpus.size(), 0);
  for (std::size_t c = 0; c < pool.size(); ++c) {
    if (pool[c].empty()) continue;
    if (quota[c] >= pool[c].size()) {
      throw InputError(fmt::format("validation fraction {} leaves class '{}' empty in train (fold {})",
                                   validation_fraction, corpus.classes()[c], test_fold));
    }
    auto idx = pool[c];
    Xoshiro256StarStar rng(derive_seed(plan.seed, {kValidationStream, test_fold, c}));
    shuffle(std::span<std::size_t>(idx), rng);
    for (std::size_t j = 0; j < quota[c]; ++j) is_validation[idx[j]] = 1;
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (plan.assignment[i] == test_fold) continue;
    (is_validation[i] ? out.validation : out.train).push_back(i);
  }
  return out;
}

}  // namespace cascade
