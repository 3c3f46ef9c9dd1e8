#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cascade {

using ClassIndex = std::uint32_t;

struct Document {
  std::string id;
  std::string text;
  std::optional<ClassIndex> label;
};

/// Ordered labeled documents plus the ordered class vocabulary.
/// Construction validates unique ids, unique class names and label range.
class Corpus {
 public:
  Corpus(std::vector<Document> documents, std::vector<std::string> classes);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return documents_.size(); }
  std::size_t class_count() const { return classes_.size(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  std::optional<ClassIndex> class_index(std::string_view name) const;
  bool fully_labeled() const;

  std::vector<std::string> ids() const;
  /// Labels of every document; throws InputError if any is missing.
  std::vector<ClassIndex> labels() const;

  /// Documents at the given positions, same class vocabulary.
  Corpus subset(const std::vector<std::size_t>& positions) const;

 private:
  std::vector<Document> documents_;
  std::vector<std::string> classes_;
};

enum class CorpusFormat { jsonl, csv };

struct LoadOptions {
  /// Explicit class order. When absent a `classes.json` next to the corpus
  /// is used, otherwise classes are inferred in first-seen order.
  std::optional<std::vector<std::string>> classes;
  std::optional<std::filesystem::path> classes_path;
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LoadOptions& options = {});

/// Picks the format from the file extension (.jsonl/.json vs .csv).
CorpusFormat format_from_path(const std::filesystem::path& path);

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
void write_classes_json(const std::vector<std::string>& classes, const std::filesystem::path& path);

struct FoldPlan {
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> assignment;  // fold per document, corpus order

  bool operator==(const FoldPlan&) const = default;
};

/// Stratified k-fold assignment. Each class is shuffled with xoshiro256**
/// seeded from (seed, class index), then dealt round-robin starting at the
/// fold after the previous class's last one so fold totals stay balanced.
FoldPlan stratified_folds(const Corpus& corpus, std::uint32_t k, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

inline constexpr double kDefaultValidationFraction = 0.1;

/// Test = documents of `test_fold`; validation = a stratified
/// `validation_fraction` of the rest (largest-remainder per-class quotas);
/// train = remainder. Returned positions are in corpus order.
Split split(const Corpus& corpus, const FoldPlan& plan, std::uint32_t test_fold,
            double validation_fraction = kDefaultValidationFraction);

}  // namespace cascade
