#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/corpus.hpp"

namespace cascade {

class CompletionBackend;

/// Few-shot classification prompt. Rendered shape:
///
///   <instruction with {classes} replaced by "a or b">\n
///   <input> exemplar text\n<output> exemplar class.\n     (per exemplar)
///   <input> evaluated text\n<output>
struct PromptTemplate {
  std::string instruction = "Classify the sentiment of the following text in the input tag as {classes}:";
  std::vector<std::pair<std::string, std::string>> exemplars = {{"I love you.", "positive"},
                                                                {"The product is bad.", "negative"}};
  std::string input_tag = "<input>";
  std::string output_tag = "<output>";

  static PromptTemplate zero_shot();
};

std::string render_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& classes,
                          std::string_view text);

enum class BackendKind { mock, replay, http };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::replay;
  std::string endpoint;  // http: full URL, e.g. http://localhost:8000/v1/completions
  std::string model;     // http: forwarded as the "model" request field
  std::string response_path = "choices[0].text";
  std::uint32_t max_tokens = 2048;
  double temperature = 1.0;
  std::chrono::milliseconds timeout{60000};
  std::uint32_t max_retries = 2;
  std::uint32_t max_concurrent = 4;
  std::chrono::milliseconds retry_backoff{200};
  std::filesystem::path cassette;  // replay
  std::string mock_completion;     // mock: constant answer

  /// Throws InputError when a field is out of range.
  void validate() const;
};

struct LlmVerdict {
  std::string document_id;
  std::string raw_completion;
  std::optional<ClassIndex> parsed_label;  // nullopt == UNPARSED
  double latency_seconds = 0.0;
  std::uint32_t attempts = 0;
  std::string error;  // transport error after the last attempt, if any

  bool parsed() const { return parsed_label.has_value(); }
};

/// Case-insensitive earliest match of any class name fully inside the first
/// 32 bytes of the completion. Equal start positions prefer the longer name,
/// then the lower class index. Total over arbitrary bytes.
std::optional<ClassIndex> parse_completion(std::string_view completion, const std::vector<std::string>& classes);

inline constexpr std::size_t kParseWindow = 32;

/// One prompt with retries. Never throws for transport failures: the verdict
/// carries the error note and is UNPARSED.
LlmVerdict classify(const CompletionBackend& backend, const BackendConfig& config, const std::string& prompt,
                    const std::vector<std::string>& classes, std::string document_id = {});

struct BatchResult {
  std::vector<LlmVerdict> verdicts;  // same order as the prompts
  double wall_seconds = 0.0;
  std::size_t calls = 0;  // total attempts across the batch
};

/// Dispatches with at most `config.max_concurrent` requests in flight.
BatchResult classify_batch(const CompletionBackend& backend, const BackendConfig& config,
                           const std::vector<std::string>& prompts, const std::vector<std::string>& classes,
                           const std::vector<std::string>& document_ids = {});

}  // namespace cascade
