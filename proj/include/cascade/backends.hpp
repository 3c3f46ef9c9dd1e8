#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cascade/llm_gateway.hpp"

namespace cascade {

/// Transport-level failure. `retryable` is false for failures that cannot
/// succeed on a second try (e.g. a cassette miss).
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// Text completion service. Implementations must be callable concurrently.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const std::string& prompt) const = 0;
};

/// Answers with a user-supplied function (constant, oracle, fault injection).
class MockBackend final : public CompletionBackend {
 public:
  using Responder = std::function<std::string(const std::string& prompt)>;
  explicit MockBackend(Responder responder) : responder_(std::move(responder)) {}
  static MockBackend constant(std::string completion);

  std::string complete(const std::string& prompt) const override { return responder_(prompt); }

 private:
  Responder responder_;
};

struct CassetteEntry {
  std::string prompt_sha256;
  std::string completion;
};

/// JSONL, one {"prompt_sha256": ..., "completion": ...} object per line.
std::vector<CassetteEntry> load_cassette(const std::filesystem::path& path);
void write_cassette(const std::vector<CassetteEntry>& entries, const std::filesystem::path& path);

/// Looks completions up by SHA-256 of the exact prompt bytes.
class ReplayBackend final : public CompletionBackend {
 public:
  explicit ReplayBackend(const std::vector<CassetteEntry>& entries);
  static ReplayBackend from_file(const std::filesystem::path& path);

  std::string complete(const std::string& prompt) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::unordered_map<std::string, std::string> table_;
};

/// POSTs {model, prompt, max_tokens, temperature} as JSON to the endpoint and
/// extracts the completion at `response_path` (dotted keys, [i] indices).
class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const std::string& prompt) const override;

 private:
  BackendConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

/// Builds the backend named by `config.kind`.
std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config);

}  // namespace cascade
