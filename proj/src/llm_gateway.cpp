#include "cascade/llm_gateway.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "cascade/backends.hpp"
#include "cascade/errors.hpp"

namespace cascade {

PromptTemplate PromptTemplate::zero_shot() {
  PromptTemplate t;
  t.exemplars.clear();
  return t;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, const std::vector<std::string>& classes,
                          std::string_view text) {
  const auto query = trim(text);
  if (query.empty()) throw InputError("cannot build a prompt for empty text");
  for (const auto& [ex_text, ex_class] : tmpl.exemplars) {
    if (std::find(classes.begin(), classes.end(), ex_class) == classes.end()) {
      throw InputError(fmt::format("exemplar class '{}' is not one of [{}]", ex_class, fmt::join(classes, ", ")));
    }
  }
  std::string instruction = tmpl.instruction;
  const auto slot = instruction.find("{classes}");
  if (slot != std::string::npos) instruction.replace(slot, 9, fmt::format("{}", fmt::join(classes, " or ")));

  std::string out = instruction;
  out += '\n';
  for (const auto& [ex_text, ex_class] : tmpl.exemplars) {
    out += fmt::format("{} {}\n{} {}.\n", tmpl.input_tag, ex_text, tmpl.output_tag, ex_class);
  }
  out += fmt::format("{} {}\n{}", tmpl.input_tag, query, tmpl.output_tag);
  return out;
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::mock: return "mock";
    case BackendKind::replay: return "replay";
    case BackendKind::http: return "http";
  }
  return "?";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "mock") return BackendKind::mock;
  if (name == "replay") return BackendKind::replay;
  if (name == "http") return BackendKind::http;
  throw InputError(fmt::format("unknown backend kind '{}' (expected mock, replay or http)", name));
}

void BackendConfig::validate() const {
  if (max_concurrent < 1) throw InputError("backend max_concurrent must be >= 1");
  if (!(temperature >= 0.0)) throw InputError("backend temperature must be non-negative");
  if (timeout.count() <= 0) throw InputError("backend timeout must be positive");
  if (kind == BackendKind::http && endpoint.empty()) throw InputError("http backend needs an endpoint");
  if (kind == BackendKind::replay && cassette.empty()) throw InputError("replay backend needs a cassette path");
}

std::optional<ClassIndex> parse_completion(std::string_view completion, const std::vector<std::string>& classes) {
  const auto window = lower_ascii(completion.substr(0, std::min(completion.size(), kParseWindow)));
  std::optional<ClassIndex> best;
  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (classes[c].empty()) continue;
    const auto pos = window.find(lower_ascii(classes[c]));
    if (pos == std::string::npos) continue;
    const auto len = classes[c].size();
    if (pos < best_pos || (pos == best_pos && len > best_len)) {
      best = static_cast<ClassIndex>(c);
      best_pos = pos;
      best_len = len;
    }
  }
  return best;
}

LlmVerdict classify(const CompletionBackend& backend, const BackendConfig& config, const std::string& prompt,
                    const std::vector<std::string>& classes, std::string document_id) {
  LlmVerdict v;
  v.document_id = std::move(document_id);
  const auto start = std::chrono::steady_clock::now();
  const std::uint32_t max_attempts = config.max_retries + 1;
  for (std::uint32_t attempt = 1; attempt <= max_attempts; ++attempt) {
    v.attempts = attempt;
    try {
      v.raw_completion = backend.complete(prompt);
      v.error.clear();
      v.parsed_label = parse_completion(v.raw_completion, classes);
      break;
    } catch (const BackendError& e) {
      v.error = e.what();
      if (!e.retryable()) break;
    } catch (const std::exception& e) {
      v.error = e.what();
    }
    if (attempt < max_attempts && config.retry_backoff.count() > 0) {
      std::this_thread::sleep_for(config.retry_backoff * attempt);
    }
  }
  v.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return v;
}

BatchResult classify_batch(const CompletionBackend& backend, const BackendConfig& config,
                           const std::vector<std::string>& prompts, const std::vector<std::string>& classes,
                           const std::vector<std::string>& document_ids) {
  if (!document_ids.empty() && document_ids.size() != prompts.size()) {
    throw InputError("document ids and prompts differ in length");
  }
  BatchResult result;
  result.verdicts.resize(prompts.size());
  if (prompts.empty()) return result;

  const auto start = std::chrono::steady_clock::now();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      result.verdicts[i] =
          classify(backend, config, prompts[i], classes, document_ids.empty() ? std::string{} : document_ids[i]);
    }
  };
  const auto workers = std::min<std::size_t>(std::max<std::uint32_t>(config.max_concurrent, 1), prompts.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& v : result.verdicts) result.calls += v.attempts;
  return result;
}

}  // namespace cascade
