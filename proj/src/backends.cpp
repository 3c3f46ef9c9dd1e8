#include "cascade/backends.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cascade/checksum.hpp"
#include "cascade/errors.hpp"

namespace cascade {

using nlohmann::json;

MockBackend MockBackend::constant(std::string completion) {
  return MockBackend([c = std::move(completion)](const std::string&) { return c; });
}

std::vector<CassetteEntry> load_cassette(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open cassette '{}'", path.string()));
  std::vector<CassetteEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      out.push_back({j.at("prompt_sha256").get<std::string>(), j.at("completion").get<std::string>()});
    } catch (const json::exception& e) {
      throw InputError(fmt::format("cassette '{}' line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void write_cassette(const std::vector<CassetteEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write cassette '{}'", path.string()));
  for (const auto& e : entries) {
    out << json{{"prompt_sha256", e.prompt_sha256}, {"completion", e.completion}}.dump() << '\n';
  }
}

ReplayBackend::ReplayBackend(const std::vector<CassetteEntry>& entries) {
  for (const auto& e : entries) {
    const auto [it, inserted] = table_.emplace(e.prompt_sha256, e.completion);
    if (!inserted && it->second != e.completion) {
      throw InputError(fmt::format("cassette has conflicting completions for {}", e.prompt_sha256));
    }
  }
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) { return ReplayBackend(load_cassette(path)); }

std::string ReplayBackend::complete(const std::string& prompt) const {
  const auto key = sha256_hex(prompt);
  const auto it = table_.find(key);
  if (it == table_.end()) throw BackendError(fmt::format("cassette miss for prompt {}", key), false);
  return it->second;
}

namespace {

// Resolves paths like "choices[0].text" or "output.text".
const json& resolve_path(const json& root, std::string_view path) {
  const json* node = &root;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '.') {
      ++i;
      continue;
    }
    if (path[i] == '[') {
      const auto close = path.find(']', i);
      if (close == std::string_view::npos) throw BackendError(fmt::format("bad response path '{}'", path), false);
      const auto index = std::stoul(std::string(path.substr(i + 1, close - i - 1)));
      if (!node->is_array() || index >= node->size()) {
        throw BackendError(fmt::format("response has no element [{}]", index), false);
      }
      node = &(*node)[index];
      i = close + 1;
      continue;
    }
    auto end = path.find_first_of(".[", i);
    if (end == std::string_view::npos) end = path.size();
    const std::string key(path.substr(i, end - i));
    if (!node->is_object() || !node->contains(key)) {
      throw BackendError(fmt::format("response has no field '{}'", key), false);
    }
    node = &(*node)[key];
    i = end;
  }
  return *node;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError(fmt::format("endpoint '{}' lacks a scheme", url));
  if (url.compare(0, scheme_end, "http") != 0) {
    throw InputError(fmt::format("endpoint '{}': only plain http is supported", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpBackend::complete(const std::string& prompt) const {
  httplib::Client client(base_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  json body{{"prompt", prompt}, {"max_tokens", config_.max_tokens}, {"temperature", config_.temperature}};
  if (!config_.model.empty()) body["model"] = config_.model;
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw BackendError(fmt::format("POST {}{}: {}", base_, path_, httplib::to_string(res.error())), true);
  }
  if (res->status >= 500 || res->status == 429) {
    throw BackendError(fmt::format("POST {}{}: HTTP {}", base_, path_, res->status), true);
  }
  if (res->status != 200) {
    throw BackendError(fmt::format("POST {}{}: HTTP {}", base_, path_, res->status), false);
  }
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError(fmt::format("malformed JSON response: {}", e.what()), false);
  }
  const auto& node = resolve_path(reply, config_.response_path);
  if (!node.is_string()) throw BackendError(fmt::format("'{}' is not a string", config_.response_path), false);
  return node.get<std::string>();
}

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::mock: return std::make_unique<MockBackend>(MockBackend::constant(config.mock_completion));
    case BackendKind::replay: return std::make_unique<ReplayBackend>(ReplayBackend::from_file(config.cassette));
    case BackendKind::http: return std::make_unique<HttpBackend>(config);
  }
  throw InputError("unknown backend kind");
}

}  // namespace cascade
