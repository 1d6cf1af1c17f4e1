#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "truex/errors.hpp"
#include "truex/json_io.hpp"

namespace truex {

struct ProviderRequest {
  std::string template_id;
  std::map<std::string, std::string> slots;
  double temperature = 0.0;
  int max_output = 1024;
  std::optional<int64_t> seed;
};

struct ProviderResponse {
  std::string text;
  std::string provider_name;
  bool cached = false;
  double latency_ms = 0.0;
};

// Canonical JSON of a request: sorted keys, no whitespace. The fingerprint
// is its SHA-256, so slot insertion order never matters.
std::string canonical_request(const ProviderRequest& req);
std::string fingerprint(const ProviderRequest& req);

struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;  // {{slot}} placeholders
  std::vector<std::string> slots() const;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
};

class TemplateRegistry {
 public:
  // The templates shipped with the pipeline.
  static const TemplateRegistry& builtin();

  void add(PromptTemplate t);
  const PromptTemplate* find(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Throws ProviderError{template_missing} for an unknown id or an unfilled
  // slot. Extra slots are allowed (they still count toward the fingerprint).
  RenderedPrompt render(const ProviderRequest& req) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderResponse complete(const ProviderRequest& req) = 0;
  virtual std::string name() const = 0;
};

enum class MockFallback { error, echo };

// Replays canned text by request fingerprint. `echo` answers unscripted
// requests with the rendered user prompt.
class MockProvider : public Provider {
 public:
  MockProvider(std::map<std::string, std::string> script, MockFallback fallback,
               const TemplateRegistry& registry = TemplateRegistry::builtin());

  // Script file: a JSON object fingerprint -> text.
  static std::map<std::string, std::string> load_script(const std::filesystem::path& path);

  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return "mock"; }
  size_t size() const { return script_.size(); }

 private:
  std::map<std::string, std::string> script_;
  MockFallback fallback_;
  const TemplateRegistry& registry_;
};

// Adapter for in-process responders (tests, the corpus simulator).
class FunctionProvider : public Provider {
 public:
  using Fn = std::function<std::string(const ProviderRequest&)>;
  FunctionProvider(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

// Disk cache in front of another provider: one JSON file per fingerprint,
// written by temp-file-and-rename.
class CachingProvider : public Provider {
 public:
  CachingProvider(std::shared_ptr<Provider> inner, std::filesystem::path dir);
  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return inner_->name(); }
  std::filesystem::path entry_path(const std::string& fp) const { return dir_ / (fp + ".json"); }

 private:
  std::shared_ptr<Provider> inner_;
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_delay{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};
};

class RetryingProvider : public Provider {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy, Sleeper sleep = {});
  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Provider> inner_;
  RetryPolicy policy_;
  Sleeper sleep_;
};

// Records fingerprint -> text for every successful call; the result is a
// valid mock script.
class RecordingProvider : public Provider {
 public:
  explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}
  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return inner_->name(); }
  std::map<std::string, std::string> script() const;

 private:
  std::shared_ptr<Provider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

struct HttpConfig {
  std::string base_url = "https://api.openai.com/v1";  // POST {base_url}/chat/completions
  std::string model = "gpt-4o-mini";
  std::string api_key;  // usually from TRUE_API_KEY
  int timeout_seconds = 60;
  int max_in_flight = 4;
};

// Chat-completion client. Errors map to ProviderError kinds so a
// RetryingProvider can tell transient failures from permanent ones.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpConfig config, const TemplateRegistry& registry = TemplateRegistry::builtin());
  ProviderResponse complete(const ProviderRequest& req) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpConfig config_;
  const TemplateRegistry& registry_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

}  // namespace truex
