#include "truex/provider.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "truex/hash.hpp"

namespace truex {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string canonical_request(const ProviderRequest& req) {
  json j;
  j["template_id"] = req.template_id;
  j["slots"] = req.slots;
  j["temperature"] = req.temperature;
  j["max_output"] = req.max_output;
  j["seed"] = req.seed ? json(*req.seed) : json(nullptr);
  return j.dump();
}

std::string fingerprint(const ProviderRequest& req) { return sha256_hex(canonical_request(req)); }

std::vector<std::string> PromptTemplate::slots() const {
  std::set<std::string> names;
  for (const std::string* text : {&system, &user}) {
    size_t pos = 0;
    while ((pos = text->find("{{", pos)) != std::string::npos) {
      size_t end = text->find("}}", pos + 2);
      if (end == std::string::npos) break;
      names.insert(text->substr(pos + 2, end - pos - 2));
      pos = end + 2;
    }
  }
  return {names.begin(), names.end()};
}

void TemplateRegistry::add(PromptTemplate t) {
  std::string id = t.id;
  templates_[id] = std::move(t);
}

const PromptTemplate* TemplateRegistry::find(const std::string& id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

RenderedPrompt TemplateRegistry::render(const ProviderRequest& req) const {
  const PromptTemplate* t = find(req.template_id);
  if (!t) throw ProviderError(ProviderError::Kind::template_missing, "unknown template '" + req.template_id + "'");
  for (const auto& slot : t->slots()) {
    if (!req.slots.count(slot)) {
      throw ProviderError(ProviderError::Kind::template_missing,
                          "template '" + req.template_id + "' needs slot '" + slot + "'");
    }
  }
  auto fill = [&](std::string text) {
    for (const auto& [name, value] : req.slots) {
      const std::string key = "{{" + name + "}}";
      size_t pos = 0;
      while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
      }
    }
    return text;
  };
  return {fill(t->system), fill(t->user)};
}

MockProvider::MockProvider(std::map<std::string, std::string> script, MockFallback fallback,
                           const TemplateRegistry& registry)
    : script_(std::move(script)), fallback_(fallback), registry_(registry) {}

std::map<std::string, std::string> MockProvider::load_script(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(path.string() + ": mock script must be a JSON object");
  std::map<std::string, std::string> script;
  for (const auto& [fp, text] : j.items()) {
    if (!text.is_string()) throw DataError(path.string() + ": entry " + fp + " is not a string");
    script[fp] = text.get<std::string>();
  }
  return script;
}

ProviderResponse MockProvider::complete(const ProviderRequest& req) {
  const RenderedPrompt prompt = registry_.render(req);
  const std::string fp = fingerprint(req);
  auto it = script_.find(fp);
  if (it != script_.end()) return {it->second, name(), false, 0.0};
  if (fallback_ == MockFallback::echo) return {prompt.user, name(), false, 0.0};
  throw ProviderError(ProviderError::Kind::mock_miss,
                      "mock script has no entry for " + req.template_id + " request " + fp);
}

ProviderResponse FunctionProvider::complete(const ProviderRequest& req) {
  const auto start = std::chrono::steady_clock::now();
  std::string text = fn_(req);
  return {std::move(text), name_, false, elapsed_ms(start)};
}

CachingProvider::CachingProvider(std::shared_ptr<Provider> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

ProviderResponse CachingProvider::complete(const ProviderRequest& req) {
  const std::string fp = fingerprint(req);
  const auto path = entry_path(fp);
  if (std::filesystem::exists(path)) {
    try {
      json entry = json::parse(read_text_file(path));
      if (entry.at("fingerprint") == fp) {
        return {entry.at("text").get<std::string>(), entry.value("provider", name()), true, 0.0};
      }
    } catch (const std::exception&) {
      // unreadable entry: fall through and overwrite it
    }
  }
  ProviderResponse resp = inner_->complete(req);
  json entry{{"fingerprint", fp}, {"template_id", req.template_id}, {"provider", resp.provider_name},
             {"text", resp.text}};
  write_file_atomic(path, entry.dump(2) + "\n");
  return resp;
}

RetryingProvider::RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy, Sleeper sleep)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleep)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  policy_.max_attempts = std::max(1, policy_.max_attempts);
}

ProviderResponse RetryingProvider::complete(const ProviderRequest& req) {
  auto delay = policy_.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_->complete(req);
    } catch (const ProviderError& e) {
      if (!e.retryable()) throw;
      if (attempt >= policy_.max_attempts) {
        throw ProviderError(e.kind(), "giving up after " + std::to_string(attempt) + " attempts: " + e.what());
      }
    }
    sleep_(delay);
    auto next = std::chrono::milliseconds(static_cast<long long>(delay.count() * policy_.multiplier));
    delay = std::min(next, policy_.max_delay);
  }
}

ProviderResponse RecordingProvider::complete(const ProviderRequest& req) {
  ProviderResponse resp = inner_->complete(req);
  std::lock_guard lock(mu_);
  recorded_[fingerprint(req)] = resp.text;
  return resp;
}

std::map<std::string, std::string> RecordingProvider::script() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

}  // namespace truex
