#include <regex>

#include "httplib.h"
#include "truex/provider.hpp"

namespace truex {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ProviderError(ProviderError::Kind::rejected, "bad base URL '" + url + "'");
  std::string path = m[2].matched ? m[2].str() : "";
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {m[1].str(), path};
}

class InFlightSlot {
 public:
  InFlightSlot(std::mutex& mu, std::condition_variable& cv, int& count, int limit) : mu_(mu), cv_(cv), count_(count) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ < limit; });
    ++count_;
  }
  ~InFlightSlot() {
    {
      std::lock_guard lock(mu_);
      --count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& count_;
};

}  // namespace

HttpProvider::HttpProvider(HttpConfig config, const TemplateRegistry& registry)
    : config_(std::move(config)), registry_(registry) {
  if (config_.max_in_flight < 1) config_.max_in_flight = 1;
}

ProviderResponse HttpProvider::complete(const ProviderRequest& req) {
  const RenderedPrompt prompt = registry_.render(req);
  const Endpoint ep = split_url(config_.base_url);

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({{{"role", "system"}, {"content", prompt.system}},
                                  {{"role", "user"}, {"content", prompt.user}}});
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_output;
  if (req.seed) body["seed"] = *req.seed;

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  InFlightSlot slot(mu_, cv_, in_flight_, config_.max_in_flight);
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(ep.origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  auto res = client.Post(ep.path + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(ProviderError::Kind::network,
                        "request to " + config_.base_url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429) throw ProviderError(ProviderError::Kind::rate_limited, "rate limited (HTTP 429)");
  if (res->status >= 500) {
    throw ProviderError(ProviderError::Kind::server, "server error HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError(ProviderError::Kind::rejected,
                        "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  std::string text;
  try {
    json reply = json::parse(res->body);
    text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(ProviderError::Kind::bad_response, std::string("malformed completion: ") + e.what());
  }
  if (text.empty()) throw ProviderError(ProviderError::Kind::bad_response, "empty completion");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {std::move(text), name(), false, ms};
}

}  // namespace truex
