#include "truex/judge.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace truex {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double token_overlap(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

bool OverlapJudge::equivalent(const std::string& a, const std::string& b) {
  return token_overlap(a, b) >= threshold_;
}

bool ProviderJudge::equivalent(const std::string& a, const std::string& b) {
  if (a == b) return true;
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  ProviderRequest req;
  req.template_id = "judge.equivalent";
  req.slots = {{"first", key.first}, {"second", key.second}};
  req.temperature = temperature_;
  req.max_output = 8;
  std::string text = provider_.complete(req).text;
  auto start = std::find_if(text.begin(), text.end(), [](unsigned char c) { return !std::isspace(c); });
  std::string head(start, text.end());
  std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) { return std::toupper(c); });
  const bool yes = head.rfind("YES", 0) == 0;
  std::lock_guard lock(mu_);
  memo_.emplace(key, yes);
  return yes;
}

size_t ProviderJudge::requests() const {
  std::lock_guard lock(mu_);
  return memo_.size();
}

}  // namespace truex
