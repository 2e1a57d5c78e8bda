#include "rolecheck/mock_backend.hpp"

#include <cctype>
#include <thread>

#include "rolecheck/errors.hpp"
#include "rolecheck/text.hpp"

namespace rolecheck {

MatchKind match_kind_from_string(const std::string& s) {
  if (s == "exact") return MatchKind::exact;
  if (s == "prefix") return MatchKind::prefix;
  if (s == "contains") return MatchKind::contains;
  if (s == "regex") return MatchKind::regex;
  if (s == "any") return MatchKind::any;
  throw ConfigError("unknown mock match kind '" + s + "'");
}

MockBackend::Rule MockBackend::make_rule(MatchKind match, std::string pattern) {
  Rule r;
  r.match = match;
  r.pattern = std::move(pattern);
  if (match == MatchKind::regex) {
    try {
      r.compiled = std::regex(r.pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw ConfigError("bad mock regex '" + r.pattern + "': " + e.what());
    }
  }
  return r;
}

bool MockBackend::matches(const Rule& rule, const std::string& subject, std::smatch* groups) {
  switch (rule.match) {
    case MatchKind::exact: return subject == rule.pattern;
    case MatchKind::prefix: return subject.starts_with(rule.pattern);
    case MatchKind::contains: return subject.find(rule.pattern) != std::string::npos;
    case MatchKind::regex: return std::regex_search(subject, *groups, rule.compiled);
    case MatchKind::any: return true;
  }
  return false;
}

std::shared_ptr<MockBackend> MockBackend::from_json(const nlohmann::json& script) {
  auto mock = std::make_shared<MockBackend>();
  for (const auto& r : script.value("chat", nlohmann::json::array())) {
    std::vector<MockOutcome> outcomes;
    auto responses = r.contains("responses") ? r["responses"] : nlohmann::json::array({r.value("response", "")});
    for (const auto& o : responses) {
      if (o.is_string()) {
        outcomes.push_back(MockOutcome::reply(o.get<std::string>()));
      } else {
        std::string fail = o.value("fail", "");
        if (fail == "transport") outcomes.push_back(MockOutcome::transport_failure());
        else if (fail == "refusal") outcomes.push_back(MockOutcome::refusal());
        else if (fail == "empty") outcomes.push_back(MockOutcome::empty_reply());
        else throw ConfigError("unknown mock failure '" + fail + "'");
      }
    }
    mock->on_chat(match_kind_from_string(r.value("match", "any")), r.value("pattern", ""),
                  std::move(outcomes), r.value("field", "user"), r.value("endpoint", ""));
  }
  for (const auto& r : script.value("embed", nlohmann::json::array())) {
    auto match = match_kind_from_string(r.value("match", "any"));
    if (r.contains("hash_dim")) {
      mock->on_embed_hashed(match, r.value("pattern", ""), r["hash_dim"].get<int>());
    } else {
      mock->on_embed(match, r.value("pattern", ""), r.at("vector").get<std::vector<double>>());
    }
  }
  mock->set_latency(std::chrono::milliseconds(script.value("latency_ms", 0)));
  return mock;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("mock script '" + path + "': " + e.what());
  }
}

MockBackend& MockBackend::on_chat(MatchKind match, std::string pattern, std::vector<MockOutcome> responses,
                                  std::string field, std::string endpoint) {
  if (responses.empty()) throw ConfigError("mock chat rule without responses");
  Rule r = make_rule(match, std::move(pattern));
  r.responses = std::move(responses);
  r.field = std::move(field);
  r.endpoint = std::move(endpoint);
  std::lock_guard lock(mu_);
  chat_rules_.push_back(std::move(r));
  return *this;
}

MockBackend& MockBackend::on_chat(MatchKind match, std::string pattern, std::string response) {
  return on_chat(match, std::move(pattern), {MockOutcome::reply(std::move(response))});
}

MockBackend& MockBackend::on_embed(MatchKind match, std::string pattern, std::vector<double> vector) {
  Rule r = make_rule(match, std::move(pattern));
  r.vector = std::move(vector);
  std::lock_guard lock(mu_);
  embed_rules_.push_back(std::move(r));
  return *this;
}

MockBackend& MockBackend::on_embed_hashed(MatchKind match, std::string pattern, int dim) {
  if (dim < 1) throw ConfigError("hash_dim must be >= 1");
  Rule r = make_rule(match, std::move(pattern));
  r.hash_dim = dim;
  std::lock_guard lock(mu_);
  embed_rules_.push_back(std::move(r));
  return *this;
}

void MockBackend::enter() {
  int now = ++in_flight_;
  int peak = peak_in_flight_.load();
  while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
  }
}

void MockBackend::leave() { --in_flight_; }

ChatReply MockBackend::chat(const ModelEndpoint& endpoint, const ChatRequest& request) {
  enter();
  struct Leave {
    MockBackend* self;
    ~Leave() { self->leave(); }
  } guard{this};
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  MockOutcome outcome;
  std::smatch groups;
  {
    std::lock_guard lock(mu_);
    log_.push_back({EndpointKind::chat, endpoint.id, {request.user_text}});
    Rule* hit = nullptr;
    for (auto& rule : chat_rules_) {
      if (!rule.endpoint.empty() && rule.endpoint != endpoint.id) continue;
      const std::string& subject = rule.field == "system" ? request.system_text : request.user_text;
      if (matches(rule, subject, &groups)) {
        hit = &rule;
        break;
      }
    }
    if (!hit) {
      throw UnmatchedMockRequest("no mock chat rule matches request to '" + endpoint.id +
                                 "': " + request.user_text.substr(0, 160));
    }
    outcome = hit->responses[std::min(hit->next, hit->responses.size() - 1)];
    ++hit->next;
    if (hit->match == MatchKind::regex && outcome.kind == MockOutcome::Kind::text &&
        outcome.text.find('$') != std::string::npos) {
      outcome.text = groups.format(outcome.text, std::regex_constants::format_default);
    }
  }
  switch (outcome.kind) {
    case MockOutcome::Kind::transport_error: throw TransportError("mock: scripted transport failure");
    case MockOutcome::Kind::refusal: throw ProviderRefusal("mock: scripted refusal (status 400)");
    case MockOutcome::Kind::empty: return {};
    case MockOutcome::Kind::text: break;
  }
  ChatReply reply;
  reply.text = outcome.text;
  reply.usage.prompt_tokens = text::word_count(request.system_text) + text::word_count(request.user_text);
  reply.usage.completion_tokens = text::word_count(reply.text);
  return reply;
}

std::vector<std::vector<double>> MockBackend::embed(const ModelEndpoint& endpoint,
                                                    std::span<const std::string> texts) {
  enter();
  struct Leave {
    MockBackend* self;
    ~Leave() { self->leave(); }
  } guard{this};
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  std::lock_guard lock(mu_);
  log_.push_back({EndpointKind::embedding, endpoint.id, {texts.begin(), texts.end()}});
  std::vector<std::vector<double>> out;
  for (const auto& t : texts) {
    const Rule* hit = nullptr;
    std::smatch groups;
    for (const auto& rule : embed_rules_) {
      if (matches(rule, t, &groups)) {
        hit = &rule;
        break;
      }
    }
    if (!hit) throw UnmatchedMockRequest("no mock embed rule matches '" + t.substr(0, 160) + "'");
    out.push_back(hit->hash_dim > 0 ? hashed_embedding(t, hit->hash_dim) : hit->vector);
  }
  return out;
}

std::vector<MockCall> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockBackend::chat_calls() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [](const MockCall& c) { return c.kind == EndpointKind::chat; }));
}

std::size_t MockBackend::embed_calls() const {
  std::lock_guard lock(mu_);
  return log_.size() - static_cast<std::size_t>(std::count_if(
                           log_.begin(), log_.end(), [](const MockCall& c) { return c.kind == EndpointKind::chat; }));
}

void MockBackend::clear_log() {
  std::lock_guard lock(mu_);
  log_.clear();
  peak_in_flight_ = 0;
}

std::vector<double> hashed_embedding(std::string_view input, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::uint64_t h = text::sha256_u64(token);
    auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += ((h >> 63) & 1U) ? -1.0 : 1.0;
    token.clear();
  };
  for (unsigned char c : input) {
    if (std::isalnum(c)) token += static_cast<char>(std::tolower(c));
    else flush();
  }
  flush();
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return v;
}

}  // namespace rolecheck
