#include "rolecheck/screening.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>

#include "rolecheck/text.hpp"

namespace rolecheck {

std::string to_string(ItemKind k) { return k == ItemKind::memory ? "memory" : "query_pair"; }

ItemKind item_kind_from_string(const std::string& s) {
  if (s == "memory") return ItemKind::memory;
  if (s == "query_pair") return ItemKind::query_pair;
  throw UsageError("unknown item kind '" + s + "' (expected memory|query_pair)");
}

std::string to_string(Decision d) { return d == Decision::keep ? "keep" : "reject"; }

Decision decision_from_string(const std::string& s) {
  if (s == "keep") return Decision::keep;
  if (s == "reject") return Decision::reject;
  throw UsageError("unknown decision '" + s + "' (expected keep|reject)");
}

nlohmann::json Verdict::to_json() const {
  nlohmann::json j{{"item_id", item_id},
                   {"annotator_id", annotator_id},
                   {"decision", to_string(decision)},
                   {"timestamp", timestamp}};
  if (!reason.empty()) j["reason"] = reason;
  return j;
}

Verdict Verdict::from_json(const nlohmann::json& j) {
  Verdict v;
  v.item_id = j.at("item_id").get<std::string>();
  v.annotator_id = j.at("annotator_id").get<std::string>();
  v.decision = decision_from_string(j.at("decision").get<std::string>());
  v.reason = j.value("reason", "");
  v.timestamp = j.value("timestamp", "");
  return v;
}

nlohmann::json ScreeningReport::to_json() const {
  return {{"item_kind", to_string(item_kind)},
          {"n_items", n_items},
          {"kept_all", kept_all},
          {"kept_any", kept_any},
          {"overlap_ratio", overlap_ratio},
          {"per_annotator_keep", per_annotator_keep},
          {"kept_ids", kept_ids}};
}

namespace {
std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

ScreeningStore::ScreeningStore(std::vector<std::string> roster, std::optional<std::filesystem::path> verdict_log,
                               Clock clock)
    : roster_(std::move(roster)), log_path_(std::move(verdict_log)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_now;
  if (log_path_ && std::filesystem::exists(*log_path_)) {
    for (const auto& line : text::read_lines(log_path_->string())) {
      if (text::is_blank(line)) continue;
      auto v = Verdict::from_json(nlohmann::json::parse(line));
      verdicts_[v.item_id][v.annotator_id] = v;
    }
  }
}

void ScreeningStore::add_item(ReviewItem item) {
  std::unique_lock lock(mu_);
  items_.insert_or_assign(item.item_id, std::move(item));
}

bool ScreeningStore::has_item(const std::string& item_id) const {
  std::shared_lock lock(mu_);
  return items_.count(item_id) > 0;
}

Verdict ScreeningStore::record_verdict(const std::string& item_id, const std::string& annotator_id,
                                       Decision decision, const std::optional<std::string>& reason) {
  if (text::is_blank(annotator_id)) throw UsageError("annotator_id must be non-empty");
  std::unique_lock lock(mu_);
  if (!items_.count(item_id)) throw UnknownItem("no review item '" + item_id + "'");
  if (!roster_.empty() && std::find(roster_.begin(), roster_.end(), annotator_id) == roster_.end())
    throw UsageError("annotator '" + annotator_id + "' is not on the roster");
  auto& per_item = verdicts_[item_id];
  if (auto it = per_item.find(annotator_id); it != per_item.end()) {
    if (it->second.decision == decision) return it->second;
    throw AlreadyFinalized("annotator '" + annotator_id + "' already recorded '" + to_string(it->second.decision) +
                           "' for '" + item_id + "'");
  }
  Verdict v{item_id, annotator_id, decision, reason.value_or(""), clock_()};
  if (log_path_) {
    if (log_path_->has_parent_path()) std::filesystem::create_directories(log_path_->parent_path());
    std::ofstream out(*log_path_, std::ios::app);
    out << v.to_json().dump() << '\n';
  }
  per_item.emplace(annotator_id, v);
  return v;
}

std::vector<ReviewItem> ScreeningStore::queue(const std::string& annotator_id, ItemKind kind) const {
  std::shared_lock lock(mu_);
  std::vector<ReviewItem> out;
  for (const auto& [id, item] : items_) {
    if (item.kind != kind) continue;
    auto it = verdicts_.find(id);
    if (it != verdicts_.end() && it->second.count(annotator_id)) continue;
    out.push_back(item);
  }
  return out;
}

nlohmann::json ScreeningStore::progress() const {
  std::shared_lock lock(mu_);
  auto roster = effective_roster_locked();
  nlohmann::json out = nlohmann::json::object();
  for (ItemKind kind : {ItemKind::memory, ItemKind::query_pair}) {
    int total = 0;
    std::map<std::string, int> done;
    for (const auto& a : roster) done[a] = 0;
    for (const auto& [id, item] : items_) {
      if (item.kind != kind) continue;
      ++total;
      if (auto it = verdicts_.find(id); it != verdicts_.end())
        for (const auto& [annotator, v] : it->second) ++done[annotator];
    }
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [a, n] : done) per[a] = {{"done", n}, {"pending", total - n}};
    out[to_string(kind)] = {{"items", total}, {"annotators", per}};
  }
  return out;
}

std::vector<std::string> ScreeningStore::effective_roster_locked() const {
  if (!roster_.empty()) return roster_;
  std::set<std::string> seen;
  for (const auto& [id, per_item] : verdicts_)
    for (const auto& [annotator, v] : per_item) seen.insert(annotator);
  return {seen.begin(), seen.end()};
}

std::vector<std::string> ScreeningStore::roster() const {
  std::shared_lock lock(mu_);
  return effective_roster_locked();
}

std::vector<MissingVerdict> ScreeningStore::missing(ItemKind kind, int required_annotators) const {
  std::shared_lock lock(mu_);
  auto roster = effective_roster_locked();
  for (int k = static_cast<int>(roster.size()); k < required_annotators; ++k)
    roster.push_back("<unassigned-" + std::to_string(k + 1) + ">");
  std::vector<MissingVerdict> out;
  for (const auto& [id, item] : items_) {
    if (item.kind != kind) continue;
    auto it = verdicts_.find(id);
    for (const auto& a : roster)
      if (it == verdicts_.end() || !it->second.count(a)) out.push_back({id, a});
  }
  return out;
}

ScreeningReport ScreeningStore::finalize_intersection(ItemKind kind, int required_annotators) const {
  if (auto gaps = missing(kind, required_annotators); !gaps.empty()) throw IncompleteVerdicts(std::move(gaps));
  std::shared_lock lock(mu_);
  auto roster = effective_roster_locked();
  ScreeningReport report;
  report.item_kind = kind;
  std::map<std::string, int> keeps;
  for (const auto& a : roster) keeps[a] = 0;
  for (const auto& [id, item] : items_) {
    if (item.kind != kind) continue;
    ++report.n_items;
    const auto& per_item = verdicts_.at(id);
    int k = 0;
    for (const auto& a : roster) {
      if (per_item.at(a).decision == Decision::keep) {
        ++k;
        ++keeps[a];
      }
    }
    if (k > 0) ++report.kept_any;
    if (k == static_cast<int>(roster.size())) {
      ++report.kept_all;
      report.kept_ids.push_back(id);
    }
  }
  report.overlap_ratio = report.kept_any == 0 ? 0.0 : static_cast<double>(report.kept_all) / report.kept_any;
  for (const auto& [a, n] : keeps)
    report.per_annotator_keep[a] = report.n_items == 0 ? 0.0 : static_cast<double>(n) / report.n_items;
  return report;
}

std::vector<Verdict> ScreeningStore::verdicts() const {
  std::shared_lock lock(mu_);
  std::vector<Verdict> out;
  for (const auto& [id, per_item] : verdicts_)
    for (const auto& [a, v] : per_item) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------- auto annotator

AutoAnnotator AutoAnnotator::from_json(const nlohmann::json& j) {
  AutoAnnotator a;
  a.annotators_ = j.value("annotators", std::vector<std::string>{"auto-1", "auto-2", "auto-3"});
  a.default_decision_ = decision_from_string(j.value("default", "keep"));
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    Rule rule;
    rule.annotator = r.value("annotator", "");
    if (r.contains("kind")) rule.kind = item_kind_from_string(r["kind"].get<std::string>());
    rule.match = r.value("match", "contains");
    rule.pattern = r.value("pattern", "");
    rule.decision = decision_from_string(r.value("decision", "reject"));
    rule.reason = r.value("reason", "auto rule");
    a.rules_.push_back(std::move(rule));
  }
  return a;
}

AutoAnnotator AutoAnnotator::from_file(const std::string& path) {
  return from_json(nlohmann::json::parse(text::read_file(path)));
}

std::pair<Decision, std::string> AutoAnnotator::decide(const std::string& annotator, const ReviewItem& item) const {
  const std::string body = item.view.dump();
  for (const auto& r : rules_) {
    if (!r.annotator.empty() && r.annotator != annotator) continue;
    if (r.kind && *r.kind != item.kind) continue;
    bool hit = false;
    if (r.match == "id") hit = item.item_id == r.pattern;
    else if (r.match == "regex") hit = std::regex_search(item.item_id + "\n" + body, std::regex(r.pattern));
    else hit = item.item_id.find(r.pattern) != std::string::npos || body.find(r.pattern) != std::string::npos;
    if (hit) return {r.decision, r.reason};
  }
  return {default_decision_, ""};
}

int AutoAnnotator::annotate(ScreeningStore& store, ItemKind kind) const {
  int n = 0;
  for (const auto& annotator : annotators_) {
    for (const auto& item : store.queue(annotator, kind)) {
      auto [decision, reason] = decide(annotator, item);
      store.record_verdict(item.item_id, annotator, decision,
                           reason.empty() ? std::nullopt : std::optional<std::string>(reason));
      ++n;
    }
  }
  return n;
}

}  // namespace rolecheck
