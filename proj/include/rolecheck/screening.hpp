#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolecheck/errors.hpp"

namespace rolecheck {

enum class ItemKind { memory, query_pair };
std::string to_string(ItemKind k);
ItemKind item_kind_from_string(const std::string& s);

enum class Decision { keep, reject };
std::string to_string(Decision d);
Decision decision_from_string(const std::string& s);

struct Verdict {
  std::string item_id;
  std::string annotator_id;
  Decision decision = Decision::keep;
  std::string reason;
  std::string timestamp;

  nlohmann::json to_json() const;
  static Verdict from_json(const nlohmann::json& j);
};

// One reviewable unit. `view` is the payload served to annotators
// (source chunk, candidate text, explanation, category, ...).
struct ReviewItem {
  std::string item_id;
  ItemKind kind = ItemKind::memory;
  nlohmann::json view = nlohmann::json::object();
};

struct ScreeningReport {
  ItemKind item_kind = ItemKind::memory;
  int n_items = 0;
  int kept_all = 0;
  int kept_any = 0;
  // kept_all / kept_any, 0 when nothing was kept by anyone.
  double overlap_ratio = 0.0;
  std::map<std::string, double> per_annotator_keep;  // keep rate per annotator
  std::vector<std::string> kept_ids;                 // sorted

  nlohmann::json to_json() const;
};

// Verdict store for the human screening loop. Every recorded verdict is
// final: re-submitting the same decision is a no-op, a different one
// throws AlreadyFinalized. Writes are exclusive, reads share a lock.
class ScreeningStore {
 public:
  using Clock = std::function<std::string()>;

  // `roster` lists the annotators expected to judge every item; when empty
  // the annotators that have submitted verdicts are used. With a
  // `verdict_log`, existing verdicts are replayed and new ones appended.
  explicit ScreeningStore(std::vector<std::string> roster = {},
                          std::optional<std::filesystem::path> verdict_log = std::nullopt, Clock clock = {});

  void add_item(ReviewItem item);
  bool has_item(const std::string& item_id) const;

  Verdict record_verdict(const std::string& item_id, const std::string& annotator_id, Decision decision,
                         const std::optional<std::string>& reason = std::nullopt);

  // Items of `kind` without a verdict from `annotator_id`, in item_id order.
  std::vector<ReviewItem> queue(const std::string& annotator_id, ItemKind kind) const;
  nlohmann::json progress() const;

  std::vector<MissingVerdict> missing(ItemKind kind, int required_annotators = 3) const;
  // Throws IncompleteVerdicts when any (item, annotator) verdict is absent.
  ScreeningReport finalize_intersection(ItemKind kind, int required_annotators = 3) const;

  std::vector<Verdict> verdicts() const;
  std::vector<std::string> roster() const;

 private:
  std::vector<std::string> effective_roster_locked() const;

  mutable std::shared_mutex mu_;
  std::vector<std::string> roster_;
  std::optional<std::filesystem::path> log_path_;
  Clock clock_;
  std::map<std::string, ReviewItem> items_;
  // item_id -> annotator_id -> verdict
  std::map<std::string, std::map<std::string, Verdict>> verdicts_;
};

// Scripted annotators for unattended runs. Rules file:
//   {"annotators": ["a1","a2","a3"], "default": "keep",
//    "rules": [{"annotator": "a2", "kind": "memory", "match": "contains|regex|id",
//               "pattern": "...", "decision": "reject", "reason": "..."}]}
// A rule without "annotator" applies to everyone; patterns are tested
// against the item id and the serialized view. First matching rule wins.
class AutoAnnotator {
 public:
  static AutoAnnotator from_json(const nlohmann::json& j);
  static AutoAnnotator from_file(const std::string& path);

  const std::vector<std::string>& annotators() const noexcept { return annotators_; }
  std::pair<Decision, std::string> decide(const std::string& annotator, const ReviewItem& item) const;
  // Submits a verdict for every pending (item, annotator) pair of `kind`.
  int annotate(ScreeningStore& store, ItemKind kind) const;

 private:
  struct Rule {
    std::string annotator;
    std::optional<ItemKind> kind;
    std::string match;
    std::string pattern;
    Decision decision = Decision::reject;
    std::string reason;
  };
  std::vector<std::string> annotators_;
  Decision default_decision_ = Decision::keep;
  std::vector<Rule> rules_;
};

}  // namespace rolecheck
