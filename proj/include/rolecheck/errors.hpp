#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rolecheck {

// Every domain error carries a stable name; the CLI prints it verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define ROLECHECK_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

// provider
ROLECHECK_DEFINE_ERROR(TransportError)
ROLECHECK_DEFINE_ERROR(ProviderRefusal)
ROLECHECK_DEFINE_ERROR(EmptyResponse)
ROLECHECK_DEFINE_ERROR(DimensionMismatch)
ROLECHECK_DEFINE_ERROR(InvalidEmbedding)
ROLECHECK_DEFINE_ERROR(UnmatchedMockRequest)
// configuration / usage
ROLECHECK_DEFINE_ERROR(ConfigError)
ROLECHECK_DEFINE_ERROR(UsageError)
ROLECHECK_DEFINE_ERROR(UnfilledPlaceholder)
ROLECHECK_DEFINE_ERROR(IoError)
// corpus
ROLECHECK_DEFINE_ERROR(MissingField)
ROLECHECK_DEFINE_ERROR(EmptyCorpus)
// inject
ROLECHECK_DEFINE_ERROR(RegistryTooSmall)
// screening
ROLECHECK_DEFINE_ERROR(UnknownItem)
ROLECHECK_DEFINE_ERROR(AlreadyFinalized)
ROLECHECK_DEFINE_ERROR(PortBusy)
// dataset
ROLECHECK_DEFINE_ERROR(IntegrityError)
ROLECHECK_DEFINE_ERROR(EmptyDataset)
// retrieval / strategies
ROLECHECK_DEFINE_ERROR(EmptyIndex)
ROLECHECK_DEFINE_ERROR(CaseOverlap)
// judge / report
ROLECHECK_DEFINE_ERROR(MissingTrial)
ROLECHECK_DEFINE_ERROR(EmptyInput)

#undef ROLECHECK_DEFINE_ERROR

// Raised when a model response cannot be parsed; `rejects` lists the
// offending segments.
class ParseFailure : public Error {
 public:
  ParseFailure(const std::string& message, std::vector<std::string> rejects = {})
      : Error("ParseFailure", message), rejects_(std::move(rejects)) {}
  const std::vector<std::string>& rejects() const noexcept { return rejects_; }

 private:
  std::vector<std::string> rejects_;
};

class ValidationFailure : public Error {
 public:
  ValidationFailure(std::string property, const std::string& message)
      : Error("ValidationFailure", message), property_(std::move(property)) {}
  // not_interrogative | not_second_person | missing_terminator | multiple_questions | empty
  const std::string& property() const noexcept { return property_; }

 private:
  std::string property_;
};

struct MissingVerdict {
  std::string item_id;
  std::string annotator_id;
  bool operator==(const MissingVerdict&) const = default;
};

class IncompleteVerdicts : public Error {
 public:
  explicit IncompleteVerdicts(std::vector<MissingVerdict> missing)
      : Error("IncompleteVerdicts",
              std::to_string(missing.size()) + " (item, annotator) verdicts missing"),
        missing_(std::move(missing)) {}
  const std::vector<MissingVerdict>& missing() const noexcept { return missing_; }

 private:
  std::vector<MissingVerdict> missing_;
};

// Wraps an error raised inside one stage of a multi-call strategy.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class SeedParseFailure : public Error {
 public:
  explicit SeedParseFailure(const std::string& message) : Error("SeedParseFailure", message) {}
};

}  // namespace rolecheck
