#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sdqos::policy {

// One value on the right-hand side of a policy pair.
struct PolicyValue {
  enum class Kind { Rate, Flag, Fraction };
  Kind kind = Kind::Rate;
  double number = 0.0;  // Rate in MB/s, or Fraction in (0, 1]
  bool flag = false;

  static PolicyValue rate(double mbps) { return {Kind::Rate, mbps, false}; }
  static PolicyValue flag_value(bool b) { return {Kind::Flag, 0.0, b}; }
  static PolicyValue fraction(double f) { return {Kind::Fraction, f, false}; }

  bool operator==(const PolicyValue&) const = default;
};

// A parsed statement such as <app-1, rate=100 MB/s>. Entries keep source
// order; duplicate keys are representable and flagged by validate_policy.
struct PolicyStatement {
  std::string app_id;
  std::vector<std::pair<std::string, PolicyValue>> entries;

  bool operator==(const PolicyStatement&) const = default;
  const PolicyValue* find(std::string_view key) const;
};

enum class PolicyErrorKind { Syntax, UnknownKey, Value };

class PolicyError : public std::runtime_error {
 public:
  PolicyError(PolicyErrorKind kind, std::size_t position, const std::string& message);
  PolicyErrorKind kind;
  std::size_t position;  // byte offset into the statement text
};

// Parses one complete statement. Throws PolicyError on malformed input,
// unknown keys, or out-of-range values.
PolicyStatement parse_policy(std::string_view text);

// Canonical rendering; parse_policy(render_policy(s)) == s for valid s.
std::string render_policy(const PolicyStatement& stmt);

enum class Violation {
  DuplicateKey,
  ThresWithoutBorrow,
  RateOutOfRange,
  ThresOutOfRange,
  EmptyAppId,
};

std::vector<Violation> validate_policy(const PolicyStatement& stmt);

std::string violation_name(Violation v);

// Merged per-app view after the enforcer applied all statements.
struct EffectivePolicy {
  std::optional<double> rate_mbps;
  bool borrow_allowed = false;
  std::optional<double> borrow_threshold;  // only meaningful when borrow_allowed

  bool operator==(const EffectivePolicy&) const = default;
};

class ValidationFailed : public std::runtime_error {
 public:
  explicit ValidationFailed(const std::string& msg) : std::runtime_error(msg) {}
};

// Policy Enforcer state: last-writer-wins per key. Applying a statement
// bumps the epoch counter so the control plane re-syncs rates.
class PolicyRegistry {
 public:
  // Throws ValidationFailed when validate_policy(stmt) is non-empty.
  void apply(const PolicyStatement& stmt);

  const EffectivePolicy* find(const std::string& app_id) const;
  const std::map<std::string, EffectivePolicy>& entries() const { return table_; }
  std::uint64_t epoch() const { return epoch_; }

  bool operator==(const PolicyRegistry& other) const { return table_ == other.table_; }

 private:
  std::map<std::string, EffectivePolicy> table_;
  std::uint64_t epoch_ = 0;
};

}  // namespace sdqos::policy
