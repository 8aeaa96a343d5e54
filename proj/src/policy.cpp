#include "sdqos/policy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "sdqos/util.hpp"

namespace sdqos::policy {

const PolicyValue* PolicyStatement::find(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

PolicyError::PolicyError(PolicyErrorKind k, std::size_t pos, const std::string& message)
    : std::runtime_error(message), kind(k), position(pos) {}

namespace {

// Recursive-descent scanner over one statement.
//   statement := "<" ws app_id ws ("," ws pair ws)+ ">"
//   pair      := key ws "=" ws value
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  PolicyStatement parse() {
    PolicyStatement stmt;
    expect('<');
    skip_ws();
    stmt.app_id = app_id();
    skip_ws();
    if (peek() != ',')
      fail(PolicyErrorKind::Syntax, "expected ','");
    while (peek() == ',') {
      ++pos_;
      skip_ws();
      stmt.entries.push_back(pair());
      skip_ws();
    }
    expect('>');
    skip_ws();
    if (pos_ != text_.size())
      fail(PolicyErrorKind::Syntax, "expected end of input after '>'");
    return stmt;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(PolicyErrorKind kind, const std::string& what) {
    throw PolicyError(kind, pos_, what + " at position " + std::to_string(pos_));
  }

  int peek() const { return pos_ < text_.size() ? static_cast<unsigned char>(text_[pos_]) : -1; }

  void expect(char c) {
    if (peek() != c) fail(PolicyErrorKind::Syntax, std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool is_id_char(int c) {
    return std::isalnum(c) || c == '_' || c == '-';
  }

  std::string app_id() {
    std::size_t start = pos_;
    while (is_id_char(peek())) ++pos_;
    if (pos_ == start) fail(PolicyErrorKind::Syntax, "expected application id");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string word() {
    std::size_t start = pos_;
    while (std::isalpha(peek())) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // Decimal with optional sign, fraction part and exponent. Range checks
  // happen per key at the call site.
  double number() {
    std::size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    std::size_t digits = 0;
    while (std::isdigit(peek())) ++pos_, ++digits;
    if (peek() == '.') {
      ++pos_;
      while (std::isdigit(peek())) ++pos_, ++digits;
    }
    if (digits == 0) {
      pos_ = start;
      fail(PolicyErrorKind::Syntax, "expected number");
    }
    if (peek() == 'e' || peek() == 'E') {
      ++pos_;
      if (peek() == '-' || peek() == '+') ++pos_;
      if (!std::isdigit(peek())) fail(PolicyErrorKind::Syntax, "expected exponent digits");
      while (std::isdigit(peek())) ++pos_;
    }
    double out = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, out);
    if (res.ec != std::errc{}) fail(PolicyErrorKind::Syntax, "unparsable number");
    return out;
  }

  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }

  std::pair<std::string, PolicyValue> pair() {
    std::size_t key_pos = pos_;
    std::string key = lower(word());
    if (key.empty()) fail(PolicyErrorKind::Syntax, "expected key");
    if (key != "rate" && key != "borrow" && key != "thres") {
      pos_ = key_pos;
      fail(PolicyErrorKind::UnknownKey, "unknown key '" + key + "'");
    }
    skip_ws();
    expect('=');
    skip_ws();
    if (key == "borrow") {
      std::size_t val_pos = pos_;
      std::string w = lower(word());
      if (w == "true") return {key, PolicyValue::flag_value(true)};
      if (w == "false") return {key, PolicyValue::flag_value(false)};
      pos_ = val_pos;
      fail(PolicyErrorKind::Syntax, "expected TRUE or FALSE");
    }
    std::size_t val_pos = pos_;
    double v = number();
    if (key == "rate") {
      skip_ws();
      if (text_.substr(pos_, 4) != "MB/s") fail(PolicyErrorKind::Syntax, "expected 'MB/s'");
      pos_ += 4;
      if (v <= 0.0) {
        pos_ = val_pos;
        fail(PolicyErrorKind::Value, "rate must be > 0");
      }
      return {key, PolicyValue::rate(v)};
    }
    // thres
    if (v <= 0.0 || v > 1.0) {
      pos_ = val_pos;
      fail(PolicyErrorKind::Value, "thres must be in (0, 1]");
    }
    return {key, PolicyValue::fraction(v)};
  }
};

}  // namespace

PolicyStatement parse_policy(std::string_view text) { return Parser(text).parse(); }

std::string render_policy(const PolicyStatement& stmt) {
  std::string out = "<" + stmt.app_id;
  for (const auto& [key, value] : stmt.entries) {
    out += ", " + key + "=";
    switch (value.kind) {
      case PolicyValue::Kind::Rate:
        out += format_double(value.number) + " MB/s";
        break;
      case PolicyValue::Kind::Flag:
        out += value.flag ? "TRUE" : "FALSE";
        break;
      case PolicyValue::Kind::Fraction:
        out += format_double(value.number);
        break;
    }
  }
  out += ">";
  return out;
}

std::vector<Violation> validate_policy(const PolicyStatement& stmt) {
  std::vector<Violation> out;
  if (stmt.app_id.empty()) out.push_back(Violation::EmptyAppId);

  bool duplicate = false;
  for (std::size_t i = 0; i < stmt.entries.size() && !duplicate; ++i)
    for (std::size_t j = i + 1; j < stmt.entries.size(); ++j)
      if (stmt.entries[i].first == stmt.entries[j].first) duplicate = true;
  if (duplicate) out.push_back(Violation::DuplicateKey);

  const PolicyValue* rate = stmt.find("rate");
  const PolicyValue* borrow = stmt.find("borrow");
  const PolicyValue* thres = stmt.find("thres");
  if (rate && rate->number <= 0.0) out.push_back(Violation::RateOutOfRange);
  if (thres && (thres->number <= 0.0 || thres->number > 1.0))
    out.push_back(Violation::ThresOutOfRange);
  if (thres && (!borrow || !borrow->flag)) out.push_back(Violation::ThresWithoutBorrow);
  return out;
}

std::string violation_name(Violation v) {
  switch (v) {
    case Violation::DuplicateKey: return "DuplicateKey";
    case Violation::ThresWithoutBorrow: return "ThresWithoutBorrow";
    case Violation::RateOutOfRange: return "RateOutOfRange";
    case Violation::ThresOutOfRange: return "ThresOutOfRange";
    case Violation::EmptyAppId: return "EmptyAppId";
  }
  return "Unknown";
}

void PolicyRegistry::apply(const PolicyStatement& stmt) {
  auto violations = validate_policy(stmt);
  if (!violations.empty())
    throw ValidationFailed("policy for '" + stmt.app_id + "' violates " +
                           violation_name(violations.front()));
  EffectivePolicy& eff = table_[stmt.app_id];
  for (const auto& [key, value] : stmt.entries) {
    if (key == "rate") {
      eff.rate_mbps = value.number;
    } else if (key == "borrow") {
      eff.borrow_allowed = value.flag;
      // Threshold cannot outlive permission.
      if (!value.flag) eff.borrow_threshold.reset();
    } else if (key == "thres") {
      eff.borrow_threshold = value.number;
    }
  }
  ++epoch_;
}

const EffectivePolicy* PolicyRegistry::find(const std::string& app_id) const {
  auto it = table_.find(app_id);
  return it == table_.end() ? nullptr : &it->second;
}

}  // namespace sdqos::policy
