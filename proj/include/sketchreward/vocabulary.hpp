#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sketchreward {

/// Event label emitted by an environment's pred; an index into a Vocabulary.
struct Token {
  std::uint16_t id = 0;
  friend auto operator<=>(Token, Token) = default;
};

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> names);

  /// Token set of the DoorKey family, including the derived first-time door token.
  static std::shared_ptr<const Vocabulary> standard();

  std::optional<Token> find(std::string_view name) const;
  /// Throws InputError for names outside the vocabulary.
  Token at(std::string_view name) const;
  const std::string& name(Token t) const { return names_.at(t.id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Token> index_;
};

}  // namespace sketchreward
