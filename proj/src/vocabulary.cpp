#include "sketchreward/vocabulary.hpp"

#include "sketchreward/error.hpp"

namespace sketchreward {

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() > 0xFFFF) throw ContractError("vocabulary too large");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const auto [it, fresh] = index_.emplace(names_[i], Token{static_cast<std::uint16_t>(i)});
    if (!fresh) throw InputError("duplicate token name '" + names_[i] + "'");
  }
}

std::shared_ptr<const Vocabulary> Vocabulary::standard() {
  static const auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{
      "reach_goal", "unlock_door", "close_door", "pickup_key", "drop_key", "open_door", "open_box", "pickup_ball",
      "drop_ball", "open_door_first_time", "other"});
  return vocab;
}

std::optional<Token> Vocabulary::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Token Vocabulary::at(std::string_view name) const {
  if (auto t = find(name)) return *t;
  throw InputError("unknown token '" + std::string(name) + "'");
}

}  // namespace sketchreward
