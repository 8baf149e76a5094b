#include "hindsight/language.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace hindsight {
namespace {

constexpr std::array<std::string_view, 3> kVerbs = {"reach", "touch", "contact"};
constexpr std::array<std::string_view, 9> kAllColors = {"red",    "green",   "blue", "yellow", "purple",
                                                         "orange", "magenta", "cyan", "brown"};
constexpr std::array<ShapeClass, 3> kAllShapes = {ShapeClass::Box, ShapeClass::Rectangle, ShapeClass::Cylinder};
constexpr std::array<std::string_view, 3> kBoxWords = {"box", "block", "square"};
constexpr std::array<std::string_view, 3> kRectangleWords = {"rectangle", "oblong", "brick"};
constexpr std::array<std::string_view, 3> kCylinderWords = {"cylinder", "barrel", "tophat"};
constexpr std::array<TaskMode, 4> kModes = {TaskMode::Default, TaskMode::Color, TaskMode::Shape,
                                            TaskMode::ColorShape};

bool rich_colors(TaskMode m) { return m == TaskMode::Color || m == TaskMode::ColorShape; }
bool rich_shapes(TaskMode m) { return m == TaskMode::Shape || m == TaskMode::ColorShape; }

}  // namespace

std::string_view to_string(TaskMode mode) {
  switch (mode) {
    case TaskMode::Default: return "default";
    case TaskMode::Color: return "color";
    case TaskMode::Shape: return "shape";
    case TaskMode::ColorShape: return "colorshape";
  }
  return "?";
}

std::string_view to_string(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::Box: return "box";
    case ShapeClass::Rectangle: return "rectangle";
    case ShapeClass::Cylinder: return "cylinder";
  }
  return "?";
}

TaskMode parse_task_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  lower.erase(std::remove(lower.begin(), lower.end(), '_'), lower.end());
  for (auto m : kModes)
    if (to_string(m) == lower) return m;
  throw std::invalid_argument("unknown task mode: " + std::string(text));
}

std::span<const TaskMode> all_task_modes() { return kModes; }

std::span<const std::string_view> verbs() { return kVerbs; }

std::span<const std::string_view> colors(TaskMode mode) {
  return std::span<const std::string_view>(kAllColors).first(rich_colors(mode) ? 9 : 3);
}

std::span<const ShapeClass> shape_classes(TaskMode mode) {
  return std::span<const ShapeClass>(kAllShapes).first(rich_shapes(mode) ? 3 : 1);
}

std::span<const std::string_view> synonyms(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::Box: return kBoxWords;
    case ShapeClass::Rectangle: return kRectangleWords;
    case ShapeClass::Cylinder: return kCylinderWords;
  }
  return {};
}

std::optional<ShapeClass> shape_of_synonym(std::string_view word) {
  for (auto s : kAllShapes) {
    auto words = synonyms(s);
    if (std::find(words.begin(), words.end(), word) != words.end()) return s;
  }
  return std::nullopt;
}

std::size_t color_index(TaskMode mode, std::string_view color) {
  auto cs = colors(mode);
  auto it = std::find(cs.begin(), cs.end(), color);
  if (it == cs.end()) throw VocabularyError("color '" + std::string(color) + "' not in mode " +
                                            std::string(to_string(mode)));
  return static_cast<std::size_t>(it - cs.begin());
}

std::size_t shape_index(TaskMode mode, ShapeClass shape) {
  auto ss = shape_classes(mode);
  auto it = std::find(ss.begin(), ss.end(), shape);
  if (it == ss.end()) throw VocabularyError("shape '" + std::string(to_string(shape)) + "' not in mode " +
                                            std::string(to_string(mode)));
  return static_cast<std::size_t>(it - ss.begin());
}

Vocabulary::Vocabulary(TaskMode mode) : mode_(mode) {
  words_ = {"<pad>", "<bos>", "<eos>"};
  for (auto v : kVerbs) words_.emplace_back(v);
  words_.emplace_back("the");
  for (auto c : colors(mode)) words_.emplace_back(c);
  for (auto s : shape_classes(mode))
    for (auto w : synonyms(s)) words_.emplace_back(w);
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
}

const std::string& Vocabulary::word(Token t) const {
  if (t >= words_.size()) throw VocabularyError("token index " + std::to_string(t) + " out of range");
  return words_[t];
}

Token Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    throw VocabularyError("unknown word '" + std::string(word) + "' in mode " + std::string(to_string(mode_)));
  }
  return it->second;
}

std::vector<Token> Vocabulary::tokenize(std::string_view text) const {
  std::vector<Token> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    const auto t = index(w);
    if (t <= kEos) throw VocabularyError("special token in instruction text");
    out.push_back(t);
  }
  out.push_back(kEos);
  return out;
}

std::string Vocabulary::detokenize(std::span<const Token> tokens) const {
  std::string out;
  for (auto t : tokens) {
    if (t == kEos || t == kPad) break;
    if (t == kBos) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

std::string Vocabulary::dump() const {
  std::string out;
  for (const auto& w : words_) {
    out += w;
    out += '\n';
  }
  return out;
}

std::string Instruction::text() const {
  return verb + " the " + goal.color + " " + goal.shape_synonym;
}

std::vector<GoalDescriptor> enumerate_goals(TaskMode mode) {
  std::vector<GoalDescriptor> goals;
  for (auto c : colors(mode))
    for (auto s : shape_classes(mode))
      for (auto w : synonyms(s)) goals.push_back({std::string(c), std::string(w), s});
  return goals;
}

bool goal_in_mode(const GoalDescriptor& goal, TaskMode mode) {
  auto cs = colors(mode);
  auto ss = shape_classes(mode);
  const auto shape = shape_of_synonym(goal.shape_synonym);
  return std::find(cs.begin(), cs.end(), goal.color) != cs.end() && shape && *shape == goal.shape_class &&
         std::find(ss.begin(), ss.end(), goal.shape_class) != ss.end();
}

Instruction make_instruction(const Vocabulary& vocab, const GoalDescriptor& goal, std::string_view verb) {
  if (!goal_in_mode(goal, vocab.mode())) {
    throw VocabularyError("goal (" + goal.color + ", " + goal.shape_synonym + ") not in mode " +
                          std::string(to_string(vocab.mode())));
  }
  if (std::find(kVerbs.begin(), kVerbs.end(), verb) == kVerbs.end()) {
    throw VocabularyError("unknown verb '" + std::string(verb) + "'");
  }
  Instruction ins;
  ins.goal = goal;
  ins.verb = std::string(verb);
  ins.tokens = vocab.tokenize(ins.text());
  return ins;
}

Instruction sample_instruction(const Vocabulary& vocab, const GoalDescriptor& goal, Rng& rng) {
  return make_instruction(vocab, goal, kVerbs[uniform_index(rng, 0, kVerbs.size() - 1)]);
}

Instruction expert_hindsight_instruction(const Vocabulary& vocab, std::string_view color, ShapeClass shape,
                                         Rng& rng) {
  auto words = synonyms(shape);
  GoalDescriptor goal{std::string(color), std::string(words[uniform_index(rng, 0, words.size() - 1)]), shape};
  return sample_instruction(vocab, goal, rng);
}

std::optional<Instruction> parse_instruction(const Vocabulary& vocab, std::span<const Token> tokens) {
  if (tokens.size() < kInstructionTokens || tokens[4] != kEos) return std::nullopt;
  for (std::size_t i = 0; i < 4; ++i)
    if (tokens[i] >= vocab.size() || tokens[i] <= kEos) return std::nullopt;
  const auto& verb = vocab.word(tokens[0]);
  if (std::find(kVerbs.begin(), kVerbs.end(), verb) == kVerbs.end()) return std::nullopt;
  if (vocab.word(tokens[1]) != "the") return std::nullopt;
  const auto& color = vocab.word(tokens[2]);
  auto cs = colors(vocab.mode());
  if (std::find(cs.begin(), cs.end(), color) == cs.end()) return std::nullopt;
  const auto& synonym = vocab.word(tokens[3]);
  auto shape = shape_of_synonym(synonym);
  if (!shape) return std::nullopt;
  GoalDescriptor goal{color, synonym, *shape};
  if (!goal_in_mode(goal, vocab.mode())) return std::nullopt;
  Instruction ins;
  ins.goal = std::move(goal);
  ins.verb = verb;
  ins.tokens.assign(tokens.begin(), tokens.begin() + kInstructionTokens);
  return ins;
}

std::vector<Token> pad_tokens(std::span<const Token> tokens) {
  std::vector<Token> out(kMaxInstructionTokens, kPad);
  std::copy_n(tokens.begin(), std::min(tokens.size(), kMaxInstructionTokens), out.begin());
  return out;
}

}  // namespace hindsight
