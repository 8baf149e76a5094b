#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hindsight/random.hpp"

namespace hindsight {

enum class TaskMode { Default, Color, Shape, ColorShape };

enum class ShapeClass { Box, Rectangle, Cylinder };

std::string_view to_string(TaskMode mode);
std::string_view to_string(ShapeClass shape);
TaskMode parse_task_mode(std::string_view text);
std::span<const TaskMode> all_task_modes();

class VocabularyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Token = std::size_t;

inline constexpr Token kPad = 0;
inline constexpr Token kBos = 1;
inline constexpr Token kEos = 2;
// Padded instruction length carried in observations and the decoder cap.
inline constexpr std::size_t kMaxInstructionTokens = 6;
// "<verb> the <color> <shape>" + EOS
inline constexpr std::size_t kInstructionTokens = 5;

std::span<const std::string_view> verbs();
std::span<const std::string_view> colors(TaskMode mode);
std::span<const ShapeClass> shape_classes(TaskMode mode);
std::span<const std::string_view> synonyms(ShapeClass shape);
std::optional<ShapeClass> shape_of_synonym(std::string_view word);

// Index of a color or shape class in the mode's one-hot encoding.
std::size_t color_index(TaskMode mode, std::string_view color);
std::size_t shape_index(TaskMode mode, ShapeClass shape);

class Vocabulary {
 public:
  explicit Vocabulary(TaskMode mode);

  TaskMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(Token t) const;
  Token index(std::string_view word) const;
  bool contains(std::string_view word) const { return index_.contains(std::string(word)); }

  // Words separated by single spaces; EOS is appended.
  std::vector<Token> tokenize(std::string_view text) const;
  // Reads up to EOS (or PAD); special tokens are not rendered.
  std::string detokenize(std::span<const Token> tokens) const;

  // One token per line, in index order.
  std::string dump() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  TaskMode mode_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, Token> index_;
};

struct GoalDescriptor {
  std::string color;
  std::string shape_synonym;
  ShapeClass shape_class = ShapeClass::Box;

  friend bool operator==(const GoalDescriptor&, const GoalDescriptor&) = default;
};

struct Instruction {
  GoalDescriptor goal;
  std::string verb;
  std::vector<Token> tokens;  // verb the color shape EOS

  std::string text() const;
};

std::vector<GoalDescriptor> enumerate_goals(TaskMode mode);
bool goal_in_mode(const GoalDescriptor& goal, TaskMode mode);

// Builds an instruction with the given verb; throws if the goal is not part
// of the vocabulary's mode.
Instruction make_instruction(const Vocabulary& vocab, const GoalDescriptor& goal, std::string_view verb);
// Uniform verb.
Instruction sample_instruction(const Vocabulary& vocab, const GoalDescriptor& goal, Rng& rng);

// Describes an object in hindsight: its color, a uniform synonym of its
// shape class and a uniform verb.
Instruction expert_hindsight_instruction(const Vocabulary& vocab, std::string_view color, ShapeClass shape,
                                         Rng& rng);

// Parses tokens against "<verb> the <color> <shape-synonym> EOS". Returns
// nothing for malformed sequences.
std::optional<Instruction> parse_instruction(const Vocabulary& vocab, std::span<const Token> tokens);

// Tokens padded with PAD (or truncated) to kMaxInstructionTokens.
std::vector<Token> pad_tokens(std::span<const Token> tokens);

}  // namespace hindsight
