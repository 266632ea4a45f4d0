#include "tosc/synth/tasks.hpp"

#include <cctype>

#include "tosc/common/error.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc {

const std::vector<LexiconEntry>& task_lexicon() {
  static const std::vector<LexiconEntry> table = {
      {"mug", "pick up by handle", "handle"},
      {"mug", "pour water", "handle"},
      {"mug", "hold the cup", "body"},
      {"hammer", "hammer a nail", "handle"},
      {"hammer", "hand over", "head"},
      {"bottle", "open the cap", "cap"},
      {"bottle", "pour water", "body"},
      {"bottle", "hand over", "neck"},
      {"pan", "cook", "handle"},
      {"pan", "hand over", "body"},
      {"knife", "cut", "handle"},
      {"knife", "hand over", "blade"},
      {"teapot", "pour tea", "handle"},
      {"teapot", "open the lid", "lid"},
      {"teapot", "hand over", "body"},
  };
  return table;
}

std::string normalize_task_text(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string lexicon_region(std::string_view category, std::string_view task_text) {
  kind_from_name(category);  // CategoryNotFound for unknown categories
  const std::string key = normalize_task_text(task_text);
  for (const auto& e : task_lexicon()) {
    if (e.category == category && e.task_text == key) return std::string(e.region);
  }
  fail(ErrorCode::UnknownTask,
       "task not in lexicon for " + std::string(category) + ": " + std::string(task_text));
}

std::vector<std::string> tasks_for(std::string_view category) {
  kind_from_name(category);
  std::vector<std::string> out;
  for (const auto& e : task_lexicon()) {
    if (e.category == category) out.emplace_back(e.task_text);
  }
  return out;
}

TaskSpec make_task(std::string_view category, std::string_view task_text) {
  return TaskSpec{normalize_task_text(task_text), std::string(category),
                  lexicon_region(category, task_text)};
}

}  // namespace tosc
