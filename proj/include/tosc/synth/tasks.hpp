#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

struct TaskSpec {
  std::string task_text;
  std::string category;
  std::string target_region;
};

/// One row of the task -> region table. The table stands in for a
/// language-model region query and is the seam for swapping one in.
struct LexiconEntry {
  std::string_view category;
  std::string_view task_text;
  std::string_view region;
};

const std::vector<LexiconEntry>& task_lexicon();

/// Lower-cased, trimmed, internal whitespace collapsed.
std::string normalize_task_text(std::string_view text);

/// Region name for (category, task). Throws CategoryNotFound or UnknownTask.
std::string lexicon_region(std::string_view category, std::string_view task_text);

/// Task strings known for a category, in table order.
std::vector<std::string> tasks_for(std::string_view category);

/// Builds a TaskSpec through the lexicon.
TaskSpec make_task(std::string_view category, std::string_view task_text);

}  // namespace tosc
