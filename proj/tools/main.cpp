#include <iostream>

#include "CLI11.hpp"
#include "tosc/cli/pipeline.hpp"

using namespace tosc;
using namespace tosc::cli;

namespace {

struct Flag {
  std::string key;  // config path
  std::string value;
};

// Flags that mirror config keys, per command.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>& command_flags() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> f{
      {"gen-data", {{"--plausible", "data.plausible"}, {"--implausible", "data.implausible"},
                    {"--fixtures", "data.fixtures"}}},
      {"train-dae", {{"--data", "paths.data"}, {"--epochs", "dae.epochs"}}},
      {"score", {{"--dae", "paths.dae"}, {"--data", "paths.data"}, {"--input", "paths.input"}}},
      {"complete", {{"--dae", "paths.dae"}, {"--input", "paths.input"}, {"--gt", "paths.gt"}, {"--shape", "paths.shape"}}},
      {"train-flow", {{"--epochs", "flow.epochs"}, {"--alpha0", "flow.alpha0"}, {"--objects", "flow.objects"}}},
      {"sample", {{"--flow", "paths.flow"}, {"--input", "paths.input"}, {"--count", "sample.count"},
                  {"--steps", "sample.steps"}}},
      {"evaluate", {{"--grasps", "paths.grasps"}, {"--shape", "paths.shape"}}},
      {"export", {{"--input", "paths.input"}, {"--grasps", "paths.grasps"}, {"--format", "export.format"}}},
  };
  return f;
}

// Flag values arrive as text; keep strings for string-typed keys.
json flag_layer(const std::string& key, const std::string& text) {
  const json& current = at_path(default_config(), key);
  if (current.is_string()) return assignment_layer(key + "=" + json(text).dump());
  return assignment_layer(key + "=" + text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-oriented shape completion and grasp generation"};
  app.require_subcommand(1);
  std::string config_file, out, seed, category, task_text;
  std::vector<std::string> sets;
  std::map<std::string, std::vector<Flag>> flags;
  for (const auto& [name, list] : command_flags()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_file, "JSON config file");
    sub->add_option("--set", sets, "Override a config key: a.b=value")->take_all();
    sub->add_option("--out", out, "Output directory (paths.out)");
    sub->add_option("--seed", seed, "Root seed (seed)");
    sub->add_option("--category", category, "Object category (task.category)");
    sub->add_option("--task", task_text, "Task text (task.text)");
    auto& fl = flags[name];
    fl.reserve(list.size());
    for (const auto& [flag, key] : list) {
      fl.push_back({key, ""});
      sub->add_option(flag, fl.back().value, key);
    }
  }

  std::string command = "tosc";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_record(command, "config", e.what(), 2).dump() << '\n';
    return 2;
  }
  command = app.get_subcommands().front()->get_name();

  json effective;
  try {
    std::vector<json> layers;
    for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
             {"paths.out", out}, {"seed", seed}, {"task.category", category}, {"task.text", task_text}}) {
      if (!value.empty()) layers.push_back(flag_layer(key, value));
    }
    for (const auto& f : flags[command]) {
      if (!f.value.empty()) layers.push_back(flag_layer(f.key, f.value));
    }
    for (const auto& s : sets) layers.push_back(assignment_layer(s));
    effective = layered_config(config_file, layers);
    const RunManifest m = run_command(command, effective);
    std::cout << m.to_json()["summary"].dump() << '\n';
    return 0;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    std::cerr << error_record(command, to_string(e.code()), e.what(), code).dump() << '\n';
    return code;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << error_record(command, "io", e.what(), 3).dump() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << error_record(command, "internal", e.what(), 1).dump() << '\n';
    return 1;
  }
}
