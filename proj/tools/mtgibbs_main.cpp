// Command-line front end; links only the public C API of the shared library.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtgibbs/mtgibbs.h"

namespace {

using nlohmann::json;

struct Flags {
  std::string config_path;
  std::string manifest;
  std::string out = "out";
  std::string window_file;
  std::vector<std::string> model_files;
  int grid = 0;
  int dummy = 0;
  double border = -1.0;
  double max_range = -1.0;
  std::string models;
  std::uint64_t seed = 0;
  int threads = 0;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    std::cerr << R"({"error": {"status": "io-error", "message": "cannot read config )"
              << path << "\"}}\n";
    std::exit(MTG_ERR_IO);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    std::cerr << R"({"error": {"status": "schema-error", "message": ")" << e.what()
              << "\"}}\n";
    std::exit(MTG_ERR_SCHEMA);
  }
  return doc;
}

// flags win over the config file
json merged_config(const Flags& flags, const CLI::App& cmd) {
  json doc = load_config(flags.config_path);
  if (cmd.count("--grid")) doc["grid"] = flags.grid;
  if (cmd.count("--dummy")) doc["dummy"] = flags.dummy;
  if (cmd.count("--border")) doc["border"] = flags.border;
  if (cmd.count("--max-range")) doc["max_range"] = flags.max_range;
  if (cmd.count("--seed")) doc["seed"] = flags.seed;
  if (cmd.count("--threads")) doc["threads"] = flags.threads;
  if (cmd.count("--models")) {
    json models = json::array();
    std::stringstream ss(flags.models);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) models.push_back(item);
    doc["models"] = std::move(models);
  }
  return doc;
}

[[noreturn]] void fail_with(mtg_status status) {
  json err{{"error",
            {{"status", mtg_status_name(status)},
             {"code", static_cast<int>(status)},
             {"message", mtg_last_error()}}}};
  std::cerr << err.dump(2) << "\n";
  std::exit(static_cast<int>(status));
}

void check(mtg_status status) {
  if (status != MTG_OK) fail_with(status);
}

void print_report(char* report) {
  if (report != nullptr) {
    std::cout << report << "\n";
    mtg_string_free(report);
  }
}

struct CohortGuard {
  mtg_cohort* handle = nullptr;
  ~CohortGuard() { mtg_cohort_free(handle); }
};

struct ModelsGuard {
  std::vector<mtg_model*> handles;
  ~ModelsGuard() {
    for (auto* m : handles) mtg_model_free(m);
  }
};

mtg_cohort* load_cohort_or_die(const Flags& flags, CohortGuard& guard) {
  if (flags.manifest.empty()) {
    std::cerr << R"({"error": {"status": "invalid-argument", "message": )"
              << R"("--manifest is required for this command"}})" << "\n";
    std::exit(MTG_ERR_INVALID);
  }
  check(mtg_cohort_load(flags.manifest.c_str(), &guard.handle));
  if (!flags.window_file.empty())
    check(mtg_cohort_set_window(guard.handle, flags.window_file.c_str()));
  return guard.handle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mtgibbs: multitype Gibbs point process models for replicated marked "
      "point patterns"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mtg_version()));

  Flags flags;
  app.add_option("--config", flags.config_path,
                 "JSON configuration file (flags override it)");
  app.add_option("--manifest", flags.manifest, "cohort manifest JSON");
  app.add_option("--out", flags.out, "output directory");
  app.add_option("--window", flags.window_file,
                 "common-window JSON to restrict the cohort to");
  app.add_option("--grid", flags.grid, "intensity/integration grid resolution");
  app.add_option("--dummy", flags.dummy, "dummy grid side per mark");
  app.add_option("--border", flags.border, "border margin (µm)");
  app.add_option("--max-range", flags.max_range,
                 "maximum interaction range (µm)");
  app.add_option("--models", flags.models,
                 "comma-separated model labels, or 'all'");
  app.add_option("--seed", flags.seed, "root random seed");
  app.add_option("--threads", flags.threads, "worker thread cap");

  auto* cmd_window = app.add_subcommand(
      "window", "estimate per-patient windows and their intersection");
  auto* cmd_summaries = app.add_subcommand(
      "summaries", "inhomogeneous K/L functions, pooled across patients");
  auto* cmd_profile = app.add_subcommand(
      "profile", "profile pseudolikelihood over the irregular parameters");
  auto* cmd_fit =
      app.add_subcommand("fit", "maximum pseudolikelihood fits of the menu");
  auto* cmd_residuals = app.add_subcommand(
      "residuals", "residual totals and the model comparison table");
  cmd_residuals->add_option("--model-file", flags.model_files,
                            "fitted model JSON (repeatable)");
  auto* cmd_simulate = app.add_subcommand(
      "simulate", "Metropolis-Hastings simulation of a known model");

  CLI11_PARSE(app, argc, argv);

  const json config = merged_config(flags, app);
  const std::string config_str = config.dump();
  char* report = nullptr;

  if (cmd_window->parsed()) {
    CohortGuard cohort;
    load_cohort_or_die(flags, cohort);
    check(mtg_run_window(cohort.handle, config_str.c_str(), flags.out.c_str(),
                         &report));
  } else if (cmd_summaries->parsed()) {
    CohortGuard cohort;
    load_cohort_or_die(flags, cohort);
    check(mtg_run_summaries(cohort.handle, config_str.c_str(), flags.out.c_str(),
                            &report));
  } else if (cmd_profile->parsed()) {
    CohortGuard cohort;
    load_cohort_or_die(flags, cohort);
    check(mtg_run_profile(cohort.handle, config_str.c_str(), flags.out.c_str(),
                          &report));
  } else if (cmd_fit->parsed()) {
    CohortGuard cohort;
    load_cohort_or_die(flags, cohort);
    check(mtg_run_fit(cohort.handle, config_str.c_str(), flags.out.c_str(),
                      &report));
  } else if (cmd_residuals->parsed()) {
    CohortGuard cohort;
    load_cohort_or_die(flags, cohort);
    std::vector<std::string> model_files = flags.model_files;
    if (model_files.empty() && config.contains("model_files"))
      for (const auto& path : config["model_files"])
        model_files.push_back(path.get<std::string>());
    if (model_files.empty()) {
      std::cerr << R"({"error": {"status": "invalid-argument", "message": )"
                << R"("supply fitted models via --model-file"}})" << "\n";
      return MTG_ERR_INVALID;
    }
    ModelsGuard models;
    for (const auto& path : model_files) {
      mtg_model* handle = nullptr;
      check(mtg_model_load(path.c_str(), &handle));
      models.handles.push_back(handle);
    }
    check(mtg_run_residuals(cohort.handle, models.handles.data(),
                            static_cast<int>(models.handles.size()),
                            config_str.c_str(), flags.out.c_str(), &report));
  } else if (cmd_simulate->parsed()) {
    check(mtg_run_simulate(config_str.c_str(), flags.out.c_str(), &report));
  }

  print_report(report);
  return 0;
}
