#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <string>

#include "krrlab.h"

namespace {

std::string json_quote(const std::string& raw) {
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"' || c == '\\') quoted.push_back('\\');
    quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

struct ConfigHandle {
  krr_config* ptr = nullptr;
  ~ConfigHandle() { krr_config_free(ptr); }
};

int fail_with(const std::string& context) {
  std::fprintf(stderr, "krrlab: %s: %s\n", context.c_str(), krr_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for kernel ridge regression over spectral kernels"};
  app.set_version_flag("--version", std::string(krr_version()));
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string out_dir;
  std::string format;
  std::uint64_t seed = 0;
  std::uint64_t reps = 0;
  app.add_option("--config", config_path, "JSON config file; defaults apply when omitted");
  auto* out_opt = app.add_option("--out", out_dir, "output directory, overrides output.dir");
  auto* seed_opt = app.add_option("--seed", seed, "base seed, overrides experiment.seed");
  auto* reps_opt = app.add_option("--reps", reps, "repetitions, overrides experiment.reps");
  auto* format_opt = app.add_option("--format", format, "result file format, overrides output.format")
                          ->check(CLI::IsMember({"csv", "json"}));

  // Common flags may follow the subcommand name; they fall through to the app.
  {
    std::string names(krr_subcommands());
    std::size_t start = 0;
    while (start < names.size()) {
      std::size_t end = names.find(' ', start);
      if (end == std::string::npos) end = names.size();
      const std::string name = names.substr(start, end - start);
      app.add_subcommand(name, krr_subcommand_summary(name.c_str()))->fallthrough();
      start = end + 1;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "krrlab: %s\n\n%s", e.what(), app.help().c_str());
    return 1;
  }

  const auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    std::fprintf(stderr, "krrlab: a subcommand is required\n\n%s", app.help().c_str());
    return 1;
  }
  const std::string name = chosen.front()->get_name();

  ConfigHandle config;
  if (config_path.empty()) {
    if (krr_config_create(&config.ptr) != KRR_OK) return fail_with("config defaults");
  } else if (krr_config_parse_file(config_path.c_str(), &config.ptr) != KRR_OK) {
    return fail_with(config_path);
  }

  if (*out_opt && krr_config_set(config.ptr, "output.dir", json_quote(out_dir).c_str()) != KRR_OK) {
    return fail_with("--out");
  }
  if (*seed_opt &&
      krr_config_set(config.ptr, "experiment.seed", std::to_string(seed).c_str()) != KRR_OK) {
    return fail_with("--seed");
  }
  if (*reps_opt &&
      krr_config_set(config.ptr, "experiment.reps", std::to_string(reps).c_str()) != KRR_OK) {
    return fail_with("--reps");
  }
  if (*format_opt &&
      krr_config_set(config.ptr, "output.format", json_quote(format).c_str()) != KRR_OK) {
    return fail_with("--format");
  }

  char* summary = nullptr;
  const krr_status status = krr_run(config.ptr, name.c_str(), &summary);
  if (summary != nullptr) {
    std::fputs(summary, stdout);
    krr_string_free(summary);
  }
  if (status == KRR_OK) return 0;
  if (status == KRR_ERR_ASSERTION) return 2;
  return fail_with(name);
}
