#include "krrlab.h"

#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <sstream>
#include <string>

#include "core/common.hpp"
#include "core/config.hpp"
#include "core/runner.hpp"

struct krr_config {
  krr::Config value;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_summary_buffer;

krr_status to_status(krr::ErrorCode code) {
  switch (code) {
    case krr::ErrorCode::invalid_argument: return KRR_ERR_INVALID_ARGUMENT;
    case krr::ErrorCode::domain: return KRR_ERR_DOMAIN;
    case krr::ErrorCode::parse: return KRR_ERR_PARSE;
    case krr::ErrorCode::io: return KRR_ERR_IO;
    case krr::ErrorCode::assertion: return KRR_ERR_ASSERTION;
    case krr::ErrorCode::internal: return KRR_ERR_INTERNAL;
  }
  return KRR_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

krr_status report(const char* message) {
  g_last_error = message;
  return KRR_ERR_INVALID_ARGUMENT;
}

template <class Fn>
krr_status guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const krr::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KRR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return KRR_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* krr_version(void) { return "1.0.0"; }

const char* krr_subcommands(void) {
  static const std::string joined = [] {
    std::string s;
    for (const std::string& name : krr::subcommand_names()) {
      if (!s.empty()) s += ' ';
      s += name;
    }
    return s;
  }();
  return joined.c_str();
}

const char* krr_subcommand_summary(const char* name) {
  g_summary_buffer = name != nullptr ? krr::subcommand_summary(name) : "";
  return g_summary_buffer.c_str();
}

const char* krr_last_error(void) { return g_last_error.c_str(); }

krr_status krr_config_create(krr_config** out_config) {
  if (out_config == nullptr) return report("out_config must not be null");
  return guard([&] {
    *out_config = new krr_config{krr::Config{}};
    return KRR_OK;
  });
}

krr_status krr_config_parse_file(const char* path, krr_config** out_config) {
  if (path == nullptr) return report("path must not be null");
  if (out_config == nullptr) return report("out_config must not be null");
  return guard([&] {
    *out_config = new krr_config{krr::parse_config(path)};
    return KRR_OK;
  });
}

krr_status krr_config_parse_text(const char* json_text, krr_config** out_config) {
  if (json_text == nullptr) return report("json_text must not be null");
  if (out_config == nullptr) return report("out_config must not be null");
  return guard([&] {
    *out_config = new krr_config{krr::parse_config_text(json_text)};
    return KRR_OK;
  });
}

krr_status krr_config_set(krr_config* config, const char* dotted_key, const char* json_value) {
  if (config == nullptr) return report("config must not be null");
  if (dotted_key == nullptr) return report("dotted_key must not be null");
  if (json_value == nullptr) return report("json_value must not be null");
  return guard([&] {
    const std::string key(dotted_key);
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      krr::fail(krr::ErrorCode::invalid_argument,
                "key must have the form section.field, got '" + key + "'");
    }
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::parse_error&) {
      value = std::string(json_value);  // bare word, taken as a string value
    }
    nlohmann::json merged = nlohmann::json::parse(krr::emit_config(config->value));
    merged[key.substr(0, dot)][key.substr(dot + 1)] = value;
    config->value = krr::parse_config_text(merged.dump());
    return KRR_OK;
  });
}

krr_status krr_config_emit(const krr_config* config, char** out_json) {
  if (config == nullptr) return report("config must not be null");
  if (out_json == nullptr) return report("out_json must not be null");
  return guard([&] {
    *out_json = dup_string(krr::emit_config(config->value));
    if (*out_json == nullptr) krr::fail(krr::ErrorCode::internal, "allocation failed");
    return KRR_OK;
  });
}

void krr_config_free(krr_config* config) { delete config; }

krr_status krr_run(const krr_config* config, const char* subcommand, char** out_summary) {
  if (config == nullptr) return report("config must not be null");
  if (subcommand == nullptr) return report("subcommand must not be null");
  if (out_summary != nullptr) *out_summary = nullptr;
  std::ostringstream captured;
  const krr_status status = guard([&] {
    const int rc = krr::run_subcommand(subcommand, config->value, captured);
    if (rc == 2) {
      g_last_error = "one or more checks failed";
      return KRR_ERR_ASSERTION;
    }
    return KRR_OK;
  });
  if (out_summary != nullptr) *out_summary = dup_string(captured.str());
  return status;
}

void krr_string_free(char* text) { std::free(text); }

}  // extern "C"
