#ifndef KRRLAB_H
#define KRRLAB_H

/* C interface to the kernel ridge regression laboratory. All state lives in
 * opaque handles; every entry point returns a status code, and the message
 * for the most recent failure on the calling thread is available through
 * krr_last_error(). Strings returned through char** out-parameters are
 * heap-allocated and must be released with krr_string_free(). */

#if defined(KRRLAB_BUILD) && defined(__GNUC__)
#define KRRLAB_API __attribute__((visibility("default")))
#else
#define KRRLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum krr_status {
  KRR_OK = 0,
  KRR_ERR_INVALID_ARGUMENT = 1,
  KRR_ERR_DOMAIN = 2,
  KRR_ERR_PARSE = 3,
  KRR_ERR_IO = 4,
  KRR_ERR_ASSERTION = 5, /* a run completed but one of its checks failed */
  KRR_ERR_INTERNAL = 6
} krr_status;

/* Experiment configuration: kernel, target, experiment, and output sections
 * with documented defaults; see docs/config.md. */
typedef struct krr_config krr_config;

/* Library version, static storage. */
KRRLAB_API const char* krr_version(void);

/* Space-separated subcommand names, static storage. */
KRRLAB_API const char* krr_subcommands(void);

/* One-line description of a subcommand; empty for unknown names. The pointer
 * stays valid until the next call on the same thread. */
KRRLAB_API const char* krr_subcommand_summary(const char* name);

/* Message of the most recent failure on this thread; empty when the last
 * call succeeded. Valid until the next library call on the same thread. */
KRRLAB_API const char* krr_last_error(void);

/* A config with every field at its default. */
KRRLAB_API krr_status krr_config_create(krr_config** out_config);

/* Parse and validate a JSON config. Unknown keys are rejected by dotted
 * path, and the error message lists every violation, not only the first. */
KRRLAB_API krr_status krr_config_parse_file(const char* path, krr_config** out_config);
KRRLAB_API krr_status krr_config_parse_text(const char* json_text, krr_config** out_config);

/* Overwrite one field, addressed as "section.field" (e.g. "experiment.seed").
 * The value is JSON text; bare words that do not parse as JSON are taken as
 * string values, so "csv" and "\"csv\"" both work. The full config is
 * re-validated; on failure the config is unchanged. */
KRRLAB_API krr_status krr_config_set(krr_config* config, const char* dotted_key,
                                     const char* json_value);

/* Serialize with every key explicit; parsing the result reproduces the
 * config exactly. */
KRRLAB_API krr_status krr_config_emit(const krr_config* config, char** out_json);

KRRLAB_API void krr_config_free(krr_config* config);

/* Run one subcommand. The human-readable summary (also printed by the CLI)
 * is stored in *out_summary when it is non-null, including for failed runs.
 * Returns KRR_OK when every check passed and KRR_ERR_ASSERTION when the run
 * completed but a check failed; other statuses are hard errors. */
KRRLAB_API krr_status krr_run(const krr_config* config, const char* subcommand,
                              char** out_summary);

/* Release a string returned through a char** out-parameter. */
KRRLAB_API void krr_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* KRRLAB_H */
