#ifndef CERTCTL_H
#define CERTCTL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CERTCTL_API __declspec(dllexport)
#else
#define CERTCTL_API __attribute__((visibility("default")))
#endif

typedef enum certctl_status {
  CERTCTL_OK = 0,
  CERTCTL_E_ARGUMENT = 1,
  CERTCTL_E_RESOURCE = 2,
  CERTCTL_E_CONTRACT = 3,
  CERTCTL_E_DOMAIN_EXIT = 4,
  CERTCTL_E_CONFIG = 5,
  CERTCTL_E_INTERNAL = 6,
  CERTCTL_E_IO = 7
} certctl_status;

/* Process exit codes of a run. */
enum {
  CERTCTL_EXIT_CERTIFIED = 0,
  CERTCTL_EXIT_FAILURE = 1,
  CERTCTL_EXIT_UNDECIDED = 2,
  CERTCTL_EXIT_CONFIG = 64
};

typedef struct certctl_run certctl_run;

typedef struct certctl_options {
  int has_seed;
  uint64_t seed;        /* overrides the config seed when has_seed != 0 */
  unsigned workers;     /* 0 keeps the config value */
  int precision_audit;  /* non-zero re-checks numeric kernels at doubled precision */
  const char* base_dir; /* resolves relative paths; NULL means the config file's directory or "." */
} certctl_options;

CERTCTL_API void certctl_options_init(certctl_options* opts);

/* Runs a config given as JSON text. On success *out owns a run handle. */
CERTCTL_API certctl_status certctl_run_config_text(const char* text, const certctl_options* opts, certctl_run** out);
CERTCTL_API certctl_status certctl_run_config_file(const char* path, const certctl_options* opts, certctl_run** out);

CERTCTL_API int certctl_run_exit_code(const certctl_run* run);
/* Strings are owned by the handle and live until certctl_run_free. */
CERTCTL_API const char* certctl_run_certificate(const certctl_run* run);
CERTCTL_API const char* certctl_run_numeric_fields(const certctl_run* run);
CERTCTL_API size_t certctl_run_file_count(const certctl_run* run);
CERTCTL_API const char* certctl_run_file_name(const certctl_run* run, size_t i);
CERTCTL_API const char* certctl_run_file_content(const certctl_run* run, size_t i);
/* Writes certificate.json and the data files into out_dir, creating it. */
CERTCTL_API certctl_status certctl_run_write(const certctl_run* run, const char* out_dir);
CERTCTL_API void certctl_run_free(certctl_run* run);

/* Message of the last failed call on this thread. */
CERTCTL_API const char* certctl_last_error(void);
CERTCTL_API const char* certctl_version(void);
/* Comma-separated names of the registered function forms. */
CERTCTL_API const char* certctl_form_registry(void);
/* Comma-separated subcommand names. */
CERTCTL_API const char* certctl_subcommands(void);

#ifdef __cplusplus
}
#endif

#endif
