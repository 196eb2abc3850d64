#include "certctl/certctl.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "certctl/errors.hpp"
#include "certctl/forms.hpp"
#include "certctl/runner.hpp"

struct certctl_run {
  int exit_code = 0;
  std::string certificate;
  std::string numeric;
  std::vector<certctl::runner::DataFile> files;
};

namespace {

thread_local std::string last_error;

certctl_status status_of(certctl::ErrorKind k) {
  switch (k) {
    case certctl::ErrorKind::argument: return CERTCTL_E_ARGUMENT;
    case certctl::ErrorKind::resource: return CERTCTL_E_RESOURCE;
    case certctl::ErrorKind::contract: return CERTCTL_E_CONTRACT;
    case certctl::ErrorKind::domain_exit: return CERTCTL_E_DOMAIN_EXIT;
    case certctl::ErrorKind::config: return CERTCTL_E_CONFIG;
    case certctl::ErrorKind::internal: return CERTCTL_E_INTERNAL;
  }
  return CERTCTL_E_INTERNAL;
}

certctl_status fail(certctl_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
certctl_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const certctl::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CERTCTL_E_RESOURCE, "out of memory");
  } catch (const std::exception& e) {
    return fail(CERTCTL_E_INTERNAL, e.what());
  }
}

certctl::runner::RunOptions options(const certctl_options* o, const std::string& fallback_dir) {
  certctl::runner::RunOptions r;
  r.base_dir = fallback_dir;
  if (!o) return r;
  if (o->has_seed) r.seed = o->seed;
  if (o->workers > 0) r.workers = o->workers;
  r.precision_audit = o->precision_audit != 0;
  if (o->base_dir) r.base_dir = o->base_dir;
  return r;
}

certctl_status finish(certctl::runner::RunResult&& res, certctl_run** out) {
  auto* h = new certctl_run;
  h->exit_code = res.exit_code;
  h->certificate = res.certificate.dump(2);
  h->numeric = certctl::runner::numeric_fields(res.certificate).dump(2);
  h->files = std::move(res.files);
  *out = h;
  return CERTCTL_OK;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

extern "C" {

void certctl_options_init(certctl_options* opts) {
  if (opts) *opts = certctl_options{0, 0, 0, 0, nullptr};
}

certctl_status certctl_run_config_text(const char* text, const certctl_options* opts, certctl_run** out) {
  if (!text || !out) return fail(CERTCTL_E_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { return finish(certctl::runner::run_text(text, options(opts, ".")), out); });
}

certctl_status certctl_run_config_file(const char* path, const certctl_options* opts, certctl_run** out) {
  if (!path || !out) return fail(CERTCTL_E_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(path);
  if (!in) return fail(CERTCTL_E_CONFIG, std::string("cannot open config ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string dir = std::filesystem::path(path).parent_path().string();
  if (dir.empty()) dir = ".";
  return guarded([&] { return finish(certctl::runner::run_text(ss.str(), options(opts, dir)), out); });
}

int certctl_run_exit_code(const certctl_run* run) { return run ? run->exit_code : CERTCTL_EXIT_FAILURE; }

const char* certctl_run_certificate(const certctl_run* run) { return run ? run->certificate.c_str() : nullptr; }

const char* certctl_run_numeric_fields(const certctl_run* run) { return run ? run->numeric.c_str() : nullptr; }

size_t certctl_run_file_count(const certctl_run* run) { return run ? run->files.size() : 0; }

const char* certctl_run_file_name(const certctl_run* run, size_t i) {
  return run && i < run->files.size() ? run->files[i].name.c_str() : nullptr;
}

const char* certctl_run_file_content(const certctl_run* run, size_t i) {
  return run && i < run->files.size() ? run->files[i].content.c_str() : nullptr;
}

certctl_status certctl_run_write(const certctl_run* run, const char* out_dir) {
  if (!run || !out_dir) return fail(CERTCTL_E_ARGUMENT, "null argument");
  return guarded([&] {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) return fail(CERTCTL_E_IO, std::string("cannot create ") + out_dir + ": " + ec.message());
    auto put = [&](const std::string& name, const std::string& content) {
      const fs::path p = fs::path(out_dir) / name;
      std::ofstream f(p, std::ios::binary);
      f << content;
      return static_cast<bool>(f);
    };
    if (!put("certificate.json", run->certificate + "\n"))
      return fail(CERTCTL_E_IO, std::string("cannot write certificate in ") + out_dir);
    for (const auto& d : run->files)
      if (!put(d.name, d.content)) return fail(CERTCTL_E_IO, "cannot write " + d.name);
    return CERTCTL_OK;
  });
}

void certctl_run_free(certctl_run* run) { delete run; }

const char* certctl_last_error(void) { return last_error.c_str(); }

const char* certctl_version(void) { return certctl::runner::kVersion; }

const char* certctl_form_registry(void) {
  static const std::string s = join(certctl::forms::registry());
  return s.c_str();
}

const char* certctl_subcommands(void) {
  static const std::string s = join(certctl::runner::subcommands());
  return s.c_str();
}

}  // extern "C"
