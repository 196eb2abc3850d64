#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "certctl/certctl.h"

int main(int argc, char** argv) {
  CLI::App app{"Certified computation for control: config-driven verification runs"};
  std::string config, out;
  uint64_t seed = 0;
  unsigned workers = 0;
  bool precision = false;
  app.add_option("--config", config, "JSON run config")->required();
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads for mesh scans (0 keeps the config value)");
  app.add_option("--out", out, "directory for certificate.json and data files");
  app.add_flag("--precision-audit", precision, "re-check numeric kernels at doubled precision");
  app.set_version_flag("--version", certctl_version());
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : CERTCTL_EXIT_CONFIG;
  }

  certctl_options opts;
  certctl_options_init(&opts);
  opts.has_seed = seed_opt->count() > 0;
  opts.seed = seed;
  opts.workers = workers;
  opts.precision_audit = precision;

  certctl_run* run = nullptr;
  const certctl_status st = certctl_run_config_file(config.c_str(), &opts, &run);
  if (st != CERTCTL_OK) {
    std::cerr << "certctl: " << certctl_last_error() << "\n";
    return st == CERTCTL_E_CONFIG || st == CERTCTL_E_ARGUMENT || st == CERTCTL_E_CONTRACT ? CERTCTL_EXIT_CONFIG
                                                                                           : CERTCTL_EXIT_FAILURE;
  }
  int rc = certctl_run_exit_code(run);
  if (!out.empty()) {
    if (certctl_run_write(run, out.c_str()) != CERTCTL_OK) {
      std::cerr << "certctl: " << certctl_last_error() << "\n";
      rc = CERTCTL_EXIT_FAILURE;
    }
  } else {
    std::cout << certctl_run_certificate(run) << "\n";
  }
  certctl_run_free(run);
  return rc;
}
