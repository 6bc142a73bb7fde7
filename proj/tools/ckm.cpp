#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ckm/app/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional Kaplan-Meier estimation with expert-judged events"};
  app.set_version_flag("--version", ckm::app::kVersion);
  app.require_subcommand(1);

  ckm::app::RunOptions opt;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"fit", "Fit conditional survival curves at query points"},
      {"cv", "Select a bandwidth by leave-one-out cross-validation"},
      {"simulate", "Generate a synthetic portfolio or loan book"},
      {"mc-study", "Run the Monte Carlo study of the disability scenario"},
      {"bias", "Evaluate the bias of a partially informed expert"},
      {"convert-loans", "Convert a loan file to an observation CSV"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config, "INI configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out, "Output directory");
    sub->add_option("--seed", seed, "Override [run] seed");
    sub->add_option("--threads", opt.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--skip-bad", opt.skip_bad, "Skip malformed data rows instead of failing");
    if (std::string(name) == "simulate") {
      sub->add_flag("--keep-latents", opt.keep_latents, "Also write latent x, y, c columns");
    }
    if (std::string(name) == "cv") {
      sub->add_flag("--verify-loo", opt.verify_loo, "Check the shortcut against direct refits");
    }
    if (std::string(name) == "mc-study") {
      sub->add_flag("--full-scale", opt.full_scale, "Use n = 10000 and 300 replications");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ckm::app::kExitValidation;
  }

  auto* sub = app.get_subcommands().front();
  opt.command = sub->get_name();
  opt.config = config;
  if (sub->count("--out")) opt.out_dir = out;
  if (sub->count("--seed")) opt.seed = seed;

  const auto result = ckm::app::run(opt, std::cerr);
  return result.exit_code;
}
