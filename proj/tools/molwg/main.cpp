#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <thread>

#include "molwg/config.hpp"
#include "molwg/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> seeds;
  std::string out;
  bool strict = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* app, Flags& f, bool need_config) {
  auto* c = app->add_option("--config", f.config, "experiment configuration file")->check(CLI::ExistingFile);
  if (need_config) c->required();
  app->add_option("--seed", f.seeds, "override a named seed, NAME=U64 (repeatable)");
  app->add_option("--out", f.out, "output directory (overrides the config)");
  app->add_flag("--strict", f.strict, "treat unknown config keys as errors");
  app->add_option("--threads", f.threads, "worker threads")->check(CLI::Range(1u, 1024u));
}

std::map<std::string, std::uint64_t> parse_seeds(const std::vector<std::string>& items) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    const std::string value = eq == std::string::npos ? "" : s.substr(eq + 1);
    if (eq == 0 || eq == std::string::npos || value.empty() ||
        value.find_first_not_of("0123456789") != std::string::npos)
      throw CLI::ValidationError("--seed", "expected NAME=U64, got '" + s + "'");
    try {
      out[s.substr(0, eq)] = std::stoull(value);
    } catch (const std::out_of_range&) {
      throw CLI::ValidationError("--seed", "seed value exceeds 64 bits in '" + s + "'");
    }
  }
  return out;
}

void warn(const std::string& w) {
  const std::string prefix = "warning: ";
  std::cerr << (w.rfind(prefix, 0) == 0 ? w : prefix + w) << "\n";
}

int run_audit(const Flags& f) {
  std::string dir = f.out;
  if (dir.empty() && !f.config.empty()) dir = molwg::config::parse_config(f.config, f.strict).output_dir;
  if (dir.empty()) dir = "out";
  const auto rep = molwg::cli::audit(dir);
  for (const auto& p : rep.problems) std::cerr << "audit: " << p << "\n";
  std::cout << "audit: " << rep.manifests << " manifest(s), " << rep.outputs << " output(s), "
            << rep.problems.size() << " problem(s)\n";
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"molwg: waveguide-coupled single-molecule source modelling"};
  app.set_version_flag("--version", molwg::cli::tool_version());
  app.require_subcommand(1);

  Flags flags;
  std::string chosen;
  for (const auto& name : molwg::cli::commands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " command");
    add_common(sub, flags, true);
    sub->callback([&chosen, name] { chosen = name; });
  }
  auto* aud = app.add_subcommand("audit", "check output files against their manifests");
  add_common(aud, flags, false);
  aud->callback([&chosen] { chosen = "audit"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (chosen == "audit") return run_audit(flags);

    molwg::cli::RunOptions opt;
    opt.out_dir = flags.out;
    opt.threads = flags.threads;
    opt.seed_overrides = parse_seeds(flags.seeds);
    const auto cfg = molwg::config::parse_config(flags.config, flags.strict);
    std::vector<std::string> warnings = cfg.warnings;
    for (const auto& w : warnings) warn(w);
    const std::size_t shown = warnings.size();
    const auto manifest = molwg::cli::run_command(chosen, cfg, opt, &warnings);
    for (std::size_t i = shown; i < warnings.size(); ++i) warn(warnings[i]);
    for (const auto& o : manifest.outputs) std::cout << o.path << "  " << o.sha256 << "\n";
    std::cout << manifest.command << ".manifest.json written\n";
    return 0;
  } catch (const molwg::config::ConfigError& e) {
    for (const auto& err : e.errors()) std::cerr << "config error: " << err << "\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
