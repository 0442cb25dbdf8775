// lab_cli: experiment driver. Exit codes: 0 success, 1 invalid config,
// 2 solver failure, 3 a soundness column failed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acceptance/criteria.hpp"
#include "pqlab/config.hpp"
#include "pqlab/errors.hpp"
#include "pqlab/studies.hpp"

namespace {

enum ExitCode { kOk = 0, kBadConfig = 1, kSolverFailure = 2, kUnsound = 3 };

struct StudyEntry {
  const char* name;
  const char* help;
  std::vector<double> default_lambdas;
  std::vector<double> default_h;
  pqlab::StudyResult (*run)(const pqlab::ExperimentConfig&);
};

const std::vector<StudyEntry>& studies() {
  static const std::vector<StudyEntry> s = {
      {"counterexample", "sup/L2 ratio of the explicit high-contrast solution and its Lambda slope",
       {1e2, 1e3, 1e4, 1e5}, {1.0 / 16}, pqlab::counterexample_study},
      {"contrast", "measured sup/L2 ratios against the contrast power bound", {10, 100, 1000}, {1.0 / 16},
       pqlab::contrast_study},
      {"degiorgi", "Caccioppoli constants and level-set iteration on the explicit solution", {10}, {1.0 / 32},
       pqlab::degiorgi_study},
      {"lipschitz", "gradient sup against the three-term Lipschitz right side", {1}, {1.0 / 8, 1.0 / 16},
       pqlab::lipschitz_study},
      {"regularize", "mollify-and-glue convergence columns per (eps, m)", {1}, {1.0 / 8}, pqlab::regularization_study},
      {"lorentz", "rearrangement and Lorentz L^{n,1} summary of samples", {1}, {1.0 / 16}, pqlab::lorentz_study},
  };
  return s;
}

/// "--key value" pairs left over after CLI11 parsing.
void apply_extras(const std::vector<std::string>& extra, pqlab::Config& cfg) {
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const std::string& a = extra[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw pqlab::ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= extra.size()) throw pqlab::ConfigError("flag --" + key + " needs a value");
      value = extra[++i];
    }
    cfg.set(key, value);
  }
}

int run_study(const StudyEntry& entry, const std::string& config_path, const std::map<std::string, std::string>& flags,
              const std::vector<std::string>& extras, const std::string& out_path) {
  try {
    pqlab::Config cfg = config_path.empty() ? pqlab::Config{} : pqlab::Config::load(config_path);
    for (const auto& [k, v] : flags) cfg.set(k, v);
    apply_extras(extras, cfg);
    const auto ec = pqlab::ExperimentConfig::from(cfg, entry.name, entry.default_lambdas, entry.default_h);
    const pqlab::StudyResult res = entry.run(ec);
    if (out_path.empty()) {
      res.table.write(std::cout);
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw pqlab::ConfigError("cannot write " + out_path);
      res.table.write(out);
    }
    for (const auto& note : res.notes) std::cerr << note << '\n';
    if (!res.sound) {
      std::cerr << "soundness check failed\n";
      return kUnsound;
    }
    return kOk;
  } catch (const pqlab::ConvergenceError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const pqlab::InternalError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const pqlab::ConvexityError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experiments for (p,q)-growth Lipschitz bounds and high-contrast level-set iteration"};
  app.require_subcommand(1);
  // "--h" is the grid spacing, so help is long-form only.
  app.set_help_flag("--help", "print help");

  struct Shared {
    std::string config, out;
    std::map<std::string, std::string> flags;
  };
  std::vector<Shared> shared(studies().size());
  std::vector<CLI::App*> subs;
  const std::vector<std::string> keys = {"threads", "n", "p", "q", "kappa", "mu", "nu", "lambda-list", "h", "tol"};
  std::vector<std::map<std::string, std::string>> raw(studies().size());

  for (std::size_t i = 0; i < studies().size(); ++i) {
    const StudyEntry& s = studies()[i];
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->set_help_flag("--help", "print help");
    sub->allow_extras();
    sub->add_option("--config", shared[i].config, "key = value config file");
    sub->add_option("--out", shared[i].out, "CSV output path (default stdout)");
    for (const auto& k : keys) sub->add_option("--" + k, raw[i][k], "overrides '" + k + "' in the config");
    subs.push_back(sub);
  }
  CLI::App* check = app.add_subcommand("check", "run the acceptance criteria");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  if (check->parsed()) {
    const auto results = pqlab::acceptance::run_all(std::cout);
    for (const auto& r : results) {
      if (!r.pass) return kUnsound;
    }
    return kOk;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    std::map<std::string, std::string> flags;
    for (const auto& k : keys) {
      if (subs[i]->count("--" + k) > 0) flags[k] = raw[i][k];
    }
    return run_study(studies()[i], shared[i].config, flags, subs[i]->remaining(), shared[i].out);
  }
  return kBadConfig;
}
