// esigo command-line driver: batch experiment runner plus small one-shot
// utilities (weight condition report, version).

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <esigo/esigo.hpp>

namespace {

/// Weight descriptor grammar: `kind[:arg[,arg...]]`, e.g.
///   truncation-linear | power:3 | shifted-sigmoid:10,0.25 | finite:1,0.6,0.2
esigo::Weight parse_weight_descriptor(const std::string& desc) {
  std::string kind = desc;
  std::vector<double> args;
  if (const auto colon = desc.find(':'); colon != std::string::npos) {
    kind = desc.substr(0, colon);
    std::stringstream ss(desc.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw esigo::ConfigError("weight descriptor: bad number '" + tok + "'");
      }
    }
  }
  if (kind == "truncation-linear") return esigo::Weight::truncation_linear();
  if (kind == "power") return esigo::Weight::power(args.empty() ? 2.0 : args[0]);
  if (kind == "shifted-sigmoid")
    return esigo::Weight::shifted_sigmoid(args.size() > 0 ? args[0] : 10.0,
                                          args.size() > 1 ? args[1] : 0.25);
  if (kind == "finite") {
    if (args.empty()) throw esigo::ConfigError("weight descriptor: finite needs weights");
    return esigo::Weight::from_finite_weights(args);
  }
  throw esigo::ConfigError("unknown weight kind '" + kind +
                           "' (expected truncation-linear, power, shifted-sigmoid, finite)");
}

std::string default_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ESIGO_OUT_DIR"); env && *env) return env;
  return "esigo-out";
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& only,
            unsigned workers, const std::string& out_dir) {
  esigo::ConfigFile cfg;
  try {
    cfg = esigo::parse_config_file(config_path);
  } catch (const esigo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  std::vector<const esigo::ExperimentSpec*> selected;
  for (const esigo::ExperimentSpec& spec : cfg.experiments) {
    if (only.empty() ||
        std::find(only.begin(), only.end(), spec.id) != only.end())
      selected.push_back(&spec);
  }
  for (const std::string& id : only) {
    const bool known = std::any_of(cfg.experiments.begin(), cfg.experiments.end(),
                                   [&](const auto& s) { return s.id == id; });
    if (!known) {
      std::fprintf(stderr, "config error: %s: no experiment with id '%s'\n",
                   config_path.c_str(), id.c_str());
      return 2;
    }
  }
  if (selected.empty()) {
    std::fprintf(stderr, "config error: %s: nothing to run\n", config_path.c_str());
    return 2;
  }

  std::vector<esigo::ExperimentReport> reports(selected.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < selected.size(); i = next.fetch_add(1))
      reports[i] = esigo::run_experiment(*selected[i], out_dir);
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(selected.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  int failed = 0;
  for (const esigo::ExperimentReport& rep : reports) {
    std::printf("%s\n", rep.summary().c_str());
    if (!rep.passed) ++failed;
  }
  std::printf("%zu experiment(s): %zu passed, %d failed; outputs in %s\n", reports.size(),
              reports.size() - failed, failed, out_dir.c_str());
  return failed == 0 ? 0 : 1;
}

int cmd_b2(const std::string& weight_desc, int dim) {
  try {
    const esigo::Weight w = parse_weight_descriptor(weight_desc);
    if (dim < 1) throw esigo::ConfigError("--dim must be >= 1");
    const esigo::B1Report b1 = esigo::check_b1(w, 2001);
    const double alpha = esigo::alpha_b2(w, dim);
    std::printf("weight: %s\n", w.describe().c_str());
    std::printf("B1: %s (non-increasing: %s, w(0)-w(1) = %.12g, Lipschitz <= %.6g)\n",
                b1.pass ? "pass" : "fail", b1.non_increasing ? "yes" : "no", b1.gap,
                b1.lipschitz_estimate);
    std::printf("alpha(d=%d) = %.12g\n", dim, alpha);
    std::printf("B2: %s\n", alpha > 0.0 ? "pass" : "fail");
    return alpha > 0.0 ? 0 : 1;
  } catch (const esigo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const esigo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"esigo: isotropic evolution-strategy flow toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> only;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out_flag;
  CLI::App* run = app.add_subcommand("run", "run experiments from a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--only", only, "run only the experiment(s) with these ids");
  run->add_option("--workers", workers, "worker threads (default: hardware concurrency)");
  run->add_option("--out", out_flag,
                  "output directory (default: $ESIGO_OUT_DIR, then ./esigo-out)");

  std::string weight_desc;
  int dim = 1;
  CLI::App* b2 = app.add_subcommand("b2", "weight-condition report for a selection weight");
  b2->add_option("--weight", weight_desc, "weight descriptor, e.g. power:3")->required();
  b2->add_option("--dim", dim, "search-space dimension for the variance rate");

  CLI::App* version = app.add_subcommand("version", "print the library version");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, only, workers, default_out_dir(out_flag));
  if (b2->parsed()) return cmd_b2(weight_desc, dim);
  if (version->parsed()) {
    std::printf("esigo %s\n", esigo::version_string);
    return 0;
  }
  return 0;
}
