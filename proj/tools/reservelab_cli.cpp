// reservelab: run, sweep and analyze reserve-pricing experiments.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reservelab/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSchemaError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized reserve pricing experiments"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir = ".";
  int jobs = 1;
  std::uint64_t seed_offset = 0;
  std::string trace_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
    cmd->add_option("--seed-offset", seed_offset, "Added to every seed in the spec");
  };
  CLI::App* run = app.add_subcommand("run", "One trace and summary per seed and horizon");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Multi-seed sweep with median/IQR summary");
  add_common(sweep);
  CLI::App* analyze = app.add_subcommand("analyze", "Report on a directory of traces");
  analyze->add_option("trace_dir", trace_dir, "Directory holding trace_*.csv");
  analyze->add_option("--out", trace_dir, "Same as the positional directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kSchemaError;
  }

  try {
    reservelab::CommandOptions options{out_dir, jobs, seed_offset};
    if (*run) {
      reservelab::cmd_run(reservelab::load_spec(spec_path), options);
    } else if (*sweep) {
      const auto result = reservelab::cmd_sweep(reservelab::load_spec(spec_path), options);
      for (const auto& s : result.summary) {
        std::cout << "T=" << s.horizon << " median_final_regret="
                  << reservelab::format_double(s.median_final_regret) << " median_curve_exponent="
                  << (s.median_curve_exponent ? reservelab::format_double(*s.median_curve_exponent)
                                              : "nan")
                  << "\n";
      }
    } else if (*analyze) {
      if (trace_dir.empty()) {
        std::cerr << "analyze: a trace directory is required\n";
        return kSchemaError;
      }
      reservelab::cmd_analyze(trace_dir);
    }
  } catch (const reservelab::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchemaError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
