#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cylab/problem_spec.hpp"
#include "cylab/scenarios.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cylab::spec::SpecError("(file)", "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cylab: mixed Dirichlet/Neumann problems on the half-cylinder via inversion"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string sections_file;
  bool dump_mesh = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--spec", spec_path, "problem spec JSON file")->required();
    sub->add_option("--out", out_dir, "output directory (default: out)");
    sub->add_option("--override", overrides,
                    "spec override key.path=value (repeatable; value parsed as JSON)");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the mixed problem and dump the solution");
  add_common(solve);
  solve->add_flag("--dump-mesh", dump_mesh, "also write vertices/triangles/edges CSV files");

  CLI::App* cap = app.add_subcommand("capacity", "compute one capacity value");
  add_common(cap);

  CLI::App* wiener = app.add_subcommand("wiener", "capacity integrand scan and regularity verdict");
  add_common(wiener);

  CLI::App* classify = app.add_subcommand("classify", "classify section statistics");
  add_common(classify);
  classify->add_option("--sections", sections_file,
                       "sections.csv to classify (default: <out>/sections.csv)");

  CLI::App* verify = app.add_subcommand("verify-map", "randomized certification of the map axioms");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string raw = cylab::spec::apply_overrides(read_file(spec_path), overrides);
    const cylab::spec::ProblemSpec ps = cylab::spec::parse_spec_text(raw);
    cylab::scenarios::RunOptions opts;
    opts.dump_mesh = dump_mesh;
    opts.sections_file = sections_file;
    return cylab::scenarios::run_command(app.get_subcommands().front()->get_name(), ps, out_dir,
                                         opts);
  } catch (const cylab::spec::SpecError& e) {
    std::cerr << "spec error at " << e.field << ": " << e.constraint << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
