#include <CLI11.hpp>

#include "ddcpim/commands.hpp"

using namespace ddcpim;

int main(int argc, char** argv) {
  CLI::App app{"ddcpim: FCC weight transform and DDC-PIM simulator"};
  app.require_subcommand(1);
  const std::vector<std::string> configs{"baseline", "fcc", "fcc+dbis", "full"};

  TransformOptions t;
  auto* transform = app.add_subcommand("transform", "symmetrize, quantize and decompose filter pairs");
  transform->add_option("--netspec", t.netspec, "network spec (JSON)")->required();
  transform->add_option("--weights", t.weights, "weights DDCT of a single-layer netspec");
  transform->add_option("--weights-dir", t.weights_dir, "directory with <id>.weights.ddct");
  transform->add_option("--out-dir", t.out_dir, "output directory")->default_val(".");
  transform->add_flag("--trace", t.trace, "print every pipeline stage per twin-weight pair");
  transform->add_option("--trace-limit", t.trace_limit, "trace lines per layer")->default_val(64);
  transform->add_flag("--repair-saturated", t.repair_saturated, "re-mirror pairs clamped during symmetrize");

  MapOptions m;
  auto* map = app.add_subcommand("map", "print schedules");
  map->add_option("--netspec", m.netspec)->required();
  map->add_option("--weights-dir", m.weights_dir, "transformed weights; zeros if omitted");
  map->add_option("--config", m.config)->check(CLI::IsMember(configs))->default_val("full");
  map->add_option("--out-dir", m.out_dir, "write <id>.schedule.txt files here");

  SimulateOptions s;
  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "run a network through the macro model");
  simulate->add_option("--netspec", s.netspec)->required();
  simulate->add_option("--weights-dir", s.weights_dir, "transform output")->required();
  simulate->add_option("--input", s.input, "int8 DDCT [C][H][W]")->required();
  auto* sim_cfg = simulate->add_option("--config", sim_config)->check(CLI::IsMember(configs));
  simulate->add_option("--out-dir", s.out_dir)->default_val(".");

  ValidateOptions v;
  auto* validate_cmd = app.add_subcommand("validate", "differential test against the reference convolution");
  validate_cmd->add_option("--netspec", v.netspec)->required();
  validate_cmd->add_option("--weights-dir", v.weights_dir)->required();
  validate_cmd->add_option("--trials", v.trials)->default_val(100);
  validate_cmd->add_option("--seed", v.seed)->default_val(1);
  validate_cmd->add_option("--config", v.config)->check(CLI::IsMember(configs))->default_val("full");
  validate_cmd->add_option("--out-dir", v.out_dir, "failing-case dumps");

  ReportOptions r;
  auto* report = app.add_subcommand("report", "cycle report over the ablation ladder");
  report->add_option("--netspec", r.netspec)->required();
  report->add_option("--out-dir", r.out_dir, "write report.csv here");
  report->add_option("--write-latency", r.constants.write_latency)->default_val(1);
  report->add_option("--cycles-per-plane", r.constants.cycles_per_bit_plane)->default_val(1);

  GenOptions g;
  auto* gen = app.add_subcommand("gen", "random float weights and int8 input for a netspec");
  gen->add_option("--netspec", g.netspec)->required();
  gen->add_option("--out-dir", g.out_dir)->required();
  gen->add_option("--seed", g.seed)->default_val(1);
  gen->add_option("--stddev", g.stddev)->default_val(0.1);

  PackOptions p;
  auto* pack = app.add_subcommand("pack", "write a DDCT file from literal values");
  pack->add_option("--dtype", p.dtype)->check(CLI::IsMember({"float32", "int8", "int16", "int32"}))->default_val("float32");
  pack->add_option("--dims", p.dims)->delimiter(',')->required();
  pack->add_option("--values", p.values)->delimiter(',')->required()->allow_extra_args(false);
  pack->add_option("--out", p.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  if (*transform) return run_command([&] { return cmd_transform(t); });
  if (*map) return run_command([&] { return cmd_map(m); });
  if (*simulate) {
    if (*sim_cfg) s.config = sim_config;
    return run_command([&] { return cmd_simulate(s); });
  }
  if (*validate_cmd) return run_command([&] { return cmd_validate(v); });
  if (*report) return run_command([&] { return cmd_report(r); });
  if (*gen) return run_command([&] { return cmd_gen(g); });
  if (*pack) return run_command([&] { return cmd_pack(p); });
  return kExitInput;
}
