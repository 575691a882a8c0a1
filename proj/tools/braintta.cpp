// braintta: assembler, simulator, kernel generator and verifier front end.
//
// Exit codes: 0 success, 1 domain failure (diagnostics, faults, mismatches),
// 2 I/O or configuration failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "braintta/braintta.hpp"

namespace fs = std::filesystem;
using namespace braintta;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Domain failure already reported to stderr.
struct Failed {};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  return dir;
}

MachineConfig machine_from(const std::string& path) { return path.empty() ? default_config() : load_machine(path); }

CostTable costs_from(const std::string& path) { return path.empty() ? default_cost_table() : load_cost_table(path); }

LayerDesc layer_from(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  return layer_from_json(j);
}

Program assemble(const std::string& path, const MachineConfig& m) {
  const std::string text = read_file(path);
  try {
    Program p = parse_asm(text, m);
    if (auto diags = validate(p, m); !diags.empty()) {
      for (const auto& d : diags) std::cerr << format_diagnostic(d, path) << "\n";
      throw Failed{};
    }
    return p;
  } catch (const AsmError& e) {
    std::cerr << e.report(path);
    throw Failed{};
  }
}

std::string dump(const BankedMemory& mem) {
  std::ostringstream os;
  dump_image(mem, os);
  return os.str();
}

void load_image_file(CoreState& s, const MachineConfig& m, const std::string& memory, const std::string& path) {
  if (path.empty()) return;
  const int mi = m.find_memory(memory);
  if (mi < 0) throw ConfigError("machine has no memory named " + memory);
  std::istringstream in(read_file(path));
  load_image(s.memories[static_cast<std::size_t>(mi)], in);
}

// ---------------------------------------------------------------- asm / disasm

constexpr const char* kProgramSchema = "braintta.program/1";

int cmd_asm(const std::string& in, const std::string& machine, const std::string& out) {
  const auto m = machine_from(machine);
  const Program p = assemble(in, m);
  nlohmann::json j;
  j["schema"] = kProgramSchema;
  j["instructions"] = p.instructions.size();
  j["instruction_bits"] = encode_width(p, m);
  j["labels"] = p.labels;
  j["asm"] = emit_asm(p);
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else write_file(out, text);
  return 0;
}

int cmd_disasm(const std::string& in, const std::string& machine) {
  const auto m = machine_from(machine);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(in));
    if (j.at("schema") != kProgramSchema) throw IoError("'" + in + "' is not a program artifact");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + in + "': " + e.what());
  }
  try {
    std::cout << emit_asm(parse_asm(j.at("asm").get<std::string>(), m));
  } catch (const AsmError& e) {
    std::cerr << e.report(in);
    throw Failed{};
  }
  return 0;
}

// ---------------------------------------------------------------- run

struct RunOptions {
  std::string machine, costs, program, layer, dmem, pmem, out = ".";
  std::uint64_t max_cycles = 100'000'000;
  std::uint64_t seed = 1;
  std::uint64_t ops = 0;
  bool trace = false;
  bool no_loopbuffer = false;
};

int cmd_run(const RunOptions& o) {
  if (o.program.empty() == o.layer.empty()) throw IoError("run needs exactly one of --program or --layer");
  auto m = machine_from(o.machine);
  if (o.no_loopbuffer) m.loopbuffer_enabled = false;
  const auto costs = costs_from(o.costs);

  Program p;
  CoreState s;
  std::uint64_t ops = o.ops;
  std::optional<LayerDesc> desc;
  std::optional<Generated> gen;
  LayerTensors tensors;
  if (!o.layer.empty()) {
    desc = layer_from(o.layer);
    gen = gen_layer(*desc, m);
    p = gen->program;
    tensors = random_tensors(*desc, o.seed);
    s = make_state(m, &p);
    apply_images(s, m, pack_tensors(*desc, gen->layout, tensors));
    if (ops == 0) ops = ops_of_layer(*desc);
  } else {
    p = assemble(o.program, m);
    s = make_state(m, &p);
  }
  load_image_file(s, m, "DMEM", o.dmem);
  load_image_file(s, m, "PMEM", o.pmem);

  const RunResult r = Core(m, p).run(s, o.max_cycles, o.trace);
  const EnergyReport rep = account(r.event_log, costs, ops, m.clock_mhz);

  const fs::path dir = out_dir(o.out);
  nlohmann::json j;
  j["cycles"] = r.cycles;
  j["halt_reason"] = std::string(to_string(r.halt_reason));
  if (!r.error.empty()) j["error"] = r.error;
  j["fetches"] = r.fetches;
  j["replays"] = r.replays;
  j["mac_triggers"] = r.mac_triggers;
  j["mac_utilization"] = r.mac_utilization();
  j["instruction_bits"] = encode_width(p, m);
  j["energy"] = to_json(rep);
  if (desc) {
    j["layer"] = to_json(*desc);
    j["layout"] = to_json(gen->layout);
    const auto match = oracle::compare(s.memory(m, "DMEM").words(), oracle::layer_ref(*desc, tensors), gen->layout);
    j["oracle_mismatches"] = match.mismatches;
  }
  write_file(dir / "result.json", j.dump(2) + "\n");
  write_file(dir / "energy.txt", format_report(rep));
  for (std::size_t i = 0; i < m.memories.size(); ++i)
    write_file(dir / (m.memories[i].name + ".hex"), dump(s.memories[i]));
  if (o.trace) {
    std::string t;
    for (const auto& line : r.trace) t += line + "\n";
    write_file(dir / "trace.txt", t);
  }

  std::cout << "cycles " << r.cycles << "  " << to_string(r.halt_reason) << "\n" << format_report(rep);
  if (r.halt_reason != HaltReason::Halted) {
    std::cerr << "run stopped: " << (r.error.empty() ? std::string(to_string(r.halt_reason)) : r.error) << "\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------- gen

int cmd_gen(const std::string& layer, const std::string& machine, const std::string& out, std::uint64_t seed) {
  const auto m = machine_from(machine);
  const LayerDesc d = layer_from(layer);
  const Generated g = gen_layer(d, m);
  const LayerTensors t = random_tensors(d, seed);
  const auto images = pack_tensors(d, g.layout, t);

  const fs::path dir = out_dir(out);
  write_file(dir / "kernel.tta", emit_asm(g.program));
  write_file(dir / "layout.json", to_json(g.layout).dump(2) + "\n");
  CoreState s = make_state(m);
  apply_images(s, m, images);
  write_file(dir / "DMEM.hex", dump(s.memory(m, "DMEM")));
  write_file(dir / "PMEM.hex", dump(s.memory(m, "PMEM")));
  nlohmann::json tj;
  tj["seed"] = seed;
  tj["ifm"] = t.ifm;
  if (!t.ifm2.empty()) tj["ifm2"] = t.ifm2;
  if (!t.weights.empty()) tj["weights"] = t.weights;
  if (!t.bias.empty()) tj["bias"] = t.bias;
  tj["expected"] = oracle::layer_ref(d, t);
  write_file(dir / "tensors.json", tj.dump() + "\n");
  std::cout << "kernel: " << g.program.instructions.size() << " instructions, ops " << ops_of_layer(d) << "\n";
  return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyOptions {
  std::string layer, machine, kind, mode;
  std::uint64_t seed = 1;
  int batch = 0;
  bool random_shapes = false;
  bool inject_fault = false;
};

int cmd_verify(const VerifyOptions& o) {
  const auto m = machine_from(o.machine);
  const long long flip = o.inject_fault ? static_cast<long long>(o.seed * 7919) : -1;
  auto report = [](const std::string& name, const VerifyOutcome& v) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << name;
    if (!v.pass) std::cout << "  [" << v.stage << "] " << v.detail;
    std::cout << "\n";
  };

  if (!o.random_shapes) {
    if (o.layer.empty()) throw IoError("verify needs a layer descriptor or --random-shapes");
    const LayerDesc d = layer_from(o.layer);
    const int n = std::max(1, o.batch);
    int failed = 0;
    for (int i = 0; i < n; ++i) {
      const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(i);
      const auto v = verify_layer(d, m, seed, flip);
      report("seed " + std::to_string(seed), v);
      failed += v.pass ? 0 : 1;
    }
    std::cout << (n - failed) << "/" << n << " passed\n";
    return failed ? 1 : 0;
  }

  std::vector<LayerKind> kinds = {LayerKind::Conv, LayerKind::DwConv, LayerKind::Fc, LayerKind::Residual, LayerKind::Requant};
  std::vector<MacMode> modes = {MacMode::B, MacMode::T, MacMode::I8};
  if (!o.kind.empty()) kinds = {parse_layer_kind(o.kind)};
  if (!o.mode.empty()) modes = {parse_mode(o.mode)};
  const int n = std::max(1, o.batch);
  int total = 0, failed = 0;
  for (auto k : kinds)
    for (auto md : modes) {
      std::mt19937_64 rng(o.seed * 1000003u + static_cast<unsigned>(k) * 31u + static_cast<unsigned>(md));
      int pass = 0;
      for (int i = 0; i < n; ++i) {
        const LayerDesc d = random_layer(k, md, rng);
        const auto v = verify_layer(d, m, o.seed + static_cast<std::uint64_t>(i), flip);
        ++total;
        if (v.pass) {
          ++pass;
        } else {
          ++failed;
          report(std::string(to_string(k)) + "/" + std::string(to_string(md)) + " #" + std::to_string(i) + " " +
                     to_json(d).dump(),
                 v);
        }
      }
      std::printf("%-9s %-3s %d/%d bit-exact\n", std::string(to_string(k)).c_str(), std::string(to_string(md)).c_str(),
                  pass, n);
    }
  std::cout << (total - failed) << "/" << total << " passed\n";
  return failed ? 1 : 0;
}

// ---------------------------------------------------------------- peak

int cmd_peak(const std::string& machine) {
  const auto m = machine_from(machine);
  std::printf("clock %d MHz, %d lanes\n", m.clock_mhz, kLanes);
  for (auto md : {MacMode::B, MacMode::T, MacMode::I8})
    std::printf("%-3s %7.1f GOPS\n", std::string(to_string(md)).c_str(), peak_gops(md, m));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BrainTTA move-program toolchain and cycle-accurate simulator"};
  app.require_subcommand(1);
  std::string machine;
  app.add_option("--machine", machine, "machine configuration (JSON)");

  std::string asm_in, asm_out;
  auto* a = app.add_subcommand("asm", "assemble and validate a move program");
  a->add_option("input", asm_in)->required();
  a->add_option("-o,--output", asm_out, "program artifact (default stdout)");

  std::string dis_in;
  auto* dis = app.add_subcommand("disasm", "print canonical assembly for a program artifact");
  dis->add_option("input", dis_in)->required();

  RunOptions ro;
  auto* run = app.add_subcommand("run", "simulate a program or a generated layer");
  run->add_option("--program", ro.program, "assembly file");
  run->add_option("--layer", ro.layer, "layer descriptor; operands are random per --seed");
  run->add_option("--dmem", ro.dmem, "DMEM image");
  run->add_option("--pmem", ro.pmem, "PMEM image");
  run->add_option("--cost-table", ro.costs, "energy cost table (JSON)");
  run->add_option("--max-cycles", ro.max_cycles)->check(CLI::PositiveNumber);
  run->add_option("--seed", ro.seed);
  run->add_option("--ops", ro.ops, "operation count for fJ/op");
  run->add_option("--out-dir", ro.out);
  run->add_flag("--trace", ro.trace);
  run->add_flag("--no-loopbuffer", ro.no_loopbuffer, "refetch loop bodies from IMEM");

  std::string gen_layer_path, gen_out = ".";
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen", "generate kernel, layout and memory images for a layer");
  gen->add_option("layer", gen_layer_path)->required();
  gen->add_option("--out-dir", gen_out);
  gen->add_option("--seed", gen_seed);

  VerifyOptions vo;
  auto* ver = app.add_subcommand("verify", "generate, simulate and compare against the reference");
  ver->add_option("layer", vo.layer);
  ver->add_option("--seed", vo.seed);
  ver->add_option("--batch", vo.batch, "number of seeds (or shapes per kind and mode)");
  ver->add_flag("--random-shapes", vo.random_shapes);
  ver->add_option("--kind", vo.kind);
  ver->add_option("--mode", vo.mode)->check(CLI::IsMember({"b", "t", "i8"}));
  ver->add_flag("--inject-fault", vo.inject_fault, "flip one output bit after the run");

  auto* peak = app.add_subcommand("peak", "peak throughput per mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*a) return cmd_asm(asm_in, machine, asm_out);
    if (*dis) return cmd_disasm(dis_in, machine);
    if (*run) return cmd_run(ro);
    if (*gen) return cmd_gen(gen_layer_path, machine, gen_out, gen_seed);
    if (*ver) return cmd_verify(vo);
    if (*peak) return cmd_peak(machine);
  } catch (const Failed&) {
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MemoryFault& e) {
    std::cerr << "image error: " << e.what() << "\n";
    return 2;
  } catch (const CostTableError& e) {
    std::cerr << "cost table error: " << e.what() << "\n";
    return 2;
  } catch (const LayerError& e) {
    std::cerr << "layer error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
