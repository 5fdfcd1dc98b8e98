#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "secforge/error.hpp"
#include "secforge/pipeline.hpp"
#include "secforge/util.hpp"

namespace fs = std::filesystem;
using namespace secforge;
using pipeline::PipelineConfig;

namespace {

void print_diags(const Diags& diags) {
  for (const auto& d : diags) {
    const char* sev = d.severity == Diag::Severity::Note      ? "note"
                      : d.severity == Diag::Severity::Warning ? "warning"
                                                              : "error";
    std::cerr << sev << " [" << d.code << "] " << d.message << "\n";
  }
}

std::string out_path(const PipelineConfig& c, const std::string& name) {
  if (c.outDir.empty()) return name;
  fs::create_directories(c.outDir);
  return c.outDir + "/" + name;
}

void emit(const std::string& path, const std::string& content) {
  write_file(path, content);
  std::cout << path << "\n";
}

profile::SeccompProfile read_profile(const PipelineConfig& c) {
  if (c.profilePath.empty())
    throw AnalysisError(ErrorCode::ConfigError, "--profile is required");
  if (!fs::exists(c.profilePath))
    throw AnalysisError(ErrorCode::ConfigError,
                        "profile not found at " + c.profilePath);
  return profile::parse_profile(read_file(c.profilePath));
}

std::vector<policysim::SyscallEvent> read_trace(const PipelineConfig& c) {
  if (c.tracePath.empty())
    throw AnalysisError(ErrorCode::ConfigError, "--trace is required");
  if (!fs::exists(c.tracePath))
    throw AnalysisError(ErrorCode::ConfigError, "trace not found at " + c.tracePath);
  return policysim::parse_trace(read_file(c.tracePath));
}

int dispatch(const std::string& cmd, const PipelineConfig& cfg) {
  Diags diags;
  if (cmd == "analyze-lib") {
    sysid::ApiSyscallMap map = pipeline::analyze_lib(cfg, &diags);
    emit(out_path(cfg, "map.json"), sysid::map_to_json(map));
  } else if (cmd == "scan-bin") {
    binscan::ScanResult scan = pipeline::scan_bin(cfg, &diags);
    emit(out_path(cfg, "callsites.json"), binscan::scan_to_json(scan));
  } else if (cmd == "gen-profile") {
    if (cfg.mapPath.empty())
      throw AnalysisError(ErrorCode::ConfigError, "gen-profile: --map is required");
    if (!fs::exists(cfg.mapPath))
      throw AnalysisError(ErrorCode::ConfigError,
                          "gen-profile: map not found at " + cfg.mapPath);
    if (cfg.callsitesPath.empty())
      throw AnalysisError(ErrorCode::ConfigError, "gen-profile: --callsites is required");
    if (!fs::exists(cfg.callsitesPath))
      throw AnalysisError(ErrorCode::ConfigError,
                          "gen-profile: callsites not found at " + cfg.callsitesPath);
    sysid::ApiSyscallMap map = sysid::map_from_json(read_file(cfg.mapPath));
    binscan::ScanResult scan = binscan::scan_from_json(read_file(cfg.callsitesPath));
    profile::SeccompProfile p = pipeline::gen_profile(cfg, map, scan, &diags);
    emit(out_path(cfg, "profile.seccomp.json"), profile::serialize_profile(p));
  } else if (cmd == "simulate") {
    profile::SeccompProfile p = read_profile(cfg);
    profile::SyscallTable table = pipeline::load_arch_table(cfg);
    policysim::TraceReport rep =
        policysim::simulate_trace(p, table, read_trace(cfg), cfg.jobs);
    emit(out_path(cfg, "report.json"), policysim::report_to_json(rep));
  } else if (cmd == "score-cve") {
    profile::SeccompProfile p = read_profile(cfg);
    profile::SyscallTable table = pipeline::load_arch_table(cfg);
    std::string cvePath = pipeline::resolve_cve_map(cfg);
    if (!fs::exists(cvePath))
      throw AnalysisError(ErrorCode::ConfigError, "cve map not found at " + cvePath);
    policysim::FlagTable flags = policysim::load_flag_table(
        pipeline::resolve_flags_dir(cfg) + "/" + cfg.arch + ".json");
    policysim::CveScore score =
        policysim::score_cve(p, table, policysim::load_cve_map(cvePath, flags), &diags);
    emit(out_path(cfg, "cve_report.json"), policysim::cve_score_to_json(score));
  } else if (cmd == "optimize-order") {
    profile::SeccompProfile p = read_profile(cfg);
    profile::SyscallTable table = pipeline::load_arch_table(cfg);
    std::map<long long, size_t> freq;
    for (const auto& ev : read_trace(cfg)) {
      if (ev.number)
        freq[*ev.number]++;
      else if (auto it = table.nameToNumber.find(ev.name); it != table.nameToNumber.end())
        freq[it->second]++;
    }
    emit(out_path(cfg, "profile.optimized.json"),
         profile::serialize_profile(policysim::optimize_order(p, freq)));
  } else if (cmd == "pipeline") {
    pipeline::PipelineResult r = pipeline::run_pipeline(cfg, &diags);
    for (const auto& [name, path] : r.artifacts) std::cout << path << "\n";
  }
  print_diags(diags);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"static syscall allowlist toolchain"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--arch", cfg.arch, "target architecture (a64 or a32)");
    sub->add_option("--jobs", cfg.jobs, "worker cap for parallel stages");
    sub->add_option("--out", cfg.outDir, "directory for emitted artifacts");
    sub->add_option("--data-dir", cfg.dataDir,
                    "data directory (default: $SECFORGE_DATA, then ./data)");
  };
  auto add_lib = [&](CLI::App* sub) {
    sub->add_option("--ir", cfg.irPath, "library IR dump");
    sub->add_option("--aliases", cfg.aliasPath, "alias graph dump");
    sub->add_option("--apis", cfg.apisPath, "exported API list (JSON array)");
    sub->add_option("--wrappers", cfg.wrappersPath, "wrapper list (JSON object)");
    sub->add_option("--macros", cfg.macrosPath, "syscall macro list (JSON array)");
    sub->add_option("--domains", cfg.domainsPath, "API argument domains (JSON)");
  };

  CLI::App* analyze = app.add_subcommand("analyze-lib", "map library APIs to syscalls");
  add_common(analyze);
  add_lib(analyze);

  CLI::App* scan = app.add_subcommand("scan-bin", "find API callsites and direct syscalls");
  add_common(scan);
  add_lib(scan);
  scan->add_option("--bin-dis", cfg.disPath, "binary disassembly listing");
  scan->add_option("--map", cfg.mapPath, "map.json from analyze-lib (API names)");

  CLI::App* gen = app.add_subcommand("gen-profile", "compose the allowlist profile");
  add_common(gen);
  gen->add_option("--map", cfg.mapPath, "map.json from analyze-lib");
  gen->add_option("--callsites", cfg.callsitesPath, "callsites.json from scan-bin");
  gen->add_option("--default-action", cfg.defaultAction, "errno or kill");

  CLI::App* sim = app.add_subcommand("simulate", "evaluate a trace against a profile");
  add_common(sim);
  sim->add_option("--profile", cfg.profilePath, "profile.seccomp.json");
  sim->add_option("--trace", cfg.tracePath, "JSONL syscall trace");

  CLI::App* cve = app.add_subcommand("score-cve", "score CVE mitigation for a profile");
  add_common(cve);
  cve->add_option("--profile", cfg.profilePath, "profile.seccomp.json");
  cve->add_option("--cve-map", cfg.cveMapPath, "CVE to syscall mapping (JSON)");
  cve->add_option("--flags-dir", cfg.flagsDir, "directory with per-arch flag tables");

  CLI::App* opt = app.add_subcommand("optimize-order", "reorder rules by trace frequency");
  add_common(opt);
  opt->add_option("--profile", cfg.profilePath, "profile.seccomp.json");
  opt->add_option("--trace", cfg.tracePath, "JSONL syscall trace");

  CLI::App* pipe = app.add_subcommand("pipeline", "run analyze-lib, scan-bin, gen-profile");
  add_common(pipe);
  add_lib(pipe);
  pipe->add_option("--bin-dis", cfg.disPath, "binary disassembly listing");
  pipe->add_option("--trace", cfg.tracePath, "optional trace to simulate");
  pipe->add_option("--cve-map", cfg.cveMapPath, "optional CVE map to score");
  pipe->add_option("--flags-dir", cfg.flagsDir, "directory with per-arch flag tables");
  pipe->add_option("--default-action", cfg.defaultAction, "errno or kill");

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(app.get_subcommands().front()->get_name(), cfg);
  } catch (const AnalysisError& e) {
    nlohmann::json err{{"error",
                        {{"code", error_code_name(e.code())},
                         {"message", e.what()},
                         {"line", e.line()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"code", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
