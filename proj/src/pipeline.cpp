#include "secforge/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "secforge/callgraph.hpp"
#include "secforge/error.hpp"
#include "secforge/taint.hpp"
#include "secforge/util.hpp"

namespace secforge::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& stage, const std::string& what,
                  const std::string& path) {
  if (path.empty())
    throw AnalysisError(ErrorCode::ConfigError, stage + ": " + what + " is required");
  if (!fs::exists(path))
    throw AnalysisError(ErrorCode::ConfigError,
                        stage + ": " + what + " not found at " + path);
}

json parse_json_file(const std::string& what, const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, what + ": " + e.what());
  }
}

}  // namespace

std::string resolve_data_dir(const PipelineConfig& c) {
  if (!c.dataDir.empty()) return c.dataDir;
  if (const char* env = std::getenv("SECFORGE_DATA"); env && *env) return env;
  return "data";
}

std::string resolve_flags_dir(const PipelineConfig& c) {
  if (!c.flagsDir.empty()) return c.flagsDir;
  return resolve_data_dir(c) + "/flags";
}

std::string resolve_cve_map(const PipelineConfig& c) {
  if (!c.cveMapPath.empty()) return c.cveMapPath;
  return resolve_data_dir(c) + "/cve/cve_map.json";
}

ir::IrProgram load_library_ir(const PipelineConfig& c) {
  require_file("analyze-lib", "--ir", c.irPath);
  require_file("analyze-lib", "--apis", c.apisPath);

  std::map<std::string, std::string> aliases;
  if (!c.aliasPath.empty()) {
    require_file("analyze-lib", "--aliases", c.aliasPath);
    aliases = ir::parse_alias_graph(read_file(c.aliasPath));
  }
  ir::IrProgram prog = ir::parse_ir(read_file(c.irPath), aliases);

  for (const auto& a : parse_json_file("api list", c.apisPath))
    prog.apiList.push_back(a.get<std::string>());

  if (!c.wrappersPath.empty()) {
    require_file("analyze-lib", "--wrappers", c.wrappersPath);
    json w = parse_json_file("wrapper list", c.wrappersPath);
    for (const auto& [k, v] : w.items()) prog.wrapperList[k] = v.get<std::string>();
  }
  return prog;
}

std::vector<std::string> load_macro_list(const PipelineConfig& c) {
  std::string path = c.macrosPath;
  if (path.empty()) {
    std::string fallback = resolve_data_dir(c) + "/macros.json";
    if (!fs::exists(fallback)) return {};
    path = fallback;
  } else {
    require_file("analyze-lib", "--macros", path);
  }
  std::vector<std::string> out;
  for (const auto& m : parse_json_file("macro list", path))
    out.push_back(m.get<std::string>());
  return out;
}

symexec::ApiDomains load_domains_file(const std::string& path) {
  symexec::ApiDomains out;
  json doc = parse_json_file("domain file", path);
  try {
    for (const auto& [api, args] : doc.items())
      for (const auto& [idx, spec] : args.items()) {
        symexec::Domain d;
        for (const auto& s : spec.value("strings", json::array()))
          d.insert(sysid::DomainValue::ofStr(s.get<std::string>()));
        for (const auto& i : spec.value("ints", json::array()))
          d.insert(sysid::DomainValue::ofInt(i.get<long long>()));
        out[api][std::stoi(idx)] = std::move(d);
      }
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("domain file: ") + e.what());
  }
  return out;
}

profile::SyscallTable load_arch_table(const PipelineConfig& c) {
  std::string path = resolve_data_dir(c) + "/syscalls/" + c.arch + ".json";
  require_file("syscall table", c.arch + " table", path);
  return profile::load_syscall_table(path);
}

sysid::ApiSyscallMap analyze_lib(const PipelineConfig& c, Diags* diags) {
  ir::IrProgram prog = load_library_ir(c);
  std::vector<std::string> macros = load_macro_list(c);

  std::set<std::string> external(macros.begin(), macros.end());
  cg::CallGraph merged =
      cg::merge_graphs(cg::build_direct_callgraph(prog, external),
                       cg::resolve_indirect_calls(prog, cg::collect_address_taken(prog)));
  std::vector<sysid::SyscallSite> sites =
      sysid::identify_syscall_functions(prog, macros, diags);

  profile::SyscallTable table = load_arch_table(c);
  sysid::ApiSyscallMap map = sysid::build_api_syscall_map(prog, merged, sites,
                                                          table.numberToName, c.jobs, diags);

  symexec::ApiDomains domains;
  if (!c.domainsPath.empty()) {
    require_file("analyze-lib", "--domains", c.domainsPath);
    domains = load_domains_file(c.domainsPath);
  }
  taint::TaintCache cache;
  symexec::attach_mappings(map, prog, merged, domains, cache, c.jobs, diags);
  return map;
}

binscan::ScanResult scan_bin(const PipelineConfig& c, Diags* diags) {
  require_file("scan-bin", "--bin-dis", c.disPath);
  binscan::Arch arch = binscan::arch_from_string(c.arch);
  binscan::BinaryImage img = binscan::parse_disassembly(read_file(c.disPath), arch);

  std::vector<std::string> apiList;
  std::map<std::string, int> arity;
  if (!c.irPath.empty()) {
    ir::IrProgram prog = load_library_ir(c);
    apiList = prog.apiList;
    for (const auto& api : prog.apiList)
      if (const ir::IrFunction* f = prog.find(api))
        arity[api] = static_cast<int>(f->params.size());
  } else if (!c.mapPath.empty()) {
    require_file("scan-bin", "--map", c.mapPath);
    sysid::ApiSyscallMap map = sysid::map_from_json(read_file(c.mapPath));
    for (const auto& [api, entry] : map.entries) apiList.push_back(api);
  } else {
    throw AnalysisError(ErrorCode::ConfigError,
                        "scan-bin: either --ir/--apis or --map is required to know "
                        "which APIs to look for");
  }
  return binscan::scan_binary(img, apiList, arity, {}, diags);
}

profile::SeccompProfile gen_profile(const PipelineConfig& c,
                                    const sysid::ApiSyscallMap& map,
                                    const binscan::ScanResult& scan, Diags* diags) {
  profile::SyscallTable table = load_arch_table(c);
  profile::ProfileOptions opts;
  opts.defaultAction = c.defaultAction;
  return profile::generate_profile(map, scan, table, opts, diags);
}

PipelineResult run_pipeline(const PipelineConfig& c, Diags* diags) {
  if (c.outDir.empty())
    throw AnalysisError(ErrorCode::ConfigError, "pipeline: --out is required");
  fs::create_directories(c.outDir);

  PipelineResult r;
  r.map = analyze_lib(c, diags);
  std::string mapPath = c.outDir + "/map.json";
  write_file(mapPath, sysid::map_to_json(r.map));
  r.artifacts["map"] = mapPath;

  r.scan = scan_bin(c, diags);
  std::string sitesPath = c.outDir + "/callsites.json";
  write_file(sitesPath, binscan::scan_to_json(r.scan));
  r.artifacts["callsites"] = sitesPath;

  r.profile = gen_profile(c, r.map, r.scan, diags);
  std::string profilePath = c.outDir + "/profile.seccomp.json";
  write_file(profilePath, profile::serialize_profile(r.profile));
  r.artifacts["profile"] = profilePath;

  profile::SyscallTable table = load_arch_table(c);
  if (!c.tracePath.empty()) {
    require_file("simulate", "--trace", c.tracePath);
    policysim::TraceReport rep = policysim::simulate_trace(
        r.profile, table, policysim::parse_trace(read_file(c.tracePath)), c.jobs);
    std::string reportPath = c.outDir + "/report.json";
    write_file(reportPath, policysim::report_to_json(rep));
    r.artifacts["report"] = reportPath;
  }
  std::string cvePath = resolve_cve_map(c);
  if (fs::exists(cvePath)) {
    policysim::FlagTable flags =
        policysim::load_flag_table(resolve_flags_dir(c) + "/" + c.arch + ".json");
    policysim::CveScore score =
        policysim::score_cve(r.profile, table, policysim::load_cve_map(cvePath, flags), diags);
    std::string cveReportPath = c.outDir + "/cve_report.json";
    write_file(cveReportPath, policysim::cve_score_to_json(score));
    r.artifacts["cve_report"] = cveReportPath;
  }
  return r;
}

}  // namespace secforge::pipeline
