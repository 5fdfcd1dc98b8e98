#pragma once

#include <map>
#include <string>
#include <vector>

#include "secforge/binscan.hpp"
#include "secforge/diag.hpp"
#include "secforge/ir.hpp"
#include "secforge/policysim.hpp"
#include "secforge/profile.hpp"
#include "secforge/symexec.hpp"
#include "secforge/sysid.hpp"

namespace secforge::pipeline {

// Everything a stage may need. Subcommands validate only the paths they use.
struct PipelineConfig {
  std::string arch = "a64";
  std::string irPath;
  std::string aliasPath;
  std::string apisPath;
  std::string wrappersPath;
  std::string macrosPath;   // falls back to <data>/macros.json when present
  std::string domainsPath;
  std::string disPath;
  std::string mapPath;        // stage chaining inputs
  std::string callsitesPath;
  std::string profilePath;
  std::string tracePath;
  std::string cveMapPath;   // falls back to <data>/cve/cve_map.json
  std::string dataDir;      // falls back to $SECFORGE_DATA, then "data"
  std::string flagsDir;     // falls back to <data>/flags
  std::string outDir;
  std::string defaultAction = "errno";
  int jobs = 1;
};

std::string resolve_data_dir(const PipelineConfig& c);
std::string resolve_flags_dir(const PipelineConfig& c);
std::string resolve_cve_map(const PipelineConfig& c);

// Parses the IR dump plus its side lists into a ready program.
ir::IrProgram load_library_ir(const PipelineConfig& c);
std::vector<std::string> load_macro_list(const PipelineConfig& c);
symexec::ApiDomains load_domains_file(const std::string& path);
profile::SyscallTable load_arch_table(const PipelineConfig& c);

// Stage entry points. Pure with respect to the filesystem except for reads;
// artifact writing is the caller's concern (run_pipeline below writes).
sysid::ApiSyscallMap analyze_lib(const PipelineConfig& c, Diags* diags = nullptr);
binscan::ScanResult scan_bin(const PipelineConfig& c, Diags* diags = nullptr);
profile::SeccompProfile gen_profile(const PipelineConfig& c,
                                    const sysid::ApiSyscallMap& map,
                                    const binscan::ScanResult& scan,
                                    Diags* diags = nullptr);

struct PipelineResult {
  sysid::ApiSyscallMap map;
  binscan::ScanResult scan;
  profile::SeccompProfile profile;
  std::map<std::string, std::string> artifacts;  // logical name -> written path
};

// analyze-lib, scan-bin, and gen-profile chained in memory; writes map.json,
// callsites.json, and profile.seccomp.json under outDir, plus report.json and
// cve_report.json when a trace or CVE map is configured.
PipelineResult run_pipeline(const PipelineConfig& c, Diags* diags = nullptr);

}  // namespace secforge::pipeline
