// Python surface for the pipeline stages and the profile tooling. JSON
// strings cross the boundary so results match the CLI artifacts bit for bit.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "secforge/binscan.hpp"
#include "secforge/error.hpp"
#include "secforge/pipeline.hpp"
#include "secforge/policysim.hpp"
#include "secforge/profile.hpp"
#include "secforge/sysid.hpp"

namespace py = pybind11;
using namespace secforge;

PYBIND11_MODULE(_secforge, m) {
  m.doc() = "Syscall allowlist generation from library IR and binary disassembly";

  py::register_exception<AnalysisError>(m, "AnalysisError");

  py::class_<pipeline::PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("arch", &pipeline::PipelineConfig::arch)
      .def_readwrite("ir_path", &pipeline::PipelineConfig::irPath)
      .def_readwrite("alias_path", &pipeline::PipelineConfig::aliasPath)
      .def_readwrite("apis_path", &pipeline::PipelineConfig::apisPath)
      .def_readwrite("wrappers_path", &pipeline::PipelineConfig::wrappersPath)
      .def_readwrite("macros_path", &pipeline::PipelineConfig::macrosPath)
      .def_readwrite("domains_path", &pipeline::PipelineConfig::domainsPath)
      .def_readwrite("dis_path", &pipeline::PipelineConfig::disPath)
      .def_readwrite("map_path", &pipeline::PipelineConfig::mapPath)
      .def_readwrite("callsites_path", &pipeline::PipelineConfig::callsitesPath)
      .def_readwrite("profile_path", &pipeline::PipelineConfig::profilePath)
      .def_readwrite("trace_path", &pipeline::PipelineConfig::tracePath)
      .def_readwrite("cve_map_path", &pipeline::PipelineConfig::cveMapPath)
      .def_readwrite("data_dir", &pipeline::PipelineConfig::dataDir)
      .def_readwrite("flags_dir", &pipeline::PipelineConfig::flagsDir)
      .def_readwrite("out_dir", &pipeline::PipelineConfig::outDir)
      .def_readwrite("default_action", &pipeline::PipelineConfig::defaultAction)
      .def_readwrite("jobs", &pipeline::PipelineConfig::jobs);

  m.def(
      "analyze_lib",
      [](const pipeline::PipelineConfig& c) { return sysid::map_to_json(pipeline::analyze_lib(c)); },
      py::arg("config"), "Analyze the library IR and return the API to syscall map as JSON");

  m.def(
      "scan_bin",
      [](const pipeline::PipelineConfig& c) {
        return binscan::scan_to_json(pipeline::scan_bin(c));
      },
      py::arg("config"), "Scan the binary disassembly and return the callsite report as JSON");

  m.def(
      "gen_profile",
      [](const pipeline::PipelineConfig& c, const std::string& mapJson,
         const std::string& scanJson) {
        sysid::ApiSyscallMap map = sysid::map_from_json(mapJson);
        binscan::ScanResult scan = binscan::scan_from_json(scanJson);
        return profile::serialize_profile(pipeline::gen_profile(c, map, scan));
      },
      py::arg("config"), py::arg("map_json"), py::arg("scan_json"),
      "Compose a seccomp profile from a map and a scan, returned as JSON");

  m.def(
      "run_pipeline",
      [](const pipeline::PipelineConfig& c) { return pipeline::run_pipeline(c).artifacts; },
      py::arg("config"),
      "Run analyze, scan, and profile generation; returns artifact name to path");

  m.def(
      "simulate",
      [](const std::string& profileJson, const std::string& tablePath,
         const std::string& traceText, int jobs) {
        profile::SeccompProfile p = profile::parse_profile(profileJson);
        profile::SyscallTable t = profile::load_syscall_table(tablePath);
        return policysim::report_to_json(
            policysim::simulate_trace(p, t, policysim::parse_trace(traceText), jobs));
      },
      py::arg("profile_json"), py::arg("table_path"), py::arg("trace_text"), py::arg("jobs") = 1,
      "Replay a JSONL trace against a profile and return the report as JSON");

  m.def(
      "score_cve",
      [](const std::string& profileJson, const std::string& tablePath,
         const std::string& cveMapPath, const std::string& flagsPath) {
        profile::SeccompProfile p = profile::parse_profile(profileJson);
        profile::SyscallTable t = profile::load_syscall_table(tablePath);
        policysim::FlagTable flags = policysim::load_flag_table(flagsPath);
        return policysim::cve_score_to_json(
            policysim::score_cve(p, t, policysim::load_cve_map(cveMapPath, flags)));
      },
      py::arg("profile_json"), py::arg("table_path"), py::arg("cve_map_path"),
      py::arg("flags_path"), "Classify which CVE entries the profile mitigates, as JSON");

  m.def(
      "optimize_order",
      [](const std::string& profileJson, const std::map<long long, size_t>& freq) {
        return profile::serialize_profile(
            policysim::optimize_order(profile::parse_profile(profileJson), freq));
      },
      py::arg("profile_json"), py::arg("freq"),
      "Reorder rules by observed syscall frequency; decisions are unchanged");

  m.def(
      "denied_count",
      [](const std::string& profileJson, const std::string& tablePath) {
        return profile::denied_count(profile::parse_profile(profileJson),
                                     profile::load_syscall_table(tablePath));
      },
      py::arg("profile_json"), py::arg("table_path"),
      "Number of table syscalls the profile leaves blocked");
}
