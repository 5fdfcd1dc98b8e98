#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secforge/diag.hpp"
#include "secforge/profile.hpp"

namespace secforge::policysim {

// One observed kernel entry. Arguments are integers; a null in the trace
// marks a value that was opaque to the tracer (typically a pointer) and a
// shorter array leaves trailing registers unrecorded.
struct SyscallEvent {
  std::string name;                  // empty when only the number is known
  std::optional<long long> number;
  std::vector<std::optional<long long>> args;
};

std::vector<SyscallEvent> parse_trace(const std::string& text);

struct Decision {
  bool allow = false;
  std::string reason;  // empty when allowed
};

Decision evaluate(const profile::SeccompProfile& p, const profile::SyscallTable& table,
                  const SyscallEvent& ev);

struct TraceReport {
  size_t allowed = 0;
  size_t denied = 0;
  std::optional<size_t> firstDenied;  // index into the trace

  bool operator==(const TraceReport&) const = default;
};

TraceReport simulate_trace(const profile::SeccompProfile& p,
                           const profile::SyscallTable& table,
                           const std::vector<SyscallEvent>& trace, int jobs = 1);

std::string report_to_json(const TraceReport& r);

// Flag-name lookups for CVE argument conditions.
using FlagTable = std::map<std::string, long long>;
FlagTable load_flag_table(const std::string& path);

struct CveCondition {
  int index = -1;
  long long value = 0;  // resolved from a flag name or given directly
};

struct CveSyscall {
  std::string name;
  std::optional<CveCondition> arg;
};

struct CveEntry {
  std::string id;
  std::vector<CveSyscall> syscalls;
};

std::vector<CveEntry> load_cve_map(const std::string& path, const FlagTable& flags);

struct CveScore {
  std::vector<std::string> mitigated;  // entry ids, in map order
  size_t bySyscallBlock = 0;
  size_t byArgBlock = 0;
};

CveScore score_cve(const profile::SeccompProfile& p, const profile::SyscallTable& table,
                   const std::vector<CveEntry>& cveMap, Diags* diags = nullptr);

std::string cve_score_to_json(const CveScore& s);

// Reorders rules by descending observed frequency (ties by ascending number).
// Decisions are unaffected; only lookup order changes.
profile::SeccompProfile optimize_order(const profile::SeccompProfile& p,
                                       const std::map<long long, size_t>& freq);

}  // namespace secforge::policysim
