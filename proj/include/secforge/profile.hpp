#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "secforge/binscan.hpp"
#include "secforge/diag.hpp"
#include "secforge/sysid.hpp"

namespace secforge::profile {

// Per-architecture name/number bijection, loaded from a data file.
struct SyscallTable {
  std::string arch;
  std::map<std::string, long long> nameToNumber;
  std::map<long long, std::string> numberToName;

  size_t size() const { return nameToNumber.size(); }
};

SyscallTable load_syscall_table(const std::string& path);

struct ArgFilter {
  int index = -1;
  std::string op;                 // eq | maskedEq | inSet | inRange
  std::vector<long long> values;  // eq: [v]; inSet: sorted; inRange: [lo, hi];
                                  // maskedEq: [0] with mask set
  std::optional<long long> mask;  // maskedEq only

  bool operator==(const ArgFilter&) const = default;
};

struct Rule {
  long long syscall = -1;
  std::string name;
  std::string action = "allow";
  std::vector<ArgFilter> args;  // sorted by index; at most one group per index
                                // is produced by generation

  bool operator==(const Rule&) const = default;
};

struct SeccompProfile {
  std::string arch;
  std::string defaultAction = "errno";  // or "kill"
  std::vector<Rule> rules;              // sorted by syscall number

  bool operator==(const SeccompProfile&) const = default;
};

struct ProfileOptions {
  std::string defaultAction = "errno";
};

// Folds the library map and the binary scan into an allowlist. Every syscall
// reachable from a called API, plus every resolved direct site, gets an allow
// rule; argument filters survive only when every contributing path pins the
// value down.
SeccompProfile generate_profile(const sysid::ApiSyscallMap& map,
                                const binscan::ScanResult& scan,
                                const SyscallTable& table,
                                const ProfileOptions& opts = {},
                                Diags* diags = nullptr);

std::string serialize_profile(const SeccompProfile& p);
SeccompProfile parse_profile(const std::string& text);

// Number of table syscalls without an allow rule.
size_t denied_count(const SeccompProfile& p, const SyscallTable& table);

}  // namespace secforge::profile
