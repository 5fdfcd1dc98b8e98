#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "secforge/callgraph.hpp"
#include "secforge/diag.hpp"
#include "secforge/ir.hpp"

namespace secforge::sysid {

// A single point where control enters the kernel: an inline assembly
// statement, a generated wrapper body, or a cancellation-macro call.
struct SyscallSite {
  std::string function;
  int siteId = -1;  // statement id; -1 for synthetic wrapper sites
  std::string syscallName;            // empty when numeric or dynamic
  std::optional<long long> number;    // set when the number is a literal
  bool dynamic = false;               // number comes from a runtime value
  bool synthetic = false;             // generated from the wrapper list
  std::vector<ir::Atom> args;         // at most 6 argument expressions

  auto key() const { return std::tie(function, siteId, syscallName); }
  bool operator<(const SyscallSite& o) const { return key() < o.key(); }
};

// Value drawn from a finite input domain: either an integer or a short string.
struct DomainValue {
  bool isStr = false;
  long long i = 0;
  std::string s;

  static DomainValue ofInt(long long v) { return {false, v, ""}; }
  static DomainValue ofStr(std::string v) { return {true, 0, std::move(v)}; }
  auto key() const { return std::tie(isStr, i, s); }
  bool operator<(const DomainValue& o) const { return key() < o.key(); }
  bool operator==(const DomainValue& o) const { return key() == o.key(); }
};

// How one syscall argument at one site relates to the enclosing API's
// arguments. Absence of a mapping means the argument is unrestricted.
struct ArgumentMapping {
  enum class Kind { Identity, Table, ConstantSet };
  std::string api;
  std::string siteFunction;
  int siteId = -1;
  std::string syscallName;
  int syscallArg = -1;
  Kind kind = Kind::Identity;
  int apiArg = -1;                                   // Identity and Table
  std::vector<std::pair<DomainValue, long long>> table;  // Table, sorted by key
  std::vector<long long> values;                     // ConstantSet, sorted

  auto key() const {
    return std::tie(api, siteFunction, siteId, syscallName, syscallArg);
  }
  bool operator<(const ArgumentMapping& o) const { return key() < o.key(); }
};

struct ApiEntry {
  std::set<std::string> syscalls;     // resolved names
  std::set<long long> rawNumbers;     // numeric sites the table could not name
  std::vector<SyscallSite> sites;     // reachable sites, sorted
  bool requiresFullAllowlist = false;
  std::vector<ArgumentMapping> mappings;  // attached by the relation stage
};

struct ApiSyscallMap {
  std::map<std::string, ApiEntry> entries;  // keyed by the listed API name
};

std::vector<SyscallSite> identify_syscall_functions(const ir::IrProgram& prog,
                                                    const std::vector<std::string>& macroList,
                                                    Diags* diags = nullptr);

ApiSyscallMap build_api_syscall_map(const ir::IrProgram& prog, const cg::CallGraph& merged,
                                    const std::vector<SyscallSite>& sites,
                                    const std::map<long long, std::string>& numberToName,
                                    int jobs = 1, Diags* diags = nullptr);

std::string map_to_json(const ApiSyscallMap& m);
ApiSyscallMap map_from_json(const std::string& text);

}  // namespace secforge::sysid
