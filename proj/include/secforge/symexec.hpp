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
#include "secforge/sysid.hpp"
#include "secforge/taint.hpp"

namespace secforge::symexec {

using Domain = std::set<sysid::DomainValue>;
// Finite input sets, keyed by API name and argument index. Absence means the
// argument ranges over anything.
using ApiDomains = std::map<std::string, std::map<int, Domain>>;
// Same shape per defined function, produced by pushing API domains down the
// call graph to a fixpoint.
using FnDomains = std::map<std::string, std::map<int, Domain>>;

FnDomains propagate_domains(const ir::IrProgram& prog, const cg::CallGraph& merged,
                            const ApiDomains& apiDomains);

// A value position inside one function: its return value, or one argument of
// one call statement.
struct SlotId {
  enum class Kind { Return, CallArg };
  Kind kind = Kind::Return;
  int stmtId = -1;   // CallArg
  int argIndex = -1; // CallArg

  auto key() const { return std::tie(kind, stmtId, argIndex); }
  bool operator<(const SlotId& o) const { return key() < o.key(); }
  static SlotId ret() { return {}; }
  static SlotId callArg(int stmt, int arg) { return {Kind::CallArg, stmt, arg}; }
};

// How a slot's value relates to the function's own parameters, merged over
// every explored path.
struct Relation {
  enum class Kind { Constant, Identity, Table, Undetermined };
  Kind kind = Kind::Undetermined;
  sysid::DomainValue constant;  // Constant
  int paramIndex = -1;          // Identity / Table key parameter
  std::vector<std::pair<sysid::DomainValue, long long>> table;  // sorted by key
};

struct ArgRelationSummary {
  std::map<SlotId, Relation> relations;  // missing slot reads as Undetermined
  bool pathBudgetExceeded = false;
};

struct SymexecOptions {
  int pathBudget = 4096;
  int stepBudget = 4096;   // per path / per concrete run
  int maxDomain = 64;      // largest domain worth enumerating
};

ArgRelationSummary symexec_function(const ir::IrFunction& fn, const ir::IrProgram& prog,
                                    const cg::CallGraph& merged, const FnDomains& domains,
                                    const std::map<std::string, ArgRelationSummary>& callees,
                                    const SymexecOptions& opts = {});

// Summaries for every defined function, callees before callers. Functions on
// call-graph cycles keep empty (all-undetermined) summaries.
std::map<std::string, ArgRelationSummary> compute_summaries(const ir::IrProgram& prog,
                                                            const cg::CallGraph& merged,
                                                            const FnDomains& domains,
                                                            const SymexecOptions& opts = {});

std::optional<sysid::ArgumentMapping> resolve_arg_mapping(
    const taint::Ddg& g, const std::map<std::string, ArgRelationSummary>& summaries,
    const ApiDomains& apiDomains);

// Runs the taint and relation stages for every integer argument of every
// static site in the map and attaches the mappings that resolve.
void attach_mappings(sysid::ApiSyscallMap& m, const ir::IrProgram& prog,
                     const cg::CallGraph& merged, const ApiDomains& apiDomains,
                     taint::TaintCache& cache, int jobs = 1, Diags* diags = nullptr);

}  // namespace secforge::symexec
