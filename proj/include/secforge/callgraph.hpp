#pragma once

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "secforge/diag.hpp"
#include "secforge/ir.hpp"

namespace secforge::cg {

enum class EdgeKind { Direct, Indirect };
enum class RefineLevel { AddressTaken, TypeMatched, ObjectRefined };

struct Edge {
  std::string caller;
  std::string callee;
  int siteId = -1;
  EdgeKind kind = EdgeKind::Direct;
  RefineLevel level = RefineLevel::TypeMatched;

  auto key() const { return std::tie(caller, siteId, callee, kind, level); }
  bool operator<(const Edge& o) const { return key() < o.key(); }
  bool operator==(const Edge& o) const { return key() == o.key(); }
};

struct CallGraph {
  std::set<std::string> nodes;
  std::vector<Edge> edges;  // sorted, duplicate-free
  std::set<std::string> externals;

  bool hasEdge(const std::string& from, const std::string& to) const {
    for (const auto& e : edges)
      if (e.caller == from && e.callee == to) return true;
    return false;
  }
  std::set<std::string> calleesOf(const std::string& from) const {
    std::set<std::string> out;
    for (const auto& e : edges)
      if (e.caller == from) out.insert(e.callee);
    return out;
  }
};

struct AddressTakenRecord {
  std::string function;
  std::optional<std::string> storedInType;

  auto key() const { return std::tie(function, storedInType); }
  bool operator<(const AddressTakenRecord& o) const { return key() < o.key(); }
  bool operator==(const AddressTakenRecord& o) const { return key() == o.key(); }
};

struct CallsiteCandidates {
  std::set<std::string> addressTaken;
  std::set<std::string> typeMatched;
  std::set<std::string> objectRefined;
  bool refined = false;

  RefineLevel achieved() const {
    return refined ? RefineLevel::ObjectRefined : RefineLevel::TypeMatched;
  }
  const std::set<std::string>& best() const {
    return refined ? objectRefined : typeMatched;
  }
};

CallGraph build_direct_callgraph(const ir::IrProgram& prog,
                                 const std::set<std::string>& knownExternals,
                                 Diags* diags = nullptr);

std::vector<AddressTakenRecord> collect_address_taken(const ir::IrProgram& prog);

CallsiteCandidates resolve_callsite(const ir::IrProgram& prog, const ir::IrFunction& fn,
                                    const ir::Statement& stmt,
                                    const std::vector<AddressTakenRecord>& taken);

CallGraph resolve_indirect_calls(const ir::IrProgram& prog,
                                 const std::vector<AddressTakenRecord>& taken);

CallGraph merge_graphs(const CallGraph& a, const CallGraph& b);

std::set<std::string> reachable_from(const CallGraph& g, const std::string& root);

std::string graph_to_json(const CallGraph& g);
CallGraph graph_from_json(const std::string& text);

}  // namespace secforge::cg
