#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "secforge/callgraph.hpp"
#include "secforge/diag.hpp"
#include "secforge/ir.hpp"
#include "secforge/sysid.hpp"

namespace secforge::taint {

struct DdgNode {
  enum class Kind { Constant, ApiArg, FnArg, LocalVar, ObjectField, Calc };
  Kind kind = Kind::Constant;
  std::string function;        // FnArg, LocalVar, Calc
  std::string name;            // LocalVar var, ObjectField field, placeholder tag
  int index = -1;              // ApiArg / FnArg parameter index
  std::string api;             // ApiArg
  sysid::DomainValue value;    // Constant
  std::string objectType;      // ObjectField
  std::string op;              // Calc: "+", "charAt:0", "call:f", "icall"
  int stmtId = -1;             // Calc
  std::vector<int> operands;   // ordered producer node ids (Calc), merge sources otherwise

  std::string keyString() const;
};

// Backward data-dependency graph for one syscall argument at one site,
// relative to one API. Edges run producer -> consumer; internalEdges link a
// callee's return sources into the call's calc node and matter only for
// classification and value derivation, not for argument-relation shapes.
struct Ddg {
  std::string api;
  std::string siteFunction;
  int siteId = -1;
  int argIndex = -1;
  std::vector<DdgNode> nodes;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<int, int>> internalEdges;
  int root = -1;
  bool unknownSource = false;
  // Branch statements in traversed functions; advisory input to the relation
  // stage, not part of the dependency edges.
  std::vector<std::pair<std::string, int>> conds;
};

enum class SourceKind { AllDetermined, HasObjectField, Unknown };

struct SourceClassification {
  SourceKind kind = SourceKind::Unknown;
  std::vector<int> leaves;  // sorted node ids with no incoming edges
};

struct TaintOptions {
  int depthBound = 32;
};

struct IntraSummary;  // per-(function,label) slice step, defined in the impl

// Grow-only concurrent memo of intra-function summaries. Entries are
// immutable once published; the first writer wins and later writers adopt
// the published value, so warm lookups can never change a result.
class TaintCache {
 public:
  std::shared_ptr<const IntraSummary> lookup(const std::string& fn,
                                             const std::string& label) const;
  std::shared_ptr<const IntraSummary> publish(const std::string& fn, const std::string& label,
                                              std::shared_ptr<const IntraSummary> value);
  size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<const IntraSummary>> map_;
};

Ddg backward_taint(const ir::IrProgram& prog, const cg::CallGraph& merged,
                   const std::string& api, const sysid::SyscallSite& site, int argIndex,
                   TaintCache& cache, const TaintOptions& opts = {}, Diags* diags = nullptr);

SourceClassification classify_sources(const Ddg& g);

std::string ddg_to_json(const Ddg& g);

}  // namespace secforge::taint
