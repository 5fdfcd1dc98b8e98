#include "secforge/taint.hpp"

#include <algorithm>
#include <functional>

#include "json.hpp"
#include "secforge/error.hpp"

namespace secforge::taint {

using ir::Atom;
using ir::Expr;
using ir::IrFunction;
using ir::Statement;
using nlohmann::json;

namespace {

std::string param_label(int i) { return "p" + std::to_string(i); }
std::string var_label(const std::string& v) { return "v:" + v; }
constexpr const char* kRetLabel = "ret";

}  // namespace

std::string DdgNode::keyString() const {
  switch (kind) {
    case Kind::Constant:
      return value.isStr ? "const:s:" + value.s : "const:i:" + std::to_string(value.i);
    case Kind::ApiArg:
      return "apiarg:" + api + ":" + std::to_string(index);
    case Kind::FnArg:
      return "fnarg:" + function + ":" + std::to_string(index);
    case Kind::LocalVar:
      return "local:" + function + ":" + name;
    case Kind::ObjectField:
      return "field:" + objectType + ":" + name;
    case Kind::Calc:
      return "calc:" + function + ":" + std::to_string(stmtId) + ":" + op;
  }
  return "?";
}

// One step of the intra-function backward slice: everything reachable from a
// label (param, local, or return value) without leaving the function. Call
// results stay as ports so the graph builder can splice callee slices in.
struct IntraSummary {
  struct Node {
    DdgNode proto;               // operands field unused here
    std::vector<int> operands;   // summary-local ids
  };
  struct CallPort {
    int node = -1;
    int stmtId = -1;
    bool indirect = false;
    std::string callee;  // direct calls only
  };
  std::vector<Node> nodes;
  int root = -1;
  bool unknownSource = false;
  std::vector<int> paramNodes;  // ids of FnArg leaves
  std::vector<CallPort> callPorts;
  std::vector<std::string> visitedLabels;
};

std::shared_ptr<const IntraSummary> TaintCache::lookup(const std::string& fn,
                                                       const std::string& label) const {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = map_.find({fn, label});
  return it == map_.end() ? nullptr : it->second;
}

std::shared_ptr<const IntraSummary> TaintCache::publish(
    const std::string& fn, const std::string& label,
    std::shared_ptr<const IntraSummary> value) {
  std::lock_guard<std::mutex> lk(mu_);
  auto [it, inserted] = map_.try_emplace({fn, label}, std::move(value));
  return it->second;
}

size_t TaintCache::size() const {
  std::lock_guard<std::mutex> lk(mu_);
  return map_.size();
}

namespace {

class SummaryBuilder {
 public:
  SummaryBuilder(const ir::IrProgram& prog, const IrFunction& fn) : prog_(prog), fn_(fn) {}

  IntraSummary build(const std::string& label) {
    out_.root = nodeForLabel(label);
    for (const auto& [lbl, id] : labelNode_) out_.visitedLabels.push_back(lbl);
    std::sort(out_.visitedLabels.begin(), out_.visitedLabels.end());
    return std::move(out_);
  }

 private:
  int addNode(DdgNode proto) {
    out_.nodes.push_back({std::move(proto), {}});
    return (int)out_.nodes.size() - 1;
  }

  int constantNode(sysid::DomainValue v) {
    DdgNode n;
    n.kind = DdgNode::Kind::Constant;
    n.value = std::move(v);
    return addNode(std::move(n));
  }

  int placeholderNode(const std::string& tag) {
    out_.unknownSource = true;
    DdgNode n;
    n.kind = DdgNode::Kind::LocalVar;
    n.function = fn_.name;
    n.name = tag;
    return addNode(std::move(n));
  }

  int atomNode(const Atom& a) {
    switch (a.kind) {
      case Atom::Kind::IntConst:
        return constantNode(sysid::DomainValue::ofInt(a.num));
      case Atom::Kind::StrConst:
        return constantNode(sysid::DomainValue::ofStr(a.text));
      case Atom::Kind::ParamRef:
        return nodeForLabel(param_label(a.paramIndex));
      case Atom::Kind::Var:
        if (fn_.isLocal(a.text)) return nodeForLabel(var_label(a.text));
        return placeholderNode("$extern:" + a.text);
      case Atom::Kind::FuncRef:
        return placeholderNode("$fnaddr:" + a.text);
    }
    return placeholderNode("$atom");
  }

  int exprNode(const Expr& e, int stmtId) {
    switch (e.kind) {
      case Expr::Kind::Atom:
        return atomNode(e.a);
      case Expr::Kind::BinOp: {
        DdgNode n;
        n.kind = DdgNode::Kind::Calc;
        n.function = fn_.name;
        n.stmtId = stmtId;
        n.op = e.op;
        int id = addNode(std::move(n));
        int a = atomNode(e.a);
        int b = atomNode(e.b);
        out_.nodes[id].operands = {a, b};
        return id;
      }
      case Expr::Kind::CharAt: {
        DdgNode n;
        n.kind = DdgNode::Kind::Calc;
        n.function = fn_.name;
        n.stmtId = stmtId;
        n.op = "charAt:" + std::to_string(e.charIndex);
        int id = addNode(std::move(n));
        int a = atomNode(e.a);
        out_.nodes[id].operands = {a};
        return id;
      }
      case Expr::Kind::FieldLoad: {
        DdgNode n;
        n.kind = DdgNode::Kind::ObjectField;
        n.name = e.field;
        ir::TypeTag t = fn_.typeOfAtom(e.a);
        n.objectType = t.kind == ir::SemKind::Object ? t.objectType : "";
        return addNode(std::move(n));
      }
    }
    return placeholderNode("$expr");
  }

  int callNode(const Statement& st, bool indirect) {
    DdgNode n;
    n.kind = DdgNode::Kind::Calc;
    n.function = fn_.name;
    n.stmtId = st.id;
    n.op = indirect ? "icall" : "call:" + st.callee;
    int id = addNode(std::move(n));
    std::vector<int> ops;
    for (const Atom& a : st.args) ops.push_back(atomNode(a));
    out_.nodes[id].operands = std::move(ops);
    IntraSummary::CallPort port;
    port.node = id;
    port.stmtId = st.id;
    port.indirect = indirect;
    if (!indirect) {
      port.callee = st.callee;
      if (!prog_.find(st.callee)) {
        // Result produced outside the modeled library (kernel entry macro or
        // an unresolved external): nothing to splice, value is opaque.
        out_.unknownSource = true;
        return id;
      }
    }
    out_.callPorts.push_back(std::move(port));
    return id;
  }

  int nodeForLabel(const std::string& label) {
    auto it = labelNode_.find(label);
    if (it != labelNode_.end()) return it->second;

    if (label.size() > 1 && label[0] == 'p') {
      int pi = std::stoi(label.substr(1));
      DdgNode n;
      n.kind = DdgNode::Kind::FnArg;
      n.function = fn_.name;
      n.index = pi;
      int id = addNode(std::move(n));
      labelNode_[label] = id;
      out_.paramNodes.push_back(id);
      return id;
    }

    DdgNode n;
    n.kind = DdgNode::Kind::LocalVar;
    n.function = fn_.name;
    n.name = label == kRetLabel ? "$ret" : label.substr(2);
    int id = addNode(std::move(n));
    labelNode_[label] = id;

    // Producer ids are computed before touching out_.nodes[id]: building a
    // producer appends nodes and may reallocate the vector.
    bool producerSeen = false;
    if (label == kRetLabel) {
      for (const Statement& st : fn_.statements) {
        if (st.kind != Statement::Kind::Return || !st.retValue) continue;
        int producer = exprNode(*st.retValue, st.id);
        out_.nodes[id].operands.push_back(producer);
        producerSeen = true;
      }
    } else {
      const std::string var = label.substr(2);
      for (const Statement& st : fn_.statements) {
        if (!st.lhs || *st.lhs != var || st.lhsField.has_value()) continue;
        int producer = -1;
        switch (st.kind) {
          case Statement::Kind::Assign:
            producer = exprNode(st.rhs, st.id);
            break;
          case Statement::Kind::Call:
            producer = callNode(st, false);
            break;
          case Statement::Kind::IndirectCall:
            producer = callNode(st, true);
            break;
          case Statement::Kind::AsmSyscall:
            // Kernel return value.
            out_.unknownSource = true;
            producerSeen = true;
            continue;
          default:
            continue;
        }
        out_.nodes[id].operands.push_back(producer);
        producerSeen = true;
      }
    }
    if (!producerSeen) out_.unknownSource = true;
    return id;
  }

  const ir::IrProgram& prog_;
  const IrFunction& fn_;
  IntraSummary out_;
  std::map<std::string, int> labelNode_;
};

class DdgBuilder {
 public:
  DdgBuilder(const ir::IrProgram& prog, const cg::CallGraph& merged, const std::string& api,
             TaintCache& cache, const TaintOptions& opts, Diags* diags)
      : prog_(prog), graph_(merged), api_(api), cache_(cache), opts_(opts), diags_(diags) {
    apiFn_ = prog_.canonical(api);
    reach_ = cg::reachable_from(merged, apiFn_);
    reach_.insert(apiFn_);
  }

  Ddg build(const sysid::SyscallSite& site, int argIndex) {
    ddg_.api = api_;
    ddg_.siteFunction = site.function;
    ddg_.siteId = site.siteId;
    ddg_.argIndex = argIndex;
    const IrFunction* fn = prog_.find(site.function);
    if (!fn) throw AnalysisError(ErrorCode::Internal, "site function not found: " + site.function);
    if (argIndex < 0 || argIndex >= (int)site.args.size())
      throw AnalysisError(ErrorCode::Internal, "argument index out of range");
    const Atom& rootAtom = site.args[argIndex];
    ir::TypeTag t = fn->typeOfAtom(rootAtom);
    if (t.pointerLike())
      throw AnalysisError(ErrorCode::PointerArgument,
                          "argument " + std::to_string(argIndex) + " of " + site.syscallName +
                              " in " + site.function + " is pointer-like");
    ddg_.root = instantiateAtom(*fn, rootAtom, 0);
    collectConds();
    finalize();
    return std::move(ddg_);
  }

 private:
  std::shared_ptr<const IntraSummary> summaryFor(const IrFunction& fn, const std::string& label) {
    if (auto hit = cache_.lookup(fn.name, label)) return hit;
    SummaryBuilder sb(prog_, fn);
    auto fresh = std::make_shared<IntraSummary>(sb.build(label));
    return cache_.publish(fn.name, label, std::move(fresh));
  }

  int internNode(const DdgNode& proto) {
    std::string key = proto.keyString();
    auto it = keyMap_.find(key);
    if (it != keyMap_.end()) return it->second;
    ddg_.nodes.push_back(proto);
    ddg_.nodes.back().operands.clear();
    int id = (int)ddg_.nodes.size() - 1;
    keyMap_[key] = id;
    return id;
  }

  void addEdge(int from, int to) {
    if (from < 0 || to < 0 || from == to) return;
    auto e = std::make_pair(from, to);
    if (edgeSet_.insert(e).second) ddg_.edges.push_back(e);
  }

  void addInternalEdge(int from, int to) {
    if (from < 0 || to < 0 || from == to) return;
    auto e = std::make_pair(from, to);
    if (internalSet_.insert(e).second) ddg_.internalEdges.push_back(e);
  }

  void markUnknown(const std::string& why) {
    if (!ddg_.unknownSource && diags_)
      diag_note(diags_, "taint-unknown-source", api_ + ": " + why);
    ddg_.unknownSource = true;
  }

  // Splice the (function,label) slice into the graph and return the node id
  // the label resolved to. depth counts cross-function hops.
  int instantiateLabel(const IrFunction& fn, const std::string& label, int depth) {
    auto key = std::make_pair(fn.name, label);
    auto it = instMap_.find(key);
    if (it != instMap_.end()) return it->second;
    if (depth > opts_.depthBound) {
      markUnknown("call depth bound exceeded at " + fn.name);
      int id = internNode([&] {
        DdgNode n;
        n.kind = DdgNode::Kind::LocalVar;
        n.function = fn.name;
        n.name = "$depth:" + label;
        return n;
      }());
      instMap_[key] = id;
      return id;
    }

    auto summary = summaryFor(fn, label);
    if (summary->unknownSource) markUnknown("opaque producer inside " + fn.name);
    touchedFns_.insert(fn.name);

    std::vector<int> toGlobal(summary->nodes.size(), -1);
    for (size_t i = 0; i < summary->nodes.size(); ++i) {
      DdgNode proto = summary->nodes[i].proto;
      if (proto.kind == DdgNode::Kind::FnArg && fn.name == apiFn_) {
        proto.kind = DdgNode::Kind::ApiArg;
        proto.api = api_;
        proto.function.clear();
      }
      toGlobal[i] = internNode(proto);
    }
    for (size_t i = 0; i < summary->nodes.size(); ++i) {
      int dst = toGlobal[i];
      // A node can surface in several summaries (a local's slice is embedded
      // in every slice that reads it); its defs are identical each time, so
      // wire it on first sight only.
      if (!wired_.insert(dst).second) continue;
      auto& ops = ddg_.nodes[dst].operands;
      for (int localSrc : summary->nodes[i].operands) {
        int src = toGlobal[localSrc];
        addEdge(src, dst);
        ops.push_back(src);
      }
    }
    instMap_[key] = toGlobal[summary->root];

    for (const auto& port : summary->callPorts) {
      int calcId = toGlobal[port.node];
      std::set<std::string> callees;
      if (port.indirect) {
        for (const auto& e : graph_.edges)
          if (e.caller == fn.name && e.siteId == port.stmtId &&
              e.kind == cg::EdgeKind::Indirect)
            callees.insert(e.callee);
        if (callees.empty()) markUnknown("unresolved indirect call in " + fn.name);
      } else {
        callees.insert(port.callee);
      }
      for (const auto& callee : callees) {
        const IrFunction* cf = prog_.find(callee);
        if (!cf) {
          markUnknown("external callee " + callee);
          continue;
        }
        int retId = instantiateLabel(*cf, kRetLabel, depth + 1);
        addInternalEdge(retId, calcId);
      }
    }

    for (int pn : summary->paramNodes) {
      int fnArgId = toGlobal[pn];
      if (ddg_.nodes[fnArgId].kind == DdgNode::Kind::ApiArg) continue;
      expandParam(fn, summary->nodes[pn].proto.index, fnArgId, depth);
    }
    return instMap_[key];
  }

  // Pull actual arguments in from every caller that the API can reach.
  void expandParam(const IrFunction& fn, int paramIndex, int fnArgId, int depth) {
    if (!expandedParams_.insert({fn.name, paramIndex}).second) return;
    std::vector<const cg::Edge*> callers;
    for (const auto& e : graph_.edges)
      if (e.callee == fn.name && reach_.count(e.caller)) callers.push_back(&e);
    std::sort(callers.begin(), callers.end(), [](const cg::Edge* a, const cg::Edge* b) {
      return std::tie(a->caller, a->siteId) < std::tie(b->caller, b->siteId);
    });
    if (callers.empty()) {
      markUnknown("no in-scope caller provides " + fn.name + " argument " +
                  std::to_string(paramIndex));
      return;
    }
    for (const cg::Edge* e : callers) {
      const IrFunction* caller = prog_.find(e->caller);
      if (!caller || e->siteId < 0 || e->siteId >= (int)caller->statements.size()) {
        markUnknown("caller site missing for " + fn.name);
        continue;
      }
      const Statement& st = caller->statements[e->siteId];
      if (paramIndex >= (int)st.args.size()) {
        markUnknown("caller " + e->caller + " passes too few arguments to " + fn.name);
        continue;
      }
      int actual = instantiateAtom(*caller, st.args[paramIndex], depth + 1);
      addEdge(actual, fnArgId);
    }
  }

  int instantiateAtom(const IrFunction& fn, const Atom& a, int depth) {
    touchedFns_.insert(fn.name);
    switch (a.kind) {
      case Atom::Kind::IntConst: {
        DdgNode n;
        n.kind = DdgNode::Kind::Constant;
        n.value = sysid::DomainValue::ofInt(a.num);
        return internNode(n);
      }
      case Atom::Kind::StrConst: {
        DdgNode n;
        n.kind = DdgNode::Kind::Constant;
        n.value = sysid::DomainValue::ofStr(a.text);
        return internNode(n);
      }
      case Atom::Kind::ParamRef:
        return instantiateLabel(fn, param_label(a.paramIndex), depth);
      case Atom::Kind::Var:
        if (fn.isLocal(a.text)) return instantiateLabel(fn, var_label(a.text), depth);
        markUnknown("unmodeled symbol " + a.text + " in " + fn.name);
        return internNode([&] {
          DdgNode n;
          n.kind = DdgNode::Kind::LocalVar;
          n.function = fn.name;
          n.name = "$extern:" + a.text;
          return n;
        }());
      case Atom::Kind::FuncRef:
        markUnknown("function address used as value in " + fn.name);
        return internNode([&] {
          DdgNode n;
          n.kind = DdgNode::Kind::LocalVar;
          n.function = fn.name;
          n.name = "$fnaddr:" + a.text;
          return n;
        }());
    }
    return -1;
  }

  void collectConds() {
    for (const auto& fname : touchedFns_) {
      const IrFunction* fn = prog_.find(fname);
      if (!fn) continue;
      for (const Statement& st : fn->statements) {
        if (st.kind == Statement::Kind::Cond || st.kind == Statement::Kind::Switch)
          ddg_.conds.push_back({fname, st.id});
      }
    }
    std::sort(ddg_.conds.begin(), ddg_.conds.end());
  }

  void finalize() {
    // ApiArg transform happens at intern time, but a summary computed before
    // unknownSource was discovered stays valid: summaries are per-label facts.
    std::sort(ddg_.edges.begin(), ddg_.edges.end());
    std::sort(ddg_.internalEdges.begin(), ddg_.internalEdges.end());
  }

  const ir::IrProgram& prog_;
  const cg::CallGraph& graph_;
  std::string api_;
  std::string apiFn_;
  TaintCache& cache_;
  const TaintOptions& opts_;
  Diags* diags_;
  std::set<std::string> reach_;

  Ddg ddg_;
  std::map<std::string, int> keyMap_;
  std::map<std::pair<std::string, std::string>, int> instMap_;
  std::set<std::pair<std::string, int>> expandedParams_;
  std::set<int> wired_;
  std::set<std::pair<int, int>> edgeSet_, internalSet_;
  std::set<std::string> touchedFns_;
};

}  // namespace

Ddg backward_taint(const ir::IrProgram& prog, const cg::CallGraph& merged,
                   const std::string& api, const sysid::SyscallSite& site, int argIndex,
                   TaintCache& cache, const TaintOptions& opts, Diags* diags) {
  DdgBuilder b(prog, merged, api, cache, opts, diags);
  return b.build(site, argIndex);
}

SourceClassification classify_sources(const Ddg& g) {
  SourceClassification out;
  std::vector<bool> hasIncoming(g.nodes.size(), false);
  for (const auto& [from, to] : g.edges) hasIncoming[to] = true;
  for (const auto& [from, to] : g.internalEdges) hasIncoming[to] = true;
  bool hasField = false, bad = false;
  for (int i = 0; i < (int)g.nodes.size(); ++i) {
    if (hasIncoming[i]) continue;
    out.leaves.push_back(i);
    switch (g.nodes[i].kind) {
      case DdgNode::Kind::Constant:
      case DdgNode::Kind::ApiArg:
        break;
      case DdgNode::Kind::ObjectField:
        hasField = true;
        break;
      default:
        bad = true;
        break;
    }
  }
  if (g.unknownSource || bad)
    out.kind = SourceKind::Unknown;
  else if (hasField)
    out.kind = SourceKind::HasObjectField;
  else
    out.kind = SourceKind::AllDetermined;
  return out;
}

std::string ddg_to_json(const Ddg& g) {
  json doc;
  doc["api"] = g.api;
  doc["site"] = {{"function", g.siteFunction}, {"id", g.siteId}, {"arg", g.argIndex}};
  doc["root"] = g.root;
  doc["unknownSource"] = g.unknownSource;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json jn;
    jn["key"] = n.keyString();
    jn["operands"] = n.operands;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  doc["edges"] = std::move(edges);
  json internal = json::array();
  for (const auto& [a, b] : g.internalEdges) internal.push_back({a, b});
  doc["internalEdges"] = std::move(internal);
  json conds = json::array();
  for (const auto& [f, s] : g.conds) conds.push_back({f, s});
  doc["conds"] = std::move(conds);
  return doc.dump(2) + "\n";
}

}  // namespace secforge::taint
