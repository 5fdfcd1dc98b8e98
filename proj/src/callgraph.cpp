#include "secforge/callgraph.hpp"

#include <algorithm>
#include <deque>

#include "json.hpp"
#include "secforge/error.hpp"

namespace secforge::cg {

using namespace secforge::ir;
using nlohmann::json;

namespace {

void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

// An untyped pointer on either side matches any pointer-like tag; otherwise
// tags must agree exactly (including the object type name).
bool tag_compatible(const TypeTag& arg, const TypeTag& param) {
  if (arg.kind == SemKind::Int || param.kind == SemKind::Int)
    return arg.kind == param.kind;
  if (arg.kind == SemKind::Pointer || param.kind == SemKind::Pointer) return true;
  return arg == param;
}

}  // namespace

CallGraph build_direct_callgraph(const IrProgram& prog,
                                 const std::set<std::string>& knownExternals,
                                 Diags* diags) {
  CallGraph g;
  for (const auto& fn : prog.functions) g.nodes.insert(fn.name);
  for (const auto& fn : prog.functions) {
    for (const auto& st : fn.statements) {
      if (st.kind != Statement::Kind::Call) continue;
      if (prog.find(st.callee)) {
        g.edges.push_back({fn.name, prog.canonical(st.callee), st.id, EdgeKind::Direct,
                           RefineLevel::TypeMatched});
      } else {
        g.externals.insert(st.callee);
        if (!knownExternals.count(st.callee))
          diag_warn(diags, "unknown-callee",
                    fn.name + " calls undefined '" + st.callee + "'");
      }
    }
  }
  sort_unique(g.edges);
  return g;
}

std::vector<AddressTakenRecord> collect_address_taken(const IrProgram& prog) {
  std::set<AddressTakenRecord> out;
  for (const auto& fn : prog.functions) {
    auto scanAtom = [&](const Atom& a) {
      if (a.kind == Atom::Kind::FuncRef) out.insert({a.text, std::nullopt});
    };
    for (const auto& st : fn.statements) {
      if (st.kind == Statement::Kind::Assign) {
        if (st.rhs.kind == Expr::Kind::Atom && st.rhs.a.kind == Atom::Kind::FuncRef) {
          if (st.lhsField) {
            TypeTag baseType;
            int pi = fn.paramIndexOf(*st.lhs);
            if (pi >= 0) baseType = fn.params[pi].type;
            else {
              auto it = fn.localTypes.find(*st.lhs);
              if (it != fn.localTypes.end()) baseType = it->second;
            }
            if (baseType.kind == SemKind::Object)
              out.insert({st.rhs.a.text, baseType.objectType});
            else
              out.insert({st.rhs.a.text, std::nullopt});
          } else {
            out.insert({st.rhs.a.text, std::nullopt});
          }
        } else {
          scanAtom(st.rhs.a);
          if (st.rhs.kind == Expr::Kind::BinOp) scanAtom(st.rhs.b);
        }
      } else {
        for (const auto& a : st.args) scanAtom(a);
        if (st.retValue) {
          scanAtom(st.retValue->a);
          if (st.retValue->kind == Expr::Kind::BinOp) scanAtom(st.retValue->b);
        }
      }
    }
  }
  return {out.begin(), out.end()};
}

CallsiteCandidates resolve_callsite(const IrProgram& prog, const IrFunction& fn,
                                    const Statement& stmt,
                                    const std::vector<AddressTakenRecord>& taken) {
  CallsiteCandidates out;
  for (const auto& r : taken) out.addressTaken.insert(r.function);

  if (stmt.icallTarget.kind == Atom::Kind::FuncRef) {
    // Target is a known constant; the site resolves exactly.
    out.typeMatched.insert(stmt.icallTarget.text);
    out.objectRefined.insert(stmt.icallTarget.text);
    out.refined = true;
    return out;
  }

  for (const auto& name : out.addressTaken) {
    const IrFunction* cand = prog.find(name);
    if (!cand) continue;
    if (cand->params.size() != stmt.args.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < stmt.args.size() && ok; i++)
      ok = tag_compatible(fn.typeOfAtom(stmt.args[i]), cand->params[i].type);
    if (!ok) continue;
    if (stmt.lhs && !cand->hasValueReturn()) continue;
    out.typeMatched.insert(name);
  }

  if (stmt.icallObjectType) {
    out.refined = true;
    for (const auto& r : taken) {
      if (!out.typeMatched.count(r.function)) continue;
      if (r.storedInType && *r.storedInType == *stmt.icallObjectType)
        out.objectRefined.insert(r.function);
    }
  }
  return out;
}

CallGraph resolve_indirect_calls(const IrProgram& prog,
                                 const std::vector<AddressTakenRecord>& taken) {
  CallGraph g;
  for (const auto& fn : prog.functions) g.nodes.insert(fn.name);
  for (const auto& fn : prog.functions) {
    for (const auto& st : fn.statements) {
      if (st.kind != Statement::Kind::IndirectCall) continue;
      CallsiteCandidates cands = resolve_callsite(prog, fn, st, taken);
      for (const auto& target : cands.best())
        g.edges.push_back({fn.name, target, st.id, EdgeKind::Indirect, cands.achieved()});
    }
  }
  sort_unique(g.edges);
  return g;
}

CallGraph merge_graphs(const CallGraph& a, const CallGraph& b) {
  CallGraph g;
  g.nodes = a.nodes;
  g.nodes.insert(b.nodes.begin(), b.nodes.end());
  g.externals = a.externals;
  g.externals.insert(b.externals.begin(), b.externals.end());
  g.edges = a.edges;
  g.edges.insert(g.edges.end(), b.edges.begin(), b.edges.end());
  sort_unique(g.edges);
  return g;
}

std::set<std::string> reachable_from(const CallGraph& g, const std::string& root) {
  std::set<std::string> seen;
  if (!g.nodes.count(root)) return seen;
  std::deque<std::string> queue{root};
  seen.insert(root);
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    for (const auto& e : g.edges) {
      if (e.caller != cur || seen.count(e.callee)) continue;
      seen.insert(e.callee);
      queue.push_back(e.callee);
    }
  }
  return seen;
}

namespace {

const char* kind_name(EdgeKind k) { return k == EdgeKind::Direct ? "direct" : "indirect"; }
const char* level_name(RefineLevel l) {
  switch (l) {
    case RefineLevel::AddressTaken: return "address-taken";
    case RefineLevel::TypeMatched: return "type-matched";
    case RefineLevel::ObjectRefined: return "object-refined";
  }
  return "type-matched";
}

EdgeKind kind_from(const std::string& s) {
  if (s == "direct") return EdgeKind::Direct;
  if (s == "indirect") return EdgeKind::Indirect;
  throw AnalysisError(ErrorCode::SchemaError, "bad edge kind: " + s);
}
RefineLevel level_from(const std::string& s) {
  if (s == "address-taken") return RefineLevel::AddressTaken;
  if (s == "type-matched") return RefineLevel::TypeMatched;
  if (s == "object-refined") return RefineLevel::ObjectRefined;
  throw AnalysisError(ErrorCode::SchemaError, "bad refinement level: " + s);
}

}  // namespace

std::string graph_to_json(const CallGraph& g) {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : g.nodes) j["nodes"].push_back(n);
  j["externals"] = json::array();
  for (const auto& n : g.externals) j["externals"].push_back(n);
  j["edges"] = json::array();
  for (const auto& e : g.edges) {
    json je;
    je["from"] = e.caller;
    je["to"] = e.callee;
    je["site"] = e.siteId;
    je["kind"] = kind_name(e.kind);
    je["level"] = level_name(e.level);
    j["edges"].push_back(je);
  }
  return j.dump(2) + "\n";
}

CallGraph graph_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("edges"))
    throw AnalysisError(ErrorCode::SchemaError, "bad call graph document");
  CallGraph g;
  for (const auto& n : j.value("nodes", json::array())) g.nodes.insert(n.get<std::string>());
  for (const auto& n : j.value("externals", json::array()))
    g.externals.insert(n.get<std::string>());
  for (const auto& je : j["edges"]) {
    Edge e;
    e.caller = je.at("from").get<std::string>();
    e.callee = je.at("to").get<std::string>();
    e.siteId = je.at("site").get<int>();
    e.kind = kind_from(je.at("kind").get<std::string>());
    e.level = level_from(je.at("level").get<std::string>());
    g.edges.push_back(e);
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace secforge::cg
