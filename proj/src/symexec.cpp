#include "secforge/symexec.hpp"

#include <algorithm>
#include <deque>
#include <functional>

#include "secforge/error.hpp"
#include "secforge/util.hpp"

namespace secforge::symexec {

using ir::Atom;
using ir::BasicBlock;
using ir::Expr;
using ir::IrFunction;
using ir::Statement;
using sysid::DomainValue;

namespace {

std::optional<long long> fold_binop(const std::string& op, long long x, long long y) {
  if (op == "+") return x + y;
  if (op == "-") return x - y;
  if (op == "*") return x * y;
  if (op == "/") return y == 0 ? std::nullopt : std::optional<long long>(x / y);
  if (op == "%") return y == 0 ? std::nullopt : std::optional<long long>(x % y);
  if (op == "&") return x & y;
  if (op == "|") return x | y;
  if (op == "^") return x ^ y;
  if (op == "<<") return x << y;
  if (op == ">>") return x >> y;
  return std::nullopt;
}

std::optional<bool> compare_ints(const std::string& op, long long x, long long y) {
  if (op == "==") return x == y;
  if (op == "!=") return x != y;
  if (op == "<") return x < y;
  if (op == "<=") return x <= y;
  if (op == ">") return x > y;
  if (op == ">=") return x >= y;
  return std::nullopt;
}

size_t block_index(const IrFunction& fn, const std::string& label) {
  const BasicBlock* b = fn.blockByLabel(label);
  if (!b) throw AnalysisError(ErrorCode::Internal, "unknown label " + label + " in " + fn.name);
  return static_cast<size_t>(b - fn.blocks.data());
}

// ---------------------------------------------------------------------------
// Symbolic pass: explore paths with values tracked relative to parameters.

struct SymVal {
  enum class K { Opaque, Const, Param, CharOfParam };
  K k = K::Opaque;
  DomainValue c;
  int param = -1;
  int charIdx = -1;

  static SymVal opaque() { return {}; }
  static SymVal constant(DomainValue v) { return {K::Const, std::move(v), -1, -1}; }
  static SymVal ofParam(int i) { return {K::Param, {}, i, -1}; }
  static SymVal charOf(int i, int idx) { return {K::CharOfParam, {}, i, idx}; }

  auto key() const { return std::tie(k, c, param, charIdx); }
  bool operator==(const SymVal& o) const { return key() == o.key(); }
};

SymVal apply_relation(const Relation& rel, const std::vector<SymVal>& args) {
  switch (rel.kind) {
    case Relation::Kind::Constant:
      return SymVal::constant(rel.constant);
    case Relation::Kind::Identity:
      if (rel.paramIndex >= 0 && rel.paramIndex < (int)args.size())
        return args[rel.paramIndex];
      return SymVal::opaque();
    case Relation::Kind::Table: {
      if (rel.paramIndex < 0 || rel.paramIndex >= (int)args.size()) return SymVal::opaque();
      const SymVal& key = args[rel.paramIndex];
      if (key.k != SymVal::K::Const) return SymVal::opaque();
      for (const auto& [k, v] : rel.table)
        if (k == key.c) return SymVal::constant(DomainValue::ofInt(v));
      return SymVal::opaque();
    }
    case Relation::Kind::Undetermined:
      break;
  }
  return SymVal::opaque();
}

struct SymPathState {
  size_t block = 0;
  size_t offset = 0;  // index into block's stmts
  std::map<std::string, SymVal> env;
  int steps = 0;
};

struct SymResult {
  std::map<SlotId, std::vector<SymVal>> slotValues;
  bool budgetExceeded = false;
};

class SymWalker {
 public:
  SymWalker(const IrFunction& fn, const std::map<std::string, ArgRelationSummary>& callees,
            const SymexecOptions& opts)
      : fn_(fn), callees_(callees), opts_(opts) {}

  SymResult run() {
    std::deque<SymPathState> work;
    if (!fn_.blocks.empty()) work.push_back({});
    int paths = 0;
    while (!work.empty()) {
      if (++paths > opts_.pathBudget) {
        out_.budgetExceeded = true;
        break;
      }
      SymPathState st = std::move(work.front());
      work.pop_front();
      runPath(std::move(st), work);
    }
    return std::move(out_);
  }

 private:
  SymVal evalAtom(const Atom& a, const std::map<std::string, SymVal>& env) {
    switch (a.kind) {
      case Atom::Kind::IntConst:
        return SymVal::constant(DomainValue::ofInt(a.num));
      case Atom::Kind::StrConst:
        return SymVal::constant(DomainValue::ofStr(a.text));
      case Atom::Kind::ParamRef:
        return SymVal::ofParam(a.paramIndex);
      case Atom::Kind::Var: {
        auto it = env.find(a.text);
        return it == env.end() ? SymVal::opaque() : it->second;
      }
      case Atom::Kind::FuncRef:
        return SymVal::opaque();
    }
    return SymVal::opaque();
  }

  SymVal evalExpr(const Expr& e, const std::map<std::string, SymVal>& env) {
    switch (e.kind) {
      case Expr::Kind::Atom:
        return evalAtom(e.a, env);
      case Expr::Kind::BinOp: {
        SymVal a = evalAtom(e.a, env), b = evalAtom(e.b, env);
        if (a.k == SymVal::K::Const && b.k == SymVal::K::Const && !a.c.isStr && !b.c.isStr) {
          auto r = fold_binop(e.op, a.c.i, b.c.i);
          if (r) return SymVal::constant(DomainValue::ofInt(*r));
        }
        return SymVal::opaque();
      }
      case Expr::Kind::CharAt: {
        SymVal base = evalAtom(e.a, env);
        if (base.k == SymVal::K::Param && e.charIndex >= 0)
          return SymVal::charOf(base.param, e.charIndex);
        if (base.k == SymVal::K::Const && base.c.isStr && e.charIndex >= 0 &&
            e.charIndex < (int)base.c.s.size())
          return SymVal::constant(
              DomainValue::ofInt((unsigned char)base.c.s[e.charIndex]));
        return SymVal::opaque();
      }
      case Expr::Kind::FieldLoad:
        return SymVal::opaque();
    }
    return SymVal::opaque();
  }

  void record(SlotId slot, SymVal v) { out_.slotValues[slot].push_back(std::move(v)); }

  void setVar(SymPathState& st, const Statement& stmt, SymVal v) {
    if (stmt.lhs && !stmt.lhsField) st.env[*stmt.lhs] = std::move(v);
  }

  void runPath(SymPathState st, std::deque<SymPathState>& work) {
    int hops = 0;
    while (st.block < fn_.blocks.size()) {
      if (++hops > opts_.stepBudget) {  // statement-free goto cycles
        out_.budgetExceeded = true;
        return;
      }
      const BasicBlock& b = fn_.blocks[st.block];
      for (; st.offset < b.stmts.size(); ++st.offset) {
        if (++st.steps > opts_.stepBudget) {
          out_.budgetExceeded = true;
          return;
        }
        const Statement& stmt = fn_.statements[b.stmts[st.offset]];
        switch (stmt.kind) {
          case Statement::Kind::Assign:
            setVar(st, stmt, evalExpr(stmt.rhs, st.env));
            break;
          case Statement::Kind::Call:
          case Statement::Kind::IndirectCall: {
            std::vector<SymVal> args;
            for (size_t k = 0; k < stmt.args.size(); ++k) {
              args.push_back(evalAtom(stmt.args[k], st.env));
              record(SlotId::callArg(stmt.id, (int)k), args.back());
            }
            SymVal result = SymVal::opaque();
            if (stmt.kind == Statement::Kind::Call) {
              auto cs = callees_.find(stmt.callee);
              if (cs != callees_.end()) {
                auto rel = cs->second.relations.find(SlotId::ret());
                if (rel != cs->second.relations.end())
                  result = apply_relation(rel->second, args);
              }
            }
            setVar(st, stmt, std::move(result));
            break;
          }
          case Statement::Kind::AsmSyscall:
            setVar(st, stmt, SymVal::opaque());
            break;
          case Statement::Kind::Cond: {
            SymPathState other = st;
            other.block = block_index(fn_, stmt.elseLabel);
            other.offset = 0;
            other.steps++;
            work.push_back(std::move(other));
            st.block = block_index(fn_, stmt.thenLabel);
            st.offset = 0;
            goto nextBlock;
          }
          case Statement::Kind::Switch: {
            std::set<std::string> targets;
            for (const auto& [val, lbl] : stmt.cases) targets.insert(lbl);
            targets.insert(stmt.defaultLabel);
            bool first = true;
            size_t firstBlock = 0;
            for (const auto& lbl : targets) {
              if (first) {
                firstBlock = block_index(fn_, lbl);
                first = false;
              } else {
                SymPathState other = st;
                other.block = block_index(fn_, lbl);
                other.offset = 0;
                other.steps++;
                work.push_back(std::move(other));
              }
            }
            st.block = firstBlock;
            st.offset = 0;
            goto nextBlock;
          }
          case Statement::Kind::Return:
            record(SlotId::ret(),
                   stmt.retValue ? evalExpr(*stmt.retValue, st.env) : SymVal::opaque());
            return;
        }
      }
      if (b.gotoTarget)
        st.block = block_index(fn_, *b.gotoTarget);
      else
        st.block++;
      st.offset = 0;
    nextBlock:;
    }
    record(SlotId::ret(), SymVal::opaque());  // fell off the end
  }

  const IrFunction& fn_;
  const std::map<std::string, ArgRelationSummary>& callees_;
  const SymexecOptions& opts_;
  SymResult out_;
};

// ---------------------------------------------------------------------------
// Concrete pass: run the function on one pinned parameter value to build
// lookup tables over finite domains.

struct CVal {
  enum class K { Opaque, Int, Str };
  K k = K::Opaque;
  long long i = 0;
  std::string s;

  static CVal opaque() { return {}; }
  static CVal ofInt(long long v) { return {K::Int, v, ""}; }
  static CVal ofStr(std::string v) { return {K::Str, 0, std::move(v)}; }
  static CVal ofDomain(const DomainValue& d) {
    return d.isStr ? ofStr(d.s) : ofInt(d.i);
  }
};

class ConcreteRunner {
 public:
  ConcreteRunner(const IrFunction& fn, const std::map<std::string, ArgRelationSummary>& callees,
                 const SymexecOptions& opts)
      : fn_(fn), callees_(callees), opts_(opts) {}

  // Returns the integer return value, or nothing when execution depends on
  // an unpinned input or leaves the modeled fragment.
  std::optional<long long> run(int paramIndex, const DomainValue& v) {
    std::vector<CVal> args(fn_.params.size(), CVal::opaque());
    if (paramIndex < 0 || paramIndex >= (int)args.size()) return std::nullopt;
    args[paramIndex] = CVal::ofDomain(v);

    std::map<std::string, CVal> env;
    size_t block = 0;
    int steps = 0;
    int hops = 0;
    while (block < fn_.blocks.size()) {
      if (++hops > opts_.stepBudget) return std::nullopt;
      const BasicBlock& b = fn_.blocks[block];
      std::optional<size_t> jump;
      for (int sid : b.stmts) {
        if (++steps > opts_.stepBudget) return std::nullopt;
        const Statement& stmt = fn_.statements[sid];
        switch (stmt.kind) {
          case Statement::Kind::Assign:
            setVar(env, stmt, evalExpr(stmt.rhs, env, args));
            break;
          case Statement::Kind::Call: {
            std::vector<CVal> actuals;
            for (const auto& a : stmt.args) actuals.push_back(evalAtom(a, env, args));
            setVar(env, stmt, applyCallee(stmt.callee, actuals));
            break;
          }
          case Statement::Kind::IndirectCall:
          case Statement::Kind::AsmSyscall:
            setVar(env, stmt, CVal::opaque());
            break;
          case Statement::Kind::Cond: {
            CVal l = evalAtom(stmt.condLhs, env, args);
            CVal r = evalAtom(stmt.condRhs, env, args);
            std::optional<bool> taken;
            if (l.k == CVal::K::Int && r.k == CVal::K::Int)
              taken = compare_ints(stmt.condOp, l.i, r.i);
            else if (l.k == CVal::K::Str && r.k == CVal::K::Str) {
              if (stmt.condOp == "==") taken = l.s == r.s;
              else if (stmt.condOp == "!=") taken = l.s != r.s;
            }
            if (!taken) return std::nullopt;
            jump = block_index(fn_, *taken ? stmt.thenLabel : stmt.elseLabel);
            break;
          }
          case Statement::Kind::Switch: {
            CVal scrut = evalAtom(stmt.scrutinee, env, args);
            if (scrut.k != CVal::K::Int) return std::nullopt;
            std::string target = stmt.defaultLabel;
            for (const auto& [val, lbl] : stmt.cases)
              if (val == scrut.i) {
                target = lbl;
                break;
              }
            jump = block_index(fn_, target);
            break;
          }
          case Statement::Kind::Return: {
            if (!stmt.retValue) return std::nullopt;
            CVal r = evalExpr(*stmt.retValue, env, args);
            if (r.k != CVal::K::Int) return std::nullopt;
            return r.i;
          }
        }
        if (jump) break;
      }
      if (jump)
        block = *jump;
      else if (b.gotoTarget)
        block = block_index(fn_, *b.gotoTarget);
      else
        block++;
    }
    return std::nullopt;
  }

 private:
  void setVar(std::map<std::string, CVal>& env, const Statement& stmt, CVal v) {
    if (stmt.lhs && !stmt.lhsField) env[*stmt.lhs] = std::move(v);
  }

  CVal evalAtom(const Atom& a, const std::map<std::string, CVal>& env,
                const std::vector<CVal>& args) {
    switch (a.kind) {
      case Atom::Kind::IntConst:
        return CVal::ofInt(a.num);
      case Atom::Kind::StrConst:
        return CVal::ofStr(a.text);
      case Atom::Kind::ParamRef:
        if (a.paramIndex >= 0 && a.paramIndex < (int)args.size()) return args[a.paramIndex];
        return CVal::opaque();
      case Atom::Kind::Var: {
        auto it = env.find(a.text);
        return it == env.end() ? CVal::opaque() : it->second;
      }
      case Atom::Kind::FuncRef:
        return CVal::opaque();
    }
    return CVal::opaque();
  }

  CVal evalExpr(const Expr& e, const std::map<std::string, CVal>& env,
                const std::vector<CVal>& args) {
    switch (e.kind) {
      case Expr::Kind::Atom:
        return evalAtom(e.a, env, args);
      case Expr::Kind::BinOp: {
        CVal a = evalAtom(e.a, env, args), b = evalAtom(e.b, env, args);
        if (a.k == CVal::K::Int && b.k == CVal::K::Int) {
          auto r = fold_binop(e.op, a.i, b.i);
          if (r) return CVal::ofInt(*r);
        }
        return CVal::opaque();
      }
      case Expr::Kind::CharAt: {
        CVal base = evalAtom(e.a, env, args);
        if (base.k == CVal::K::Str && e.charIndex >= 0 && e.charIndex < (int)base.s.size())
          return CVal::ofInt((unsigned char)base.s[e.charIndex]);
        return CVal::opaque();
      }
      case Expr::Kind::FieldLoad:
        return CVal::opaque();
    }
    return CVal::opaque();
  }

  CVal applyCallee(const std::string& callee, const std::vector<CVal>& actuals) {
    auto cs = callees_.find(callee);
    if (cs == callees_.end()) return CVal::opaque();
    auto it = cs->second.relations.find(SlotId::ret());
    if (it == cs->second.relations.end()) return CVal::opaque();
    const Relation& rel = it->second;
    switch (rel.kind) {
      case Relation::Kind::Constant:
        return CVal::ofDomain(rel.constant);
      case Relation::Kind::Identity:
        if (rel.paramIndex >= 0 && rel.paramIndex < (int)actuals.size())
          return actuals[rel.paramIndex];
        return CVal::opaque();
      case Relation::Kind::Table: {
        if (rel.paramIndex < 0 || rel.paramIndex >= (int)actuals.size()) return CVal::opaque();
        const CVal& key = actuals[rel.paramIndex];
        DomainValue dk = key.k == CVal::K::Int   ? DomainValue::ofInt(key.i)
                         : key.k == CVal::K::Str ? DomainValue::ofStr(key.s)
                                                 : DomainValue{};
        if (key.k == CVal::K::Opaque) return CVal::opaque();
        for (const auto& [k, v] : rel.table)
          if (k == dk) return CVal::ofInt(v);
        return CVal::opaque();
      }
      case Relation::Kind::Undetermined:
        break;
    }
    return CVal::opaque();
  }

  const IrFunction& fn_;
  const std::map<std::string, ArgRelationSummary>& callees_;
  const SymexecOptions& opts_;
};

}  // namespace

// ---------------------------------------------------------------------------

FnDomains propagate_domains(const ir::IrProgram& prog, const cg::CallGraph& merged,
                            const ApiDomains& apiDomains) {
  enum class Tag { Bottom, Finite, Top };
  struct Cell {
    Tag tag = Tag::Bottom;
    Domain vals;
  };
  std::map<std::string, std::vector<Cell>> st;
  for (const auto& fn : prog.functions) st[fn.name].resize(fn.params.size());

  auto joinFinite = [](Cell& c, const Domain& d) -> bool {
    if (c.tag == Tag::Top) return false;
    size_t before = c.vals.size();
    c.vals.insert(d.begin(), d.end());
    bool changed = c.tag != Tag::Finite || c.vals.size() != before;
    c.tag = Tag::Finite;
    return changed;
  };
  auto joinTop = [](Cell& c) -> bool {
    if (c.tag == Tag::Top) return false;
    c = {Tag::Top, {}};
    return true;
  };

  for (const auto& [api, argDomains] : apiDomains) {
    std::string fn = prog.canonical(api);
    auto it = st.find(fn);
    if (it == st.end()) continue;
    for (const auto& [idx, d] : argDomains)
      if (idx >= 0 && idx < (int)it->second.size()) joinFinite(it->second[idx], d);
  }

  for (int round = 0; round < 100; ++round) {
    bool changed = false;
    for (const auto& e : merged.edges) {
      const IrFunction* caller = prog.find(e.caller);
      const IrFunction* callee = prog.find(e.callee);
      if (!caller || !callee || e.siteId < 0 ||
          e.siteId >= (int)caller->statements.size())
        continue;
      const Statement& stmt = caller->statements[e.siteId];
      auto& cells = st[callee->name];
      for (size_t k = 0; k < cells.size(); ++k) {
        if (k >= stmt.args.size()) {
          changed |= joinTop(cells[k]);
          continue;
        }
        const Atom& a = stmt.args[k];
        switch (a.kind) {
          case Atom::Kind::IntConst:
            changed |= joinFinite(cells[k], {DomainValue::ofInt(a.num)});
            break;
          case Atom::Kind::StrConst:
            changed |= joinFinite(cells[k], {DomainValue::ofStr(a.text)});
            break;
          case Atom::Kind::ParamRef: {
            const auto& callerCells = st[caller->name];
            if (a.paramIndex < 0 || a.paramIndex >= (int)callerCells.size()) {
              changed |= joinTop(cells[k]);
              break;
            }
            const Cell& src = callerCells[a.paramIndex];
            if (src.tag == Tag::Top)
              changed |= joinTop(cells[k]);
            else if (src.tag == Tag::Finite)
              changed |= joinFinite(cells[k], src.vals);
            break;
          }
          default:
            changed |= joinTop(cells[k]);
            break;
        }
      }
    }
    if (!changed) break;
  }

  FnDomains out;
  for (const auto& [fn, cells] : st)
    for (size_t i = 0; i < cells.size(); ++i)
      if (cells[i].tag == Tag::Finite && !cells[i].vals.empty())
        out[fn][(int)i] = cells[i].vals;
  return out;
}

ArgRelationSummary symexec_function(const IrFunction& fn, const ir::IrProgram& prog,
                                    const cg::CallGraph& merged, const FnDomains& domains,
                                    const std::map<std::string, ArgRelationSummary>& callees,
                                    const SymexecOptions& opts) {
  (void)prog;
  (void)merged;
  ArgRelationSummary out;
  SymWalker walker(fn, callees, opts);
  SymResult res = walker.run();
  out.pathBudgetExceeded = res.budgetExceeded;
  if (res.budgetExceeded) return out;  // every slot stays undetermined

  for (const auto& [slot, vals] : res.slotValues) {
    if (vals.empty()) continue;
    bool allEqual = true;
    for (const auto& v : vals)
      if (!(v == vals.front())) allEqual = false;
    if (allEqual && vals.front().k == SymVal::K::Const) {
      Relation r;
      r.kind = Relation::Kind::Constant;
      r.constant = vals.front().c;
      out.relations[slot] = std::move(r);
      continue;
    }
    if (allEqual && vals.front().k == SymVal::K::Param) {
      Relation r;
      r.kind = Relation::Kind::Identity;
      r.paramIndex = vals.front().param;
      out.relations[slot] = std::move(r);
      continue;
    }
    if (slot.kind != SlotId::Kind::Return) continue;

    // Mixed returns: when one parameter ranges over a small finite set, pin
    // it to each value in turn and keep the function as a lookup table if
    // every run completes concretely.
    auto fd = domains.find(fn.name);
    if (fd == domains.end()) continue;
    for (size_t m = 0; m < fn.params.size(); ++m) {
      auto dit = fd->second.find((int)m);
      if (dit == fd->second.end()) continue;
      const Domain& dom = dit->second;
      if (dom.empty() || (int)dom.size() > opts.maxDomain) continue;
      ConcreteRunner runner(fn, callees, opts);
      std::vector<std::pair<DomainValue, long long>> entries;
      bool ok = true;
      for (const auto& v : dom) {
        auto r = runner.run((int)m, v);
        if (!r) {
          ok = false;
          break;
        }
        entries.push_back({v, *r});
      }
      if (!ok) continue;
      Relation r;
      r.kind = Relation::Kind::Table;
      r.paramIndex = (int)m;
      r.table = std::move(entries);
      out.relations[slot] = std::move(r);
      break;
    }
  }
  return out;
}

std::map<std::string, ArgRelationSummary> compute_summaries(const ir::IrProgram& prog,
                                                            const cg::CallGraph& merged,
                                                            const FnDomains& domains,
                                                            const SymexecOptions& opts) {
  std::map<std::string, std::set<std::string>> callees;
  for (const auto& fn : prog.functions) callees[fn.name];
  for (const auto& e : merged.edges)
    if (prog.find(e.caller) && prog.find(e.callee)) callees[e.caller].insert(e.callee);

  // Functions that can reach themselves get no relations: a recursive value
  // has no finite path enumeration.
  std::set<std::string> cyclic;
  for (const auto& [root, direct] : callees) {
    std::set<std::string> seen;
    std::deque<std::string> q(direct.begin(), direct.end());
    while (!q.empty()) {
      std::string cur = q.front();
      q.pop_front();
      if (!seen.insert(cur).second) continue;
      if (cur == root) break;
      for (const auto& n : callees[cur]) q.push_back(n);
    }
    if (seen.count(root)) cyclic.insert(root);
  }

  std::map<std::string, ArgRelationSummary> out;
  std::set<std::string> done;
  for (const auto& name : cyclic) {
    out[name] = {};
    done.insert(name);
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& fn : prog.functions) {
      if (done.count(fn.name)) continue;
      bool ready = true;
      for (const auto& c : callees[fn.name])
        if (!done.count(c)) ready = false;
      if (!ready) continue;
      out[fn.name] = symexec_function(fn, prog, merged, domains, out, opts);
      done.insert(fn.name);
      progress = true;
    }
  }
  for (const auto& fn : prog.functions)
    if (!done.count(fn.name)) out[fn.name] = {};
  return out;
}

// ---------------------------------------------------------------------------
// Mapping resolution: fold the dependency graph into a relation between one
// syscall argument and the API's own arguments.

namespace {

struct Rel {
  enum class K { None, Consts, Ident, CharOf, Table };
  K k = K::None;
  std::set<DomainValue> consts;
  int apiArg = -1;
  int charIdx = -1;
  std::vector<std::pair<DomainValue, long long>> table;
};

Rel rel_none() { return {}; }

Rel merge_rels(const Rel& a, const Rel& b) {
  if (a.k == Rel::K::None || b.k == Rel::K::None) return rel_none();
  if (a.k != b.k) return rel_none();
  switch (a.k) {
    case Rel::K::Consts: {
      Rel r = a;
      r.consts.insert(b.consts.begin(), b.consts.end());
      return r;
    }
    case Rel::K::Ident:
      return a.apiArg == b.apiArg ? a : rel_none();
    case Rel::K::CharOf:
      return a.apiArg == b.apiArg && a.charIdx == b.charIdx ? a : rel_none();
    case Rel::K::Table:
      return a.apiArg == b.apiArg && a.table == b.table ? a : rel_none();
    case Rel::K::None:
      break;
  }
  return rel_none();
}

std::optional<long long> table_lookup(
    const std::vector<std::pair<DomainValue, long long>>& table, const DomainValue& key) {
  for (const auto& [k, v] : table)
    if (k == key) return v;
  return std::nullopt;
}

class MappingResolver {
 public:
  MappingResolver(const taint::Ddg& g,
                  const std::map<std::string, ArgRelationSummary>& summaries,
                  const ApiDomains& apiDomains)
      : g_(g), summaries_(summaries) {
    auto it = apiDomains.find(g.api);
    if (it != apiDomains.end()) domains_ = &it->second;
    for (const auto& [from, to] : g.edges) in_[to].push_back(from);
    for (const auto& [from, to] : g.internalEdges) internalIn_[to].push_back(from);
  }

  std::optional<sysid::ArgumentMapping> resolve() {
    if (g_.unknownSource || g_.root < 0) return std::nullopt;
    Rel r = walk(g_.root);
    sysid::ArgumentMapping m;
    m.api = g_.api;
    m.siteFunction = g_.siteFunction;
    m.siteId = g_.siteId;
    m.syscallArg = g_.argIndex;
    switch (r.k) {
      case Rel::K::Ident:
        m.kind = sysid::ArgumentMapping::Kind::Identity;
        m.apiArg = r.apiArg;
        return m;
      case Rel::K::Consts: {
        std::set<long long> vals;
        for (const auto& v : r.consts) {
          if (v.isStr) return std::nullopt;
          vals.insert(v.i);
        }
        m.kind = sysid::ArgumentMapping::Kind::ConstantSet;
        m.values.assign(vals.begin(), vals.end());
        return m;
      }
      case Rel::K::CharOf: {
        auto tbl = charTable(r.apiArg, r.charIdx);
        if (!tbl) return std::nullopt;
        m.kind = sysid::ArgumentMapping::Kind::Table;
        m.apiArg = r.apiArg;
        m.table = std::move(*tbl);
        return m;
      }
      case Rel::K::Table:
        m.kind = sysid::ArgumentMapping::Kind::Table;
        m.apiArg = r.apiArg;
        m.table = std::move(r.table);
        return m;
      case Rel::K::None:
        return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  const Domain* domainOf(int apiArg) const {
    if (!domains_) return nullptr;
    auto it = domains_->find(apiArg);
    return it == domains_->end() ? nullptr : &it->second;
  }

  std::optional<std::vector<std::pair<DomainValue, long long>>> charTable(int apiArg,
                                                                          int idx) const {
    const Domain* d = domainOf(apiArg);
    if (!d) return std::nullopt;
    std::vector<std::pair<DomainValue, long long>> out;
    for (const auto& v : *d) {
      if (!v.isStr || idx < 0 || idx >= (int)v.s.size()) return std::nullopt;
      out.push_back({v, (long long)(unsigned char)v.s[idx]});
    }
    return out;
  }

  Rel walk(int id) {
    auto it = memo_.find(id);
    if (it != memo_.end()) return it->second;
    if (!visiting_.insert(id).second) return rel_none();
    Rel r = walkInner(id);
    visiting_.erase(id);
    memo_[id] = r;
    return r;
  }

  Rel mergeIncoming(int id) {
    auto it = in_.find(id);
    if (it == in_.end() || it->second.empty()) return rel_none();
    Rel acc = walk(it->second.front());
    for (size_t i = 1; i < it->second.size(); ++i) acc = merge_rels(acc, walk(it->second[i]));
    return acc;
  }

  Rel walkInner(int id) {
    const taint::DdgNode& n = g_.nodes[id];
    switch (n.kind) {
      case taint::DdgNode::Kind::Constant: {
        Rel r;
        r.k = Rel::K::Consts;
        r.consts = {n.value};
        return r;
      }
      case taint::DdgNode::Kind::ApiArg: {
        Rel r;
        r.k = Rel::K::Ident;
        r.apiArg = n.index;
        return r;
      }
      case taint::DdgNode::Kind::FnArg:
      case taint::DdgNode::Kind::LocalVar:
        return mergeIncoming(id);
      case taint::DdgNode::Kind::ObjectField:
        return rel_none();
      case taint::DdgNode::Kind::Calc:
        break;
    }

    const std::string& op = n.op;
    if (op.rfind("call:", 0) == 0) return composeCall(op.substr(5), n.operands);
    if (op == "icall") {
      auto it = internalIn_.find(id);
      if (it == internalIn_.end() || it->second.empty()) return rel_none();
      bool first = true;
      Rel acc;
      for (int src : it->second) {
        const std::string& callee = g_.nodes[src].function;
        Rel r = composeCall(callee, n.operands);
        acc = first ? r : merge_rels(acc, r);
        first = false;
      }
      return acc;
    }
    if (op.rfind("charAt:", 0) == 0) {
      int idx = std::stoi(op.substr(7));
      if (n.operands.size() != 1) return rel_none();
      Rel base = walk(n.operands[0]);
      if (base.k == Rel::K::Ident) {
        Rel r;
        r.k = Rel::K::CharOf;
        r.apiArg = base.apiArg;
        r.charIdx = idx;
        return r;
      }
      if (base.k == Rel::K::Consts) {
        Rel r;
        r.k = Rel::K::Consts;
        for (const auto& v : base.consts) {
          if (!v.isStr || idx < 0 || idx >= (int)v.s.size()) return rel_none();
          r.consts.insert(DomainValue::ofInt((unsigned char)v.s[idx]));
        }
        return r;
      }
      return rel_none();
    }
    // Plain binary operator: fold constant images only.
    if (n.operands.size() != 2) return rel_none();
    Rel a = walk(n.operands[0]);
    Rel b = walk(n.operands[1]);
    if (a.k != Rel::K::Consts || b.k != Rel::K::Consts) return rel_none();
    Rel r;
    r.k = Rel::K::Consts;
    for (const auto& x : a.consts)
      for (const auto& y : b.consts) {
        if (x.isStr || y.isStr) return rel_none();
        auto f = fold_binop(op, x.i, y.i);
        if (!f) return rel_none();
        r.consts.insert(DomainValue::ofInt(*f));
        if (r.consts.size() > 256) return rel_none();
      }
    return r;
  }

  Rel composeCall(const std::string& callee, const std::vector<int>& operands) {
    auto cs = summaries_.find(callee);
    if (cs == summaries_.end()) return rel_none();
    auto rit = cs->second.relations.find(SlotId::ret());
    if (rit == cs->second.relations.end()) return rel_none();
    const Relation& rel = rit->second;
    switch (rel.kind) {
      case Relation::Kind::Constant: {
        Rel r;
        r.k = Rel::K::Consts;
        r.consts = {rel.constant};
        return r;
      }
      case Relation::Kind::Identity:
        if (rel.paramIndex < 0 || rel.paramIndex >= (int)operands.size()) return rel_none();
        return walk(operands[rel.paramIndex]);
      case Relation::Kind::Table: {
        if (rel.paramIndex < 0 || rel.paramIndex >= (int)operands.size()) return rel_none();
        Rel key = walk(operands[rel.paramIndex]);
        switch (key.k) {
          case Rel::K::Consts: {
            Rel r;
            r.k = Rel::K::Consts;
            for (const auto& v : key.consts) {
              auto hit = table_lookup(rel.table, v);
              if (!hit) return rel_none();
              r.consts.insert(DomainValue::ofInt(*hit));
            }
            return r;
          }
          case Rel::K::Ident: {
            const Domain* d = domainOf(key.apiArg);
            if (!d) return rel_none();
            Rel r;
            r.k = Rel::K::Table;
            r.apiArg = key.apiArg;
            for (const auto& v : *d) {
              auto hit = table_lookup(rel.table, v);
              if (!hit) return rel_none();
              r.table.push_back({v, *hit});
            }
            return r;
          }
          case Rel::K::CharOf: {
            const Domain* d = domainOf(key.apiArg);
            if (!d) return rel_none();
            Rel r;
            r.k = Rel::K::Table;
            r.apiArg = key.apiArg;
            for (const auto& v : *d) {
              if (!v.isStr || key.charIdx < 0 || key.charIdx >= (int)v.s.size())
                return rel_none();
              auto hit = table_lookup(
                  rel.table, DomainValue::ofInt((unsigned char)v.s[key.charIdx]));
              if (!hit) return rel_none();
              r.table.push_back({v, *hit});
            }
            return r;
          }
          case Rel::K::Table: {
            Rel r;
            r.k = Rel::K::Table;
            r.apiArg = key.apiArg;
            for (const auto& [k, v] : key.table) {
              auto hit = table_lookup(rel.table, DomainValue::ofInt(v));
              if (!hit) return rel_none();
              r.table.push_back({k, *hit});
            }
            return r;
          }
          case Rel::K::None:
            return rel_none();
        }
        return rel_none();
      }
      case Relation::Kind::Undetermined:
        break;
    }
    return rel_none();
  }

  const taint::Ddg& g_;
  const std::map<std::string, ArgRelationSummary>& summaries_;
  const std::map<int, Domain>* domains_ = nullptr;
  std::map<int, std::vector<int>> in_, internalIn_;
  std::map<int, Rel> memo_;
  std::set<int> visiting_;
};

}  // namespace

std::optional<sysid::ArgumentMapping> resolve_arg_mapping(
    const taint::Ddg& g, const std::map<std::string, ArgRelationSummary>& summaries,
    const ApiDomains& apiDomains) {
  MappingResolver r(g, summaries, apiDomains);
  return r.resolve();
}

void attach_mappings(sysid::ApiSyscallMap& m, const ir::IrProgram& prog,
                     const cg::CallGraph& merged, const ApiDomains& apiDomains,
                     taint::TaintCache& cache, int jobs, Diags* diags) {
  FnDomains domains = propagate_domains(prog, merged, apiDomains);
  auto summaries = compute_summaries(prog, merged, domains);

  std::vector<std::pair<const std::string*, sysid::ApiEntry*>> apis;
  for (auto& [name, entry] : m.entries) apis.push_back({&name, &entry});

  parallel_for(apis.size(), jobs, [&](size_t i) {
    const std::string& api = *apis[i].first;
    sysid::ApiEntry& entry = *apis[i].second;
    entry.mappings.clear();
    for (const auto& site : entry.sites) {
      if (site.dynamic) continue;
      for (int arg = 0; arg < (int)site.args.size(); ++arg) {
        taint::Ddg g;
        try {
          g = taint::backward_taint(prog, merged, api, site, arg, cache);
        } catch (const AnalysisError& e) {
          if (e.code() == ErrorCode::PointerArgument) continue;
          throw;
        }
        auto mapping = resolve_arg_mapping(g, summaries, apiDomains);
        if (!mapping) continue;
        mapping->syscallName = site.syscallName;
        entry.mappings.push_back(std::move(*mapping));
      }
    }
    std::sort(entry.mappings.begin(), entry.mappings.end());
  });

  if (diags) {
    size_t total = 0;
    for (const auto& [name, entry] : m.entries) total += entry.mappings.size();
    diag_note(diags, "mappings-attached", std::to_string(total) + " argument mappings resolved");
  }
}

}  // namespace secforge::symexec
