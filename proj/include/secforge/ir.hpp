#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "secforge/error.hpp"

namespace secforge::ir {

enum class SemKind { Int, Pointer, String, Object, FuncPtr };

struct TypeTag {
  SemKind kind = SemKind::Int;
  std::string objectType;  // set iff kind == Object

  bool operator==(const TypeTag&) const = default;
  bool pointerLike() const {
    return kind == SemKind::Pointer || kind == SemKind::String ||
           kind == SemKind::Object || kind == SemKind::FuncPtr;
  }
};

std::string type_to_string(const TypeTag& t);
TypeTag type_from_string(const std::string& s, int line);

struct Param {
  std::string name;
  TypeTag type;
};

// Atomic operand. Var is an identifier that did not resolve to a parameter
// or a known function; consumers decide how to read it (local variable, or a
// bare syscall name in number/selector positions).
struct Atom {
  enum class Kind { IntConst, StrConst, Var, ParamRef, FuncRef };
  Kind kind = Kind::IntConst;
  long long num = 0;       // IntConst
  std::string text;        // StrConst value, Var/ParamRef/FuncRef name
  int paramIndex = -1;     // ParamRef

  static Atom intConst(long long v) { return {Kind::IntConst, v, "", -1}; }
  static Atom strConst(std::string s) { return {Kind::StrConst, 0, std::move(s), -1}; }
  bool operator==(const Atom&) const = default;
};

// Right-hand side of an assignment. Everything else in the grammar keeps
// operands atomic, mirroring three-address form.
struct Expr {
  enum class Kind { Atom, BinOp, CharAt, FieldLoad };
  Kind kind = Kind::Atom;
  Atom a;               // Atom payload / BinOp lhs / CharAt base / FieldLoad base
  Atom b;               // BinOp rhs
  std::string op;       // BinOp operator
  int charIndex = 0;    // CharAt
  std::string field;    // FieldLoad

  bool operator==(const Expr&) const = default;
};

struct Statement {
  enum class Kind { Assign, Call, IndirectCall, Cond, Switch, Return, AsmSyscall };
  Kind kind = Kind::Assign;
  int id = -1;    // position within the owning function
  int line = 0;

  std::optional<std::string> lhs;
  std::optional<std::string> lhsField;  // set for stores through lhs.field

  Expr rhs;                                   // Assign
  std::string callee;                         // Call (canonical after aliasing)
  Atom icallTarget;                           // IndirectCall
  std::optional<std::string> icallObjectType; // IndirectCall "from T"
  std::vector<Atom> args;                     // Call / IndirectCall / AsmSyscall
  Atom nr;                                    // AsmSyscall number-or-name
  Atom condLhs, condRhs;                      // Cond
  std::string condOp;
  std::string thenLabel, elseLabel;
  Atom scrutinee;                             // Switch
  std::vector<std::pair<long long, std::string>> cases;
  std::string defaultLabel;
  std::optional<Expr> retValue;               // Return
};

struct BasicBlock {
  std::string label;
  int line = 0;
  std::vector<int> stmts;
  std::optional<std::string> gotoTarget;  // explicit jump after the last statement
};

struct IrFunction {
  std::string name;
  int line = 0;
  std::vector<Param> params;
  std::vector<Statement> statements;
  std::vector<BasicBlock> blocks;
  std::set<std::string> locals;
  std::map<std::string, TypeTag> localTypes;

  int paramIndexOf(const std::string& n) const {
    for (size_t i = 0; i < params.size(); i++)
      if (params[i].name == n) return static_cast<int>(i);
    return -1;
  }
  bool isLocal(const std::string& n) const { return locals.count(n) > 0; }
  const BasicBlock* blockByLabel(const std::string& l) const {
    for (const auto& b : blocks)
      if (b.label == l) return &b;
    return nullptr;
  }
  TypeTag typeOfAtom(const Atom& a) const;
  bool hasValueReturn() const;
};

struct IrProgram {
  std::vector<IrFunction> functions;
  std::map<std::string, std::string> aliases;  // alias -> canonical, fully collapsed
  std::vector<std::string> apiList;            // sorted, set by the pipeline
  std::map<std::string, std::string> wrapperList;

  std::string canonical(const std::string& name) const {
    auto it = aliases.find(name);
    return it == aliases.end() ? name : it->second;
  }
  const IrFunction* find(const std::string& name) const {
    std::string c = canonical(name);
    auto it = index_.find(c);
    return it == index_.end() ? nullptr : &functions[it->second];
  }
  void rebuildIndex();

private:
  std::map<std::string, size_t> index_;
};

// Statement-level control flow graph. Node ids are statement ids; the edge
// list is sorted and duplicate-free.
struct StatementCfg {
  int entry = -1;  // -1 when the function has no statements
  int stmtCount = 0;
  std::vector<std::pair<int, int>> edges;
};

IrProgram parse_ir(const std::string& text,
                   const std::map<std::string, std::string>& extraAliases = {});
std::map<std::string, std::string> parse_alias_graph(const std::string& text);
std::string serialize_ir(const IrProgram& prog);
StatementCfg build_function_cfg(const IrFunction& fn);

bool program_equal(const IrProgram& a, const IrProgram& b);

}  // namespace secforge::ir
