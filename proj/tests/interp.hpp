#pragma once

// Concrete interpreter for the library IR, used only by tests. It executes
// functions directly off the parsed statement list, recording every call
// edge and every kernel entry it performs. Analysis results are checked
// against these observations, never the other way around.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "secforge/ir.hpp"

namespace testoracle {

struct Object;

struct Value {
  enum class Kind { Int, Str, Obj, Fn, Undef };
  Kind kind = Kind::Undef;
  long long i = 0;
  std::string s;
  std::shared_ptr<Object> obj;
  std::string fn;

  static Value ofInt(long long v) { Value x; x.kind = Kind::Int; x.i = v; return x; }
  static Value ofStr(std::string v) { Value x; x.kind = Kind::Str; x.s = std::move(v); return x; }
  static Value ofFn(std::string name) { Value x; x.kind = Kind::Fn; x.fn = std::move(name); return x; }
  static Value ofObj(std::shared_ptr<Object> o) { Value x; x.kind = Kind::Obj; x.obj = std::move(o); return x; }
};

struct Object {
  std::string type;
  std::map<std::string, Value> fields;
};

struct SysEvent {
  std::string name;                    // empty when only a number is known
  std::optional<long long> number;
  std::vector<std::optional<long long>> args;  // nullopt = non-integer register
};

class Interp {
 public:
  // wrappers: functions that enter the kernel by convention rather than via
  // a syscall statement; calling one records the named syscall with the
  // function's own arguments.
  Interp(const secforge::ir::IrProgram& prog, std::set<std::string> macros,
         std::map<std::string, std::string> wrappers = {})
      : prog_(prog), macros_(std::move(macros)), wrappers_(std::move(wrappers)) {}

  Value call(const std::string& name, std::vector<Value> args);

  std::vector<SysEvent> events;
  std::set<std::pair<std::string, std::string>> callPairs;
  std::set<std::tuple<std::string, int, std::string>> icallTargets;
  long long syscallReturn = 3;

 private:
  Value eval(const secforge::ir::IrFunction& fn, const secforge::ir::Expr& e,
             std::map<std::string, Value>& env, const std::vector<Value>& args);
  Value evalAtom(const secforge::ir::IrFunction& fn, const secforge::ir::Atom& a,
                 std::map<std::string, Value>& env, const std::vector<Value>& args);
  void recordSyscall(const secforge::ir::Atom& nrAtom, const std::vector<Value>& argVals,
                     const secforge::ir::IrFunction& fn, std::map<std::string, Value>& env,
                     const std::vector<Value>& args);

  const secforge::ir::IrProgram& prog_;
  std::set<std::string> macros_;
  std::map<std::string, std::string> wrappers_;
  int steps_ = 0;
};

}  // namespace testoracle
