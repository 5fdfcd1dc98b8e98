#include <algorithm>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "interp.hpp"
#include "secforge/ir.hpp"

using namespace secforge;
using namespace secforge::ir;

namespace {

// Independent of the parser: counts structural markers by raw line scan.
struct LineScan {
  int funcs = 0;
  int aliases = 0;
  int blocks = 0;
};

LineScan scan_lines(const std::string& text) {
  LineScan r;
  for (const auto& raw : split_lines(text)) {
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (starts_with(s, "func ")) r.funcs++;
    if (starts_with(s, "alias:")) r.aliases++;
    if (starts_with(s, "bb ")) r.blocks++;
  }
  return r;
}

// Recounts CFG edges straight off the statement list: cond has two distinct
// successors, switch one per distinct target label (cases plus default),
// return none, everything else at most one.
int expected_edge_count(const IrFunction& fn, const StatementCfg& cfg) {
  std::map<int, std::set<int>> succ;
  for (const auto& [a, b] : cfg.edges) succ[a].insert(b);
  int total = 0;
  for (const auto& st : fn.statements) {
    switch (st.kind) {
      case Statement::Kind::Return:
        CHECK(succ[st.id].empty());
        break;
      case Statement::Kind::Cond: {
        std::set<std::string> labels{st.thenLabel, st.elseLabel};
        total += static_cast<int>(labels.size());
        break;
      }
      case Statement::Kind::Switch: {
        std::set<std::string> labels{st.defaultLabel};
        for (const auto& [v, l] : st.cases) labels.insert(l);
        total += static_cast<int>(labels.size());
        break;
      }
      default:
        total += static_cast<int>(succ[st.id].size());
        CHECK(succ[st.id].size() <= 1);
        break;
    }
  }
  return total;
}

}  // namespace

TEST_CASE("parse_ir reads the mini library and matches raw line counts") {
  std::string text = testutil::fixture("mini-libc.gcfg");
  LineScan scan = scan_lines(text);
  CHECK(scan.funcs == 15);
  CHECK(scan.aliases == 2);

  IrProgram prog = parse_ir(text);
  CHECK(prog.functions.size() == static_cast<size_t>(scan.funcs));
  CHECK(prog.aliases.size() == static_cast<size_t>(scan.aliases));

  int blocks = 0;
  for (const auto& f : prog.functions) blocks += static_cast<int>(f.blocks.size());
  CHECK(blocks == scan.blocks);

  const IrFunction* fopen = prog.find("fopen");
  REQUIRE(fopen != nullptr);
  CHECK(fopen->params.size() == 2);
  CHECK(fopen->params[1].type.kind == SemKind::String);
  CHECK(fopen->statements.size() == 5);
  CHECK(fopen->blocks.size() == 3);
}

TEST_CASE("alias records collapse to canonical targets") {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"));
  CHECK(prog.canonical("open64") == "__libc_open");
  CHECK(prog.canonical("fopen64") == "fopen");
  CHECK(prog.find("open64") == prog.find("__libc_open"));

  const IrFunction* creat = prog.find("creat");
  REQUIRE(creat != nullptr);
  bool sawCanonicalCall = false;
  for (const auto& st : creat->statements)
    if (st.kind == Statement::Kind::Call && st.callee == "__libc_open") sawCanonicalCall = true;
  CHECK(sawCanonicalCall);
}

TEST_CASE("alias chains collapse and chains with holes are rejected") {
  std::string chain =
      "alias: a -> b\n"
      "alias: b -> c\n"
      "func c()\n"
      "bb entry:\n"
      "  return\n"
      "endfunc\n";
  IrProgram prog = parse_ir(chain);
  CHECK(prog.canonical("a") == "c");
  CHECK(prog.canonical("b") == "c");

  CHECK_THROWS_WITH_AS(parse_ir("alias: a -> missing\nfunc f()\nbb e:\n  return\nendfunc\n"),
                       doctest::Contains("resolves to undefined"), AnalysisError);
  try {
    parse_ir("alias: a -> b\nalias: b -> a\nfunc f()\nbb e:\n  return\nendfunc\n");
    FAIL("cycle not detected");
  } catch (const AnalysisError& e) {
    CHECK(e.code() == ErrorCode::CyclicAlias);
  }
}

TEST_CASE("parse_alias_graph reads standalone alias documents") {
  auto aliases = parse_alias_graph(testutil::fixture("mini-libc.cgraph"));
  CHECK(aliases.size() == 3);
  CHECK(aliases.at("__open") == "__libc_open");

  CHECK_THROWS_AS(parse_alias_graph("alias: broken"), AnalysisError);
  CHECK_THROWS_AS(parse_alias_graph("func f()\n"), AnalysisError);
}

TEST_CASE("extra aliases merge before name resolution") {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"),
                            parse_alias_graph(testutil::fixture("mini-libc.cgraph")));
  CHECK(prog.canonical("__open") == "__libc_open");
  CHECK(prog.aliases.size() == 3);
}

TEST_CASE("duplicate and malformed inputs raise typed errors") {
  try {
    parse_ir("func f()\nbb e:\n  return\nendfunc\nfunc f()\nbb e:\n  return\nendfunc\n");
    FAIL("duplicate not detected");
  } catch (const AnalysisError& e) {
    CHECK(e.code() == ErrorCode::DuplicateFunction);
  }

  try {
    parse_ir("func f()\nbb e:\n  if (1 < 2) goto nowhere else e2\nbb e2:\n  return\nendfunc\n");
    FAIL("dangling label not detected");
  } catch (const AnalysisError& e) {
    CHECK(e.code() == ErrorCode::DanglingLabel);
    CHECK(e.line() == 3);
  }

  CHECK_THROWS_AS(parse_ir("func f()\nbb e:\n  return\n"), AnalysisError);
  CHECK_THROWS_AS(parse_ir("func f(x:weird)\nbb e:\n  return\nendfunc\n"), AnalysisError);
  CHECK_THROWS_AS(parse_ir("x = 1\n"), AnalysisError);
  CHECK_THROWS_AS(
      parse_ir("func f()\nbb e:\n  goto e\n  x = 1\nendfunc\n"), AnalysisError);
  CHECK_THROWS_AS(
      parse_ir("func f(a:int)\nbb e:\n  r = syscall(1, a, a, a, a, a, a, a)\n  return\nendfunc\n"),
      AnalysisError);
}

TEST_CASE("literals, comments and identifier resolution") {
  std::string text =
      "func g(p:pointer, m:string)\n"
      "bb entry:\n"
      "  a = 0x2A\n"
      "  b = -7\n"
      "  c = 'r'\n"
      "  d = \"a#b\"  # trailing comment\n"
      "  e = m[0]\n"
      "  f2 = a + b\n"
      "  h = call helper(p, 'x')\n"
      "  return h\n"
      "endfunc\n"
      "\n"
      "func helper(p:pointer, k:int)\n"
      "bb entry:\n"
      "  return k\n"
      "endfunc\n";
  IrProgram prog = parse_ir(text);
  const IrFunction* g = prog.find("g");
  REQUIRE(g != nullptr);
  CHECK(g->statements[0].rhs.a.num == 42);
  CHECK(g->statements[1].rhs.a.num == -7);
  CHECK(g->statements[2].rhs.a.num == 'r');
  CHECK(g->statements[3].rhs.a.text == "a#b");
  CHECK(g->statements[4].rhs.kind == Expr::Kind::CharAt);
  CHECK(g->statements[4].rhs.a.kind == Atom::Kind::ParamRef);
  CHECK(g->statements[5].rhs.kind == Expr::Kind::BinOp);
  CHECK(g->statements[6].kind == Statement::Kind::Call);
  CHECK(g->statements[6].args[0].kind == Atom::Kind::ParamRef);
  CHECK(g->statements[6].args[1].num == 'x');
  CHECK(g->localTypes.at("d").kind == SemKind::String);
}

TEST_CASE("function references resolve through aliases, bare names stay symbolic") {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"));

  const IrFunction* sock = prog.find("socket");
  REQUIRE(sock != nullptr);
  const Statement& sysStmt = sock->statements[0];
  REQUIRE(sysStmt.kind == Statement::Kind::AsmSyscall);
  CHECK(sysStmt.nr.kind == Atom::Kind::FuncRef);
  CHECK(sysStmt.nr.text == "socket");

  const IrFunction* openat = prog.find("__libc_openat");
  REQUIRE(openat != nullptr);
  const Statement& macroCall = openat->statements[0];
  REQUIRE(macroCall.kind == Statement::Kind::Call);
  CHECK(macroCall.args[0].kind == Atom::Kind::Var);  // "openat" names no function
  CHECK(macroCall.args[0].text == "openat");

  const IrFunction* sc = prog.find("syscall");
  REQUIRE(sc != nullptr);
  CHECK(sc->statements[0].nr.kind == Atom::Kind::ParamRef);
}

TEST_CASE("serialization round-trips every fixture") {
  for (const char* name : {"mini-libc.gcfg", "protolib.gcfg", "rawlib.gcfg"}) {
    IrProgram a = parse_ir(testutil::fixture(name));
    std::string text = serialize_ir(a);
    IrProgram b = parse_ir(text);
    CHECK(program_equal(a, b));
    CHECK(serialize_ir(b) == text);
  }
}

TEST_CASE("parsing is deterministic") {
  std::string text = testutil::fixture("protolib.gcfg");
  CHECK(serialize_ir(parse_ir(text)) == serialize_ir(parse_ir(text)));
}

TEST_CASE("statement CFG edges match the per-statement recount") {
  for (const char* name : {"mini-libc.gcfg", "protolib.gcfg", "rawlib.gcfg"}) {
    IrProgram prog = parse_ir(testutil::fixture(name));
    for (const auto& fn : prog.functions) {
      StatementCfg cfg = build_function_cfg(fn);
      CHECK(cfg.stmtCount == static_cast<int>(fn.statements.size()));
      CHECK(static_cast<int>(cfg.edges.size()) == expected_edge_count(fn, cfg));
      if (!fn.statements.empty()) CHECK(cfg.entry == fn.blocks[0].stmts.front());
    }
  }
}

TEST_CASE("switch fan-out and conditional edges in the mode helper") {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"));
  const IrFunction* fn = prog.find("__open_flags_of_mode");
  REQUIRE(fn != nullptr);
  StatementCfg cfg = build_function_cfg(*fn);
  // charAt assign -> switch, then one edge per case plus default.
  CHECK(cfg.entry == 0);
  CHECK(cfg.edges.size() == 5);
  int fromSwitch = 0;
  for (const auto& [a, b] : cfg.edges)
    if (fn->statements[a].kind == Statement::Kind::Switch) fromSwitch++;
  CHECK(fromSwitch == 4);
}

TEST_CASE("empty blocks forward control and goto chains terminate") {
  std::string text =
      "func f(x:int)\n"
      "bb entry:\n"
      "  if (x == 0) goto a else b\n"
      "bb a:\n"
      "bb b:\n"
      "  goto c\n"
      "bb c:\n"
      "  return x\n"
      "endfunc\n";
  IrProgram prog = parse_ir(text);
  StatementCfg cfg = build_function_cfg(prog.functions[0]);
  // Both arms land on the single return through forwarding.
  REQUIRE(cfg.edges.size() == 1);
  CHECK(cfg.edges[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("interpreter oracle executes the mode helper faithfully") {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"));
  testoracle::Interp interp(prog, {"__syscall_cancel"});

  auto r = interp.call("__open_flags_of_mode", {testoracle::Value::ofStr("w")});
  CHECK(r.i == 577);
  r = interp.call("__open_flags_of_mode", {testoracle::Value::ofStr("zz")});
  CHECK(r.i == -1);

  interp.call("fopen", {testoracle::Value::ofStr("x"), testoracle::Value::ofStr("r")});
  REQUIRE(interp.events.size() == 1);
  CHECK(interp.events[0].name == "openat");
  REQUIRE(interp.events[0].args.size() == 4);
  CHECK(interp.events[0].args[0] == -100);
  CHECK(interp.events[0].args[2] == 0);
  CHECK(interp.events[0].args[3] == 438);
  CHECK(!interp.events[0].args[1].has_value());
  CHECK(interp.callPairs.count({"fopen", "__open_flags_of_mode"}) == 1);
  CHECK(interp.callPairs.count({"fopen", "__libc_openat"}) == 1);
}
