#include <algorithm>
#include <optional>

#include "doctest.h"
#include "helpers.hpp"
#include "interp.hpp"
#include "json.hpp"
#include "secforge/taint.hpp"

using namespace secforge;
using namespace secforge::ir;
using namespace secforge::cg;
using namespace secforge::sysid;
using namespace secforge::taint;

namespace {

const std::vector<std::string> kMacros{"INLINE_SYSCALL_CALL", "SYSCALL_CANCEL",
                                       "__syscall_cancel"};

IrProgram load_mini() {
  IrProgram prog = parse_ir(testutil::fixture("mini-libc.gcfg"),
                            parse_alias_graph(testutil::fixture("mini-libc.cgraph")));
  nlohmann::json apis = nlohmann::json::parse(testutil::fixture("mini-libc.apis.json"));
  for (const auto& a : apis) prog.apiList.push_back(a.get<std::string>());
  nlohmann::json wrappers = nlohmann::json::parse(testutil::fixture("mini-libc.wrappers.json"));
  for (const auto& [k, v] : wrappers.items()) prog.wrapperList[k] = v.get<std::string>();
  return prog;
}

IrProgram load_proto() {
  IrProgram prog = parse_ir(testutil::fixture("protolib.gcfg"));
  nlohmann::json apis = nlohmann::json::parse(testutil::fixture("protolib.apis.json"));
  for (const auto& a : apis) prog.apiList.push_back(a.get<std::string>());
  return prog;
}

CallGraph merged_graph(const IrProgram& prog) {
  std::set<std::string> ext(kMacros.begin(), kMacros.end());
  return merge_graphs(build_direct_callgraph(prog, ext),
                      resolve_indirect_calls(prog, collect_address_taken(prog)));
}

const SyscallSite& find_site(const std::vector<SyscallSite>& sites, const std::string& fn,
                             const std::string& name) {
  for (const auto& s : sites)
    if (s.function == fn && s.syscallName == name) return s;
  REQUIRE(false);
  static SyscallSite dummy;
  return dummy;
}

struct Lib {
  IrProgram prog;
  CallGraph graph;
  std::vector<SyscallSite> sites;
};

Lib mini() {
  Lib l{load_mini(), {}, {}};
  l.graph = merged_graph(l.prog);
  l.sites = identify_syscall_functions(l.prog, kMacros, nullptr);
  return l;
}

Lib proto() {
  Lib l{load_proto(), {}, {}};
  l.graph = merged_graph(l.prog);
  l.sites = identify_syscall_functions(l.prog, kMacros, nullptr);
  return l;
}

std::set<std::string> leaf_keys(const Ddg& g, const SourceClassification& c) {
  std::set<std::string> out;
  for (int id : c.leaves) out.insert(g.nodes[id].keyString());
  return out;
}

std::set<std::string> node_functions(const Ddg& g) {
  std::set<std::string> out;
  for (const auto& n : g.nodes)
    if (!n.function.empty()) out.insert(n.function);
  return out;
}

const DdgNode* find_calc(const Ddg& g, const std::string& op) {
  for (const auto& n : g.nodes)
    if (n.kind == DdgNode::Kind::Calc && n.op == op) return &n;
  return nullptr;
}

// Bottom-up value derivation over the graph, independent of how it was
// built. Merge nodes take the union of their incoming edges, calc nodes
// apply their operator, call nodes take the union of spliced return sources.
// Values are encoded as tokens so integers and strings can share a set.
using TokenSet = std::set<std::string>;

std::string tok(long long v) { return "i:" + std::to_string(v); }
std::string tok(const std::string& s) { return "s:" + s; }

struct Deriver {
  const Ddg& g;
  std::vector<std::string> apiArgs;  // token per api argument
  std::map<int, std::vector<int>> in, internalIn;
  std::map<int, std::optional<TokenSet>> memo;
  std::set<int> visiting;

  Deriver(const Ddg& gg, std::vector<std::string> args) : g(gg), apiArgs(std::move(args)) {
    for (const auto& [a, b] : g.edges) in[b].push_back(a);
    for (const auto& [a, b] : g.internalEdges) internalIn[b].push_back(a);
  }

  std::optional<TokenSet> unionOf(const std::vector<int>& srcs) {
    TokenSet out;
    if (srcs.empty()) return std::nullopt;
    for (int s : srcs) {
      auto sub = eval(s);
      if (!sub) return std::nullopt;
      out.insert(sub->begin(), sub->end());
    }
    return out;
  }

  std::optional<TokenSet> eval(int id) {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    if (!visiting.insert(id).second) return std::nullopt;
    auto r = evalInner(id);
    visiting.erase(id);
    memo[id] = r;
    return r;
  }

  std::optional<TokenSet> evalInner(int id) {
    const DdgNode& n = g.nodes[id];
    switch (n.kind) {
      case DdgNode::Kind::Constant:
        return TokenSet{n.value.isStr ? tok(n.value.s) : tok(n.value.i)};
      case DdgNode::Kind::ApiArg:
        if (n.index < 0 || n.index >= (int)apiArgs.size()) return std::nullopt;
        return TokenSet{apiArgs[n.index]};
      case DdgNode::Kind::FnArg:
      case DdgNode::Kind::LocalVar:
        return unionOf(in[id]);
      case DdgNode::Kind::ObjectField:
        return std::nullopt;
      case DdgNode::Kind::Calc:
        break;
    }
    if (n.op.rfind("call", 0) == 0 || n.op == "icall") return unionOf(internalIn[id]);
    if (n.op.rfind("charAt:", 0) == 0) {
      size_t idx = std::stoul(n.op.substr(7));
      REQUIRE(n.operands.size() == 1);
      auto base = eval(n.operands[0]);
      if (!base) return std::nullopt;
      TokenSet out;
      for (const auto& t : *base) {
        if (t.rfind("s:", 0) != 0 || t.size() <= 2 + idx) return std::nullopt;
        out.insert(tok((long long)(unsigned char)t[2 + idx]));
      }
      return out;
    }
    REQUIRE(n.operands.size() == 2);
    auto a = eval(n.operands[0]);
    auto b = eval(n.operands[1]);
    if (!a || !b) return std::nullopt;
    TokenSet out;
    for (const auto& ta : *a)
      for (const auto& tb : *b) {
        if (ta.rfind("i:", 0) != 0 || tb.rfind("i:", 0) != 0) return std::nullopt;
        long long x = std::stoll(ta.substr(2)), y = std::stoll(tb.substr(2));
        long long r;
        if (n.op == "+") r = x + y;
        else if (n.op == "-") r = x - y;
        else if (n.op == "*") r = x * y;
        else if (n.op == "&") r = x & y;
        else if (n.op == "|") r = x | y;
        else return std::nullopt;
        out.insert(tok(r));
        if (out.size() > 64) return std::nullopt;
      }
    return out;
  }
};

}  // namespace

TEST_CASE("identity chain resolves a syscall argument to an api argument") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_openat", "openat");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "open", site, 2, cache);

  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) == std::set<std::string>{"apiarg:open:1"});
  CHECK(find_calc(g, "call:__open_flags_of_mode") == nullptr);
  // Only the call chain below the api is expanded; sibling entry points that
  // also reach this kernel entry stay out of the graph.
  auto fns = node_functions(g);
  CHECK(fns.count("open") == 0);  // api params become api-arg nodes
  CHECK(fns.count("fopen") == 0);
  CHECK(fns.count("creat") == 0);
}

TEST_CASE("constant flows from the single in-scope caller") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_openat", "openat");
  TaintCache cache;

  Ddg dirfd = backward_taint(l.prog, l.graph, "fopen", site, 0, cache);
  auto cls = classify_sources(dirfd);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(dirfd, cls) == std::set<std::string>{"const:i:-100"});
  CHECK(node_functions(dirfd).count("__libc_open") == 0);
  CHECK_FALSE(dirfd.unknownSource);

  Ddg mode = backward_taint(l.prog, l.graph, "fopen", site, 3, cache);
  auto cls2 = classify_sources(mode);
  CHECK(cls2.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(mode, cls2) == std::set<std::string>{"const:i:438"});
}

TEST_CASE("helper return values splice in as calc nodes with constant leaves") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_openat", "openat");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "fopen", site, 2, cache);

  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) ==
        std::set<std::string>{"apiarg:fopen:1", "const:i:-1", "const:i:0", "const:i:577",
                              "const:i:1089"});
  const DdgNode* helperCall = find_calc(g, "call:__open_flags_of_mode");
  REQUIRE(helperCall);
  REQUIRE(helperCall->operands.size() == 1);
  CHECK(g.nodes[helperCall->operands[0]].keyString() == "apiarg:fopen:1");
  CHECK_FALSE(g.internalEdges.empty());

  const IrFunction* helper = l.prog.find("__open_flags_of_mode");
  REQUIRE(helper);
  int switchId = -1;
  for (const auto& st : helper->statements)
    if (st.kind == Statement::Kind::Switch) switchId = st.id;
  REQUIRE(switchId >= 0);
  CHECK(std::count(g.conds.begin(), g.conds.end(),
                   std::make_pair(std::string("__open_flags_of_mode"), switchId)) == 1);
}

TEST_CASE("character extraction appears as a calc when the value flows onward") {
  IrProgram prog = parse_ir(
      "func pick(tag:string)\n"
      "bb entry:\n"
      "  c = tag[0]\n"
      "  r = syscall(ioctl, 3, c)\n"
      "  return r\n"
      "endfunc\n");
  prog.apiList.push_back("pick");
  CallGraph graph = build_direct_callgraph(prog, {});
  auto sites = identify_syscall_functions(prog, kMacros, nullptr);
  const auto& site = find_site(sites, "pick", "ioctl");

  TaintCache cache;
  Ddg g = backward_taint(prog, graph, "pick", site, 1, cache);
  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) == std::set<std::string>{"apiarg:pick:0"});
  const DdgNode* at = find_calc(g, "charAt:0");
  REQUIRE(at);
  REQUIRE(at->operands.size() == 1);
  CHECK(g.nodes[at->operands[0]].keyString() == "apiarg:pick:0");

  Deriver d(g, {tok("Q")});
  auto set = d.eval(g.root);
  REQUIRE(set.has_value());
  CHECK(*set == TokenSet{tok((long long)'Q')});
}

TEST_CASE("alias edges participate in caller expansion") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_openat", "openat");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "creat", site, 2, cache);
  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) == std::set<std::string>{"const:i:577"});
}

TEST_CASE("arithmetic over two api arguments stays fully determined") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "read", "read");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "fread", site, 2, cache);

  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) ==
        std::set<std::string>{"apiarg:fread:1", "apiarg:fread:2"});
  const DdgNode* mul = find_calc(g, "*");
  REQUIRE(mul);
  REQUIRE(mul->operands.size() == 2);
  CHECK(g.nodes[mul->operands[0]].kind == DdgNode::Kind::ApiArg);
  CHECK(g.nodes[mul->operands[1]].kind == DdgNode::Kind::ApiArg);
}

TEST_CASE("indirect callsites expand into indirect callers") {
  Lib l = proto();
  const auto& site = find_site(l.sites, "tcp_send", "sendto");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "proto_send", site, 3, cache);
  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(g, cls) == std::set<std::string>{"apiarg:proto_send:2"});
}

TEST_CASE("object field reads classify as field-dependent") {
  Lib l = proto();
  const auto& site = find_site(l.sites, "set_config", "setsockopt");
  TaintCache cache;
  Ddg g = backward_taint(l.prog, l.graph, "set_config", site, 2, cache);
  auto cls = classify_sources(g);
  CHECK(cls.kind == SourceKind::HasObjectField);
  CHECK(leaf_keys(g, cls) == std::set<std::string>{"field:config_t:flags"});
  CHECK_FALSE(g.unknownSource);
}

TEST_CASE("kernel return values are opaque sources") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_close", "close");
  TaintCache cache;
  Diags diags;
  Ddg g = backward_taint(l.prog, l.graph, "fopen", site, 0, cache, {}, &diags);
  CHECK(g.unknownSource);
  CHECK(classify_sources(g).kind == SourceKind::Unknown);
  bool noted = false;
  for (const auto& d : diags)
    if (d.code == "taint-unknown-source") noted = true;
  CHECK(noted);
}

TEST_CASE("pointer-typed arguments are rejected up front") {
  Lib l = mini();
  TaintCache cache;
  const auto& openat = find_site(l.sites, "__libc_openat", "openat");
  CHECK_THROWS_AS(backward_taint(l.prog, l.graph, "fopen", openat, 1, cache), AnalysisError);
  try {
    backward_taint(l.prog, l.graph, "fopen", openat, 1, cache);
  } catch (const AnalysisError& e) {
    CHECK(e.code() == ErrorCode::PointerArgument);
  }
  const auto& readSite = find_site(l.sites, "read", "read");
  CHECK_THROWS_AS(backward_taint(l.prog, l.graph, "read", readSite, 1, cache), AnalysisError);
}

TEST_CASE("caller expansion stops at the depth bound") {
  std::string text;
  text += "func a0(x:int)\nbb entry:\n  r = syscall(close, x)\n  return r\nendfunc\n";
  for (int i = 1; i <= 40; ++i) {
    text += "func a" + std::to_string(i) + "(x:int)\nbb entry:\n  r = call a" +
            std::to_string(i - 1) + "(x)\n  return r\nendfunc\n";
  }
  IrProgram prog = parse_ir(text);
  prog.apiList.push_back("a40");
  CallGraph graph = build_direct_callgraph(prog, {});
  auto sites = identify_syscall_functions(prog, kMacros, nullptr);
  const auto& site = find_site(sites, "a0", "close");

  TaintCache cache;
  Diags diags;
  Ddg g = backward_taint(prog, graph, "a40", site, 0, cache, {}, &diags);
  CHECK(g.unknownSource);
  CHECK(classify_sources(g).kind == SourceKind::Unknown);

  // A shallower chain with the same shape resolves fully.
  TaintCache cache2;
  Ddg ok = backward_taint(prog, graph, "a10", site, 0, cache2);
  CHECK(classify_sources(ok).kind == SourceKind::AllDetermined);
  CHECK(leaf_keys(ok, classify_sources(ok)) == std::set<std::string>{"apiarg:a10:0"});
}

TEST_CASE("memo cache is transparent and reusable across queries") {
  Lib l = mini();
  const auto& site = find_site(l.sites, "__libc_openat", "openat");

  TaintCache cold;
  Ddg first = backward_taint(l.prog, l.graph, "fopen", site, 2, cold);
  size_t grown = cold.size();
  CHECK(grown > 0);
  Ddg second = backward_taint(l.prog, l.graph, "fopen", site, 2, cold);
  CHECK(cold.size() == grown);
  CHECK(ddg_to_json(first) == ddg_to_json(second));

  // Summaries are api-neutral: a cache warmed by one api serves another.
  Ddg viaWarm = backward_taint(l.prog, l.graph, "open", site, 2, cold);
  TaintCache fresh;
  Ddg viaFresh = backward_taint(l.prog, l.graph, "open", site, 2, fresh);
  CHECK(ddg_to_json(viaWarm) == ddg_to_json(viaFresh));
}

TEST_CASE("interpreter deliveries are derivable from the graph") {
  Lib l = mini();
  const auto& openat = find_site(l.sites, "__libc_openat", "openat");
  std::set<std::string> macroSet(kMacros.begin(), kMacros.end());

  for (const std::string mode : {"r", "w", "a"}) {
    testoracle::Interp in(l.prog, macroSet);
    in.call("fopen", {testoracle::Value::ofStr("x"), testoracle::Value::ofStr(mode)});
    REQUIRE(!in.events.empty());
    const auto& ev = in.events.front();
    REQUIRE(ev.name == "openat");

    std::vector<std::string> apiArgs{tok("x"), tok(mode)};
    for (int argIdx : {0, 2, 3}) {
      TaintCache cache;
      Ddg g = backward_taint(l.prog, l.graph, "fopen", openat, argIdx, cache);
      REQUIRE(classify_sources(g).kind == SourceKind::AllDetermined);
      Deriver d(g, apiArgs);
      auto set = d.eval(g.root);
      REQUIRE(set.has_value());
      REQUIRE(ev.args[argIdx].has_value());
      CHECK(set->count(tok(*ev.args[argIdx])) == 1);
    }
  }

  // Wrapper path with arithmetic: delivered count equals size * n.
  testoracle::Interp in(l.prog, macroSet, l.prog.wrapperList);
  in.call("fread", {testoracle::Value::ofStr("buf"), testoracle::Value::ofInt(2),
                    testoracle::Value::ofInt(3), testoracle::Value::ofInt(5)});
  REQUIRE(!in.events.empty());
  const auto& rd = in.events.front();
  REQUIRE(rd.name == "read");
  const auto& readSite = find_site(l.sites, "read", "read");
  std::vector<std::string> apiArgs{tok("buf"), tok(2), tok(3), tok(5)};
  for (int argIdx : {0, 2}) {
    TaintCache cache;
    Ddg g = backward_taint(l.prog, l.graph, "fread", readSite, argIdx, cache);
    Deriver d(g, apiArgs);
    auto set = d.eval(g.root);
    REQUIRE(set.has_value());
    REQUIRE(rd.args[argIdx].has_value());
    CHECK(set->count(tok(*rd.args[argIdx])) == 1);
  }

  // Direct wrapper: each socket argument is the identity of an api argument.
  const auto& sock = find_site(l.sites, "socket", "socket");
  testoracle::Interp in2(l.prog, macroSet);
  in2.call("socket", {testoracle::Value::ofInt(2), testoracle::Value::ofInt(1),
                      testoracle::Value::ofInt(6)});
  const auto& sv = in2.events.front();
  std::vector<std::string> sockArgs{tok(2), tok(1), tok(6)};
  for (int argIdx : {0, 1, 2}) {
    TaintCache cache;
    Ddg g = backward_taint(l.prog, l.graph, "socket", sock, argIdx, cache);
    Deriver d(g, sockArgs);
    auto set = d.eval(g.root);
    REQUIRE(set.has_value());
    CHECK(set->count(tok(*sv.args[argIdx])) == 1);
  }
}
