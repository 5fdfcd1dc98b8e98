#include <algorithm>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "secforge/policysim.hpp"
#include "worldbuild.hpp"

using namespace secforge;
using namespace secforge::policysim;
using profile::ArgFilter;
using profile::Rule;
using profile::SeccompProfile;
using profile::SyscallTable;

namespace {

SyscallTable table(const std::string& arch) {
  return profile::load_syscall_table(testutil::data_path("syscalls/" + arch + ".json"));
}

SeccompProfile profile_for(const testutil::World& w, const std::string& disName,
                           binscan::Arch arch, const SyscallTable& t) {
  binscan::BinaryImage img = binscan::parse_disassembly(testutil::fixture(disName), arch);
  binscan::ScanResult scan = binscan::scan_binary(img, w.prog.apiList, w.apiArity);
  return profile::generate_profile(w.map, scan, t);
}

std::vector<SyscallEvent> trace(const std::string& name) {
  return parse_trace(testutil::fixture("traces/" + name));
}

SyscallEvent ev(const std::string& name, std::vector<std::optional<long long>> args) {
  return {name, std::nullopt, std::move(args)};
}

}  // namespace

TEST_CASE("traces parse names numbers nulls and gaps") {
  std::vector<SyscallEvent> t = trace("netprog.trace.jsonl");
  REQUIRE(t.size() == 5);
  for (const auto& e : t) {
    CHECK(e.name == "socket");
    REQUIRE(e.args.size() == 3);
    CHECK(e.args[0] == 2);
  }

  std::vector<SyscallEvent> mixed =
      parse_trace("{\"name\":\"openat\",\"args\":[-100,null,0]}\n"
                  "{\"number\":63,\"args\":[]}\n");
  REQUIRE(mixed.size() == 2);
  CHECK_FALSE(mixed[0].args[1].has_value());
  CHECK(mixed[1].number == 63);

  CHECK_THROWS_AS(parse_trace("{\"name\":\"x\"}\nnot json\n"), AnalysisError);
  try {
    parse_trace("{\"name\":\"x\"}\nnot json\n");
  } catch (const AnalysisError& e) {
    CHECK(e.code() == ErrorCode::TraceParse);
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_trace("{\"args\":[1]}\n"), AnalysisError);
  CHECK_THROWS_AS(parse_trace("{\"name\":\"x\",\"args\":[1,2,3,4,5,6,7]}\n"), AnalysisError);
}

TEST_CASE("evaluation honors filters defaults and opacity") {
  SyscallTable t = table("a64");
  SeccompProfile p;
  p.arch = "a64";
  p.defaultAction = "errno";
  p.rules.push_back({198, "socket", "allow",
                     {{0, "eq", {2}, std::nullopt},
                      {1, "inSet", {1, 2}, std::nullopt},
                      {2, "inRange", {0, 6}, std::nullopt}}});
  p.rules.push_back({56, "openat", "allow", {{2, "maskedEq", {0}, 2051}}});

  CHECK(evaluate(p, t, ev("socket", {2, 1, 6})).allow);
  CHECK(evaluate(p, t, ev("socket", {2, 2, 0})).allow);
  CHECK_FALSE(evaluate(p, t, ev("socket", {17, 3, 0})).allow);  // arg0 mismatch
  CHECK_FALSE(evaluate(p, t, ev("socket", {2, 3, 0})).allow);   // not in set
  CHECK_FALSE(evaluate(p, t, ev("socket", {2, 1, 7})).allow);   // out of range
  CHECK_FALSE(evaluate(p, t, ev("read", {0})).allow);           // no rule
  CHECK_FALSE(evaluate(p, t, ev("frobnicate", {})).allow);      // unknown name

  // flag residue check: 2|2048 passes, a bit outside the mask does not
  CHECK(evaluate(p, t, ev("openat", {-100, 0, 2050})).allow);
  CHECK_FALSE(evaluate(p, t, ev("openat", {-100, 0, 4})).allow);

  // opaque argument meets a filter: deny; unfiltered opaque: fine
  CHECK_FALSE(evaluate(p, t, ev("socket", {std::nullopt, 1, 6})).allow);
  CHECK(evaluate(p, t, ev("openat", {std::nullopt, std::nullopt, 0})).allow);

  // unrecorded trailing registers are not judged
  CHECK(evaluate(p, t, ev("openat", {})).allow);
}

TEST_CASE("filters on one index are alternatives but indices conjoin") {
  SyscallTable t = table("a64");
  SeccompProfile p;
  p.defaultAction = "errno";
  p.rules.push_back({57, "close", "allow",
                     {{0, "eq", {1}, std::nullopt},
                      {0, "eq", {5}, std::nullopt},
                      {1, "eq", {9}, std::nullopt}}});

  CHECK(evaluate(p, t, ev("close", {1, 9})).allow);
  CHECK(evaluate(p, t, ev("close", {5, 9})).allow);
  CHECK_FALSE(evaluate(p, t, ev("close", {3, 9})).allow);
  CHECK_FALSE(evaluate(p, t, ev("close", {1, 8})).allow);
}

TEST_CASE("trace simulation counts and locates denials") {
  testutil::World w = testutil::analyzed_world("mini-libc");
  SyscallTable t = table("a64");
  SeccompProfile p = profile_for(w, "netprog.dis", binscan::Arch::A64, t);

  TraceReport clean = simulate_trace(p, t, trace("netprog.trace.jsonl"));
  CHECK(clean.allowed == 5);
  CHECK(clean.denied == 0);
  CHECK_FALSE(clean.firstDenied.has_value());

  TraceReport rep = simulate_trace(p, t, trace("denytest.trace.jsonl"));
  CHECK(rep.allowed == 1);
  CHECK(rep.denied == 2);
  REQUIRE(rep.firstDenied.has_value());
  CHECK(*rep.firstDenied == 1);

  TraceReport empty = simulate_trace(p, t, {});
  CHECK(empty == TraceReport{0, 0, std::nullopt});

  CHECK(simulate_trace(p, t, trace("denytest.trace.jsonl"), 4) == rep);
}

TEST_CASE("every fixture trace passes its own profile") {
  struct Row {
    std::string lib, dis, trace, arch;
  };
  const std::vector<Row> rows{
      {"mini-libc", "netprog.dis", "netprog.trace.jsonl", "a64"},
      {"mini-libc", "fileprog.dis", "fileprog.trace.jsonl", "a64"},
      {"mini-libc", "dynprog.dis", "dynprog.trace.jsonl", "a64"},
      {"mini-libc", "asmprog.dis", "asmprog.trace.jsonl", "a64"},
      {"mini-libc", "loprog.a32.dis", "loprog.trace.jsonl", "a32"},
      {"rawlib", "rawsock.dis", "rawsock.trace.jsonl", "a64"},
      {"rawlib", "sockoptprog.dis", "sockoptprog.trace.jsonl", "a64"},
      {"protolib", "protoprog.dis", "protoprog.trace.jsonl", "a64"},
  };
  for (const auto& row : rows) {
    CAPTURE(row.dis);
    testutil::World w = testutil::analyzed_world(row.lib, row.arch);
    SyscallTable t = table(row.arch);
    binscan::Arch arch = binscan::arch_from_string(row.arch);
    SeccompProfile p = profile_for(w, row.dis, arch, t);
    TraceReport rep = simulate_trace(p, t, trace(row.trace));
    CHECK(rep.denied == 0);
    CHECK(rep.allowed == trace(row.trace).size());
  }
}

TEST_CASE("cve scoring separates syscall blocks from argument blocks") {
  SyscallTable t = table("a64");
  FlagTable flags = load_flag_table(testutil::data_path("flags/a64.json"));
  std::vector<CveEntry> cves = load_cve_map(testutil::data_path("cve/cve_map.json"), flags);
  REQUIRE(cves.size() == 26);
  CHECK(cves[0].id == "CVE-2017-7308");
  REQUIRE(cves[0].syscalls[0].arg.has_value());
  CHECK(cves[0].syscalls[0].arg->value == 17);  // AF_PACKET

  auto contains = [](const std::vector<std::string>& xs, const std::string& x) {
    return std::find(xs.begin(), xs.end(), x) != xs.end();
  };

  testutil::World mini = testutil::analyzed_world("mini-libc");
  SeccompProfile netprog = profile_for(mini, "netprog.dis", binscan::Arch::A64, t);
  CveScore net = score_cve(netprog, t, cves);
  CHECK(contains(net.mitigated, "CVE-2017-7308"));
  CHECK(net.bySyscallBlock == 26);  // socket alone satisfies no entry
  CHECK(net.byArgBlock == 0);
  CHECK(net.mitigated.size() == net.bySyscallBlock + net.byArgBlock);

  testutil::World raw = testutil::analyzed_world("rawlib");
  SeccompProfile sockopt = profile_for(raw, "sockoptprog.dis", binscan::Arch::A64, t);
  CveScore so = score_cve(sockopt, t, cves);
  CHECK(contains(so.mitigated, "CVE-2017-7308"));  // AF_PACKET excluded by eq 2
  CHECK(contains(so.mitigated, "CVE-2017-6074"));  // IPPROTO_IP excluded by eq 6
  CHECK_FALSE(contains(so.mitigated, "CVE-2017-16939"));  // setsockopt is allowed
  CHECK(so.byArgBlock == 2);
  CHECK(so.bySyscallBlock == 23);

  SeccompProfile rawsock = profile_for(raw, "rawsock.dis", binscan::Arch::A64, t);
  CveScore rs = score_cve(rawsock, t, cves);
  CHECK_FALSE(contains(rs.mitigated, "CVE-2017-7308"));   // domain is unfiltered
  CHECK_FALSE(contains(rs.mitigated, "CVE-2017-16939"));  // setsockopt is allowed
  CHECK(rs.byArgBlock == 0);
  CHECK(rs.bySyscallBlock == 21);

  SeccompProfile everything = profile_for(mini, "dynprog.dis", binscan::Arch::A64, t);
  CveScore all = score_cve(everything, t, cves);
  CHECK(all.mitigated.empty());
}

TEST_CASE("unknown syscalls in the cve map skip the entry with a note") {
  SyscallTable t = table("a64");
  std::vector<CveEntry> cves{{"CVE-0000-0001", {{"frobnicate", std::nullopt}}},
                             {"CVE-0000-0002", {{"ptrace", std::nullopt}}}};
  SeccompProfile empty;
  empty.defaultAction = "errno";
  Diags diags;
  CveScore s = score_cve(empty, t, cves, &diags);
  CHECK(s.mitigated == std::vector<std::string>{"CVE-0000-0002"});
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].code == "cve-unknown-syscall");
}

TEST_CASE("frequency ordering keeps decisions and sorts hottest first") {
  SyscallTable t = table("a64");
  testutil::World w = testutil::analyzed_world("mini-libc");
  SeccompProfile p = profile_for(w, "fileprog.dis", binscan::Arch::A64, t);
  REQUIRE(p.rules.size() == 2);
  CHECK(p.rules[0].syscall == 56);  // ascending numbers from generation

  SeccompProfile hot = optimize_order(p, {{57, 10}, {56, 1}});
  CHECK(hot.rules[0].syscall == 57);
  SeccompProfile uniform = optimize_order(hot, {});
  CHECK(uniform.rules[0].syscall == 56);  // ties fall back to the number

  std::mt19937 rng(7);
  std::uniform_int_distribution<long long> nr(0, 300);
  std::uniform_int_distribution<long long> val(-4, 40);
  for (int i = 0; i < 500; i++) {
    SyscallEvent e;
    e.number = nr(rng);
    for (int k = 0; k < 4; k++) e.args.push_back(val(rng));
    CHECK(evaluate(p, t, e).allow == evaluate(hot, t, e).allow);
  }
}

TEST_CASE("rule order never changes a decision") {
  SyscallTable t = table("a64");
  testutil::World w = testutil::analyzed_world("rawlib");
  SeccompProfile p = profile_for(w, "rawsock.dis", binscan::Arch::A64, t);
  REQUIRE(p.rules.size() == 3);

  std::mt19937 rng(1234);
  std::uniform_int_distribution<long long> nr(190, 215);
  std::uniform_int_distribution<long long> val(-2, 25);
  std::vector<SyscallEvent> events;
  for (int i = 0; i < 200; i++) {
    SyscallEvent e;
    e.number = nr(rng);
    for (int k = 0; k < 5; k++) e.args.push_back(val(rng));
    events.push_back(std::move(e));
  }
  std::vector<bool> canonical;
  for (const auto& e : events) canonical.push_back(evaluate(p, t, e).allow);

  for (int perm = 0; perm < 50; perm++) {
    SeccompProfile q = p;
    std::shuffle(q.rules.begin(), q.rules.end(), rng);
    for (size_t i = 0; i < events.size(); i++)
      CHECK(evaluate(q, t, events[i]).allow == canonical[i]);
  }
}

TEST_CASE("reports serialize with stable fields") {
  TraceReport r{3, 1, 2};
  nlohmann::json j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["allowed"] == 3);
  CHECK(j["denied"] == 1);
  CHECK(j["firstDenied"] == 2);
  nlohmann::json clean = nlohmann::json::parse(report_to_json({2, 0, std::nullopt}));
  CHECK(clean["firstDenied"].is_null());

  CveScore s{{"CVE-1", "CVE-2"}, 1, 1};
  nlohmann::json js = nlohmann::json::parse(cve_score_to_json(s));
  CHECK(js["mitigated"].size() == 2);
  CHECK(js["bySyscallBlock"] == 1);
  CHECK(js["byArgBlock"] == 1);
}
