#include "secforge/policysim.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>

#include "json.hpp"
#include "secforge/error.hpp"
#include "secforge/util.hpp"

namespace secforge::policysim {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

std::vector<SyscallEvent> parse_trace(const std::string& text) {
  std::vector<SyscallEvent> out;
  std::vector<std::string> lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); i++) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    int lineNo = static_cast<int>(i + 1);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw AnalysisError(ErrorCode::TraceParse, std::string("trace: ") + e.what(), lineNo);
    }
    SyscallEvent ev;
    if (j.contains("name")) {
      if (!j["name"].is_string())
        throw AnalysisError(ErrorCode::TraceParse, "trace: name must be a string", lineNo);
      ev.name = j["name"].get<std::string>();
    }
    if (j.contains("number")) {
      if (!j["number"].is_number_integer())
        throw AnalysisError(ErrorCode::TraceParse, "trace: number must be an integer", lineNo);
      ev.number = j["number"].get<long long>();
    }
    if (ev.name.empty() && !ev.number)
      throw AnalysisError(ErrorCode::TraceParse, "trace: event needs a name or a number",
                          lineNo);
    for (const auto& a : j.value("args", json::array())) {
      if (a.is_null())
        ev.args.push_back(std::nullopt);
      else if (a.is_number_integer())
        ev.args.push_back(a.get<long long>());
      else
        throw AnalysisError(ErrorCode::TraceParse, "trace: args must be integers or null",
                            lineNo);
    }
    if (ev.args.size() > 6)
      throw AnalysisError(ErrorCode::TraceParse, "trace: more than 6 arguments", lineNo);
    out.push_back(std::move(ev));
  }
  return out;
}

namespace {

bool filter_passes(const profile::ArgFilter& f, long long v) {
  if (f.op == "eq") return !f.values.empty() && v == f.values[0];
  if (f.op == "inSet")
    return std::find(f.values.begin(), f.values.end(), v) != f.values.end();
  if (f.op == "inRange")
    return f.values.size() == 2 && f.values[0] <= v && v <= f.values[1];
  if (f.op == "maskedEq") {
    long long residue = v & ~f.mask.value_or(0);
    return !f.values.empty() && residue == f.values[0];
  }
  return false;
}

// Filters on one index are alternatives; a value passes the index when any
// of them accepts it. An index with no filters accepts everything.
bool index_accepts(const std::vector<const profile::ArgFilter*>& group, long long v) {
  for (const profile::ArgFilter* f : group)
    if (filter_passes(*f, v)) return true;
  return group.empty();
}

std::map<int, std::vector<const profile::ArgFilter*>> group_filters(const profile::Rule& r) {
  std::map<int, std::vector<const profile::ArgFilter*>> groups;
  for (const auto& f : r.args) groups[f.index].push_back(&f);
  return groups;
}

}  // namespace

Decision evaluate(const profile::SeccompProfile& p, const profile::SyscallTable& table,
                  const SyscallEvent& ev) {
  long long nr;
  if (ev.number) {
    nr = *ev.number;
  } else {
    auto it = table.nameToNumber.find(ev.name);
    if (it == table.nameToNumber.end())
      return {false, "syscall " + ev.name + " is not in the " + table.arch + " table"};
    nr = it->second;
  }

  const profile::Rule* rule = nullptr;
  for (const auto& r : p.rules)
    if (r.syscall == nr) {
      rule = &r;
      break;
    }
  if (!rule) return {false, "no allow rule for syscall " + std::to_string(nr)};

  for (const auto& [index, group] : group_filters(*rule)) {
    if (index >= static_cast<int>(ev.args.size()))
      continue;  // unrecorded trailing register; the filter matched its
                 // generation-time value by construction
    const std::optional<long long>& arg = ev.args[index];
    if (!arg)
      return {false, "filtered argument " + std::to_string(index) + " is opaque"};
    if (!index_accepts(group, *arg))
      return {false, "argument " + std::to_string(index) + " = " + std::to_string(*arg) +
                         " rejected"};
  }
  return {true, ""};
}

TraceReport simulate_trace(const profile::SeccompProfile& p,
                           const profile::SyscallTable& table,
                           const std::vector<SyscallEvent>& trace, int jobs) {
  TraceReport rep;
  std::atomic<size_t> allowed{0};
  std::atomic<size_t> firstDenied{trace.size()};
  parallel_for(trace.size(), jobs, [&](size_t i) {
    if (evaluate(p, table, trace[i]).allow) {
      allowed.fetch_add(1);
      return;
    }
    size_t seen = firstDenied.load();
    while (i < seen && !firstDenied.compare_exchange_weak(seen, i)) {
    }
  });
  rep.allowed = allowed.load();
  rep.denied = trace.size() - rep.allowed;
  if (firstDenied.load() < trace.size()) rep.firstDenied = firstDenied.load();
  return rep;
}

std::string report_to_json(const TraceReport& r) {
  ordered j;
  j["allowed"] = r.allowed;
  j["denied"] = r.denied;
  j["firstDenied"] = r.firstDenied ? ordered(*r.firstDenied) : ordered(nullptr);
  return j.dump(2) + "\n";
}

FlagTable load_flag_table(const std::string& path) {
  try {
    json j = json::parse(read_file(path));
    FlagTable t;
    for (const auto& [name, value] : j.items()) t[name] = value.get<long long>();
    return t;
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("flag table: ") + e.what());
  }
}

std::vector<CveEntry> load_cve_map(const std::string& path, const FlagTable& flags) {
  try {
    json doc = json::parse(read_file(path));
    std::vector<CveEntry> out;
    for (const auto& je : doc) {
      CveEntry entry;
      entry.id = je.at("id").get<std::string>();
      for (const auto& js : je.at("syscalls")) {
        CveSyscall s;
        s.name = js.at("name").get<std::string>();
        if (js.contains("arg")) {
          const json& ja = js["arg"];
          CveCondition cond;
          cond.index = ja.at("index").get<int>();
          if (ja.contains("flag")) {
            const std::string flag = ja["flag"].get<std::string>();
            auto it = flags.find(flag);
            if (it == flags.end())
              throw AnalysisError(ErrorCode::SchemaError,
                                  "cve map: unknown flag " + flag + " in " + entry.id);
            cond.value = it->second;
          } else if (ja.contains("value")) {
            cond.value = ja["value"].get<long long>();
          } else {
            throw AnalysisError(ErrorCode::SchemaError,
                                "cve map: arg condition in " + entry.id +
                                    " needs a flag or a value");
          }
          s.arg = cond;
        }
        entry.syscalls.push_back(std::move(s));
      }
      if (entry.syscalls.empty())
        throw AnalysisError(ErrorCode::SchemaError,
                            "cve map: " + entry.id + " lists no syscalls");
      out.push_back(std::move(entry));
    }
    return out;
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("cve map: ") + e.what());
  }
}

CveScore score_cve(const profile::SeccompProfile& p, const profile::SyscallTable& table,
                   const std::vector<CveEntry>& cveMap, Diags* diags) {
  CveScore score;
  for (const auto& entry : cveMap) {
    bool resolvable = true;
    for (const auto& s : entry.syscalls)
      if (!table.nameToNumber.count(s.name)) {
        diag_warn(diags, "cve-unknown-syscall",
                  entry.id + " needs " + s.name + " which is not in the " + table.arch +
                      " table; entry skipped");
        resolvable = false;
      }
    if (!resolvable) continue;

    auto rule_for = [&](const std::string& name) -> const profile::Rule* {
      long long nr = table.nameToNumber.at(name);
      for (const auto& r : p.rules)
        if (r.syscall == nr) return &r;
      return nullptr;
    };

    bool syscallBlocked = false;
    for (const auto& s : entry.syscalls)
      if (!rule_for(s.name)) syscallBlocked = true;
    if (syscallBlocked) {
      score.mitigated.push_back(entry.id);
      score.bySyscallBlock++;
      continue;
    }

    bool argBlocked = false;
    for (const auto& s : entry.syscalls) {
      if (!s.arg) continue;
      const profile::Rule* rule = rule_for(s.name);
      auto groups = group_filters(*rule);
      auto git = groups.find(s.arg->index);
      if (git == groups.end()) continue;  // unfiltered, so the value stays reachable
      if (!index_accepts(git->second, s.arg->value)) argBlocked = true;
    }
    if (argBlocked) {
      score.mitigated.push_back(entry.id);
      score.byArgBlock++;
    }
  }
  return score;
}

std::string cve_score_to_json(const CveScore& s) {
  ordered j;
  j["mitigated"] = s.mitigated;
  j["bySyscallBlock"] = s.bySyscallBlock;
  j["byArgBlock"] = s.byArgBlock;
  return j.dump(2) + "\n";
}

profile::SeccompProfile optimize_order(const profile::SeccompProfile& p,
                                       const std::map<long long, size_t>& freq) {
  profile::SeccompProfile out = p;
  auto count = [&](long long nr) -> size_t {
    auto it = freq.find(nr);
    return it == freq.end() ? 0 : it->second;
  };
  std::stable_sort(out.rules.begin(), out.rules.end(),
                   [&](const profile::Rule& a, const profile::Rule& b) {
                     size_t fa = count(a.syscall), fb = count(b.syscall);
                     if (fa != fb) return fa > fb;
                     return a.syscall < b.syscall;
                   });
  return out;
}

}  // namespace secforge::policysim
