#include "secforge/profile.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "secforge/error.hpp"
#include "secforge/util.hpp"

namespace secforge::profile {

using nlohmann::json;
using ordered = nlohmann::ordered_json;
using binscan::ValueSet;

SyscallTable load_syscall_table(const std::string& path) {
  SyscallTable t;
  try {
    json j = json::parse(read_file(path));
    t.arch = j.at("arch").get<std::string>();
    for (const auto& [name, num] : j.at("syscalls").items()) {
      long long n = num.get<long long>();
      if (t.nameToNumber.count(name))
        throw AnalysisError(ErrorCode::DuplicateName, "duplicate syscall name " + name);
      if (t.numberToName.count(n))
        throw AnalysisError(ErrorCode::DuplicateNumber,
                            "number " + std::to_string(n) + " maps to both " +
                                t.numberToName[n] + " and " + name);
      t.nameToNumber[name] = n;
      t.numberToName[n] = name;
    }
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError,
                        std::string("syscall table: ") + e.what());
  }
  return t;
}

namespace {

// What one contributing path knows about one syscall argument. Anything the
// path cannot pin down keeps `known` false and kills the filter for that
// argument index.
struct Contribution {
  bool known = false;
  ValueSet vs;
};

const sysid::ArgumentMapping* find_mapping(const sysid::ApiEntry& e,
                                           const sysid::SyscallSite& st, int argIdx) {
  for (const auto& m : e.mappings)
    if (m.siteFunction == st.function && m.siteId == st.siteId &&
        m.syscallName == st.syscallName && m.syscallArg == argIdx)
      return &m;
  return nullptr;
}

Contribution push_through(const sysid::ArgumentMapping& m,
                          const binscan::BinaryCallsite& c) {
  using Kind = sysid::ArgumentMapping::Kind;
  switch (m.kind) {
    case Kind::ConstantSet:
      return {true, ValueSet::distinct({m.values.begin(), m.values.end()})};
    case Kind::Identity: {
      if (m.apiArg < 0 || m.apiArg >= static_cast<int>(c.argSets.size())) return {};
      const ValueSet& in = c.argSets[m.apiArg];
      if (in.kind == ValueSet::Kind::Unknown || in.kind == ValueSet::Kind::Strings)
        return {};
      return {true, in};
    }
    case Kind::Table: {
      if (m.apiArg < 0 || m.apiArg >= static_cast<int>(c.argSets.size())) return {};
      const ValueSet& in = c.argSets[m.apiArg];
      std::set<long long> image;
      auto lookupInt = [&](long long v) -> const long long* {
        for (const auto& kv : m.table)
          if (!kv.first.isStr && kv.first.i == v) return &kv.second;
        return nullptr;
      };
      auto lookupStr = [&](const std::string& s) -> const long long* {
        for (const auto& kv : m.table)
          if (kv.first.isStr && kv.first.s == s) return &kv.second;
        return nullptr;
      };
      if (in.kind == ValueSet::Kind::Distinct) {
        for (long long v : in.values) {
          const long long* out = lookupInt(v);
          if (!out) return {};
          image.insert(*out);
        }
      } else if (in.kind == ValueSet::Kind::Strings) {
        for (const auto& s : in.strings) {
          const long long* out = lookupStr(s);
          if (!out) return {};
          image.insert(*out);
        }
      } else {
        return {};
      }
      return {true, ValueSet::distinct(image)};
    }
  }
  return {};
}

// Running union over everything the paths may pass at one argument index.
struct ArgAcc {
  bool touched = false;
  bool filterable = true;
  ValueSet merged;

  void addUnknown() {
    touched = true;
    filterable = false;
  }

  void add(const ValueSet& vs) {
    touched = true;
    if (!filterable) return;
    if (vs.kind == ValueSet::Kind::Unknown || vs.kind == ValueSet::Kind::Strings) {
      filterable = false;
      return;
    }
    if (merged.kind == ValueSet::Kind::Unknown) {  // first contribution
      merged = vs;
      return;
    }
    if (merged.kind != vs.kind) {  // mixed shapes are not worth a filter
      filterable = false;
      return;
    }
    switch (vs.kind) {
      case ValueSet::Kind::Distinct: {
        std::set<long long> u = merged.values;
        u.insert(vs.values.begin(), vs.values.end());
        merged = ValueSet::distinct(u);
        break;
      }
      case ValueSet::Kind::Flags: {
        std::set<long long> u = merged.values;
        u.insert(vs.values.begin(), vs.values.end());
        merged = ValueSet::flags(u);
        break;
      }
      case ValueSet::Kind::Range:
        merged = ValueSet::range(std::min(merged.lo, vs.lo), std::max(merged.hi, vs.hi));
        break;
      default:
        filterable = false;
        break;
    }
  }
};

struct SyscallAcc {
  std::string name;
  std::array<ArgAcc, 6> args;
};

std::optional<ArgFilter> to_filter(int index, const ArgAcc& acc) {
  if (!acc.touched || !acc.filterable) return std::nullopt;
  ArgFilter f;
  f.index = index;
  switch (acc.merged.kind) {
    case ValueSet::Kind::Distinct:
      f.values.assign(acc.merged.values.begin(), acc.merged.values.end());
      f.op = f.values.size() == 1 ? "eq" : "inSet";
      return f;
    case ValueSet::Kind::Flags: {
      long long mask = 0;
      for (long long b : acc.merged.values) mask |= b;
      f.op = "maskedEq";
      f.mask = mask;
      f.values = {0};  // (arg & ~mask) == 0
      return f;
    }
    case ValueSet::Kind::Range:
      f.op = "inRange";
      f.values = {acc.merged.lo, acc.merged.hi};
      return f;
    default:
      return std::nullopt;
  }
}

SeccompProfile full_allowlist(const SyscallTable& table, const std::string& action) {
  SeccompProfile p;
  p.arch = table.arch;
  p.defaultAction = action;
  for (const auto& [num, name] : table.numberToName)
    p.rules.push_back({num, name, "allow", {}});
  return p;
}

}  // namespace

SeccompProfile generate_profile(const sysid::ApiSyscallMap& map,
                                const binscan::ScanResult& scan,
                                const SyscallTable& table, const ProfileOptions& opts,
                                Diags* diags) {
  if (binscan::arch_to_string(scan.arch) != table.arch)
    throw AnalysisError(ErrorCode::ArchMismatch,
                        "scan is " + binscan::arch_to_string(scan.arch) +
                            " but syscall table is " + table.arch);

  // Pass 1: decide whether anything forces the conservative full allowlist.
  for (const auto& c : scan.callsites) {
    auto it = map.entries.find(c.api);
    if (it == map.entries.end()) {
      diag_warn(diags, "unmapped-api",
                c.api + " is called by the binary but missing from the library map; "
                        "falling back to a full allowlist");
      return full_allowlist(table, opts.defaultAction);
    }
    if (it->second.requiresFullAllowlist) {
      diag_warn(diags, "full-allowlist",
                c.api + " can invoke a runtime-chosen syscall; every syscall in the " +
                    table.arch + " table is allowed and no argument is filtered");
      return full_allowlist(table, opts.defaultAction);
    }
  }
  for (const auto& d : scan.directs) {
    if (d.nrSet.kind == ValueSet::Kind::Distinct) continue;
    diag_warn(diags, "full-allowlist",
              "direct syscall at " + d.function + "+" + std::to_string(d.address) +
                  " has an unresolved number; every syscall in the " + table.arch +
                  " table is allowed and no argument is filtered");
    return full_allowlist(table, opts.defaultAction);
  }

  std::map<long long, SyscallAcc> accs;

  for (const auto& c : scan.callsites) {
    const sysid::ApiEntry& e = map.entries.at(c.api);
    for (const auto& st : e.sites) {
      long long nr = -1;
      std::string name;
      if (!st.syscallName.empty()) {
        auto nit = table.nameToNumber.find(st.syscallName);
        if (nit == table.nameToNumber.end()) {
          diag_warn(diags, "unmapped-syscall-name",
                    st.syscallName + " (reached from " + c.api +
                        ") is not in the " + table.arch + " table; no rule emitted");
          continue;
        }
        nr = nit->second;
        name = st.syscallName;
      } else if (st.number) {
        nr = *st.number;
        auto rit = table.numberToName.find(nr);
        if (rit != table.numberToName.end()) name = rit->second;
      } else {
        continue;  // defensive; dynamic sites imply the full allowlist above
      }

      SyscallAcc& acc = accs[nr];
      if (acc.name.empty()) acc.name = name;
      for (int k = 0; k < 6; k++) {
        ArgAcc& a = acc.args[k];
        if (k >= static_cast<int>(st.args.size())) {
          a.addUnknown();  // register content past the site's arity is arbitrary
          continue;
        }
        const sysid::ArgumentMapping* m = find_mapping(e, st, k);
        if (!m) {
          a.addUnknown();
          continue;
        }
        Contribution contrib = push_through(*m, c);
        if (!contrib.known)
          a.addUnknown();
        else
          a.add(contrib.vs);
      }
    }
  }

  for (const auto& d : scan.directs) {
    for (long long nr : d.nrSet.values) {
      SyscallAcc& acc = accs[nr];
      if (acc.name.empty()) {
        auto rit = table.numberToName.find(nr);
        if (rit != table.numberToName.end()) acc.name = rit->second;
      }
      for (int k = 0; k < 6 && k < static_cast<int>(d.argSets.size()); k++)
        acc.args[k].add(d.argSets[k]);
      for (int k = static_cast<int>(d.argSets.size()); k < 6; k++)
        acc.args[k].addUnknown();
    }
  }

  SeccompProfile p;
  p.arch = table.arch;
  p.defaultAction = opts.defaultAction;
  for (const auto& [nr, acc] : accs) {
    Rule r;
    r.syscall = nr;
    r.name = acc.name;
    for (int k = 0; k < 6; k++)
      if (auto f = to_filter(k, acc.args[k])) r.args.push_back(*f);
    p.rules.push_back(std::move(r));
  }
  diag_note(diags, "profile-generated",
            std::to_string(p.rules.size()) + " allow rules, " +
                std::to_string(denied_count(p, table)) + " syscalls denied");
  return p;
}

std::string serialize_profile(const SeccompProfile& p) {
  ordered j;
  j["arch"] = p.arch;
  j["defaultAction"] = p.defaultAction;
  j["rules"] = ordered::array();
  for (const auto& r : p.rules) {
    ordered jr;
    jr["syscall"] = r.syscall;
    jr["name"] = r.name;
    jr["action"] = r.action;
    jr["args"] = ordered::array();
    for (const auto& f : r.args) {
      ordered jf;
      jf["index"] = f.index;
      jf["op"] = f.op;
      jf["values"] = f.values;
      if (f.mask) jf["mask"] = *f.mask;
      jr["args"].push_back(jf);
    }
    j["rules"].push_back(jr);
  }
  return j.dump(2) + "\n";
}

SeccompProfile parse_profile(const std::string& text) {
  static const std::set<std::string> kOps{"eq", "maskedEq", "inSet", "inRange"};
  try {
    json j = json::parse(text);
    if (!j.contains("defaultAction"))
      throw AnalysisError(ErrorCode::SchemaError, "profile: missing defaultAction");
    SeccompProfile p;
    p.arch = j.value("arch", "");
    p.defaultAction = j.at("defaultAction").get<std::string>();
    for (const auto& jr : j.value("rules", json::array())) {
      Rule r;
      r.syscall = jr.at("syscall").get<long long>();
      r.name = jr.value("name", "");
      r.action = jr.value("action", "allow");
      for (const auto& jf : jr.value("args", json::array())) {
        ArgFilter f;
        f.index = jf.at("index").get<int>();
        f.op = jf.at("op").get<std::string>();
        if (!kOps.count(f.op))
          throw AnalysisError(ErrorCode::SchemaError, "profile: unknown op " + f.op);
        f.values = jf.at("values").get<std::vector<long long>>();
        if (jf.contains("mask")) f.mask = jf.at("mask").get<long long>();
        r.args.push_back(std::move(f));
      }
      p.rules.push_back(std::move(r));
    }
    return p;
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("profile: ") + e.what());
  }
}

size_t denied_count(const SeccompProfile& p, const SyscallTable& table) {
  size_t allowed = 0;
  for (const auto& r : p.rules)
    if (table.numberToName.count(r.syscall)) allowed++;
  return table.size() - allowed;
}

}  // namespace secforge::profile
