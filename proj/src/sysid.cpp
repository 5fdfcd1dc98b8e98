#include "secforge/sysid.hpp"

#include <algorithm>
#include <mutex>

#include "json.hpp"
#include "secforge/error.hpp"
#include "secforge/util.hpp"

namespace secforge::sysid {

using namespace secforge::ir;
using nlohmann::json;

namespace {

// Classifies the number/selector expression of a kernel entry. Identifiers
// that name neither a parameter nor a local read as bare syscall names.
void classify_number(const IrFunction& fn, const Atom& a, SyscallSite& site) {
  switch (a.kind) {
    case Atom::Kind::IntConst:
      site.number = a.num;
      return;
    case Atom::Kind::FuncRef:
      site.syscallName = a.text;
      return;
    case Atom::Kind::Var:
      if (fn.isLocal(a.text)) {
        site.dynamic = true;
      } else {
        site.syscallName = a.text;
      }
      return;
    case Atom::Kind::ParamRef:
      site.dynamic = true;
      return;
    case Atom::Kind::StrConst:
      site.syscallName = a.text;
      return;
  }
}

}  // namespace

std::vector<SyscallSite> identify_syscall_functions(const IrProgram& prog,
                                                    const std::vector<std::string>& macroList,
                                                    Diags* diags) {
  std::set<std::string> macros(macroList.begin(), macroList.end());
  std::vector<SyscallSite> out;

  for (const auto& [wrapper, syscallName] : prog.wrapperList) {
    const IrFunction* fn = prog.find(wrapper);
    if (!fn) {
      diag_warn(diags, "unknown-wrapper", "wrapper list names undefined '" + wrapper + "'");
      continue;
    }
    SyscallSite site;
    site.function = fn->name;
    site.siteId = -1;
    site.synthetic = true;
    site.syscallName = syscallName;
    for (size_t i = 0; i < fn->params.size() && i < 6; i++) {
      Atom a;
      a.kind = Atom::Kind::ParamRef;
      a.paramIndex = static_cast<int>(i);
      a.text = fn->params[i].name;
      site.args.push_back(a);
    }
    out.push_back(std::move(site));
  }

  for (const auto& fn : prog.functions) {
    for (const auto& st : fn.statements) {
      if (st.kind == Statement::Kind::AsmSyscall) {
        SyscallSite site;
        site.function = fn.name;
        site.siteId = st.id;
        site.args = st.args;
        classify_number(fn, st.nr, site);
        if (site.dynamic)
          diag_warn(diags, "dynamic-syscall",
                    fn.name + " enters the kernel with a runtime-selected number");
        out.push_back(std::move(site));
      } else if (st.kind == Statement::Kind::Call && macros.count(st.callee)) {
        if (st.args.empty()) {
          diag_warn(diags, "macro-no-selector",
                    fn.name + " calls " + st.callee + " without a selector");
          continue;
        }
        SyscallSite site;
        site.function = fn.name;
        site.siteId = st.id;
        site.args.assign(st.args.begin() + 1, st.args.end());
        if (site.args.size() > 6) site.args.resize(6);
        classify_number(fn, st.args[0], site);
        if (site.dynamic)
          diag_warn(diags, "dynamic-syscall",
                    fn.name + " selects the kernel entry through " + st.callee +
                        " at runtime");
        out.push_back(std::move(site));
      }
    }
  }

  std::sort(out.begin(), out.end());
  return out;
}

ApiSyscallMap build_api_syscall_map(const IrProgram& prog, const cg::CallGraph& merged,
                                    const std::vector<SyscallSite>& sites,
                                    const std::map<long long, std::string>& numberToName,
                                    int jobs, Diags* diags) {
  std::vector<std::string> apis = prog.apiList;
  std::sort(apis.begin(), apis.end());

  for (const auto& api : apis)
    if (!prog.find(api))
      throw AnalysisError(ErrorCode::UnknownApi, "listed API '" + api + "' is not defined");

  // Sites grouped by owning function for quick reach filtering.
  std::map<std::string, std::vector<const SyscallSite*>> byFn;
  for (const auto& s : sites) byFn[s.function].push_back(&s);

  std::vector<ApiEntry> results(apis.size());
  std::mutex diagMu;

  parallel_for(apis.size(), jobs, [&](size_t idx) {
    const std::string& api = apis[idx];
    ApiEntry entry;
    std::set<std::string> reach = cg::reachable_from(merged, prog.canonical(api));
    for (const auto& fnName : reach) {
      auto it = byFn.find(fnName);
      if (it == byFn.end()) continue;
      for (const SyscallSite* s : it->second) {
        entry.sites.push_back(*s);
        if (s->dynamic) {
          entry.requiresFullAllowlist = true;
        } else if (!s->syscallName.empty()) {
          entry.syscalls.insert(s->syscallName);
        } else if (s->number) {
          auto nameIt = numberToName.find(*s->number);
          if (nameIt != numberToName.end()) {
            entry.syscalls.insert(nameIt->second);
          } else {
            entry.rawNumbers.insert(*s->number);
            std::lock_guard<std::mutex> lock(diagMu);
            diag_warn(diags, "unnamed-number",
                      api + " reaches syscall number " + std::to_string(*s->number) +
                          " absent from the table");
          }
        }
      }
    }
    std::sort(entry.sites.begin(), entry.sites.end());
    if (entry.requiresFullAllowlist) {
      std::lock_guard<std::mutex> lock(diagMu);
      diag_warn(diags, "full-allowlist",
                "API " + api + " reaches a runtime-selected kernel entry; its profile "
                "cannot be narrowed");
    }
    results[idx] = std::move(entry);
  });

  ApiSyscallMap m;
  for (size_t i = 0; i < apis.size(); i++) m.entries[apis[i]] = std::move(results[i]);
  return m;
}

namespace {

json domain_value_to_json(const DomainValue& v) {
  if (v.isStr) return json(v.s);
  return json(v.i);
}

DomainValue domain_value_from_json(const json& j) {
  if (j.is_string()) return DomainValue::ofStr(j.get<std::string>());
  if (j.is_number_integer()) return DomainValue::ofInt(j.get<long long>());
  throw AnalysisError(ErrorCode::SchemaError, "bad domain value in map document");
}

const char* mapping_kind_name(ArgumentMapping::Kind k) {
  switch (k) {
    case ArgumentMapping::Kind::Identity: return "identity";
    case ArgumentMapping::Kind::Table: return "table";
    case ArgumentMapping::Kind::ConstantSet: return "constant-set";
  }
  return "identity";
}

ArgumentMapping::Kind mapping_kind_from(const std::string& s) {
  if (s == "identity") return ArgumentMapping::Kind::Identity;
  if (s == "table") return ArgumentMapping::Kind::Table;
  if (s == "constant-set") return ArgumentMapping::Kind::ConstantSet;
  throw AnalysisError(ErrorCode::SchemaError, "bad mapping kind: " + s);
}

}  // namespace

std::string map_to_json(const ApiSyscallMap& m) {
  json apis = json::object();
  for (const auto& [api, entry] : m.entries) {
    json je;
    je["syscalls"] = json::array();
    for (const auto& s : entry.syscalls) je["syscalls"].push_back(s);
    je["numbers"] = json::array();
    for (long long n : entry.rawNumbers) je["numbers"].push_back(n);
    je["requiresFullAllowlist"] = entry.requiresFullAllowlist;
    je["sites"] = json::array();
    for (const auto& s : entry.sites) {
      json js;
      js["function"] = s.function;
      js["site"] = s.siteId;
      js["syscall"] = s.syscallName;
      if (s.number) js["number"] = *s.number;
      js["dynamic"] = s.dynamic;
      js["synthetic"] = s.synthetic;
      js["argc"] = s.args.size();
      je["sites"].push_back(js);
    }
    je["mappings"] = json::array();
    for (const auto& mp : entry.mappings) {
      json jm;
      jm["function"] = mp.siteFunction;
      jm["site"] = mp.siteId;
      jm["syscall"] = mp.syscallName;
      jm["arg"] = mp.syscallArg;
      jm["kind"] = mapping_kind_name(mp.kind);
      if (mp.kind != ArgumentMapping::Kind::ConstantSet) jm["apiArg"] = mp.apiArg;
      if (mp.kind == ArgumentMapping::Kind::Table) {
        json jt = json::array();
        for (const auto& [k, v] : mp.table)
          jt.push_back(json::array({domain_value_to_json(k), v}));
        jm["table"] = jt;
      }
      if (mp.kind == ArgumentMapping::Kind::ConstantSet) jm["values"] = mp.values;
      je["mappings"].push_back(jm);
    }
    apis[api] = je;
  }
  json doc;
  doc["apis"] = apis;
  return doc.dump(2) + "\n";
}

ApiSyscallMap map_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("apis"))
    throw AnalysisError(ErrorCode::SchemaError, "bad API map document");
  ApiSyscallMap m;
  for (const auto& [api, je] : doc["apis"].items()) {
    ApiEntry entry;
    for (const auto& s : je.value("syscalls", json::array()))
      entry.syscalls.insert(s.get<std::string>());
    for (const auto& n : je.value("numbers", json::array()))
      entry.rawNumbers.insert(n.get<long long>());
    entry.requiresFullAllowlist = je.value("requiresFullAllowlist", false);
    for (const auto& js : je.value("sites", json::array())) {
      SyscallSite s;
      s.function = js.at("function").get<std::string>();
      s.siteId = js.at("site").get<int>();
      s.syscallName = js.value("syscall", "");
      if (js.contains("number")) s.number = js["number"].get<long long>();
      s.dynamic = js.value("dynamic", false);
      s.synthetic = js.value("synthetic", false);
      size_t argc = js.value("argc", size_t{0});
      s.args.resize(argc);  // placeholder atoms; argc is what downstream needs
      entry.sites.push_back(s);
    }
    for (const auto& jm : je.value("mappings", json::array())) {
      ArgumentMapping mp;
      mp.api = api;
      mp.siteFunction = jm.at("function").get<std::string>();
      mp.siteId = jm.at("site").get<int>();
      mp.syscallName = jm.at("syscall").get<std::string>();
      mp.syscallArg = jm.at("arg").get<int>();
      mp.kind = mapping_kind_from(jm.at("kind").get<std::string>());
      mp.apiArg = jm.value("apiArg", -1);
      for (const auto& row : jm.value("table", json::array())) {
        if (!row.is_array() || row.size() != 2)
          throw AnalysisError(ErrorCode::SchemaError, "bad table row in map document");
        mp.table.emplace_back(domain_value_from_json(row[0]), row[1].get<long long>());
      }
      for (const auto& v : jm.value("values", json::array()))
        mp.values.push_back(v.get<long long>());
      entry.mappings.push_back(mp);
    }
    std::sort(entry.sites.begin(), entry.sites.end());
    std::sort(entry.mappings.begin(), entry.mappings.end());
    m.entries[api] = std::move(entry);
  }
  return m;
}

}  // namespace secforge::sysid
