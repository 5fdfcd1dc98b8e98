#include "secforge/binscan.hpp"

#include <algorithm>
#include <cstdlib>

#include "json.hpp"
#include "secforge/util.hpp"

namespace secforge::binscan {

using nlohmann::json;

Arch arch_from_string(const std::string& s) {
  if (s == "a64") return Arch::A64;
  if (s == "a32") return Arch::A32;
  throw AnalysisError(ErrorCode::UnknownArch, "unknown arch: " + s);
}

std::string arch_to_string(Arch a) { return a == Arch::A64 ? "a64" : "a32"; }

ValueSet ValueSet::distinct(std::set<long long> vs) {
  if (vs.empty()) return unknown();
  if (vs.size() > 8) return range(*vs.begin(), *vs.rbegin());
  ValueSet v;
  v.kind = Kind::Distinct;
  v.values = std::move(vs);
  return v;
}

ValueSet ValueSet::flags(std::set<long long> vs) {
  if (vs.empty()) return unknown();
  ValueSet v;
  v.kind = Kind::Flags;
  v.values = std::move(vs);
  return v;
}

ValueSet ValueSet::range(long long lo, long long hi) {
  ValueSet v;
  v.kind = Kind::Range;
  v.lo = lo;
  v.hi = hi;
  return v;
}

ValueSet ValueSet::ofStrings(std::set<std::string> ss) {
  if (ss.empty()) return unknown();
  ValueSet v;
  v.kind = Kind::Strings;
  v.strings = std::move(ss);
  return v;
}

namespace {

constexpr int kZeroReg = -2;  // xzr / wzr

bool is_hex(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

long long parse_hex(const std::string& s, int line) {
  if (!is_hex(s)) throw syntax_error(line, "malformed address: " + s);
  return std::stoll(s, nullptr, 16);
}

// Immediates are written `#value`; branch targets and literal-pool references
// are bare hex.
std::optional<long long> parse_imm(const std::string& tok) {
  std::string t = trim(tok);
  if (t.empty()) return std::nullopt;
  if (t[0] == '#') t = t.substr(1);
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  long long v = std::strtoll(t.c_str(), &end, 0);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

// Splits an operand list on commas outside brackets, so `x30, [sp, #24]`
// yields two fields.
std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') depth++;
    if (c == ']') depth--;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  std::string last = trim(cur);
  if (!last.empty()) out.push_back(last);
  return out;
}

struct RegRef {
  int id = -1;
  bool narrow = false;  // w-register on a64
};

std::optional<RegRef> parse_reg(const std::string& tok, Arch arch) {
  std::string t = trim(tok);
  if (arch == Arch::A64) {
    if (t == "sp") return RegRef{31, false};
    if (t == "xzr" || t == "wzr") return RegRef{kZeroReg, t[0] == 'w'};
    if (t.size() >= 2 && (t[0] == 'x' || t[0] == 'w')) {
      std::string n = t.substr(1);
      if (!n.empty() && std::all_of(n.begin(), n.end(), ::isdigit)) {
        int r = std::stoi(n);
        if (r <= 30) return RegRef{r, t[0] == 'w'};
      }
    }
    return std::nullopt;
  }
  if (t == "sp") return RegRef{13, false};
  if (t == "lr") return RegRef{14, false};
  if (t == "pc") return RegRef{15, false};
  if (t == "fp") return RegRef{11, false};
  if (t == "ip") return RegRef{12, false};
  if (t == "sl") return RegRef{10, false};
  if (t.size() >= 2 && t[0] == 'r') {
    std::string n = t.substr(1);
    if (!n.empty() && std::all_of(n.begin(), n.end(), ::isdigit)) {
      int r = std::stoi(n);
      if (r <= 15) return RegRef{r, false};
    }
  }
  return std::nullopt;
}

int sp_reg(Arch arch) { return arch == Arch::A64 ? 31 : 13; }

// [base, #offset] or [base]
std::optional<std::pair<int, long long>> parse_mem(const std::string& tok, Arch arch) {
  std::string t = trim(tok);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') return std::nullopt;
  auto parts = split_operands(t.substr(1, t.size() - 2));
  if (parts.empty() || parts.size() > 2) return std::nullopt;
  auto base = parse_reg(parts[0], arch);
  if (!base) return std::nullopt;
  long long off = 0;
  if (parts.size() == 2) {
    auto imm = parse_imm(parts[1]);
    if (!imm) return std::nullopt;
    off = *imm;
  }
  return std::make_pair(base->id, off);
}

std::optional<int> parse_shift(const std::string& tok) {
  std::string t = trim(tok);
  if (!starts_with(t, "lsl")) return std::nullopt;
  auto imm = parse_imm(trim(t.substr(3)));
  if (!imm) return std::nullopt;
  return static_cast<int>(*imm);
}

long long narrow32(long long v) {
  unsigned long long u = static_cast<unsigned long long>(v) & 0xffffffffull;
  if (u & 0x80000000ull) u |= 0xffffffff00000000ull;
  return static_cast<long long>(u);
}

bool is_barrier(const std::string& m) {
  if (m == "ret" || m == "br" || m == "bx" || m == "b") return true;
  if (starts_with(m, "b.")) return true;
  if (m == "cbz" || m == "cbnz" || m == "tbz" || m == "tbnz") return true;
  return false;
}

bool is_call(const std::string& m) { return m == "bl" || m == "blx"; }

// Mnemonics the slicer models; everything else is opaque and taints its
// first register operand.
bool is_modeled(const std::string& m) {
  static const std::set<std::string> k{"mov", "movz", "movk", "movn", "orr", "add",
                                       "sub", "ldr", "str", "bl",   "blx", "b",
                                       "svc", "swi", "ret", "nop",  "br",  "bx"};
  return k.count(m) > 0;
}

struct Slicer {
  const BinaryImage& img;
  const SliceOptions& opts;
  int steps = 0;

  struct Target {
    bool isSlot = false;
    int reg = -1;        // register id when !isSlot
    long long off = 0;   // sp offset when isSlot
  };

  const BinFunction* functionAt(long long start) const {
    for (const auto& f : img.functions)
      if (f.start == start) return &f;
    return nullptr;
  }

  // The unique bl targeting `start`, if exactly one exists image-wide.
  std::optional<std::pair<const BinFunction*, size_t>> uniqueCaller(long long start) const {
    std::optional<std::pair<const BinFunction*, size_t>> found;
    for (const auto& f : img.functions)
      for (size_t i = 0; i < f.instrs.size(); ++i) {
        const Instruction& ins = f.instrs[i];
        if (!is_call(ins.mnemonic) || ins.operands.empty()) continue;
        std::string t = ins.operands[0];
        if (!is_hex(t)) continue;
        if (std::stoll(t, nullptr, 16) != start) continue;
        if (found) return std::nullopt;
        found = {&f, i};
      }
    return found;
  }

  bool argRegister(int reg) const {
    return reg >= 0 && reg <= (img.arch == Arch::A64 ? 7 : 3);
  }

  bool callClobbered(int reg) const {
    if (img.arch == Arch::A64) return reg >= 0 && reg <= 17;
    return (reg >= 0 && reg <= 3) || reg == 12 || reg == 14;
  }

  ValueSet literalValue(long long addr) const {
    auto it = img.literalPool.find(addr);
    if (it == img.literalPool.end()) return ValueSet::unknown();
    auto sit = img.strings.find(it->second);
    if (sit != img.strings.end()) return ValueSet::ofStrings({sit->second});
    return ValueSet::distinct({it->second});
  }

  static ValueSet applyOverlays(ValueSet v,
                                const std::vector<std::pair<long long, int>>& overlays,
                                bool narrow) {
    if (v.kind != ValueSet::Kind::Distinct) {
      return overlays.empty() ? v : ValueSet::unknown();
    }
    std::set<long long> out;
    for (long long base : v.values) {
      unsigned long long u = static_cast<unsigned long long>(base);
      for (auto it = overlays.rbegin(); it != overlays.rend(); ++it) {
        unsigned long long mask = 0xffffull << it->second;
        u = (u & ~mask) | ((static_cast<unsigned long long>(it->first) & 0xffffull)
                           << it->second);
      }
      long long r = static_cast<long long>(u);
      out.insert(narrow ? narrow32(r) : r);
    }
    return ValueSet::distinct(std::move(out));
  }

  static ValueSet shiftBy(const ValueSet& v, long long delta) {
    if (v.kind == ValueSet::Kind::Distinct) {
      std::set<long long> out;
      for (long long x : v.values) out.insert(x + delta);
      return ValueSet::distinct(std::move(out));
    }
    if (v.kind == ValueSet::Kind::Range) return ValueSet::range(v.lo + delta, v.hi + delta);
    return ValueSet::unknown();
  }

  // Backward walk from instrs[from-1] for the value of `reg` at instrs[from].
  ValueSet sliceReg(const BinFunction& fn, size_t from, int reg, int hopsLeft) {
    if (reg == kZeroReg) return ValueSet::distinct({0});
    Target target{false, reg, 0};
    std::vector<std::pair<long long, int>> overlays;  // pending movk pieces
    Arch arch = img.arch;

    for (size_t pos = from; pos-- > 0;) {
      if (++steps > opts.maxInstructions) return ValueSet::unknown();
      const Instruction& ins = fn.instrs[pos];
      const std::string& m = ins.mnemonic;
      const auto& ops = ins.operands;

      if (m == "nop" || starts_with(m, ".")) continue;
      if (is_barrier(m)) return ValueSet::unknown();

      if (is_call(m)) {
        if (target.isSlot) return ValueSet::unknown();
        if (callClobbered(target.reg)) return ValueSet::unknown();
        continue;
      }
      if (m == "svc" || m == "swi") {
        if (!target.isSlot && target.reg == 0) return ValueSet::unknown();
        continue;
      }

      if (!is_modeled(m)) {
        if (target.isSlot) return ValueSet::unknown();
        if (!ops.empty()) {
          auto d = parse_reg(ops[0], arch);
          if (d && d->id == target.reg) return ValueSet::unknown();
        }
        continue;
      }

      if (m == "str") {
        if (ops.size() != 2) return ValueSet::unknown();
        auto mem = parse_mem(ops[1], arch);
        if (target.isSlot) {
          if (!mem || mem->first != sp_reg(arch)) return ValueSet::unknown();
          if (mem->second != target.off) continue;
          auto src = parse_reg(ops[0], arch);
          if (!src) return ValueSet::unknown();
          target = {false, src->id, 0};
          if (target.reg == kZeroReg)
            return applyOverlays(ValueSet::distinct({0}), overlays, false);
        }
        continue;
      }

      std::optional<RegRef> dest =
          ops.empty() ? std::optional<RegRef>{} : parse_reg(ops[0], arch);
      bool definesTarget = !target.isSlot && dest && dest->id == target.reg;

      if (m == "mov") {
        if (!dest) continue;
        if (dest->id == sp_reg(arch)) {
          if (target.isSlot) return ValueSet::unknown();
          continue;
        }
        if (!definesTarget) continue;
        if (ops.size() != 2) return ValueSet::unknown();
        if (auto imm = parse_imm(ops[1])) {
          long long v = dest->narrow ? narrow32(*imm) : *imm;
          return applyOverlays(ValueSet::distinct({v}), overlays, dest->narrow);
        }
        auto src = parse_reg(ops[1], arch);
        if (!src) return ValueSet::unknown();
        if (src->id == kZeroReg)
          return applyOverlays(ValueSet::distinct({0}), overlays, dest->narrow);
        if (src->id == sp_reg(arch)) return ValueSet::unknown();
        target.reg = src->id;
        continue;
      }

      if (m == "movz" || m == "movn") {
        if (!definesTarget) continue;
        if (ops.size() < 2) return ValueSet::unknown();
        auto imm = parse_imm(ops[1]);
        if (!imm) return ValueSet::unknown();
        int sh = 0;
        if (ops.size() >= 3) {
          auto s = parse_shift(ops[2]);
          if (!s) return ValueSet::unknown();
          sh = *s;
        }
        long long base = *imm << sh;
        if (m == "movn") base = ~base;
        if (dest->narrow) base = narrow32(base);
        return applyOverlays(ValueSet::distinct({base}), overlays, dest->narrow);
      }

      if (m == "movk") {
        if (!definesTarget) continue;
        if (ops.size() < 2) return ValueSet::unknown();
        auto imm = parse_imm(ops[1]);
        if (!imm) return ValueSet::unknown();
        int sh = 0;
        if (ops.size() >= 3) {
          auto s = parse_shift(ops[2]);
          if (!s) return ValueSet::unknown();
          sh = *s;
        }
        overlays.push_back({*imm, sh});
        continue;
      }

      if (m == "orr") {
        if (!definesTarget) continue;
        if (ops.size() != 3 || !overlays.empty()) return ValueSet::unknown();
        auto src = parse_reg(ops[1], arch);
        if (!src) return ValueSet::unknown();
        ValueSet lhs = src->id == kZeroReg ? ValueSet::distinct({0})
                                           : sliceReg(fn, pos, src->id, hopsLeft);
        ValueSet rhs;
        if (auto imm = parse_imm(ops[2])) {
          rhs = ValueSet::distinct({*imm});
        } else if (auto r2 = parse_reg(ops[2], arch)) {
          rhs = r2->id == kZeroReg ? ValueSet::distinct({0})
                                   : sliceReg(fn, pos, r2->id, hopsLeft);
        } else {
          return ValueSet::unknown();
        }
        bool flagKinds = (lhs.kind == ValueSet::Kind::Distinct ||
                          lhs.kind == ValueSet::Kind::Flags) &&
                         (rhs.kind == ValueSet::Kind::Distinct ||
                          rhs.kind == ValueSet::Kind::Flags);
        if (!flagKinds) return ValueSet::unknown();
        std::set<long long> bits = lhs.values;
        bits.insert(rhs.values.begin(), rhs.values.end());
        return ValueSet::flags(std::move(bits));
      }

      if (m == "add" || m == "sub") {
        if (!dest) continue;
        if (dest->id == sp_reg(arch)) {
          if (target.isSlot) return ValueSet::unknown();
          continue;
        }
        if (!definesTarget) continue;
        if (ops.size() != 3 || !overlays.empty()) return ValueSet::unknown();
        auto src = parse_reg(ops[1], arch);
        if (!src) return ValueSet::unknown();
        if (src->id == sp_reg(arch)) return ValueSet::unknown();  // stack address
        auto imm = parse_imm(ops[2]);
        if (!imm) return ValueSet::unknown();
        ValueSet base = src->id == kZeroReg ? ValueSet::distinct({0})
                                            : sliceReg(fn, pos, src->id, hopsLeft);
        return shiftBy(base, m == "add" ? *imm : -*imm);
      }

      if (m == "ldr") {
        if (!definesTarget) continue;  // loads never write memory
        if (ops.size() != 2) return ValueSet::unknown();
        if (auto mem = parse_mem(ops[1], arch)) {
          if (mem->first != sp_reg(arch)) return ValueSet::unknown();
          target = {true, -1, mem->second};
          continue;
        }
        if (is_hex(ops[1]))
          return applyOverlays(literalValue(std::stoll(ops[1], nullptr, 16)), overlays,
                               dest->narrow);
        return ValueSet::unknown();
      }
    }

    // Fell off the top of the function: try the unique caller when the value
    // arrives in an argument register.
    if (target.isSlot || !overlays.empty()) return ValueSet::unknown();
    if (!argRegister(target.reg) || hopsLeft <= 0) return ValueSet::unknown();
    auto caller = uniqueCaller(fn.start);
    if (!caller) return ValueSet::unknown();
    return sliceReg(*caller->first, caller->second, target.reg, hopsLeft - 1);
  }
};

void decode_data_line(BinaryImage& img, long long addr, const std::string& mnemonic,
                      const std::string& rest, int line) {
  if (mnemonic == ".asciz" || mnemonic == ".string") {
    std::string t = trim(rest);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"')
      img.strings[addr] = t.substr(1, t.size() - 2);
    return;
  }
  if (mnemonic == ".quad" || mnemonic == ".word" || mnemonic == ".long") {
    auto v = parse_imm(rest);
    if (!v) throw syntax_error(line, "malformed data value: " + rest);
    img.literalPool[addr] = *v;
  }
}

}  // namespace

BinaryImage parse_disassembly(const std::string& text, Arch arch) {
  BinaryImage img;
  img.arch = arch;
  BinFunction* cur = nullptr;

  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string& raw = lines[li];
    int lineNo = static_cast<int>(li + 1);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.find("file format") != std::string::npos) continue;
    if (starts_with(line, "Disassembly of section")) {
      cur = nullptr;
      continue;
    }

    // `0000000000400570 <socket@plt>:` opens a function.
    size_t lt = line.find(" <");
    if (!raw.empty() && !std::isspace(static_cast<unsigned char>(raw[0])) &&
        lt != std::string::npos && ends_with(line, ">:")) {
      std::string addrTok = line.substr(0, lt);
      std::string name = line.substr(lt + 2, line.size() - lt - 4);
      long long addr = parse_hex(addrTok, lineNo);
      img.functions.push_back({name, addr, {}});
      cur = &img.functions.back();
      if (ends_with(name, "@plt"))
        img.pltStubs[addr] = name.substr(0, name.size() - 4);
      continue;
    }

    if (!cur) continue;  // stray text between sections

    size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw syntax_error(lineNo, "expected `addr: mnemonic` line");
    long long addr = parse_hex(trim(line.substr(0, colon)), lineNo);
    std::string rest = trim(line.substr(colon + 1));
    if (rest.empty()) throw syntax_error(lineNo, "missing mnemonic");
    size_t ws = rest.find_first_of(" \t");
    std::string mnemonic = ws == std::string::npos ? rest : rest.substr(0, ws);
    std::string operandText = ws == std::string::npos ? "" : trim(rest.substr(ws));

    if (!cur->instrs.empty() && addr <= cur->instrs.back().address)
      throw syntax_error(lineNo, "addresses must increase within a function");

    if (starts_with(mnemonic, ".")) {
      decode_data_line(img, addr, mnemonic, operandText, lineNo);
      cur->instrs.push_back({addr, mnemonic, {operandText}, lineNo});
      continue;
    }

    Instruction ins{addr, mnemonic, split_operands(operandText), lineNo};
    // Branch targets carry a trailing `<name>` annotation; drop it.
    for (auto& op : ins.operands) {
      size_t ann = op.find(" <");
      if (ann != std::string::npos && ends_with(op, ">")) op = trim(op.substr(0, ann));
    }
    cur->instrs.push_back(std::move(ins));
  }
  return img;
}

std::vector<BinaryCallsite> find_api_callsites(const BinaryImage& img,
                                               const std::vector<std::string>& apiList) {
  std::set<std::string> apis(apiList.begin(), apiList.end());
  std::vector<BinaryCallsite> out;
  for (const auto& fn : img.functions) {
    if (ends_with(fn.name, "@plt")) continue;
    for (const auto& ins : fn.instrs) {
      if (!is_call(ins.mnemonic) || ins.operands.empty()) continue;
      if (!is_hex(ins.operands[0])) continue;
      long long target = std::stoll(ins.operands[0], nullptr, 16);
      auto stub = img.pltStubs.find(target);
      if (stub == img.pltStubs.end() || apis.count(stub->second) == 0) continue;
      out.push_back({fn.name, ins.address, stub->second, {}});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const BinaryCallsite& a, const BinaryCallsite& b) {
              return a.address < b.address;
            });
  return out;
}

BinaryCallsite extract_call_args(const BinaryImage& img, const BinaryCallsite& site,
                                 int arity, const SliceOptions& opts) {
  BinaryCallsite out = site;
  out.argSets.clear();
  const BinFunction* fn = nullptr;
  size_t idx = 0;
  for (const auto& f : img.functions)
    for (size_t i = 0; i < f.instrs.size(); ++i)
      if (f.instrs[i].address == site.address) {
        fn = &f;
        idx = i;
      }
  int count = arity >= 0 ? std::min(arity, 8) : 8;
  for (int k = 0; k < count; ++k) {
    Slicer s{img, opts};
    out.argSets.push_back(fn ? s.sliceReg(*fn, idx, k, opts.maxCallerHops)
                             : ValueSet::unknown());
  }
  return out;
}

std::vector<DirectSyscall> find_direct_syscalls(const BinaryImage& img,
                                                const SliceOptions& opts) {
  std::vector<DirectSyscall> out;
  for (const auto& fn : img.functions) {
    for (size_t i = 0; i < fn.instrs.size(); ++i) {
      const Instruction& ins = fn.instrs[i];
      bool svc = ins.mnemonic == "svc";
      bool swi = ins.mnemonic == "swi";
      if (!svc && !swi) continue;
      DirectSyscall d;
      d.function = fn.name;
      d.address = ins.address;
      if (img.arch == Arch::A64) {
        Slicer s{img, opts};
        d.nrSet = s.sliceReg(fn, i, 8, opts.maxCallerHops);
      } else {
        long long imm = 0;
        if (!ins.operands.empty())
          if (auto v = parse_imm(ins.operands[0])) imm = *v;
        if (imm != 0) {
          d.nrSet = imm >= 0x900000 ? ValueSet::distinct({imm - 0x900000})
                                    : ValueSet::unknown();
        } else {
          Slicer s{img, opts};
          d.nrSet = s.sliceReg(fn, i, 7, opts.maxCallerHops);
        }
      }
      for (int k = 0; k < 6; ++k) {
        Slicer s{img, opts};
        d.argSets.push_back(s.sliceReg(fn, i, k, opts.maxCallerHops));
      }
      out.push_back(std::move(d));
    }
  }
  return out;
}

ScanResult scan_binary(const BinaryImage& img, const std::vector<std::string>& apiList,
                       const std::map<std::string, int>& apiArity,
                       const SliceOptions& opts, Diags* diags) {
  ScanResult r;
  r.arch = img.arch;
  for (const auto& site : find_api_callsites(img, apiList)) {
    auto it = apiArity.find(site.api);
    r.callsites.push_back(
        extract_call_args(img, site, it == apiArity.end() ? -1 : it->second, opts));
  }
  r.directs = find_direct_syscalls(img, opts);
  for (const auto& fn : img.functions)
    for (const auto& ins : fn.instrs)
      if ((ins.mnemonic == "blr" || ins.mnemonic == "blx") && !ins.operands.empty() &&
          parse_reg(ins.operands[0], img.arch))
        diag_warn(diags, "indirect-call-skipped",
                  fn.name + ": register-target call at line " + std::to_string(ins.line));
  return r;
}

namespace {

json valueset_to_json(const ValueSet& v) {
  json j;
  switch (v.kind) {
    case ValueSet::Kind::Unknown:
      j["kind"] = "unknown";
      break;
    case ValueSet::Kind::Distinct:
      j["kind"] = "distinct";
      j["values"] = v.values;
      break;
    case ValueSet::Kind::Flags:
      j["kind"] = "flags";
      j["values"] = v.values;
      break;
    case ValueSet::Kind::Range:
      j["kind"] = "range";
      j["lo"] = v.lo;
      j["hi"] = v.hi;
      break;
    case ValueSet::Kind::Strings:
      j["kind"] = "strings";
      j["values"] = v.strings;
      break;
  }
  return j;
}

ValueSet valueset_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "unknown") return ValueSet::unknown();
  if (kind == "distinct" || kind == "flags") {
    std::set<long long> vs;
    for (const auto& v : j.at("values")) vs.insert(v.get<long long>());
    return kind == "distinct" ? ValueSet::distinct(std::move(vs))
                              : ValueSet::flags(std::move(vs));
  }
  if (kind == "range")
    return ValueSet::range(j.at("lo").get<long long>(), j.at("hi").get<long long>());
  if (kind == "strings") {
    std::set<std::string> ss;
    for (const auto& v : j.at("values")) ss.insert(v.get<std::string>());
    return ValueSet::ofStrings(std::move(ss));
  }
  throw AnalysisError(ErrorCode::SchemaError, "bad value-set kind: " + kind);
}

}  // namespace

std::string scan_to_json(const ScanResult& r) {
  json doc;
  doc["arch"] = arch_to_string(r.arch);
  doc["callsites"] = json::array();
  for (const auto& c : r.callsites) {
    json jc;
    jc["function"] = c.function;
    jc["address"] = c.address;
    jc["api"] = c.api;
    jc["args"] = json::array();
    for (const auto& v : c.argSets) jc["args"].push_back(valueset_to_json(v));
    doc["callsites"].push_back(jc);
  }
  doc["directs"] = json::array();
  for (const auto& d : r.directs) {
    json jd;
    jd["function"] = d.function;
    jd["address"] = d.address;
    jd["nr"] = valueset_to_json(d.nrSet);
    jd["args"] = json::array();
    for (const auto& v : d.argSets) jd["args"].push_back(valueset_to_json(v));
    doc["directs"].push_back(jd);
  }
  return doc.dump(2) + "\n";
}

ScanResult scan_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("bad scan document: ") + e.what());
  }
  try {
    ScanResult r;
    r.arch = arch_from_string(doc.at("arch").get<std::string>());
    for (const auto& jc : doc.value("callsites", json::array())) {
      BinaryCallsite c;
      c.function = jc.at("function").get<std::string>();
      c.address = jc.at("address").get<long long>();
      c.api = jc.at("api").get<std::string>();
      for (const auto& v : jc.value("args", json::array()))
        c.argSets.push_back(valueset_from_json(v));
      r.callsites.push_back(std::move(c));
    }
    for (const auto& jd : doc.value("directs", json::array())) {
      DirectSyscall d;
      d.function = jd.at("function").get<std::string>();
      d.address = jd.at("address").get<long long>();
      d.nrSet = valueset_from_json(jd.at("nr"));
      for (const auto& v : jd.value("args", json::array()))
        d.argSets.push_back(valueset_from_json(v));
      r.directs.push_back(std::move(d));
    }
    return r;
  } catch (const json::exception& e) {
    throw AnalysisError(ErrorCode::SchemaError, std::string("bad scan document: ") + e.what());
  }
}

}  // namespace secforge::binscan
