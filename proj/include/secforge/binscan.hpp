#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "secforge/diag.hpp"
#include "secforge/error.hpp"

namespace secforge::binscan {

enum class Arch { A64, A32 };

Arch arch_from_string(const std::string& s);
std::string arch_to_string(Arch a);

struct Instruction {
  long long address = 0;
  std::string mnemonic;
  std::vector<std::string> operands;  // comma-split at bracket depth zero
  int line = 0;
};

struct BinFunction {
  std::string name;
  long long start = 0;
  std::vector<Instruction> instrs;
};

struct BinaryImage {
  Arch arch = Arch::A64;
  std::vector<BinFunction> functions;           // in file order
  std::map<long long, std::string> pltStubs;    // stub address -> API name
  std::map<long long, long long> literalPool;   // .word / .quad slots
  std::map<long long, std::string> strings;     // .asciz payloads
};

// Argument knowledge lattice. Flags values are OR-combinable bits; strings
// are carried for table mappings but never turn into numeric filters.
struct ValueSet {
  enum class Kind { Unknown, Distinct, Flags, Range, Strings };
  Kind kind = Kind::Unknown;
  std::set<long long> values;      // Distinct / Flags
  long long lo = 0, hi = 0;        // Range
  std::set<std::string> strings;   // Strings

  static ValueSet unknown() { return {}; }
  static ValueSet distinct(std::set<long long> vs);  // wide sets become ranges
  static ValueSet flags(std::set<long long> vs);
  static ValueSet range(long long lo, long long hi);
  static ValueSet ofStrings(std::set<std::string> ss);

  bool known() const { return kind != Kind::Unknown; }
  bool operator==(const ValueSet&) const = default;
};

struct BinaryCallsite {
  std::string function;
  long long address = 0;
  std::string api;
  std::vector<ValueSet> argSets;
};

struct DirectSyscall {
  std::string function;
  long long address = 0;
  ValueSet nrSet;
  std::vector<ValueSet> argSets;  // argument registers 0..5
};

struct SliceOptions {
  int maxInstructions = 500;
  int maxCallerHops = 1;
};

struct ScanResult {
  Arch arch = Arch::A64;
  std::vector<BinaryCallsite> callsites;
  std::vector<DirectSyscall> directs;
};

BinaryImage parse_disassembly(const std::string& text, Arch arch);

// One callsite per bl into a plt stub whose name is listed, ordered by
// address. Argument sets start unfilled.
std::vector<BinaryCallsite> find_api_callsites(const BinaryImage& img,
                                               const std::vector<std::string>& apiList);

// Backward register slice for each argument register. arity < 0 means the
// API's parameter count is unknown and all 8 registers are reported.
BinaryCallsite extract_call_args(const BinaryImage& img, const BinaryCallsite& site,
                                 int arity, const SliceOptions& opts = {});

std::vector<DirectSyscall> find_direct_syscalls(const BinaryImage& img,
                                                const SliceOptions& opts = {});

// Full scan: locate callsites, slice their arguments with arities drawn from
// apiArity, and collect direct syscall instructions.
ScanResult scan_binary(const BinaryImage& img, const std::vector<std::string>& apiList,
                       const std::map<std::string, int>& apiArity,
                       const SliceOptions& opts = {}, Diags* diags = nullptr);

std::string scan_to_json(const ScanResult& r);
ScanResult scan_from_json(const std::string& text);

}  // namespace secforge::binscan
