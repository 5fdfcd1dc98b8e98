#include "secforge/ir.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "secforge/util.hpp"

namespace secforge::ir {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Single-line scanner used for every statement form.
struct Cursor {
  const std::string& s;
  size_t pos = 0;
  int line;

  Cursor(const std::string& text, int ln) : s(text), line(ln) {}

  void skipWs() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) pos++;
  }
  bool atEnd() {
    skipWs();
    return pos >= s.size();
  }
  char peek() {
    skipWs();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool tryEat(char c) {
    skipWs();
    if (pos < s.size() && s[pos] == c) {
      pos++;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!tryEat(c))
      throw syntax_error(line, std::string("expected '") + c + "' in: " + s);
  }
  bool tryEatWord(const std::string& w) {
    skipWs();
    if (s.compare(pos, w.size(), w) == 0) {
      size_t after = pos + w.size();
      if (after >= s.size() || !is_ident_char(s[after])) {
        pos = after;
        return true;
      }
    }
    return false;
  }
  std::string eatIdent() {
    skipWs();
    if (pos >= s.size() || !is_ident_start(s[pos]))
      throw syntax_error(line, "expected identifier in: " + s);
    size_t b = pos;
    while (pos < s.size() && is_ident_char(s[pos])) pos++;
    return s.substr(b, pos - b);
  }
  bool peekIdent() {
    skipWs();
    return pos < s.size() && is_ident_start(s[pos]);
  }
  bool peekNumber() {
    skipWs();
    if (pos >= s.size()) return false;
    if (std::isdigit(static_cast<unsigned char>(s[pos]))) return true;
    return s[pos] == '-' && pos + 1 < s.size() &&
           std::isdigit(static_cast<unsigned char>(s[pos + 1]));
  }
  long long eatNumber() {
    skipWs();
    size_t b = pos;
    if (pos < s.size() && s[pos] == '-') pos++;
    if (s.compare(pos, 2, "0x") == 0 || s.compare(pos, 2, "0X") == 0) {
      pos += 2;
      size_t d = pos;
      while (pos < s.size() && std::isxdigit(static_cast<unsigned char>(s[pos]))) pos++;
      if (pos == d) throw syntax_error(line, "bad hex literal in: " + s);
    } else {
      size_t d = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) pos++;
      if (pos == d) throw syntax_error(line, "bad number in: " + s);
    }
    return std::stoll(s.substr(b, pos - b), nullptr, 0);
  }
  char eatEscaped(char quote) {
    if (pos >= s.size()) throw syntax_error(line, "unterminated literal in: " + s);
    char c = s[pos++];
    if (c != '\\') return c;
    if (pos >= s.size()) throw syntax_error(line, "bad escape in: " + s);
    char e = s[pos++];
    switch (e) {
      case 'n': return '\n';
      case 't': return '\t';
      case '0': return '\0';
      case '\\': return '\\';
      default:
        if (e == quote) return e;
        throw syntax_error(line, "bad escape in: " + s);
    }
  }
};

const char* kBinOps[] = {"<<", ">>", "+", "-", "*", "/", "%", "&", "|", "^"};
const char* kCondOps[] = {"==", "!=", "<=", ">=", "<", ">"};

std::string try_eat_op(Cursor& c, const char* const* ops, size_t n) {
  c.skipWs();
  for (size_t i = 0; i < n; i++) {
    std::string op = ops[i];
    if (c.s.compare(c.pos, op.size(), op) == 0) {
      c.pos += op.size();
      return op;
    }
  }
  return "";
}

Atom parse_atom(Cursor& c) {
  c.skipWs();
  if (c.peekNumber()) return Atom::intConst(c.eatNumber());
  if (c.tryEat('\'')) {
    char v = c.eatEscaped('\'');
    c.expect('\'');
    return Atom::intConst(static_cast<long long>(static_cast<unsigned char>(v)));
  }
  if (c.tryEat('"')) {
    std::string v;
    while (c.pos < c.s.size() && c.s[c.pos] != '"') v.push_back(c.eatEscaped('"'));
    c.expect('"');
    return Atom::strConst(v);
  }
  Atom a;
  a.kind = Atom::Kind::Var;
  a.text = c.eatIdent();
  return a;
}

std::vector<Atom> parse_args(Cursor& c) {
  std::vector<Atom> args;
  c.expect('(');
  if (!c.tryEat(')')) {
    for (;;) {
      args.push_back(parse_atom(c));
      if (c.tryEat(')')) break;
      c.expect(',');
    }
  }
  return args;
}

// expr := atom | atom binop atom | ident '[' int ']' | ident '.' ident
Expr parse_expr(Cursor& c) {
  Expr e;
  e.a = parse_atom(c);
  if (e.a.kind == Atom::Kind::Var) {
    if (c.pos < c.s.size() && c.s[c.pos] == '[') {
      c.pos++;
      e.kind = Expr::Kind::CharAt;
      e.charIndex = static_cast<int>(c.eatNumber());
      c.expect(']');
      return e;
    }
    if (c.pos < c.s.size() && c.s[c.pos] == '.') {
      c.pos++;
      e.kind = Expr::Kind::FieldLoad;
      e.field = c.eatIdent();
      return e;
    }
  }
  std::string op = try_eat_op(c, kBinOps, 10);
  if (!op.empty()) {
    e.kind = Expr::Kind::BinOp;
    e.op = op;
    e.b = parse_atom(c);
    return e;
  }
  e.kind = Expr::Kind::Atom;
  return e;
}

struct AliasRecord {
  std::string from, to;
  int line;
};

void parse_alias_line(const std::string& body, int line, std::vector<AliasRecord>& out) {
  Cursor c(body, line);
  std::string from = c.eatIdent();
  c.skipWs();
  if (c.s.compare(c.pos, 2, "->") != 0)
    throw syntax_error(line, "expected '->' in alias record");
  c.pos += 2;
  std::string to = c.eatIdent();
  if (!c.atEnd()) throw syntax_error(line, "trailing text after alias record");
  out.push_back({from, to, line});
}

void resolve_atom(Atom& a, const IrFunction& fn, const IrProgram& prog) {
  if (a.kind != Atom::Kind::Var) return;
  int pi = fn.paramIndexOf(a.text);
  if (pi >= 0) {
    a.kind = Atom::Kind::ParamRef;
    a.paramIndex = pi;
    return;
  }
  if (fn.isLocal(a.text)) return;
  std::string canon = prog.canonical(a.text);
  if (prog.find(canon) != nullptr) {
    a.kind = Atom::Kind::FuncRef;
    a.text = canon;
  }
}

void resolve_expr(Expr& e, const IrFunction& fn, const IrProgram& prog) {
  resolve_atom(e.a, fn, prog);
  if (e.kind == Expr::Kind::BinOp) resolve_atom(e.b, fn, prog);
}

std::string escape_str(const std::string& v) {
  std::string out;
  for (char ch : v) {
    switch (ch) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\0': out += "\\0"; break;
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string atom_to_string(const Atom& a) {
  switch (a.kind) {
    case Atom::Kind::IntConst: return std::to_string(a.num);
    case Atom::Kind::StrConst: return "\"" + escape_str(a.text) + "\"";
    default: return a.text;
  }
}

std::string expr_to_string(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Atom: return atom_to_string(e.a);
    case Expr::Kind::BinOp:
      return atom_to_string(e.a) + " " + e.op + " " + atom_to_string(e.b);
    case Expr::Kind::CharAt:
      return atom_to_string(e.a) + "[" + std::to_string(e.charIndex) + "]";
    case Expr::Kind::FieldLoad: return atom_to_string(e.a) + "." + e.field;
  }
  return "";
}

std::string args_to_string(const std::vector<Atom>& args) {
  std::string out = "(";
  for (size_t i = 0; i < args.size(); i++) {
    if (i) out += ", ";
    out += atom_to_string(args[i]);
  }
  return out + ")";
}

}  // namespace

std::string type_to_string(const TypeTag& t) {
  switch (t.kind) {
    case SemKind::Int: return "int";
    case SemKind::Pointer: return "pointer";
    case SemKind::String: return "string";
    case SemKind::Object: return "object(" + t.objectType + ")";
    case SemKind::FuncPtr: return "funcptr";
  }
  return "int";
}

TypeTag type_from_string(const std::string& s, int line) {
  if (s == "int") return {SemKind::Int, ""};
  if (s == "pointer") return {SemKind::Pointer, ""};
  if (s == "string") return {SemKind::String, ""};
  if (s == "funcptr") return {SemKind::FuncPtr, ""};
  if (starts_with(s, "object(") && ends_with(s, ")"))
    return {SemKind::Object, s.substr(7, s.size() - 8)};
  throw syntax_error(line, "unknown type tag: " + s);
}

TypeTag IrFunction::typeOfAtom(const Atom& a) const {
  switch (a.kind) {
    case Atom::Kind::IntConst: return {SemKind::Int, ""};
    case Atom::Kind::StrConst: return {SemKind::String, ""};
    case Atom::Kind::FuncRef: return {SemKind::FuncPtr, ""};
    case Atom::Kind::ParamRef:
      if (a.paramIndex >= 0 && a.paramIndex < static_cast<int>(params.size()))
        return params[a.paramIndex].type;
      return {SemKind::Int, ""};
    case Atom::Kind::Var: {
      auto it = localTypes.find(a.text);
      return it == localTypes.end() ? TypeTag{SemKind::Int, ""} : it->second;
    }
  }
  return {SemKind::Int, ""};
}

bool IrFunction::hasValueReturn() const {
  for (const auto& st : statements)
    if (st.kind == Statement::Kind::Return && st.retValue.has_value()) return true;
  return false;
}

void IrProgram::rebuildIndex() {
  index_.clear();
  for (size_t i = 0; i < functions.size(); i++) index_[functions[i].name] = i;
}

std::map<std::string, std::string> parse_alias_graph(const std::string& text) {
  std::vector<AliasRecord> records;
  auto lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); i++) {
    std::string line = lines[i];
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (!starts_with(line, "alias:"))
      throw syntax_error(static_cast<int>(i + 1), "expected alias record: " + line);
    parse_alias_line(line.substr(6), static_cast<int>(i + 1), records);
  }
  std::map<std::string, std::string> out;
  for (const auto& r : records) {
    auto it = out.find(r.from);
    if (it != out.end() && it->second != r.to)
      throw syntax_error(r.line, "alias '" + r.from + "' redefined with a different target");
    out[r.from] = r.to;
  }
  return out;
}

IrProgram parse_ir(const std::string& text,
                   const std::map<std::string, std::string>& extraAliases) {
  IrProgram prog;
  std::vector<AliasRecord> aliasRecords;
  IrFunction* fn = nullptr;
  BasicBlock* bb = nullptr;
  bool terminated = false;  // current block already ended in cond/switch/goto

  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); li++) {
    int line = static_cast<int>(li + 1);
    std::string raw = lines[li];
    // Strip comments, but leave '#' inside quoted literals alone.
    bool inStr = false, inChar = false;
    for (size_t i = 0; i < raw.size(); i++) {
      char ch = raw[i];
      if (ch == '\\' && (inStr || inChar)) {
        i++;
        continue;
      }
      if (ch == '"' && !inChar) inStr = !inStr;
      else if (ch == '\'' && !inStr) inChar = !inChar;
      else if (ch == '#' && !inStr && !inChar) {
        raw = raw.substr(0, i);
        break;
      }
    }
    std::string s = trim(raw);
    if (s.empty()) continue;

    if (starts_with(s, "alias:")) {
      if (fn) throw syntax_error(line, "alias record inside function body");
      parse_alias_line(s.substr(6), line, aliasRecords);
      continue;
    }
    if (starts_with(s, "func ") || s == "func") {
      if (fn) throw syntax_error(line, "nested function definition");
      Cursor c(s, line);
      c.tryEatWord("func");
      IrFunction f;
      f.name = c.eatIdent();
      f.line = line;
      c.expect('(');
      if (!c.tryEat(')')) {
        for (;;) {
          Param p;
          p.name = c.eatIdent();
          c.expect(':');
          c.skipWs();
          size_t b = c.pos;
          int depth = 0;
          while (c.pos < c.s.size()) {
            char ch = c.s[c.pos];
            if (ch == '(') depth++;
            else if (ch == ')' && depth-- == 0) break;
            else if (ch == ',' && depth == 0) break;
            c.pos++;
          }
          p.type = type_from_string(trim(c.s.substr(b, c.pos - b)), line);
          f.params.push_back(p);
          if (c.tryEat(')')) break;
          c.expect(',');
        }
      }
      if (!c.atEnd()) throw syntax_error(line, "trailing text after function header");
      prog.functions.push_back(std::move(f));
      fn = &prog.functions.back();
      bb = nullptr;
      continue;
    }
    if (s == "endfunc") {
      if (!fn) throw syntax_error(line, "endfunc outside function");
      fn = nullptr;
      bb = nullptr;
      continue;
    }
    if (starts_with(s, "bb ") || s == "bb") {
      if (!fn) throw syntax_error(line, "block label outside function");
      Cursor c(s, line);
      c.tryEatWord("bb");
      BasicBlock b;
      b.label = c.eatIdent();
      b.line = line;
      c.expect(':');
      if (!c.atEnd()) throw syntax_error(line, "trailing text after block label");
      if (fn->blockByLabel(b.label))
        throw syntax_error(line, "duplicate block label '" + b.label + "'");
      fn->blocks.push_back(std::move(b));
      bb = &fn->blocks.back();
      terminated = false;
      continue;
    }

    // Anything else is a statement.
    if (!fn) throw syntax_error(line, "statement outside function: " + s);
    if (!bb) throw syntax_error(line, "statement before first block label: " + s);
    if (terminated) throw syntax_error(line, "statement after block terminator: " + s);

    Cursor c(s, line);
    Statement st;
    st.line = line;

    if (c.tryEatWord("goto")) {
      bb->gotoTarget = c.eatIdent();
      if (!c.atEnd()) throw syntax_error(line, "trailing text after goto");
      terminated = true;
      continue;
    }
    if (c.tryEatWord("return")) {
      st.kind = Statement::Kind::Return;
      if (!c.atEnd()) {
        st.retValue = parse_expr(c);
        if (!c.atEnd()) throw syntax_error(line, "trailing text after return");
      }
    } else if (c.tryEatWord("if")) {
      st.kind = Statement::Kind::Cond;
      c.expect('(');
      st.condLhs = parse_atom(c);
      st.condOp = try_eat_op(c, kCondOps, 6);
      if (st.condOp.empty()) throw syntax_error(line, "expected comparison operator");
      st.condRhs = parse_atom(c);
      c.expect(')');
      if (!c.tryEatWord("goto")) throw syntax_error(line, "expected goto in conditional");
      st.thenLabel = c.eatIdent();
      if (!c.tryEatWord("else")) throw syntax_error(line, "expected else in conditional");
      st.elseLabel = c.eatIdent();
      if (!c.atEnd()) throw syntax_error(line, "trailing text after conditional");
      terminated = true;
    } else if (c.tryEatWord("switch")) {
      st.kind = Statement::Kind::Switch;
      c.expect('(');
      st.scrutinee = parse_atom(c);
      c.expect(')');
      c.expect('{');
      bool sawDefault = false;
      for (;;) {
        if (c.tryEatWord("default")) {
          c.expect(':');
          st.defaultLabel = c.eatIdent();
          sawDefault = true;
        } else {
          Atom v = parse_atom(c);
          if (v.kind != Atom::Kind::IntConst)
            throw syntax_error(line, "switch case value must be an integer constant");
          c.expect(':');
          std::string lbl = c.eatIdent();
          st.cases.emplace_back(v.num, lbl);
        }
        if (c.tryEat('}')) break;
        c.expect(',');
      }
      if (!sawDefault) throw syntax_error(line, "switch requires a default label");
      if (!c.atEnd()) throw syntax_error(line, "trailing text after switch");
      terminated = true;
    } else {
      // Optional "lhs =" or "base.field =" prefix, then call/icall/syscall/expr.
      std::optional<std::string> lhs;
      std::optional<std::string> lhsField;
      size_t save = c.pos;
      if (c.peekIdent()) {
        std::string id = c.eatIdent();
        std::string fieldName;
        bool isField = false;
        if (c.pos < c.s.size() && c.s[c.pos] == '.') {
          c.pos++;
          fieldName = c.eatIdent();
          isField = true;
        }
        c.skipWs();
        if (c.pos < c.s.size() && c.s[c.pos] == '=' &&
            (c.pos + 1 >= c.s.size() || c.s[c.pos + 1] != '=')) {
          c.pos++;
          lhs = id;
          if (isField) lhsField = fieldName;
        } else {
          c.pos = save;
        }
      }
      st.lhs = lhs;
      st.lhsField = lhsField;

      if (c.tryEatWord("call")) {
        st.kind = Statement::Kind::Call;
        st.callee = c.eatIdent();
        st.args = parse_args(c);
      } else if (c.tryEatWord("icall")) {
        st.kind = Statement::Kind::IndirectCall;
        st.icallTarget = parse_atom(c);
        if (c.tryEatWord("from")) st.icallObjectType = c.eatIdent();
        st.args = parse_args(c);
      } else if (c.tryEatWord("syscall")) {
        st.kind = Statement::Kind::AsmSyscall;
        auto all = parse_args(c);
        if (all.empty()) throw syntax_error(line, "syscall needs a number expression");
        if (all.size() > 7) throw syntax_error(line, "syscall takes at most 6 arguments");
        st.nr = all[0];
        st.args.assign(all.begin() + 1, all.end());
      } else {
        if (!lhs || lhsField) {
          if (!lhs) throw syntax_error(line, "unrecognized statement: " + s);
          // Field store: rhs must be a plain expression.
        }
        st.kind = Statement::Kind::Assign;
        st.rhs = parse_expr(c);
      }
      if (!c.atEnd()) throw syntax_error(line, "trailing text after statement: " + s);
      if (st.kind != Statement::Kind::Assign && lhsField)
        throw syntax_error(line, "field store cannot capture a call result");
    }

    st.id = static_cast<int>(fn->statements.size());
    fn->statements.push_back(std::move(st));
    bb->stmts.push_back(fn->statements.back().id);
  }
  if (fn) throw syntax_error(static_cast<int>(lines.size()), "missing endfunc at end of input");

  // Function name uniqueness.
  {
    std::set<std::string> seen;
    for (const auto& f : prog.functions)
      if (!seen.insert(f.name).second)
        throw AnalysisError(ErrorCode::DuplicateFunction,
                            "duplicate function '" + f.name + "'", f.line);
  }

  // Merge alias records, collapse chains, validate targets.
  std::map<std::string, std::string> rawAliases;
  for (const auto& r : aliasRecords) {
    auto it = rawAliases.find(r.from);
    if (it != rawAliases.end() && it->second != r.to)
      throw syntax_error(r.line, "alias '" + r.from + "' redefined with a different target");
    rawAliases[r.from] = r.to;
  }
  for (const auto& [from, to] : extraAliases) {
    auto it = rawAliases.find(from);
    if (it != rawAliases.end() && it->second != to)
      throw AnalysisError(ErrorCode::Syntax,
                          "alias '" + from + "' redefined with a different target");
    rawAliases[from] = to;
  }
  prog.rebuildIndex();
  std::set<std::string> fnNames;
  for (const auto& f : prog.functions) fnNames.insert(f.name);
  for (const auto& [from, to] : rawAliases) {
    if (fnNames.count(from))
      throw AnalysisError(ErrorCode::DuplicateFunction,
                          "alias '" + from + "' shadows a function definition");
    std::string cur = to;
    std::set<std::string> visited{from};
    while (!fnNames.count(cur)) {
      if (!visited.insert(cur).second)
        throw AnalysisError(ErrorCode::CyclicAlias, "alias cycle through '" + from + "'");
      auto it = rawAliases.find(cur);
      if (it == rawAliases.end())
        throw AnalysisError(ErrorCode::DanglingAlias,
                            "alias '" + from + "' resolves to undefined '" + cur + "'");
      cur = it->second;
    }
    prog.aliases[from] = cur;
  }

  // Per-function finishing: locals, label checks, atom resolution, local types.
  for (auto& f : prog.functions) {
    if (f.blocks.empty())
      throw AnalysisError(ErrorCode::Syntax, "function '" + f.name + "' has no blocks",
                          f.line);
    for (const auto& st : f.statements)
      if (st.lhs && !st.lhsField) f.locals.insert(*st.lhs);

    auto checkLabel = [&](const std::string& lbl, int line) {
      if (!f.blockByLabel(lbl))
        throw AnalysisError(ErrorCode::DanglingLabel,
                            "label '" + lbl + "' not defined in '" + f.name + "'", line);
    };
    for (const auto& b : f.blocks)
      if (b.gotoTarget) checkLabel(*b.gotoTarget, b.line);
    for (const auto& st : f.statements) {
      if (st.kind == Statement::Kind::Cond) {
        checkLabel(st.thenLabel, st.line);
        checkLabel(st.elseLabel, st.line);
      } else if (st.kind == Statement::Kind::Switch) {
        for (const auto& [v, lbl] : st.cases) checkLabel(lbl, st.line);
        checkLabel(st.defaultLabel, st.line);
      }
    }

    for (auto& st : f.statements) {
      resolve_expr(st.rhs, f, prog);
      for (auto& a : st.args) resolve_atom(a, f, prog);
      resolve_atom(st.nr, f, prog);
      resolve_atom(st.icallTarget, f, prog);
      resolve_atom(st.condLhs, f, prog);
      resolve_atom(st.condRhs, f, prog);
      resolve_atom(st.scrutinee, f, prog);
      if (st.retValue) resolve_expr(*st.retValue, f, prog);
      if (st.kind == Statement::Kind::Call) st.callee = prog.canonical(st.callee);
    }

    for (const auto& st : f.statements) {
      if (!st.lhs || st.lhsField) continue;
      TypeTag t{SemKind::Int, ""};
      if (st.kind == Statement::Kind::Assign && st.rhs.kind == Expr::Kind::Atom)
        t = f.typeOfAtom(st.rhs.a);
      auto it = f.localTypes.find(*st.lhs);
      if (it == f.localTypes.end()) f.localTypes[*st.lhs] = t;
      else if (!(it->second == t)) it->second = TypeTag{SemKind::Int, ""};
    }
  }
  prog.rebuildIndex();
  return prog;
}

std::string serialize_ir(const IrProgram& prog) {
  std::ostringstream out;
  for (const auto& [from, to] : prog.aliases) out << "alias: " << from << " -> " << to << "\n";
  for (const auto& f : prog.functions) {
    if (out.tellp() > 0) out << "\n";
    out << "func " << f.name << "(";
    for (size_t i = 0; i < f.params.size(); i++) {
      if (i) out << ", ";
      out << f.params[i].name << ":" << type_to_string(f.params[i].type);
    }
    out << ")\n";
    for (const auto& b : f.blocks) {
      out << "bb " << b.label << ":\n";
      for (int sid : b.stmts) {
        const Statement& st = f.statements[sid];
        out << "  ";
        switch (st.kind) {
          case Statement::Kind::Assign:
            if (st.lhsField) out << *st.lhs << "." << *st.lhsField << " = ";
            else out << *st.lhs << " = ";
            out << expr_to_string(st.rhs);
            break;
          case Statement::Kind::Call:
            if (st.lhs) out << *st.lhs << " = ";
            out << "call " << st.callee << args_to_string(st.args);
            break;
          case Statement::Kind::IndirectCall:
            if (st.lhs) out << *st.lhs << " = ";
            out << "icall " << atom_to_string(st.icallTarget);
            if (st.icallObjectType) out << " from " << *st.icallObjectType;
            out << args_to_string(st.args);
            break;
          case Statement::Kind::AsmSyscall: {
            if (st.lhs) out << *st.lhs << " = ";
            std::vector<Atom> all{st.nr};
            all.insert(all.end(), st.args.begin(), st.args.end());
            out << "syscall" << args_to_string(all);
            break;
          }
          case Statement::Kind::Cond:
            out << "if (" << atom_to_string(st.condLhs) << " " << st.condOp << " "
                << atom_to_string(st.condRhs) << ") goto " << st.thenLabel << " else "
                << st.elseLabel;
            break;
          case Statement::Kind::Switch: {
            out << "switch (" << atom_to_string(st.scrutinee) << ") { ";
            for (const auto& [v, lbl] : st.cases) out << v << ": " << lbl << ", ";
            out << "default: " << st.defaultLabel << " }";
            break;
          }
          case Statement::Kind::Return:
            out << "return";
            if (st.retValue) out << " " << expr_to_string(*st.retValue);
            break;
        }
        out << "\n";
      }
      if (b.gotoTarget) out << "  goto " << *b.gotoTarget << "\n";
    }
    out << "endfunc\n";
  }
  return out.str();
}

StatementCfg build_function_cfg(const IrFunction& fn) {
  StatementCfg cfg;
  cfg.stmtCount = static_cast<int>(fn.statements.size());

  // First statement reachable through a (possibly empty) block, following
  // goto/fall-through forwarding across empty blocks.
  auto blockEntry = [&](size_t startIdx) -> int {
    std::set<size_t> visited;
    size_t bi = startIdx;
    for (;;) {
      if (bi >= fn.blocks.size() || !visited.insert(bi).second) return -1;
      const BasicBlock& b = fn.blocks[bi];
      if (!b.stmts.empty()) return b.stmts.front();
      if (b.gotoTarget) {
        const BasicBlock* t = fn.blockByLabel(*b.gotoTarget);
        bi = static_cast<size_t>(t - fn.blocks.data());
      } else {
        bi++;
      }
    }
  };
  auto entryOfLabel = [&](const std::string& lbl) -> int {
    const BasicBlock* t = fn.blockByLabel(lbl);
    return t ? blockEntry(static_cast<size_t>(t - fn.blocks.data())) : -1;
  };

  cfg.entry = fn.blocks.empty() ? -1 : blockEntry(0);

  std::set<std::pair<int, int>> edges;
  auto addEdge = [&](int from, int to) {
    if (to >= 0) edges.insert({from, to});
  };

  for (size_t bi = 0; bi < fn.blocks.size(); bi++) {
    const BasicBlock& b = fn.blocks[bi];
    for (size_t i = 0; i < b.stmts.size(); i++) {
      const Statement& st = fn.statements[b.stmts[i]];
      bool last = (i + 1 == b.stmts.size());
      switch (st.kind) {
        case Statement::Kind::Return:
          break;
        case Statement::Kind::Cond:
          addEdge(st.id, entryOfLabel(st.thenLabel));
          addEdge(st.id, entryOfLabel(st.elseLabel));
          break;
        case Statement::Kind::Switch:
          for (const auto& [v, lbl] : st.cases) addEdge(st.id, entryOfLabel(lbl));
          addEdge(st.id, entryOfLabel(st.defaultLabel));
          break;
        default:
          if (!last) {
            addEdge(st.id, b.stmts[i + 1]);
          } else if (b.gotoTarget) {
            addEdge(st.id, entryOfLabel(*b.gotoTarget));
          } else if (bi + 1 < fn.blocks.size()) {
            addEdge(st.id, blockEntry(bi + 1));
          }
          break;
      }
    }
  }
  cfg.edges.assign(edges.begin(), edges.end());
  return cfg;
}

bool program_equal(const IrProgram& a, const IrProgram& b) {
  return serialize_ir(a) == serialize_ir(b);
}

}  // namespace secforge::ir
