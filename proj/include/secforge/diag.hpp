#pragma once

#include <string>
#include <vector>

namespace secforge {

struct Diag {
  enum class Severity { Note, Warning, Error };
  Severity severity = Severity::Warning;
  std::string code;
  std::string message;
};

using Diags = std::vector<Diag>;

inline void diag_note(Diags* out, const std::string& code, const std::string& msg) {
  if (out) out->push_back({Diag::Severity::Note, code, msg});
}
inline void diag_warn(Diags* out, const std::string& code, const std::string& msg) {
  if (out) out->push_back({Diag::Severity::Warning, code, msg});
}

}  // namespace secforge
