#include "secforge/util.hpp"

#include <fstream>
#include <sstream>

#include "secforge/error.hpp"

namespace secforge {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AnalysisError(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AnalysisError(ErrorCode::Io, "cannot write " + path);
  out << content;
  if (!out) throw AnalysisError(ErrorCode::Io, "short write to " + path);
}

}  // namespace secforge
