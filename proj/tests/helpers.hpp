#pragma once

#include <string>

#include "secforge/util.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
  return std::string(SECFORGE_FIXTURES) + "/" + name;
}

inline std::string data_path(const std::string& name) {
  return std::string(SECFORGE_DATADIR) + "/" + name;
}

inline std::string fixture(const std::string& name) {
  return secforge::read_file(fixture_path(name));
}

}  // namespace testutil
