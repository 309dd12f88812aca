#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geoact::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int dispatch(int argc, const char* const* argv);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// argv[0] is supplied.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoact::cli
