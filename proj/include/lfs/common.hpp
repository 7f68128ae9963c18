#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfs {

// All failures surface as lfs::Error with a descriptive message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] inline void fail(const Args&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    throw Error(os.str());
}

template <typename... Args>
inline void require(bool cond, const Args&... parts) {
    if (!cond) fail(parts...);
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

}  // namespace lfs
