#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpr {

using index_t = std::int64_t;
using Shape = std::vector<index_t>;

// Exit-code mapping for the CLI: config 2, data 3, numeric 4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Shape/dimension mismatches are configuration-level failures.
struct dimension_error : config_error {
    using config_error::config_error;
};

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

inline index_t numel(const Shape& s) {
    index_t n = 1;
    for (index_t e : s) n *= e;
    return n;
}

template <typename T>
inline const char* dtype_name() {
    if constexpr (sizeof(T) == 4) return "f32";
    else return "f64";
}

template <typename T>
inline void check_finite(const std::vector<T>& data, const char* op_name) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(static_cast<double>(data[i]))) {
            std::ostringstream os;
            os << op_name << ": non-finite value at flat index " << i;
            throw numeric_error(os.str());
        }
    }
}

}  // namespace vpr
