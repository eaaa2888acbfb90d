#ifndef PIEZO_ERRORS_HPP
#define PIEZO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace piezo {

// Error taxonomy shared by the library and the C API:
// config/schema problems, mesh topology problems, numerical failures.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct MeshError : std::runtime_error {
    explicit MeshError(const std::string& m) : std::runtime_error(m) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

} // namespace piezo

#endif
