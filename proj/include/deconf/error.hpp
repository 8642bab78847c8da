#pragma once

#include <stdexcept>
#include <string>

namespace deconf {

// A violated contract on the inputs of a library operation. The CLI maps it to
// exit code 1; usage errors are reported separately.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deconf
