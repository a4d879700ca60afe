#pragma once

#include <stdexcept>
#include <string>

namespace hyalign {

// Unreadable/unwritable files, malformed image or sidecar data.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, domain violations inside numeric kernels.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace hyalign
