#pragma once

#include "stcids/common.hpp"

namespace stcids::cli {

struct KindMismatch : Error {
    using Error::Error;
};

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 success, 2 configuration error, 1 runtime error.
int run(int argc, const char* const* argv);

}  // namespace stcids::cli
