#pragma once

#include <stdexcept>
#include <string>

namespace nix {

#ifdef NIX_SCALAR_DOUBLE
using real = double;
#else
using real = float;
#endif

struct InvalidDimensions : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CoverageUnsatisfiable : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyDataset : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceDetected : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ImageTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadInputSize : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigInvalid : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nix
