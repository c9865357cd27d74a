#include "ntkspec/error.hpp"

namespace ntkspec {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::Dimension: return "dimension mismatch";
        case ErrorKind::Asymmetry: return "asymmetric matrix";
        case ErrorKind::Degenerate: return "degenerate input";
        case ErrorKind::Precondition: return "precondition violated";
        case ErrorKind::Config: return "configuration error";
        case ErrorKind::Numerical: return "numerical failure";
    }
    return "unknown error";
}

}  // namespace ntkspec
