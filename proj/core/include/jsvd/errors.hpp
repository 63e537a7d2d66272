#pragma once

#include <stdexcept>
#include <string>

namespace jsvd {

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size mismatch between containers (fold/stack/matmul/conv chains).
class dimension_error : public error {
public:
    using error::error;
};

// Requested rank outside the admissible range, or an invalid rank split.
class rank_error : public error {
public:
    using error::error;
};

// Group members do not satisfy the compatibility rule of the chosen method.
class incompatibility_error : public error {
public:
    using error::error;
};

// Least-squares system is rank deficient beyond the accepted tolerance.
class rank_deficiency_error : public error {
public:
    using error::error;
};

// Iterative kernel failed to meet its internal tolerance.
class convergence_error : public error {
public:
    using error::error;
};

// Missing file, wrong payload size, refused overwrite, or failed write.
class io_error : public error {
public:
    using error::error;
};

// Manifest is not valid JSON or fails semantic validation.
class parse_error : public error {
public:
    using error::error;
};

// Compression target cannot be met even at rank 1 everywhere.
class infeasible_error : public error {
public:
    using error::error;
};

} // namespace jsvd
