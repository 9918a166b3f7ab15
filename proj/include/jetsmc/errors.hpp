#pragma once

#include <stdexcept>
#include <string>

namespace jetsmc {

/// Input exceeds a method's hard size limit (exact methods only).
class size_guard_error : public std::runtime_error {
public:
    explicit size_guard_error(const std::string& what) : std::runtime_error(what) {}
};

/// A search or sampler reached a state from which no valid tree can be built.
class dead_end_error : public std::runtime_error {
public:
    explicit dead_end_error(const std::string& what) : std::runtime_error(what) {}
};

/// Every particle in an SMC sweep died at the same rank.
class total_death_error : public dead_end_error {
public:
    explicit total_death_error(const std::string& what) : dead_end_error(what) {}
};

}  // namespace jetsmc
