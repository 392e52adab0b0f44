#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sgdyn {

// Caller violated an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Evaluation point lies outside the approximation box. Callers clamp first.
class OutOfDomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Economic quantity left its admissible region (k <= 0, lambda <= 0, ...).
class ModelDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class PointSolveError : public std::runtime_error {
public:
    PointSolveError(const std::string& what, std::vector<double> state, double residual_norm)
        : std::runtime_error(what), state_(std::move(state)), residual_norm_(residual_norm) {}

    const std::vector<double>& state() const noexcept { return state_; }
    double residual_norm() const noexcept { return residual_norm_; }

private:
    std::vector<double> state_;
    double residual_norm_;
};

// Linear rational-expectations system has the wrong number of stable roots.
class BlanchardKahnError : public std::runtime_error {
public:
    BlanchardKahnError(const std::string& what, int stable_roots, int predetermined)
        : std::runtime_error(what), stable_roots_(stable_roots), predetermined_(predetermined) {}

    int stable_roots() const noexcept { return stable_roots_; }
    int predetermined() const noexcept { return predetermined_; }

private:
    int stable_roots_;
    int predetermined_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sgdyn
