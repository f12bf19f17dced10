#pragma once
/// \file errors.hpp
/// Exception hierarchy.  Every failure maps to one of three classes that the
/// command-line driver turns into distinct exit codes.

#include <stdexcept>
#include <string>

#include "kam/fourier.hpp"

namespace kam {

enum class ErrorClass { Config, Exclusion, Numeric };

class KamError : public std::runtime_error {
public:
    KamError(ErrorClass c, const std::string& what) : std::runtime_error(what), class_(c) {}
    ErrorClass error_class() const { return class_; }

private:
    ErrorClass class_;
};

/// A small divisor |<k,w>| (or a Melnikov combination) fell below its floor:
/// the parameter must be excluded.
class SmallDivisor : public KamError {
public:
    SmallDivisor(const Index& k, double value, double floor);
    Index k;
    double value;
    double floor;
};

/// A lattice operator is too ill-conditioned to invert: parameter exclusion.
class NearSingular : public KamError {
public:
    NearSingular(const std::string& what, double rcond)
        : KamError(ErrorClass::Exclusion, what), rcond(rcond) {}
    double rcond;
};

/// A certificate or coupling step cannot be produced (hypotheses unmet).
class CertificateRefused : public KamError {
public:
    explicit CertificateRefused(const std::string& what) : KamError(ErrorClass::Numeric, what) {}
};

/// Configuration errors (parse failures, constraint violations).
class ConfigError : public KamError {
public:
    explicit ConfigError(const std::string& what) : KamError(ErrorClass::Config, what) {}
};

}  // namespace kam
