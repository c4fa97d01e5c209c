#pragma once

#include <stdexcept>
#include <string>

namespace pqi {

/// Bad input: wrong shapes, out-of-range parameters, unknown names.
/// The CLI maps these to exit code 2.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its postcondition.
/// The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class NonConvergence : public NumericalError {
public:
    NonConvergence(int iterations, double residual)
        : NumericalError("NonConvergence",
                         "no convergence after " + std::to_string(iterations) +
                             " iterations, residual " + std::to_string(residual)),
          iterations(iterations), residual(residual) {}
    int iterations;
    double residual;
};

class NotContracting : public NumericalError {
public:
    NotContracting(int iterations, double kappa)
        : NumericalError("NotContracting",
                         "fixed-point map expanded for 3 consecutive iterations (kappa " +
                             std::to_string(kappa) + ")"),
          iterations(iterations), kappa(kappa) {}
    int iterations;
    double kappa;
};

class IllConditionedFit : public NumericalError {
public:
    explicit IllConditionedFit(const std::string& what) : NumericalError("IllConditionedFit", what) {}
};

class GradientVanishes : public NumericalError {
public:
    explicit GradientVanishes(const std::string& what) : NumericalError("GradientVanishes", what) {}
};

class SymbolSingular : public NumericalError {
public:
    explicit SymbolSingular(const std::string& what) : NumericalError("SymbolSingular", what) {}
};

class SingularOperator : public NumericalError {
public:
    explicit SingularOperator(const std::string& what) : NumericalError("SingularOperator", what) {}
};

class NonPositiveSigma : public InvalidArgument {
public:
    explicit NonPositiveSigma(const std::string& what) : InvalidArgument("NonPositiveSigma: " + what) {}
};

class ZeroXi : public InvalidArgument {
public:
    ZeroXi() : InvalidArgument("ZeroXi: frequency must be nonzero") {}
};

class NonSymmetricH : public InvalidArgument {
public:
    NonSymmetricH() : InvalidArgument("NonSymmetricH: H must satisfy H^T = H") {}
};

class UnknownPhantom : public InvalidArgument {
public:
    explicit UnknownPhantom(const std::string& name) : InvalidArgument("UnknownPhantom: " + name) {}
};

}  // namespace pqi
