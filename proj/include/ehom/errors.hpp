#ifndef EHOM_ERRORS_HPP
#define EHOM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ehom {

/// Base class for all toolkit errors. Carries the name of the module that
/// raised it so batch drivers can report provenance.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}
    const std::string& module() const { return module_; }

private:
    std::string module_;
};

#define EHOM_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                   \
    public:                                                       \
        Name(std::string module, const std::string& what)         \
            : Error(std::move(module), what) {}                   \
    }

// geometry / coefficients
EHOM_DEFINE_ERROR(OverlapError);
EHOM_DEFINE_ERROR(DisconnectedMatrixError);
EHOM_DEFINE_ERROR(EllipticityError);
EHOM_DEFINE_ERROR(SupportError);

// cell solver
EHOM_DEFINE_ERROR(NonNeutralChargeError);
EHOM_DEFINE_ERROR(ConvergenceError);
EHOM_DEFINE_ERROR(ContrastError);

// effective tensors
EHOM_DEFINE_ERROR(BoundViolationError);
EHOM_DEFINE_ERROR(FormulaMismatchError);
EHOM_DEFINE_ERROR(NegativeKappaError);

// macro / fine solvers
EHOM_DEFINE_ERROR(SingularSystemError);
EHOM_DEFINE_ERROR(GridMismatchError);
EHOM_DEFINE_ERROR(MemoryBudgetError);

// studies
EHOM_DEFINE_ERROR(ResolutionError);
EHOM_DEFINE_ERROR(FitError);

// configuration
EHOM_DEFINE_ERROR(ConfigError);

#undef EHOM_DEFINE_ERROR

} // namespace ehom

#endif
