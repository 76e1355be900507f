#pragma once

#include <stdexcept>
#include <string>

namespace drillex {

/// Base of every error the engine raises. `kind()` is a stable machine-readable tag
/// (the service layer maps it onto HTTP status codes).
class Error : public std::runtime_error
{
  public:
    Error(std::string kind, const std::string &what)
        : std::runtime_error(what), kind_(std::move(kind)) { }

    const std::string &kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

#define DRILLEX_DECLARE_ERROR(Name)                                                                \
    class Name : public Error                                                                      \
    {                                                                                              \
      public:                                                                                      \
        explicit Name(const std::string &what) : Error(#Name, what) { }                            \
    };

DRILLEX_DECLARE_ERROR(FDViolationError)
DRILLEX_DECLARE_ERROR(AtLeafLevel)
DRILLEX_DECLARE_ERROR(UnknownHierarchy)
DRILLEX_DECLARE_ERROR(UnknownAttribute)
DRILLEX_DECLARE_ERROR(SchemaError)
DRILLEX_DECLARE_ERROR(EmptyDomain)
DRILLEX_DECLARE_ERROR(StaleAggs)
DRILLEX_DECLARE_ERROR(NoGroups)
DRILLEX_DECLARE_ERROR(NonFinite)
DRILLEX_DECLARE_ERROR(LengthMismatch)
DRILLEX_DECLARE_ERROR(ShapeMismatch)
DRILLEX_DECLARE_ERROR(BudgetExceeded)
DRILLEX_DECLARE_ERROR(DegenerateDesign)
DRILLEX_DECLARE_ERROR(SingularSigma)
DRILLEX_DECLARE_ERROR(UnknownGroup)
DRILLEX_DECLARE_ERROR(AllEmpty)
DRILLEX_DECLARE_ERROR(NoCandidates)
DRILLEX_DECLARE_ERROR(InvalidComplaint)
DRILLEX_DECLARE_ERROR(ParseError)
DRILLEX_DECLARE_ERROR(MissingColumn)
DRILLEX_DECLARE_ERROR(UnknownSession)

#undef DRILLEX_DECLARE_ERROR

} // namespace drillex
