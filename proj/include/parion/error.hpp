#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace parion {

using cplx = std::complex<double>;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr cplx I{0.0, 1.0};

/** \brief Argument outside the region where a function is defined or representable. */
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/** \brief A quadrature, root finder or solver did not reach its tolerance. */
class numerical_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/** \brief Two independent evaluation paths disagree beyond tolerance. */
class data_quality_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline cplx checked(cplx z, const char *what)
{
    if (!finite(z))
        throw domain_error(std::string(what) + ": result not representable");
    return z;
}

} // namespace parion
