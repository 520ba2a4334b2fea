#include "lungforge/errors.hpp"

namespace lungforge {

void throw_parameter(const std::string& what) { throw ParameterError(what); }

void throw_dimension(const std::string& what) { throw DimensionError(what); }

}  // namespace lungforge
