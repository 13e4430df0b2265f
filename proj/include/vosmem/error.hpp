#pragma once

#include <stdexcept>
#include <string>

namespace vosmem {

/// Raised for every contract violation and runtime failure in the library.
class Error : public std::runtime_error {
  public:
	using std::runtime_error::runtime_error;
};

} // namespace vosmem
