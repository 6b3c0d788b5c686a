#pragma once

#include <stdexcept>
#include <string>

namespace voxcim {

// Base of every error the library throws. Callers that only care about
// "something in voxcim went wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define VOXCIM_DEFINE_ERROR(Name)                   \
  class Name : public Error {                       \
   public:                                          \
    explicit Name(const std::string& what)          \
        : Error(std::string(#Name ": ") + what) {}  \
  };

VOXCIM_DEFINE_ERROR(DuplicateVoxel)
VOXCIM_DEFINE_ERROR(InvalidShape)
VOXCIM_DEFINE_ERROR(InvalidKernel)
VOXCIM_DEFINE_ERROR(UnsupportedSymmetry)
VOXCIM_DEFINE_ERROR(UnsupportedVariant)
VOXCIM_DEFINE_ERROR(TableMismatch)
VOXCIM_DEFINE_ERROR(InvalidPartition)
VOXCIM_DEFINE_ERROR(InvalidBufferConfig)
VOXCIM_DEFINE_ERROR(ShapeError)
VOXCIM_DEFINE_ERROR(MapIndexError)
VOXCIM_DEFINE_ERROR(OracleScaleError)
VOXCIM_DEFINE_ERROR(CapacityError)
VOXCIM_DEFINE_ERROR(BudgetError)
VOXCIM_DEFINE_ERROR(ConfigError)
VOXCIM_DEFINE_ERROR(FormatError)
VOXCIM_DEFINE_ERROR(InvariantViolation)

#undef VOXCIM_DEFINE_ERROR

}  // namespace voxcim
