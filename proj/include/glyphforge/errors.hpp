#pragma once

#include <stdexcept>
#include <string>

namespace glyphforge {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define GLYPHFORGE_ERROR_TYPE(NAME) \
  struct NAME : Error {             \
    using Error::Error;             \
  }

GLYPHFORGE_ERROR_TYPE(OverlappingRegions);
GLYPHFORGE_ERROR_TYPE(CharsetMiss);
GLYPHFORGE_ERROR_TYPE(InvalidThresholds);
GLYPHFORGE_ERROR_TYPE(ShapeMismatch);
GLYPHFORGE_ERROR_TYPE(ParseError);
GLYPHFORGE_ERROR_TYPE(ValidationError);
GLYPHFORGE_ERROR_TYPE(IoFailure);
GLYPHFORGE_ERROR_TYPE(InfeasiblePlacement);
GLYPHFORGE_ERROR_TYPE(NonConvergence);
GLYPHFORGE_ERROR_TYPE(MissingEncoders);
GLYPHFORGE_ERROR_TYPE(PlaceholderMismatch);
GLYPHFORGE_ERROR_TYPE(LayoutMismatch);
GLYPHFORGE_ERROR_TYPE(InvalidSteps);
GLYPHFORGE_ERROR_TYPE(HashMismatch);
GLYPHFORGE_ERROR_TYPE(FrozenViolation);
GLYPHFORGE_ERROR_TYPE(NonFiniteLoss);
GLYPHFORGE_ERROR_TYPE(CovarianceRankError);
GLYPHFORGE_ERROR_TYPE(NonFiniteFeatures);
GLYPHFORGE_ERROR_TYPE(MissingImage);
GLYPHFORGE_ERROR_TYPE(EmptyPyramid);

#undef GLYPHFORGE_ERROR_TYPE

}  // namespace glyphforge
