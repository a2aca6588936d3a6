#pragma once

#include <stdexcept>
#include <string>

namespace skelbench {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// I/O and decoding
struct IoError : Error { using Error::Error; };
struct DecodeError : Error { using Error::Error; };

// Geometry / masks
struct DimensionMismatch : Error { using Error::Error; };
struct EmptyMaskError : Error { using Error::Error; };

// Tensors / networks
struct ShapeMismatch : Error { using Error::Error; };
struct OddSpatialDims : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// Metrics
struct AllRejected : Error { using Error::Error; };

// Datasets
struct MissingPair : Error { using Error::Error; };
struct EmptyDirectory : Error { using Error::Error; };
struct DegenerateSplit : Error { using Error::Error; };
struct GenerationFailure : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// Model files
struct ModelFileError : Error { using Error::Error; };
struct BadMagic : ModelFileError { using ModelFileError::ModelFileError; };

} // namespace skelbench
