#include "gaze/error.hpp"

namespace gaze {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedPixelData: return "TruncatedPixelData";
    case ErrorCode::UnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorCode::UnsupportedGlyph: return "UnsupportedGlyph";
    case ErrorCode::UnrecognizedGlyph: return "UnrecognizedGlyph";
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::EmptyLayout: return "EmptyLayout";
    case ErrorCode::NoCellsFound: return "NoCellsFound";
    case ErrorCode::CalibrationMismatch: return "CalibrationMismatch";
    case ErrorCode::TooManyParticipants: return "TooManyParticipants";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::HeadOutOfFrame: return "HeadOutOfFrame";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::DiskFull: return "DiskFull";
    case ErrorCode::NonWritable: return "NonWritable";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace gaze
