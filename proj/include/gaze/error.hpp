#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gaze {

enum class ErrorCode {
  // imaging
  MalformedHeader,
  TruncatedPixelData,
  UnsupportedMaxval,
  UnsupportedGlyph,
  UnrecognizedGlyph,
  RegionOutOfBounds,
  // geometry / layout
  EmptyLayout,
  NoCellsFound,
  CalibrationMismatch,
  TooManyParticipants,
  LengthMismatch,
  // facedet
  MalformedRow,
  NoIntersection,
  // nn
  ShapeMismatch,
  EmptyDataset,
  BadMagic,
  VersionMismatch,
  TruncatedData,
  // dataset
  HeadOutOfFrame,
  EmptySplit,
  // eval
  Empty,
  // runtime
  DiskFull,
  NonWritable,
  BindFailure,
  // shared
  InvalidArgument,
  MalformedConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gaze
