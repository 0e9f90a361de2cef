#pragma once

#include <stdexcept>
#include <string>

namespace tvr {

/// Base of every error raised by the library. Each subclass names the stage
/// that failed so callers (the CLI in particular) can map them to diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Block side does not evenly tile the image.
class TilingError : public Error {
 public:
  using Error::Error;
};

/// Tensors of incompatible shape were combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside its permitted domain (non-binary mask entry,
/// intensity outside [0,1], bad configuration value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for quartile statistics.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

/// A (channel, block) reference outside the tiling.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// The external generator failed to honour the file bridge protocol.
class BridgeError : public Error {
 public:
  using Error::Error;
};

/// Patches could not be placed inside the image without overlap.
class PlacementError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tvr
