#pragma once

#include <stdexcept>
#include <string>

namespace sguie {

/// Tensor dimensions do not line up for the requested operation.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A rectangle or index falls outside the tensor/image it refers to.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// API misuse: backward on a foreign tensor, optimizer without gradients, etc.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A semantic region too small to survive U-Net downsampling.
class DegenerateRegionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Region masks that overlap where the fusion step requires disjointness.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File decoding / parsing failures (images, masks, checkpoints, ledgers).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sguie
