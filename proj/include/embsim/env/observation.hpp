#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace embsim {

enum class DType : std::uint8_t { F32 = 0, U8 = 1 };

std::size_t dtype_size(DType t);

/// Row-major tensor with a little-endian byte payload.
struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::uint32_t> shape;
  std::vector<std::uint8_t> bytes;

  static Tensor from_f32(std::vector<std::uint32_t> shape, std::span<const float> values);
  static Tensor from_f64(std::vector<std::uint32_t> shape, std::span<const double> values);
  static Tensor from_u8(std::vector<std::uint32_t> shape, std::span<const std::uint8_t> values);

  std::size_t element_count() const;
  std::vector<float> to_f32() const;
  /// Throws InvalidArgument when the payload size disagrees with the shape.
  void validate() const;

  bool operator==(const Tensor&) const = default;
};

/// Keyed observation tensors in insertion order.
class ObservationFrame {
 public:
  void add(std::string key, Tensor tensor);
  const Tensor* find(const std::string& key) const;
  const Tensor& at(const std::string& key) const;
  bool contains(const std::string& key) const { return find(key) != nullptr; }
  std::vector<std::string> keys() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const ObservationFrame&) const = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace embsim
