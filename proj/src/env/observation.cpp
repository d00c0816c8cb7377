#include "embsim/env/observation.hpp"

#include "embsim/error.hpp"

#include <cstring>

namespace embsim {

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::U8: return 1;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown tensor element type");
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> shape, std::span<const float> values) {
  Tensor t{DType::F32, std::move(shape), {}};
  t.bytes.resize(values.size() * 4);
  if (!values.empty()) std::memcpy(t.bytes.data(), values.data(), t.bytes.size());
  t.validate();
  return t;
}

Tensor Tensor::from_f64(std::vector<std::uint32_t> shape, std::span<const double> values) {
  std::vector<float> f(values.begin(), values.end());
  return from_f32(std::move(shape), f);
}

Tensor Tensor::from_u8(std::vector<std::uint32_t> shape, std::span<const std::uint8_t> values) {
  Tensor t{DType::U8, std::move(shape), {values.begin(), values.end()}};
  t.validate();
  return t;
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : shape) n *= d;
  return n;
}

std::vector<float> Tensor::to_f32() const {
  std::vector<float> out(element_count());
  if (dtype == DType::F32) {
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * 4);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[i];
  }
  return out;
}

void Tensor::validate() const {
  if (element_count() * dtype_size(dtype) != bytes.size()) {
    throw Error(ErrorCode::InvalidArgument, "tensor payload does not match its shape");
  }
}

void ObservationFrame::add(std::string key, Tensor tensor) {
  if (contains(key)) throw Error(ErrorCode::InvalidArgument, "duplicate observation key " + key);
  entries_.emplace_back(std::move(key), std::move(tensor));
}

const Tensor* ObservationFrame::find(const std::string& key) const {
  for (const auto& [k, t] : entries_) {
    if (k == key) return &t;
  }
  return nullptr;
}

const Tensor& ObservationFrame::at(const std::string& key) const {
  const Tensor* t = find(key);
  if (!t) throw Error(ErrorCode::NotFound, "no observation key " + key);
  return *t;
}

std::vector<std::string> ObservationFrame::keys() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

}  // namespace embsim
