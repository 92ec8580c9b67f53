#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wegpipe/common.hpp"

namespace wegpipe {

// Dense row-major double tensor. Storage is shared copy-on-write so that
// passing model weights into per-image compute graphs costs nothing;
// mutable_data() detaches when the buffer is aliased.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const;
    bool empty() const { return !buf_; }

    const double* data() const { return buf_ ? buf_->data() : nullptr; }
    double* mutable_data();

    double at(std::initializer_list<int64_t> idx) const;
    void set(std::initializer_list<int64_t> idx, double v);
    double item() const; // value of a 1-element tensor

    // Same buffer, new shape; element count must match.
    Tensor reshaped(std::vector<int64_t> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;
    bool all_finite() const;

    void fill(double v);

private:
    std::vector<int64_t> shape_;
    std::shared_ptr<std::vector<double>> buf_;
};

std::string shape_to_string(const std::vector<int64_t>& shape);

// "TNSR v1" container: ASCII header `TNSR 1 <rank> <d1> ... <dk>\n` followed
// by the elements as little-endian 64-bit floats, row-major.
void write_tnsr(const std::string& path, const Tensor& t);
Tensor read_tnsr(const std::string& path);

} // namespace wegpipe
