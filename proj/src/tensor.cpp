#include "wegpipe/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace wegpipe {
namespace {

int64_t checked_size(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
        n *= d;
    }
    return n;
}

} // namespace

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    buf_ = std::make_shared<std::vector<double>>(static_cast<size_t>(checked_size(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values) : shape_(std::move(shape)) {
    const int64_t n = checked_size(shape_);
    if (n != static_cast<int64_t>(values.size())) {
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         shape_to_string(shape_));
    }
    buf_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

int64_t Tensor::size() const { return buf_ ? static_cast<int64_t>(buf_->size()) : 0; }

double* Tensor::mutable_data() {
    if (!buf_) throw UsageError("mutable_data() on empty tensor");
    if (buf_.use_count() > 1) buf_ = std::make_shared<std::vector<double>>(*buf_);
    return buf_->data();
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    if (idx.size() != shape_.size()) throw ShapeError("index rank mismatch for shape " + shape_str());
    int64_t off = 0;
    size_t k = 0;
    for (int64_t i : idx) {
        if (i < 0 || i >= shape_[k]) throw ShapeError("index out of range for shape " + shape_str());
        off = off * shape_[k] + i;
        ++k;
    }
    return (*buf_)[static_cast<size_t>(off)];
}

void Tensor::set(std::initializer_list<int64_t> idx, double v) {
    if (idx.size() != shape_.size()) throw ShapeError("index rank mismatch for shape " + shape_str());
    int64_t off = 0;
    size_t k = 0;
    for (int64_t i : idx) {
        if (i < 0 || i >= shape_[k]) throw ShapeError("index out of range for shape " + shape_str());
        off = off * shape_[k] + i;
        ++k;
    }
    mutable_data()[off] = v;
}

double Tensor::item() const {
    if (size() != 1) throw UsageError("item() requires a 1-element tensor, shape is " + shape_str());
    return (*buf_)[0];
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
    if (checked_size(shape) != size()) {
        throw ShapeError("cannot reshape " + shape_str() + " to " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = buf_;
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

bool Tensor::all_finite() const {
    if (!buf_) return true;
    for (double v : *buf_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) {
    double* p = mutable_data();
    std::fill(p, p + size(), v);
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void put_le64(uint64_t bits, unsigned char out[8]) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
}

uint64_t get_le64(const unsigned char in[8]) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(in[i]) << (8 * i);
    return bits;
}

} // namespace

void write_tnsr(const std::string& path, const Tensor& t) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    std::string header = "TNSR 1 " + std::to_string(t.rank());
    for (int64_t d : t.shape()) header += " " + std::to_string(d);
    header += "\n";
    if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size()) {
        throw IoError("short write: " + path);
    }
    std::vector<unsigned char> buf(static_cast<size_t>(t.size()) * 8);
    const double* v = t.data();
    for (int64_t i = 0; i < t.size(); ++i) put_le64(std::bit_cast<uint64_t>(v[i]), &buf[i * 8]);
    if (!buf.empty() && std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size()) {
        throw IoError("short write: " + path);
    }
}

Tensor read_tnsr(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open for reading: " + path);
    std::string header;
    int ch;
    while ((ch = std::fgetc(f.get())) != EOF && ch != '\n') {
        header.push_back(static_cast<char>(ch));
        if (header.size() > 4096) throw FormatError("oversized TNSR header in " + path);
    }
    std::istringstream is(header);
    std::string magic;
    int version = 0;
    int64_t rank = -1;
    is >> magic >> version >> rank;
    if (!is || magic != "TNSR" || version != 1 || rank < 0 || rank > 8) {
        throw FormatError("bad TNSR header in " + path);
    }
    std::vector<int64_t> shape(static_cast<size_t>(rank));
    int64_t n = 1;
    for (auto& d : shape) {
        is >> d;
        if (!is || d <= 0) throw FormatError("bad TNSR dimensions in " + path);
        n *= d;
    }
    std::vector<unsigned char> raw(static_cast<size_t>(n) * 8);
    if (std::fread(raw.data(), 1, raw.size(), f.get()) != raw.size()) {
        throw FormatError("truncated TNSR payload in " + path);
    }
    std::vector<double> values(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) values[i] = std::bit_cast<double>(get_le64(&raw[i * 8]));
    return Tensor(std::move(shape), std::move(values));
}

} // namespace wegpipe
