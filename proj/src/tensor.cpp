#include "lfsal/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace lfsal {

namespace {

std::int64_t checked_count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
  }
  std::int64_t n = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] <= 0) {
      throw ShapeError("tensor axis " + std::to_string(i) + " must be positive, got " +
                       std::to_string(shape[i]));
    }
    n *= shape[i];
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(checked_count(shape_)), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t;
  const std::int64_t n = checked_count(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape product " + std::to_string(n));
  }
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = std::max(m, v);
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
  if (a.same_shape(b)) return;
  throw ShapeError(std::string(context) + ": shapes " + a.shape_string() + " and " +
                   b.shape_string() + " differ");
}

// --- serialization ------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

}  // namespace

void write_tensor_record(std::ostream& out, const std::string& name, const Tensor& t,
                         Dtype dtype) {
  nlohmann::json header;
  header["name"] = name;
  header["dtype"] = dtype_name(dtype);
  header["shape"] = t.shape();
  out << header.dump() << '\n';
  if (dtype == Dtype::f32) {
    std::vector<float> buf(static_cast<std::size_t>(t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing tensor record '" + name + "'");
}

std::optional<TensorRecord> read_tensor_record(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    if (in.eof()) return std::nullopt;
    throw IoError("failed reading tensor record header");
  }
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.contains("name") || !header.contains("dtype") ||
      !header.contains("shape")) {
    throw IoError("malformed tensor record header: " + line);
  }
  TensorRecord rec;
  rec.name = header["name"].get<std::string>();
  const std::string dt = header["dtype"].get<std::string>();
  if (dt == "f32") {
    rec.dtype = Dtype::f32;
  } else if (dt == "f64") {
    rec.dtype = Dtype::f64;
  } else {
    throw IoError("unsupported dtype '" + dt + "' in tensor record '" + rec.name + "'");
  }
  std::vector<int> shape = header["shape"].get<std::vector<int>>();
  Tensor t(shape);
  if (rec.dtype == Dtype::f32) {
    std::vector<float> buf(static_cast<std::size_t>(t.size()));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
      throw IoError("truncated payload in tensor record '" + rec.name + "'");
    }
    for (std::size_t i = 0; i < buf.size(); ++i) t[static_cast<std::int64_t>(i)] = buf[i];
  } else {
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(double))) {
      throw IoError("truncated payload in tensor record '" + rec.name + "'");
    }
  }
  rec.tensor = std::move(t);
  return rec;
}

}  // namespace lfsal
