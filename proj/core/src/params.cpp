#include "laqsum/params.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "laqsum/errors.hpp"

namespace laqsum {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'Q', 'S', 'C', 'K', 'P', 'T'};

template <typename V>
void write_pod(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is, const std::string& path) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw DataError(path + ": truncated checkpoint");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& path) {
  const auto n = read_pod<std::uint64_t>(is, path);
  if (n > (1ull << 32)) throw DataError(path + ": corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw DataError(path + ": truncated checkpoint");
  return s;
}

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

}  // namespace

template <typename T>
Tensor<T>& ModelParams<T>::add(const std::string& name, Tensor<T> value) {
  if (index_.count(name)) throw InvariantError("duplicate parameter name '" + name + "'");
  value.node()->requires_grad = true;
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

template <typename T>
Tensor<T>& ModelParams<T>::add_uniform(const std::string& name, const Shape& shape, T bound,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  std::vector<T> values(ad::shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return add(name, Tensor<T>::from(shape, std::move(values), true));
}

template <typename T>
Tensor<T>& ModelParams<T>::add_constant(const std::string& name, const Shape& shape, T value) {
  return add(name, Tensor<T>::full(shape, value, true));
}

template <typename T>
Tensor<T>& ModelParams<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvariantError("unknown parameter '" + name + "'");
  return tensors_[it->second];
}

template <typename T>
const Tensor<T>& ModelParams<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvariantError("unknown parameter '" + name + "'");
  return tensors_[it->second];
}

template <typename T>
std::size_t ModelParams<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

template class ModelParams<float>;
template class ModelParams<double>;

template <typename T>
StoredTensor StoredTensor::from_values(const std::string& name, const Shape& shape, std::span<const T> values) {
  StoredTensor st;
  st.name = name;
  st.shape = shape;
  st.dtype = sizeof(T) == 4 ? DType::f32 : DType::f64;
  st.bytes.resize(values.size() * sizeof(T));
  std::memcpy(st.bytes.data(), values.data(), st.bytes.size());
  return st;
}

template <typename T>
std::vector<T> StoredTensor::values() const {
  const std::size_t n = bytes.size() / dtype_size(dtype);
  std::vector<T> out(n);
  if (dtype == DType::f32) {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, bytes.data() + i * 4, 4);
      out[i] = static_cast<T>(f);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      std::memcpy(&d, bytes.data() + i * 8, 8);
      out[i] = static_cast<T>(d);
    }
  }
  return out;
}

template StoredTensor StoredTensor::from_values(const std::string&, const Shape&, std::span<const float>);
template StoredTensor StoredTensor::from_values(const std::string&, const Shape&, std::span<const double>);
template std::vector<float> StoredTensor::values() const;
template std::vector<double> StoredTensor::values() const;

const StoredTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
void Checkpoint::put_params(const ModelParams<T>& params, const std::string& prefix) {
  for (const auto& name : params.names()) {
    const auto& t = params.get(name);
    tensors.push_back(StoredTensor::from_values<T>(prefix + name, t.shape(), t.data()));
  }
}

template <typename T>
void Checkpoint::load_params(ModelParams<T>& params, const std::string& prefix) const {
  std::unordered_map<std::string, const StoredTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (const auto& name : params.names()) {
    auto it = by_name.find(prefix + name);
    if (it == by_name.end()) throw DataError("checkpoint lacks tensor '" + prefix + name + "'");
    auto& dst = params.get(name);
    if (it->second->shape != dst.shape()) {
      throw DataError("checkpoint tensor '" + prefix + name + "' has shape " + ad::shape_str(it->second->shape) +
                      ", model expects " + ad::shape_str(dst.shape()));
    }
    const auto values = it->second->template values<T>();
    std::copy(values.begin(), values.end(), dst.mutable_data().begin());
  }
}

template void Checkpoint::put_params(const ModelParams<float>&, const std::string&);
template void Checkpoint::put_params(const ModelParams<double>&, const std::string&);
template void Checkpoint::load_params(ModelParams<float>&, const std::string&) const;
template void Checkpoint::load_params(ModelParams<double>&, const std::string&) const;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + tmp + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(os, Checkpoint::kVersion);
    write_pod<std::uint64_t>(os, ckpt.meta.size());
    for (const auto& [k, v] : ckpt.meta) {
      write_string(os, k);
      write_string(os, v);
    }
    write_pod<std::uint64_t>(os, ckpt.tensors.size());
    for (const auto& t : ckpt.tensors) {
      write_string(os, t.name);
      write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
      for (int d : t.shape) write_pod<std::int64_t>(os, d);
      write_pod<std::uint64_t>(os, t.bytes.size());
      os.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
    }
    if (!os) throw DataError("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path + ": not a checkpoint file");
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != Checkpoint::kVersion) {
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_meta = read_pod<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(is, path);
    ckpt.meta[k] = read_string(is, path);
  }
  const auto n_tensors = read_pod<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    StoredTensor t;
    t.name = read_string(is, path);
    const auto dtype = read_pod<std::uint8_t>(is, path);
    if (dtype != 1 && dtype != 2) throw DataError(path + ": bad dtype for '" + t.name + "'");
    t.dtype = static_cast<DType>(dtype);
    const auto rank = read_pod<std::uint32_t>(is, path);
    if (rank > 8) throw DataError(path + ": bad rank for '" + t.name + "'");
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<int>(read_pod<std::int64_t>(is, path)));
    const auto nbytes = read_pod<std::uint64_t>(is, path);
    if (nbytes != ad::shape_numel(t.shape) * dtype_size(t.dtype)) {
      throw DataError(path + ": size mismatch for '" + t.name + "'");
    }
    t.bytes.resize(nbytes);
    is.read(reinterpret_cast<char*>(t.bytes.data()), static_cast<std::streamsize>(nbytes));
    if (!is) throw DataError(path + ": truncated checkpoint");
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace laqsum
