#include "mnmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mnmt/common.hpp"

namespace mnmt::num {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'M', 'N', 'M', 'T', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::Format, "truncated checkpoint " + path.string());
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                     const std::string& header_line) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());

  std::ofstream manifest(path.string() + ".manifest");
  if (!manifest) throw Error(ErrorCode::Io, "cannot write manifest for " + path.string());
  manifest << header_line << '\n';
  for (const auto& t : tensors) manifest << t.name << '\t' << shape_string(t.value.shape()) << '\n';
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[5];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::Format, path.string() + " is not an MNMT1 checkpoint");
  }
  const auto count = get<std::uint32_t>(in, path);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(ErrorCode::Format, "truncated checkpoint " + path.string());
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, path));
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw Error(ErrorCode::Format, "truncated checkpoint " + path.string());
    }
    tensors.push_back(NamedTensor{std::move(name), std::move(t)});
  }
  return tensors;
}

std::vector<NamedTensor> to_named(const ParameterSet& set, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const auto& p : set) out.push_back(NamedTensor{prefix + p.name, p.value});
  return out;
}

ParameterSet from_named(const std::vector<NamedTensor>& tensors, const std::string& prefix) {
  ParameterSet set;
  for (const auto& t : tensors) {
    if (t.name.starts_with(prefix)) set.add(t.name.substr(prefix.size()), t.value);
  }
  return set;
}

}  // namespace mnmt::num
