// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/checkpoint.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"

#include <bit>
#include <cstring>

namespace msdnet {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'D', 'N'};

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t> &out, T value)
{
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader
{
public:
  explicit Reader(std::span<std::uint8_t const> bytes)
    : bytes_(bytes)
  {
  }

  template <class T>
  T get(char const *what)
  {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<std::uint8_t const> take(std::size_t n, char const *what)
  {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool        done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

private:
  void need(std::size_t n, char const *what) const
  {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
  }

  std::span<std::uint8_t const> bytes_;
  std::size_t                   pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_checkpoint(ModelState const &state)
{
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  for (auto const &[name, t] : state.tensors()) {
    put<std::uint64_t>(out, name.size());
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rank()));
    for (Index e : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    for (Index i = 0; i < t.numel(); ++i) put<double>(out, t.values()[i]);
  }
  return out;
}

ModelState decode_checkpoint(std::span<std::uint8_t const> bytes)
{
  Reader r(bytes);
  auto   magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ParseError("not a checkpoint: bad magic", 0);
  std::size_t const   version_at = r.pos();
  std::uint32_t const version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
                       std::to_string(kCheckpointVersion) + ")",
                     version_at);
  }

  ModelState state;
  while (!r.done()) {
    std::size_t const   record_at = r.pos();
    std::uint64_t const name_len = r.get<std::uint64_t>("name length");
    if (name_len == 0 || name_len > 4096) throw ParseError("implausible tensor name length", record_at);
    auto const        name_bytes = r.take(name_len, "tensor name");
    std::string const name(name_bytes.begin(), name_bytes.end());
    std::uint64_t const rank = r.get<std::uint64_t>("rank");
    if (rank > 8) throw ParseError("implausible rank for '" + name + "'", r.pos() - 8);
    Shape       shape;
    std::uint64_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      std::uint64_t const e = r.get<std::uint64_t>("extent");
      if (e > (std::uint64_t{1} << 32)) throw ParseError("implausible extent for '" + name + "'", r.pos() - 8);
      count *= e;
      if (count > (std::uint64_t{1} << 32)) throw ParseError("tensor '" + name + "' too large", r.pos() - 8);
      shape.push_back(static_cast<Index>(e));
    }
    auto const payload = r.take(count * sizeof(double), "tensor payload");
    Vector     v(static_cast<Index>(count));
    std::memcpy(v.data(), payload.data(), payload.size());
    if (state.contains(name)) throw ParseError("duplicate tensor '" + name + "'", record_at);
    state.add(name, Tensor(std::move(shape), std::move(v)));
  }
  if (state.size() == 0) throw ParseError("checkpoint holds no tensors", r.pos());
  return state;
}

void checkpoint_save(ModelState const &state, std::filesystem::path const &path)
{
  write_file(path, encode_checkpoint(state));
}

ModelState checkpoint_load(std::filesystem::path const &path)
{
  auto const bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (ParseError const &e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

} // namespace msdnet
