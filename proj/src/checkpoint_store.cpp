#include "flf/checkpoint_store.hpp"

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <string>

namespace flf {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'F', 'C'};
constexpr std::size_t kHeaderSize = 8;
constexpr std::size_t kIndexEntrySize = 8 + 8 + 8 + 4;

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_f32(std::vector<unsigned char>& b, float v) { put_u32(b, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<unsigned char>& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{p_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{p_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw CheckpointError("checkpoint record truncated");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> header_bytes() {
  std::vector<unsigned char> b(kMagic, kMagic + 4);
  put_u32(b, CheckpointStore::kFormatVersion);
  return b;
}

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

std::string errno_text() { return std::strerror(errno); }

void write_all(std::FILE* f, const std::vector<unsigned char>& bytes, const std::filesystem::path& p) {
  if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size())
    throw CheckpointError("write to " + p.string() + " failed: " + errno_text());
}

void sync(std::FILE* f, const std::filesystem::path& p) {
  if (std::fflush(f) != 0 || ::fsync(::fileno(f)) != 0)
    throw CheckpointError("fsync of " + p.string() + " failed: " + errno_text());
}

std::vector<unsigned char> read_file(const std::filesystem::path& p,
                                     std::size_t limit = static_cast<std::size_t>(-1)) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  if (!f) throw CheckpointError("cannot open " + p.string() + ": " + errno_text());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  std::size_t n;
  while (bytes.size() < limit && (n = std::fread(buf, 1, std::min(sizeof buf, limit - bytes.size()), f)) > 0)
    bytes.insert(bytes.end(), buf, buf + n);
  std::fclose(f);
  return bytes;
}

void check_header(const std::vector<unsigned char>& bytes, const std::filesystem::path& p) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw CheckpointError(p.string() + ": not a checkpoint file (bad magic)");
  Reader r(bytes.data() + 4, 4);
  const auto version = r.u32();
  if (version != CheckpointStore::kFormatVersion)
    throw CheckpointError(p.string() + ": unsupported format version " + std::to_string(version));
}

std::vector<unsigned char> encode(const Checkpoint& cp) {
  std::vector<unsigned char> b;
  b.reserve(record_size(cp.param_count(), cp.updates.size()));
  put_u64(b, cp.round);
  put_f64(b, cp.lr);
  put_u64(b, cp.param_count());
  for (float v : cp.global_model) put_f32(b, v);
  put_u32(b, static_cast<std::uint32_t>(cp.updates.size()));
  for (const auto& u : cp.updates) {
    put_u32(b, u.client);
    for (float v : u.values) put_f32(b, v);
  }
  return b;
}

Checkpoint decode(const unsigned char* p, std::size_t n) {
  Reader r(p, n);
  Checkpoint cp;
  cp.round = r.u64();
  cp.lr = r.f64();
  const auto params = r.u64();
  if (params > r.remaining() / 4) throw CheckpointError("checkpoint record: parameter count exceeds record");
  cp.global_model.resize(params);
  for (auto& v : cp.global_model) v = r.f32();
  const auto count = r.u32();
  if (count > 0 && (params * 4 + 4) * count > r.remaining())
    throw CheckpointError("checkpoint record: client count exceeds record");
  cp.updates.resize(count);
  for (auto& u : cp.updates) {
    u.client = r.u32();
    u.values.resize(params);
    for (auto& v : u.values) v = r.f32();
  }
  if (r.remaining() != 0) throw CheckpointError("checkpoint record: trailing bytes");
  return cp;
}

}  // namespace

std::vector<ClientId> Checkpoint::selected() const {
  std::vector<ClientId> ids;
  ids.reserve(updates.size());
  for (const auto& u : updates) ids.push_back(u.client);
  return ids;
}

void Checkpoint::validate() const {
  if (!(std::isfinite(lr) && lr > 0.0)) throw std::invalid_argument("checkpoint: learning rate must be positive");
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i].values.size() != global_model.size())
      throw DimensionError("checkpoint: update length differs from the model length");
    if (i > 0 && updates[i].client <= updates[i - 1].client)
      throw std::invalid_argument("checkpoint: client ids must be strictly increasing");
  }
}

std::size_t record_size(std::size_t param_count, std::size_t num_selected) {
  return 8 + 8 + 8 + 4 * param_count + 4 + num_selected * (4 + 4 * param_count);
}

void CheckpointStore::FileCloser::operator()(std::FILE* f) const {
  if (f) std::fclose(f);
}

std::filesystem::path CheckpointStore::index_path(const std::filesystem::path& base) {
  auto p = base;
  p += ".idx";
  return p;
}

CheckpointStore::CheckpointStore(std::filesystem::path base) : base_(std::move(base)) {}
CheckpointStore::CheckpointStore(CheckpointStore&&) noexcept = default;
CheckpointStore& CheckpointStore::operator=(CheckpointStore&&) noexcept = default;
CheckpointStore::~CheckpointStore() = default;

CheckpointStore CheckpointStore::create(const std::filesystem::path& base) {
  CheckpointStore store(base);
  store.data_.reset(std::fopen(base.c_str(), "wb"));
  if (!store.data_) throw CheckpointError("cannot create " + base.string() + ": " + errno_text());
  const auto idx = index_path(base);
  store.idx_.reset(std::fopen(idx.c_str(), "wb"));
  if (!store.idx_) throw CheckpointError("cannot create " + idx.string() + ": " + errno_text());
  const auto header = header_bytes();
  write_all(store.data_.get(), header, base);
  write_all(store.idx_.get(), header, idx);
  sync(store.data_.get(), base);
  sync(store.idx_.get(), idx);
  store.data_end_ = kHeaderSize;
  return store;
}

CheckpointStore CheckpointStore::open(const std::filesystem::path& base) {
  CheckpointStore store(base);
  const auto idx = index_path(base);
  const auto idx_bytes = read_file(idx);
  check_header(idx_bytes, idx);
  if ((idx_bytes.size() - kHeaderSize) % kIndexEntrySize != 0)
    throw CheckpointError(idx.string() + ": truncated index entry");

  std::error_code ec;
  const auto data_size = std::filesystem::file_size(base, ec);
  if (ec) throw CheckpointError("cannot stat " + base.string() + ": " + ec.message());
  check_header(read_file(base, kHeaderSize), base);

  std::uint64_t expected_offset = kHeaderSize;
  Reader r(idx_bytes.data() + kHeaderSize, idx_bytes.size() - kHeaderSize);
  while (r.remaining() > 0) {
    IndexEntry e;
    e.round = r.u64();
    e.offset = r.u64();
    e.length = r.u64();
    e.crc32 = r.u32();
    if (!store.index_.empty() && e.round <= store.index_.back().round)
      throw CheckpointError(idx.string() + ": rounds are not strictly increasing");
    if (e.offset != expected_offset || e.offset + e.length > data_size)
      throw CheckpointError(idx.string() + ": record for round " + std::to_string(e.round) +
                            " has an inconsistent offset/length");
    expected_offset = e.offset + e.length;
    store.index_.push_back(e);
  }
  store.data_end_ = expected_offset;
  if (data_size != store.data_end_)
    throw CheckpointError(base.string() + ": data file length does not match the index");

  store.data_.reset(std::fopen(base.c_str(), "ab"));
  store.idx_.reset(std::fopen(idx.c_str(), "ab"));
  if (!store.data_ || !store.idx_) throw CheckpointError("cannot open " + base.string() + " for appending");
  return store;
}

void CheckpointStore::save(const Checkpoint& cp) {
  if (!data_ || !idx_) throw CheckpointError("checkpoint store is not writable");
  if (!index_.empty() && cp.round <= index_.back().round)
    throw CheckpointError("checkpoint for round " + std::to_string(cp.round) +
                          " is not after the last stored round " + std::to_string(index_.back().round));
  cp.validate();
  const auto bytes = encode(cp);
  IndexEntry e{cp.round, data_end_, bytes.size(), crc_of(bytes.data(), bytes.size())};
  write_all(data_.get(), bytes, base_);
  sync(data_.get(), base_);

  std::vector<unsigned char> ib;
  put_u64(ib, e.round);
  put_u64(ib, e.offset);
  put_u64(ib, e.length);
  put_u32(ib, e.crc32);
  const auto idx = index_path(base_);
  write_all(idx_.get(), ib, idx);
  sync(idx_.get(), idx);

  data_end_ += bytes.size();
  index_.push_back(e);
}

Checkpoint CheckpointStore::load_at(std::size_t pos) const {
  const auto& e = index_.at(pos);
  File f(std::fopen(base_.c_str(), "rb"));
  if (!f) throw CheckpointError("cannot open " + base_.string() + ": " + errno_text());
  std::vector<unsigned char> bytes(e.length);
  if (std::fseek(f.get(), static_cast<long>(e.offset), SEEK_SET) != 0 ||
      std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw CheckpointError("short read of round " + std::to_string(e.round) + " from " + base_.string());
  if (crc_of(bytes.data(), bytes.size()) != e.crc32)
    throw CheckpointError("checksum mismatch for round " + std::to_string(e.round) + " in " +
                          base_.string() + " (corrupted record)");
  auto cp = decode(bytes.data(), bytes.size());
  if (cp.round != e.round) throw CheckpointError("record round does not match its index entry");
  return cp;
}

Checkpoint CheckpointStore::load(std::uint64_t round) const {
  for (std::size_t i = 0; i < index_.size(); ++i)
    if (index_[i].round == round) return load_at(i);
  throw CheckpointError("no checkpoint for round " + std::to_string(round));
}

std::vector<std::uint64_t> CheckpointStore::rounds() const {
  std::vector<std::uint64_t> r;
  for (const auto& e : index_) r.push_back(e.round);
  return r;
}

CheckpointStore::Iterator::Iterator(const CheckpointStore* store, std::size_t pos)
    : store_(store), pos_(pos) {
  fetch();
}

void CheckpointStore::Iterator::fetch() {
  current_.reset();
  if (store_ && pos_ < store_->index_.size()) current_ = store_->load_at(pos_);
}

CheckpointStore::Iterator& CheckpointStore::Iterator::operator++() {
  ++pos_;
  fetch();
  return *this;
}

}  // namespace flf
