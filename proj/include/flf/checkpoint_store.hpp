#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flf/partition.hpp"

namespace flf {

struct ClientUpdate {
  ClientId client = 0;
  std::vector<float> values;

  bool operator==(const ClientUpdate&) const = default;
};

/// Forensic evidence of one training round: the pre-update global model w_t,
/// the round's learning rate and every selected client's update g_t^(i).
/// `updates` is sorted by strictly increasing client id and its ids are the
/// selected set C_t.
struct Checkpoint {
  std::uint64_t round = 0;
  double lr = 0.0;
  std::vector<float> global_model;
  std::vector<ClientUpdate> updates;

  std::size_t param_count() const { return global_model.size(); }
  std::vector<ClientId> selected() const;
  void validate() const;

  bool operator==(const Checkpoint&) const = default;
};

/// Bytes of one serialized record: 8 + 8 + 8 + 4P + 4 + |C_t| (4 + 4P).
std::size_t record_size(std::size_t param_count, std::size_t num_selected);

struct IndexEntry {
  std::uint64_t round = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t crc32 = 0;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only checkpoint file plus a sibling index.
///
/// On-disk layout (all little-endian):
///   data file  <base>:      "FLFC" u32 version, then records back to back
///   record:                 round u64, lr f64, P u64, w_t P x f32,
///                           |C_t| u32, |C_t| x (client id u32, P x f32)
///   index file <base>.idx:  "FLFC" u32 version, then per record
///                           round u64, offset u64, length u64, crc32 u32
/// The CRC32 covers the record bytes. Each save flushes and fsyncs both
/// files before returning, so a reader sees either the whole record or none.
class CheckpointStore {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  /// Creates a fresh store, truncating any existing files at `base`.
  static CheckpointStore create(const std::filesystem::path& base);
  /// Opens an existing store; further saves append to it.
  static CheckpointStore open(const std::filesystem::path& base);

  CheckpointStore(CheckpointStore&&) noexcept;
  CheckpointStore& operator=(CheckpointStore&&) noexcept;
  ~CheckpointStore();

  /// Rejects rounds that are not strictly greater than the last stored one.
  void save(const Checkpoint& cp);
  /// Verifies the checksum; throws CheckpointError on a missing round or corruption.
  Checkpoint load(std::uint64_t round) const;

  const std::vector<IndexEntry>& index() const { return index_; }
  std::vector<std::uint64_t> rounds() const;
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  const std::filesystem::path& path() const { return base_; }
  static std::filesystem::path index_path(const std::filesystem::path& base);

  /// Input iterator that loads one record at a time in ascending round order.
  class Iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Checkpoint;
    using difference_type = std::ptrdiff_t;
    using pointer = const Checkpoint*;
    using reference = const Checkpoint&;

    Iterator() = default;
    reference operator*() const { return *current_; }
    pointer operator->() const { return &*current_; }
    Iterator& operator++();
    void operator++(int) { ++*this; }
    bool operator==(const Iterator& o) const { return pos_ == o.pos_; }

   private:
    friend class CheckpointStore;
    Iterator(const CheckpointStore* store, std::size_t pos);
    void fetch();
    const CheckpointStore* store_ = nullptr;
    std::size_t pos_ = 0;
    std::optional<Checkpoint> current_;
  };

  Iterator begin() const { return Iterator(this, 0); }
  Iterator end() const { return Iterator(this, index_.size()); }

 private:
  struct FileCloser {
    void operator()(std::FILE* f) const;
  };
  using File = std::unique_ptr<std::FILE, FileCloser>;

  explicit CheckpointStore(std::filesystem::path base);
  Checkpoint load_at(std::size_t pos) const;

  std::filesystem::path base_;
  std::vector<IndexEntry> index_;
  std::uint64_t data_end_ = 0;
  File data_;
  File idx_;
};

}  // namespace flf
