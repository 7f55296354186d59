#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "common.hpp"

namespace kgs {

namespace fs = std::filesystem;

// Read-only memory mapping of a whole file. Empty files map to an empty span.
class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const fs::path& path);
  ~MappedFile();
  MappedFile(MappedFile&& other) noexcept;
  MappedFile& operator=(MappedFile&& other) noexcept;
  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;

  std::span<const std::uint8_t> bytes() const { return {data_, size_}; }
  std::size_t size() const { return size_; }

 private:
  const std::uint8_t* data_ = nullptr;
  std::size_t size_ = 0;
};

// Fixed-size pool of workers. When used for disk work the pool records the
// highest number of tasks that were running at the same time, which can
// never exceed the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::future<void> submit(std::function<void()> task);
  // Runs the task on the pool and waits for it.
  void run(std::function<void()> task) { submit(std::move(task)).get(); }

  unsigned workers() const { return static_cast<unsigned>(threads_.size()); }
  unsigned peak_in_flight() const { return peak_.load(); }
  std::uint64_t tasks_run() const { return tasks_run_.load(); }

 private:
  void loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::packaged_task<void()>> queue_;
  bool stop_ = false;
  std::vector<std::thread> threads_;
  std::atomic<unsigned> in_flight_{0};
  std::atomic<unsigned> peak_{0};
  std::atomic<std::uint64_t> tasks_run_{0};
};

// Sequential writer that hands full blocks to an I/O pool (or writes inline
// when no pool is given). At most one block per writer is in flight.
class BlockWriter {
 public:
  BlockWriter(const fs::path& path, WorkerPool* io,
              std::size_t block_size = 1 << 20);
  ~BlockWriter();
  BlockWriter(const BlockWriter&) = delete;
  BlockWriter& operator=(const BlockWriter&) = delete;

  void write(const void* data, std::size_t n);
  void write(std::span<const std::uint8_t> bytes) {
    write(bytes.data(), bytes.size());
  }
  std::uint64_t offset() const { return offset_; }
  void close();

 private:
  void flush_block();
  void wait_pending();

  fs::path path_;
  int fd_ = -1;
  WorkerPool* io_;
  std::size_t block_size_;
  std::vector<std::uint8_t> buf_;
  std::vector<std::uint8_t> inflight_buf_;
  std::future<void> pending_;
  std::uint64_t offset_ = 0;
  std::uint64_t file_pos_ = 0;
};

// Sequential reader with one block of read-ahead through an I/O pool.
class BlockReader {
 public:
  BlockReader(const fs::path& path, WorkerPool* io,
              std::size_t block_size = 1 << 20);
  ~BlockReader();
  BlockReader(const BlockReader&) = delete;
  BlockReader& operator=(const BlockReader&) = delete;

  // Reads up to n bytes; returns fewer only at end of file.
  std::size_t read(void* out, std::size_t n);
  std::uint64_t file_size() const { return file_size_; }

 private:
  void start_prefetch();
  bool refill();

  fs::path path_;
  int fd_ = -1;
  WorkerPool* io_;
  std::size_t block_size_;
  std::uint64_t file_size_ = 0;
  std::uint64_t next_read_pos_ = 0;
  std::vector<std::uint8_t> cur_;
  std::size_t cur_pos_ = 0;
  std::vector<std::uint8_t> ahead_;
  std::future<void> pending_;
  std::size_t ahead_len_ = 0;
};

// pread of a byte range, executed on the pool when one is given.
std::vector<std::uint8_t> read_range(const fs::path& path, std::uint64_t offset,
                                     std::size_t len, WorkerPool* io);

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const fs::path& path);
void write_text_file_atomic(const fs::path& path, const std::string& text);

// Appends the whole content of src to the writer.
void copy_into(BlockWriter& out, const fs::path& src, WorkerPool* io);

std::uint64_t directory_bytes(const fs::path& dir);

// Advisory flock on dir/.lock. Throws kBusy when the lock is held elsewhere.
class DirectoryLock {
 public:
  DirectoryLock(const fs::path& dir, bool exclusive);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace kgs
