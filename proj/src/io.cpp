#include "io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <fstream>
#include <sstream>

namespace kgs {

namespace {

void pwrite_all(int fd, const std::uint8_t* data, std::size_t n,
                std::uint64_t pos, const fs::path& path) {
  while (n > 0) {
    ssize_t w = ::pwrite(fd, data, n, static_cast<off_t>(pos));
    if (w < 0) {
      if (errno == EINTR) continue;
      throw_errno("write " + path.string());
    }
    data += w;
    n -= static_cast<std::size_t>(w);
    pos += static_cast<std::uint64_t>(w);
  }
}

std::size_t pread_all(int fd, std::uint8_t* data, std::size_t n,
                      std::uint64_t pos, const fs::path& path) {
  std::size_t done = 0;
  while (done < n) {
    ssize_t r = ::pread(fd, data + done, n - done,
                        static_cast<off_t>(pos + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_errno("read " + path.string());
    }
    if (r == 0) break;
    done += static_cast<std::size_t>(r);
  }
  return done;
}

}  // namespace

MappedFile::MappedFile(const fs::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) throw_errno("open " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw_errno("stat " + path.string());
  }
  size_ = static_cast<std::size_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw_errno("mmap " + path.string());
    }
    data_ = static_cast<const std::uint8_t*>(p);
  }
  ::close(fd);
}

MappedFile::~MappedFile() {
  if (data_ != nullptr) {
    ::munmap(const_cast<std::uint8_t*>(data_), size_);
  }
}

MappedFile::MappedFile(MappedFile&& other) noexcept
    : data_(other.data_), size_(other.size_) {
  other.data_ = nullptr;
  other.size_ = 0;
}

MappedFile& MappedFile::operator=(MappedFile&& other) noexcept {
  if (this != &other) {
    if (data_ != nullptr) ::munmap(const_cast<std::uint8_t*>(data_), size_);
    data_ = other.data_;
    size_ = other.size_;
    other.data_ = nullptr;
    other.size_ = 0;
  }
  return *this;
}

WorkerPool::WorkerPool(unsigned workers) {
  if (workers == 0) workers = 1;
  for (unsigned i = 0; i < workers; ++i) {
    threads_.emplace_back([this] { loop(); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::future<void> WorkerPool::submit(std::function<void()> task) {
  std::packaged_task<void()> pt(std::move(task));
  auto fut = pt.get_future();
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(pt));
  }
  cv_.notify_one();
  return fut;
}

void WorkerPool::loop() {
  for (;;) {
    std::packaged_task<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    unsigned now = ++in_flight_;
    unsigned prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    task();
    --in_flight_;
    ++tasks_run_;
  }
}

BlockWriter::BlockWriter(const fs::path& path, WorkerPool* io,
                         std::size_t block_size)
    : path_(path), io_(io), block_size_(block_size) {
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("create " + path.string());
  buf_.reserve(block_size_);
}

BlockWriter::~BlockWriter() {
  try {
    if (fd_ >= 0) close();
  } catch (...) {
  }
}

void BlockWriter::write(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  offset_ += n;
  while (n > 0) {
    std::size_t room = block_size_ - buf_.size();
    std::size_t take = std::min(room, n);
    buf_.insert(buf_.end(), p, p + take);
    p += take;
    n -= take;
    if (buf_.size() == block_size_) flush_block();
  }
}

void BlockWriter::wait_pending() {
  if (pending_.valid()) pending_.get();
}

void BlockWriter::flush_block() {
  if (buf_.empty()) return;
  wait_pending();
  inflight_buf_.swap(buf_);
  buf_.clear();
  const std::uint64_t pos = file_pos_;
  file_pos_ += inflight_buf_.size();
  auto job = [this, pos] {
    pwrite_all(fd_, inflight_buf_.data(), inflight_buf_.size(), pos, path_);
  };
  if (io_ != nullptr) {
    pending_ = io_->submit(job);
  } else {
    job();
  }
}

void BlockWriter::close() {
  if (fd_ < 0) return;
  flush_block();
  wait_pending();
  ::close(fd_);
  fd_ = -1;
}

BlockReader::BlockReader(const fs::path& path, WorkerPool* io,
                         std::size_t block_size)
    : path_(path), io_(io), block_size_(block_size) {
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) throw_errno("open " + path.string());
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw_errno("stat " + path.string());
  file_size_ = static_cast<std::uint64_t>(st.st_size);
  ahead_.resize(block_size_);
  start_prefetch();
}

BlockReader::~BlockReader() {
  try {
    if (pending_.valid()) pending_.get();
  } catch (...) {
  }
  if (fd_ >= 0) ::close(fd_);
}

void BlockReader::start_prefetch() {
  if (next_read_pos_ >= file_size_) return;
  const std::uint64_t pos = next_read_pos_;
  const std::size_t len = static_cast<std::size_t>(
      std::min<std::uint64_t>(block_size_, file_size_ - pos));
  next_read_pos_ += len;
  ahead_len_ = len;
  auto job = [this, pos, len] {
    if (pread_all(fd_, ahead_.data(), len, pos, path_) != len) {
      throw Error(ErrorCode::kStorage, "short read " + path_.string());
    }
  };
  if (io_ != nullptr) {
    pending_ = io_->submit(job);
  } else {
    std::promise<void> done;
    job();
    done.set_value();
    pending_ = done.get_future();
  }
}

bool BlockReader::refill() {
  if (!pending_.valid()) return false;
  pending_.get();
  cur_.assign(ahead_.begin(), ahead_.begin() + static_cast<long>(ahead_len_));
  cur_pos_ = 0;
  start_prefetch();
  return !cur_.empty();
}

std::size_t BlockReader::read(void* out, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(out);
  std::size_t done = 0;
  while (done < n) {
    if (cur_pos_ == cur_.size() && !refill()) break;
    std::size_t take = std::min(n - done, cur_.size() - cur_pos_);
    std::memcpy(p + done, cur_.data() + cur_pos_, take);
    cur_pos_ += take;
    done += take;
  }
  return done;
}

std::vector<std::uint8_t> read_range(const fs::path& path, std::uint64_t offset,
                                     std::size_t len, WorkerPool* io) {
  std::vector<std::uint8_t> out(len);
  auto job = [&] {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw_errno("open " + path.string());
    std::size_t got = 0;
    try {
      got = pread_all(fd, out.data(), len, offset, path);
    } catch (...) {
      ::close(fd);
      throw;
    }
    ::close(fd);
    out.resize(got);
  };
  if (io != nullptr) {
    io->run(job);
  } else {
    job();
  }
  return out;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  BlockWriter w(path, nullptr);
  w.write(bytes);
  w.close();
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorage, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kStorage, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kStorage, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kStorage, "rename " + tmp.string() + ": " +
                                         ec.message());
  }
}

void copy_into(BlockWriter& out, const fs::path& src, WorkerPool* io) {
  BlockReader in(src, io);
  std::vector<std::uint8_t> buf(1 << 20);
  for (;;) {
    std::size_t n = in.read(buf.data(), buf.size());
    if (n == 0) break;
    out.write(buf.data(), n);
  }
}

std::uint64_t directory_bytes(const fs::path& dir) {
  std::uint64_t total = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) total += e.file_size();
  }
  return total;
}

DirectoryLock::DirectoryLock(const fs::path& dir, bool exclusive) {
  fs::path p = dir / ".lock";
  fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw_errno("open " + p.string());
  if (::flock(fd_, (exclusive ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
    int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK) {
      throw Error(ErrorCode::kBusy, "database is locked: " + dir.string());
    }
    errno = err;
    throw_errno("flock " + p.string());
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace kgs
