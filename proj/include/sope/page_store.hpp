#pragma once

#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "sope/common.hpp"

namespace sope {

struct PageCounters {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
};

// op is 'r' or 'w'
using PageAccessHook = std::function<void(const std::string& tree, std::uint64_t page, char op)>;

// 4096-byte page files, page 0 reserved for the owning tree's header. No
// buffering: every node access is a store access and is counted.
class PageStore {
public:
    explicit PageStore(std::string name) : name_(std::move(name)) {}
    virtual ~PageStore() = default;

    virtual std::uint64_t page_count() const = 0;
    virtual std::uint64_t allocate() = 0;
    virtual void sync() {}

    void read_page(std::uint64_t page, std::span<std::uint8_t> out) {
        require(out.size() == kPageSize, Errc::io, "page buffer size");
        require(page < page_count(), Errc::io, "page read out of range");
        do_read(page, out);
        ++counters_.reads;
        if (hook_) hook_(name_, page, 'r');
    }

    void write_page(std::uint64_t page, std::span<const std::uint8_t> in) {
        require(in.size() == kPageSize, Errc::io, "page buffer size");
        require(page < page_count(), Errc::io, "page write out of range");
        do_write(page, in);
        ++counters_.writes;
        if (hook_) hook_(name_, page, 'w');
    }

    const std::string& name() const { return name_; }
    const PageCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }
    void set_access_hook(PageAccessHook hook) { hook_ = std::move(hook); }

protected:
    virtual void do_read(std::uint64_t page, std::span<std::uint8_t> out) = 0;
    virtual void do_write(std::uint64_t page, std::span<const std::uint8_t> in) = 0;

private:
    std::string name_;
    PageCounters counters_;
    PageAccessHook hook_;
};

class MemPageStore final : public PageStore {
public:
    explicit MemPageStore(std::string name) : PageStore(std::move(name)) {}

    std::uint64_t page_count() const override { return pages_.size(); }

    std::uint64_t allocate() override {
        pages_.emplace_back();
        pages_.back().resize(kPageSize, 0);
        return pages_.size() - 1;
    }

protected:
    void do_read(std::uint64_t page, std::span<std::uint8_t> out) override {
        std::memcpy(out.data(), pages_[page].data(), kPageSize);
    }
    void do_write(std::uint64_t page, std::span<const std::uint8_t> in) override {
        std::memcpy(pages_[page].data(), in.data(), kPageSize);
    }

private:
    std::vector<std::vector<std::uint8_t>> pages_;
};

class FilePageStore final : public PageStore {
public:
    FilePageStore(const std::string& path, std::string name, bool create)
        : PageStore(std::move(name)), path_(path) {
        int flags = O_RDWR | (create ? O_CREAT | O_TRUNC : 0);
        fd_ = ::open(path.c_str(), flags, 0644);
        require(fd_ >= 0, Errc::io, "cannot open page file " + path);
        struct stat st{};
        require(::fstat(fd_, &st) == 0, Errc::io, "fstat " + path);
        require(st.st_size % kPageSize == 0, Errc::io, "page file not page-aligned: " + path);
        count_ = static_cast<std::uint64_t>(st.st_size) / kPageSize;
    }

    ~FilePageStore() override {
        if (fd_ >= 0) ::close(fd_);
    }

    FilePageStore(const FilePageStore&) = delete;
    FilePageStore& operator=(const FilePageStore&) = delete;

    std::uint64_t page_count() const override { return count_; }

    std::uint64_t allocate() override {
        std::uint8_t zeros[kPageSize] = {};
        ssize_t n = ::pwrite(fd_, zeros, kPageSize, static_cast<off_t>(count_ * kPageSize));
        require(n == static_cast<ssize_t>(kPageSize), Errc::io, "page allocate failed");
        return count_++;
    }

    void sync() override { ::fdatasync(fd_); }

protected:
    void do_read(std::uint64_t page, std::span<std::uint8_t> out) override {
        ssize_t n = ::pread(fd_, out.data(), kPageSize, static_cast<off_t>(page * kPageSize));
        require(n == static_cast<ssize_t>(kPageSize), Errc::io, "short page read");
    }
    void do_write(std::uint64_t page, std::span<const std::uint8_t> in) override {
        ssize_t n = ::pwrite(fd_, in.data(), kPageSize, static_cast<off_t>(page * kPageSize));
        require(n == static_cast<ssize_t>(kPageSize), Errc::io, "short page write");
    }

private:
    std::string path_;
    int fd_ = -1;
    std::uint64_t count_ = 0;
};

// Big-endian field codecs shared by the page formats and the wire protocol.
namespace wire {

inline void put_u8(std::uint8_t* p, std::uint8_t v) { *p = v; }
inline void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}
inline void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) {
        p[i] = static_cast<std::uint8_t>(v);
        v >>= 8;
    }
}
inline void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) {
        p[i] = static_cast<std::uint8_t>(v);
        v >>= 8;
    }
}
inline std::uint8_t get_u8(const std::uint8_t* p) { return *p; }
inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((std::uint16_t(p[0]) << 8) | p[1]);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | p[i];
    return v;
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

}  // namespace wire

}  // namespace sope
