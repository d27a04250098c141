#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <array>
#include <cstdio>
#include <map>
#include <memory>
#include <vector>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "sope/ciphertext.hpp"
#include "sope/common.hpp"

// Client-side only. Server translation units must not include this header;
// the store and protocol layers see sope/ciphertext.hpp alone. The marker
// macro lets the layering test fail the build if that ever regresses.
#define SOPE_CIPHER_BOUNDARY_INCLUDED 1

namespace sope {

struct CipherKey {
    std::array<std::uint8_t, 32> bytes{};
};

inline CipherKey load_key_file(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDONLY);
    require(fd >= 0, Errc::io, "cannot open key file " + path);
    CipherKey key;
    ssize_t n = ::read(fd, key.bytes.data(), key.bytes.size());
    ::close(fd);
    require(n == static_cast<ssize_t>(key.bytes.size()), Errc::io,
            "key file must hold exactly 32 bytes: " + path);
    return key;
}

inline void save_key_file(const std::string& path, const CipherKey& key) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    require(fd >= 0, Errc::io, "cannot create key file " + path);
    ssize_t n = ::write(fd, key.bytes.data(), key.bytes.size());
    ::close(fd);
    require(n == static_cast<ssize_t>(key.bytes.size()), Errc::io, "short key write");
}

class Cipher {
public:
    virtual ~Cipher() = default;
    virtual Ciphertext encrypt(Coord value, std::uint32_t axis) const = 0;
    virtual Coord decrypt(const Ciphertext& ct, std::uint32_t axis) const = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline void put_be64(std::uint8_t* out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) {
        out[i] = static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
    }
}

inline std::uint64_t get_be64(const std::uint8_t* in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in[i];
    return v;
}

}  // namespace detail

// Deterministic keyed permutation over 128-bit blocks: value (big-endian)
// alongside a keyed checksum, run through an 8-round Feistel network. Used by
// every test; injective over the 64-bit value domain and self-authenticating
// under the wrong key.
class TestCipher final : public Cipher {
public:
    explicit TestCipher(const CipherKey& key) {
        std::uint64_t seed = 0x5345454453454544ull;
        for (std::size_t i = 0; i < key.bytes.size(); ++i)
            seed = detail::splitmix64(seed ^ (std::uint64_t(key.bytes[i]) << (8 * (i % 8))));
        for (auto& rk : round_keys_) {
            seed = detail::splitmix64(seed);
            rk = seed;
        }
        mac_key_ = detail::splitmix64(seed ^ 0xa5a5a5a5a5a5a5a5ull);
    }

    Ciphertext encrypt(Coord value, std::uint32_t) const override {
        std::uint64_t hi = static_cast<std::uint64_t>(value);
        std::uint64_t lo = checksum(hi);
        for (int r = 0; r < kRounds; ++r) {
            std::uint64_t next = hi ^ detail::splitmix64(lo ^ round_keys_[r]);
            hi = lo;
            lo = next;
        }
        Ciphertext ct;
        detail::put_be64(ct.bytes.data(), hi);
        detail::put_be64(ct.bytes.data() + 8, lo);
        return ct;
    }

    Coord decrypt(const Ciphertext& ct, std::uint32_t) const override {
        std::uint64_t hi = detail::get_be64(ct.bytes.data());
        std::uint64_t lo = detail::get_be64(ct.bytes.data() + 8);
        for (int r = kRounds - 1; r >= 0; --r) {
            std::uint64_t prev = lo ^ detail::splitmix64(hi ^ round_keys_[r]);
            lo = hi;
            hi = prev;
        }
        require(lo == checksum(hi), Errc::crypto, "ciphertext checksum mismatch");
        return static_cast<Coord>(hi);
    }

private:
    static constexpr int kRounds = 8;

    std::uint64_t checksum(std::uint64_t value) const {
        return detail::splitmix64(value ^ mac_key_) ^ detail::splitmix64(~value ^ mac_key_);
    }

    std::array<std::uint64_t, kRounds> round_keys_{};
    std::uint64_t mac_key_ = 0;
};

// AES-256 adapter: one raw AES block over (value || 8-byte keyed PRF tag).
// The embedded tag plays the synthetic-IV role, keeping ciphertexts
// deterministic, 16 bytes long and verifiable on decryption.
class AesCipher final : public Cipher {
public:
    explicit AesCipher(const CipherKey& key) : key_(key) {
        unsigned char digest[SHA256_DIGEST_LENGTH];
        std::array<std::uint8_t, 33> material{};
        std::copy(key.bytes.begin(), key.bytes.end(), material.begin());
        material[32] = 0x01;
        SHA256(material.data(), material.size(), digest);
        std::copy(digest, digest + mac_key_.size(), mac_key_.begin());
    }

    Ciphertext encrypt(Coord value, std::uint32_t) const override {
        std::array<std::uint8_t, 16> block{};
        detail::put_be64(block.data(), static_cast<std::uint64_t>(value));
        auto tag = prf_tag(static_cast<std::uint64_t>(value));
        std::copy(tag.begin(), tag.end(), block.begin() + 8);

        Ciphertext ct;
        run_block(block.data(), ct.bytes.data(), true);
        return ct;
    }

    Coord decrypt(const Ciphertext& ct, std::uint32_t) const override {
        std::array<std::uint8_t, 16> block{};
        run_block(ct.bytes.data(), block.data(), false);
        std::uint64_t value = detail::get_be64(block.data());
        auto tag = prf_tag(value);
        require(std::equal(tag.begin(), tag.end(), block.begin() + 8), Errc::crypto,
                "ciphertext tag mismatch");
        return static_cast<Coord>(value);
    }

private:
    std::array<std::uint8_t, 8> prf_tag(std::uint64_t value) const {
        std::uint8_t msg[8];
        detail::put_be64(msg, value);
        unsigned char mac[EVP_MAX_MD_SIZE];
        unsigned int mac_len = 0;
        HMAC(EVP_sha256(), mac_key_.data(), static_cast<int>(mac_key_.size()), msg, sizeof(msg),
             mac, &mac_len);
        require(mac_len >= 8, Errc::crypto, "hmac failure");
        std::array<std::uint8_t, 8> tag;
        std::copy(mac, mac + 8, tag.begin());
        return tag;
    }

    void run_block(const std::uint8_t* in, std::uint8_t* out, bool enc) const {
        EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
        require(ctx != nullptr, Errc::crypto, "cipher ctx");
        int ok = enc ? EVP_EncryptInit_ex(ctx, EVP_aes_256_ecb(), nullptr, key_.bytes.data(),
                                          nullptr)
                     : EVP_DecryptInit_ex(ctx, EVP_aes_256_ecb(), nullptr, key_.bytes.data(),
                                          nullptr);
        EVP_CIPHER_CTX_set_padding(ctx, 0);
        int len = 0, total = 0;
        if (ok == 1)
            ok = enc ? EVP_EncryptUpdate(ctx, out, &len, in, 16)
                     : EVP_DecryptUpdate(ctx, out, &len, in, 16);
        total = len;
        if (ok == 1)
            ok = enc ? EVP_EncryptFinal_ex(ctx, out + total, &len)
                     : EVP_DecryptFinal_ex(ctx, out + total, &len);
        EVP_CIPHER_CTX_free(ctx);
        require(ok == 1 && total + len == 16, Errc::crypto, "aes block failure");
    }

    CipherKey key_;
    std::array<std::uint8_t, 16> mac_key_{};
};

// Positional stub for the structural IND-SOCPA game: equal plaintexts map to
// equal tokens, first occurrences to sequential tokens, per axis. Carries no
// key-dependent bytes at all.
class StubPositionalCipher final : public Cipher {
public:
    Ciphertext encrypt(Coord value, std::uint32_t axis) const override {
        auto& table = tables_[axis];
        auto [it, inserted] = table.forward.try_emplace(value, table.forward.size());
        if (inserted) table.reverse.push_back(value);
        Ciphertext ct;
        detail::put_be64(ct.bytes.data(), axis);
        detail::put_be64(ct.bytes.data() + 8, it->second);
        return ct;
    }

    Coord decrypt(const Ciphertext& ct, std::uint32_t axis) const override {
        std::uint64_t tagged_axis = detail::get_be64(ct.bytes.data());
        std::uint64_t token = detail::get_be64(ct.bytes.data() + 8);
        require(tagged_axis == axis, Errc::crypto, "stub token axis mismatch");
        auto it = tables_.find(axis);
        require(it != tables_.end() && token < it->second.reverse.size(), Errc::crypto,
                "unknown stub token");
        return it->second.reverse[token];
    }

private:
    struct AxisTable {
        std::map<Coord, std::uint64_t> forward;
        std::vector<Coord> reverse;
    };
    mutable std::map<std::uint32_t, AxisTable> tables_;
};

inline std::unique_ptr<Cipher> make_cipher(const std::string& kind, const CipherKey& key) {
    if (kind == "test") return std::make_unique<TestCipher>(key);
    if (kind == "aes") return std::make_unique<AesCipher>(key);
    fail(Errc::bad_param, "unknown cipher kind: " + kind);
}

}  // namespace sope
