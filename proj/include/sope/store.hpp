#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <shared_mutex>
#include <sstream>
#include <vector>

#include "sope/bptree.hpp"
#include "sope/page_store.hpp"
#include "sope/rtree.hpp"

namespace sope {

// The server's whole state: one B+-tree per axis, the R-tree of encoded
// points, and the session lock. Holds no plaintext and no key material.
class Store {
public:
    struct Config {
        std::uint32_t d = 2;
        std::uint64_t branching = kPageDerivedBranching;
    };

    static std::unique_ptr<Store> create_memory(const Config& cfg) {
        auto store = std::unique_ptr<Store>(new Store());
        store->init_memory(cfg);
        return store;
    }

    static std::unique_ptr<Store> open_directory(const std::string& dir,
                                                 std::optional<Config> create_cfg) {
        auto store = std::unique_ptr<Store>(new Store());
        store->init_directory(dir, create_cfg);
        return store;
    }

    std::uint32_t dims() const { return d_; }
    std::uint64_t branching() const { return branching_; }
    BPlusTree& axis_tree(std::uint32_t i) { return *bptrees_[i]; }
    EncodedRTree& rtree() { return *rtree_; }
    std::shared_mutex& session_mutex() { return mutex_; }

    std::vector<std::pair<std::string, PageCounters>> counters() const {
        std::vector<std::pair<std::string, PageCounters>> out;
        for (const auto& s : page_stores_) out.emplace_back(s->name(), s->counters());
        return out;
    }

    void reset_counters() {
        for (auto& s : page_stores_) s->reset_counters();
    }

    void set_page_hook(PageAccessHook hook) {
        for (auto& s : page_stores_) s->set_access_hook(hook);
    }

    /// One record per counter, line-delimited.
    std::string metrics_text() const {
        std::ostringstream os;
        for (const auto& s : page_stores_)
            os << "{\"tree\":\"" << s->name() << "\",\"reads\":" << s->counters().reads
               << ",\"writes\":" << s->counters().writes << "}\n";
        return os.str();
    }

    void sync() {
        for (auto& s : page_stores_) s->sync();
    }

private:
    Store() = default;

    void init_memory(const Config& cfg) {
        check_config(cfg);
        d_ = cfg.d;
        branching_ = cfg.branching;
        for (std::uint32_t i = 0; i < d_; ++i) {
            page_stores_.push_back(std::make_unique<MemPageStore>("axis-" + std::to_string(i)));
            bptrees_.push_back(std::make_unique<BPlusTree>(*page_stores_.back(), branching_));
        }
        page_stores_.push_back(std::make_unique<MemPageStore>("points"));
        rtree_ = std::make_unique<EncodedRTree>(*page_stores_.back(), d_);
    }

    void init_directory(const std::string& dir, std::optional<Config> create_cfg) {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        std::string meta_path = dir + "/store.meta";
        bool create = !fs::exists(meta_path);
        require(!create || create_cfg.has_value(), Errc::io,
                "no store at " + dir + " and no creation parameters given");
        require(!create || !fs::exists(dir + "/axis-0.bpt"), Errc::io,
                "page files present but store.meta missing in " + dir);
        if (create) {
            check_config(*create_cfg);
            d_ = create_cfg->d;
            branching_ = create_cfg->branching;
            std::ofstream meta(meta_path);
            meta << "sope-store v1\nd " << d_ << "\nbranching " << branching_ << "\n";
            require(meta.good(), Errc::io, "cannot write " + meta_path);
        } else {
            std::ifstream meta(meta_path);
            std::string magic, v, key;
            meta >> magic >> v;
            require(meta.good() && magic == "sope-store" && v == "v1", Errc::io,
                    "unrecognized store.meta in " + dir);
            while (meta >> key) {
                if (key == "d")
                    meta >> d_;
                else if (key == "branching")
                    meta >> branching_;
            }
            require(d_ >= 1 && d_ <= kMaxDimensions, Errc::io, "bad d in store.meta");
        }
        for (std::uint32_t i = 0; i < d_; ++i) {
            std::string name = "axis-" + std::to_string(i);
            page_stores_.push_back(
                std::make_unique<FilePageStore>(dir + "/" + name + ".bpt", name, create));
            bptrees_.push_back(std::make_unique<BPlusTree>(
                *page_stores_.back(),
                create ? std::optional<std::uint64_t>(branching_) : std::nullopt));
        }
        page_stores_.push_back(
            std::make_unique<FilePageStore>(dir + "/points.rtr", "points", create));
        rtree_ = std::make_unique<EncodedRTree>(
            *page_stores_.back(), create ? std::optional<std::uint32_t>(d_) : std::nullopt);
    }

    static void check_config(const Config& cfg) {
        require(cfg.d >= 1 && cfg.d <= kMaxDimensions, Errc::bad_param,
                "dimension count out of range");
        require(cfg.branching >= 2 && cfg.branching <= kPageDerivedBranching, Errc::bad_param,
                "branching factor out of range");
    }

    std::uint32_t d_ = 0;
    std::uint64_t branching_ = 0;
    std::vector<std::unique_ptr<PageStore>> page_stores_;
    std::vector<std::unique_ptr<BPlusTree>> bptrees_;
    std::unique_ptr<EncodedRTree> rtree_;
    std::shared_mutex mutex_;
};

}  // namespace sope
