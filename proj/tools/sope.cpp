// Operator CLI: keygen, serve, load, query, bench.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "sope/bench.hpp"
#include "sope/cipher.hpp"
#include "sope/client.hpp"
#include "sope/server.hpp"
#include "sope/store.hpp"
#include "sope/transport.hpp"

using namespace sope;

namespace {

std::string u128_str(u128 v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

std::vector<Coord> parse_coords(const std::string& text) {
    std::vector<Coord> out;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        std::size_t used = 0;
        out.push_back(std::stoll(field, &used));
        if (used != field.size()) throw CLI::ValidationError("bad coordinate: " + field);
    }
    if (out.empty()) throw CLI::ValidationError("empty coordinate list");
    return out;
}

Rect parse_box(const std::string& text, std::size_t* d_out = nullptr) {
    auto flat = parse_coords(text);
    if (flat.size() % 2 != 0) throw CLI::ValidationError("box needs 2d coordinates");
    std::size_t d = flat.size() / 2;
    if (d_out) *d_out = d;
    return Rect::normalized(std::span<const Coord>(flat.data(), d),
                            std::span<const Coord>(flat.data() + d, d));
}

CipherKey key_from_env() {
    const char* path = std::getenv("SOPE_KEY_FILE");
    if (path) return load_key_file(path);
    std::cerr << "note: SOPE_KEY_FILE not set, using the all-zero development key\n";
    return CipherKey{};
}

struct Connection {
    std::unique_ptr<TcpStream> stream;
    std::unique_ptr<Cipher> cipher;
    std::unique_ptr<Client> client;
};

Connection connect_client(const std::string& addr, const std::string& cipher_kind,
                          std::uint32_t d) {
    Connection c;
    c.stream = connect_tcp(addr);
    c.cipher = make_cipher(cipher_kind, key_from_env());
    c.client = std::make_unique<Client>(*c.stream, *c.cipher, d);
    return c;
}

std::vector<Point> read_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), Errc::io, "cannot open " + path);
    std::vector<Point> out;
    std::string line;
    std::size_t row = 0;
    std::optional<std::size_t> d;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<Coord> fields;
        bool parsed = true;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t used = 0;
                fields.push_back(std::stoll(field, &used));
                if (used != field.size()) parsed = false;
            } catch (...) {
                parsed = false;
            }
            if (!parsed) break;
        }
        if (!parsed) {
            if (row == 1) continue;  // header
            fail(Errc::bad_param, "malformed row " + std::to_string(row) + " in " + path);
        }
        if (fields.size() < 2)
            fail(Errc::bad_param, "malformed row " + std::to_string(row) + " in " + path);
        if (!d) d = fields.size() - 1;
        if (fields.size() - 1 != *d)
            fail(Errc::bad_param, "row " + std::to_string(row) + " has wrong arity");
        Point p;
        require(fields[0] >= 0, Errc::bad_param, "negative id at row " + std::to_string(row));
        p.id = static_cast<PointId>(fields[0]);
        p.coords.assign(fields.begin() + 1, fields.end());
        out.push_back(std::move(p));
    }
    return out;
}

void print_points(const std::vector<Point>& pts) {
    auto sorted = pts;
    std::sort(sorted.begin(), sorted.end(),
              [](const Point& a, const Point& b) { return a.id < b.id; });
    for (const auto& p : sorted) {
        std::cout << "p" << p.id << " ";
        for (std::size_t i = 0; i < p.coords.size(); ++i)
            std::cout << (i ? "," : "") << p.coords[i];
        std::cout << "\n";
    }
}

int cmd_keygen(const std::string& out_path) {
    CipherKey key;
    std::ifstream rnd("/dev/urandom", std::ios::binary);
    rnd.read(reinterpret_cast<char*>(key.bytes.data()), key.bytes.size());
    require(rnd.good(), Errc::io, "cannot read /dev/urandom");
    save_key_file(out_path, key);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_serve(const std::string& pages, const std::string& listen, std::uint32_t dims,
              std::uint64_t branching) {
    auto store = Store::open_directory(pages, Store::Config{dims, branching});
    Server server(*store);
    TcpListener listener(listen);
    std::cout << "serving " << pages << " (d=" << store->dims() << ", B=" << store->branching()
              << ") on " << listen << "\n"
              << std::flush;
    server.serve(listener);
    return 0;
}

int cmd_load(const std::string& csv, const std::string& addr, const std::string& cipher_kind) {
    auto points = read_csv(csv);
    if (points.empty()) {
        std::cout << "0 inserted\n";
        return 0;
    }
    std::uint32_t d = static_cast<std::uint32_t>(points[0].coords.size());
    auto conn = connect_client(addr, cipher_kind, d);

    auto started = std::chrono::steady_clock::now();
    std::size_t next_checkpoint = 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
        try {
            conn.client->insert(points[i]);
        } catch (const Error& e) {
            std::cerr << "error at row " << (i + 1) << " (id " << points[i].id
                      << "): " << e.what() << "\n";
            return 1;
        }
        if ((i + 1) * 5 >= next_checkpoint * points.size()) {
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();
            std::cout << "checkpoint inserted=" << (i + 1) << "/" << points.size()
                      << " seconds=" << secs << "\n";
            std::istringstream stats(conn.client->stats_text());
            for (std::string line; std::getline(stats, line);)
                std::cout << "  " << line << "\n";
            while ((i + 1) * 5 >= next_checkpoint * points.size()) ++next_checkpoint;
        }
    }
    std::cout << points.size() << " inserted\n";
    return 0;
}

int cmd_query(const std::string& sub, const std::string& addr, const std::string& cipher_kind,
              const std::string& q_text, const std::string& box_text,
              const std::string& seg_text, std::uint32_t k, std::uint32_t dims, bool stats) {
    std::vector<Coord> q;
    if (!q_text.empty()) q = parse_coords(q_text);

    std::uint32_t d = dims;
    Rect box;
    if (!box_text.empty()) {
        std::size_t bd = 0;
        box = parse_box(box_text, &bd);
        d = static_cast<std::uint32_t>(bd);
    }
    if (!q.empty()) d = static_cast<std::uint32_t>(q.size());

    Segment seg;
    if (!seg_text.empty()) {
        auto flat = parse_coords(seg_text);
        require(flat.size() % 2 == 0, Errc::bad_param, "segment needs 2d coordinates");
        d = static_cast<std::uint32_t>(flat.size() / 2);
        seg.a.assign(flat.begin(), flat.begin() + d);
        seg.b.assign(flat.begin() + d, flat.end());
    }

    auto conn = connect_client(addr, cipher_kind, d);
    Client& client = *conn.client;

    if (sub == "point") {
        std::cout << (client.point_query(q) ? "TRUE" : "FALSE") << "\n";
    } else if (sub == "range") {
        print_points(client.range_query(box));
    } else if (sub == "skyline") {
        print_points(client.skyline());
    } else if (sub == "gskyline") {
        print_points(client.global_skyline_candidates(q, std::max(1u, k)));
    } else if (sub == "dskyline") {
        print_points(client.dynamic_skyline(q));
    } else if (sub == "knn" || sub == "cknn") {
        auto hits = sub == "knn" ? client.knn(q, k) : client.constrained_knn(box, q, k);
        std::sort(hits.begin(), hits.end(),
                  [](const auto& a, const auto& b) { return a.first.id < b.first.id; });
        for (const auto& [p, d2] : hits) {
            std::cout << "p" << p.id << " ";
            for (std::size_t i = 0; i < p.coords.size(); ++i)
                std::cout << (i ? "," : "") << p.coords[i];
            std::cout << " d2=" << u128_str(d2) << "\n";
        }
    } else if (sub == "cskyline") {
        print_points(client.constrained_skyline(box));
    } else if (sub == "rknn") {
        print_points(client.reverse_knn(q, k));
    } else if (sub == "cnn") {
        for (const auto& tile : client.continuous_1nn(seg))
            std::cout << "p" << tile.nn << " [" << tile.t0 << "," << tile.t1 << "]\n";
    } else {
        throw CLI::ValidationError("unknown query kind: " + sub);
    }

    if (stats) std::cout << client.stats_text();
    return 0;
}

class BenchCsv {
public:
    explicit BenchCsv(std::ostream& out) : out_(out) {
        out_ << "section,label,instance,result_count,seconds,tree,reads,writes\n";
    }

    void row(const std::string& section, const std::string& label, std::uint64_t instance,
             std::uint64_t result_count, double seconds, Store& store,
             const std::vector<std::pair<std::string, PageCounters>>& before) {
        auto now = store.counters();
        for (std::size_t i = 0; i < now.size(); ++i)
            out_ << section << "," << label << "," << instance << "," << result_count << ","
                 << seconds << "," << now[i].first << ","
                 << (now[i].second.reads - before[i].second.reads) << ","
                 << (now[i].second.writes - before[i].second.writes) << "\n";
    }

private:
    std::ostream& out_;
};

int cmd_bench(const std::string& pages, std::uint64_t n, std::uint32_t dims,
              std::uint64_t seed, const std::string& csv, const std::string& out_path,
              std::uint64_t branching) {
    std::vector<Point> points =
        csv.empty() ? bench::uniform_points(n, dims, seed) : read_csv(csv);
    require(!points.empty(), Errc::bad_param, "no points to load");
    std::uint32_t d = static_cast<std::uint32_t>(points[0].coords.size());

    std::unique_ptr<Store> store = pages.empty()
                                       ? Store::create_memory({d, branching})
                                       : Store::open_directory(pages, Store::Config{d, branching});
    Server server(*store);
    auto [client_end, server_end] = LoopbackChannel::make();
    std::thread server_thread([&] { server.handle_connection(*server_end); });
    TestCipher cipher(key_from_env());
    Client client(*client_end, cipher, d);

    std::ofstream file;
    if (!out_path.empty()) file.open(out_path);
    BenchCsv csvout(out_path.empty() ? std::cout : file);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    };

    // load with checkpoints every 20%
    std::size_t checkpoint = 1;
    auto load_base = store->counters();
    for (std::size_t i = 0; i < points.size(); ++i) {
        client.insert(points[i]);
        if ((i + 1) * 5 >= checkpoint * points.size()) {
            std::uint64_t pages_now = store->rtree().page_count();
            for (std::uint32_t a = 0; a < d; ++a)
                pages_now += store->axis_tree(a).page_count();
            csvout.row("load", "pct" + std::to_string(checkpoint * 20), i + 1, pages_now,
                       elapsed(), *store, load_base);
            while ((i + 1) * 5 >= checkpoint * points.size()) ++checkpoint;
        }
    }

    auto run = [&](const std::string& label, std::uint64_t instance, auto&& fn) {
        auto snap = store->counters();
        auto t0 = std::chrono::steady_clock::now();
        std::uint64_t count = fn();
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        csvout.row("query", label, instance, count, secs, *store, snap);
    };

    auto random_coord = [&] { return static_cast<Coord>(rng() % bench::kWorkspaceSide); };

    for (int i = 0; i < 100; ++i) {
        const Point& p = points[rng() % points.size()];
        run("point", i, [&] { return client.point_query(p.coords) ? 1 : 0; });
    }

    for (double pct : {0.01, 0.03, 0.05}) {
        Coord side = static_cast<Coord>(static_cast<double>(bench::kWorkspaceSide) *
                                        std::pow(pct, 1.0 / static_cast<double>(d)));
        for (int i = 0; i < 10; ++i) {
            Rect box;
            for (std::uint32_t a = 0; a < d; ++a) {
                Coord lo = static_cast<Coord>(rng() % (bench::kWorkspaceSide - side));
                box.lo.push_back(lo);
                box.hi.push_back(lo + side);
            }
            run("range" + std::to_string(static_cast<int>(pct * 100)), i,
                [&] { return client.range_query(box).size(); });
        }
    }

    run("skyline", 0, [&] { return client.skyline().size(); });

    for (std::uint32_t k = 1; k <= 3; ++k)
        for (int i = 0; i < 10; ++i) {
            std::vector<Coord> q;
            for (std::uint32_t a = 0; a < d; ++a) q.push_back(random_coord());
            run("knn" + std::to_string(k), i, [&] { return client.knn(q, k).size(); });
        }

    for (int i = 0; i < 5; ++i) {
        std::vector<Coord> q;
        for (std::uint32_t a = 0; a < d; ++a) q.push_back(random_coord());
        run("dskyline", i, [&] { return client.dynamic_skyline(q).size(); });
    }

    for (std::uint32_t k = 1; k <= 3; ++k)
        for (int i = 0; i < 5; ++i) {
            std::vector<Coord> q;
            for (std::uint32_t a = 0; a < d; ++a) q.push_back(random_coord());
            run("rknn" + std::to_string(k), i, [&] { return client.reverse_knn(q, k).size(); });
        }

    for (double pct : {0.01, 0.03, 0.05}) {
        Coord len = static_cast<Coord>(static_cast<double>(bench::kWorkspaceSide) * pct);
        for (int i = 0; i < 5; ++i) {
            Segment seg;
            for (std::uint32_t a = 0; a < d; ++a) {
                Coord lo = static_cast<Coord>(rng() % (bench::kWorkspaceSide - len));
                seg.a.push_back(lo);
                seg.b.push_back(a == 0 ? lo + len : lo);
            }
            run("cnn" + std::to_string(static_cast<int>(pct * 100)), i,
                [&] { return client.continuous_1nn(seg).size(); });
        }
    }

    client_end->close();
    server_thread.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sope: order-preserving encrypted spatial store"};
    app.require_subcommand(1);

    std::string key_out = "sope.key";
    auto* keygen = app.add_subcommand("keygen", "generate a client key file");
    keygen->add_option("--out", key_out, "output path")->capture_default_str();

    std::string pages, listen = "127.0.0.1:7070";
    std::uint32_t dims = 2;
    std::uint64_t branching = kPageDerivedBranching;
    auto* serve = app.add_subcommand("serve", "serve a page directory");
    serve->add_option("--pages", pages, "page-file directory")->required();
    serve->add_option("--listen", listen, "host:port")->capture_default_str();
    serve->add_option("--dims", dims, "dimensions when creating")->capture_default_str();
    serve->add_option("--branching", branching, "b+tree branching factor when creating")
        ->capture_default_str();

    std::string csv_path, addr = "127.0.0.1:7070", cipher_kind = "aes";
    auto* load = app.add_subcommand("load", "insert a CSV of id,x1,...,xd rows");
    load->add_option("file", csv_path, "CSV path")->required();
    load->add_option("--connect", addr, "server address")->capture_default_str();
    load->add_option("--cipher", cipher_kind, "test|aes")->capture_default_str();

    std::string sub, q_text, box_text, seg_text;
    std::uint32_t k = 1, qdims = 2;
    bool stats = false;
    auto* query = app.add_subcommand("query", "run a query");
    query->add_option("kind", sub,
                      "point|range|skyline|gskyline|dskyline|knn|cknn|cskyline|rknn|cnn")
        ->required();
    query->add_option("--connect", addr, "server address")->capture_default_str();
    query->add_option("--cipher", cipher_kind, "test|aes")->capture_default_str();
    query->add_option("--q", q_text, "query point: x1,x2,...");
    query->add_option("--box", box_text, "box: lo1,...,lod,hi1,...,hid");
    query->add_option("--seg", seg_text, "segment: a1,...,ad,b1,...,bd");
    query->add_option("--k", k, "k")->capture_default_str();
    query->add_option("--dims", qdims, "dimensions (skyline only)")->capture_default_str();
    query->add_flag("--stats", stats, "print page-access totals");

    std::uint64_t bn = 10000, bseed = 1;
    std::uint32_t bd = 2;
    std::string bcsv, bout, bpages;
    auto* bench_cmd = app.add_subcommand("bench", "load + query battery, CSV report");
    bench_cmd->add_option("--pages", bpages, "page directory (in-memory when omitted)");
    bench_cmd->add_option("--uniform", bn, "number of uniform points")->capture_default_str();
    bench_cmd->add_option("--dims", bd, "dimensions")->capture_default_str();
    bench_cmd->add_option("--seed", bseed, "generator seed")->capture_default_str();
    bench_cmd->add_option("--csv", bcsv, "load this CSV instead of generating");
    bench_cmd->add_option("--out", bout, "write the report CSV here");
    bench_cmd->add_option("--branching", branching, "b+tree branching factor")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*keygen) return cmd_keygen(key_out);
        if (*serve) return cmd_serve(pages, listen, dims, branching);
        if (*load) return cmd_load(csv_path, addr, cipher_kind);
        if (*query)
            return cmd_query(sub, addr, cipher_kind, q_text, box_text, seg_text, k, qdims,
                             stats);
        if (*bench_cmd) return cmd_bench(bpages, bn, bd, bseed, bcsv, bout, branching);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
