#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "support/harness.hpp"
#include "support/table2.hpp"

using namespace sope;
using testsupport::TestRig;
using testsupport::ids_of;

TEST_CASE("insert into an empty store") {
    TestRig rig(2);
    auto encs = rig.client().insert({1, {500, 600}});
    CHECK(encs == std::vector<Encoding>{0, 0});
    CHECK(rig.store().rtree().size() == 1);
    CHECK(rig.client().point_query(std::vector<Coord>{500, 600}));
}

TEST_CASE("table-2 load is order-isomorphic to the published encodings") {
    TestRig rig(2, 2);
    for (const auto& r : testsupport::kTable2) rig.client().insert({r.id, {r.x, r.y}});

    // final stored encodings, after every mutation
    EncodedRect all{{0, 0}, {kEncodingInfinity, kEncodingInfinity}};
    std::map<PointId, std::vector<Encoding>> got;
    for (const auto& ep : rig.store().rtree().range_search(all)) got[ep.id] = ep.encs;
    REQUIRE(got.size() == 28);

    // dense ranks of the produced encodings must equal the published ranks
    for (int axis = 0; axis < 2; ++axis) {
        std::set<Encoding> values;
        for (const auto& [id, encs] : got) values.insert(encs[axis]);
        std::map<Encoding, Encoding> rank;
        Encoding r = 0;
        for (Encoding v : values) rank[v] = r++;
        for (const auto& row : testsupport::kTable2) {
            Encoding expected = axis == 0 ? row.xr : row.yr;
            CHECK(rank.at(got.at(row.id)[axis]) == expected);
        }
    }
}

TEST_CASE("shared coordinate reuses the axis key") {
    TestRig rig(2);
    rig.client().insert({1, {100, 100}});
    rig.client().insert({2, {100, 200}});
    CHECK(rig.store().axis_tree(0).key_count() == 1);
    CHECK(rig.store().axis_tree(1).key_count() == 2);
    CHECK(rig.store().rtree().size() == 2);
    CHECK(rig.client().point_query(std::vector<Coord>{100, 200}));
}

TEST_CASE("duplicate point id is rejected before any mutation") {
    TestRig rig(2);
    rig.client().insert({1, {10, 10}});
    CHECK_THROWS_AS(rig.client().insert({1, {20, 20}}), Error);
}

TEST_CASE("point query against the example dataset") {
    TestRig rig(2, 2);
    auto ds = testsupport::table2_points();
    rig.load(ds);

    for (const auto& p : ds) CHECK(rig.client().point_query(p.coords));
    CHECK_FALSE(rig.client().point_query(std::vector<Coord>{601, 600}));
    // X=100 exists, Y=999 does not: the second axis terminates the query
    CHECK_FALSE(rig.client().point_query(std::vector<Coord>{100, 999}));
}

TEST_CASE("range query against the example dataset") {
    TestRig rig(2);
    rig.load(testsupport::table2_points());

    auto hits = rig.client().range_query(Rect{{100, 100}, {300, 400}});
    CHECK(ids_of(hits) == std::set<PointId>{1, 2, 4, 11, 22, 27});
    for (const auto& p : hits) {
        auto expect = testsupport::table2_points()[p.id - 1];
        CHECK(p.coords == expect.coords);
    }

    CHECK(rig.client().range_query(Rect{{0, 0}, {10000, 10000}}).size() == 28);
    CHECK(rig.client().range_query(Rect{{9000, 9000}, {9100, 9100}}).empty());
    CHECK(rig.client().range_query(Rect{{0, 0}, {10, 10}}).empty());
}

TEST_CASE("skyline and constrained skyline") {
    TestRig rig(2);
    auto ds = testsupport::table2_points();
    rig.load(ds);

    CHECK(ids_of(rig.client().skyline()) == std::set<PointId>{1, 15, 18});
    CHECK(ids_of(rig.client().constrained_skyline(Rect{{0, 0}, {10000, 10000}})) ==
          std::set<PointId>{1, 15, 18});

    Rect box{{150, 150}, {700, 700}};
    CHECK(ids_of(rig.client().constrained_skyline(box)) == oracle::constrained_skyline(ds, box));
}

TEST_CASE("knn against the example dataset") {
    TestRig rig(2);
    auto ds = testsupport::table2_points();
    rig.load(ds);

    auto one = rig.client().knn(std::vector<Coord>{450, 450}, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].first.id == 5);
    CHECK(one[0].second == 0);

    auto three = rig.client().knn(std::vector<Coord>{450, 450}, 3);
    std::vector<PointId> got;
    for (auto& [p, d] : three) got.push_back(p.id);
    CHECK(got == oracle::knn(ds, std::vector<Coord>{450, 450}, 3));

    CHECK(rig.client().knn(std::vector<Coord>{450, 450}, 28).size() == 28);
    CHECK(rig.client().knn(std::vector<Coord>{450, 450}, 100).size() == 28);
}

TEST_CASE("dynamic skyline") {
    TestRig rig(2);
    auto ds = testsupport::table2_points();
    rig.load(ds);

    // q below all data on every axis: dynamic skyline equals the static one
    CHECK(ids_of(rig.client().dynamic_skyline(std::vector<Coord>{0, 0})) ==
          oracle::skyline(ds));

    // q coincident with a stored point: that point dominates everything
    CHECK(ids_of(rig.client().dynamic_skyline(std::vector<Coord>{450, 450})) ==
          std::set<PointId>{5});

    std::mt19937_64 rng(71);
    for (int i = 0; i < 10; ++i) {
        std::vector<Coord> q{static_cast<Coord>(rng() % 1000),
                             static_cast<Coord>(rng() % 1000)};
        CHECK(ids_of(rig.client().dynamic_skyline(q)) == oracle::dynamic_skyline(ds, q));
    }
}

TEST_CASE("global skyline candidates honour the containment properties") {
    TestRig rig(2);
    auto ds = testsupport::table2_points();
    rig.load(ds);

    std::mt19937_64 rng(72);
    for (int i = 0; i < 10; ++i) {
        std::vector<Coord> q{static_cast<Coord>(rng() % 1000),
                             static_cast<Coord>(rng() % 1000)};
        auto gsl = ids_of(rig.client().global_skyline_candidates(q, 1));
        CHECK(gsl == oracle::global_skyline(ds, q));
        for (PointId id : oracle::dynamic_skyline(ds, q)) CHECK(gsl.count(id) == 1);
        for (PointId id : oracle::reverse_knn(ds, q, 1)) CHECK(gsl.count(id) == 1);
    }
}

TEST_CASE("constrained knn") {
    TestRig rig(2);
    auto ds = testsupport::table2_points();
    rig.load(ds);
    std::vector<Coord> q{450, 450};

    auto whole = rig.client().constrained_knn(Rect{{0, 0}, {10000, 10000}}, q, 2);
    auto plain = rig.client().knn(q, 2);
    REQUIRE(whole.size() == plain.size());
    for (std::size_t i = 0; i < whole.size(); ++i)
        CHECK(whole[i].first.id == plain[i].first.id);

    // q outside the box: results still confined to the box
    Rect box{{600, 600}, {1000, 1000}};
    auto constrained = rig.client().constrained_knn(box, q, 2);
    std::vector<PointId> got;
    for (auto& [p, d] : constrained) {
        CHECK(box.contains(p.coords));
        got.push_back(p.id);
    }
    CHECK(got == oracle::constrained_knn(ds, box, q, 2));

    // fewer points in the box than k: all of them come back
    Rect tiny{{40, 940}, {60, 960}};  // just p15
    auto few = rig.client().constrained_knn(tiny, q, 3);
    REQUIRE(few.size() == 1);
    CHECK(few[0].first.id == 15);
}

TEST_CASE("reverse knn") {
    {
        // two points, q between them but closer to each than they are to
        // each other is impossible; both are reverse-1NN when q is their
        // nearest other point
        TestRig rig(2);
        rig.client().insert({1, {0, 0}});
        rig.client().insert({2, {100, 0}});
        auto rk = rig.client().reverse_knn(std::vector<Coord>{40, 0}, 1);
        CHECK(ids_of(rk) == std::set<PointId>{1, 2});
    }
    {
        // clustered triple, far q: every point has a nearer neighbour than q
        TestRig rig(2);
        rig.client().insert({1, {0, 0}});
        rig.client().insert({2, {2, 0}});
        rig.client().insert({3, {0, 2}});
        CHECK(rig.client().reverse_knn(std::vector<Coord>{500, 500}, 1).empty());
    }
    {
        TestRig rig(2);
        auto ds = testsupport::table2_points();
        rig.load(ds);
        std::mt19937_64 rng(73);
        for (int i = 0; i < 8; ++i) {
            std::vector<Coord> q{static_cast<Coord>(rng() % 1000),
                                 static_cast<Coord>(rng() % 1000)};
            for (std::uint32_t k = 1; k <= 2; ++k)
                CHECK(ids_of(rig.client().reverse_knn(q, k)) == oracle::reverse_knn(ds, q, k));
        }
        // q coincident with a stored point
        CHECK(ids_of(rig.client().reverse_knn(std::vector<Coord>{450, 450}, 1)) ==
              oracle::reverse_knn(ds, std::vector<Coord>{450, 450}, 1));
    }
}

TEST_CASE("continuous 1nn") {
    {
        // single stored point serves the whole segment
        TestRig rig(2);
        rig.client().insert({1, {50, 50}});
        auto tiles = rig.client().continuous_1nn(Segment{{0, 0}, {100, 0}});
        REQUIRE(tiles.size() == 1);
        CHECK(tiles[0].nn == 1);
        CHECK(tiles[0].t0 == 0.0);
        CHECK(tiles[0].t1 == 1.0);
    }
    {
        // two points symmetric about the midpoint perpendicular
        TestRig rig(2);
        rig.client().insert({1, {0, 10}});
        rig.client().insert({2, {100, 10}});
        auto tiles = rig.client().continuous_1nn(Segment{{0, 0}, {100, 0}});
        REQUIRE(tiles.size() == 2);
        CHECK(tiles[0].nn == 1);
        CHECK(tiles[1].nn == 2);
        CHECK_THAT(tiles[0].t1, Catch::Matchers::WithinAbs(0.5, 1e-9));
    }
    {
        TestRig rig(2);
        auto ds = testsupport::table2_points();
        rig.load(ds);
        std::mt19937_64 rng(74);
        for (int round = 0; round < 6; ++round) {
            Segment seg{{static_cast<Coord>(rng() % 1000), static_cast<Coord>(rng() % 1000)},
                        {static_cast<Coord>(rng() % 1000), static_cast<Coord>(rng() % 1000)}};
            if (seg.a == seg.b) continue;
            auto tiles = rig.client().continuous_1nn(seg);
            REQUIRE(!tiles.empty());
            CHECK(tiles.front().t0 == 0.0);
            CHECK(tiles.back().t1 == 1.0);
            for (std::size_t i = 1; i < tiles.size(); ++i) {
                CHECK(tiles[i - 1].t1 == tiles[i].t0);
                CHECK(tiles[i - 1].nn != tiles[i].nn);
            }
            for (int s = 0; s <= 100; ++s) {
                double t = s / 100.0;
                std::vector<double> at(2);
                for (int a = 0; a < 2; ++a)
                    at[a] = static_cast<double>(seg.a[a]) +
                            t * (static_cast<double>(seg.b[a]) - static_cast<double>(seg.a[a]));
                auto best = oracle::nn_ids_at(ds, at);
                bool ok = false;
                for (const auto& tile : tiles)
                    if (t >= tile.t0 && t <= tile.t1 && best.count(tile.nn)) ok = true;
                CHECK(ok);
            }
        }
    }
    {
        TestRig rig(2);
        CHECK(rig.client().continuous_1nn(Segment{{0, 0}, {10, 0}}).empty());
    }
    {
        // three dimensions, bisector planes instead of lines
        TestRig rig(3);
        std::mt19937_64 rng(77);
        auto ds = testsupport::random_dataset(60, 3, rng, 200);
        rig.load(ds);
        for (int round = 0; round < 4; ++round) {
            Segment seg;
            for (int a = 0; a < 3; ++a) {
                seg.a.push_back(static_cast<Coord>(rng() % 200));
                seg.b.push_back(static_cast<Coord>(rng() % 200));
            }
            if (seg.a == seg.b) continue;
            auto tiles = rig.client().continuous_1nn(seg);
            REQUIRE(!tiles.empty());
            CHECK(tiles.front().t0 == 0.0);
            CHECK(tiles.back().t1 == 1.0);
            for (int s = 0; s <= 100; ++s) {
                double t = s / 100.0;
                std::vector<double> at(3);
                for (int a = 0; a < 3; ++a)
                    at[a] = static_cast<double>(seg.a[a]) +
                            t * (static_cast<double>(seg.b[a]) - static_cast<double>(seg.a[a]));
                auto best = oracle::nn_ids_at(ds, at);
                bool ok = false;
                for (const auto& tile : tiles)
                    if (t >= tile.t0 && t <= tile.t1 && best.count(tile.nn)) ok = true;
                CHECK(ok);
            }
        }
    }
}

TEST_CASE("knn kth-place ties follow the configuration") {
    // two points equidistant from q at the k-th place
    auto load_pair = [](TestRig& rig) {
        rig.client().insert({1, {50, 50}});
        rig.client().insert({2, {40, 50}});   // distance 100
        rig.client().insert({3, {60, 50}});   // distance 100
    };
    std::vector<Coord> q{50, 50};

    {
        TestRig rig(2);  // default: strict k, smaller id wins
        load_pair(rig);
        auto got = rig.client().knn(q, 2);
        REQUIRE(got.size() == 2);
        CHECK(got[0].first.id == 1);
        CHECK(got[1].first.id == 2);
    }
    {
        Client::Options opts;
        opts.include_kth_ties = true;
        TestRig rig(2, kPageDerivedBranching, opts);
        load_pair(rig);
        auto got = rig.client().knn(q, 2);
        REQUIRE(got.size() == 3);
        CHECK(got[1].second == got[2].second);
    }
}

TEST_CASE("queries on an empty store") {
    TestRig rig(2);
    CHECK_FALSE(rig.client().point_query(std::vector<Coord>{1, 2}));
    CHECK(rig.client().range_query(Rect{{0, 0}, {100, 100}}).empty());
    CHECK(rig.client().skyline().empty());
    CHECK(rig.client().global_skyline_candidates(std::vector<Coord>{5, 5}, 2).empty());
    CHECK(rig.client().knn(std::vector<Coord>{5, 5}, 3).empty());
    CHECK(rig.client().dynamic_skyline(std::vector<Coord>{5, 5}).empty());
    CHECK(rig.client().reverse_knn(std::vector<Coord>{5, 5}, 1).empty());
    CHECK(rig.client().constrained_skyline(Rect{{0, 0}, {9, 9}}).empty());
}

TEST_CASE("continuous 1nn depth cap carries the partial tiling") {
    Client::Options opts;
    opts.continuous_depth_cap = 0;
    TestRig rig(2, kPageDerivedBranching, opts);
    rig.client().insert({1, {0, 10}});
    rig.client().insert({2, {100, 10}});
    try {
        rig.client().continuous_1nn(Segment{{0, 0}, {100, 0}});
        FAIL("expected the depth cap to fire");
    } catch (const ContinuousDepthError& e) {
        CHECK(e.partial_tiling.empty());
    }
}

TEST_CASE("reopened store accepts further insertions") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "sope-e2e-reopen";
    fs::remove_all(dir);
    TestCipher cipher(testsupport::fixed_key());

    {
        auto store = Store::open_directory(dir.string(), Store::Config{2, 4});
        Server server(*store);
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        Client client(*client_end, cipher, 2);
        for (PointId id = 1; id <= 40; ++id)
            client.insert({id, {static_cast<Coord>(id * 7 % 53), static_cast<Coord>(id * 11 % 47)}});
        client_end->close();
        t.join();
    }
    auto store = Store::open_directory(dir.string(), std::nullopt);
    Server server(*store);
    {
        // the id set survives the restart; the error closes this connection
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        Client client(*client_end, cipher, 2);
        CHECK_THROWS_AS(client.insert({17, {1000, 1000}}), Error);
        client_end->close();
        t.join();
    }
    {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        Client client(*client_end, cipher, 2);
        for (PointId id = 41; id <= 80; ++id)
            client.insert({id, {static_cast<Coord>(id * 7 % 53), static_cast<Coord>(id * 11 % 47)}});
        CHECK(store->rtree().size() == 80);

        oracle::PlainDataset ds;
        for (PointId id = 1; id <= 80; ++id)
            ds.push_back({id, {static_cast<Coord>(id * 7 % 53), static_cast<Coord>(id * 11 % 47)}});
        Rect box{{10, 10}, {35, 35}};
        CHECK(testsupport::ids_of(client.range_query(box)) == oracle::range(ds, box));
        CHECK(testsupport::ids_of(client.skyline()) == oracle::skyline(ds));
        client_end->close();
        t.join();
    }
    fs::remove_all(dir);
}

TEST_CASE("query answers are insertion-order independent") {
    auto ds = testsupport::table2_points();
    std::mt19937_64 rng(75);

    std::set<PointId> sky, dsl, rk;
    std::vector<PointId> nn;
    for (int shuffle = 0; shuffle < 10; ++shuffle) {
        auto order = ds;
        std::shuffle(order.begin(), order.end(), rng);
        TestRig rig(2);
        rig.load(order);

        auto sky_now = ids_of(rig.client().skyline());
        auto dsl_now = ids_of(rig.client().dynamic_skyline(std::vector<Coord>{700, 300}));
        auto rk_now = ids_of(rig.client().reverse_knn(std::vector<Coord>{500, 500}, 1));
        auto knn_now = rig.client().knn(std::vector<Coord>{333, 333}, 3);
        std::vector<PointId> nn_now;
        for (auto& [p, d] : knn_now) nn_now.push_back(p.id);

        if (shuffle == 0) {
            sky = sky_now;
            dsl = dsl_now;
            rk = rk_now;
            nn = nn_now;
        } else {
            CHECK(sky == sky_now);
            CHECK(dsl == dsl_now);
            CHECK(rk == rk_now);
            CHECK(nn == nn_now);
        }
    }
}

TEST_CASE("bad k is rejected") {
    TestRig rig(2);
    rig.client().insert({1, {5, 5}});
    CHECK_THROWS_AS(rig.client().knn(std::vector<Coord>{1, 1}, 0), Error);
    CHECK_THROWS_AS(rig.client().global_skyline_candidates(std::vector<Coord>{1, 1}, 0), Error);
}

TEST_CASE("protocol violation aborts the session without mutation") {
    auto snapshot_pages = [](Store& store) {
        std::vector<std::vector<std::uint8_t>> out;
        for (std::uint32_t a = 0; a < store.dims(); ++a) {
            auto& ps = store.axis_tree(a).store();
            for (std::uint64_t p = 0; p < ps.page_count(); ++p) {
                std::vector<std::uint8_t> buf(kPageSize);
                ps.read_page(p, buf);
                out.push_back(std::move(buf));
            }
        }
        auto& rs = store.rtree().store();
        for (std::uint64_t p = 0; p < rs.page_count(); ++p) {
            std::vector<std::uint8_t> buf(kPageSize);
            rs.read_page(p, buf);
            out.push_back(std::move(buf));
        }
        return out;
    };

    auto store = Store::create_memory({2, 4});
    Server server(*store);
    {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        TestCipher cipher(testsupport::fixed_key());
        Client client(*client_end, cipher, 2);
        client.insert({1, {10, 20}});
        client.insert({2, {30, 40}});
        client_end->close();
        t.join();
    }
    auto before = snapshot_pages(*store);

    {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        // begin an insert session, then answer the first NODE with an
        // out-of-range child choice
        write_message(*client_end, {MsgKind::begin_insert,
                                    PayloadWriter().u64(3).u32(2).take()});
        auto node = read_message(*client_end);
        REQUIRE(node.has_value());
        write_message(*client_end, {MsgKind::choose_child, PayloadWriter().u16(999).take()});
        // server must reply ERROR and abort
        for (;;) {
            auto m = read_message(*client_end);
            REQUIRE(m.has_value());
            if (m->kind == MsgKind::error) break;
            REQUIRE(m->kind == MsgKind::node);
        }
        client_end->close();
        t.join();
    }

    CHECK(snapshot_pages(*store) == before);

    // the store still serves sessions on a fresh connection
    {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        TestCipher cipher(testsupport::fixed_key());
        Client client(*client_end, cipher, 2);
        CHECK(client.point_query(std::vector<Coord>{10, 20}));
        client_end->close();
        t.join();
    }
}

TEST_CASE("client transcript never carries plaintext coordinate bytes") {
    // sentinel coordinates with distinctive byte patterns
    const Coord sx = 0x0102030405060708;

    class SniffingStream final : public ByteStream {
    public:
        SniffingStream(ByteStream& inner, std::vector<std::uint8_t>& tape)
            : inner_(inner), tape_(tape) {}
        void send(std::span<const std::uint8_t> data) override {
            tape_.insert(tape_.end(), data.begin(), data.end());
            inner_.send(data);
        }
        bool recv_exact(std::span<std::uint8_t> out) override {
            if (!inner_.recv_exact(out)) return false;
            tape_.insert(tape_.end(), out.begin(), out.end());
            return true;
        }
        void close() override { inner_.close(); }

    private:
        ByteStream& inner_;
        std::vector<std::uint8_t>& tape_;
    };

    auto store = Store::create_memory({2, 4});
    Server server(*store);
    auto [client_end, server_end] = LoopbackChannel::make();
    std::thread t([&] { server.handle_connection(*server_end); });

    std::vector<std::uint8_t> tape;
    SniffingStream sniffed(*client_end, tape);
    TestCipher cipher(testsupport::fixed_key());
    Client client(sniffed, cipher, 2);
    client.insert({1, {sx, sx / 3}});
    client.insert({2, {sx / 5, sx / 7}});
    client.point_query(std::vector<Coord>{sx, sx / 3});
    client.knn(std::vector<Coord>{sx / 5, sx / 7}, 1);
    client_end->close();
    t.join();

    for (Coord sentinel : {sx, sx / 3, sx / 5, sx / 7}) {
        std::array<std::uint8_t, 8> pattern;
        for (int i = 7; i >= 0; --i)
            pattern[7 - i] = static_cast<std::uint8_t>(sentinel >> (8 * i));
        auto it = std::search(tape.begin(), tape.end(), pattern.begin(), pattern.end());
        CHECK(it == tape.end());
    }
}

TEST_CASE("server rejects bad parameters and unknown kinds") {
    auto store = Store::create_memory({2, 4});
    Server server(*store);

    auto expect_error = [&](Message msg) {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        write_message(*client_end, msg);
        auto reply = read_message(*client_end);
        REQUIRE(reply.has_value());
        CHECK(reply->kind == MsgKind::error);
        client_end->close();
        t.join();
    };

    // k = 0 on the global-skyline session
    expect_error({MsgKind::begin_global_skyline, PayloadWriter().u32(0).u32(2).take()});
    // dimension mismatch
    expect_error({MsgKind::begin_point_query, PayloadWriter().u32(5).take()});
    // a kind that cannot open a session
    expect_error({MsgKind::choose_child, PayloadWriter().u16(0).take()});
    // constrained query: query point requires k >= 1
    expect_error({MsgKind::begin_constrained, PayloadWriter().u32(0).u8(1).u32(2).take()});
}

TEST_CASE("read-only sessions run concurrently") {
    auto store = Store::create_memory({2, 4});
    Server server(*store);
    TestCipher cipher(testsupport::fixed_key());
    {
        auto [client_end, server_end] = LoopbackChannel::make();
        std::thread t([&] { server.handle_connection(*server_end); });
        Client client(*client_end, cipher, 2);
        for (const auto& p : testsupport::table2_points()) client.insert(p);
        client_end->close();
        t.join();
    }

    std::vector<std::thread> workers;
    std::atomic<int> successes{0};
    for (int w = 0; w < 6; ++w) {
        workers.emplace_back([&, w] {
            auto [client_end, server_end] = LoopbackChannel::make();
            std::thread t([&] { server.handle_connection(*server_end); });
            Client client(*client_end, cipher, 2);
            for (int i = 0; i < 20; ++i) {
                std::vector<Coord> q{static_cast<Coord>(100 + 31 * w + i),
                                     static_cast<Coord>(900 - 17 * w - i)};
                auto knn = client.knn(q, 2);
                if (knn.size() == 2) ++successes;
            }
            client_end->close();
            t.join();
        });
    }
    for (auto& w : workers) w.join();
    CHECK(successes == 120);
}

TEST_CASE("metrics snapshot lists every tree") {
    TestRig rig(2);
    rig.client().insert({1, {3, 4}});
    auto text = rig.client().stats_text();
    CHECK(text.find("\"tree\":\"axis-0\"") != std::string::npos);
    CHECK(text.find("\"tree\":\"axis-1\"") != std::string::npos);
    CHECK(text.find("\"tree\":\"points\"") != std::string::npos);
    CHECK(text.find("\"reads\":") != std::string::npos);
}

TEST_CASE("random datasets end-to-end against the oracle") {
    std::mt19937_64 rng(76);
    for (int round = 0; round < 4; ++round) {
        std::uint32_t d = round % 2 ? 3 : 2;
        auto ds = testsupport::random_dataset(80, d, rng, 300);
        TestRig rig(d);
        rig.load(ds);

        for (int qi = 0; qi < 5; ++qi) {
            std::vector<Coord> q(d);
            for (auto& c : q) c = static_cast<Coord>(rng() % 330);

            CHECK(rig.client().point_query(ds[rng() % ds.size()].coords));
            CHECK(ids_of(rig.client().dynamic_skyline(q)) == oracle::dynamic_skyline(ds, q));

            Rect box;
            for (std::uint32_t a = 0; a < d; ++a) {
                Coord x = static_cast<Coord>(rng() % 330), y = static_cast<Coord>(rng() % 330);
                box.lo.push_back(std::min(x, y));
                box.hi.push_back(std::max(x, y));
            }
            CHECK(ids_of(rig.client().range_query(box)) == oracle::range(ds, box));

            auto knn = rig.client().knn(q, 1 + qi % 3);
            std::vector<PointId> got;
            for (auto& [p, dist] : knn) got.push_back(p.id);
            CHECK(got == oracle::knn(ds, q, 1 + qi % 3));
        }
    }
}
