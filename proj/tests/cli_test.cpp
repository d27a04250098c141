// Exercises the built CLI end to end: keygen, serve over TCP, load, queries,
// restart over the same page directory, bad-magic refusal, bench smoke.
// Usage: sope_cli_test <path-to-sope-binary>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "sope/transport.hpp"

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++failures;
        std::cerr << "FAIL: " << what << "\n";
    }
}

std::string run_capture(const std::string& cmd, int* exit_code = nullptr) {
    std::string out;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    int rc = pclose(pipe);
    if (exit_code) *exit_code = WEXITSTATUS(rc);
    return out;
}

pid_t spawn_server(const std::string& binary, const std::string& pages,
                   const std::string& addr) {
    pid_t pid = fork();
    if (pid == 0) {
        // exec the binary directly so the pid we hold is the server itself
        FILE* null = fopen("/dev/null", "w");
        if (null) {
            dup2(fileno(null), 1);
            dup2(fileno(null), 2);
        }
        execl(binary.c_str(), binary.c_str(), "serve", "--pages", pages.c_str(), "--listen",
              addr.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    return pid;
}

bool wait_for_port(const std::string& addr, int tries = 100) {
    for (int i = 0; i < tries; ++i) {
        try {
            auto s = sope::connect_tcp(addr);
            s->close();
            return true;
        } catch (...) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    }
    return false;
}

void stop_server(pid_t pid) {
    kill(pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: sope_cli_test <sope-binary>\n";
        return 2;
    }
    std::string binary = argv[1];
    fs::path dir = fs::temp_directory_path() / ("sope-cli-test-" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string pages = (dir / "pages").string();
    std::string addr = "127.0.0.1:" + std::to_string(20000 + getpid() % 20000);

    // key generation
    std::string key_path = (dir / "client.key").string();
    int rc = 0;
    run_capture(binary + " keygen --out " + key_path, &rc);
    expect(rc == 0, "keygen exits cleanly");
    expect(fs::file_size(key_path) == 32, "key file holds 32 bytes");
    setenv("SOPE_KEY_FILE", key_path.c_str(), 1);

    // the example dataset as a CSV with a header row
    std::string csv_path = (dir / "table2.csv").string();
    {
        std::ofstream csv(csv_path);
        csv << "id,x,y\n";
        const int rows[28][3] = {
            {1, 100, 100},  {2, 250, 250},  {3, 600, 600},  {4, 300, 400},  {5, 450, 450},
            {6, 100, 700},  {7, 300, 480},  {8, 500, 900},  {9, 800, 550},  {10, 350, 850},
            {11, 200, 300}, {12, 650, 150}, {13, 950, 900}, {14, 600, 300}, {15, 50, 950},
            {16, 900, 750}, {17, 950, 950}, {18, 400, 50},  {19, 750, 250}, {20, 850, 150},
            {21, 150, 650}, {22, 100, 200}, {23, 550, 100}, {24, 700, 510}, {25, 700, 800},
            {26, 700, 350}, {27, 100, 350}, {28, 100, 500},
        };
        for (auto& r : rows) csv << r[0] << "," << r[1] << "," << r[2] << "\n";
    }

    pid_t server = spawn_server(binary, pages, addr);
    expect(wait_for_port(addr), "server comes up");

    std::string load_out = run_capture(
        binary + " load " + csv_path + " --connect " + addr + " --cipher aes", &rc);
    expect(rc == 0, "load exits cleanly: " + load_out);
    expect(load_out.find("28 inserted") != std::string::npos, "28 rows load");
    expect(load_out.find("checkpoint") != std::string::npos, "load prints checkpoints");

    auto q = [&](const std::string& args) {
        int code = 0;
        std::string out =
            run_capture(binary + " query " + args + " --connect " + addr + " --cipher aes",
                        &code);
        expect(code == 0, "query exits cleanly: " + args + " -> " + out);
        return out;
    };

    expect(q("knn --q 450,450 --k 1") == "p5 450,450 d2=0\n", "knn fixture");
    {
        std::string sky = q("skyline");
        expect(sky == "p1 100,100\np15 50,950\np18 400,50\n", "skyline fixture: " + sky);
    }
    expect(q("point --q 601,600") == "FALSE\n", "absent point is FALSE");
    expect(q("point --q 600,600") == "TRUE\n", "stored point is TRUE");
    {
        std::string range = q("range --box 100,100,300,400");
        for (const char* id : {"p1 ", "p2 ", "p4 ", "p11 ", "p22 ", "p27 "})
            expect(range.find(id) != std::string::npos, std::string("range misses ") + id);
    }
    {
        std::string stats = q("rknn --q 500,500 --k 1 --stats");
        expect(stats.find("\"tree\":\"axis-0\"") != std::string::npos, "stats text printed");
    }
    {
        std::string cnn = q("cnn --seg 0,0,1000,1000");
        expect(cnn.find("p1 [0,") != std::string::npos, "cnn starts at p1: " + cnn);
    }

    // duplicate id aborts with the row number
    std::string dup_out =
        run_capture(binary + " load " + csv_path + " --connect " + addr + " --cipher aes", &rc);
    expect(rc == 1, "duplicate load fails");
    expect(dup_out.find("error at row 1") != std::string::npos, "row number reported");

    // empty file loads zero rows
    std::string empty_csv = (dir / "empty.csv").string();
    std::ofstream(empty_csv).flush();
    std::string empty_out =
        run_capture(binary + " load " + empty_csv + " --connect " + addr + " --cipher aes", &rc);
    expect(rc == 0 && empty_out.find("0 inserted") != std::string::npos, "empty file loads 0");

    // malformed row aborts with its row number
    std::string bad_csv = (dir / "bad.csv").string();
    {
        std::ofstream bad(bad_csv);
        bad << "id,x,y\n100,1,2\n101,3,oops\n";
    }
    std::string bad_out =
        run_capture(binary + " load " + bad_csv + " --connect " + addr + " --cipher aes", &rc);
    expect(rc == 1 && bad_out.find("row 3") != std::string::npos,
           "malformed row reported: " + bad_out);

    // restart over the existing directory: identical answers
    stop_server(server);
    server = spawn_server(binary, pages, addr);
    expect(wait_for_port(addr), "server restarts");
    expect(q("knn --q 450,450 --k 1") == "p5 450,450 d2=0\n", "knn fixture after restart");
    expect(q("skyline") == "p1 100,100\np15 50,950\np18 400,50\n", "skyline after restart");
    stop_server(server);

    // corrupting a page file's magic must refuse startup
    {
        std::fstream f(pages + "/axis-0.bpt",
                       std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    pid_t bad = spawn_server(binary, pages, addr);
    int status = 0;
    waitpid(bad, &status, 0);
    expect(WIFEXITED(status) && WEXITSTATUS(status) != 0, "bad magic refuses start");

    // bench smoke over an in-memory store
    std::string bench_out =
        run_capture(binary + " bench --uniform 2000 --seed 7 --dims 2", &rc);
    expect(rc == 0, "bench exits cleanly");
    expect(bench_out.find("load,pct100,2000") != std::string::npos, "bench checkpoint row");
    expect(bench_out.find("query,range3,") != std::string::npos, "bench range rows");
    {
        // load checkpoints monotone in inserted count and index pages
        std::istringstream in(bench_out);
        long long prev_inserted = -1, prev_pages = -1;
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("load,", 0) != 0) continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
            long long inserted = std::stoll(f[2]), pages_now = std::stoll(f[3]);
            expect(inserted >= prev_inserted, "checkpoint inserted counts monotone");
            expect(pages_now >= prev_pages, "checkpoint page counts monotone");
            prev_inserted = inserted;
            prev_pages = pages_now;
        }
        expect(prev_inserted == 2000, "final checkpoint covers the whole load");
    }
    std::string bench_again =
        run_capture(binary + " bench --uniform 2000 --seed 7 --dims 2", &rc);
    auto strip_time = [](const std::string& csv) {
        std::istringstream in(csv);
        std::ostringstream out;
        for (std::string line; std::getline(in, line);) {
            // drop the seconds column (5th field)
            std::vector<std::string> fields;
            std::stringstream ss(line);
            for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (i != 4) out << fields[i] << ",";
            out << "\n";
        }
        return out.str();
    };
    expect(strip_time(bench_out) == strip_time(bench_again),
           "bench output stable under re-run except wall time");

    fs::remove_all(dir);
    if (failures == 0) {
        std::cout << "cli test: all checks passed\n";
        return 0;
    }
    std::cout << "cli test: " << failures << " failures\n";
    return 1;
}
