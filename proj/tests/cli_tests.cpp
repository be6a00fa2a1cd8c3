#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_bin() {
    const char* bin = std::getenv("SPEEDCAL_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "SPEEDCAL_BIN must point at the speedcal binary");
    return bin;
}

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        cli_bin() + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("speedcal-cli-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

// one free-flowing vehicle, a GHR follower behind it, a faster late entrant,
// and a gentle-ramp vehicle for validation
const char* kScenario = R"({
  "fps": 30, "duration_s": 30, "jitter_sigma": 0, "seed": 5,
  "birdseye_to_camera": [[0.98, -0.03, 12.0],
                         [0.015, 1.01, -6.0],
                         [1.5e-05, -1.0e-05, 1.0]],
  "mpp": {"mpp_x_min": 0.04, "mpp_x_max": 0.028, "mpp_y_min": 0.02, "mpp_y_max": 0.031,
          "x_min": 0, "x_max": 3000, "y_min": 0, "y_max": 1200},
  "lanes": [{"lane_id": "EB", "nema_phase": 2,
             "entry_zone": [[0,560],[100,560],[100,640],[0,640]],
             "exit_zone": [[2900,560],[3000,560],[3000,640],[2900,640]],
             "centerline": [[0,600],[3000,600]]}],
  "schedule": [
    {"track_id": 1, "lane_id": "EB", "entry_time_s": 0, "start_offset_m": 0,
     "profile": {"type": "constant", "v": 9}},
    {"track_id": 2, "lane_id": "EB",
     "profile": {"type": "ghr_follower", "c": 1.0, "m": 0.5, "l": 1.0, "T": 0.5,
                 "initial_spacing": 13}},
    {"track_id": 3, "lane_id": "EB", "entry_time_s": 8, "start_offset_m": -20,
     "profile": {"type": "constant", "v": 10}},
    {"track_id": 4, "lane_id": "EB", "entry_time_s": 17, "start_offset_m": 0,
     "profile": {"type": "ramp", "v0": 9.2, "v1": 8.8, "t0": 0, "t1": 7}}
  ]
})";

void prepare_fixture(const TempDir& dir) {
    write(dir.path / "scenario.json", kScenario);
    const RunResult gen =
        run("generate --scenario " + (dir.path / "scenario.json").string() + " --out-dir " +
                dir.path.string(),
            dir.path);
    REQUIRE_MESSAGE(gen.exit_code == 0, gen.err);
    const RunResult geo =
        run("calibrate-geometry -c " + (dir.path / "session.json").string(), dir.path);
    REQUIRE_MESSAGE(geo.exit_code == 0, geo.err);
}

}  // namespace

TEST_CASE("cli: generate produces the full fixture set") {
    TempDir dir;
    prepare_fixture(dir);
    for (const char* name : {"detections.csv", "true_speeds.csv", "true_episodes.csv",
                             "lanes.json", "geometry.json", "session.json", "homography.json",
                             "mpp.json"})
        CHECK_MESSAGE(fs::exists(dir.path / name), name);
    const std::string geo_out = slurp(dir.path / "stdout.txt");
    CHECK(geo_out.find("reprojection error") != std::string::npos);
}

TEST_CASE("cli: estimate-speeds matches the scenario oracle") {
    TempDir dir;
    prepare_fixture(dir);
    const RunResult r = run("estimate-speeds -c " + (dir.path / "session.json").string() +
                                " -o " + (dir.path / "speeds.csv").string(),
                            dir.path);
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.err.find("vehicles: 4") != std::string::npos);

    // vehicle 1 cruises at 9 m/s; raw column within 1e-6
    std::ifstream speeds(dir.path / "speeds.csv");
    std::string line;
    int checked = 0;
    while (std::getline(speeds, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("1,", 0) != 0) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');  // track
        std::getline(ss, field, ',');  // frame
        std::getline(ss, field, ',');  // raw
        CHECK(std::abs(std::stod(field) - 9.0) < 1e-6);
        ++checked;
    }
    CHECK(checked > 250);
}

TEST_CASE("cli: estimate-speeds reads detections from stdin") {
    TempDir dir;
    prepare_fixture(dir);
    const fs::path out = dir.path / "stream.csv";
    const std::string cmd = "cat " + (dir.path / "detections.csv").string() + " | " + cli_bin() +
                            " estimate-speeds -c " + (dir.path / "session.json").string() +
                            " --detections - -o " + out.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("track_id,frame,raw_mps") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') > 500);
}

TEST_CASE("cli: fps override flag changes the estimates") {
    TempDir dir;
    prepare_fixture(dir);
    const RunResult r = run("estimate-speeds -c " + (dir.path / "session.json").string() +
                                " --fps 15 -o " + (dir.path / "speeds15.csv").string(),
                            dir.path);
    REQUIRE(r.exit_code == 0);
    std::ifstream speeds(dir.path / "speeds15.csv");
    std::string line;
    bool saw = false;
    while (std::getline(speeds, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("1,", 0) != 0) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        std::getline(ss, field, ',');
        std::getline(ss, field, ',');
        CHECK(std::abs(std::stod(field) - 4.5) < 1e-6);  // halved fps halves speeds
        saw = true;
        break;
    }
    CHECK(saw);
}

TEST_CASE("cli: missing detections file names the path, exit 1") {
    TempDir dir;
    prepare_fixture(dir);
    write(dir.path / "session2.json",
          R"({"paths": {"detections": "absent.csv", "homography": "homography.json",
              "mpp": "mpp.json"}})");
    const RunResult r =
        run("estimate-speeds -c " + (dir.path / "session2.json").string(), dir.path);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("absent.csv") != std::string::npos);
}

TEST_CASE("cli: empty detections is an input error") {
    TempDir dir;
    prepare_fixture(dir);
    write(dir.path / "detections.csv", "");
    const RunResult r =
        run("estimate-speeds -c " + (dir.path / "session.json").string(), dir.path);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("no data lines") != std::string::npos);
}

TEST_CASE("cli: collinear correspondences surface DegenerateConfiguration, exit 2") {
    TempDir dir;
    write(dir.path / "geometry.json", R"({
      "correspondences": [
        {"source": [0, 0], "target": [0, 0]},
        {"source": [10, 10], "target": [10, 0]},
        {"source": [20, 20], "target": [10, 10]},
        {"source": [500, 1], "target": [0, 10]}
      ],
      "region": {"x_min": 0, "x_max": 1000, "y_min": 0, "y_max": 800},
      "segments_x": [{"a": [0, 400], "b": [60, 400], "true_length_m": 2.75},
                      {"a": [940, 400], "b": [1040, 400], "true_length_m": 2.75}],
      "segments_y": [{"a": [500, -65], "b": [500, 65], "true_length_m": 2.75},
                      {"a": [500, 755], "b": [500, 845], "true_length_m": 2.75}]
    })");
    write(dir.path / "session.json", R"({"paths": {"geometry": "geometry.json"}})");
    const RunResult r =
        run("calibrate-geometry -c " + (dir.path / "session.json").string(), dir.path);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("collinear") != std::string::npos);
}

TEST_CASE("cli: calibrate-ghr reports the platoon phase and dashes elsewhere") {
    TempDir dir;
    prepare_fixture(dir);
    const RunResult r = run("calibrate-ghr -c " + (dir.path / "session.json").string() +
                                " --min-instances 30 --starts 6 --budget 200 -o " +
                                (dir.path / "report.txt").string(),
                            dir.path);
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const std::string report = slurp(dir.path / "report.txt");
    CHECK(report.find("min_instances=30") != std::string::npos);
    CHECK(report.find("    2  ") != std::string::npos);   // phase-2 row with values
    CHECK(report.find("     -") != std::string::npos);    // phases without episodes
}

TEST_CASE("cli: calibrate-ghr with no episodes warns and exits 0") {
    TempDir dir;
    prepare_fixture(dir);
    // single-vehicle detections: no pairs anywhere
    std::ostringstream det;
    for (int f = 0; f < 200; ++f)
        det << f << ",1," << 100 + 6 * f << ",600,40,30,car\n";
    write(dir.path / "detections.csv", det.str());
    const RunResult r = run("calibrate-ghr -c " + (dir.path / "session.json").string() +
                                " --min-instances 30",
                            dir.path);
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("no phase had enough") != std::string::npos);
    CHECK(r.out.find("     -") != std::string::npos);
}

TEST_CASE("cli: three min-instances thresholds give three report sections") {
    TempDir dir;
    prepare_fixture(dir);
    const RunResult r = run("calibrate-ghr -c " + (dir.path / "session.json").string() +
                                " --min-instances 30 --min-instances 45 --min-instances 60"
                                " --starts 4 --budget 120",
                            dir.path);
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.out.find("min_instances=30") != std::string::npos);
    CHECK(r.out.find("min_instances=45") != std::string::npos);
    CHECK(r.out.find("min_instances=60") != std::string::npos);
}

TEST_CASE("cli: validate reports near-perfect fit on the exact fixture") {
    TempDir dir;
    prepare_fixture(dir);
    const RunResult ok = run("validate -c " + (dir.path / "session.json").string() +
                                 " --track 4 -o " + (dir.path / "val.txt").string() +
                                 " --plot-data " + (dir.path / "plot.csv").string(),
                             dir.path);
    REQUIRE_MESSAGE(ok.exit_code == 0, ok.err);
    const std::string report = slurp(dir.path / "val.txt");
    CHECK(report.find("R^2") != std::string::npos);

    // raw row: last column is R^2 of the ramp vehicle, essentially 1
    std::istringstream lines(report);
    std::string line;
    bool saw_raw = false;
    while (std::getline(lines, line)) {
        if (line.rfind("raw", 0) != 0) continue;
        std::istringstream fields(line);
        std::string tok;
        std::string last;
        while (fields >> tok) last = tok;
        CHECK(std::stod(last) > 0.999);
        saw_raw = true;
    }
    CHECK(saw_raw);

    const std::string plot = slurp(dir.path / "plot.csv");
    CHECK(plot.find("time_s,true_mps,raw_mps,smoothed_mps") != std::string::npos);

    // missing ground-truth path is a config error
    write(dir.path / "session2.json", R"({"paths": {"detections": "detections.csv",
        "geometry": "geometry.json", "lanes": "lanes.json"}})");
    const RunResult miss =
        run("validate -c " + (dir.path / "session2.json").string(), dir.path);
    CHECK(miss.exit_code == 1);
    CHECK(miss.err.find("ground truth") != std::string::npos);
}
