#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "nlos/errors.hpp"
#include "nlos/io.hpp"

using namespace nlos;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("nlos_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

TransientDataset sample_dataset() {
    TransientDataset ds;
    ds.axis = {1e-9, 4e-12, 8, 299792458.0};
    ds.lasers.positions = {{-0.2, 0, 0}, {0.2, 0, 0}};
    ds.lasers.laser_offsets = {1e-9, 1.1e-9};
    ds.wall.positions = {{0, -0.1, 0}, {0, 0.1, 0}, {0.1, 0, 0}};
    ds.wall.camera_offsets = {2e-9, 2.1e-9, 2.2e-9};
    ds.intensity.assign(2 * 3 * 8, 0.0f);
    ds.at(0, 1, 3) = 0.5f;
    ds.at(1, 2, 7) = 1.25f;
    return ds;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kMinimalScene = R"({
  "wall": {"origin": [-0.5, -0.5, 0], "edge_u": [1, 0, 0], "edge_v": [0, 1, 0],
           "pixels_u": 2, "pixels_v": 2},
  "laser_points": [[0, 0, 0]],
  "laser_origin": [0, 0, -1],
  "camera_origin": [0, 0, -1],
  "temporal": {"dt": 4e-12, "c": 299792458.0},
  "hidden": [{"point": {"position": [0, 0, 0.5], "normal": [0, 0, -1], "area": 0.01},
              "albedo": 0.9}]
})";

}  // namespace

TEST_CASE("dataset round trip is bitwise lossless") {
    TempDir tmp;
    TransientDataset ds = sample_dataset();
    std::string path = tmp.file("ds.nltd");
    write_dataset(ds, path);

    TransientDataset back = read_dataset(path);
    CHECK(back.intensity == ds.intensity);
    CHECK(back.wall.positions == ds.wall.positions);
    CHECK(back.lasers.laser_offsets == ds.lasers.laser_offsets);
    CHECK(back.axis.t0 == ds.axis.t0);

    std::string path2 = tmp.file("ds2.nltd");
    write_dataset(back, path2);
    CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("dataset reader rejects malformed files") {
    TempDir tmp;
    TransientDataset ds = sample_dataset();
    std::string good = tmp.file("good.nltd");
    write_dataset(ds, good);
    std::string bytes = read_bytes(good);

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(tmp.file("bad.nltd"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_dataset(tmp.file("bad.nltd")), MalformedMagicError);
    }
    SUBCASE("unsupported version") {
        std::string bad = bytes;
        bad[4] = 9;
        std::ofstream(tmp.file("ver.nltd"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_dataset(tmp.file("ver.nltd")), UnsupportedVersionError);
    }
    SUBCASE("truncated payload") {
        std::string bad = bytes.substr(0, bytes.size() - 5);
        std::ofstream(tmp.file("trunc.nltd"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_dataset(tmp.file("trunc.nltd")), TruncatedPayloadError);
    }
    SUBCASE("negative intensity names the offset") {
        std::string bad = bytes;
        float neg = -1.0f;
        std::memcpy(bad.data() + bad.size() - sizeof(float) * ds.intensity.size(), &neg,
                    sizeof(float));
        std::ofstream(tmp.file("neg.nltd"), std::ios::binary) << bad;
        try {
            read_dataset(tmp.file("neg.nltd"));
            FAIL("expected NegativeIntensityError");
        } catch (const NegativeIntensityError& e) {
            CHECK(e.offset ==
                  static_cast<long long>(bad.size() - sizeof(float) * ds.intensity.size()));
        }
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_dataset(tmp.file("absent.nltd")), IoError);
    }
}

TEST_CASE("volume round trip is bitwise lossless in both modes") {
    TempDir tmp;
    for (AccumMode mode : {AccumMode::Integer, AccumMode::Float}) {
        VoxelGrid grid = VoxelGrid::create({{0, 0, 0}, {1, 2, 0.5}}, 6, mode);
        for (std::size_t i = 0; i < grid.cell_count(); ++i)
            if (mode == AccumMode::Integer)
                grid.ints()[i] = static_cast<std::uint32_t>(i * 7 + 1);
            else
                grid.floats()[i] = 0.37 * static_cast<double>(i);

        std::string path = tmp.file("vol.nlvg");
        write_volume(grid, path);
        VoxelGrid back = read_volume(path);
        CHECK(back.mode() == mode);
        CHECK(back.geometry().same_as(grid.geometry()));
        if (mode == AccumMode::Integer)
            CHECK(back.ints() == grid.ints());
        else
            CHECK(back.floats() == grid.floats());

        std::string path2 = tmp.file("vol2.nlvg");
        write_volume(back, path2);
        CHECK(read_bytes(path) == read_bytes(path2));
    }
}

TEST_CASE("volume reader rejects malformed files") {
    TempDir tmp;
    VoxelGrid grid = VoxelGrid::create({{0, 0, 0}, {1, 1, 1}}, 2, AccumMode::Integer);
    std::string good = tmp.file("v.nlvg");
    write_volume(grid, good);
    std::string bytes = read_bytes(good);

    std::string bad = bytes;
    bad[1] = 'x';
    std::ofstream(tmp.file("vb.nlvg"), std::ios::binary) << bad;
    CHECK_THROWS_AS(read_volume(tmp.file("vb.nlvg")), MalformedMagicError);

    std::string trunc = bytes.substr(0, bytes.size() - 1);
    std::ofstream(tmp.file("vt.nlvg"), std::ios::binary) << trunc;
    CHECK_THROWS_AS(read_volume(tmp.file("vt.nlvg")), TruncatedPayloadError);
}

TEST_CASE("scene parsing") {
    SUBCASE("minimal valid scene") {
        HiddenScene scene = parse_scene_json(kMinimalScene);
        CHECK(scene.wall.pixel_count() == 4);
        CHECK(scene.laser_points.size() == 1);
        CHECK(scene.hidden_surfaces.size() == 1);
        CHECK(scene.hidden_surfaces[0].albedo == doctest::Approx(0.9));
        CHECK(!scene.t0);
        CHECK(!scene.bins);
    }
    SUBCASE("rectangle sampling honors density") {
        std::string text = R"({
          "wall": {"origin": [-0.5, -0.5, 0], "edge_u": [1, 0, 0], "edge_v": [0, 1, 0],
                   "pixels_u": 2, "pixels_v": 2},
          "laser_points": [[0, 0, 0]],
          "laser_origin": [0, 0, -1],
          "camera_origin": [0, 0, -1],
          "hidden": [{"rect": {"origin": [0, 0, 0.5], "edge_u": [1, 0, 0],
                               "edge_v": [0, 0.5, 0], "density": 100}}]
        })";
        HiddenScene scene = parse_scene_json(text);
        CHECK(scene.hidden_surfaces.size() == 50);  // 100 per m^2 over 0.5 m^2
        for (const auto& s : scene.hidden_surfaces)
            CHECK(s.area == doctest::Approx(0.01));
    }
    SUBCASE("laser grid shorthand") {
        std::string text = R"({
          "wall": {"origin": [-0.5, -0.5, 0], "edge_u": [1, 0, 0], "edge_v": [0, 1, 0],
                   "pixels_u": 4, "pixels_v": 4},
          "laser_points": {"grid_u": 2, "grid_v": 3},
          "laser_origin": [0, 0, -1],
          "camera_origin": [0, 0, -1]
        })";
        CHECK(parse_scene_json(text).laser_points.size() == 6);
    }
    SUBCASE("errors carry context") {
        CHECK_THROWS_AS(parse_scene_json("{not json"), SceneParseError);
        CHECK_THROWS_AS(parse_scene_json("{}"), SceneParseError);
        std::string zero_wall = kMinimalScene;
        auto pos = zero_wall.find("[1, 0, 0]");
        zero_wall.replace(pos, 9, "[0, 0, 0]");
        CHECK_THROWS_AS(parse_scene_json(zero_wall), SceneParseError);
    }
}

TEST_CASE("PLY export") {
    TempDir tmp;
    VoxelGrid grid = VoxelGrid::create({{0, 0, 0}, {1, 1, 1}}, 4, AccumMode::Float);
    const GridGeometry& g = grid.geometry();
    grid.floats()[g.index(1, 1, 1)] = 1.0;
    grid.floats()[g.index(2, 2, 2)] = 0.5;
    grid.floats()[g.index(3, 3, 3)] = 0.2;

    SUBCASE("threshold 1.0 keeps only the argmax") {
        std::string path = tmp.file("peak.ply");
        export_ply(grid, 1.0, path);
        std::ifstream in(path);
        std::string line;
        std::size_t count = 0;
        while (std::getline(in, line))
            if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
        CHECK(count == 1);
    }
    SUBCASE("all-zero grid gives an empty vertex list") {
        VoxelGrid zero = VoxelGrid::create({{0, 0, 0}, {1, 1, 1}}, 4, AccumMode::Float);
        std::string path = tmp.file("zero.ply");
        export_ply(zero, 0.3, path);
        std::string text = read_bytes(path);
        CHECK(text.find("element vertex 0") != std::string::npos);
    }
    SUBCASE("threshold counts voxels above cutoff") {
        std::string path = tmp.file("cut.ply");
        export_ply(grid, 0.4, path);
        std::string text = read_bytes(path);
        CHECK(text.find("element vertex 2") != std::string::npos);
    }
}

TEST_CASE("PGM slice export") {
    TempDir tmp;
    VoxelGrid grid = VoxelGrid::create({{0, 0, 0}, {1, 1, 1}}, 3, AccumMode::Integer);
    grid.ints()[grid.geometry().index(1, 1, 1)] = 10;
    auto files = export_slices(grid, 2, tmp.file("slice"));
    REQUIRE(files.size() == 3);
    std::string middle = read_bytes(files[1]);
    CHECK(middle.rfind("P5\n3 3\n255\n", 0) == 0);
    // payload: 9 bytes, max-normalized center = 255
    std::string payload = middle.substr(middle.size() - 9);
    CHECK(static_cast<unsigned char>(payload[4]) == 255);
    CHECK(static_cast<unsigned char>(payload[0]) == 0);
    std::string empty = read_bytes(files[0]);
    for (std::size_t i = empty.size() - 9; i < empty.size(); ++i)
        CHECK(empty[i] == 0);
}

TEST_CASE("report writer") {
    TempDir tmp;
    std::string path = tmp.file("report.txt");
    write_report({{"alpha", "1"}, {"beta", "2.5"}}, path);
    CHECK(read_bytes(path) == "alpha=1\nbeta=2.5\n");
}
