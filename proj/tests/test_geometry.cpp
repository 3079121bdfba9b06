#include "poroscale/geometry.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace poroscale;

TEST(Porosity, UniformCells) {
  EXPECT_DOUBLE_EQ(porosity(CellGeometry::all_fluid(3, 8)), 1.0);
  EXPECT_DOUBLE_EQ(porosity(CellGeometry::all_solid(3, 8)), 0.0);
}

TEST(Porosity, LaminateHalf) {
  auto g = CellGeometry::laminate(3, 64, 0, 32);
  EXPECT_DOUBLE_EQ(porosity(g), 0.5);
}

TEST(Porosity, ComplementIsExact) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto g = CellGeometry::random(3, 12, 0.37, seed);
    EXPECT_DOUBLE_EQ(porosity(g.complement()), 1.0 - porosity(g));
  }
  auto g2 = CellGeometry::random(2, 17, 0.5, 9);
  EXPECT_DOUBLE_EQ(porosity(g2.complement()), 1.0 - porosity(g2));
}

TEST(Connectivity, AllSolid) {
  auto r = connectivity(CellGeometry::all_solid(3, 8));
  EXPECT_FALSE(r.fluid_connected);
  EXPECT_TRUE(r.solid_connected);
  EXPECT_TRUE(r.isolated_pores);
}

TEST(Connectivity, InteriorSphereIsIsolated) {
  auto g = CellGeometry::sphere_pore(3, 16, 0.25);
  ASSERT_GT(porosity(g), 0.0);
  auto r = connectivity(g);
  EXPECT_TRUE(r.isolated_pores);
  EXPECT_FALSE(r.fluid_connected);
  EXPECT_TRUE(r.solid_connected);
}

TEST(Connectivity, ChannelPercolatesAlongItsAxis) {
  auto g = CellGeometry::channel(3, 16, 0, 6);
  auto r = connectivity(g);
  EXPECT_TRUE(r.fluid_axis[0]);
  EXPECT_FALSE(r.fluid_axis[1]);
  EXPECT_FALSE(r.fluid_axis[2]);
  EXPECT_FALSE(r.isolated_pores);
  EXPECT_TRUE(r.solid_connected);
}

TEST(Connectivity, LaminateBlocksTransverse) {
  auto g = CellGeometry::laminate(3, 8, 1, 4);
  auto r = connectivity(g);
  // fluid slab percolates in-plane but not across the solid slab
  EXPECT_TRUE(r.fluid_axis[0]);
  EXPECT_FALSE(r.fluid_axis[1]);
  EXPECT_TRUE(r.fluid_axis[2]);
  EXPECT_FALSE(r.solid_axis[1]);
}

TEST(Connectivity, CornerTouchingPoresDoNotConnect) {
  // two voxels sharing only an edge/corner: face adjacency must not join them
  auto g = CellGeometry::all_solid(2, 8);
  g.chi[g.index(2, 2, 0)] = 1;
  g.chi[g.index(3, 3, 0)] = 1;
  auto r = connectivity(g);
  EXPECT_TRUE(r.isolated_pores);
}

TEST(Connectivity, NeverFluidConnectedAndIsolated) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = CellGeometry::random(3, 10, 0.3 + 0.04 * double(seed % 10), seed);
    auto r = connectivity(g);
    EXPECT_FALSE(r.fluid_connected && r.isolated_pores);
  }
}

TEST(Connectivity, InvariantUnderPeriodicTranslation) {
  auto g = random_connected(3, 12, 0.45, 7);
  auto r0 = connectivity(g);
  auto r1 = connectivity(g.translated(3, 5, 9));
  EXPECT_EQ(r0.fluid_connected, r1.fluid_connected);
  EXPECT_EQ(r0.solid_connected, r1.solid_connected);
  EXPECT_EQ(r0.isolated_pores, r1.isolated_pores);
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(r0.fluid_axis[d], r1.fluid_axis[d]);
    EXPECT_EQ(r0.solid_axis[d], r1.solid_axis[d]);
  }
}

class GeometryIo : public ::testing::Test {
 protected:
  std::filesystem::path dir = std::filesystem::temp_directory_path() / "poroscale_io_test";
  void SetUp() override { std::filesystem::create_directories(dir); }
  void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(GeometryIo, RoundTripAscii) {
  auto g = CellGeometry::random(3, 16, 0.4, 11);
  auto p = (dir / "cell.txt").string();
  save_geometry(g, p, GeometryFormat::AsciiV1);
  auto h = load_geometry(p);
  EXPECT_EQ(h.dim, g.dim);
  EXPECT_EQ(h.n, g.n);
  EXPECT_EQ(h.chi, g.chi);
}

TEST_F(GeometryIo, RoundTripBinary) {
  auto g = CellGeometry::random(2, 23, 0.51, 5);
  auto p = (dir / "cell.bin").string();
  save_geometry(g, p, GeometryFormat::BinaryV1b);
  auto h = load_geometry(p);
  EXPECT_EQ(h.chi, g.chi);
  EXPECT_EQ(h.dim, 2);
}

TEST_F(GeometryIo, EmptyGridRejected) {
  auto p = (dir / "bad.txt").string();
  {
    std::ofstream f(p);
    f << "poroscale-cell v1 dim=3 n=0\n";
  }
  EXPECT_THROW(
      {
        try {
          load_geometry(p);
        } catch (const IoError& e) {
          EXPECT_NE(std::string(e.what()).find("empty grid"), std::string::npos);
          throw;
        }
      },
      IoError);
}

TEST_F(GeometryIo, DimensionMismatchRejected) {
  auto g = CellGeometry::random(2, 8, 0.5, 1);
  auto p = (dir / "cell2d.txt").string();
  save_geometry(g, p);
  EXPECT_THROW(
      {
        try {
          load_geometry(p, 3);
        } catch (const IoError& e) {
          EXPECT_NE(std::string(e.what()).find("dimension mismatch"),
                    std::string::npos);
          throw;
        }
      },
      IoError);
}

TEST_F(GeometryIo, MalformedHeaderRejected) {
  auto p = (dir / "junk.txt").string();
  {
    std::ofstream f(p);
    f << "not-a-cell-file 1 2 3\n0101\n";
  }
  EXPECT_THROW(load_geometry(p), IoError);
}

TEST_F(GeometryIo, NonBinaryVoxelRejected) {
  auto p = (dir / "bad2.txt").string();
  {
    std::ofstream f(p);
    f << "poroscale-cell v1 dim=2 n=2\n0121\n";
  }
  EXPECT_THROW(
      {
        try {
          load_geometry(p);
        } catch (const IoError& e) {
          EXPECT_NE(std::string(e.what()).find("non-binary"), std::string::npos);
          throw;
        }
      },
      IoError);
}
