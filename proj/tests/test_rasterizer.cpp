/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: tests/test_rasterizer.cpp
 *
 * Copyright 2026 The facekit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "facekit/fixtures.hpp"
#include "facekit/rasterizer.hpp"
#include "facekit/rng.hpp"

#include <doctest.h>

using namespace facekit;

namespace {

std::vector<Vec3> uniform_texture(const Mesh& mesh, const Vec3& color)
{
    return std::vector<Vec3>(mesh.vertices.size(), color);
}

// Reference coverage: exact point-in-triangle with inclusive edges plus a
// z-buffer, brute force over all pixels and triangles. Pixels closer than
// margin to any projected edge are reported as "uncertain" and skipped.
struct BruteForceResult
{
    Image<int> tri_index;
    Image<uint8_t> certain;
};

BruteForceResult brute_force_rasterize(const Mesh& mesh, const CameraPose& pose, int width,
                                       int height, double margin)
{
    BruteForceResult out{Image<int>(width, height, RenderBuffer::kBackgroundIndex),
                         Image<uint8_t>(width, height, 1)};
    Image<double> depth(width, height, -std::numeric_limits<double>::infinity());
    std::vector<Vec3> projected(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        projected[i] = pose.apply(mesh.vertices[i]);
    auto edge_distance = [](const Vec2& a, const Vec2& b, const Vec2& p) {
        const Vec2 ab = b - a;
        const double len = ab.norm();
        if (len < 1e-12)
            return (p - a).norm();
        const double t = std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0);
        return (p - (a + t * ab)).norm();
    };
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
        {
            const Vec2 q(x, y);
            for (size_t t = 0; t < mesh.triangles.size(); ++t)
            {
                const auto& tri = mesh.triangles[t];
                const Vec2 a = projected[tri[0]].head<2>();
                const Vec2 b = projected[tri[1]].head<2>();
                const Vec2 c = projected[tri[2]].head<2>();
                const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
                if (area == 0.0)
                    continue;
                const double w0 = ((c - b).x() * (q - b).y() - (c - b).y() * (q - b).x()) / area;
                const double w1 = ((a - c).x() * (q - c).y() - (a - c).y() * (q - c).x()) / area;
                const double w2 = 1.0 - w0 - w1;
                const bool inside = w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0;
                if (std::min({edge_distance(a, b, q), edge_distance(b, c, q),
                              edge_distance(c, a, q)}) <= margin)
                    out.certain.at(x, y) = 0;
                if (!inside)
                    continue;
                const double z = w0 * projected[tri[0]].z() + w1 * projected[tri[1]].z() +
                                 w2 * projected[tri[2]].z();
                if (z > depth.at(x, y))
                {
                    depth.at(x, y) = z;
                    out.tri_index.at(x, y) = static_cast<int>(t);
                }
                else if (z == depth.at(x, y))
                {
                    out.certain.at(x, y) = 0; // exact depth tie: order-defined
                }
            }
        }
    return out;
}

Mesh random_mesh(Rng& rng, int triangle_count, double extent)
{
    Mesh mesh;
    for (int t = 0; t < triangle_count; ++t)
    {
        const int base = mesh.vertex_count();
        const Vec3 center(rng.uniform(0.0, extent), rng.uniform(0.0, extent),
                          rng.uniform(-10.0, 10.0));
        for (int k = 0; k < 3; ++k)
            mesh.vertices.push_back(center + Vec3(rng.normal() * extent / 6,
                                                  rng.normal() * extent / 6,
                                                  rng.normal() * 2.0));
        mesh.triangles.push_back({base, base + 1, base + 2});
    }
    return mesh;
}

} // namespace

TEST_CASE("mesh projecting outside the window renders all-background")
{
    Mesh mesh = make_icosphere(1, 5.0);
    CameraPose pose;
    pose.t3d = Vec3(-100, -100, 0);
    const RenderBuffer buf = rasterize(mesh, pose, uniform_texture(mesh, Vec3(1, 0, 0)), 32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
        {
            CHECK(buf.tri_index.at(x, y) == RenderBuffer::kBackgroundIndex);
            CHECK(buf.depth.at(x, y) == -std::numeric_limits<double>::infinity());
        }
}

TEST_CASE("one axis-aligned triangle covers exactly the pixels with interior centers")
{
    Mesh mesh;
    mesh.vertices = {{2, 2, 0}, {10, 2, 0}, {2, 10, 0}};
    mesh.triangles = {{0, 1, 2}};
    const RenderBuffer buf =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3(1, 0, 0)), 16, 16);
    int covered = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
        {
            const bool interior = x >= 2 && y >= 2 && (x - 2) + (y - 2) < 8;
            if (buf.is_foreground(x, y))
            {
                ++covered;
                CHECK((buf.color.at(x, y) - Vec3(1, 0, 0)).norm() < 1e-12);
                CHECK(buf.bary.at(x, y).sum() == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(buf.bary.at(x, y).minCoeff() >= -1e-9);
            }
            // Strictly interior centers must be covered; the hypotenuse and
            // edges follow the fill rule.
            if (x > 2 && y > 2 && (x - 2) + (y - 2) < 8)
                CHECK(buf.is_foreground(x, y));
            if (!interior && !(x >= 2 && y >= 2 && (x - 2) + (y - 2) <= 8))
                CHECK(!buf.is_foreground(x, y));
        }
    CHECK(covered > 20);
}

TEST_CASE("nearer triangle wins under larger-is-nearer depth")
{
    Mesh mesh;
    mesh.vertices = {{0, 0, 1},  {20, 0, 1},  {0, 20, 1},
                     {0, 0, 2},  {20, 0, 2},  {0, 20, 2}};
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    std::vector<Vec3> texture = {{1, 0, 0}, {1, 0, 0}, {1, 0, 0},
                                 {0, 1, 0}, {0, 1, 0}, {0, 1, 0}};
    const RenderBuffer buf = rasterize(mesh, CameraPose{}, texture, 24, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            if (buf.is_foreground(x, y))
            {
                CHECK(buf.tri_index.at(x, y) == 1);
                CHECK((buf.color.at(x, y) - Vec3(0, 1, 0)).norm() < 1e-12);
                CHECK(buf.depth.at(x, y) == doctest::Approx(2.0));
            }
}

TEST_CASE("rasterization matches the brute-force oracle away from edges")
{
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial)
    {
        const Mesh mesh = random_mesh(rng, 40 + 16 * trial, 64.0);
        const RenderBuffer buf =
            rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 64, 64);
        const BruteForceResult oracle = brute_force_rasterize(mesh, CameraPose{}, 64, 64, 0.5);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (oracle.certain.at(x, y))
                    CHECK(buf.tri_index.at(x, y) == oracle.tri_index.at(x, y));
    }
}

TEST_CASE("rasterization is deterministic")
{
    Rng rng(73);
    const Mesh mesh = random_mesh(rng, 60, 48.0);
    const RenderBuffer a =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 48, 48);
    const RenderBuffer b =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 48, 48);
    CHECK(a.depth.data() == b.depth.data());
    CHECK(a.tri_index.data() == b.tri_index.data());
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            CHECK(a.bary.at(x, y) == b.bary.at(x, y));
}

TEST_CASE("adjacent triangles cover shared-edge pixels exactly once")
{
    // Two triangles sharing the diagonal of a square: watertight and
    // single-owner along the shared edge regardless of the diagonal pixels.
    Mesh mesh;
    mesh.vertices = {{1, 1, 0}, {13, 1, 0}, {13, 13, 0}, {1, 13, 0}};
    mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
    const RenderBuffer buf =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 16, 16);
    for (int x = 2; x < 13; ++x)
        CHECK(buf.is_foreground(x, x)); // diagonal pixels covered exactly once
}

TEST_CASE("render_plaster shading")
{
    SUBCASE("frontal plane renders at full intensity")
    {
        Mesh plane;
        plane.vertices = {{-10, -10, 0}, {10, -10, 0}, {-10, 10, 0}, {10, 10, 0}};
        plane.triangles = {{0, 1, 2}, {1, 3, 2}};
        PlasterFraming framing{1.0, Vec3::Zero()};
        const RenderBuffer buf = render_plaster(plane, Mat3::Identity(), 32, 32, framing);
        int fg = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (buf.is_foreground(x, y))
                {
                    ++fg;
                    CHECK(buf.color.at(x, y)[0] == doctest::Approx(1.0).epsilon(1e-9));
                }
        CHECK(fg > 200);
    }
    SUBCASE("grazing view kills the intensity")
    {
        Mesh plane;
        plane.vertices = {{-10, -10, 0}, {10, -10, 0}, {-10, 10, 0}, {10, 10, 0}};
        plane.triangles = {{0, 1, 2}, {1, 3, 2}};
        PlasterFraming framing{1.0, Vec3::Zero()};
        const Mat3 yaw90 = rotation_pitch_yaw(0, 90);
        const RenderBuffer buf = render_plaster(plane, yaw90, 32, 32, framing);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (buf.is_foreground(x, y))
                    CHECK(buf.color.at(x, y)[0] < 1e-6);
    }
    SUBCASE("icosphere matches the analytic Lambert shading")
    {
        const Mesh sphere = make_icosphere(3, 1.0);
        PlasterFraming framing{28.0, Vec3::Zero()};
        const RenderBuffer buf = render_plaster(sphere, Mat3::Identity(), 64, 64, framing);
        int checked = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
            {
                if (!buf.is_foreground(x, y))
                    continue;
                const double rx = (x - 32.0) / 28.0;
                const double ry = (y - 32.0) / 28.0;
                const double r2 = rx * rx + ry * ry;
                if (r2 > 0.8) // stay away from the silhouette
                    continue;
                // For a unit sphere the surface cosine at projected radius r
                // is sqrt(1 - r^2).
                const double expected = std::sqrt(1.0 - r2);
                CHECK(std::abs(buf.color.at(x, y)[0] - expected) < 0.02);
                ++checked;
            }
        CHECK(checked > 500);
    }
    SUBCASE("vertex colors are ignored")
    {
        Mesh sphere = make_icosphere(2, 1.0);
        PlasterFraming framing{12.0, Vec3::Zero()};
        const RenderBuffer plain = render_plaster(sphere, Mat3::Identity(), 32, 32, framing);
        sphere.colors.assign(sphere.vertices.size(), Vec3(0.2, 0.9, 0.4));
        const RenderBuffer colored = render_plaster(sphere, Mat3::Identity(), 32, 32, framing);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                CHECK(plain.color.at(x, y) == colored.color.at(x, y));
    }
}

TEST_CASE("inverse_render")
{
    Mesh mesh;
    mesh.vertices = {{2, 2, 0}, {12, 2, 0}, {2, 12, 0}};
    mesh.triangles = {{0, 1, 2}};
    const RenderBuffer buf =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 16, 16);

    SUBCASE("zero error map gives zero weights")
    {
        const Image<double> err(16, 16, 0.0);
        for (const double w : inverse_render(buf, err, mesh.vertex_count()))
            CHECK(w == 0.0);
    }
    SUBCASE("single pixel distributes by barycentric weights")
    {
        Image<double> err(16, 16, 0.0);
        int px = -1, py = -1;
        for (int y = 0; y < 16 && px < 0; ++y)
            for (int x = 0; x < 16 && px < 0; ++x)
                if (buf.is_foreground(x, y))
                {
                    px = x;
                    py = y;
                }
        REQUIRE(px >= 0);
        err.at(px, py) = 1.0;
        const std::vector<double> weights = inverse_render(buf, err, mesh.vertex_count());
        const Vec3& bary = buf.bary.at(px, py);
        for (int k = 0; k < 3; ++k)
            CHECK(weights[k] == doctest::Approx(bary[k]).epsilon(1e-12));
    }
    SUBCASE("uniform error conserves the foreground pixel count")
    {
        Image<double> err(16, 16, 1.0);
        int fg = 0;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                fg += buf.is_foreground(x, y) ? 1 : 0;
        const std::vector<double> weights = inverse_render(buf, err, mesh.vertex_count());
        double total = 0.0;
        for (const double w : weights)
            total += w;
        CHECK(total == doctest::Approx(fg).epsilon(1e-6));
    }
}

TEST_CASE("inverse_render conserves mass on random scenes")
{
    Rng rng(79);
    const Mesh mesh = random_mesh(rng, 50, 48.0);
    const RenderBuffer buf =
        rasterize(mesh, CameraPose{}, uniform_texture(mesh, Vec3::Ones()), 48, 48);
    Image<double> err(48, 48, 0.0);
    double fg_total = 0.0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
        {
            err.at(x, y) = rng.uniform();
            if (buf.is_foreground(x, y))
                fg_total += err.at(x, y);
        }
    const std::vector<double> weights = inverse_render(buf, err, mesh.vertex_count());
    double total = 0.0;
    for (const double w : weights)
        total += w;
    CHECK(total == doctest::Approx(fg_total).epsilon(1e-9));
}

TEST_CASE("error beyond the rendered silhouette never reaches contour vertices")
{
    // Concentric-disk pair: the target disk is wider than the output disk,
    // so target rim pixels land on the output's background and their error
    // is silently discarded by the output-side trace.
    auto disk = [](double radius) {
        Mesh mesh;
        mesh.vertices.emplace_back(0, 0, 0);
        const int segments = 24;
        for (int s = 0; s < segments; ++s)
        {
            const double a = 2.0 * M_PI * s / segments;
            mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
        }
        for (int s = 0; s < segments; ++s)
            mesh.triangles.push_back({0, 1 + s, 1 + (s + 1) % segments});
        return mesh;
    };
    const Mesh small = disk(8.0);
    const Mesh large = disk(14.0);
    CameraPose center;
    center.t3d = Vec3(16, 16, 0);
    const RenderBuffer small_buf =
        rasterize(small, center, uniform_texture(small, Vec3::Ones()), 32, 32);
    const RenderBuffer large_buf =
        rasterize(large, center, uniform_texture(large, Vec3::Ones()), 32, 32);

    // Error wherever the two silhouettes disagree (the annulus).
    Image<double> err(32, 32, 0.0);
    int annulus = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if (small_buf.is_foreground(x, y) != large_buf.is_foreground(x, y))
            {
                err.at(x, y) = 1.0;
                ++annulus;
            }
    REQUIRE(annulus > 0);

    const std::vector<double> through_small = inverse_render(small_buf, err, small.vertex_count());
    const std::vector<double> through_large = inverse_render(large_buf, err, large.vertex_count());
    // The output-side trace starves every rim vertex of the wider target...
    for (size_t i = 1; i < through_small.size(); ++i)
        CHECK(through_small[i] == 0.0);
    // ...while the target-side trace recovers them.
    double rim_weight = 0.0;
    for (size_t i = 1; i < through_large.size(); ++i)
        rim_weight += through_large[i];
    CHECK(rim_weight > 0.0);
}

TEST_CASE("phong_shade")
{
    const Mesh sphere = make_icosphere(1);
    const std::vector<Vec3> texture(sphere.vertices.size(), Vec3(0.5, 0.25, 0.75));

    SUBCASE("ambient-only returns the texture")
    {
        PhongParams lighting;
        lighting.amb = Vec3::Ones();
        lighting.dir = Vec3::Zero();
        const std::vector<Vec3> out = phong_shade(sphere, texture, lighting);
        for (size_t i = 0; i < out.size(); ++i)
            CHECK((out[i] - texture[i]).norm() < 1e-12);
    }
    SUBCASE("aligned normal and light reproduce the texture")
    {
        VertexNormalField normals = {Vec3(0, 0, 1)};
        PhongParams lighting;
        lighting.amb = Vec3::Zero();
        lighting.dir = Vec3::Ones();
        const std::vector<Vec3> out =
            phong_shade(normals, {Vec3(0.5, 0.25, 0.75)}, lighting);
        CHECK((out[0] - Vec3(0.5, 0.25, 0.75)).norm() < 1e-12);
    }
    SUBCASE("hand-evaluated specular case")
    {
        VertexNormalField normals = {Vec3(0, 0, 1)};
        PhongParams lighting;
        lighting.amb = Vec3::Zero();
        lighting.dir = Vec3::Ones();
        lighting.k_s = 0.5;
        lighting.nu = 2.0;
        const std::vector<Vec3> out = phong_shade(normals, {Vec3::Zero()}, lighting);
        // r = 2<n,l>n - l = (0,0,1); <r,ve> = 1; k_s * dir * 1^2 = 0.5.
        CHECK((out[0] - Vec3(0.5, 0.5, 0.5)).norm() < 1e-12);
    }
    SUBCASE("negative shininess is an error")
    {
        PhongParams lighting;
        lighting.nu = -1.0;
        CHECK_THROWS_AS(phong_shade(sphere, texture, lighting), std::invalid_argument);
    }
    SUBCASE("non-unit light direction is an error")
    {
        PhongParams lighting;
        lighting.l = Vec3(0, 0, 2);
        CHECK_THROWS_AS(phong_shade(sphere, texture, lighting), std::invalid_argument);
    }
}
