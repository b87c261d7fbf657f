/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/obj_io.cpp
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
#include "facekit/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace facekit {

namespace {

// Parses "3", "3/1" or "3/1/2"; returns 0-based position and vt indices (-1 if absent).
std::pair<int, int> parse_face_corner(const std::string& token, size_t n_vertices, size_t n_uv)
{
    int v = 0, vt = -1;
    const size_t s1 = token.find('/');
    if (s1 == std::string::npos)
    {
        v = std::stoi(token);
    }
    else
    {
        v = std::stoi(token.substr(0, s1));
        const size_t s2 = token.find('/', s1 + 1);
        const std::string vt_str =
            s2 == std::string::npos ? token.substr(s1 + 1) : token.substr(s1 + 1, s2 - s1 - 1);
        if (!vt_str.empty())
            vt = std::stoi(vt_str);
        // A vn index after the second slash is accepted and ignored.
    }
    if (v < 0)
        v = static_cast<int>(n_vertices) + v + 1; // negative indices are relative
    if (vt < 0 && vt != -1)
        vt = static_cast<int>(n_uv) + vt + 1;
    return {v - 1, vt == -1 ? -1 : vt - 1};
}

} // namespace

Mesh read_obj(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_obj: cannot open " + path);
    Mesh mesh;
    std::vector<Vec2> vts;
    std::vector<int> vertex_vt(0);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#')
            continue;
        if (tag == "v")
        {
            double x, y, z;
            if (!(ss >> x >> y >> z))
                throw std::runtime_error("read_obj: malformed v record at line " +
                                         std::to_string(line_no));
            mesh.vertices.emplace_back(x, y, z);
            double r, g, b;
            if (ss >> r >> g >> b)
                mesh.colors.emplace_back(r, g, b);
        }
        else if (tag == "vt")
        {
            double u, v;
            if (!(ss >> u >> v))
                throw std::runtime_error("read_obj: malformed vt record at line " +
                                         std::to_string(line_no));
            vts.emplace_back(u, v);
        }
        else if (tag == "f")
        {
            std::array<int, 3> tri{};
            std::array<int, 3> tri_vt{-1, -1, -1};
            std::string token;
            int corner = 0;
            while (ss >> token)
            {
                if (corner >= 3)
                    throw std::runtime_error("read_obj: non-triangular face at line " +
                                             std::to_string(line_no));
                const auto [v, vt] = parse_face_corner(token, mesh.vertices.size(), vts.size());
                if (v < 0 || v >= static_cast<int>(mesh.vertices.size()))
                    throw std::runtime_error("read_obj: vertex index out of range at line " +
                                             std::to_string(line_no));
                tri[corner] = v;
                tri_vt[corner] = vt;
                ++corner;
            }
            if (corner != 3)
                throw std::runtime_error("read_obj: face with fewer than 3 corners at line " +
                                         std::to_string(line_no));
            mesh.triangles.push_back(tri);
            for (int c = 0; c < 3; ++c)
            {
                if (tri_vt[c] < 0)
                    continue;
                if (tri_vt[c] >= static_cast<int>(vts.size()))
                    throw std::runtime_error("read_obj: vt index out of range at line " +
                                             std::to_string(line_no));
                if (mesh.uv.size() < mesh.vertices.size())
                    mesh.uv.resize(mesh.vertices.size(), Vec2::Zero());
                mesh.uv[tri[c]] = vts[tri_vt[c]];
            }
        }
        // Other records (vn, o, g, s, mtllib, usemtl) are ignored.
    }
    if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size())
        throw std::runtime_error("read_obj: colors present on some but not all vertices in " +
                                 path);
    return mesh;
}

void write_obj(const Mesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_obj: cannot open " + path);
    char buf[160];
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
    {
        const Vec3& v = mesh.vertices[i];
        if (mesh.has_colors())
        {
            const Vec3& c = mesh.colors[i];
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g %.9g %.9g %.9g\n", v.x(), v.y(),
                          v.z(), c.x(), c.y(), c.z());
        }
        else
        {
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        }
        out << buf;
    }
    for (size_t i = 0; i < mesh.uv.size(); ++i)
    {
        std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", mesh.uv[i].x(), mesh.uv[i].y());
        out << buf;
    }
    for (const auto& tri : mesh.triangles)
    {
        if (mesh.has_uv())
            std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", tri[0] + 1, tri[0] + 1,
                          tri[1] + 1, tri[1] + 1, tri[2] + 1, tri[2] + 1);
        else
            std::snprintf(buf, sizeof(buf), "f %d %d %d\n", tri[0] + 1, tri[1] + 1, tri[2] + 1);
        out << buf;
    }
    if (!out)
        throw std::runtime_error("write_obj: write failed for " + path);
}

} // namespace facekit
