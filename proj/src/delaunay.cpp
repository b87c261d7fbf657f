/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: src/delaunay.cpp
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
#include "facekit/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace facekit {

namespace {

struct Tri
{
    int a, b, c;
    Vec2 circumcenter;
    double radius_sq;
    bool alive = true;
};

double cross2(const Vec2& o, const Vec2& p, const Vec2& q)
{
    return (p.x() - o.x()) * (q.y() - o.y()) - (p.y() - o.y()) * (q.x() - o.x());
}

bool circumcircle(const Vec2& a, const Vec2& b, const Vec2& c, Vec2& center, double& r_sq)
{
    const double d = 2.0 * cross2(a, b, c);
    if (std::abs(d) < 1e-12)
        return false;
    const double a2 = a.squaredNorm();
    const double b2 = b.squaredNorm();
    const double c2 = c.squaredNorm();
    center.x() = (a2 * (b.y() - c.y()) + b2 * (c.y() - a.y()) + c2 * (a.y() - b.y())) / d;
    center.y() = (a2 * (c.x() - b.x()) + b2 * (a.x() - c.x()) + c2 * (b.x() - a.x())) / d;
    r_sq = (a - center).squaredNorm();
    return true;
}

} // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points)
{
    const int n = static_cast<int>(points.size());
    if (n < 3)
        throw std::invalid_argument("delaunay_triangulate: need at least 3 points");

    Vec2 lo = points[0], hi = points[0];
    for (const Vec2& p : points)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 mid = 0.5 * (lo + hi);
    const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1.0});

    std::vector<Vec2> pts = points;
    pts.push_back(mid + Vec2(-20.0 * span, -span));
    pts.push_back(mid + Vec2(20.0 * span, -span));
    pts.push_back(mid + Vec2(0.0, 20.0 * span));
    const int s0 = n, s1 = n + 1, s2 = n + 2;

    std::vector<Tri> tris;
    auto add_tri = [&](int a, int b, int c) {
        Tri t{a, b, c, Vec2::Zero(), 0.0, true};
        if (!circumcircle(pts[a], pts[b], pts[c], t.circumcenter, t.radius_sq))
            return; // collinear sliver; skipping keeps the hole fill consistent
        tris.push_back(t);
    };
    add_tri(s0, s1, s2);

    std::vector<int> bad;
    std::map<std::pair<int, int>, int> edge_count;
    for (int ip = 0; ip < n; ++ip)
    {
        const Vec2& p = pts[ip];
        bad.clear();
        edge_count.clear();
        for (size_t t = 0; t < tris.size(); ++t)
        {
            if (!tris[t].alive)
                continue;
            // A touch of slack keeps cocircular grid points from flickering.
            if ((p - tris[t].circumcenter).squaredNorm() <= tris[t].radius_sq * (1.0 + 1e-12))
                bad.push_back(static_cast<int>(t));
        }
        for (const int t : bad)
        {
            const int v[3] = {tris[t].a, tris[t].b, tris[t].c};
            for (int e = 0; e < 3; ++e)
            {
                const int x = v[e], y = v[(e + 1) % 3];
                ++edge_count[{std::min(x, y), std::max(x, y)}];
            }
            tris[t].alive = false;
        }
        // Hole boundary = edges owned by exactly one bad triangle.
        for (const int t : bad)
        {
            const int v[3] = {tris[t].a, tris[t].b, tris[t].c};
            for (int e = 0; e < 3; ++e)
            {
                const int x = v[e], y = v[(e + 1) % 3];
                if (edge_count[{std::min(x, y), std::max(x, y)}] == 1)
                    add_tri(x, y, ip);
            }
        }
    }

    std::vector<std::array<int, 3>> out;
    for (const Tri& t : tris)
    {
        if (!t.alive || t.a >= n || t.b >= n || t.c >= n)
            continue;
        // Canonical winding: counter-clockwise with y pointing down.
        if (cross2(pts[t.a], pts[t.b], pts[t.c]) < 0.0)
            out.push_back({t.a, t.c, t.b});
        else
            out.push_back({t.a, t.b, t.c});
    }
    return out;
}

} // namespace facekit
