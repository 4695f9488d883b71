#include "veritas/edt.hpp"

#include "veritas/parallel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace veritas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform: out[q] = min_v ((q - v)^2 * w + f[v]),
// with w the squared axis spacing. Entries with f = +inf are skipped.
void dt1d(const double* f, double* out, int n, double w, int* vertices, double* bounds) {
    int first = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] < kInf) {
            first = q;
            break;
        }
    }
    if (first < 0) {
        for (int q = 0; q < n; ++q) out[q] = kInf;
        return;
    }

    int k = 0;
    vertices[0] = first;
    bounds[0] = -kInf;
    bounds[1] = kInf;
    for (int q = first + 1; q < n; ++q) {
        if (!(f[q] < kInf)) continue;
        double s;
        while (true) {
            const int v = vertices[k];
            s = ((f[q] + w * q * q) - (f[v] + w * v * v)) / (2.0 * w * (q - v));
            if (s <= bounds[k] && k > 0) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        vertices[k] = q;
        bounds[k] = s;
        bounds[k + 1] = kInf;
    }

    k = 0;
    for (int q = 0; q < n; ++q) {
        while (bounds[k + 1] < q) ++k;
        const int v = vertices[k];
        const double dq = static_cast<double>(q - v);
        out[q] = dq * dq * w + f[v];
    }
}

// Applies dt1d along one axis of the volume in place.
void pass_axis(std::vector<double>& grid, const GridMeta& meta, int axis) {
    const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];
    const double s = meta.spacing[axis];
    const double w = s * s;

    int len = 0;
    std::size_t stride = 0, rows = 0;
    if (axis == 0) {
        len = nx;
        stride = 1;
        rows = static_cast<std::size_t>(ny) * nz;
    } else if (axis == 1) {
        len = ny;
        stride = nx;
        rows = static_cast<std::size_t>(nx) * nz;
    } else {
        len = nz;
        stride = static_cast<std::size_t>(nx) * ny;
        rows = static_cast<std::size_t>(nx) * ny;
    }

    parallel_for(rows, [&](std::size_t begin, std::size_t end) {
        std::vector<double> line(len), out(len);
        std::vector<int> vertices(len);
        std::vector<double> bounds(len + 1);
        for (std::size_t r = begin; r < end; ++r) {
            std::size_t base = 0;
            if (axis == 0) {
                base = r * nx;
            } else if (axis == 1) {
                const std::size_t z = r / nx, x = r % nx;
                base = z * static_cast<std::size_t>(nx) * ny + x;
            } else {
                base = r;
            }
            for (int i = 0; i < len; ++i) line[i] = grid[base + i * stride];
            dt1d(line.data(), out.data(), len, w, vertices.data(), bounds.data());
            for (int i = 0; i < len; ++i) grid[base + i * stride] = out[i];
        }
    });
}

} // namespace

ScalarVolume distance_transform_squared(const MaskVolume& mask) {
    mask.validate();
    if (mask.empty_mask()) throw std::invalid_argument("distance_transform: empty mask");

    ScalarVolume out;
    out.meta = mask.meta;
    out.data.resize(mask.meta.voxel_count());
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.data[i] ? 0.0 : kInf;

    pass_axis(out.data, out.meta, 0);
    pass_axis(out.data, out.meta, 1);
    pass_axis(out.data, out.meta, 2);
    return out;
}

ScalarVolume distance_transform(const MaskVolume& mask) {
    ScalarVolume out = distance_transform_squared(mask);
    for (double& v : out.data) v = std::sqrt(v);
    return out;
}

} // namespace veritas
