#include "martint/fft.hpp"

#include <cmath>

namespace martint {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft1(cplx* a, int n, int stride, bool inverse, std::vector<cplx>& scratch) {
    if (is_pow2(n)) {
        // gather, iterative radix-2, scatter
        scratch.resize(n);
        for (int i = 0; i < n; ++i) scratch[i] = a[i * stride];
        int lg = 0;
        while ((1 << lg) < n) ++lg;
        for (int i = 0; i < n; ++i) {
            int j = 0;
            for (int b = 0; b < lg; ++b)
                if (i & (1 << b)) j |= 1 << (lg - 1 - b);
            if (i < j) std::swap(scratch[i], scratch[j]);
        }
        for (int len = 2; len <= n; len <<= 1) {
            double ang = 2.0 * M_PI / len * (inverse ? 1.0 : -1.0);
            cplx wl(std::cos(ang), std::sin(ang));
            for (int i = 0; i < n; i += len) {
                cplx w(1.0, 0.0);
                for (int j = 0; j < len / 2; ++j) {
                    cplx u = scratch[i + j];
                    cplx v = scratch[i + j + len / 2] * w;
                    scratch[i + j] = u + v;
                    scratch[i + j + len / 2] = u - v;
                    w *= wl;
                }
            }
        }
        for (int i = 0; i < n; ++i) a[i * stride] = scratch[i];
    } else {
        scratch.assign(n, cplx(0, 0));
        for (int k = 0; k < n; ++k) {
            cplx acc(0, 0);
            for (int j = 0; j < n; ++j) {
                double ang = 2.0 * M_PI * j * k / n * (inverse ? 1.0 : -1.0);
                acc += a[j * stride] * cplx(std::cos(ang), std::sin(ang));
            }
            scratch[k] = acc;
        }
        for (int i = 0; i < n; ++i) a[i * stride] = scratch[i];
    }
}

} // namespace

void dft3(std::vector<cplx>& data, int side, bool inverse) {
    const int n = side;
    std::vector<cplx> scratch;
    // x axis (fastest)
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y) fft1(&data[(static_cast<std::size_t>(z) * n + y) * n], n, 1, inverse, scratch);
    // y axis
    for (int z = 0; z < n; ++z)
        for (int x = 0; x < n; ++x)
            fft1(&data[static_cast<std::size_t>(z) * n * n + x], n, n, inverse, scratch);
    // z axis
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            fft1(&data[static_cast<std::size_t>(y) * n + x], n, n * n, inverse, scratch);
}

std::vector<cplx> dft3_forward_real(const std::vector<double>& field, int side) {
    std::vector<cplx> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = cplx(field[i], 0.0);
    dft3(out, side, false);
    return out;
}

} // namespace martint
