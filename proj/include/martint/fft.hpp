#pragma once

#include <complex>
#include <vector>

namespace martint {

using cplx = std::complex<double>;

// In-place 3-d DFT on a cubic torus field (x fastest axis). Radix-2 when the
// side is a power of two, naive DFT otherwise; inverse is unnormalized.
void dft3(std::vector<cplx>& data, int side, bool inverse);

// convenience: forward transform of a real field
std::vector<cplx> dft3_forward_real(const std::vector<double>& field, int side);

} // namespace martint
