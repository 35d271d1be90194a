#pragma once

#include <array>

#include "waveuie/image.hpp"
#include "waveuie/tensor.hpp"

// One-level 2D Haar transform.
//
// The four analysis kernels are outer products of the 1D filters
// L = [1, 1]/sqrt(2) and H = [1, -1]/sqrt(2), applied as 2x2 correlations
// with stride 2 (rows index the first factor, columns the second):
//
//   LL = 1/2 [ 1  1 ]   LH = 1/2 [ 1 -1 ]   HL = 1/2 [ 1  1 ]   HH = 1/2 [ 1 -1 ]
//            [ 1  1 ]            [ 1 -1 ]            [-1 -1 ]            [-1  1 ]
//
// The kernels are orthonormal, so the inverse is the transposed convolution
// with the same kernels summed over the four bands.

namespace waveuie {

enum class Band { LL = 0, LH = 1, HL = 2, HH = 3 };

/// Fixed 2x2 kernel of a band, row-major.
std::array<double, 4> haar_kernel(Band band);

struct SubBands {
    Image ll, lh, hl, hh;
    int parent_height = 0;
    int parent_width = 0;

    const Image& band(Band b) const;
};

/// Differentiable sub-bands of an NCHW batch.
struct TensorBands {
    Tensor ll, lh, hl, hh;
    std::int64_t parent_height = 0;
    std::int64_t parent_width = 0;
};

/// Odd extents are reflect-padded by one row/column; parent_* records the
/// original size so idwt2 can crop it away. Zero-sized input: DomainError.
TensorBands dwt2(const Tensor& batch);
Tensor idwt2(const TensorBands& bands);

SubBands dwt2(const Image& image);
Image idwt2(const SubBands& bands);

/// Color-codes |coefficients| normalized by the band maximum: black -> red
/// -> yellow. Per pixel the largest magnitude over channels is used. An
/// all-zero band renders black.
Image visualize_band(const Image& band);

}  // namespace waveuie
