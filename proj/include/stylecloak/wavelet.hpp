#pragma once

#include "stylecloak/image.hpp"

namespace stylecloak {

// One-level 2-D orthonormal Haar decomposition. Subbands are (H/2)x(W/2)
// signed coefficient planes; orig_* record the pre-pad extent so synthesis
// can crop odd-sized inputs back exactly.
struct WaveletPyramid {
    ImageTensor ll, lh, hl, hh;
    int orig_height = 0;
    int orig_width = 0;
};

// Analysis with filters (1,1)/sqrt(2) and (1,-1)/sqrt(2), stride 2, per
// channel. Odd extents are symmetric-padded by one row/column first.
WaveletPyramid dwt2(const ImageTensor& x);

// Exact synthesis inverse of dwt2 (perfect reconstruction).
ImageTensor idwt2(const WaveletPyramid& p);

// Reconstruction from the ll subband alone: the low-frequency, homogeneous
// part of the image. A self-adjoint projection, so it is its own VJP.
ImageTensor homogeneous_component(const ImageTensor& x);

// Residual x - homogeneous_component(x): edge and texture detail. Signed.
ImageTensor structural_component(const ImageTensor& x);

}  // namespace stylecloak
