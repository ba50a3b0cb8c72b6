#include "stylecloak/wavelet.hpp"

namespace stylecloak {

namespace {

// Duplicate the last row/column when an extent is odd.
ImageTensor pad_to_even(const ImageTensor& x) {
    const int h = x.height + (x.height % 2);
    const int w = x.width + (x.width % 2);
    if (h == x.height && w == x.width) return x;
    ImageTensor out(h, w, x.channels, x.is_signed);
    for (int y = 0; y < h; ++y) {
        const int sy = y < x.height ? y : x.height - 1;
        for (int xx = 0; xx < w; ++xx) {
            const int sx = xx < x.width ? xx : x.width - 1;
            for (int c = 0; c < x.channels; ++c)
                out.at(y, xx, c) = x.at(sy, sx, c);
        }
    }
    return out;
}

}  // namespace

WaveletPyramid dwt2(const ImageTensor& input) {
    const ImageTensor x = pad_to_even(input);
    const int hh2 = x.height / 2;
    const int ww2 = x.width / 2;
    WaveletPyramid p;
    p.orig_height = input.height;
    p.orig_width = input.width;
    p.ll = ImageTensor(hh2, ww2, x.channels, true);
    p.lh = ImageTensor(hh2, ww2, x.channels, true);
    p.hl = ImageTensor(hh2, ww2, x.channels, true);
    p.hh = ImageTensor(hh2, ww2, x.channels, true);

    // Per 2x2 block [[a,b],[c,d]] the orthonormal Haar coefficients are
    // half of the four sign patterns; lh carries the vertical (row)
    // difference, hl the horizontal one.
    for (int i = 0; i < hh2; ++i) {
        for (int j = 0; j < ww2; ++j) {
            for (int c = 0; c < x.channels; ++c) {
                const double a = x.at(2 * i, 2 * j, c);
                const double b = x.at(2 * i, 2 * j + 1, c);
                const double cc = x.at(2 * i + 1, 2 * j, c);
                const double d = x.at(2 * i + 1, 2 * j + 1, c);
                p.ll.at(i, j, c) = 0.5 * (a + b + cc + d);
                p.lh.at(i, j, c) = 0.5 * (a + b - cc - d);
                p.hl.at(i, j, c) = 0.5 * (a - b + cc - d);
                p.hh.at(i, j, c) = 0.5 * (a - b - cc + d);
            }
        }
    }
    return p;
}

ImageTensor idwt2(const WaveletPyramid& p) {
    if (!p.ll.same_shape(p.lh) || !p.ll.same_shape(p.hl) ||
        !p.ll.same_shape(p.hh))
        throw InvalidInputError("idwt2: subband shape mismatch");

    const int h = 2 * p.ll.height;
    const int w = 2 * p.ll.width;
    ImageTensor x(h, w, p.ll.channels, true);
    for (int i = 0; i < p.ll.height; ++i) {
        for (int j = 0; j < p.ll.width; ++j) {
            for (int c = 0; c < p.ll.channels; ++c) {
                const double ll = p.ll.at(i, j, c);
                const double lh = p.lh.at(i, j, c);
                const double hl = p.hl.at(i, j, c);
                const double hh = p.hh.at(i, j, c);
                x.at(2 * i, 2 * j, c) = 0.5 * (ll + lh + hl + hh);
                x.at(2 * i, 2 * j + 1, c) = 0.5 * (ll + lh - hl - hh);
                x.at(2 * i + 1, 2 * j, c) = 0.5 * (ll - lh + hl - hh);
                x.at(2 * i + 1, 2 * j + 1, c) = 0.5 * (ll - lh - hl + hh);
            }
        }
    }

    const int oh = p.orig_height > 0 ? p.orig_height : h;
    const int ow = p.orig_width > 0 ? p.orig_width : w;
    if (oh == h && ow == w) return x;
    ImageTensor cropped(oh, ow, x.channels, true);
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
            for (int c = 0; c < x.channels; ++c)
                cropped.at(y, xx, c) = x.at(y, xx, c);
    return cropped;
}

ImageTensor homogeneous_component(const ImageTensor& x) {
    WaveletPyramid p = dwt2(x);
    p.lh.data.assign(p.lh.data.size(), 0.0);
    p.hl.data.assign(p.hl.data.size(), 0.0);
    p.hh.data.assign(p.hh.data.size(), 0.0);
    return idwt2(p);
}

ImageTensor structural_component(const ImageTensor& x) {
    ImageTensor homo = homogeneous_component(x);
    ImageTensor out(x.height, x.width, x.channels, true);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] - homo.data[i];
    return out;
}

}  // namespace stylecloak
