#pragma once

#include "tlgan/types.hpp"

#include <cstddef>
#include <vector>

namespace tlgan::nn {

/// Batched feature planes stored as one dense matrix: row = channel,
/// column = spatial position, columns ordered x-fastest then y then batch
/// (column (n*H + y)*W + x). Column-major storage keeps each position's
/// channel vector contiguous, which is what im2col wants.
template <class S>
struct FeatureMap {
    MatrixX<S> data;
    int batch = 0;
    int height = 0;
    int width = 0;

    int channels() const { return static_cast<int>(data.rows()); }
    Eigen::Index positions() const { return data.cols(); }
    Eigen::Index col(int n, int y, int x) const {
        return (static_cast<Eigen::Index>(n) * height + y) * width + x;
    }
    S& at(int c, int n, int y, int x) { return data(c, col(n, y, x)); }
    S at(int c, int n, int y, int x) const { return data(c, col(n, y, x)); }

    static FeatureMap zeros(int channels, int batch, int height, int width) {
        FeatureMap m;
        m.batch = batch;
        m.height = height;
        m.width = width;
        m.data = MatrixX<S>::Zero(channels, static_cast<Eigen::Index>(batch) * height * width);
        return m;
    }

    bool same_shape(const FeatureMap& o) const {
        return batch == o.batch && height == o.height && width == o.width &&
               data.rows() == o.data.rows();
    }
};

/// Reusable scratch memory for im2col buffers. max_bytes caps the size of
/// one buffer; convolutions chunk their column space to stay under it.
template <class S>
struct Workspace {
    std::vector<S> a, b;
    std::size_t max_bytes = std::size_t(256) << 20;

    static Eigen::Map<MatrixX<S>> mapped(std::vector<S>& buf, Eigen::Index rows,
                                         Eigen::Index cols) {
        if (buf.size() < static_cast<std::size_t>(rows * cols))
            buf.resize(static_cast<std::size_t>(rows * cols));
        return Eigen::Map<MatrixX<S>>(buf.data(), rows, cols);
    }

    Eigen::Index chunk_cols(Eigen::Index rows, Eigen::Index at_least, Eigen::Index total) const {
        Eigen::Index fit = static_cast<Eigen::Index>(max_bytes / (sizeof(S) * rows));
        return std::min(total, std::max(at_least, fit));
    }
};

/// Named view of one parameter array inside a network. `grad` is null for
/// frozen parameters (feature net) and for running statistics.
template <class S>
struct ParamRef {
    std::string name;
    S* value = nullptr;
    S* grad = nullptr;
    Eigen::Index size = 0;
    bool trainable = false;
};

}  // namespace tlgan::nn
