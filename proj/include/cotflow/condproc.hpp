#pragma once

#include "cotflow/common.hpp"
#include "cotflow/rng.hpp"

#include <Eigen/SVD>

#include <iostream>
#include <limits>
#include <optional>
#include <vector>

namespace cotflow::condproc {

/// Linear condition encoder: e = components * (o - mean), components being
/// the top-k right singular vectors of the centered data.
struct PcaEncoder {
    Vector mean;
    Matrix components;        // k x d, orthonormal rows
    Vector singular_values;   // top-k singular values of the centered data
    int k = 0;
};

inline PcaEncoder fit_pca(const Matrix& data, int k = 100) {
    require(data.rows() >= 2, "fit_pca: need at least 2 samples");
    require(k >= 1, "fit_pca: k must be >= 1");
    const int d = static_cast<int>(data.cols());
    const int max_k = std::min<int>(static_cast<int>(data.rows()), d);
    if (k > max_k) {
        std::cerr << "fit_pca: clipping k from " << k << " to " << max_k << "\n";
        k = max_k;
    }
    PcaEncoder enc;
    enc.mean = data.colwise().mean().transpose();
    Matrix centered = data.rowwise() - enc.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    enc.k = k;
    enc.components = svd.matrixV().leftCols(k).transpose();
    enc.singular_values = svd.singularValues().head(k);
    // Sign convention: the largest-magnitude entry of each component is
    // positive (first such entry on ties).
    for (int r = 0; r < k; ++r) {
        int arg = 0;
        double best = -1.0;
        for (int c = 0; c < d; ++c) {
            if (std::abs(enc.components(r, c)) > best) {
                best = std::abs(enc.components(r, c));
                arg = c;
            }
        }
        if (enc.components(r, arg) < 0) enc.components.row(r) = -enc.components.row(r);
    }
    return enc;
}

inline Vector encode(const PcaEncoder& enc, const Vector& o) {
    require(o.size() == enc.mean.size(), "encode: dimension mismatch");
    return enc.components * (o - enc.mean);
}

inline Matrix encode_batch(const PcaEncoder& enc, const Matrix& o) {
    require(o.cols() == enc.mean.size(), "encode: dimension mismatch");
    return (o.rowwise() - enc.mean.transpose()) * enc.components.transpose();
}

/// K-means quantizer; points are represented by their nearest centroid.
struct KMeansDiscretizer {
    Matrix centroids;  // K x k
    int K = 0;
    double inertia = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline int nearest_centroid(const Matrix& centroids, const Vector& e) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c).transpose() - e).squaredNorm();
        if (d < best_d) {  // strict: ties go to the lowest centroid index
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// Lloyd iterations from a k-means++ seeding; runs until the centroid shift
/// drops below 1e-6 or 100 iterations. Empty clusters are reseeded to the
/// point farthest from its assigned centroid.
inline KMeansDiscretizer fit_kmeans(const Matrix& points, int K, std::uint64_t seed) {
    const int n = static_cast<int>(points.rows());
    require(K >= 1, "fit_kmeans: K must be >= 1");
    require(n >= K, "fit_kmeans: need at least K points");
    require_finite(points, "fit_kmeans points");

    Rng rng(seed);
    KMeansDiscretizer disc;
    disc.K = K;
    disc.seed = seed;
    Matrix& centroids = disc.centroids;
    centroids.resize(K, points.cols());

    // k-means++ seeding.
    centroids.row(0) = points.row(rng.below(n));
    Vector d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < K; ++c) {
        const double total = d2.sum();
        int pick;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.row(c) = points.row(pick);
        d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (int i = 0; i < n; ++i)
            assign[i] = detail::nearest_centroid(centroids, points.row(i).transpose());

        Matrix next = Matrix::Zero(K, points.cols());
        std::vector<int> counts(K, 0);
        for (int i = 0; i < n; ++i) {
            next.row(assign[i]) += points.row(i);
            ++counts[assign[i]];
        }
        for (int c = 0; c < K; ++c) {
            if (counts[c] > 0) {
                next.row(c) /= counts[c];
            } else {
                // Reseed to the point farthest from its assigned centroid.
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = (points.row(i) - centroids.row(assign[i])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next.row(c) = points.row(far);
            }
        }
        const double shift = (next - centroids).rowwise().norm().maxCoeff();
        centroids = next;
        if (shift < 1e-6) break;
    }

    for (int i = 0; i < n; ++i)
        assign[i] = detail::nearest_centroid(centroids, points.row(i).transpose());
    disc.inertia = 0.0;
    for (int i = 0; i < n; ++i)
        disc.inertia += (points.row(i) - centroids.row(assign[i])).squaredNorm();
    return disc;
}

/// Nearest centroid (ties to the lowest index).
inline Vector discretize(const KMeansDiscretizer& disc, const Vector& e) {
    require(e.size() == disc.centroids.cols(), "discretize: dimension mismatch");
    return disc.centroids.row(detail::nearest_centroid(disc.centroids, e)).transpose();
}

inline int discretize_index(const KMeansDiscretizer& disc, const Vector& e) {
    require(e.size() == disc.centroids.cols(), "discretize: dimension mismatch");
    return detail::nearest_centroid(disc.centroids, e);
}

inline Matrix discretize_batch(const KMeansDiscretizer& disc, const Matrix& e) {
    require(e.cols() == disc.centroids.cols(), "discretize: dimension mismatch");
    Matrix out(e.rows(), e.cols());
    for (int i = 0; i < e.rows(); ++i)
        out.row(i) = discretize(disc, e.row(i).transpose()).transpose();
    return out;
}

/// Encoder + discretizer fitted once on the full dataset before training.
/// Conditions of width <= pca bypass threshold skip PCA (pca_dims = 0 keeps
/// the raw channels, matching 1-D synthetic conditions).
struct CondProcessor {
    std::optional<PcaEncoder> pca;
    KMeansDiscretizer kmeans;

    static CondProcessor fit(const Matrix& conditions, int K, int pca_dims,
                             std::uint64_t seed) {
        CondProcessor cp;
        Matrix encoded = conditions;
        if (pca_dims > 0 && conditions.cols() > 1) {
            cp.pca = fit_pca(conditions, pca_dims);
            encoded = encode_batch(*cp.pca, conditions);
        }
        cp.kmeans = fit_kmeans(encoded, K, seed);
        return cp;
    }

    Matrix encoded(const Matrix& conditions) const {
        return pca ? encode_batch(*pca, conditions) : conditions;
    }

    Matrix discretized(const Matrix& conditions) const {
        return discretize_batch(kmeans, encoded(conditions));
    }
};

}  // namespace cotflow::condproc
