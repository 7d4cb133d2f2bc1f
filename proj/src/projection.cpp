#include "kgsub/projection.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

ProjectionMethod parse_projection_method(std::string_view name) {
    if (name == "tsne" || name == "t-sne") {
        return ProjectionMethod::Tsne;
    }
    if (name == "pca") {
        return ProjectionMethod::Pca;
    }
    throw ConfigError("unknown projection method '" + std::string(name) + "' (expected tsne or pca)");
}

std::string_view projection_method_name(ProjectionMethod method) {
    return method == ProjectionMethod::Tsne ? "tsne" : "pca";
}

namespace {

Matrix squared_distances(const Matrix& points) {
    const auto n = points.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = squared_distance(points.row(i), points.row(j));
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

// Binary search on the Gaussian precision so row i has the requested entropy.
void conditional_row(const Matrix& dist, std::size_t i, double perplexity, std::span<double> out) {
    const auto n = dist.rows();
    const double target = std::log(perplexity);
    double beta = 1.0;
    double lo = 0;
    double hi = std::numeric_limits<double>::infinity();

    for (int step = 0; step < 200; ++step) {
        // subtract the smallest distance so exp() cannot underflow everywhere
        double min_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                min_d = std::min(min_d, dist(i, j));
            }
        }
        double sum = 0;
        double weighted = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                out[j] = 0;
                continue;
            }
            out[j] = std::exp(-(dist(i, j) - min_d) * beta);
            sum += out[j];
            weighted += (dist(i, j) - min_d) * out[j];
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        for (auto& p : out) {
            p /= sum;
        }
        const double diff = entropy - target;
        if (std::abs(diff) < 1e-5) {
            return;
        }
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
        } else {
            hi = beta;
            beta = (beta + lo) / 2;
        }
    }
}

double kl_divergence(const Matrix& p, const Matrix& y) {
    const auto n = p.rows();
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                z += 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
            }
        }
    }
    double kl = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0) {
                continue;
            }
            const double q = std::max(1.0 / (1.0 + squared_distance(y.row(i), y.row(j))) / z, 1e-12);
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    }
    return kl;
}

Matrix run_tsne(const Matrix& points, const TsneParams& params, std::uint64_t seed,
                std::vector<std::pair<std::size_t, double>>& trace) {
    const auto n = points.rows();
    const Matrix p = tsne_affinities(points, params.perplexity);
    const double lr = params.learning_rate.value_or(static_cast<double>(n) / 12.0);

    Matrix y(n, 2);
    Rng rng(derive_seed(seed, "tsne-init"));
    for (auto& v : y.data()) {
        v = 1e-4 * rng.normal();
    }
    Matrix update(n, 2);
    Matrix gains(n, 2, 1.0);
    Matrix grad(n, 2);
    Matrix num(n, n);

    for (std::size_t iter = 1; iter <= params.iterations; ++iter) {
        const bool exaggerate = iter <= params.exaggeration_iterations;
        const double exaggeration = exaggerate ? params.early_exaggeration : 1.0;
        const double momentum = exaggerate ? 0.5 : 0.8;

        double z = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
                num(i, j) = v;
                num(j, i) = v;
                z += 2 * v;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0;
            double gy = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) {
                    continue;
                }
                const double mult = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
                gx += mult * (y(i, 0) - y(j, 0));
                gy += mult * (y(i, 1) - y(j, 1));
            }
            grad(i, 0) = 4 * gx;
            grad(i, 1) = 4 * gy;
        }

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < 2; ++d) {
                const bool same_sign = (grad(i, d) > 0) == (update(i, d) > 0);
                gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
                update(i, d) = momentum * update(i, d) - lr * gains(i, d) * grad(i, d);
                y(i, d) += update(i, d);
            }
        }
        for (std::size_t d = 0; d < 2; ++d) {
            double mean = 0;
            for (std::size_t i = 0; i < n; ++i) {
                mean += y(i, d);
            }
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                y(i, d) -= mean;
            }
        }

        if (iter == 1 || iter == params.iterations ||
            (params.checkpoint_every > 0 && iter % params.checkpoint_every == 0)) {
            trace.emplace_back(iter, kl_divergence(p, y));
        }
    }
    return y;
}

Matrix run_pca(const Matrix& points) {
    const auto n = points.rows();
    const auto q = points.cols();
    Eigen::MatrixXd x(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points(i, j);
        }
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n > 1 ? n - 1 : 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw DataError("PCA eigendecomposition failed");
    }

    Matrix out(n, 2);
    const auto qi = static_cast<Eigen::Index>(q);
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, qi); ++c) {
        // eigenvalues ascend, so the leading components sit at the end
        Eigen::VectorXd axis = solver.eigenvectors().col(qi - 1 - c);
        Eigen::Index pivot = 0;
        axis.cwiseAbs().maxCoeff(&pivot);
        if (axis(pivot) < 0) {
            axis = -axis;
        }
        const Eigen::VectorXd projected = x * axis;
        for (std::size_t i = 0; i < n; ++i) {
            out(i, static_cast<std::size_t>(c)) = projected(static_cast<Eigen::Index>(i));
        }
    }
    return out;
}

}

Matrix tsne_affinities(const Matrix& points, double perplexity) {
    const auto n = points.rows();
    const Matrix dist = squared_distances(points);
    Matrix cond(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        conditional_row(dist, i, perplexity, cond.row(i));
    }
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n)), 1e-12);
            }
        }
    }
    return p;
}

Projection2D project_2d(const Matrix& points, ProjectionMethod method, const TsneParams& params, std::uint64_t seed) {
    for (double x : points.data()) {
        if (!std::isfinite(x)) {
            throw DataError("projection input contains a non-finite value");
        }
    }
    if (params.max_points < 4) {
        throw ParameterError("max_points must be >= 4");
    }

    Projection2D proj;
    proj.method = method;
    proj.params = params;
    proj.seed = seed;
    proj.source_rows.resize(points.rows());
    std::iota(proj.source_rows.begin(), proj.source_rows.end(), std::size_t{0});

    Matrix input = points;
    if (points.rows() > params.max_points) {
        // reservoir-sample positions; sorting keeps the input order
        Rng rng(derive_seed(seed, "subsample"));
        std::vector<std::size_t> keep(params.max_points);
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        for (std::size_t i = keep.size(); i < points.rows(); ++i) {
            const auto j = rng.index(i + 1);
            if (j < keep.size()) {
                keep[j] = i;
            }
        }
        std::sort(keep.begin(), keep.end());
        input = Matrix(keep.size(), points.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            std::ranges::copy(points.row(keep[i]), input.row(i).begin());
        }
        proj.source_rows = std::move(keep);
        proj.subsampled = true;
    }

    const auto n = input.rows();
    if (n < 4) {
        throw ParameterError("projection needs at least 4 points, got " + std::to_string(n));
    }
    if (method == ProjectionMethod::Tsne) {
        if (!(params.perplexity > 0) || !(params.perplexity < (static_cast<double>(n) - 1.0) / 3.0)) {
            throw ParameterError("perplexity " + io::format_double(params.perplexity) +
                                 " must be positive and below (n - 1) / 3 = " +
                                 io::format_double((static_cast<double>(n) - 1.0) / 3.0));
        }
        if (params.iterations < 1) {
            throw ParameterError("t-SNE needs at least one iteration");
        }
        if (params.learning_rate && !(*params.learning_rate > 0)) {
            throw ParameterError("t-SNE learning rate must be > 0");
        }
        proj.coords = run_tsne(input, params, seed, proj.kl_trace);
    } else {
        proj.coords = run_pca(input);
    }
    for (double x : proj.coords.data()) {
        if (!std::isfinite(x)) {
            throw DataError("projection produced a non-finite coordinate");
        }
    }
    return proj;
}

std::string Projection2D::to_tsv(std::span<const std::uint32_t> assignments) const {
    std::ostringstream out;
    out << "point_id\tx\ty\tcluster_id\n";
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const auto src = source_rows[i];
        out << src << '\t' << io::format_double(coords(i, 0)) << '\t' << io::format_double(coords(i, 1)) << '\t';
        if (src < assignments.size()) {
            out << assignments[src];
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json Projection2D::metadata() const {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [iter, kl] : kl_trace) {
        trace.push_back({{"iteration", iter}, {"kl", kl}});
    }
    nlohmann::json out = {
        {"method", projection_method_name(method)},
        {"seed", seed},
        {"points", coords.rows()},
        {"subsampled", subsampled},
    };
    if (method == ProjectionMethod::Tsne) {
        out["perplexity"] = params.perplexity;
        out["iterations"] = params.iterations;
        out["early_exaggeration"] = params.early_exaggeration;
        out["exaggeration_iterations"] = params.exaggeration_iterations;
        out["learning_rate"] = params.learning_rate.value_or(static_cast<double>(coords.rows()) / 12.0);
        out["kl_trace"] = trace;
    }
    return out;
}

}
