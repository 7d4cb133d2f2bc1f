#include "kgsub/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "kgsub/error.hpp"
#include "kgsub/io.hpp"
#include "kgsub/random.hpp"

namespace kgsub {

namespace {

constexpr double infinity = std::numeric_limits<double>::infinity();

void check_points(const Matrix& points) {
    if (points.empty() || points.cols() == 0) {
        throw ParameterError("clustering needs at least one point with at least one dimension");
    }
    for (double x : points.data()) {
        if (!std::isfinite(x)) {
            throw DataError("point set contains a non-finite value");
        }
    }
}

void check_consistent(const Clustering& c, const Matrix& points) {
    if (c.assignments.size() != points.rows() || c.means.rows() != c.k || c.means.cols() != points.cols()) {
        throw ParameterError("clustering does not match the point set");
    }
    for (auto a : c.assignments) {
        if (a >= c.k) {
            throw ParameterError("assignment outside [0, k)");
        }
    }
}

Matrix random_point_init(const Matrix& points, std::size_t k, Rng& rng) {
    const auto n = points.rows();
    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), std::size_t{0});
    // partial Fisher-Yates: the first k slots become a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + rng.index(n - i);
        std::swap(index[i], index[j]);
    }
    Matrix means(k, points.cols());
    for (std::size_t c = 0; c < k; ++c) {
        std::ranges::copy(points.row(index[c]), means.row(c).begin());
    }
    return means;
}

Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
    const auto n = points.rows();
    Matrix means(k, points.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, infinity);

    auto take = [&](std::size_t c, std::size_t p) {
        chosen[p] = true;
        std::ranges::copy(points.row(p), means.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points.row(i), means.row(c)));
        }
    };

    take(0, rng.index(n));
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0) {
            const double target = rng.uniform() * total;
            double running = 0;
            for (std::size_t i = 0; i < n; ++i) {
                running += d2[i];
                if (d2[i] > 0 && running > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            // every remaining point duplicates a chosen one
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    rest.push_back(i);
                }
            }
            pick = rest[rng.index(rest.size())];
        }
        take(c, pick);
    }
    return means;
}

/// Returns true when any assignment changed.
bool assign(const Matrix& points, const Matrix& means, std::vector<std::uint32_t>& assignments) {
    bool changed = false;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto p = points.row(i);
        std::uint32_t best = 0;
        double best_d = squared_distance(p, means.row(0));
        for (std::size_t c = 1; c < means.rows(); ++c) {
            const double d = squared_distance(p, means.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::uint32_t>(c);
            }
        }
        if (assignments[i] != best) {
            assignments[i] = best;
            changed = true;
        }
    }
    return changed;
}

std::vector<std::size_t> recompute_means(const Matrix& points,
                                         const std::vector<std::uint32_t>& assignments,
                                         Matrix& means) {
    std::vector<std::size_t> sizes(means.rows(), 0);
    Matrix sums(means.rows(), means.cols());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        auto s = sums.row(assignments[i]);
        const auto p = points.row(i);
        for (std::size_t j = 0; j < p.size(); ++j) {
            s[j] += p[j];
        }
        ++sizes[assignments[i]];
    }
    for (std::size_t c = 0; c < means.rows(); ++c) {
        if (sizes[c] == 0) {
            continue;
        }
        auto m = means.row(c);
        const auto s = sums.row(c);
        for (std::size_t j = 0; j < m.size(); ++j) {
            m[j] = s[j] / static_cast<double>(sizes[c]);
        }
    }
    return sizes;
}

double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

}

std::vector<std::size_t> Clustering::sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (auto a : assignments) {
        ++out.at(a);
    }
    return out;
}

nlohmann::json Clustering::to_json() const {
    nlohmann::json means_json = nlohmann::json::array();
    for (std::size_t c = 0; c < means.rows(); ++c) {
        const auto row = means.row(c);
        means_json.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"k", k}, {"assignments", assignments}, {"means", means_json}};
}

Clustering Clustering::from_json(const nlohmann::json& j) {
    try {
        Clustering c;
        c.k = j.at("k").get<std::size_t>();
        c.assignments = j.at("assignments").get<std::vector<std::uint32_t>>();
        const auto& means = j.at("means");
        if (means.size() != c.k) {
            throw FormatError("clustering JSON: means has " + std::to_string(means.size()) + " rows, k is " +
                              std::to_string(c.k));
        }
        const std::size_t q = c.k == 0 ? 0 : means.at(0).size();
        c.means = Matrix(c.k, q);
        for (std::size_t r = 0; r < c.k; ++r) {
            const auto row = means.at(r).get<std::vector<double>>();
            if (row.size() != q) {
                throw FormatError("clustering JSON: ragged means");
            }
            std::ranges::copy(row, c.means.row(r).begin());
        }
        for (auto a : c.assignments) {
            if (a >= c.k) {
                throw FormatError("clustering JSON: assignment outside [0, k)");
            }
        }
        c.converged = true;
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("clustering JSON: ") + e.what());
    }
}

Clustering kmeans(const Matrix& points, const KMeansOptions& options) {
    check_points(points);
    const auto n = points.rows();
    const auto k = options.k;
    if (k < 1 || k > n) {
        throw ParameterError("k must satisfy 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }
    if (options.max_iter < 1) {
        throw ParameterError("max_iter must be >= 1");
    }

    Clustering result;
    result.k = k;
    Rng rng(options.seed);
    if (options.initial_means) {
        if (options.initial_means->rows() != k || options.initial_means->cols() != points.cols()) {
            throw ParameterError("initial means must be k x q");
        }
        result.means = *options.initial_means;
    } else if (options.init == KMeansInit::KMeansPlusPlus) {
        result.means = plus_plus_init(points, k, rng);
    } else {
        result.means = random_point_init(points, k, rng);
    }

    result.assignments.assign(n, std::numeric_limits<std::uint32_t>::max());
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        const bool changed = assign(points, result.means, result.assignments);
        result.iterations_run = iter;
        if (!changed) {
            result.converged = true;
            break;
        }
        auto sizes = recompute_means(points, result.assignments, result.means);

        bool repaired = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) {
                continue;
            }
            std::size_t far = n;
            double far_d = -1;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[result.assignments[i]] < 2) {
                    continue;
                }
                const double d = squared_distance(points.row(i), result.means.row(result.assignments[i]));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            --sizes[result.assignments[far]];
            result.assignments[far] = static_cast<std::uint32_t>(c);
            sizes[c] = 1;
            std::ranges::copy(points.row(far), result.means.row(c).begin());
            ++result.empty_repairs;
            repaired = true;
        }
        if (repaired) {
            recompute_means(points, result.assignments, result.means);
        }
        result.wss_trace.push_back(wss(result, points));
    }
    return result;
}

RestartResult best_of_restarts(const Matrix& points, const KMeansOptions& options, std::size_t restarts) {
    if (restarts < 1) {
        throw ParameterError("restarts must be >= 1");
    }
    RestartResult best;
    best.wss = infinity;
    for (std::size_t r = 0; r < restarts; ++r) {
        KMeansOptions run = options;
        run.seed = derive_seed(options.seed, r);
        auto clustering = kmeans(points, run);
        const double w = wss(clustering, points);
        if (w < best.wss) {
            best = {std::move(clustering), run.seed, w};
        }
    }
    return best;
}

double wss(const Clustering& clustering, const Matrix& points) {
    check_consistent(clustering, points);
    double sum = 0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        sum += squared_distance(points.row(i), clustering.means.row(clustering.assignments[i]));
    }
    return sum;
}

double silhouette(const Clustering& clustering, const Matrix& points, SilhouetteVariant variant) {
    check_consistent(clustering, points);
    if (clustering.k < 2) {
        throw ParameterError("silhouette needs k >= 2");
    }
    const auto n = points.rows();
    const auto k = clustering.k;
    const auto score = [](double a, double b) {
        const double m = std::max(a, b);
        return m > 0 ? (b - a) / m : 0.0;
    };

    double total = 0;
    if (variant == SilhouetteVariant::Centroid) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto own = clustering.assignments[i];
            const double a = distance(points.row(i), clustering.means.row(own));
            double b = infinity;
            for (std::size_t c = 0; c < k; ++c) {
                if (c != own) {
                    b = std::min(b, distance(points.row(i), clustering.means.row(c)));
                }
            }
            total += score(a, b);
        }
        return total / static_cast<double>(n);
    }

    const auto sizes = clustering.sizes();
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = clustering.assignments[i];
        if (sizes[own] < 2) {
            continue;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                sums[clustering.assignments[j]] += distance(points.row(i), points.row(j));
            }
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = infinity;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0) {
                b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
            }
        }
        total += score(a, b);
    }
    return total / static_cast<double>(n);
}

double davies_bouldin(const Clustering& clustering, const Matrix& points) {
    check_consistent(clustering, points);
    const auto k = clustering.k;
    if (k < 2) {
        throw ParameterError("davies_bouldin needs k >= 2");
    }
    const auto sizes = clustering.sizes();
    std::vector<double> spread(k, 0.0);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto c = clustering.assignments[i];
        spread[c] += distance(points.row(i), clustering.means.row(c));
    }
    for (std::size_t c = 0; c < k; ++c) {
        spread[c] = sizes[c] > 0 ? spread[c] / static_cast<double>(sizes[c]) : 0.0;
    }

    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double d = distance(clustering.means.row(i), clustering.means.row(j));
            if (d == 0) {
                return infinity;
            }
            worst = std::max(worst, (spread[i] + spread[j]) / d);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double calinski_harabasz(const Clustering& clustering, const Matrix& points) {
    check_consistent(clustering, points);
    const auto n = points.rows();
    const auto k = clustering.k;
    if (k < 2 || k >= n) {
        throw ParameterError("calinski_harabasz needs 2 <= k < n");
    }
    std::vector<double> grand(points.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = points.row(i);
        for (std::size_t j = 0; j < p.size(); ++j) {
            grand[j] += p[j];
        }
    }
    for (auto& g : grand) {
        g /= static_cast<double>(n);
    }
    const auto sizes = clustering.sizes();
    double between = 0;
    for (std::size_t c = 0; c < k; ++c) {
        between += static_cast<double>(sizes[c]) * squared_distance(clustering.means.row(c), grand);
    }
    const double within = wss(clustering, points);
    if (within == 0) {
        return infinity;
    }
    return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

KSelectionCurve k_sweep(const Matrix& points,
                        std::size_t k_min,
                        std::size_t k_max,
                        std::size_t restarts,
                        std::uint64_t seed,
                        const KMeansOptions& base) {
    check_points(points);
    const auto n = points.rows();
    if (k_min < 2 || k_max < k_min || k_max + 1 > n) {
        throw ParameterError("k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                             "] must lie within [2, n-1] with n=" + std::to_string(n));
    }
    if (restarts < 1) {
        throw ParameterError("restarts must be >= 1");
    }

    KSelectionCurve curve;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        KMeansOptions options = base;
        options.k = k;
        options.seed = derive_seed(seed, k);
        options.initial_means.reset();
        const auto best = best_of_restarts(points, options, restarts);
        curve.rows.push_back({k, best.wss, silhouette(best.clustering, points),
                              davies_bouldin(best.clustering, points), calinski_harabasz(best.clustering, points),
                              best.seed});
    }

    const auto arg = [&](auto better, auto field) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < curve.rows.size(); ++i) {
            if (better(field(curve.rows[i]), field(curve.rows[best]))) {
                best = i;
            }
        }
        return curve.rows[best].k;
    };
    const auto greater = [](double a, double b) { return a > b; };
    const auto less = [](double a, double b) { return a < b; };
    curve.silhouette_max_k = arg(greater, [](const KSelectionRow& r) { return r.silhouette; });
    curve.silhouette_min_k = arg(less, [](const KSelectionRow& r) { return r.silhouette; });
    curve.davies_bouldin_min_k = arg(less, [](const KSelectionRow& r) { return r.davies_bouldin; });
    curve.calinski_harabasz_max_k = arg(greater, [](const KSelectionRow& r) { return r.calinski_harabasz; });

    curve.elbow_k = curve.rows.front().k;
    if (curve.rows.size() >= 3) {
        const auto& first = curve.rows.front();
        const auto& last = curve.rows.back();
        const double span_w = first.wss - last.wss;
        double gap = 0;
        if (span_w > 0) {
            for (const auto& row : curve.rows) {
                const double x = static_cast<double>(row.k - first.k) / static_cast<double>(last.k - first.k);
                const double y = (row.wss - last.wss) / span_w;
                const double below = (1.0 - x) - y;
                if (below > gap) {
                    gap = below;
                    curve.elbow_k = row.k;
                }
            }
        }
    }
    return curve;
}

std::string KSelectionCurve::to_tsv() const {
    std::ostringstream out;
    out << "k\twss\tsilhouette\tdavies_bouldin\tcalinski_harabasz\tseed\n";
    for (const auto& r : rows) {
        out << r.k << '\t' << io::format_double(r.wss) << '\t' << io::format_double(r.silhouette) << '\t'
            << io::format_double(r.davies_bouldin) << '\t' << io::format_double(r.calinski_harabasz) << '\t'
            << r.seed << '\n';
    }
    return out.str();
}

nlohmann::json KSelectionCurve::extrema_json() const {
    return {
        {"silhouette_max_k", silhouette_max_k},
        {"silhouette_min_k", silhouette_min_k},
        {"davies_bouldin_min_k", davies_bouldin_min_k},
        {"calinski_harabasz_max_k", calinski_harabasz_max_k},
        {"elbow_k", elbow_k},
        {"suggested_k", suggested_k()},
    };
}

double adjusted_rand_index(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
    if (a.size() != b.size()) {
        throw ParameterError("labelings differ in length");
    }
    const auto n = a.size();
    if (n < 2) {
        return 1.0;
    }
    std::map<std::pair<std::int64_t, std::int64_t>, double> joint;
    std::map<std::int64_t, double> rows;
    std::map<std::int64_t, double> cols;
    for (std::size_t i = 0; i < n; ++i) {
        joint[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    const auto pairs = [](double x) { return x * (x - 1) / 2; };
    double index = 0;
    for (const auto& [key, count] : joint) {
        index += pairs(count);
    }
    double sum_a = 0;
    for (const auto& [key, count] : rows) {
        sum_a += pairs(count);
    }
    double sum_b = 0;
    for (const auto& [key, count] : cols) {
        sum_b += pairs(count);
    }
    const double expected = sum_a * sum_b / pairs(static_cast<double>(n));
    const double max_index = (sum_a + sum_b) / 2;
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

}
