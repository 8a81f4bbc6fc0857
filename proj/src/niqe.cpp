#include "scriptboard/niqe.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/text_util.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace scriptboard {

namespace {

int reflect(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) sum += k[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2 * sigma * sigma));
    for (auto& v : k) v /= sum;
    return k;
}

GrayField convolve_separable(const GrayField& in, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size() / 2);
    GrayField tmp(in.width, in.height), out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0;
            for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * in.at(reflect(x + i, in.width), y);
            tmp.at(x, y) = s;
        }
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0;
            for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.at(x, reflect(y + i, in.height));
            out.at(x, y) = s;
        }
    return out;
}

double cubic(double x) {
    const double a = std::abs(x), a2 = a * a, a3 = a2 * a;
    if (a <= 1) return 1.5 * a3 - 2.5 * a2 + 1;
    if (a <= 2) return -0.5 * a3 + 2.5 * a2 - 4 * a + 2;
    return 0;
}

struct Taps {
    std::vector<int> index;
    std::vector<double> weight;
};

std::vector<Taps> half_taps(int n) {
    const int out_n = (n + 1) / 2;
    std::vector<Taps> taps(static_cast<std::size_t>(out_n));
    for (int i = 0; i < out_n; ++i) {
        const double u = 2.0 * i + 0.5;
        double sum = 0;
        auto& t = taps[static_cast<std::size_t>(i)];
        for (int j = static_cast<int>(std::floor(u - 4)); j <= static_cast<int>(std::ceil(u + 4)); ++j) {
            double w = cubic(0.5 * (u - j));
            if (w == 0) continue;
            t.index.push_back(reflect(j, n));
            t.weight.push_back(w);
            sum += w;
        }
        for (auto& w : t.weight) w /= sum;
    }
    return taps;
}

// Ratio tables over the shape grid 0.2:0.001:10.
struct ShapeGrid {
    std::vector<double> alpha, ggd_ratio, aggd_ratio;
    ShapeGrid() {
        for (int k = 0; k <= 9800; ++k) {
            double a = 0.2 + 0.001 * k;
            double g1 = std::tgamma(1 / a), g2 = std::tgamma(2 / a), g3 = std::tgamma(3 / a);
            alpha.push_back(a);
            ggd_ratio.push_back(g1 * g3 / (g2 * g2));
            aggd_ratio.push_back(g2 * g2 / (g1 * g3));
        }
    }
};

const ShapeGrid& shape_grid() {
    static const ShapeGrid grid;
    return grid;
}

double nearest_alpha(const std::vector<double>& ratios, double target) {
    const auto& g = shape_grid();
    std::size_t best = 0;
    double best_d = std::abs(ratios[0] - target);
    for (std::size_t i = 1; i < ratios.size(); ++i) {
        double d = std::abs(ratios[i] - target);
        if (d < best_d) best_d = d, best = i;
    }
    return g.alpha[best];
}

void check_samples(std::span<const double> s) {
    if (s.size() < 100) throw Error(Errc::DegenerateSamples, "need at least 100 samples, got " + std::to_string(s.size()));
    if (std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; }))
        throw Error(Errc::DegenerateSamples, "all samples are equal");
    if (std::any_of(s.begin(), s.end(), [](double v) { return !std::isfinite(v); }))
        throw Error(Errc::DegenerateSamples, "non-finite sample");
}

GrayField sub_field(const GrayField& f, int x0, int y0, int w, int h) {
    GrayField out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = f.at(x0 + x, y0 + y);
    return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> mean_cov(const std::vector<NiqeFeatures>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(kNiqeFeatureCount));
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t k = 0; k < kNiqeFeatureCount; ++k) m(i, static_cast<Eigen::Index>(k)) = rows[static_cast<std::size_t>(i)][k];
    Eigen::VectorXd mean = m.colwise().mean();
    Eigen::MatrixXd centered = m.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = n > 1 ? Eigen::MatrixXd((centered.transpose() * centered) / static_cast<double>(n - 1))
                                : Eigen::MatrixXd::Zero(mean.size(), mean.size());
    return {mean, cov};
}

} // namespace

GrayField gaussian_blur(const GrayField& image, double sigma, int radius) {
    return convolve_separable(image, gaussian_kernel(sigma, radius));
}

LocalStats local_stats(const GrayField& image, const NiqeConfig& config) {
    auto k = gaussian_kernel(config.window_sigma, config.window / 2);
    LocalStats s;
    s.mu = convolve_separable(image, k);
    GrayField sq(image.width, image.height);
    for (std::size_t i = 0; i < sq.values.size(); ++i) sq.values[i] = image.values[i] * image.values[i];
    GrayField e2 = convolve_separable(sq, k);
    s.sigma = GrayField(image.width, image.height);
    for (std::size_t i = 0; i < sq.values.size(); ++i)
        s.sigma.values[i] = std::sqrt(std::abs(e2.values[i] - s.mu.values[i] * s.mu.values[i]));
    return s;
}

GrayField compute_mscn(const GrayField& image, const NiqeConfig& config) {
    if (image.width < 32 || image.height < 32)
        throw Error(Errc::ImageTooSmall, std::to_string(image.width) + "x" + std::to_string(image.height) + " is below 32x32");
    auto s = local_stats(image, config);
    GrayField out(image.width, image.height);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (image.values[i] - s.mu.values[i]) / (s.sigma.values[i] + 1.0);
    return out;
}

GrayField downsample_half(const GrayField& image) {
    auto tx = half_taps(image.width), ty = half_taps(image.height);
    GrayField tmp(static_cast<int>(tx.size()), image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < tmp.width; ++x) {
            const auto& t = tx[static_cast<std::size_t>(x)];
            double s = 0;
            for (std::size_t k = 0; k < t.index.size(); ++k) s += t.weight[k] * image.at(t.index[k], y);
            tmp.at(x, y) = s;
        }
    GrayField out(tmp.width, static_cast<int>(ty.size()));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const auto& t = ty[static_cast<std::size_t>(y)];
            double s = 0;
            for (std::size_t k = 0; k < t.index.size(); ++k) s += t.weight[k] * tmp.at(x, t.index[k]);
            out.at(x, y) = s;
        }
    return out;
}

GgdFit fit_ggd(std::span<const double> samples) {
    check_samples(samples);
    double sq = 0, ab = 0;
    for (double v : samples) sq += v * v, ab += std::abs(v);
    const double n = static_cast<double>(samples.size());
    sq /= n;
    ab /= n;
    return {nearest_alpha(shape_grid().ggd_ratio, sq / (ab * ab)), sq};
}

AggdFit fit_aggd(std::span<const double> samples) {
    check_samples(samples);
    double left = 0, right = 0, sq = 0, ab = 0;
    std::size_t nl = 0, nr = 0;
    for (double v : samples) {
        if (v < 0) left += v * v, ++nl;
        if (v > 0) right += v * v, ++nr;
        sq += v * v;
        ab += std::abs(v);
    }
    if (nl == 0 || nr == 0) throw Error(Errc::DegenerateSamples, "one side of the distribution is empty");
    const double n = static_cast<double>(samples.size());
    const double lstd = std::sqrt(left / static_cast<double>(nl)), rstd = std::sqrt(right / static_cast<double>(nr));
    const double g = lstd / rstd;
    const double rhat = (ab / n) * (ab / n) / (sq / n);
    const double rnorm = rhat * (g * g * g + 1) * (g + 1) / ((g * g + 1) * (g * g + 1));
    AggdFit fit;
    fit.alpha = nearest_alpha(shape_grid().aggd_ratio, rnorm);
    const double a = fit.alpha;
    fit.mean = (rstd - lstd) * (std::tgamma(2 / a) / std::tgamma(1 / a)) * std::sqrt(std::tgamma(1 / a) / std::tgamma(3 / a));
    fit.left_variance = lstd * lstd;
    fit.right_variance = rstd * rstd;
    return fit;
}

std::array<double, 18> mscn_features(const GrayField& m) {
    std::array<double, 18> out{};
    auto g = fit_ggd(m.values);
    out[0] = g.alpha;
    out[1] = g.variance;
    static constexpr int shifts[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}}; // (dy, dx): H, V, D1, D2
    std::vector<double> prod(m.values.size());
    for (int s = 0; s < 4; ++s) {
        const int dy = shifts[s][0], dx = shifts[s][1];
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                int sy = ((y - dy) % m.height + m.height) % m.height;
                int sx = ((x - dx) % m.width + m.width) % m.width;
                prod[static_cast<std::size_t>(y) * m.width + x] = m.at(x, y) * m.at(sx, sy);
            }
        auto a = fit_aggd(prod);
        out[static_cast<std::size_t>(2 + 4 * s)] = a.alpha;
        out[static_cast<std::size_t>(3 + 4 * s)] = a.mean;
        out[static_cast<std::size_t>(4 + 4 * s)] = a.left_variance;
        out[static_cast<std::size_t>(5 + 4 * s)] = a.right_variance;
    }
    return out;
}

NiqeFeatures extract_niqe_features(const Image& image, const NiqeConfig& config) {
    if (image.width() < 96 || image.height() < 96)
        throw Error(Errc::ImageTooSmall, std::to_string(image.width()) + "x" + std::to_string(image.height()) + " is below 96x96");
    GrayField gray = to_gray(image);
    auto f1 = mscn_features(compute_mscn(gray, config));
    auto f2 = mscn_features(compute_mscn(downsample_half(gray), config));
    NiqeFeatures out{};
    std::copy(f1.begin(), f1.end(), out.begin());
    std::copy(f2.begin(), f2.end(), out.begin() + 18);
    return out;
}

std::vector<PatchFeatures> patch_features(const GrayField& gray, const NiqeConfig& config) {
    const int p = config.patch_size;
    if (p < 64 || p % 2 != 0) throw Error(Errc::InvalidInput, "patch size must be even and at least 64");
    const int cols = gray.width / p, rows = gray.height / p;
    if (cols == 0 || rows == 0)
        throw Error(Errc::ImageTooSmall, std::to_string(gray.width) + "x" + std::to_string(gray.height) +
                                             " holds no " + std::to_string(p) + "px patch");
    GrayField img = sub_field(gray, 0, 0, cols * p, rows * p);
    auto stats = local_stats(img, config);
    GrayField mscn1 = compute_mscn(img, config);
    GrayField mscn2 = compute_mscn(downsample_half(img), config);
    const int h = p / 2;
    std::vector<PatchFeatures> out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            PatchFeatures pf;
            try {
                auto f1 = mscn_features(sub_field(mscn1, c * p, r * p, p, p));
                auto f2 = mscn_features(sub_field(mscn2, c * h, r * h, h, h));
                std::copy(f1.begin(), f1.end(), pf.features.begin());
                std::copy(f2.begin(), f2.end(), pf.features.begin() + 18);
            } catch (const Error& e) {
                if (e.code() == Errc::DegenerateSamples) continue;
                throw;
            }
            double s = 0;
            for (int y = r * p; y < (r + 1) * p; ++y)
                for (int x = c * p; x < (c + 1) * p; ++x) s += stats.sigma.at(x, y);
            pf.sharpness = s / (static_cast<double>(p) * p);
            out.push_back(pf);
        }
    }
    return out;
}

void PristineModel::validate() const {
    constexpr std::size_t n = kNiqeFeatureCount;
    if (mean.size() != n || covariance.size() != n * n) throw Error(Errc::InvariantBreach, "pristine model has wrong shape");
    for (double v : mean)
        if (!std::isfinite(v)) throw Error(Errc::InvariantBreach, "pristine mean is not finite");
    Eigen::MatrixXd c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = covariance[i * n + k];
            if (std::abs(covariance[i * n + k] - covariance[k * n + i]) > 1e-9)
                throw Error(Errc::InvariantBreach, "pristine covariance is not symmetric");
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    if (es.eigenvalues().minCoeff() < -1e-9) throw Error(Errc::InvariantBreach, "pristine covariance is not PSD");
}

void to_json(nlohmann::json& j, const PristineModel& v) {
    j = {{"feature_count", kNiqeFeatureCount}, {"mean", v.mean},
         {"covariance", v.covariance},         {"patch_size", v.patch_size},
         {"sharpness_fraction", v.sharpness_fraction}, {"corpus_digest", v.corpus_digest},
         {"image_count", v.image_count},       {"patch_count", v.patch_count}};
}

void from_json(const nlohmann::json& j, PristineModel& v) {
    j.at("mean").get_to(v.mean);
    j.at("covariance").get_to(v.covariance);
    j.at("patch_size").get_to(v.patch_size);
    j.at("sharpness_fraction").get_to(v.sharpness_fraction);
    j.at("corpus_digest").get_to(v.corpus_digest);
    j.at("image_count").get_to(v.image_count);
    j.at("patch_count").get_to(v.patch_count);
}

void save_pristine_model(const PristineModel& model, const std::filesystem::path& path) {
    model.validate();
    write_file(path, nlohmann::json(model).dump(2) + "\n");
}

PristineModel load_pristine_model(const std::filesystem::path& path) {
    PristineModel model;
    try {
        model = nlohmann::json::parse(read_text_file(path)).get<PristineModel>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidInput, path.string() + ": " + e.what());
    }
    model.validate();
    return model;
}

namespace {

/// Features of the horizontally flipped patch: the two diagonal products
/// trade places at each scale.
NiqeFeatures mirrored(const NiqeFeatures& f) {
    NiqeFeatures m = f;
    for (std::size_t scale : {0u, 18u})
        for (std::size_t i = 0; i < 4; ++i) std::swap(m[scale + 10 + i], m[scale + 14 + i]);
    return m;
}

} // namespace

PristineModel fit_pristine_model(const std::vector<Image>& corpus, const NiqeConfig& config) {
    if (corpus.size() < 10)
        throw Error(Errc::CorpusTooSmall, "need at least 10 images, got " + std::to_string(corpus.size()));
    if (!(config.sharpness_fraction > 0 && config.sharpness_fraction <= 1))
        throw Error(Errc::InvalidInput, "sharpness fraction must be in (0, 1]");
    std::vector<std::future<std::vector<PatchFeatures>>> jobs;
    for (const auto& img : corpus)
        jobs.push_back(std::async(std::launch::async, [&img, &config] { return patch_features(to_gray(img), config); }));
    std::vector<NiqeFeatures> kept;
    std::uint64_t digest = kFnvOffset;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto patches = jobs[i].get();
        if (patches.size() < 2)
            throw Error(Errc::CorpusTooSmall, "image " + std::to_string(i) + " yields fewer than 2 usable patches");
        std::stable_sort(patches.begin(), patches.end(), [](const auto& a, const auto& b) { return a.sharpness > b.sharpness; });
        auto keep = static_cast<std::size_t>(std::ceil(config.sharpness_fraction * static_cast<double>(patches.size()) - 1e-9));
        for (std::size_t k = 0; k < keep; ++k) {
            kept.push_back(patches[k].features);
            kept.push_back(mirrored(patches[k].features));
        }
        digest = hash_combine(digest, corpus[i].content_hash());
    }
    auto [mean, cov] = mean_cov(kept);
    PristineModel model;
    constexpr auto n = static_cast<Eigen::Index>(kNiqeFeatureCount);
    for (Eigen::Index i = 0; i < n; ++i) model.mean.push_back(mean(i));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) model.covariance.push_back((cov(i, k) + cov(k, i)) / 2);
    model.patch_size = config.patch_size;
    model.sharpness_fraction = config.sharpness_fraction;
    model.corpus_digest = to_hex(digest);
    model.image_count = static_cast<int>(corpus.size());
    model.patch_count = static_cast<int>(kept.size() / 2);
    model.validate();
    return model;
}

double niqe_score(const Image& image, const PristineModel& model) {
    NiqeConfig config;
    config.patch_size = model.patch_size;
    auto patches = patch_features(to_gray(image), config);
    if (patches.empty()) throw Error(Errc::DegenerateSamples, "image has no usable patch");
    std::vector<NiqeFeatures> rows;
    for (const auto& p : patches) rows.push_back(p.features);
    auto [mu, cov] = mean_cov(rows);
    constexpr auto n = static_cast<Eigen::Index>(kNiqeFeatureCount);
    Eigen::VectorXd pm(n);
    Eigen::MatrixXd pc(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pm(i) = model.mean[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < n; ++k) pc(i, k) = model.covariance[static_cast<std::size_t>(i * n + k)];
    }
    Eigen::MatrixXd avg = (pc + cov) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(avg);
    const auto& ev = es.eigenvalues();
    const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = ev.unaryExpr([tol](double v) { return std::abs(v) > tol ? 1.0 / v : 0.0; });
    Eigen::VectorXd d = pm - mu;
    Eigen::VectorXd proj = es.eigenvectors().transpose() * d;
    double q = proj.dot(inv.asDiagonal() * proj);
    return std::sqrt(std::max(0.0, q));
}

} // namespace scriptboard
