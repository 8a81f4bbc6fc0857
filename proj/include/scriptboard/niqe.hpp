#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/image.hpp"

namespace scriptboard {

struct NiqeConfig {
    int window = 7;
    double window_sigma = 7.0 / 6.0;
    int patch_size = 96;
    double sharpness_fraction = 0.75;
};

inline constexpr std::size_t kNiqeFeatureCount = 36;
using NiqeFeatures = std::array<double, kNiqeFeatureCount>;

/// Separable Gaussian blur with a (2*radius+1) kernel, reflective border.
GrayField gaussian_blur(const GrayField& image, double sigma, int radius);

/// Local mean and deviation under the configured Gaussian window.
struct LocalStats {
    GrayField mu;
    GrayField sigma;
};
LocalStats local_stats(const GrayField& image, const NiqeConfig& config = {});

/// (I - mu) / (sigma + 1); ImageTooSmall below 32x32.
GrayField compute_mscn(const GrayField& image, const NiqeConfig& config = {});

/// Halves each dimension with an antialiased bicubic kernel.
GrayField downsample_half(const GrayField& image);

struct GgdFit {
    double alpha = 0;
    double variance = 0;
};

struct AggdFit {
    double alpha = 0;
    double mean = 0;
    double left_variance = 0;
    double right_variance = 0;
};

/// Moment matching on the shape grid [0.2, 10] step 0.001. DegenerateSamples
/// when fewer than 100 samples, all equal, or (AGGD) one side is empty.
GgdFit fit_ggd(std::span<const double> samples);
AggdFit fit_aggd(std::span<const double> samples);

/// 18 values for one MSCN field: GGD (shape, variance), then AGGD
/// (shape, mean, left variance, right variance) of the H, V, D1, D2 products.
std::array<double, 18> mscn_features(const GrayField& mscn);

/// Whole-image features at native and half scale; ImageTooSmall below 96x96.
NiqeFeatures extract_niqe_features(const Image& image, const NiqeConfig& config = {});

struct PatchFeatures {
    NiqeFeatures features{};
    double sharpness = 0; ///< mean local deviation over the patch
};

/// Features of every non-degenerate patch on the patch grid.
std::vector<PatchFeatures> patch_features(const GrayField& gray, const NiqeConfig& config = {});

struct PristineModel {
    std::vector<double> mean;       ///< kNiqeFeatureCount
    std::vector<double> covariance; ///< row-major kNiqeFeatureCount^2
    int patch_size = 96;
    double sharpness_fraction = 0.75;
    std::string corpus_digest;
    int image_count = 0;
    int patch_count = 0;

    /// InvariantBreach unless shapes are right, the covariance is symmetric
    /// within 1e-9 and its eigenvalues are >= -1e-9.
    void validate() const;
};

void to_json(nlohmann::json& j, const PristineModel& v);
void from_json(const nlohmann::json& j, PristineModel& v);
void save_pristine_model(const PristineModel& model, const std::filesystem::path& path);
PristineModel load_pristine_model(const std::filesystem::path& path);

/// Ranks each image's patches by sharpness and keeps the top fraction. Every
/// kept patch also enters with its mirror image, so scores do not depend on
/// horizontal orientation.
/// CorpusTooSmall below 10 images or when an image yields fewer than 2 patches.
PristineModel fit_pristine_model(const std::vector<Image>& corpus, const NiqeConfig& config = {});

double niqe_score(const Image& image, const PristineModel& model);

} // namespace scriptboard
