#pragma once

// Deterministic per-cell frame descriptors and the cosine-similarity
// primitive used to rank memory frames for pruning.
//
// Descriptor layout for one cell (d channels, d >= 10):
//   [0, 3)   mean R, G, B / 255
//   [3, 6)   population std-dev of R, G, B / 127.5 (clamped to 1)
//   [6, 10)  unsigned gradient-orientation histogram of grayscale intensity,
//            4 bins of 45 degrees, magnitude-weighted, divided by
//            (pixels * 255 * sqrt(2))
//   [10, d)  positional code: for frequency k (w = pi / 2^(k+3)) eight channels
//            0.5 + 0.5 sin(wx), 0.5 - 0.5 sin(wx), 0.5 + 0.5 cos(wx),
//            0.5 - 0.5 cos(wx), then the same four for y; truncated at d.
//            The +/- pairs make the code's inner product depend only on the
//            cell offset.
//
// Grayscale is floor((R + G + B) / 3). Gradients are forward differences
// (zero at the right/bottom frame edge). The last cell column/row absorbs
// the remainder pixels when the frame size is not a multiple of the patch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vosmem/error.hpp"

namespace vosmem {

inline constexpr int kMinFrameSide = 16;
inline constexpr int kContentChannels = 10;

struct Rgb {
	std::uint8_t r = 0, g = 0, b = 0;
	friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Raw RGB frame, row-major, 8 bits per channel.
struct FrameImage {
	std::uint64_t index = 0;
	int width = 0;
	int height = 0;
	std::vector<std::uint8_t> pixels; // 3 * width * height

	FrameImage() = default;
	FrameImage(std::uint64_t idx, int w, int h, Rgb fill = {})
		: index(idx), width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
		for (std::size_t i = 0; i < pixels.size(); i += 3) {
			pixels[i] = fill.r;
			pixels[i + 1] = fill.g;
			pixels[i + 2] = fill.b;
		}
	}

	Rgb at(int x, int y) const {
		const auto o = offset(x, y);
		return {pixels[o], pixels[o + 1], pixels[o + 2]};
	}
	void set(int x, int y, Rgb c) {
		const auto o = offset(x, y);
		pixels[o] = c.r;
		pixels[o + 1] = c.g;
		pixels[o + 2] = c.b;
	}

	void validate() const {
		if (width < kMinFrameSide || height < kMinFrameSide)
			throw Error("frame " + std::to_string(index) + ": dimensions " + std::to_string(width) + "x" +
						std::to_string(height) + " below minimum " + std::to_string(kMinFrameSide));
		if (pixels.size() != static_cast<std::size_t>(width) * height * 3)
			throw Error("frame " + std::to_string(index) + ": pixel buffer size does not match dimensions");
	}

	friend bool operator==(const FrameImage&, const FrameImage&) = default;

  private:
	std::size_t offset(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
};

/// gw x gh cells of d channels each, row-major by cell then channel.
struct FeatureGrid {
	int gw = 0;
	int gh = 0;
	int d = 0;
	std::vector<double> data;

	FeatureGrid() = default;
	FeatureGrid(int w, int h, int channels)
		: gw(w), gh(h), d(channels), data(static_cast<std::size_t>(w) * h * channels, 0.0) {}

	std::size_t cells() const { return static_cast<std::size_t>(gw) * gh; }

	std::span<double> cell(int cx, int cy) {
		return {data.data() + (static_cast<std::size_t>(cy) * gw + cx) * d, static_cast<std::size_t>(d)};
	}
	std::span<const double> cell(int cx, int cy) const {
		return {data.data() + (static_cast<std::size_t>(cy) * gw + cx) * d, static_cast<std::size_t>(d)};
	}
	std::span<const double> cell(std::size_t i) const {
		return {data.data() + i * d, static_cast<std::size_t>(d)};
	}

	friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

/// Cell coordinate owning pixel coordinate `p` along an axis with `cells` cells.
constexpr int cell_of(int p, int patch, int cells) noexcept {
	return std::min(p / patch, cells - 1);
}

/// Fixed-dimension real vector with its Euclidean norm cached.
class EmbeddingVector {
  public:
	EmbeddingVector() = default;
	explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
		double ss = 0.0;
		for (double v : values_)
			ss += v * v;
		norm_ = std::sqrt(ss);
	}

	std::size_t dim() const noexcept { return values_.size(); }
	std::span<const double> values() const noexcept { return values_; }
	double norm() const noexcept { return norm_; }
	bool is_zero() const noexcept { return norm_ == 0.0; }

	friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

  private:
	std::vector<double> values_;
	double norm_ = 0.0;
};

namespace detail {

inline int gradient_bin(int gx, int gy) {
	// Fold to the upper half plane so orientation is unsigned in [0, pi).
	if (gy < 0 || (gy == 0 && gx < 0)) {
		gx = -gx;
		gy = -gy;
	}
	if (gx > 0 && gy < gx)
		return 0; // [0, 45)
	if (gx > 0)
		return 1; // [45, 90)
	if (gy > -gx)
		return 2; // [90, 135)
	return 3;     // [135, 180)
}

inline double positional_channel(int i, int cx, int cy) {
	const int k = i / 8;
	const int r = i % 8;
	const double omega = std::numbers::pi / std::ldexp(1.0, k + 3);
	const double coord = (r < 4) ? cx : cy;
	const double wave = ((r / 2) % 2 == 0) ? std::sin(omega * coord) : std::cos(omega * coord);
	return (r % 2 == 0) ? 0.5 + 0.5 * wave : 0.5 - 0.5 * wave;
}

} // namespace detail

inline void check_patch(int patch) {
	if (patch != 8 && patch != 16 && patch != 32)
		throw Error("patch must be one of 8, 16, 32 (got " + std::to_string(patch) + ")");
}

inline FeatureGrid extract_features(const FrameImage& frame, int patch, int d) {
	check_patch(patch);
	if (d < kContentChannels)
		throw Error("descriptor needs >= 10 channels");
	frame.validate();
	const int gw = frame.width / patch;
	const int gh = frame.height / patch;
	if (gw < 1 || gh < 1)
		throw Error("frame smaller than one patch");

	const int W = frame.width;
	const int H = frame.height;
	std::vector<int> gray(static_cast<std::size_t>(W) * H);
	for (int y = 0; y < H; ++y)
		for (int x = 0; x < W; ++x) {
			const Rgb c = frame.at(x, y);
			gray[static_cast<std::size_t>(y) * W + x] = (int(c.r) + int(c.g) + int(c.b)) / 3;
		}

	FeatureGrid grid(gw, gh, d);
	const double max_mag = 255.0 * std::numbers::sqrt2;
	for (int cy = 0; cy < gh; ++cy) {
		const int y0 = cy * patch;
		const int y1 = (cy == gh - 1) ? H : y0 + patch;
		for (int cx = 0; cx < gw; ++cx) {
			const int x0 = cx * patch;
			const int x1 = (cx == gw - 1) ? W : x0 + patch;
			// Integer sums keep mean/variance exact before the final division.
			std::int64_t sum[3] = {0, 0, 0};
			std::int64_t sq[3] = {0, 0, 0};
			double hist[4] = {0, 0, 0, 0};
			for (int y = y0; y < y1; ++y)
				for (int x = x0; x < x1; ++x) {
					const Rgb c = frame.at(x, y);
					const int ch[3] = {c.r, c.g, c.b};
					for (int k = 0; k < 3; ++k) {
						sum[k] += ch[k];
						sq[k] += ch[k] * ch[k];
					}
					const int g = gray[static_cast<std::size_t>(y) * W + x];
					const int gx = (x + 1 < W) ? gray[static_cast<std::size_t>(y) * W + x + 1] - g : 0;
					const int gy = (y + 1 < H) ? gray[static_cast<std::size_t>(y + 1) * W + x] - g : 0;
					if (gx != 0 || gy != 0)
						hist[detail::gradient_bin(gx, gy)] += std::sqrt(double(gx * gx + gy * gy));
				}
			const std::int64_t n = std::int64_t(x1 - x0) * (y1 - y0);
			auto out = grid.cell(cx, cy);
			for (int k = 0; k < 3; ++k) {
				out[k] = double(sum[k]) / (double(n) * 255.0);
				const std::int64_t var_n2 = sq[k] * n - sum[k] * sum[k]; // n^2 * variance
				const double sd = std::sqrt(double(var_n2)) / double(n);
				out[3 + k] = std::min(1.0, sd / 127.5);
			}
			for (int b = 0; b < 4; ++b)
				out[6 + b] = hist[b] / (double(n) * max_mag);
			for (int i = 0; i + kContentChannels < d; ++i)
				out[kContentChannels + i] = detail::positional_channel(i, cx, cy);
		}
	}
	return grid;
}

/// Channel-wise mean over all cells, summed in row-major cell order.
inline EmbeddingVector pool_embedding(const FeatureGrid& fg) {
	if (fg.d <= 0 || fg.cells() == 0 || fg.data.size() != fg.cells() * static_cast<std::size_t>(fg.d))
		throw Error("invalid feature grid");
	std::vector<double> acc(static_cast<std::size_t>(fg.d), 0.0);
	for (std::size_t i = 0; i < fg.cells(); ++i) {
		const auto c = fg.cell(i);
		for (int k = 0; k < fg.d; ++k)
			acc[k] += c[k];
	}
	const double n = double(fg.cells());
	for (double& v : acc)
		v /= n;
	return EmbeddingVector(std::move(acc));
}

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Symmetric bit-for-bit.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
	if (a.dim() != b.dim())
		throw Error("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
	if (a.is_zero() || b.is_zero())
		throw Error("undefined similarity for zero vector");
	const auto av = a.values();
	const auto bv = b.values();
	double dot = 0.0;
	for (std::size_t i = 0; i < av.size(); ++i)
		dot += av[i] * bv[i];
	return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

} // namespace vosmem
