#pragma once

// Region (J), boundary (F), Dice, Challenge IoU and throughput.
//
// Conventions:
//  - empty prediction vs empty ground truth scores 1.0 for J, Dice and F
//  - boundary pixel: mask pixel with a 4-neighbour outside the mask or on the
//    image border; matches are within a Chebyshev radius, by default
//    ceil(0.008 * image diagonal)
//  - sequence scores skip the first and last frame; J, F and Dice are
//    averaged over objects within a frame first, then over frames

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vosmem/error.hpp"
#include "vosmem/propagator.hpp"

namespace vosmem {

struct BinaryMask {
	int width = 0;
	int height = 0;
	std::vector<std::uint8_t> px; // 0 or 1

	BinaryMask() = default;
	BinaryMask(int w, int h) : width(w), height(h), px(static_cast<std::size_t>(w) * h, 0) {}

	bool at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x] != 0; }
	void set(int x, int y, bool v = true) { px[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
	std::size_t count() const { return static_cast<std::size_t>(std::count(px.begin(), px.end(), 1)); }
};

inline BinaryMask binary_mask(const ObjectMaskMap& m, int id) {
	BinaryMask b(m.width, m.height);
	for (std::size_t i = 0; i < m.labels.size(); ++i)
		b.px[i] = m.labels[i] == id ? 1 : 0;
	return b;
}

namespace detail {

inline void check_dims(const BinaryMask& a, const BinaryMask& b) {
	if (a.width != b.width || a.height != b.height)
		throw Error("mask dimension mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
					std::to_string(b.width) + "x" + std::to_string(b.height));
}

struct Overlap {
	std::size_t inter = 0, pred = 0, gt = 0;
};

inline Overlap overlap(const BinaryMask& pred, const BinaryMask& gt) {
	check_dims(pred, gt);
	Overlap o;
	for (std::size_t i = 0; i < pred.px.size(); ++i) {
		o.pred += pred.px[i];
		o.gt += gt.px[i];
		o.inter += pred.px[i] & gt.px[i];
	}
	return o;
}

} // namespace detail

inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
	const auto o = detail::overlap(pred, gt);
	const std::size_t uni = o.pred + o.gt - o.inter;
	return uni == 0 ? 1.0 : double(o.inter) / double(uni);
}

inline double dice(const BinaryMask& pred, const BinaryMask& gt) {
	const auto o = detail::overlap(pred, gt);
	const std::size_t denom = o.pred + o.gt;
	return denom == 0 ? 1.0 : 2.0 * double(o.inter) / double(denom);
}

inline BinaryMask boundary_pixels(const BinaryMask& m) {
	BinaryMask b(m.width, m.height);
	for (int y = 0; y < m.height; ++y)
		for (int x = 0; x < m.width; ++x) {
			if (!m.at(x, y))
				continue;
			const bool edge = x == 0 || y == 0 || x == m.width - 1 || y == m.height - 1 || !m.at(x - 1, y) ||
							  !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
			b.set(x, y, edge);
		}
	return b;
}

/// Square (Chebyshev) dilation, separable.
inline BinaryMask dilate(const BinaryMask& m, int radius) {
	if (radius <= 0)
		return m;
	BinaryMask rows(m.width, m.height);
	for (int y = 0; y < m.height; ++y)
		for (int x = 0; x < m.width; ++x) {
			if (!m.at(x, y))
				continue;
			for (int xx = std::max(0, x - radius); xx <= std::min(m.width - 1, x + radius); ++xx)
				rows.set(xx, y);
		}
	BinaryMask out(m.width, m.height);
	for (int y = 0; y < m.height; ++y)
		for (int x = 0; x < m.width; ++x) {
			if (!rows.at(x, y))
				continue;
			for (int yy = std::max(0, y - radius); yy <= std::min(m.height - 1, y + radius); ++yy)
				out.set(x, yy);
		}
	return out;
}

inline int default_boundary_radius(int width, int height) {
	return static_cast<int>(std::ceil(0.008 * std::hypot(double(width), double(height))));
}

inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::optional<int> radius = std::nullopt) {
	detail::check_dims(pred, gt);
	const int r = radius.value_or(default_boundary_radius(pred.width, pred.height));
	if (r < 0)
		throw Error("boundary radius must be >= 0");
	const BinaryMask pb = boundary_pixels(pred);
	const BinaryMask gb = boundary_pixels(gt);
	const std::size_t np = pb.count();
	const std::size_t ng = gb.count();
	if (np == 0 && ng == 0)
		return 1.0;
	if (np == 0 || ng == 0)
		return 0.0;
	const BinaryMask gd = dilate(gb, r);
	const BinaryMask pd = dilate(pb, r);
	std::size_t pred_hit = 0, gt_hit = 0;
	for (std::size_t i = 0; i < pb.px.size(); ++i) {
		pred_hit += pb.px[i] & gd.px[i];
		gt_hit += gb.px[i] & pd.px[i];
	}
	const double precision = double(pred_hit) / double(np);
	const double recall = double(gt_hit) / double(ng);
	if (precision + recall == 0.0)
		return 0.0;
	return 2.0 * precision * recall / (precision + recall);
}

struct ObjectScore {
	double j = 0, f = 0, dice = 0;
	bool present = false; // object has ground-truth pixels in this frame
};

struct FrameScore {
	std::vector<ObjectScore> objects; // index k -> object id k + 1
};

inline FrameScore score_frame(const ObjectMaskMap& pred, const ObjectMaskMap& gt, int num_objects,
							  std::optional<int> radius = std::nullopt) {
	FrameScore fs;
	fs.objects.reserve(num_objects);
	for (int id = 1; id <= num_objects; ++id) {
		const BinaryMask p = binary_mask(pred, id);
		const BinaryMask g = binary_mask(gt, id);
		fs.objects.push_back({iou(p, g), boundary_f(p, g, radius), dice(p, g), g.count() > 0});
	}
	return fs;
}

/// Per frame: mean IoU over the ids present in that frame's ground truth;
/// frames without objects are skipped; result is the mean over the rest.
inline double challenge_iou(std::span<const ObjectMaskMap> preds, std::span<const ObjectMaskMap> gts) {
	if (preds.size() != gts.size())
		throw Error("challenge_iou: " + std::to_string(preds.size()) + " predictions vs " +
					std::to_string(gts.size()) + " ground-truth frames");
	double total = 0.0;
	std::size_t frames = 0;
	for (std::size_t t = 0; t < gts.size(); ++t) {
		const int k = gts[t].max_label();
		double sum = 0.0;
		int present = 0;
		for (int id = 1; id <= k; ++id) {
			const BinaryMask g = binary_mask(gts[t], id);
			if (g.count() == 0)
				continue;
			sum += iou(binary_mask(preds[t], id), g);
			++present;
		}
		if (present == 0)
			continue;
		total += sum / present;
		++frames;
	}
	return frames == 0 ? 1.0 : total / double(frames);
}

struct SequenceScore {
	double j = 0, f = 0, jf = 0, dice = 0, ciou = 0;
	std::size_t frames_evaluated = 0;

	friend bool operator==(const SequenceScore&, const SequenceScore&) = default;
};

inline SequenceScore score_sequence(std::span<const ObjectMaskMap> preds, std::span<const ObjectMaskMap> gts,
									int num_objects, std::optional<int> radius = std::nullopt) {
	if (preds.size() != gts.size())
		throw Error("score_sequence: " + std::to_string(preds.size()) + " predictions vs " +
					std::to_string(gts.size()) + " ground-truth frames");
	if (gts.size() < 3)
		throw Error("score_sequence needs at least 3 frames");
	if (num_objects < 1)
		throw Error("score_sequence needs at least one object");
	SequenceScore s;
	for (std::size_t t = 1; t + 1 < gts.size(); ++t) {
		const FrameScore fs = score_frame(preds[t], gts[t], num_objects, radius);
		double j = 0, f = 0, d = 0;
		for (const auto& o : fs.objects) {
			j += o.j;
			f += o.f;
			d += o.dice;
		}
		s.j += j / num_objects;
		s.f += f / num_objects;
		s.dice += d / num_objects;
		++s.frames_evaluated;
	}
	const double n = double(s.frames_evaluated);
	s.j /= n;
	s.f /= n;
	s.dice /= n;
	s.jf = (s.j + s.f) / 2.0;
	s.ciou = challenge_iou(preds.subspan(1, gts.size() - 2), gts.subspan(1, gts.size() - 2));
	return s;
}

struct Throughput {
	double fps_total = 0;
	double fps_readout = 0;
};

/// Frames per second over frames 1..T-1 (the prompt frame is excluded).
inline Throughput throughput(std::span<const StageTimings> timings) {
	if (timings.size() < 2)
		throw Error("throughput needs at least one propagated frame");
	std::int64_t total = 0, readout = 0;
	for (std::size_t t = 1; t < timings.size(); ++t) {
		total += timings[t].total();
		readout += timings[t].readout;
	}
	if (total <= 0 || readout <= 0)
		throw Error("zero elapsed time");
	const double frames = double(timings.size() - 1);
	return {frames / (double(total) * 1e-9), frames / (double(readout) * 1e-9)};
}

} // namespace vosmem
