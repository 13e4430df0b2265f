#pragma once

// Streaming mask propagation: prompt encoding, memory cross-attention over
// the active set, nearest-neighbour mask decoding, and memory write-back.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vosmem/embedding.hpp"
#include "vosmem/error.hpp"
#include "vosmem/membank.hpp"

namespace vosmem {

/// Per-pixel object ids, 0 = background.
struct ObjectMaskMap {
	int width = 0;
	int height = 0;
	std::vector<std::uint8_t> labels;

	ObjectMaskMap() = default;
	ObjectMaskMap(int w, int h, std::uint8_t fill = 0)
		: width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

	std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
	void set(int x, int y, std::uint8_t id) { labels[static_cast<std::size_t>(y) * width + x] = id; }
	int max_label() const {
		return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
	}

	friend bool operator==(const ObjectMaskMap&, const ObjectMaskMap&) = default;
};

struct PromptPoint {
	int x = 0;
	int y = 0;
	std::uint8_t object_id = 1;
};

struct Prompt {
	enum class Kind { full_mask, points };
	Kind kind = Kind::full_mask;
	std::optional<ObjectMaskMap> mask;
	std::vector<PromptPoint> points;

	static Prompt from_mask(ObjectMaskMap m) { return {Kind::full_mask, std::move(m), {}}; }
	static Prompt from_points(std::vector<PromptPoint> pts) { return {Kind::points, std::nullopt, std::move(pts)}; }
};

/// Query-key affinity inside the readout softmax.
///   dot: dot(k, q) / (T sqrt(d))
///   l2:  (2 dot(k, q) - |k|^2) / (T sqrt(d)), i.e. -|k - q|^2 up to a
///        per-query constant that cancels in the normalisation
enum class Affinity { dot, l2 };

struct PropagatorConfig {
	Policy policy;
	Affinity affinity = Affinity::l2;
	int patch = 8;
	int dim = 64;
	double temperature = 0.02;
	double threshold = 0.5;
	int flood_tau = 32; // L1 RGB distance to the seed pixel
};

/// Nanoseconds spent per stage on one frame.
struct StageTimings {
	std::int64_t encode = 0;
	std::int64_t select = 0;
	std::int64_t readout = 0;
	std::int64_t decode = 0;
	std::int64_t commit = 0;

	std::int64_t total() const noexcept { return encode + select + readout + decode + commit; }
};

struct PropagationResult {
	std::vector<ObjectMaskMap> masks;
	std::vector<StageTimings> timings;
	std::vector<PruneDecision> decisions;
	std::vector<std::size_t> attended_entries; // per frame; 0 for the prompt frame
	std::vector<std::size_t> stored_entries;   // per frame, after commit
	std::size_t peak_footprint_bytes = 0;
	std::uint64_t readout_multiplies = 0;
	int num_objects = 0;
};

/// 4-connected region of pixels within L1 RGB distance `tau` of the seed.
inline std::vector<bool> flood_fill(const FrameImage& frame, int sx, int sy, int tau) {
	if (sx < 0 || sy < 0 || sx >= frame.width || sy >= frame.height)
		throw Error("prompt point (" + std::to_string(sx) + ", " + std::to_string(sy) + ") outside frame");
	const Rgb seed = frame.at(sx, sy);
	auto close = [&](int x, int y) {
		const Rgb c = frame.at(x, y);
		return std::abs(int(c.r) - seed.r) + std::abs(int(c.g) - seed.g) + std::abs(int(c.b) - seed.b) <= tau;
	};
	const int W = frame.width;
	std::vector<bool> region(static_cast<std::size_t>(W) * frame.height, false);
	std::vector<std::pair<int, int>> stack{{sx, sy}};
	region[static_cast<std::size_t>(sy) * W + sx] = true;
	while (!stack.empty()) {
		const auto [x, y] = stack.back();
		stack.pop_back();
		const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
		for (const auto& p : nb) {
			if (p[0] < 0 || p[1] < 0 || p[0] >= W || p[1] >= frame.height)
				continue;
			const std::size_t i = static_cast<std::size_t>(p[1]) * W + p[0];
			if (!region[i] && close(p[0], p[1])) {
				region[i] = true;
				stack.emplace_back(p[0], p[1]);
			}
		}
	}
	return region;
}

/// Union of flood fills; where fills of different objects overlap the
/// earlier point wins.
inline ObjectMaskMap mask_from_points(const FrameImage& frame, std::span<const PromptPoint> points, int tau) {
	if (points.empty())
		throw Error("point prompt needs at least one point");
	ObjectMaskMap mask(frame.width, frame.height);
	for (const auto& p : points) {
		if (p.object_id == 0)
			throw Error("prompt point object id must be >= 1");
		const auto region = flood_fill(frame, p.x, p.y, tau);
		const auto covered = std::count(region.begin(), region.end(), true);
		if (covered == 0 || covered == static_cast<std::ptrdiff_t>(region.size()))
			throw Error("degenerate point prompt at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")");
		for (std::size_t i = 0; i < region.size(); ++i)
			if (region[i] && mask.labels[i] == 0)
				mask.labels[i] = p.object_id;
	}
	return mask;
}

/// Fraction of each cell's pixels carrying object id k + 1, in channel k.
inline FeatureGrid mask_occupancy(const ObjectMaskMap& mask, int gw, int gh, int patch, int num_objects) {
	FeatureGrid occ(gw, gh, num_objects);
	std::vector<std::int64_t> count(occ.data.size(), 0);
	std::vector<std::int64_t> area(occ.cells(), 0);
	for (int y = 0; y < mask.height; ++y) {
		const int cy = cell_of(y, patch, gh);
		for (int x = 0; x < mask.width; ++x) {
			const std::size_t c = static_cast<std::size_t>(cy) * gw + cell_of(x, patch, gw);
			++area[c];
			const int id = mask.at(x, y);
			if (id > 0 && id <= num_objects)
				++count[c * num_objects + (id - 1)];
		}
	}
	for (std::size_t c = 0; c < occ.cells(); ++c)
		for (int k = 0; k < num_objects; ++k)
			occ.data[c * num_objects + k] = double(count[c * num_objects + k]) / double(area[c]);
	return occ;
}

struct EncodedPrompt {
	MemoryEntry entry;
	ObjectMaskMap mask;
	int num_objects = 0;
};

inline EncodedPrompt encode_prompt(const FrameImage& frame, const Prompt& prompt, int patch, int d, int flood_tau = 32) {
	ObjectMaskMap mask;
	if (prompt.kind == Prompt::Kind::full_mask) {
		if (!prompt.mask)
			throw Error("full-mask prompt requires a mask");
		mask = *prompt.mask;
		if (mask.width != frame.width || mask.height != frame.height)
			throw Error("prompt mask dimensions do not match the frame");
	} else {
		mask = mask_from_points(frame, prompt.points, flood_tau);
	}
	const int k = mask.max_label();
	if (k == 0)
		throw Error("prompt contains no object");

	EncodedPrompt out;
	out.num_objects = k;
	out.entry.frame_index = frame.index;
	out.entry.keys = extract_features(frame, patch, d);
	out.entry.embedding = pool_embedding(out.entry.keys);
	out.entry.values = mask_occupancy(mask, out.entry.keys.gw, out.entry.keys.gh, patch, k);
	out.entry.is_reference = true;
	out.mask = std::move(mask);
	return out;
}

/// Softmax cross-attention from each query cell over every cell of every
/// active entry. Returns a gw x gh grid with one score channel per object.
/// Entries are visited oldest-first, cells row-major; the logit maximum is
/// subtracted before exponentiation, which leaves the normalised weights
/// unchanged.
inline FeatureGrid memory_readout(const FeatureGrid& query, const ActiveSet& active, double temperature,
								  std::uint64_t* multiplies = nullptr, Affinity affinity = Affinity::l2) {
	if (active.entries.empty())
		throw Error("empty active set");
	if (!(temperature > 0.0))
		throw Error("temperature must be > 0");
	const int k = active.entries.front().get().values.d;
	for (const MemoryEntry& e : active.entries) {
		if (e.keys.gw != query.gw || e.keys.gh != query.gh || e.keys.d != query.d)
			throw Error("memory key grid shape differs from query grid");
		if (e.values.d != k || e.values.gw != query.gw || e.values.gh != query.gh)
			throw Error("memory value grid shape mismatch");
	}

	const std::size_t qcells = query.cells();
	const std::size_t d = static_cast<std::size_t>(query.d);
	const std::size_t kk = static_cast<std::size_t>(k);
	const std::size_t mcells = qcells * active.entries.size();
	const double scale = 1.0 / (temperature * std::sqrt(double(query.d)));

	// |k|^2 per memory cell, for the l2 affinity.
	std::vector<double> key_sq(affinity == Affinity::l2 ? mcells : 0, 0.0);
	if (affinity == Affinity::l2) {
		std::size_t p = 0;
		for (const MemoryEntry& e : active.entries)
			for (std::size_t c = 0; c < qcells; ++c, ++p) {
				const double* key = e.keys.data.data() + c * d;
				for (std::size_t i = 0; i < d; ++i)
					key_sq[p] += key[i] * key[i];
			}
	}

	FeatureGrid scores(query.gw, query.gh, k);
	std::vector<double> logits(mcells);
	std::vector<double> acc(kk);
	for (std::size_t q = 0; q < qcells; ++q) {
		const double* qv = query.data.data() + q * d;
		std::size_t p = 0;
		double peak = -std::numeric_limits<double>::infinity();
		for (const MemoryEntry& e : active.entries) {
			const double* kv = e.keys.data.data();
			for (std::size_t c = 0; c < qcells; ++c, ++p) {
				const double* key = kv + c * d;
				double dot = 0.0;
				for (std::size_t i = 0; i < d; ++i)
					dot += key[i] * qv[i];
				if (affinity == Affinity::l2)
					dot = 2.0 * dot - key_sq[p];
				logits[p] = dot * scale;
				peak = std::max(peak, logits[p]);
			}
		}
		std::fill(acc.begin(), acc.end(), 0.0);
		double norm = 0.0;
		p = 0;
		for (const MemoryEntry& e : active.entries) {
			const double* vv = e.values.data.data();
			for (std::size_t c = 0; c < qcells; ++c, ++p) {
				const double w = std::exp(logits[p] - peak);
				norm += w;
				for (std::size_t j = 0; j < kk; ++j)
					acc[j] += w * vv[c * kk + j];
			}
		}
		if (!std::isfinite(norm) || !(norm > 0.0))
			throw Error("attention overflow");
		double* out = scores.data.data() + q * kk;
		for (std::size_t j = 0; j < kk; ++j)
			out[j] = acc[j] / norm;
	}
	if (multiplies)
		*multiplies += static_cast<std::uint64_t>(qcells) * mcells * (d + kk) + key_sq.size() * d;
	return scores;
}

/// Nearest-neighbour upsampling of cell scores; argmax object if its score
/// reaches `threshold`, ties to the smaller id.
inline ObjectMaskMap decode_mask(const FeatureGrid& scores, int width, int height, int patch, double threshold = 0.5) {
	std::vector<std::uint8_t> cell_label(scores.cells(), 0);
	for (std::size_t c = 0; c < scores.cells(); ++c) {
		const auto s = scores.cell(c);
		int best = -1;
		for (int k = 0; k < scores.d; ++k)
			if (best < 0 || s[k] > s[best])
				best = k;
		if (best >= 0 && s[best] >= threshold)
			cell_label[c] = static_cast<std::uint8_t>(best + 1);
	}
	ObjectMaskMap mask(width, height);
	for (int y = 0; y < height; ++y) {
		const int cy = cell_of(y, patch, scores.gh);
		for (int x = 0; x < width; ++x)
			mask.set(x, y, cell_label[static_cast<std::size_t>(cy) * scores.gw + cell_of(x, patch, scores.gw)]);
	}
	return mask;
}

namespace detail {

class StageClock {
  public:
	StageClock() : last_(std::chrono::steady_clock::now()) {}
	std::int64_t lap() {
		const auto now = std::chrono::steady_clock::now();
		const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now - last_).count();
		last_ = now;
		return ns;
	}

  private:
	std::chrono::steady_clock::time_point last_;
};

} // namespace detail

inline PropagationResult propagate(std::span<const FrameImage> frames, const Prompt& prompt,
								   const PropagatorConfig& cfg) {
	if (frames.size() < 2)
		throw Error("propagation needs at least 2 frames");
	if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
		throw Error("threshold must lie in (0, 1)");
	if (!(cfg.temperature > 0.0))
		throw Error("temperature must be > 0");

	MemoryBank bank(cfg.policy);
	PropagationResult res;
	res.masks.reserve(frames.size());
	res.timings.reserve(frames.size());
	res.decisions.reserve(frames.size());

	auto at_frame = [](std::size_t t, const std::exception& e) {
		return Error("frame " + std::to_string(t) + ": " + e.what());
	};

	{
		detail::StageClock clock;
		StageTimings tm;
		EncodedPrompt enc;
		try {
			enc = encode_prompt(frames[0], prompt, cfg.patch, cfg.dim, cfg.flood_tau);
		} catch (const std::exception& e) {
			throw at_frame(0, e);
		}
		tm.encode = clock.lap();
		res.num_objects = enc.num_objects;
		bank.init_reference(std::move(enc.entry));
		tm.commit = clock.lap();
		res.masks.push_back(std::move(enc.mask));
		res.timings.push_back(tm);
		res.decisions.emplace_back();
		res.attended_entries.push_back(0);
		res.stored_entries.push_back(bank.stored_entries());
		res.peak_footprint_bytes = footprint_bytes(bank);
	}

	for (std::size_t t = 1; t < frames.size(); ++t) {
		try {
			const FrameImage& frame = frames[t];
			if (frame.width != frames[0].width || frame.height != frames[0].height)
				throw Error("frame dimensions differ from the prompt frame");
			detail::StageClock clock;
			StageTimings tm;

			FeatureGrid features = extract_features(frame, cfg.patch, cfg.dim);
			EmbeddingVector embedding = pool_embedding(features);
			tm.encode = clock.lap();

			ActiveSet active = bank.select_active(embedding);
			tm.select = clock.lap();

			const FeatureGrid scores = memory_readout(features, active, cfg.temperature, &res.readout_multiplies, cfg.affinity);
			tm.readout = clock.lap();

			ObjectMaskMap mask = decode_mask(scores, frame.width, frame.height, cfg.patch, cfg.threshold);
			tm.decode = clock.lap();

			res.attended_entries.push_back(active.size());
			PruneDecision decision = std::move(active.decision);
			if (cfg.policy.kind == PolicyKind::efp_destructive)
				bank.erase(decision.pruned);
			MemoryEntry entry;
			entry.frame_index = frame.index;
			entry.values = mask_occupancy(mask, features.gw, features.gh, cfg.patch, res.num_objects);
			entry.keys = std::move(features);
			entry.embedding = std::move(embedding);
			bank.commit(std::move(entry));
			tm.commit = clock.lap();

			res.masks.push_back(std::move(mask));
			res.timings.push_back(tm);
			res.decisions.push_back(std::move(decision));
			res.stored_entries.push_back(bank.stored_entries());
			res.peak_footprint_bytes = std::max(res.peak_footprint_bytes, footprint_bytes(bank));
		} catch (const std::exception& e) {
			throw at_frame(t, e);
		}
	}
	return res;
}

} // namespace vosmem
