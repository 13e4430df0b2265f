#pragma once

// Synthetic surgical-like sequences with exact ground truth.
//
// Objects are textured ellipses over a textured background. The phase script
// drives what happens frame by frame:
//   static    - object centres jitter by at most `jitter` px (0 or 1) around
//               their position
//   drift     - global brightness offset ramps by `slope` per frame (persists)
//   motion    - centres advance by velocity * object.motion_scale per frame,
//               reflecting off the frame border
//   occlusion - a background-coloured vertical bar of `occluder_width` px
//               sweeps left to right across the frame
//
// Randomness comes from splitmix64 streams derived as seed ^ stream_id:
//   0x1                 jitter draws, consumed in frame then object order
//   0x2                 background/object texture (hashed per pixel, static)
//   0x100 + frame index per-pixel sensor noise, row-major, R G B

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vosmem/embedding.hpp"
#include "vosmem/error.hpp"
#include "vosmem/propagator.hpp"
#include "vosmem/splitmix.hpp"

#include <json.hpp>

namespace vosmem {

struct ObjectSpec {
	double cx = 0, cy = 0; // start centre, px
	double rx = 1, ry = 1; // radii, px
	Rgb color;
	int texture = 0; // per-channel texture amplitude
	double motion_sx = 1, motion_sy = 1;

	friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct Phase {
	enum class Kind { static_scene, drift, motion, occlusion };
	Kind kind = Kind::static_scene;
	int length = 1;
	double slope = 0;       // drift: brightness per frame
	double vx = 0, vy = 0;  // motion: px per frame
	int occluder_width = 0; // occlusion

	friend bool operator==(const Phase&, const Phase&) = default;
};

struct ScenarioConfig {
	int width = 128;
	int height = 96;
	int frame_count = 0;
	Rgb background{150, 60, 55};
	int background_texture = 0;
	int noise = 0; // per-channel sensor noise amplitude
	int jitter = 1; // static-phase centre jitter, px
	std::vector<ObjectSpec> objects;
	std::vector<Phase> phases;
	std::uint64_t seed = 0;

	int num_objects() const { return static_cast<int>(objects.size()); }

	void validate() const {
		if (width < kMinFrameSide || height < kMinFrameSide)
			throw Error("scenario: width and height must be >= 16");
		if (objects.empty())
			throw Error("scenario: at least one object required");
		if (objects.size() > 255)
			throw Error("scenario: at most 255 objects");
		if (phases.empty())
			throw Error("scenario: empty phase script");
		long total = 0;
		for (const auto& p : phases) {
			if (p.length < 1)
				throw Error("scenario: phase length must be >= 1");
			if (p.kind == Phase::Kind::occlusion && p.occluder_width < 1)
				throw Error("scenario: occluder width must be >= 1");
			total += p.length;
		}
		if (total != frame_count)
			throw Error("scenario: phase lengths sum to " + std::to_string(total) + ", frame_count is " +
						std::to_string(frame_count));
		if (noise < 0 || background_texture < 0)
			throw Error("scenario: noise amplitudes must be >= 0");
		if (jitter < 0 || jitter > 1)
			throw Error("scenario: jitter must be 0 or 1");
		for (std::size_t i = 0; i < objects.size(); ++i) {
			const auto& o = objects[i];
			if (!(o.rx > 0 && o.ry > 0))
				throw Error("scenario: object " + std::to_string(i + 1) + " radii must be > 0");
			if (o.texture < 0)
				throw Error("scenario: object " + std::to_string(i + 1) + " texture must be >= 0");
			const int dist = std::abs(o.color.r - background.r) + std::abs(o.color.g - background.g) +
							 std::abs(o.color.b - background.b);
			if (dist < 48)
				throw Error("scenario: object " + std::to_string(i + 1) +
							" colour within 48 channel-sum distance of background");
		}
	}

	friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Sequence {
	std::vector<FrameImage> frames;
	std::vector<ObjectMaskMap> masks;
	int num_objects = 0;
	std::uint64_t seed = 0;
	nlohmann::json phases = nlohmann::json::array();

	friend bool operator==(const Sequence&, const Sequence&) = default;
};

// ---- JSON ----------------------------------------------------------------

inline std::string to_string(Phase::Kind k) {
	switch (k) {
	case Phase::Kind::static_scene: return "static";
	case Phase::Kind::drift: return "drift";
	case Phase::Kind::motion: return "motion";
	case Phase::Kind::occlusion: return "occlusion";
	}
	return "?";
}

inline nlohmann::json to_json(const Phase& p) {
	nlohmann::json j{{"kind", to_string(p.kind)}, {"length", p.length}};
	switch (p.kind) {
	case Phase::Kind::drift: j["slope"] = p.slope; break;
	case Phase::Kind::motion: j["velocity"] = {p.vx, p.vy}; break;
	case Phase::Kind::occlusion: j["occluder_width"] = p.occluder_width; break;
	default: break;
	}
	return j;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
	nlohmann::json objs = nlohmann::json::array();
	for (const auto& o : c.objects)
		objs.push_back({{"center", {o.cx, o.cy}},
						{"radii", {o.rx, o.ry}},
						{"color", {o.color.r, o.color.g, o.color.b}},
						{"texture", o.texture},
						{"motion_scale", {o.motion_sx, o.motion_sy}}});
	nlohmann::json phases = nlohmann::json::array();
	for (const auto& p : c.phases)
		phases.push_back(to_json(p));
	return {{"width", c.width},
			{"height", c.height},
			{"frame_count", c.frame_count},
			{"background", {c.background.r, c.background.g, c.background.b}},
			{"background_texture", c.background_texture},
			{"noise", c.noise},
			{"jitter", c.jitter},
			{"objects", objs},
			{"phases", phases},
			{"seed", c.seed}};
}

namespace detail {

inline Rgb rgb_from_json(const nlohmann::json& j) {
	if (!j.is_array() || j.size() != 3)
		throw Error("scenario: colour must be [r, g, b]");
	auto ch = [&](int i) {
		const int v = j.at(i).get<int>();
		if (v < 0 || v > 255)
			throw Error("scenario: colour channel out of range");
		return static_cast<std::uint8_t>(v);
	};
	return {ch(0), ch(1), ch(2)};
}

} // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
	try {
		ScenarioConfig c;
		c.width = j.at("width").get<int>();
		c.height = j.at("height").get<int>();
		c.background = detail::rgb_from_json(j.at("background"));
		c.background_texture = j.value("background_texture", 0);
		c.noise = j.value("noise", 0);
		c.jitter = j.value("jitter", 1);
		c.seed = j.value("seed", std::uint64_t{0});
		for (const auto& o : j.at("objects")) {
			ObjectSpec s;
			s.cx = o.at("center").at(0).get<double>();
			s.cy = o.at("center").at(1).get<double>();
			s.rx = o.at("radii").at(0).get<double>();
			s.ry = o.at("radii").at(1).get<double>();
			s.color = detail::rgb_from_json(o.at("color"));
			s.texture = o.value("texture", 0);
			if (o.contains("motion_scale")) {
				s.motion_sx = o["motion_scale"].at(0).get<double>();
				s.motion_sy = o["motion_scale"].at(1).get<double>();
			}
			c.objects.push_back(s);
		}
		for (const auto& p : j.at("phases")) {
			Phase ph;
			const auto kind = p.at("kind").get<std::string>();
			ph.length = p.at("length").get<int>();
			if (kind == "static") {
				ph.kind = Phase::Kind::static_scene;
			} else if (kind == "drift") {
				ph.kind = Phase::Kind::drift;
				ph.slope = p.at("slope").get<double>();
			} else if (kind == "motion") {
				ph.kind = Phase::Kind::motion;
				ph.vx = p.at("velocity").at(0).get<double>();
				ph.vy = p.at("velocity").at(1).get<double>();
			} else if (kind == "occlusion") {
				ph.kind = Phase::Kind::occlusion;
				ph.occluder_width = p.at("occluder_width").get<int>();
			} else {
				throw Error("scenario: unknown phase kind '" + kind + "'");
			}
			c.phases.push_back(ph);
		}
		int total = 0;
		for (const auto& p : c.phases)
			total += p.length;
		c.frame_count = j.value("frame_count", total);
		c.validate();
		return c;
	} catch (const nlohmann::json::exception& e) {
		throw Error(std::string("scenario: ") + e.what());
	}
}

/// FNV-1a 64 over the canonical (key-sorted, compact) JSON dump.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char ch : to_json(c).dump()) {
		h ^= ch;
		h *= 0x100000001b3ULL;
	}
	return h;
}

/// Version-pinned scenario: 200 frames, 2 objects, static 60% / drift 20% /
/// occlusion 10% / motion 10%.
inline ScenarioConfig builtin_redundant(std::uint64_t seed = 0) {
	using K = Phase::Kind;
	ScenarioConfig c;
	c.width = 128;
	c.height = 96;
	c.background = {150, 60, 55};
	c.background_texture = 3;
	c.noise = 2;
	c.objects = {
		{36, 34, 22, 14, {205, 205, 215}, 3, 1, 1},
		{92, 64, 18, 18, {40, 100, 170}, 3, 0.5, -1},
	};
	c.phases = {
		{K::static_scene, 40}, {K::drift, 20, 0.5},  {K::static_scene, 40}, {K::occlusion, 20, 0, 0, 0, 24},
		{K::static_scene, 20}, {K::motion, 20, 0, 1.0, 0.5}, {K::drift, 20, -0.5}, {K::static_scene, 20},
	};
	c.frame_count = 200;
	c.seed = seed;
	c.validate();
	return c;
}

inline ScenarioConfig builtin_scenario(const std::string& name, std::uint64_t seed = 0) {
	if (name == "redundant")
		return builtin_redundant(seed);
	throw Error("unknown builtin scenario '" + name + "'");
}

namespace detail {

inline int texture_offset(std::uint64_t seed, std::uint64_t salt, std::int64_t x, std::int64_t y, int amp) {
	if (amp == 0)
		return 0;
	const std::uint64_t key = (seed ^ 0x2ULL) + salt * 0x9e3779b97f4a7c15ULL +
							  static_cast<std::uint64_t>(x) * 0xc2b2ae3d27d4eb4fULL +
							  static_cast<std::uint64_t>(y) * 0x165667b19e3779f9ULL;
	return static_cast<int>(mix64(key) % static_cast<std::uint64_t>(2 * amp + 1)) - amp;
}

inline std::uint8_t clamp_byte(double v) {
	return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

} // namespace detail

inline Sequence generate(const ScenarioConfig& cfg) {
	cfg.validate();
	const int W = cfg.width, H = cfg.height;
	const std::size_t K = cfg.objects.size();

	Sequence seq;
	seq.num_objects = static_cast<int>(K);
	seq.seed = cfg.seed;
	for (const auto& p : cfg.phases)
		seq.phases.push_back(to_json(p));
	seq.frames.reserve(cfg.frame_count);
	seq.masks.reserve(cfg.frame_count);

	std::vector<double> px(K), py(K), dirx(K, 1.0), diry(K, 1.0);
	for (std::size_t i = 0; i < K; ++i) {
		px[i] = cfg.objects[i].cx;
		py[i] = cfg.objects[i].cy;
	}
	double brightness = 0.0;
	auto jitter = SplitMix64::stream(cfg.seed, 0x1);

	std::uint64_t t = 0;
	for (const auto& phase : cfg.phases) {
		for (int step = 0; step < phase.length; ++step, ++t) {
			std::vector<double> cx = px, cy = py;
			int bar_left = W, bar_right = W;
			switch (phase.kind) {
			case Phase::Kind::static_scene:
				for (std::size_t i = 0; i < K; ++i) {
					cx[i] += double(jitter.uniform_int(-cfg.jitter, cfg.jitter));
					cy[i] += double(jitter.uniform_int(-cfg.jitter, cfg.jitter));
				}
				break;
			case Phase::Kind::drift:
				brightness += phase.slope;
				break;
			case Phase::Kind::motion:
				for (std::size_t i = 0; i < K; ++i) {
					const auto& o = cfg.objects[i];
					px[i] += phase.vx * o.motion_sx * dirx[i];
					py[i] += phase.vy * o.motion_sy * diry[i];
					// Objects wider than the frame bounce around its centre line.
					const double x_lo = std::min(o.rx, W / 2.0), x_hi = std::max(W - o.rx, W / 2.0);
					const double y_lo = std::min(o.ry, H / 2.0), y_hi = std::max(H - o.ry, H / 2.0);
					if (px[i] < x_lo || px[i] > x_hi) {
						dirx[i] = -dirx[i];
						px[i] = std::clamp(px[i], x_lo, x_hi);
					}
					if (py[i] < y_lo || py[i] > y_hi) {
						diry[i] = -diry[i];
						py[i] = std::clamp(py[i], y_lo, y_hi);
					}
				}
				cx = px;
				cy = py;
				break;
			case Phase::Kind::occlusion: {
				const int w = phase.occluder_width;
				bar_left = -w + static_cast<int>((std::int64_t(W) + w) * (step + 1) / (phase.length + 1));
				bar_right = bar_left + w;
				break;
			}
			}

			FrameImage frame(t, W, H);
			ObjectMaskMap mask(W, H);
			auto noise = SplitMix64::stream(cfg.seed, 0x100 + t);
			for (int y = 0; y < H; ++y) {
				for (int x = 0; x < W; ++x) {
					const bool occluded = x >= bar_left && x < bar_right;
					std::uint8_t label = 0;
					if (!occluded) {
						for (std::size_t i = K; i-- > 0;) {
							const double ex = (x + 0.5 - cx[i]) / cfg.objects[i].rx;
							const double ey = (y + 0.5 - cy[i]) / cfg.objects[i].ry;
							if (ex * ex + ey * ey <= 1.0) {
								label = static_cast<std::uint8_t>(i + 1);
								break;
							}
						}
					}
					double base[3];
					int tex;
					if (label == 0) {
						base[0] = cfg.background.r;
						base[1] = cfg.background.g;
						base[2] = cfg.background.b;
						tex = detail::texture_offset(cfg.seed, 0, x, y, cfg.background_texture);
					} else {
						const auto& o = cfg.objects[label - 1];
						base[0] = o.color.r;
						base[1] = o.color.g;
						base[2] = o.color.b;
						// Texture is anchored to the object so it moves with it.
						tex = detail::texture_offset(cfg.seed, label, std::llround(x - cx[label - 1]),
													 std::llround(y - cy[label - 1]), o.texture);
					}
					Rgb c;
					std::uint8_t* out[3] = {&c.r, &c.g, &c.b};
					for (int ch = 0; ch < 3; ++ch) {
						const int n = cfg.noise ? static_cast<int>(noise.uniform_int(-cfg.noise, cfg.noise)) : 0;
						*out[ch] = detail::clamp_byte(base[ch] + tex + brightness + n);
					}
					frame.set(x, y, c);
					mask.set(x, y, label);
				}
			}
			seq.frames.push_back(std::move(frame));
			seq.masks.push_back(std::move(mask));
		}
	}
	return seq;
}

} // namespace vosmem
