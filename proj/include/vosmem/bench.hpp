#pragma once

// Policy-vs-policy benchmark: generate or load sequences, propagate under
// each retention policy, score, and write JSON/CSV reports.
//
// Timing covers only the propagation stages; file IO and scoring are outside
// the measured region. Runs execute in configured order (policy-major, then
// seed), which is also the report order.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vosmem/error.hpp"
#include "vosmem/membank.hpp"
#include "vosmem/metrics.hpp"
#include "vosmem/netpbm.hpp"
#include "vosmem/propagator.hpp"
#include "vosmem/scenario.hpp"
#include "vosmem/sequence_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace vosmem::bench {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kCsvHeader =
	"policy,seed,J,F,JF,Dice,CIoU,fps_total,fps_readout,footprint_bytes,stored_entries,attended_entries";

struct PromptSpec {
	Prompt::Kind kind = Prompt::Kind::full_mask;
	int points_per_object = 1;

	std::string label() const {
		return kind == Prompt::Kind::full_mask ? "mask" : "points:" + std::to_string(points_per_object);
	}
};

struct RunConfig {
	std::string scenario_source = "builtin:redundant";
	std::optional<ScenarioConfig> scenario; // generate when set
	std::optional<std::filesystem::path> load_dir;
	PromptSpec prompt;
	std::vector<Policy> policies;
	PropagatorConfig params;
	std::vector<std::uint64_t> seeds{0};
	std::filesystem::path out = "bench_out";
	bool write_json = true;
	bool write_csv = true;
	bool visualize = false;
	bool save_masks = false;
	bool export_sequences = false;

	void validate() const {
		if (policies.empty())
			throw Error("at least one policy required");
		for (const auto& p : policies)
			p.validate();
		for (std::size_t i = 0; i < policies.size(); ++i)
			for (std::size_t j = i + 1; j < policies.size(); ++j)
				if (policies[i].label() == policies[j].label())
					throw Error("duplicate policy " + policies[i].label());
		if (scenario.has_value() == load_dir.has_value())
			throw Error("exactly one of a scenario or a load directory is required");
		if (scenario && seeds.empty())
			throw Error("seeds must be nonempty when generating");
		if (prompt.kind == Prompt::Kind::points && prompt.points_per_object < 1)
			throw Error("points prompt needs k >= 1");
	}
};

struct RunRow {
	std::string policy;
	std::uint64_t seed = 0;
	SequenceScore score;
	Throughput fps;
	std::size_t footprint_bytes = 0;
	std::size_t stored_entries = 0;
	std::size_t attended_entries = 0;
	std::uint64_t readout_multiplies = 0;
	std::uint64_t mask_digest = 0;
	std::vector<PruneDecision> decisions;
};

struct DeltaRow {
	std::string policy;
	std::string baseline;
	double d_j = 0, d_f = 0, d_jf = 0, d_dice = 0, d_ciou = 0; // mean over seeds of policy - baseline
	double fps_total_ratio = 0, fps_readout_ratio = 0;       // policy / baseline, means over seeds
	double footprint_ratio = 0, stored_ratio = 0, attended_ratio = 0;
	double theoretical_speedup = 0; // 1 / attended_ratio
};

struct EvalReport {
	std::string timestamp;
	bool partial = false;
	std::string error;
	std::string scenario_source;
	std::optional<std::uint64_t> scenario_hash;
	nlohmann::json scenario_config; // null when loaded from disk
	nlohmann::json params;
	std::vector<RunRow> runs;
	std::vector<DeltaRow> deltas;
};

// ---- helpers -------------------------------------------------------------

inline std::string iso8601_now() {
	const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
	std::tm tm{};
	gmtime_r(&now, &tm);
	char buf[32];
	std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

inline std::string hex64(std::uint64_t v) {
	char buf[19];
	std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
	return buf;
}

inline double round6(double v) {
	return std::round(v * 1e6) / 1e6;
}

inline std::string fixed6(double v) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.6f", v);
	return buf;
}

inline std::uint64_t mask_digest(const std::vector<ObjectMaskMap>& masks) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (const auto& m : masks)
		for (std::uint8_t v : m.labels) {
			h ^= v;
			h *= 0x100000001b3ULL;
		}
	return h;
}

inline std::string path_label(const std::string& policy) {
	std::string s = policy;
	for (char& c : s)
		if (c == ':')
			c = '_';
	return s;
}

/// k interior points per object present in `gt`: the interior pixel nearest
/// the centroid, then farthest-point sampling. Interior means the 5x5
/// neighbourhood lies inside the object; falls back to all object pixels.
inline std::vector<PromptPoint> points_from_mask(const ObjectMaskMap& gt, int k) {
	std::vector<PromptPoint> pts;
	const int kmax = gt.max_label();
	for (int id = 1; id <= kmax; ++id) {
		std::vector<std::pair<int, int>> all, interior;
		double sx = 0, sy = 0;
		for (int y = 0; y < gt.height; ++y)
			for (int x = 0; x < gt.width; ++x) {
				if (gt.at(x, y) != id)
					continue;
				all.emplace_back(x, y);
				sx += x;
				sy += y;
				bool inside = true;
				for (int dy = -2; dy <= 2 && inside; ++dy)
					for (int dx = -2; dx <= 2 && inside; ++dx) {
						const int xx = x + dx, yy = y + dy;
						inside = xx >= 0 && yy >= 0 && xx < gt.width && yy < gt.height && gt.at(xx, yy) == id;
					}
				if (inside)
					interior.emplace_back(x, y);
			}
		if (all.empty())
			continue;
		const auto& cand = interior.empty() ? all : interior;
		const double cx = sx / double(all.size()), cy = sy / double(all.size());
		std::vector<std::pair<int, int>> chosen;
		{
			std::size_t best = 0;
			double bd = std::numeric_limits<double>::infinity();
			for (std::size_t i = 0; i < cand.size(); ++i) {
				const double d = (cand[i].first - cx) * (cand[i].first - cx) + (cand[i].second - cy) * (cand[i].second - cy);
				if (d < bd) {
					bd = d;
					best = i;
				}
			}
			chosen.push_back(cand[best]);
		}
		while (static_cast<int>(chosen.size()) < k && chosen.size() < cand.size()) {
			std::size_t best = 0;
			long bd = -1;
			for (std::size_t i = 0; i < cand.size(); ++i) {
				long md = std::numeric_limits<long>::max();
				for (const auto& c : chosen) {
					const long dx = cand[i].first - c.first, dy = cand[i].second - c.second;
					md = std::min(md, dx * dx + dy * dy);
				}
				if (md > bd) {
					bd = md;
					best = i;
				}
			}
			chosen.push_back(cand[best]);
		}
		for (const auto& c : chosen)
			pts.push_back({c.first, c.second, static_cast<std::uint8_t>(id)});
	}
	return pts;
}

inline Prompt make_prompt(const PromptSpec& spec, const ObjectMaskMap& gt0) {
	if (spec.kind == Prompt::Kind::full_mask)
		return Prompt::from_mask(gt0);
	return Prompt::from_points(points_from_mask(gt0, spec.points_per_object));
}

inline std::string affinity_name(Affinity a) {
	return a == Affinity::l2 ? "l2" : "dot";
}

inline nlohmann::json params_json(const RunConfig& cfg) {
	return {{"patch", cfg.params.patch},
			{"dim", cfg.params.dim},
			{"temperature", round6(cfg.params.temperature)},
			{"threshold", round6(cfg.params.threshold)},
			{"flood_tau", cfg.params.flood_tau},
			{"affinity", affinity_name(cfg.params.affinity)},
			{"prompt", cfg.prompt.label()}};
}

// ---- run -----------------------------------------------------------------

inline RunRow evaluate(const Sequence& seq, const RunConfig& cfg, const Policy& policy, std::uint64_t seed) {
	PropagatorConfig pc = cfg.params;
	pc.policy = policy;
	pc.policy.seed = seed;
	const Prompt prompt = make_prompt(cfg.prompt, seq.masks.front());
	const PropagationResult res = propagate(seq.frames, prompt, pc);

	RunRow row;
	row.policy = policy.label();
	row.seed = seed;
	row.score = score_sequence(res.masks, seq.masks, std::max(seq.num_objects, res.num_objects));
	row.fps = throughput(res.timings);
	row.footprint_bytes = res.peak_footprint_bytes;
	row.stored_entries = *std::max_element(res.stored_entries.begin(), res.stored_entries.end());
	row.attended_entries = *std::max_element(res.attended_entries.begin(), res.attended_entries.end());
	row.readout_multiplies = res.readout_multiplies;
	row.mask_digest = mask_digest(res.masks);
	row.decisions = res.decisions;

	const std::string tag = path_label(row.policy) + "/seed_" + std::to_string(seed);
	if (cfg.save_masks) {
		const auto dir = cfg.out / "masks" / tag;
		std::filesystem::create_directories(dir);
		for (std::size_t t = 0; t < res.masks.size(); ++t)
			netpbm::write_pgm(dir / (frame_stem(t) + ".pgm"), res.masks[t]);
	}
	if (cfg.visualize) {
		const auto dir = cfg.out / "visualize" / tag;
		std::filesystem::create_directories(dir);
		const int scale = 255 / std::max(1, res.num_objects);
		for (std::size_t t = 0; t < res.masks.size(); ++t)
			netpbm::write_pgm(dir / (frame_stem(t) + ".pgm"), res.masks[t], scale);
	}
	return row;
}

/// Deltas of every non-fifo policy against every fifo policy, averaged over
/// the seeds both were run on.
inline std::vector<DeltaRow> compute_deltas(const std::vector<Policy>& policies, const std::vector<RunRow>& runs) {
	std::vector<DeltaRow> out;
	for (const auto& p : policies) {
		if (p.kind == PolicyKind::fifo)
			continue;
		for (const auto& b : policies) {
			if (b.kind != PolicyKind::fifo)
				continue;
			DeltaRow d;
			d.policy = p.label();
			d.baseline = b.label();
			int n = 0;
			for (const auto& rp : runs) {
				if (rp.policy != d.policy)
					continue;
				for (const auto& rb : runs) {
					if (rb.policy != d.baseline || rb.seed != rp.seed)
						continue;
					d.d_j += rp.score.j - rb.score.j;
					d.d_f += rp.score.f - rb.score.f;
					d.d_jf += rp.score.jf - rb.score.jf;
					d.d_dice += rp.score.dice - rb.score.dice;
					d.d_ciou += rp.score.ciou - rb.score.ciou;
					d.fps_total_ratio += rp.fps.fps_total / rb.fps.fps_total;
					d.fps_readout_ratio += rp.fps.fps_readout / rb.fps.fps_readout;
					d.footprint_ratio += double(rp.footprint_bytes) / double(rb.footprint_bytes);
					d.stored_ratio += double(rp.stored_entries) / double(rb.stored_entries);
					d.attended_ratio += double(rp.attended_entries) / double(rb.attended_entries);
					++n;
				}
			}
			if (n == 0)
				continue;
			for (double* v : {&d.d_j, &d.d_f, &d.d_jf, &d.d_dice, &d.d_ciou, &d.fps_total_ratio, &d.fps_readout_ratio,
							  &d.footprint_ratio, &d.stored_ratio, &d.attended_ratio})
				*v /= n;
			d.theoretical_speedup = d.attended_ratio > 0 ? 1.0 / d.attended_ratio : 0.0;
			out.push_back(d);
		}
	}
	return out;
}

inline nlohmann::json to_json(const EvalReport& r) {
	using nlohmann::json;
	json runs = json::array();
	for (const auto& row : r.runs) {
		json decisions = json::array();
		for (std::size_t t = 1; t < row.decisions.size(); ++t) {
			const auto& dec = row.decisions[t];
			json sims = json::array();
			for (const auto& [idx, s] : dec.similarities)
				sims.push_back({idx, round6(s)});
			decisions.push_back({{"frame", t}, {"pruned", dec.pruned}, {"survivors", dec.survivors}, {"similarities", sims}});
		}
		runs.push_back({{"policy", row.policy},
						{"seed", row.seed},
						{"J", round6(row.score.j)},
						{"F", round6(row.score.f)},
						{"JF", round6(row.score.jf)},
						{"Dice", round6(row.score.dice)},
						{"CIoU", round6(row.score.ciou)},
						{"frames_evaluated", row.score.frames_evaluated},
						{"fps_total", round6(row.fps.fps_total)},
						{"fps_readout", round6(row.fps.fps_readout)},
						{"footprint_bytes", row.footprint_bytes},
						{"stored_entries", row.stored_entries},
						{"attended_entries", row.attended_entries},
						{"readout_multiplies", row.readout_multiplies},
						{"mask_digest", hex64(row.mask_digest)},
						{"decisions", decisions}});
	}
	json deltas = json::array();
	for (const auto& d : r.deltas)
		deltas.push_back({{"policy", d.policy},
						  {"baseline", d.baseline},
						  {"dJ", round6(d.d_j)},
						  {"dF", round6(d.d_f)},
						  {"dJF", round6(d.d_jf)},
						  {"dDice", round6(d.d_dice)},
						  {"dCIoU", round6(d.d_ciou)},
						  {"fps_total_ratio", round6(d.fps_total_ratio)},
						  {"fps_readout_ratio", round6(d.fps_readout_ratio)},
						  {"footprint_ratio", round6(d.footprint_ratio)},
						  {"stored_ratio", round6(d.stored_ratio)},
						  {"attended_ratio", round6(d.attended_ratio)},
						  {"theoretical_readout_speedup", round6(d.theoretical_speedup)}});
	json j{{"tool", "vosbench"},
		   {"version", kToolVersion},
		   {"timestamp", r.timestamp},
		   {"partial", r.partial},
		   {"error", r.error.empty() ? json(nullptr) : json(r.error)},
		   {"scenario",
			{{"source", r.scenario_source},
			 {"hash", r.scenario_hash ? json(hex64(*r.scenario_hash)) : json(nullptr)},
			 {"config", r.scenario_config}}},
		   {"params", r.params},
		   {"runs", runs},
		   {"deltas", deltas},
		   {"context",
			{{"published_end_to_end_fps_gain", 0.138},
			 {"note", "fps ratios here isolate the memory-readout share; resolution and fine-tuning gains are out of "
					  "scope"}}}};
	return j;
}

/// Report with wall-clock fields removed, for determinism comparisons.
inline nlohmann::json strip_timing(nlohmann::json j) {
	j.erase("timestamp");
	for (auto& run : j["runs"]) {
		run.erase("fps_total");
		run.erase("fps_readout");
	}
	for (auto& d : j["deltas"]) {
		d.erase("fps_total_ratio");
		d.erase("fps_readout_ratio");
	}
	return j;
}

/// Inverse of `to_json`. The constant `context` block is not read back.
inline EvalReport report_from_json(const nlohmann::json& j) {
	auto hex = [](const std::string& h) { return static_cast<std::uint64_t>(std::stoull(h, nullptr, 16)); };
	EvalReport r;
	try {
		r.timestamp = j.at("timestamp").get<std::string>();
		r.partial = j.at("partial").get<bool>();
		r.error = j.at("error").is_null() ? "" : j.at("error").get<std::string>();
		const auto& sc = j.at("scenario");
		r.scenario_source = sc.at("source").get<std::string>();
		if (!sc.at("hash").is_null())
			r.scenario_hash = hex(sc.at("hash").get<std::string>());
		r.scenario_config = sc.at("config");
		r.params = j.at("params");
		for (const auto& x : j.at("runs")) {
			RunRow row;
			row.policy = x.at("policy").get<std::string>();
			row.seed = x.at("seed").get<std::uint64_t>();
			row.score.j = x.at("J").get<double>();
			row.score.f = x.at("F").get<double>();
			row.score.jf = x.at("JF").get<double>();
			row.score.dice = x.at("Dice").get<double>();
			row.score.ciou = x.at("CIoU").get<double>();
			row.score.frames_evaluated = x.at("frames_evaluated").get<std::size_t>();
			row.fps.fps_total = x.at("fps_total").get<double>();
			row.fps.fps_readout = x.at("fps_readout").get<double>();
			row.footprint_bytes = x.at("footprint_bytes").get<std::size_t>();
			row.stored_entries = x.at("stored_entries").get<std::size_t>();
			row.attended_entries = x.at("attended_entries").get<std::size_t>();
			row.readout_multiplies = x.at("readout_multiplies").get<std::uint64_t>();
			row.mask_digest = hex(x.at("mask_digest").get<std::string>());
			row.decisions.emplace_back();
			for (const auto& d : x.at("decisions")) {
				PruneDecision dec;
				dec.pruned = d.at("pruned").get<std::vector<std::uint64_t>>();
				dec.survivors = d.at("survivors").get<std::vector<std::uint64_t>>();
				for (const auto& s : d.at("similarities"))
					dec.similarities.emplace_back(s.at(0).get<std::uint64_t>(), s.at(1).get<double>());
				row.decisions.push_back(std::move(dec));
			}
			r.runs.push_back(std::move(row));
		}
		for (const auto& x : j.at("deltas")) {
			DeltaRow d;
			d.policy = x.at("policy").get<std::string>();
			d.baseline = x.at("baseline").get<std::string>();
			d.d_j = x.at("dJ").get<double>();
			d.d_f = x.at("dF").get<double>();
			d.d_jf = x.at("dJF").get<double>();
			d.d_dice = x.at("dDice").get<double>();
			d.d_ciou = x.at("dCIoU").get<double>();
			d.fps_total_ratio = x.at("fps_total_ratio").get<double>();
			d.fps_readout_ratio = x.at("fps_readout_ratio").get<double>();
			d.footprint_ratio = x.at("footprint_ratio").get<double>();
			d.stored_ratio = x.at("stored_ratio").get<double>();
			d.attended_ratio = x.at("attended_ratio").get<double>();
			d.theoretical_speedup = x.at("theoretical_readout_speedup").get<double>();
			r.deltas.push_back(d);
		}
	} catch (const nlohmann::json::exception& e) {
		throw Error(std::string("report: ") + e.what());
	} catch (const std::logic_error& e) {
		throw Error(std::string("report: malformed digest: ") + e.what());
	}
	return r;
}

inline std::string to_csv(const EvalReport& r) {
	std::ostringstream os;
	os << kCsvHeader << "\n";
	for (const auto& row : r.runs)
		os << row.policy << ',' << row.seed << ',' << fixed6(row.score.j) << ',' << fixed6(row.score.f) << ','
		   << fixed6(row.score.jf) << ',' << fixed6(row.score.dice) << ',' << fixed6(row.score.ciou) << ','
		   << fixed6(row.fps.fps_total) << ',' << fixed6(row.fps.fps_readout) << ',' << row.footprint_bytes << ','
		   << row.stored_entries << ',' << row.attended_entries << "\n";
	// Delta rows: score columns are differences, the rest are ratios.
	for (const auto& d : r.deltas)
		os << "delta:" << d.policy << "-" << d.baseline << ",all," << fixed6(d.d_j) << ',' << fixed6(d.d_f) << ','
		   << fixed6(d.d_jf) << ',' << fixed6(d.d_dice) << ',' << fixed6(d.d_ciou) << ',' << fixed6(d.fps_total_ratio)
		   << ',' << fixed6(d.fps_readout_ratio) << ',' << fixed6(d.footprint_ratio) << ',' << fixed6(d.stored_ratio)
		   << ',' << fixed6(d.attended_ratio) << "\n";
	return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw Error("cannot write " + path.generic_string());
	out << text;
	if (!out)
		throw Error("write failed: " + path.generic_string());
}

inline void emit_json(const EvalReport& r, const std::filesystem::path& path) {
	write_text(path, to_json(r).dump(2) + "\n");
}

inline void emit_csv(const EvalReport& r, const std::filesystem::path& path) {
	write_text(path, to_csv(r));
}

inline void emit(const EvalReport& r, const RunConfig& cfg) {
	std::error_code ec;
	std::filesystem::create_directories(cfg.out, ec);
	if (ec)
		throw Error("cannot create " + cfg.out.generic_string() + ": " + ec.message());
	if (cfg.write_json)
		emit_json(r, cfg.out / "report.json");
	if (cfg.write_csv)
		emit_csv(r, cfg.out / "report.csv");
}

/// Runs every policy x seed and returns the report. On failure the report
/// is marked partial, carries the error, and already-finished rows remain.
/// Nothing is written to disk; see `emit`.
inline EvalReport run(const RunConfig& cfg) {
	cfg.validate();
	EvalReport rep;
	rep.timestamp = iso8601_now();
	rep.scenario_source = cfg.scenario_source;
	rep.params = params_json(cfg);
	if (cfg.scenario) {
		ScenarioConfig base = *cfg.scenario;
		base.seed = 0;
		rep.scenario_hash = config_hash(base);
		rep.scenario_config = to_json(base);
		rep.scenario_config.erase("seed");
	}

	std::string context;
	try {
		// A loaded sequence is shared by every seed (seeds then only drive
		// the random policy).
		const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{0} : cfg.seeds;
		std::vector<Sequence> sequences;
		if (cfg.scenario) {
			for (auto s : seeds) {
				context = "seed " + std::to_string(s) + ": ";
				ScenarioConfig sc = *cfg.scenario;
				sc.seed = s;
				sequences.push_back(generate(sc));
				if (cfg.export_sequences)
					save_sequence(sequences.back(), cfg.out / "sequences" / ("seed_" + std::to_string(s)));
			}
		} else {
			context = "load " + cfg.load_dir->generic_string() + ": ";
			sequences.push_back(load_sequence(*cfg.load_dir));
		}
		for (const auto& policy : cfg.policies)
			for (std::size_t i = 0; i < seeds.size(); ++i) {
				context = "policy " + policy.label() + ", seed " + std::to_string(seeds[i]) + ": ";
				rep.runs.push_back(evaluate(sequences[cfg.scenario ? i : 0], cfg, policy, seeds[i]));
			}
		context.clear();
	} catch (const std::exception& e) {
		rep.partial = true;
		rep.error = context + e.what();
	}
	rep.deltas = compute_deltas(cfg.policies, rep.runs);
	return rep;
}

// ---- CLI -----------------------------------------------------------------

/// Bad command line; the CLI exits with status 2.
class UsageError : public Error {
  public:
	UsageError(const std::string& msg, std::string usage) : Error(msg), usage_(std::move(usage)) {}
	const std::string& usage() const noexcept { return usage_; }

  private:
	std::string usage_;
};

inline Policy parse_policy(const std::string& s) {
	const auto a = s.find(':');
	const auto b = a == std::string::npos ? a : s.find(':', a + 1);
	if (a == std::string::npos || b == std::string::npos || s.find(':', b + 1) != std::string::npos)
		throw Error("expected name:n:m, got '" + s + "'");
	Policy p;
	p.kind = policy_kind_from_string(s.substr(0, a));
	try {
		std::size_t used = 0;
		const std::string ns = s.substr(a + 1, b - a - 1), ms = s.substr(b + 1);
		p.n = std::stoi(ns, &used);
		if (used != ns.size())
			throw std::invalid_argument(ns);
		p.m = std::stoi(ms, &used);
		if (used != ms.size())
			throw std::invalid_argument(ms);
	} catch (const std::logic_error&) {
		throw Error("n and m must be integers in '" + s + "'");
	}
	p.validate();
	return p;
}

inline PromptSpec parse_prompt(const std::string& s) {
	if (s == "mask")
		return {Prompt::Kind::full_mask, 1};
	if (s.rfind("points:", 0) == 0) {
		try {
			std::size_t used = 0;
			const std::string ks = s.substr(7);
			const int k = std::stoi(ks, &used);
			if (used == ks.size() && k >= 1)
				return {Prompt::Kind::points, k};
		} catch (const std::logic_error&) {
		}
	}
	throw Error("expected mask or points:K (K >= 1), got '" + s + "'");
}

/// "3", "0..4" (inclusive) or "0,2,5".
inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
	auto num = [&](const std::string& t) {
		if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
			throw Error("malformed seed list '" + s + "'");
		return static_cast<std::uint64_t>(std::stoull(t));
	};
	std::vector<std::uint64_t> out;
	if (const auto dots = s.find(".."); dots != std::string::npos) {
		const auto lo = num(s.substr(0, dots)), hi = num(s.substr(dots + 2));
		if (hi < lo)
			throw Error("empty seed range '" + s + "'");
		for (auto v = lo; v <= hi; ++v)
			out.push_back(v);
		return out;
	}
	std::size_t start = 0;
	while (true) {
		const auto comma = s.find(',', start);
		out.push_back(num(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
		if (comma == std::string::npos)
			break;
		start = comma + 1;
	}
	return out;
}

inline ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in)
		throw Error("cannot open scenario " + path.generic_string());
	nlohmann::json j;
	try {
		in >> j;
	} catch (const nlohmann::json::exception& e) {
		throw Error(path.generic_string() + ": " + e.what());
	}
	return scenario_from_json(j);
}

inline RunConfig cli_parse(const std::vector<std::string>& args) {
	CLI::App app{"Memory-bank retention policy benchmark for streaming video object segmentation", "vosbench"};
	std::vector<std::string> policies;
	std::string prompt = "mask", scenario = "builtin:redundant", seeds = "0", out = "bench_out", load, affinity = "l2",
				format = "both";
	RunConfig cfg;
	app.add_option("--policy", policies, "Retention policy name:n:m (fifo, efp, random, efp-destructive); repeatable");
	app.add_option("--prompt", prompt, "mask | points:K");
	app.add_option("--scenario", scenario, "builtin:<name> or a scenario JSON file");
	app.add_option("--load", load, "Load a sequence directory instead of generating");
	app.add_option("--seeds", seeds, "Seeds: N, A..B or A,B,C");
	app.add_option("--out", out, "Output directory");
	app.add_option("--patch", cfg.params.patch, "Feature cell size (8, 16, 32)");
	app.add_option("--dim", cfg.params.dim, "Descriptor channels (>= 10)");
	app.add_option("--temperature", cfg.params.temperature, "Readout softmax temperature (> 0)");
	app.add_option("--threshold", cfg.params.threshold, "Decode threshold in (0, 1)");
	app.add_option("--flood-tau", cfg.params.flood_tau, "Point-prompt flood-fill L1 RGB tolerance");
	app.add_option("--affinity", affinity, "Readout affinity: l2 | dot");
	app.add_option("--format", format, "json | csv | both");
	app.add_flag("--visualize", cfg.visualize, "Write scaled mask previews");
	app.add_flag("--save-masks", cfg.save_masks, "Write predicted label maps");
	app.add_flag("--export-sequences", cfg.export_sequences, "Write generated sequences to <out>/sequences");

	std::vector<std::string> rev(args.rbegin(), args.rend());
	try {
		app.parse(rev);
	} catch (const CLI::CallForHelp&) {
		throw UsageError("", app.help());
	} catch (const CLI::ParseError& e) {
		throw UsageError(e.what(), app.help());
	}

	auto flag_error = [&](const std::string& flag, const std::exception& e) {
		return UsageError(flag + ": " + e.what(), app.help());
	};
	try {
		for (const auto& p : policies)
			cfg.policies.push_back(parse_policy(p));
	} catch (const std::exception& e) {
		throw flag_error("--policy", e);
	}
	if (cfg.policies.empty())
		cfg.policies = {Policy{PolicyKind::fifo, 6, 0}, Policy{PolicyKind::efp, 5, 2}};
	try {
		cfg.prompt = parse_prompt(prompt);
	} catch (const std::exception& e) {
		throw flag_error("--prompt", e);
	}
	try {
		cfg.seeds = parse_seeds(seeds);
	} catch (const std::exception& e) {
		throw flag_error("--seeds", e);
	}
	if (!load.empty()) {
		cfg.load_dir = load;
		cfg.scenario_source = "load:" + load;
	} else {
		try {
			cfg.scenario = scenario.rfind("builtin:", 0) == 0 ? builtin_scenario(scenario.substr(8))
															   : load_scenario_file(scenario);
		} catch (const std::exception& e) {
			throw flag_error("--scenario", e);
		}
		cfg.scenario_source = scenario;
	}
	if (affinity == "l2")
		cfg.params.affinity = Affinity::l2;
	else if (affinity == "dot")
		cfg.params.affinity = Affinity::dot;
	else
		throw UsageError("--affinity: expected l2 or dot", app.help());
	if (format == "json" || format == "csv" || format == "both") {
		cfg.write_json = format != "csv";
		cfg.write_csv = format != "json";
	} else {
		throw UsageError("--format: expected json, csv or both", app.help());
	}
	try {
		check_patch(cfg.params.patch);
	} catch (const std::exception& e) {
		throw flag_error("--patch", e);
	}
	if (cfg.params.dim < kContentChannels)
		throw UsageError("--dim: descriptor needs >= 10 channels", app.help());
	if (!(cfg.params.temperature > 0))
		throw UsageError("--temperature: must be > 0", app.help());
	if (!(cfg.params.threshold > 0 && cfg.params.threshold < 1))
		throw UsageError("--threshold: must lie in (0, 1)", app.help());
	if (cfg.params.flood_tau < 0)
		throw UsageError("--flood-tau: must be >= 0", app.help());
	cfg.out = out;
	return cfg;
}

} // namespace vosmem::bench
