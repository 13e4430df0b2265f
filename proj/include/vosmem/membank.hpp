#pragma once

// Memory bank with pluggable retention policies.
//
// Storage and selection are separate: `commit` keeps the raw last-n entries
// behind a pinned reference, and `select_active` decides per query which of
// them are attended. Pruning under `efp` is recomputed every step and never
// touches storage. `efp_destructive` uses the same selection but the caller
// then erases the pruned entries from the window (prune-at-insert reading).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vosmem/embedding.hpp"
#include "vosmem/error.hpp"
#include "vosmem/splitmix.hpp"

namespace vosmem {

struct MemoryEntry {
	std::uint64_t frame_index = 0;
	EmbeddingVector embedding;
	FeatureGrid keys;
	FeatureGrid values; // one channel per tracked object, occupancy in [0, 1]
	bool is_reference = false;
};

enum class PolicyKind { fifo, efp, random, efp_destructive };

inline std::string to_string(PolicyKind k) {
	switch (k) {
	case PolicyKind::fifo: return "fifo";
	case PolicyKind::efp: return "efp";
	case PolicyKind::random: return "random";
	case PolicyKind::efp_destructive: return "efp-destructive";
	}
	return "?";
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
	if (s == "fifo") return PolicyKind::fifo;
	if (s == "efp") return PolicyKind::efp;
	if (s == "random") return PolicyKind::random;
	if (s == "efp-destructive") return PolicyKind::efp_destructive;
	throw Error("unknown policy '" + s + "' (expected fifo, efp, random, efp-destructive)");
}

struct Policy {
	PolicyKind kind = PolicyKind::efp;
	int n = 5; // window length
	int m = 2; // prune count
	std::uint64_t seed = 0; // random policy only

	void validate() const {
		if (n < 1)
			throw Error("n must be >= 1");
		if (m < 0)
			throw Error("m must be >= 0");
		if (m >= n)
			throw Error("m must be < n");
		if (kind == PolicyKind::fifo && m != 0)
			throw Error("fifo policy prunes nothing; m must be 0");
	}

	/// "efp:5:2"
	std::string label() const { return to_string(kind) + ":" + std::to_string(n) + ":" + std::to_string(m); }
};

struct PruneDecision {
	std::vector<std::pair<std::uint64_t, double>> similarities; // window order; empty unless scored
	std::vector<std::uint64_t> pruned;                          // ascending
	std::vector<std::uint64_t> survivors;                       // ascending
};

struct ActiveSet {
	std::vector<std::reference_wrapper<const MemoryEntry>> entries; // reference first, then oldest-first
	PruneDecision decision;

	std::size_t size() const noexcept { return entries.size(); }
};

inline constexpr std::size_t kBytesPerReal = 4;
inline constexpr std::size_t kEntryOverheadBytes = 64;

class MemoryBank {
  public:
	explicit MemoryBank(Policy policy) : policy_(policy) { policy_.validate(); }

	const Policy& policy() const noexcept { return policy_; }
	bool initialized() const noexcept { return reference_.has_value(); }
	const MemoryEntry& reference() const {
		if (!reference_)
			throw Error("bank not initialized");
		return *reference_;
	}
	const std::deque<MemoryEntry>& window() const noexcept { return window_; }
	std::size_t stored_entries() const noexcept { return (reference_ ? 1 : 0) + window_.size(); }

	void init_reference(MemoryEntry entry) {
		if (reference_)
			throw Error("reference already initialized");
		check_shapes(entry);
		entry.is_reference = true;
		reference_ = std::move(entry);
	}

	void commit(MemoryEntry entry) {
		if (!reference_)
			throw Error("bank not initialized");
		if (entry.is_reference)
			throw Error("reference entry can only be set by init_reference");
		if (entry.frame_index <= last_index())
			throw Error("non-monotonic frame index: " + std::to_string(entry.frame_index) + " after " +
						std::to_string(last_index()));
		check_shapes(entry);
		window_.push_back(std::move(entry));
		while (window_.size() > static_cast<std::size_t>(policy_.n))
			window_.pop_front();
	}

	/// Removes the listed frames from the window (prune-at-insert policy).
	void erase(std::span<const std::uint64_t> frame_indices) {
		std::erase_if(window_, [&](const MemoryEntry& e) {
			return std::find(frame_indices.begin(), frame_indices.end(), e.frame_index) != frame_indices.end();
		});
	}

	ActiveSet select_active(const EmbeddingVector& query) const {
		if (!reference_)
			throw Error("bank not initialized");
		ActiveSet out;
		out.entries.emplace_back(*reference_);
		const std::size_t w = window_.size();
		const std::size_t prune = policy_.kind == PolicyKind::fifo ? 0 : std::min<std::size_t>(policy_.m, w);
		std::vector<bool> pruned(w, false);

		switch (policy_.kind) {
		case PolicyKind::fifo:
			break;
		case PolicyKind::efp:
		case PolicyKind::efp_destructive: {
			if (query.is_zero())
				throw Error("undefined similarity for zero vector");
			out.decision.similarities.reserve(w);
			for (const auto& e : window_)
				out.decision.similarities.emplace_back(e.frame_index, cosine_similarity(query, e.embedding));
			std::vector<std::size_t> order(w);
			std::iota(order.begin(), order.end(), std::size_t{0});
			// Highest score first; equal scores prune the older frame.
			std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
				return out.decision.similarities[a].second > out.decision.similarities[b].second;
			});
			for (std::size_t i = 0; i < prune; ++i)
				pruned[order[i]] = true;
			break;
		}
		case PolicyKind::random: {
			auto rng = SplitMix64::stream(policy_.seed, last_index() + 1);
			std::vector<std::size_t> pool(w);
			std::iota(pool.begin(), pool.end(), std::size_t{0});
			for (std::size_t i = 0; i < prune; ++i) {
				const std::size_t j = i + static_cast<std::size_t>(rng.below(w - i));
				std::swap(pool[i], pool[j]);
				pruned[pool[i]] = true;
			}
			break;
		}
		}

		for (std::size_t i = 0; i < w; ++i) {
			if (pruned[i]) {
				out.decision.pruned.push_back(window_[i].frame_index);
			} else {
				out.decision.survivors.push_back(window_[i].frame_index);
				out.entries.emplace_back(window_[i]);
			}
		}
		return out;
	}

  private:
	std::uint64_t last_index() const { return window_.empty() ? reference_->frame_index : window_.back().frame_index; }

	void check_shapes(const MemoryEntry& e) const {
		if (e.keys.gw != e.values.gw || e.keys.gh != e.values.gh)
			throw Error("memory entry key/value grids differ in shape");
		for (double v : e.values.data)
			if (!(v >= 0.0 && v <= 1.0))
				throw Error("memory entry values must lie in [0, 1]");
		if (reference_) {
			const auto& r = *reference_;
			if (e.keys.gw != r.keys.gw || e.keys.gh != r.keys.gh || e.keys.d != r.keys.d || e.values.d != r.values.d ||
				e.embedding.dim() != r.embedding.dim())
				throw Error("memory entry shape differs from reference entry");
		}
	}

	Policy policy_;
	std::optional<MemoryEntry> reference_;
	std::deque<MemoryEntry> window_;
};

inline std::size_t entry_footprint_bytes(const MemoryEntry& e) {
	const std::size_t reals = e.embedding.dim() + e.keys.cells() * static_cast<std::size_t>(e.keys.d) +
							  e.values.cells() * static_cast<std::size_t>(e.values.d);
	return reals * kBytesPerReal + kEntryOverheadBytes;
}

/// Analytic storage cost: every stored entry (reference + window) at
/// 4 bytes per real plus a fixed 64-byte per-entry overhead.
inline std::size_t footprint_bytes(const MemoryBank& bank) {
	std::size_t total = 0;
	if (bank.initialized())
		total += entry_footprint_bytes(bank.reference());
	for (const auto& e : bank.window())
		total += entry_footprint_bytes(e);
	return total;
}

} // namespace vosmem
