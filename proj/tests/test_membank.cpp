#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "vosmem/membank.hpp"

using namespace vosmem;

namespace {

// Entry whose embedding has cosine `sim` with the query (1, 0).
MemoryEntry entry_with_similarity(std::uint64_t index, double sim) {
	MemoryEntry e;
	e.frame_index = index;
	e.embedding = EmbeddingVector({sim, std::sqrt(std::max(0.0, 1.0 - sim * sim))});
	e.keys = FeatureGrid(2, 2, 3);
	e.values = FeatureGrid(2, 2, 1);
	return e;
}

const EmbeddingVector kQuery({1.0, 0.0});

MemoryBank bank_with(Policy p, const std::vector<double>& sims, std::uint64_t first = 1) {
	MemoryBank bank(p);
	bank.init_reference(entry_with_similarity(0, 0.5));
	for (std::size_t i = 0; i < sims.size(); ++i)
		bank.commit(entry_with_similarity(first + i, sims[i]));
	return bank;
}

std::vector<std::uint64_t> active_indices(const ActiveSet& a) {
	std::vector<std::uint64_t> out;
	for (const MemoryEntry& e : a.entries)
		out.push_back(e.frame_index);
	return out;
}

} // namespace

TEST(Policy, Validation) {
	EXPECT_NO_THROW((Policy{PolicyKind::efp, 5, 2}.validate()));
	EXPECT_NO_THROW((Policy{PolicyKind::fifo, 6, 0}.validate()));
	try {
		Policy{PolicyKind::efp, 2, 5}.validate();
		FAIL();
	} catch (const Error& e) {
		EXPECT_STREQ(e.what(), "m must be < n");
	}
	EXPECT_THROW((Policy{PolicyKind::efp, 0, 0}.validate()), Error);
	EXPECT_THROW((Policy{PolicyKind::efp, 3, -1}.validate()), Error);
	EXPECT_THROW((Policy{PolicyKind::fifo, 6, 1}.validate()), Error);
	EXPECT_THROW(MemoryBank(Policy{PolicyKind::efp, 3, 3}), Error);
	EXPECT_EQ((Policy{PolicyKind::efp, 5, 2}.label()), "efp:5:2");
	for (auto k : {PolicyKind::fifo, PolicyKind::efp, PolicyKind::random, PolicyKind::efp_destructive})
		EXPECT_EQ(policy_kind_from_string(to_string(k)), k);
	EXPECT_THROW(policy_kind_from_string("lru"), Error);
}

TEST(SelectActive, PrunesTheMostSimilar) {
	// t = 6; window holds t-5 .. t-1.
	const auto bank = bank_with({PolicyKind::efp, 5, 2}, {0.99, 0.98, 0.50, 0.40, 0.30});
	const auto a = bank.select_active(kQuery);
	EXPECT_EQ(a.decision.pruned, (std::vector<std::uint64_t>{1, 2}));
	EXPECT_EQ(a.decision.survivors, (std::vector<std::uint64_t>{3, 4, 5}));
	EXPECT_EQ(a.size(), 4u);
	EXPECT_EQ(active_indices(a), (std::vector<std::uint64_t>{0, 3, 4, 5}));
	ASSERT_EQ(a.decision.similarities.size(), 5u);
	EXPECT_NEAR(a.decision.similarities[0].second, 0.99, 1e-12);
	EXPECT_TRUE(a.entries.front().get().is_reference);
}

TEST(SelectActive, TieBreakPrunesOlderFrame) {
	// Window t-5..t-1 scores 0.9, 0.2, 0.3, 0.4, 0.9.
	const auto bank = bank_with({PolicyKind::efp, 5, 1}, {0.9, 0.2, 0.3, 0.4, 0.9});
	const auto a = bank.select_active(kQuery);
	EXPECT_EQ(a.decision.pruned, (std::vector<std::uint64_t>{1}));
	EXPECT_EQ(active_indices(a), (std::vector<std::uint64_t>{0, 2, 3, 4, 5}));
}

TEST(SelectActive, ZeroPruneMatchesFifo) {
	const std::vector<double> sims{0.1, 0.7, 0.3, 0.99, 0.5, 0.2};
	const auto efp = bank_with({PolicyKind::efp, 6, 0}, sims);
	const auto fifo = bank_with({PolicyKind::fifo, 6, 0}, sims);
	EXPECT_EQ(active_indices(efp.select_active(kQuery)), active_indices(fifo.select_active(kQuery)));
	EXPECT_TRUE(efp.select_active(kQuery).decision.pruned.empty());
}

TEST(SelectActive, ReferenceOnlyAfterInit) {
	MemoryBank bank(Policy{PolicyKind::efp, 5, 2});
	EXPECT_THROW(bank.select_active(kQuery), Error);
	bank.init_reference(entry_with_similarity(0, 1.0));
	const auto a = bank.select_active(kQuery);
	EXPECT_EQ(active_indices(a), (std::vector<std::uint64_t>{0}));
	EXPECT_TRUE(a.decision.pruned.empty());
}

TEST(SelectActive, PartialWindowPrunesAtMostItsSize) {
	const auto bank = bank_with({PolicyKind::efp, 5, 2}, {0.8});
	const auto a = bank.select_active(kQuery);
	EXPECT_EQ(a.decision.pruned, (std::vector<std::uint64_t>{1}));
	EXPECT_EQ(a.size(), 1u);
}

TEST(SelectActive, ZeroQueryRejected) {
	const auto bank = bank_with({PolicyKind::efp, 5, 2}, {0.8, 0.5});
	EXPECT_THROW(bank.select_active(EmbeddingVector({0.0, 0.0})), Error);
	// fifo never scores, so a zero query is fine there.
	const auto fifo = bank_with({PolicyKind::fifo, 5, 0}, {0.8, 0.5});
	EXPECT_EQ(fifo.select_active(EmbeddingVector({0.0, 0.0})).size(), 3u);
}

TEST(SelectActive, DoesNotMutateBank) {
	const auto bank = bank_with({PolicyKind::efp, 5, 2}, {0.99, 0.98, 0.50, 0.40, 0.30});
	const auto before = footprint_bytes(bank);
	for (int i = 0; i < 3; ++i)
		(void)bank.select_active(kQuery);
	EXPECT_EQ(bank.window().size(), 5u);
	EXPECT_EQ(footprint_bytes(bank), before);
}

TEST(SelectActive, PartitionProperties) {
	SplitMix64 rng(99);
	for (int trial = 0; trial < 300; ++trial) {
		const int n = 1 + static_cast<int>(rng.below(8));
		const int m = static_cast<int>(rng.below(n));
		const int filled = static_cast<int>(rng.below(2 * n + 1));
		std::vector<double> sims(filled);
		for (auto& s : sims)
			s = double(rng.below(5)) / 4.0; // coarse values force ties
		for (PolicyKind kind : {PolicyKind::efp, PolicyKind::random}) {
			const auto bank = bank_with({kind, n, m, 17}, sims, 1);
			const auto a = bank.select_active(kQuery);
			const std::size_t w = bank.window().size();
			ASSERT_EQ(w, std::min<std::size_t>(filled, n));
			const std::size_t expect_pruned = std::min<std::size_t>(m, w);
			ASSERT_EQ(a.decision.pruned.size(), expect_pruned);
			ASSERT_EQ(a.size(), 1 + w - expect_pruned);
			ASSERT_TRUE(a.entries.front().get().is_reference);
			// Survivors stay in ascending frame order and are disjoint from pruned.
			auto idx = active_indices(a);
			ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
			for (auto p : a.decision.pruned)
				ASSERT_EQ(std::find(idx.begin(), idx.end(), p), idx.end());
			if (kind == PolicyKind::efp) {
				// Every pruned score >= every surviving score.
				double min_pruned = 2, max_kept = -2;
				for (const auto& [f, s] : a.decision.similarities) {
					const bool pr = std::find(a.decision.pruned.begin(), a.decision.pruned.end(), f) !=
									a.decision.pruned.end();
					if (pr)
						min_pruned = std::min(min_pruned, s);
					else
						max_kept = std::max(max_kept, s);
				}
				if (!a.decision.pruned.empty() && !a.decision.survivors.empty()) {
					ASSERT_GE(min_pruned, max_kept);
				}
			}
		}
	}
}

TEST(SelectActive, RandomPolicyIsSeeded) {
	const std::vector<double> sims{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
	const auto a = bank_with({PolicyKind::random, 6, 3, 5}, sims).select_active(kQuery);
	const auto b = bank_with({PolicyKind::random, 6, 3, 5}, sims).select_active(kQuery);
	EXPECT_EQ(a.decision.pruned, b.decision.pruned);
	bool differs = false;
	for (std::uint64_t s = 6; s < 40 && !differs; ++s)
		differs = bank_with({PolicyKind::random, 6, 3, s}, sims).select_active(kQuery).decision.pruned !=
				  a.decision.pruned;
	EXPECT_TRUE(differs);
}

TEST(Commit, RingEviction) {
	MemoryBank bank(Policy{PolicyKind::efp, 5, 2});
	bank.init_reference(entry_with_similarity(0, 1.0));
	bank.commit(entry_with_similarity(1, 0.5));
	ASSERT_EQ(bank.window().size(), 1u);
	EXPECT_EQ(bank.window().front().frame_index, 1u);
	for (std::uint64_t i = 2; i <= 5; ++i)
		bank.commit(entry_with_similarity(i, 0.5));
	bank.commit(entry_with_similarity(6, 0.5));
	ASSERT_EQ(bank.window().size(), 5u);
	EXPECT_EQ(bank.window().front().frame_index, 2u);
	EXPECT_EQ(bank.window().back().frame_index, 6u);
}

TEST(Commit, WindowHoldsMostRecent) {
	MemoryBank bank(Policy{PolicyKind::fifo, 5, 0});
	bank.init_reference(entry_with_similarity(0, 1.0));
	for (std::uint64_t i = 1; i <= 100; ++i) {
		bank.commit(entry_with_similarity(i, 0.5));
		const std::uint64_t lo = i > 5 ? i - 4 : 1;
		ASSERT_EQ(bank.window().size(), i - lo + 1);
		std::uint64_t expect = lo;
		for (const auto& e : bank.window())
			ASSERT_EQ(e.frame_index, expect++);
	}
}

TEST(Commit, ReferenceIsPinned) {
	MemoryBank bank(Policy{PolicyKind::efp, 5, 2});
	bank.init_reference(entry_with_similarity(0, 0.25));
	const auto ref_embedding = bank.reference().embedding;
	for (std::uint64_t i = 1; i <= 10000; ++i)
		bank.commit(entry_with_similarity(i, 0.5));
	EXPECT_EQ(bank.reference().frame_index, 0u);
	EXPECT_EQ(bank.reference().embedding, ref_embedding);
	EXPECT_EQ(bank.stored_entries(), 6u);
	EXPECT_EQ(bank.select_active(kQuery).entries.front().get().frame_index, 0u);
}

TEST(Commit, Errors) {
	MemoryBank bank(Policy{PolicyKind::efp, 5, 2});
	try {
		bank.commit(entry_with_similarity(1, 0.5));
		FAIL();
	} catch (const Error& e) {
		EXPECT_STREQ(e.what(), "bank not initialized");
	}
	bank.init_reference(entry_with_similarity(0, 1.0));
	EXPECT_THROW(bank.init_reference(entry_with_similarity(0, 1.0)), Error);
	bank.commit(entry_with_similarity(3, 0.5));
	EXPECT_THROW(bank.commit(entry_with_similarity(3, 0.5)), Error);
	EXPECT_THROW(bank.commit(entry_with_similarity(2, 0.5)), Error);
	auto wrong = entry_with_similarity(4, 0.5);
	wrong.keys = FeatureGrid(3, 2, 3);
	EXPECT_THROW(bank.commit(wrong), Error);
	auto bad_value = entry_with_similarity(4, 0.5);
	bad_value.values.data[0] = 1.5;
	EXPECT_THROW(bank.commit(bad_value), Error);
	auto ref = entry_with_similarity(4, 0.5);
	ref.is_reference = true;
	EXPECT_THROW(bank.commit(ref), Error);
}

TEST(Erase, RemovesListedFrames) {
	auto bank = bank_with({PolicyKind::efp_destructive, 5, 2}, {0.99, 0.98, 0.50, 0.40, 0.30});
	const auto a = bank.select_active(kQuery);
	bank.erase(a.decision.pruned);
	ASSERT_EQ(bank.window().size(), 3u);
	EXPECT_EQ(bank.window().front().frame_index, 3u);
	EXPECT_EQ(bank.reference().frame_index, 0u);
}

TEST(Footprint, CountsEveryStoredEntry) {
	MemoryBank bank(Policy{PolicyKind::efp, 5, 2});
	EXPECT_EQ(footprint_bytes(bank), 0u);
	bank.init_reference(entry_with_similarity(0, 1.0));
	// 2 + 4*3 + 4*1 reals.
	const std::size_t per = (2 + 12 + 4) * 4 + 64;
	EXPECT_EQ(entry_footprint_bytes(bank.reference()), per);
	EXPECT_EQ(footprint_bytes(bank), per);
	for (std::uint64_t i = 1; i <= 9; ++i)
		bank.commit(entry_with_similarity(i, 0.5));
	EXPECT_EQ(footprint_bytes(bank), 6 * per);
}

TEST(Footprint, RatiosAgainstSixFrameBaseline) {
	const std::vector<double> sims(12, 0.5);
	const auto efp = bank_with({PolicyKind::efp, 5, 2}, sims);
	const auto fifo = bank_with({PolicyKind::fifo, 6, 0}, sims);
	EXPECT_DOUBLE_EQ(double(footprint_bytes(efp)) / double(footprint_bytes(fifo)), 6.0 / 7.0);
	EXPECT_EQ(efp.select_active(kQuery).size(), 4u);
	EXPECT_EQ(fifo.select_active(kQuery).size(), 7u);
	EXPECT_NEAR(double(efp.select_active(kQuery).size()) / double(fifo.select_active(kQuery).size()), 0.571, 1e-3);
}
