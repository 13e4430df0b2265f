#pragma once

#include <cstdint>

namespace vosmem {

/// splitmix64 generator. Streams are derived as `seed ^ stream_id`, so any
/// implementation reproduces the same sequence for the same (seed, stream).
class SplitMix64 {
  public:
	explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

	static constexpr SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id) noexcept {
		return SplitMix64(seed ^ stream_id);
	}

	constexpr std::uint64_t next() noexcept {
		std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
		z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
		z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
		return z ^ (z >> 31);
	}

	/// Uniform integer in [0, bound). Uses the multiply-shift reduction, which
	/// is exact integer arithmetic and therefore portable.
	constexpr std::uint64_t below(std::uint64_t bound) noexcept {
		return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
	}

	/// Uniform integer in [lo, hi].
	constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
		return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
	}

  private:
	std::uint64_t state_;
};

/// Stateless mix of a key, for per-pixel textures that must not depend on
/// draw order.
constexpr std::uint64_t mix64(std::uint64_t key) noexcept {
	return SplitMix64(key).next();
}

} // namespace vosmem
