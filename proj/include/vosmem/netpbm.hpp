#pragma once

// Binary PPM (P6) frames and PGM (P5) label maps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vosmem/embedding.hpp"
#include "vosmem/error.hpp"
#include "vosmem/propagator.hpp"

namespace vosmem::netpbm {

namespace detail {

struct Header {
	int width = 0;
	int height = 0;
	int maxval = 0;
	std::size_t data_offset = 0;
};

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw Error("cannot open " + path.generic_string());
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Header parse_header(const std::vector<std::uint8_t>& buf, char kind, const std::filesystem::path& path) {
	auto fail = [&](const std::string& why) { return Error(path.generic_string() + ": " + why); };
	if (buf.size() < 2 || buf[0] != 'P' || buf[1] != kind)
		throw fail(std::string("expected magic P") + kind);
	std::size_t pos = 2;
	auto skip_space = [&] {
		while (pos < buf.size()) {
			if (buf[pos] == '#') {
				while (pos < buf.size() && buf[pos] != '\n')
					++pos;
			} else if (std::isspace(buf[pos])) {
				++pos;
			} else {
				break;
			}
		}
	};
	auto read_int = [&](const char* what) {
		skip_space();
		if (pos >= buf.size() || !std::isdigit(buf[pos]))
			throw fail(std::string("malformed header: missing ") + what);
		long v = 0;
		while (pos < buf.size() && std::isdigit(buf[pos])) {
			v = v * 10 + (buf[pos++] - '0');
			if (v > 1 << 20)
				throw fail(std::string("malformed header: ") + what + " too large");
		}
		return static_cast<int>(v);
	};
	Header h;
	h.width = read_int("width");
	h.height = read_int("height");
	h.maxval = read_int("maxval");
	if (pos >= buf.size() || !std::isspace(buf[pos]))
		throw fail("malformed header: no whitespace after maxval");
	h.data_offset = pos + 1;
	if (h.width <= 0 || h.height <= 0)
		throw fail("malformed header: non-positive dimensions");
	if (h.maxval != 255)
		throw fail("unsupported maxval " + std::to_string(h.maxval) + " (only 255)");
	return h;
}

inline void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<std::uint8_t>& data) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw Error("cannot write " + path.generic_string());
	out.write(header.data(), static_cast<std::streamsize>(header.size()));
	out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
	if (!out)
		throw Error("write failed: " + path.generic_string());
}

} // namespace detail

inline void write_ppm(const std::filesystem::path& path, const FrameImage& frame) {
	detail::write_file(path, "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n",
					   frame.pixels);
}

inline FrameImage read_ppm(const std::filesystem::path& path, std::uint64_t index = 0) {
	const auto buf = detail::read_all(path);
	const auto h = detail::parse_header(buf, '6', path);
	const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
	if (buf.size() - h.data_offset != n)
		throw Error(path.generic_string() + ": expected " + std::to_string(n) + " pixel bytes, found " +
					std::to_string(buf.size() - h.data_offset));
	FrameImage f;
	f.index = index;
	f.width = h.width;
	f.height = h.height;
	f.pixels.assign(buf.begin() + static_cast<std::ptrdiff_t>(h.data_offset), buf.end());
	return f;
}

/// Raw labels; pass `scale` > 1 to write a human-viewable preview.
inline void write_pgm(const std::filesystem::path& path, const ObjectMaskMap& mask, int scale = 1) {
	std::vector<std::uint8_t> data = mask.labels;
	if (scale != 1)
		for (auto& v : data)
			v = static_cast<std::uint8_t>(std::min(255, v * scale));
	detail::write_file(path, "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n", data);
}

inline ObjectMaskMap read_pgm(const std::filesystem::path& path) {
	const auto buf = detail::read_all(path);
	const auto h = detail::parse_header(buf, '5', path);
	const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
	if (buf.size() - h.data_offset != n)
		throw Error(path.generic_string() + ": expected " + std::to_string(n) + " pixel bytes, found " +
					std::to_string(buf.size() - h.data_offset));
	ObjectMaskMap m;
	m.width = h.width;
	m.height = h.height;
	m.labels.assign(buf.begin() + static_cast<std::ptrdiff_t>(h.data_offset), buf.end());
	return m;
}

} // namespace vosmem::netpbm
