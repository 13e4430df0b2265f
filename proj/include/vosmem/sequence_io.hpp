#pragma once

// On-disk sequence layout:
//   <dir>/frames/00000.ppm ...   binary P6
//   <dir>/masks/00000.pgm  ...   binary P5, pixel value = object id
//   <dir>/meta.json              {width, height, k, frame_count, seed, phases}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "vosmem/error.hpp"
#include "vosmem/netpbm.hpp"
#include "vosmem/scenario.hpp"

#include <json.hpp>

namespace vosmem {

inline std::string frame_stem(std::size_t i) {
	char buf[24];
	std::snprintf(buf, sizeof buf, "%05zu", i);
	return buf;
}

inline void save_sequence(const Sequence& seq, const std::filesystem::path& dir) {
	namespace fs = std::filesystem;
	if (seq.frames.size() != seq.masks.size())
		throw Error("sequence has " + std::to_string(seq.frames.size()) + " frames but " +
					std::to_string(seq.masks.size()) + " masks");
	if (seq.frames.empty())
		throw Error("cannot save an empty sequence");
	std::error_code ec;
	fs::create_directories(dir / "frames", ec);
	fs::create_directories(dir / "masks", ec);
	if (ec)
		throw Error("cannot create " + dir.generic_string() + ": " + ec.message());
	for (std::size_t i = 0; i < seq.frames.size(); ++i) {
		netpbm::write_ppm(dir / "frames" / (frame_stem(i) + ".ppm"), seq.frames[i]);
		netpbm::write_pgm(dir / "masks" / (frame_stem(i) + ".pgm"), seq.masks[i]);
	}
	const nlohmann::json meta{{"width", seq.frames[0].width},	  {"height", seq.frames[0].height},
							  {"k", seq.num_objects},			  {"frame_count", seq.frames.size()},
							  {"seed", seq.seed},				  {"phases", seq.phases}};
	std::ofstream out(dir / "meta.json", std::ios::trunc);
	if (!out)
		throw Error("cannot write " + (dir / "meta.json").generic_string());
	out << meta.dump(2) << "\n";
}

inline Sequence load_sequence(const std::filesystem::path& dir) {
	namespace fs = std::filesystem;
	const auto meta_path = dir / "meta.json";
	std::ifstream in(meta_path);
	if (!in)
		throw Error("cannot open " + meta_path.generic_string());
	nlohmann::json meta;
	Sequence seq;
	std::size_t count = 0;
	int width = 0, height = 0;
	try {
		in >> meta;
		width = meta.at("width").get<int>();
		height = meta.at("height").get<int>();
		seq.num_objects = meta.at("k").get<int>();
		count = meta.at("frame_count").get<std::size_t>();
		seq.seed = meta.value("seed", std::uint64_t{0});
		seq.phases = meta.value("phases", nlohmann::json::array());
	} catch (const nlohmann::json::exception& e) {
		throw Error(meta_path.generic_string() + ": " + e.what());
	}
	if (count == 0)
		throw Error(meta_path.generic_string() + ": frame_count must be >= 1");
	if (seq.num_objects < 1 || seq.num_objects > 255)
		throw Error(meta_path.generic_string() + ": k must lie in [1, 255]");

	auto count_files = [&](const fs::path& sub, const char* ext) {
		std::size_t n = 0;
		std::error_code ec;
		for (const auto& e : fs::directory_iterator(dir / sub, ec))
			if (e.path().extension() == ext)
				++n;
		return n;
	};
	seq.frames.reserve(count);
	seq.masks.reserve(count);
	for (std::size_t i = 0; i < count; ++i) {
		const auto fpath = dir / "frames" / (frame_stem(i) + ".ppm");
		const auto mpath = dir / "masks" / (frame_stem(i) + ".pgm");
		if (!fs::exists(fpath))
			throw Error("missing frame " + fpath.generic_string());
		if (!fs::exists(mpath))
			throw Error("missing mask " + mpath.generic_string());
		FrameImage f = netpbm::read_ppm(fpath, i);
		ObjectMaskMap m = netpbm::read_pgm(mpath);
		if (f.width != width || f.height != height)
			throw Error(fpath.generic_string() + ": dimensions differ from meta.json");
		if (m.width != width || m.height != height)
			throw Error(mpath.generic_string() + ": dimensions differ from meta.json");
		if (m.max_label() > seq.num_objects)
			throw Error(mpath.generic_string() + ": object id " + std::to_string(m.max_label()) + " exceeds k = " +
						std::to_string(seq.num_objects));
		seq.frames.push_back(std::move(f));
		seq.masks.push_back(std::move(m));
	}
	const std::size_t nframes = count_files("frames", ".ppm");
	const std::size_t nmasks = count_files("masks", ".pgm");
	if (nframes != nmasks)
		throw Error(dir.generic_string() + ": count mismatch, " + std::to_string(nframes) + " frames vs " +
					std::to_string(nmasks) + " masks");
	if (nframes != count)
		throw Error(dir.generic_string() + ": count mismatch, meta.json declares " + std::to_string(count) +
					" frames, found " + std::to_string(nframes));
	return seq;
}

} // namespace vosmem
