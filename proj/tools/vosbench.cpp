#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "vosmem/bench.hpp"

int main(int argc, char** argv) {
	using namespace vosmem::bench;
	RunConfig cfg;
	try {
		cfg = cli_parse(std::vector<std::string>(argv + 1, argv + argc));
	} catch (const UsageError& e) {
		if (std::string(e.what()).empty()) {
			std::cout << e.usage();
			return 0;
		}
		std::cerr << "error: " << e.what() << "\n\n" << e.usage();
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	}

	EvalReport report;
	try {
		report = run(cfg);
		emit(report, cfg);
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}

	std::printf("%-22s %6s %9s %9s %9s %9s %9s %11s %11s %9s %9s\n", "policy", "seed", "J", "F", "J&F", "Dice", "CIoU",
				"fps_total", "fps_readout", "stored", "attended");
	for (const auto& r : report.runs)
		std::printf("%-22s %6llu %9.4f %9.4f %9.4f %9.4f %9.4f %11.1f %11.1f %9zu %9zu\n", r.policy.c_str(),
					static_cast<unsigned long long>(r.seed), r.score.j, r.score.f, r.score.jf, r.score.dice,
					r.score.ciou, r.fps.fps_total, r.fps.fps_readout, r.stored_entries, r.attended_entries);
	for (const auto& d : report.deltas)
		std::printf("delta %s vs %s: dJ&F %+.4f  dDice %+.4f  fps_readout x%.3f  attended x%.6f  stored x%.6f\n",
					d.policy.c_str(), d.baseline.c_str(), d.d_jf, d.d_dice, d.fps_readout_ratio, d.attended_ratio,
					d.stored_ratio);
	if (report.partial) {
		std::cerr << "error: " << report.error << " (partial report written)\n";
		return 1;
	}
	std::printf("report written to %s\n", cfg.out.generic_string().c_str());
	return 0;
}
