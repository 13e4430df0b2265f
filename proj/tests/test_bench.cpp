#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "vosmem/bench.hpp"

using namespace vosmem;
using namespace vosmem::bench;
namespace fs = std::filesystem;

namespace {

ScenarioConfig short_scenario() {
	auto c = builtin_redundant();
	c.phases = {{Phase::Kind::static_scene, 20}, {Phase::Kind::drift, 10, 0.5}, {Phase::Kind::static_scene, 10}};
	c.frame_count = 40;
	return c;
}

RunConfig short_run(std::vector<Policy> policies, std::vector<std::uint64_t> seeds = {0}) {
	RunConfig cfg;
	cfg.scenario = short_scenario();
	cfg.scenario_source = "test:short";
	cfg.policies = std::move(policies);
	cfg.seeds = std::move(seeds);
	return cfg;
}

fs::path scratch(const std::string& name) {
	const auto p = fs::temp_directory_path() / ("vosmem_bench_" + name);
	fs::remove_all(p);
	return p;
}

std::string slurp(const fs::path& p) {
	std::ifstream in(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const Policy kFifo6{PolicyKind::fifo, 6, 0};
const Policy kEfp52{PolicyKind::efp, 5, 2};

} // namespace

TEST(Cli, TwoPolicies) {
	const auto cfg = cli_parse({"--policy", "efp:5:2", "--policy", "fifo:6:0", "--prompt", "mask"});
	ASSERT_EQ(cfg.policies.size(), 2u);
	EXPECT_EQ(cfg.policies[0].label(), "efp:5:2");
	EXPECT_EQ(cfg.policies[1].label(), "fifo:6:0");
	EXPECT_EQ(cfg.prompt.kind, Prompt::Kind::full_mask);
	EXPECT_TRUE(cfg.scenario.has_value());
	EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
}

TEST(Cli, Defaults) {
	const auto cfg = cli_parse({});
	ASSERT_EQ(cfg.policies.size(), 2u);
	EXPECT_EQ(cfg.policies[0].label(), "fifo:6:0");
	EXPECT_EQ(cfg.policies[1].label(), "efp:5:2");
	EXPECT_EQ(cfg.params.patch, 8);
	EXPECT_EQ(cfg.params.dim, 64);
	EXPECT_EQ(cfg.params.affinity, Affinity::l2);
	EXPECT_TRUE(cfg.write_json);
	EXPECT_TRUE(cfg.write_csv);
	EXPECT_EQ(cfg.scenario_source, "builtin:redundant");
}

TEST(Cli, FivePointPrompt) {
	const auto cfg = cli_parse({"--prompt", "points:5"});
	EXPECT_EQ(cfg.prompt.kind, Prompt::Kind::points);
	EXPECT_EQ(cfg.prompt.points_per_object, 5);
}

TEST(Cli, InvalidPolicyOrder) {
	try {
		cli_parse({"--policy", "efp:2:5"});
		FAIL();
	} catch (const UsageError& e) {
		EXPECT_NE(std::string(e.what()).find("m must be < n"), std::string::npos) << e.what();
		EXPECT_NE(std::string(e.what()).find("--policy"), std::string::npos);
	}
}

TEST(Cli, ErrorsNameTheFlag) {
	const std::vector<std::pair<std::vector<std::string>, std::string>> cases{
		{{"--policy", "efp:5"}, "--policy"},
		{{"--policy", "lru:5:2"}, "--policy"},
		{{"--prompt", "points:0"}, "--prompt"},
		{{"--seeds", "4..1"}, "--seeds"},
		{{"--scenario", "builtin:nope"}, "--scenario"},
		{{"--patch", "12"}, "--patch"},
		{{"--dim", "4"}, "--dim"},
		{{"--affinity", "cos"}, "--affinity"},
		{{"--format", "xml"}, "--format"},
		{{"--threshold", "1.5"}, "--threshold"},
		{{"--bogus"}, "--bogus"},
	};
	for (const auto& [args, flag] : cases) {
		try {
			cli_parse(args);
			ADD_FAILURE() << flag << " accepted";
		} catch (const UsageError& e) {
			EXPECT_NE(std::string(e.what()).find(flag), std::string::npos) << e.what();
			EXPECT_FALSE(e.usage().empty());
		}
	}
}

TEST(Cli, HelpIsUsageWithoutMessage) {
	try {
		cli_parse({"--help"});
		FAIL();
	} catch (const UsageError& e) {
		EXPECT_STREQ(e.what(), "");
		EXPECT_NE(e.usage().find("--policy"), std::string::npos);
	}
}

TEST(Cli, SeedLists) {
	EXPECT_EQ(parse_seeds("3"), (std::vector<std::uint64_t>{3}));
	EXPECT_EQ(parse_seeds("0..4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
	EXPECT_EQ(parse_seeds("7,2,9"), (std::vector<std::uint64_t>{7, 2, 9}));
	EXPECT_THROW(parse_seeds(""), Error);
	EXPECT_THROW(parse_seeds("1,,2"), Error);
	EXPECT_THROW(parse_seeds("-1"), Error);
}

TEST(Cli, ScenarioFile) {
	const auto dir = scratch("scenario_file");
	fs::create_directories(dir);
	std::ofstream(dir / "s.json") << to_json(short_scenario()).dump();
	const auto cfg = cli_parse({"--scenario", (dir / "s.json").string(), "--seeds", "1..2"});
	ASSERT_TRUE(cfg.scenario.has_value());
	EXPECT_EQ(cfg.scenario->frame_count, 40);
	EXPECT_EQ(cfg.seeds.size(), 2u);
	std::ofstream(dir / "bad.json") << "{";
	EXPECT_THROW(cli_parse({"--scenario", (dir / "bad.json").string()}), UsageError);
	fs::remove_all(dir);
}

TEST(Report, CsvHeaderExact) {
	EXPECT_STREQ(kCsvHeader,
				 "policy,seed,J,F,JF,Dice,CIoU,fps_total,fps_readout,footprint_bytes,stored_entries,attended_entries");
	EvalReport empty;
	EXPECT_EQ(to_csv(empty), std::string(kCsvHeader) + "\n");
}

TEST(Report, TwoPoliciesOneSeedShape) {
	const auto rep = run(short_run({kFifo6, kEfp52}));
	ASSERT_FALSE(rep.partial) << rep.error;
	ASSERT_EQ(rep.runs.size(), 2u);
	ASSERT_EQ(rep.deltas.size(), 1u);
	EXPECT_EQ(rep.deltas[0].policy, "efp:5:2");
	EXPECT_EQ(rep.deltas[0].baseline, "fifo:6:0");
	EXPECT_EQ(rep.runs[0].attended_entries, 7u);
	EXPECT_EQ(rep.runs[1].attended_entries, 4u);
	EXPECT_EQ(rep.runs[0].stored_entries, 7u);
	EXPECT_EQ(rep.runs[1].stored_entries, 6u);
	EXPECT_NEAR(rep.deltas[0].attended_ratio, 4.0 / 7.0, 1e-12);
	EXPECT_NEAR(rep.deltas[0].stored_ratio, 6.0 / 7.0, 1e-12);
	EXPECT_NEAR(rep.deltas[0].footprint_ratio, 6.0 / 7.0, 1e-12);
	EXPECT_NEAR(rep.deltas[0].d_jf, rep.runs[1].score.jf - rep.runs[0].score.jf, 1e-15);

	const std::string csv = to_csv(rep);
	std::vector<std::string> lines;
	std::istringstream is(csv);
	for (std::string l; std::getline(is, l);)
		lines.push_back(l);
	ASSERT_EQ(lines.size(), 4u);
	EXPECT_EQ(lines[0], kCsvHeader);
	EXPECT_EQ(lines[1].rfind("fifo:6:0,0,", 0), 0u);
	EXPECT_EQ(lines[2].rfind("efp:5:2,0,", 0), 0u);
	EXPECT_EQ(lines[3].rfind("delta:efp:5:2-fifo:6:0,all,", 0), 0u);
	for (const auto& l : lines)
		EXPECT_EQ(std::count(l.begin(), l.end(), ','), 11) << l;
}

TEST(Report, ZeroPruneEfpMatchesFifoScores) {
	const auto rep = run(short_run({kFifo6, Policy{PolicyKind::efp, 6, 0}}, {0, 1}));
	ASSERT_FALSE(rep.partial) << rep.error;
	ASSERT_EQ(rep.runs.size(), 4u);
	for (int s = 0; s < 2; ++s) {
		const auto& a = rep.runs[s].score;
		const auto& b = rep.runs[2 + s].score;
		EXPECT_EQ(a.j, b.j);
		EXPECT_EQ(a.f, b.f);
		EXPECT_EQ(a.jf, b.jf);
		EXPECT_EQ(a.dice, b.dice);
		EXPECT_EQ(rep.runs[s].mask_digest, rep.runs[2 + s].mask_digest);
	}
	EXPECT_EQ(rep.deltas[0].d_jf, 0.0);
}

TEST(Report, JsonRoundTrip) {
	const auto rep = run(short_run({kFifo6, kEfp52}));
	const auto j = to_json(rep);
	const auto parsed = nlohmann::json::parse(j.dump(2));
	EXPECT_EQ(parsed, j);
	EXPECT_EQ(to_json(report_from_json(parsed)), j);
	for (const char* key : {"tool", "version", "timestamp", "partial", "error", "scenario", "params", "runs", "deltas",
							"context"})
		EXPECT_TRUE(j.contains(key)) << key;
	EXPECT_EQ(j["runs"][1]["decisions"].size(), 39u);
	EXPECT_EQ(j["runs"][1]["decisions"][10]["pruned"].size(), 2u);
	EXPECT_TRUE(j["deltas"][0].contains("theoretical_readout_speedup"));
	EXPECT_THROW(report_from_json(nlohmann::json::object()), Error);
}

TEST(Report, DeterministicAcrossRuns) {
	auto cfg = short_run({kFifo6, kEfp52, Policy{PolicyKind::random, 5, 2}}, {0, 3});
	const auto a = run(cfg), b = run(cfg);
	EXPECT_EQ(strip_timing(to_json(a)).dump(), strip_timing(to_json(b)).dump());
	for (std::size_t i = 0; i < a.runs.size(); ++i)
		EXPECT_EQ(a.runs[i].mask_digest, b.runs[i].mask_digest);
	const auto s = strip_timing(to_json(a));
	EXPECT_FALSE(s.contains("timestamp"));
	EXPECT_FALSE(s["runs"][0].contains("fps_total"));
}

TEST(Report, EmitWritesFiles) {
	auto cfg = short_run({kFifo6, kEfp52});
	cfg.out = scratch("emit");
	cfg.save_masks = true;
	cfg.visualize = true;
	cfg.export_sequences = true;
	const auto rep = run(cfg);
	emit(rep, cfg);
	EXPECT_EQ(slurp(cfg.out / "report.csv"), to_csv(rep));
	EXPECT_EQ(nlohmann::json::parse(slurp(cfg.out / "report.json")), to_json(rep));
	EXPECT_TRUE(fs::exists(cfg.out / "masks" / "efp_5_2" / "seed_0" / "00039.pgm"));
	EXPECT_TRUE(fs::exists(cfg.out / "visualize" / "fifo_6_0" / "seed_0" / "00000.pgm"));
	// Exported sequences reload and reproduce the same scores.
	RunConfig loaded = cfg;
	loaded.scenario.reset();
	loaded.load_dir = cfg.out / "sequences" / "seed_0";
	loaded.save_masks = loaded.visualize = loaded.export_sequences = false;
	const auto rep2 = run(loaded);
	ASSERT_FALSE(rep2.partial) << rep2.error;
	EXPECT_EQ(rep2.runs[1].score, rep.runs[1].score);
	EXPECT_FALSE(rep2.scenario_hash.has_value());
	fs::remove_all(cfg.out);
}

TEST(Report, PartialOnFailure) {
	auto cfg = short_run({kFifo6});
	cfg.scenario.reset();
	cfg.load_dir = scratch("missing");
	const auto rep = run(cfg);
	EXPECT_TRUE(rep.partial);
	EXPECT_NE(rep.error.find("meta.json"), std::string::npos) << rep.error;
	EXPECT_TRUE(to_json(rep)["partial"].get<bool>());
}

TEST(Report, PointPromptRuns) {
	auto cfg = short_run({kEfp52});
	cfg.prompt = {Prompt::Kind::points, 5};
	const auto rep = run(cfg);
	ASSERT_FALSE(rep.partial) << rep.error;
	EXPECT_GT(rep.runs[0].score.jf, 0.3);
	const auto pts = points_from_mask(generate(short_scenario()).masks[0], 5);
	EXPECT_EQ(pts.size(), 10u);
}

TEST(Report, ConfigValidation) {
	RunConfig cfg;
	EXPECT_THROW(cfg.validate(), Error);
	cfg = short_run({kFifo6, kFifo6});
	EXPECT_THROW(cfg.validate(), Error);
	cfg = short_run({kFifo6});
	cfg.load_dir = "x";
	EXPECT_THROW(cfg.validate(), Error);
}
