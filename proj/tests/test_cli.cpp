#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "oracles.hpp"
#include "schema.hpp"
#include "sta/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "trap": {"f0_hz": 3.0e6, "ff_hz": 1.0e6, "tf_s": 20e-9, "mass_amu": 40},
    "protocol": {"kind": "shortcut"},
    "state": {"thermal": {"T_K": 2e-3}}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sta_trapkit_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

sta::cli::CommandOptions options_in(const fs::path& dir, bool assert_mode = true) {
  sta::cli::CommandOptions o;
  o.out_dir = dir;
  o.assert_mode = assert_mode;
  return o;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string issues_text(const json& doc) {
  std::string text;
  for (const auto& i : sta::cli::validate_schema(sta::cli::run_config_schema(), doc)) {
    text += i.path + ": " + i.message + "\n";
  }
  return text;
}

TEST(Schema, AcceptsValidConfig) { EXPECT_EQ(issues_text(base_config()), ""); }

TEST(Schema, EveryRequiredTrapFieldIsReportedByPath) {
  for (const char* key : {"f0_hz", "ff_hz", "tf_s", "mass_amu"}) {
    auto doc = base_config();
    doc["trap"].erase(key);
    EXPECT_NE(issues_text(doc).find(std::string("$.trap.") + key + ": required field is missing"), std::string::npos)
        << key;
    EXPECT_THROW(sta::cli::parse_config(doc), sta::ConfigError);
  }
  auto doc = base_config();
  doc.erase("trap");
  EXPECT_NE(issues_text(doc).find("$.trap: required field is missing"), std::string::npos);
}

TEST(Schema, NestedRequiredFieldsAreReportedByPath) {
  auto doc = base_config();
  doc["state"] = json::parse(R"({"coherent": {"re": 1.0}})");
  EXPECT_NE(issues_text(doc).find("$.state.coherent.im: required field is missing"), std::string::npos);
  doc = base_config();
  doc["sweep"] = json::object();
  EXPECT_NE(issues_text(doc).find("$.sweep.tf_list: required field is missing"), std::string::npos);
  doc = base_config();
  doc["cycle"] = json::object();
  EXPECT_NE(issues_text(doc).find("$.cycle.T_cold_K: required field is missing"), std::string::npos);
  doc = base_config();
  doc["protocol"]["extra_coeffs"] = json::parse(R"([{"value": 1.0}])");
  EXPECT_NE(issues_text(doc).find("$.protocol.extra_coeffs[0].index: required field is missing"), std::string::npos);
}

TEST(Schema, RejectsUnknownKeysTypesAndRanges) {
  auto doc = base_config();
  doc["trap"]["colour"] = "blue";
  doc["protocol"]["kind"] = "teleport";
  doc["trap"]["tf_s"] = -1.0;
  doc["sim"] = json::parse(R"({"ensemble": 1.5})");
  const auto text = issues_text(doc);
  EXPECT_NE(text.find("$.trap.colour: unknown key"), std::string::npos) << text;
  EXPECT_NE(text.find("$.protocol.kind"), std::string::npos) << text;
  EXPECT_NE(text.find("$.trap.tf_s"), std::string::npos) << text;
  EXPECT_NE(text.find("$.sim.ensemble"), std::string::npos) << text;
}

TEST(Config, ParsesDefaultsAndConversions) {
  const auto c = sta::cli::parse_config(base_config());
  EXPECT_EQ(c.kind, sta::ProtocolKind::Shortcut);
  EXPECT_EQ(c.state, sta::cli::StateKind::Thermal);
  EXPECT_DOUBLE_EQ(c.pair().omega0, oracle::two_pi * 3e6);
  EXPECT_DOUBLE_EQ(c.sim.rf_hz, 100e6);
}

TEST(Config, RejectsDuplicateExtraIndices) {
  auto doc = base_config();
  doc["protocol"]["extra_coeffs"] = json::parse(R"([{"index": 6, "value": 1}, {"index": 6, "value": 2}])");
  EXPECT_THROW(sta::cli::parse_config(doc), sta::ConfigError);
}

TEST(Config, MissingFileAndBadJsonAreConfigErrors) {
  const auto dir = scratch("bad_json");
  EXPECT_THROW(sta::cli::load_config(dir / "missing.json"), sta::ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(sta::cli::load_config(dir / "broken.json"), sta::ConfigError);
}

TEST(Csv, RoundTripsBitExactly) {
  const auto dir = scratch("csv");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  sta::cli::CsvTable table{{"a", "b"}, {{}, {}}};
  for (int i = 0; i < 500; ++i) {
    table.columns[0].push_back(u(rng) * std::pow(10.0, 40 * u(rng)));
    table.columns[1].push_back(std::nextafter(u(rng), 2.0));
  }
  table.columns[0].push_back(5e-324);
  table.columns[1].push_back(-0.0);
  sta::cli::write_csv(dir / "t.csv", table);
  const auto back = sta::cli::read_csv(dir / "t.csv");
  ASSERT_EQ(back.header, table.header);
  ASSERT_EQ(back.rows(), table.rows());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < table.rows(); ++r) EXPECT_EQ(back.columns[c][r], table.columns[c][r]);
}

TEST(Design, ShortcutEndpointsAndAntiConfinement) {
  const auto dir = scratch("design");
  const auto c = sta::cli::parse_config(base_config());
  const auto r = sta::cli::cmd_design(c, options_in(dir));
  EXPECT_EQ(r.exit_code, 0);
  const auto w2 = sta::cli::read_csv(dir / "omega_sq.csv");
  ASSERT_EQ(w2.header, (std::vector<std::string>{"t_s", "omega_sq"}));
  const double w0 = std::pow(oracle::two_pi * 3e6, 2), wf = std::pow(oracle::two_pi * 1e6, 2);
  EXPECT_NEAR(w2.columns[1].front() / w0, 1.0, 1e-12);
  EXPECT_NEAR(w2.columns[1].back() / wf, 1.0, 1e-12);
  EXPECT_LT(*std::min_element(w2.columns[1].begin(), w2.columns[1].end()), 0.0);
  const auto b = sta::cli::read_csv(dir / "b.csv");
  EXPECT_EQ(b.header, (std::vector<std::string>{"t_s", "b", "bdot", "bddot"}));
  EXPECT_NEAR(b.columns[1].back(), std::sqrt(3.0), 1e-12);
  EXPECT_EQ(sta::cli::read_csv(dir / "adiabaticity.csv").header,
            (std::vector<std::string>{"t_s", "adiabaticity"}));
  EXPECT_TRUE(read_json(dir / "design_report.json")["anti_confinement"].get<bool>());
}

TEST(Design, LinearSlopeIsConstant) {
  const auto dir = scratch("design_linear");
  auto doc = base_config();
  doc["protocol"]["kind"] = "linear";
  sta::cli::cmd_design(sta::cli::parse_config(doc), options_in(dir));
  const auto w2 = sta::cli::read_csv(dir / "omega_sq.csv");
  const auto& t = w2.columns[0];
  const auto& v = w2.columns[1];
  const double slope = (v.back() - v.front()) / (t.back() - t.front());
  for (std::size_t i = 1; i < v.size(); i += 97) EXPECT_NEAR((v[i] - v[i - 1]) / (t[i] - t[i - 1]) / slope, 1.0, 1e-6);
}

TEST(Design, IsDeterministic) {
  const auto c = sta::cli::parse_config(base_config());
  const auto a = scratch("det_a"), b = scratch("det_b");
  sta::cli::cmd_design(c, options_in(a));
  sta::cli::cmd_design(c, options_in(b));
  for (const char* f : {"omega_sq.csv", "b.csv", "adiabaticity.csv", "design_report.json"}) {
    std::ifstream fa(a / f), fb(b / f);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
}

TEST(Propagate, ThermalShortcutReachesTarget) {
  const auto dir = scratch("propagate_thermal");
  const auto r = sta::cli::cmd_propagate(sta::cli::parse_config(base_config()), options_in(dir));
  EXPECT_EQ(r.exit_code, 0);
  const auto report = read_json(dir / "report.json");
  EXPECT_GE(report["fidelity"].get<double>(), 0.999);
  EXPECT_NEAR(report["effective_temperature_K"].get<double>() / (2e-3 / 3.0), 1.0, 1e-3);
  const auto m = sta::cli::read_csv(dir / "moments.csv");
  EXPECT_EQ(m.header, (std::vector<std::string>{"t_s", "X1", "X2", "X3", "X4", "X5"}));
}

TEST(Propagate, CoherentShortcutReachesTarget) {
  const auto dir = scratch("propagate_coherent");
  auto doc = base_config();
  doc["state"] = json::parse(R"({"coherent": {"re": 1.0, "im": 1.0}})");
  for (double tf : {10e-9, 100e-9, 1e-6}) {
    doc["trap"]["tf_s"] = tf;
    const auto r = sta::cli::cmd_propagate(sta::cli::parse_config(doc), options_in(dir));
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_GE(r.report["fidelity"].get<double>(), 0.999) << tf;
    EXPECT_TRUE(r.report.contains("alpha_final"));
  }
}

TEST(Propagate, ConstantProtocolLeavesStateUnchanged) {
  const auto dir = scratch("propagate_constant");
  auto doc = base_config();
  doc["protocol"]["kind"] = "constant";
  const auto r = sta::cli::cmd_propagate(sta::cli::parse_config(doc), options_in(dir));
  EXPECT_NEAR(r.report["fidelity"].get<double>(), 1.0, 1e-12);
}

TEST(Propagate, AssertFlagsLowFidelity) {
  const auto dir = scratch("propagate_assert");
  auto doc = base_config();
  doc["protocol"]["kind"] = "linear";
  const auto c = sta::cli::parse_config(doc);
  EXPECT_EQ(sta::cli::cmd_propagate(c, options_in(dir, true)).exit_code, sta::cli::kExitPhysics);
  EXPECT_EQ(sta::cli::cmd_propagate(c, options_in(dir, false)).exit_code, sta::cli::kExitOk);
}

TEST(Propagate, MissingStateIsConfigError) {
  auto doc = base_config();
  doc.erase("state");
  EXPECT_THROW(sta::cli::cmd_propagate(sta::cli::parse_config(doc), options_in(scratch("nostate"))),
               sta::ConfigError);
}

TEST(FidelitySweep, OrderingAndRowsAcrossThreads) {
  auto doc = base_config();
  doc["sweep"] = json::parse(R"({"tf_list": [10e-9, 20e-9, 1e-5], "protocols": ["shortcut", "linear", "smooth"]})");
  const auto c = sta::cli::parse_config(doc);
  const auto a = scratch("sweep_a"), b = scratch("sweep_b");
  auto oa = options_in(a);
  auto ob = options_in(b);
  ob.threads = 4;
  EXPECT_EQ(sta::cli::cmd_fidelity_sweep(c, oa).exit_code, 0);
  sta::cli::cmd_fidelity_sweep(c, ob);
  std::ifstream fa(a / "fidelity_vs_tf.csv"), fb(b / "fidelity_vs_tf.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());

  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream lines(sa.str());
  std::getline(lines, line);
  EXPECT_EQ(line, "protocol,tf_s,fidelity,status");
  std::map<std::string, std::map<double, double>> f;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string kind, tf, fid, status;
    std::getline(cells, kind, ',');
    std::getline(cells, tf, ',');
    std::getline(cells, fid, ',');
    std::getline(cells, status);
    EXPECT_EQ(status, "ok");
    f[kind][std::stod(tf)] = std::stod(fid);
  }
  for (const auto& [tf, v] : f["shortcut"]) EXPECT_GE(v, 0.999) << tf;
  EXPECT_LT(f["linear"][20e-9], f["shortcut"][20e-9]);
  EXPECT_LT(f["smooth"][20e-9], f["shortcut"][20e-9]);
  EXPECT_GT(f["linear"][1e-5], 0.999);
  EXPECT_GT(f["smooth"][1e-5], 0.999);
}

TEST(FidelitySweep, RecordsRowFailuresAndContinues) {
  auto doc = base_config();
  // A 10 s ramp needs more than 1e9 steps; that row fails, the others run.
  doc["sweep"] = json::parse(R"({"tf_list": [20e-9, 10.0], "protocols": ["shortcut"]})");
  const auto dir = scratch("sweep_fail");
  const auto r = sta::cli::cmd_fidelity_sweep(sta::cli::parse_config(doc), options_in(dir, false));
  ASSERT_EQ(r.report["rows"].size(), 2u);
  EXPECT_EQ(r.report["rows"][0]["status"], "ok");
  EXPECT_NE(r.report["rows"][1]["status"], "ok");
}

TEST(Optimize, ReportsImprovedDesign) {
  auto doc = base_config();
  doc["optimize"] = json::parse(R"({"n_extra": 1})");
  const auto dir = scratch("optimize");
  const auto r = sta::cli::cmd_optimize(sta::cli::parse_config(doc), options_in(dir));
  EXPECT_EQ(r.exit_code, 0);
  const auto report = read_json(dir / "optimize_report.json");
  EXPECT_NEAR(report["ratio"].get<double>(), 0.78, 0.05);
  EXPECT_TRUE(report["max_slew_above_bound"].get<bool>());
  EXPECT_GE(report["fidelity"].get<double>(), 0.999);
  EXPECT_LT(report["optimized_max_abs_omega_sq"].get<double>(), report["baseline_max_abs_omega_sq"].get<double>());
  EXPECT_TRUE(fs::exists(dir / "omega_sq.csv"));
}

TEST(Optimize, NonConvergenceIsPropagated) {
  auto doc = base_config();
  doc["optimize"] = json::parse(R"({"n_extra": 2, "max_iterations": 1})");
  const auto r = sta::cli::cmd_optimize(sta::cli::parse_config(doc), options_in(scratch("optimize_warn")));
  EXPECT_TRUE(r.report["warning"].get<bool>());
  EXPECT_EQ(r.exit_code, sta::cli::kExitNumerical);
}

TEST(Simulate, ShortWarnsAboutPeriodConstraint) {
  auto doc = base_config();
  doc["trap"]["tf_s"] = 5e-9;
  doc["sim"] = json::parse(R"({"ensemble": 1, "sample_stride": 64})");
  const auto r = sta::cli::cmd_simulate(sta::cli::parse_config(doc), options_in(scratch("sim_short"), false));
  ASSERT_FALSE(r.report["warnings"].empty());
  EXPECT_NE(r.report["warnings"][0].get<std::string>().find("period constraint"), std::string::npos);
}

TEST(Simulate, LostIonExitsWithPhysicsCode) {
  auto doc = base_config();
  doc["sim"] = json::parse(R"({"ensemble": 1, "escape_radius": 1e-9})");
  const auto dir = scratch("sim_lost");
  const auto r = sta::cli::cmd_simulate(sta::cli::parse_config(doc), options_in(dir, false));
  EXPECT_EQ(r.exit_code, sta::cli::kExitPhysics);
  EXPECT_TRUE(read_json(dir / "sim_report.json")["lost"].get<bool>());
  const auto traj = sta::cli::read_csv(dir / "trajectory.csv");
  EXPECT_EQ(traj.header, (std::vector<std::string>{"t", "x", "y", "z", "vx", "vy", "vz"}));
}

TEST(CycleReport, NoTemperatureGapMovesNoHeat) {
  auto doc = base_config();
  doc["cycle"] = json{{"T_cold_K", 2e-3 / 3.0}};
  const auto r = sta::cli::cmd_cycle_report(sta::cli::parse_config(doc), options_in(scratch("cycle_gap")));
  EXPECT_NEAR(r.report["Q_cold_J"].get<double>() / r.report["strokes"][1]["energy_J"].get<double>(), 0.0, 1e-12);
}

TEST(CycleReport, UnitExpansionRatioMovesNoHeat) {
  auto doc = base_config();
  doc["trap"]["ff_hz"] = 3e6;
  doc["cycle"] = json{{"T_cold_K", 2e-3}};
  const auto r = sta::cli::cmd_cycle_report(sta::cli::parse_config(doc), options_in(scratch("cycle_unit")));
  EXPECT_EQ(r.report["Q_cold_J"].get<double>(), 0.0);
  EXPECT_EQ(r.report["Q_hot_J"].get<double>(), 0.0);
  EXPECT_EQ(r.report["work_net_J"].get<double>(), 0.0);
}

TEST(CycleReport, ColdReservoirHeatMatchesDirectEvaluation) {
  auto doc = base_config();
  doc["cycle"] = json{{"T_cold_K", 1e-3}};
  const auto r = sta::cli::cmd_cycle_report(sta::cli::parse_config(doc), options_in(scratch("cycle_derived")));
  const double wf = oracle::two_pi * 1e6;
  const double want = 2.0 * (oracle::thermal_energy(wf, 1e-3) - oracle::thermal_energy(wf, 2e-3 / 3.0));
  EXPECT_GT(want, 0.0);
  EXPECT_NEAR(r.report["Q_cold_J"].get<double>() / want, 1.0, 1e-12);
  EXPECT_NEAR(r.report["T_after_expansion_K"].get<double>(), 2e-3 / 3.0, 1e-18);
  EXPECT_NEAR(r.report["first_law_residual_J"].get<double>() / want, 0.0, 1e-12);
}

TEST(Threads, EnvironmentFallback) {
  ::setenv("STA_TRAPKIT_THREADS", "3", 1);
  EXPECT_EQ(sta::cli::resolve_thread_request(0), 3u);
  EXPECT_EQ(sta::cli::resolve_thread_request(2), 2u);
  ::setenv("STA_TRAPKIT_THREADS", "lots", 1);
  EXPECT_THROW(sta::cli::resolve_thread_request(0), sta::ConfigError);
  ::unsetenv("STA_TRAPKIT_THREADS");
  EXPECT_EQ(sta::cli::resolve_thread_request(0), 0u);
}

// End-to-end runs of the executable.
int run_exe(const std::string& args) {
  const std::string cmd = std::string("\"") + STA_TRAPKIT_EXE + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodes) {
  const auto dir = scratch("exe");
  std::ofstream(dir / "good.json") << base_config().dump();
  auto bad = base_config();
  bad["trap"].erase("mass_amu");
  std::ofstream(dir / "bad.json") << bad.dump();
  auto linear = base_config();
  linear["protocol"]["kind"] = "linear";
  std::ofstream(dir / "linear.json") << linear.dump();
  auto lost = base_config();
  lost["sim"] = json::parse(R"({"ensemble": 1, "escape_radius": 1e-9})");
  std::ofstream(dir / "lost.json") << lost.dump();

  const std::string out = " --out \"" + (dir / "out").string() + "\"";
  EXPECT_EQ(run_exe("propagate --config \"" + (dir / "good.json").string() + "\" --assert" + out), 0);
  EXPECT_EQ(run_exe("propagate --config \"" + (dir / "bad.json").string() + "\"" + out), 2);
  EXPECT_EQ(run_exe("propagate --config \"" + (dir / "linear.json").string() + "\" --assert" + out), 3);
  EXPECT_EQ(run_exe("simulate --config \"" + (dir / "lost.json").string() + "\"" + out), 3);
  EXPECT_EQ(run_exe("teleport --config \"" + (dir / "good.json").string() + "\""), 2);
  EXPECT_EQ(run_exe("design"), 2);
  EXPECT_EQ(run_exe("design --config \"" + (dir / "good.json").string() + "\" --dt-scale -1" + out), 2);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
}

}  // namespace
