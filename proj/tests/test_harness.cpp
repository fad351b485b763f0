#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "pfc/harness/csv.hpp"
#include "pfc/harness/sweep.hpp"

using namespace pfc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig bundled(const std::string& name, const std::vector<std::pair<std::string, std::string>>& ov = {}) {
    return parse_config(slurp(fs::path(PFC_SOURCE_DIR) / "configs" / name), ov);
}

// A 9-bin table keeps CARE arms cheap.
ExperimentConfig small_linear() {
    auto c = default_config(Scenario::LinearOfdm);
    c.controller.m_r = 1;
    c.controller.m_theta = 2;
    c.horizon = 30;
    c.trials = 4;
    return c;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("pfc_harness_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

void expect_same(const TrialRecord& a, const TrialRecord& b) {
    ASSERT_EQ(a.slots.size(), b.slots.size());
    EXPECT_EQ(a.diverged, b.diverged);
    for (std::size_t k = 0; k < a.slots.size(); ++k) {
        EXPECT_EQ(a.slots[k].state_energy, b.slots[k].state_energy);
        EXPECT_EQ(a.slots[k].stage_cost, b.slots[k].stage_cost);
        EXPECT_EQ(a.slots[k].chan_err_sq, b.slots[k].chan_err_sq);
        EXPECT_EQ(a.slots[k].chan_pow_sq, b.slots[k].chan_pow_sq);
        EXPECT_EQ(a.slots[k].pilot_pow, b.slots[k].pilot_pow);
        EXPECT_EQ(a.received[k], b.received[k]);
    }
}

std::string error_of(std::string_view text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PFCSIM_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

// ---- configuration ----

TEST(Config, EmptyTextGivesDefaults) {
    EXPECT_EQ(dump_config(parse_config("")), dump_config(default_config(Scenario::LinearOfdm)));
    EXPECT_EQ(dump_config(parse_config("# only a comment\n\n")), dump_config(default_config(Scenario::LinearOfdm)));
}

TEST(Config, BundledLinearMatchesReferencePlant) {
    const auto c = bundled("linear-ofdm.cfg");
    const auto ref = reference_linear_plant();
    EXPECT_EQ(c.plant.A, ref.A);
    EXPECT_EQ(c.plant.B, ref.B);
    EXPECT_EQ(c.plant.W, Mat::Identity(4, 4));
    EXPECT_EQ(c.alpha, 0.95);
    EXPECT_EQ(c.sigma_v2, default_config(Scenario::LinearOfdm).sigma_v2);
    EXPECT_EQ(c.arms.size(), 7u);
    EXPECT_EQ(c.snr_db, (std::vector<double>{0, 5, 10, 15, 20}));
}

TEST(Config, BundledNonlinearParses) {
    const auto c = bundled("nonlinear-mimo.cfg");
    EXPECT_EQ(c.scenario, Scenario::NonlinearMimo);
    EXPECT_EQ(c.n_rx, 4);
    EXPECT_EQ(c.n_tx, 3);
    EXPECT_EQ(c.primary_arm().predictor, PredictorKind::Ekf);
}

TEST(Config, DumpRoundTrips) {
    for (auto s : {Scenario::LinearOfdm, Scenario::NonlinearMimo}) {
        auto c = default_config(s);
        c.seed = 77;
        c.controller.sa = true;
        c.alpha = 0.9;
        const auto text = dump_config(c);
        EXPECT_EQ(dump_config(parse_config(text)), text);
    }
}

TEST(Config, AlphaOutsideUnitDiskRejected) {
    const auto msg = error_of("channel.alpha = 1.5\n");
    EXPECT_NE(msg.find("|alpha| <= 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(Config, UnknownDuplicateAndMalformedLinesCarryLineNumbers) {
    auto msg = error_of("seed = 1\n\nfoo.bar = 2\n");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("foo.bar"), std::string::npos) << msg;
    msg = error_of("seed = 1\nseed = 2\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
    msg = error_of("trials = 3\nhorizon\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    msg = error_of("trials = three\n");
    EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(Config, ScenarioMismatchesRejected) {
    EXPECT_NE(error_of("predictor = ekf\n").find("nonlinear-mimo"), std::string::npos);
    EXPECT_NE(error_of("sweep.arms = ukf:care\n"), "");
    EXPECT_NE(error_of("scenario = nonlinear-mimo\ncontroller = care\n").find("care"), std::string::npos);
    EXPECT_NE(error_of("scenario = nonlinear-mimo\npredictor = kf\n"), "");
    EXPECT_NE(error_of("pipeline = full\nlink.l_cp = 2\n"), "");
    EXPECT_NE(error_of("link.perm = 0 0 1 2\n"), "");
    EXPECT_NE(error_of("link.n_sub = 3\n"), "");  // B still has 4 columns
}

TEST(Config, OverridesReplaceFileValues) {
    const auto c = parse_config("seed = 3\ntrials = 9\n", {{"seed", "11"}, {"controller.m_r", "1"}});
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.trials, 9);
    EXPECT_EQ(c.controller.m_r, 1);
    EXPECT_THROW(parse_config("", {{"nope", "1"}}), ConfigError);
}

// ---- single trials ----

TEST(Trial, NoDisturbanceNoNoiseZeroStateStaysZero) {
    auto c = default_config(Scenario::LinearOfdm);
    c.plant.W = Mat::Zero(4, 4);
    c.plant.sigma_x2 = 0.0;
    c.horizon = 40;
    for (auto ctrl : {ControllerKind::Pid, ControllerKind::Lqr}) {
        const Arm arm{PredictorKind::Kf, ctrl};
        const auto res = build_resources(c, {arm});
        const auto r = run_trial(c, arm, res, {0, 0.0, 0.0, 5, {}});
        ASSERT_EQ(r.slots.size(), 40u);
        for (std::size_t k = 0; k < r.slots.size(); ++k) {
            EXPECT_EQ(r.slots[k].state_energy, 0.0);
            EXPECT_EQ(r.slots[k].stage_cost, 0.0);
            EXPECT_EQ(r.received[k].norm(), 0.0);
        }
    }
}

TEST(Trial, SameSeedReproducesBitForBit) {
    const auto c = small_linear();
    for (const auto& arm : {Arm{PredictorKind::Kf, ControllerKind::Care}, Arm{PredictorKind::PilotLs, ControllerKind::Care},
                            Arm{PredictorKind::BlindSvd, ControllerKind::Lqr}}) {
        const auto res = build_resources(c, {arm});
        expect_same(run_trial(c, arm, res, {2, 0.1, 10.0, 9, {}}), run_trial(c, arm, res, {2, 0.1, 10.0, 9, {}}));
    }
}

TEST(Trial, DifferentTrialIndicesDiffer) {
    const auto c = small_linear();
    const Arm arm{PredictorKind::Kf, ControllerKind::Care};
    const auto res = build_resources(c, {arm});
    const auto a = run_trial(c, arm, res, {0, 0.1, 10.0, 9, {}});
    const auto b = run_trial(c, arm, res, {1, 0.1, 10.0, 9, {}});
    EXPECT_NE(a.slots[3].state_energy, b.slots[3].state_energy);
}

TEST(Trial, FullAndEffectivePipelinesAgree) {
    auto c = small_linear();
    c.horizon = 50;
    const Arm arm{PredictorKind::Kf, ControllerKind::Care};
    const auto res = build_resources(c, {arm});
    auto full = c;
    full.pipeline = Pipeline::Full;
    for (std::size_t t = 0; t < 3; ++t) {
        const auto a = run_trial(c, arm, res, {t, 0.2, 0.0, 21, {}});
        const auto b = run_trial(full, arm, res, {t, 0.2, 0.0, 21, {}});
        ASSERT_EQ(a.received.size(), b.received.size());
        for (std::size_t k = 0; k < a.received.size(); ++k)
            EXPECT_LE((a.received[k] - b.received[k]).norm(), 1e-10 * std::max(1.0, a.received[k].norm()))
                << "trial " << t << " slot " << k;
    }
}

TEST(Trial, UnstableOpenLoopIsFlaggedDiverged) {
    auto c = default_config(Scenario::LinearOfdm);
    c.plant.A = 10.0 * Mat::Identity(4, 4);
    c.controller.pid = {0.0, 0.0, 0.0, 1.0};
    c.horizon = 100;
    const Arm arm{PredictorKind::Kf, ControllerKind::Pid};
    const auto r = run_trial(c, arm, {}, {0, 0.1, 0.0, 1, {}});
    EXPECT_TRUE(r.diverged);
    EXPECT_LT(r.slots.size(), 20u);
    const auto row = summarize({r}, arm, 0.0);
    EXPECT_EQ(row.diverged_rate, 1.0);
    EXPECT_TRUE(std::isnan(row.energy_mean));
}

TEST(Trial, NonlinearScenarioRunsEveryArm) {
    auto c = bundled("nonlinear-mimo.cfg", {{"horizon", "15"}});
    const auto res = build_resources(c, c.arms);
    for (const auto& arm : c.arms) {
        const auto r = run_trial(c, arm, res, {0, 0.05, 0.0, 3, {}});
        EXPECT_EQ(r.slots.size(), 15u) << arm.label();
        EXPECT_FALSE(r.diverged) << arm.label();
        EXPECT_EQ(r.received[0].size(), 4) << arm.label();
    }
}

TEST(Trial, OnlineLearnerStartsFromStateWeight) {
    auto c = small_linear();
    c.controller.sa = true;
    c.horizon = 1;
    const Arm arm{PredictorKind::Kf, ControllerKind::Care};
    const auto res = build_resources(c, {arm});
    std::vector<long> visits;
    std::vector<Mat> kernels;
    run_trial(c, arm, res, {0, 0.1, 0.0, 2, [&](long, const Controller& ctl) {
                                const auto* learner = dynamic_cast<const detail::CareController&>(ctl).learner();
                                ASSERT_NE(learner, nullptr);
                                visits = learner->visits();
                                kernels = learner->table().kernels;
                            }});
    ASSERT_EQ(visits.size(), res.table->size());
    std::size_t touched = 0;
    for (std::size_t l = 0; l < visits.size(); ++l) {
        if (visits[l] == 0) {
            EXPECT_EQ(kernels[l], c.plant.Q);
            continue;
        }
        ++touched;
        // First visit uses step 1: the kernel jumps to the Riccati map of Q.
        const Mat expect = care_riccati_rhs(c.plant, res.table->modes.h_hat(l), c.plant.Q, res.table->sigma_bar);
        EXPECT_LT((kernels[l] - expect).norm(), 1e-12);
    }
    EXPECT_EQ(touched, 1u);
}

// ---- batches ----

TEST(Batch, AddingTrialsLeavesEarlierOnesUnchanged) {
    const auto c = small_linear();
    const Arm arm{PredictorKind::Ls, ControllerKind::Care};
    const auto res = build_resources(c, {arm});
    auto fn = [&](std::size_t i) { return run_trial(c, arm, res, {i, 0.3, 5.0, 4, {}}); };
    const auto few = run_trials(3, 1, fn);
    const auto many = run_trials(7, 1, fn);
    for (std::size_t i = 0; i < few.size(); ++i) expect_same(few[i], many[i]);
}

TEST(Batch, WorkerCountDoesNotChangeResults) {
    const auto c = small_linear();
    const Arm arm{PredictorKind::Kf, ControllerKind::Care};
    const auto res = build_resources(c, {arm});
    auto fn = [&](std::size_t i) { return run_trial(c, arm, res, {i, 0.3, 5.0, 4, {}}); };
    const auto one = run_trials(9, 1, fn);
    const auto four = run_trials(9, 4, fn);
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(four[i].trial, i);
        expect_same(one[i], four[i]);
    }
}

TEST(Batch, ExceptionsPropagate) {
    auto fn = [](std::size_t i) -> TrialRecord {
        if (i == 2) throw NumericError("boom");
        return {};
    };
    EXPECT_THROW(run_trials(5, 1, fn), NumericError);
    EXPECT_THROW(run_trials(5, 3, fn), NumericError);
}

TEST(Summary, MeanAndStandardError) {
    std::vector<TrialRecord> recs(3);
    const double energies[] = {1.0, 2.0, 6.0};
    for (int i = 0; i < 3; ++i) {
        SlotRecord s;
        s.state_energy = energies[i];
        s.chan_err_sq = 1.0;
        s.chan_pow_sq = 4.0;
        recs[i].slots = {s, s};
    }
    TrialRecord bad;
    bad.diverged = true;
    recs.push_back(bad);
    const auto row = summarize(recs, {PredictorKind::Kf, ControllerKind::Care}, 7.0);
    EXPECT_DOUBLE_EQ(row.energy_mean, 3.0);
    EXPECT_DOUBLE_EQ(row.energy_se, std::sqrt(7.0 / 3.0));  // sample var 7, n = 3
    EXPECT_DOUBLE_EQ(row.nmse_mean, 0.25);
    EXPECT_DOUBLE_EQ(row.nmse_se, 0.0);
    EXPECT_DOUBLE_EQ(row.diverged_rate, 0.25);
    EXPECT_EQ(row.trials, 4);
    EXPECT_EQ(row.predictor, "kf");
    EXPECT_EQ(row.controller, "care");
}

// ---- CSV ----

TEST(Csv, EmptyRecordSetsGiveHeaderOnly) {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    write_summary_csv(dir / "s.csv", {});
    write_per_slot_csv(dir / "p.csv", {});
    EXPECT_EQ(slurp(dir / "s.csv"), std::string(kSummaryHeader) + "\n");
    EXPECT_EQ(slurp(dir / "p.csv"), std::string(kPerSlotHeader) + "\n");
    EXPECT_TRUE(read_summary_csv(dir / "s.csv").empty());
    fs::remove_all(dir);
}

TEST(Csv, SummaryRoundTripsExactly) {
    const auto dir = scratch("rt");
    fs::create_directories(dir);
    const std::vector<SummaryRow> rows{{0.0, "kf", "care", 0.1 / 3.0, 1e-17, 38.123456789012345, 2.5, 0.0, 200},
                                       {20.0, "pilot-ls", "lqr", 1.0 / 7.0, 0.3, 1e20, 1e-300, 0.045, 200}};
    write_summary_csv(dir / "s.csv", rows);
    const auto back = read_summary_csv(dir / "s.csv");
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].snr_db, rows[i].snr_db);
        EXPECT_EQ(back[i].predictor, rows[i].predictor);
        EXPECT_EQ(back[i].controller, rows[i].controller);
        EXPECT_EQ(back[i].nmse_mean, rows[i].nmse_mean);
        EXPECT_EQ(back[i].nmse_se, rows[i].nmse_se);
        EXPECT_EQ(back[i].energy_mean, rows[i].energy_mean);
        EXPECT_EQ(back[i].energy_se, rows[i].energy_se);
        EXPECT_EQ(back[i].diverged_rate, rows[i].diverged_rate);
        EXPECT_EQ(back[i].trials, rows[i].trials);
    }
    fs::remove_all(dir);
}

TEST(Csv, BadSummaryHeaderRejected) {
    const auto dir = scratch("bad");
    fs::create_directories(dir);
    std::ofstream(dir / "s.csv") << "a,b,c\n";
    EXPECT_THROW(read_summary_csv(dir / "s.csv"), IoError);
    EXPECT_THROW(read_summary_csv(dir / "missing.csv"), IoError);
    fs::remove_all(dir);
}

TEST(Csv, GoldenSweepReproducesByteForByte) {
    const auto c = bundled("linear-ofdm.cfg", {{"trials", "3"},
                                               {"controller.m_r", "1"},
                                               {"controller.m_theta", "2"},
                                               {"sweep.snr_db", "10"},
                                               {"sweep.arms", "kf:care ls:care"},
                                               {"horizon", "20"}});
    const auto dir = scratch("golden");
    emit_results(dir, c, snr_sweep(c), "test");
    const fs::path golden = fs::path(PFC_TEST_DATA) / "golden";
    EXPECT_EQ(slurp(dir / "summary.csv"), slurp(golden / "summary.csv"));
    EXPECT_EQ(slurp(dir / "per_slot_kf_care.csv"), slurp(golden / "per_slot_kf_care.csv"));
    EXPECT_TRUE(fs::exists(dir / "per_slot_ls_care.csv"));
    EXPECT_NE(slurp(dir / "manifest.txt").find("root_seed: 1"), std::string::npos);
    fs::remove_all(dir);
}

// ---- sweep helpers ----

TEST(Sweep, NoiseVarianceFollowsSnr) {
    EXPECT_DOUBLE_EQ(sigma_n2_for_snr(2.0, 0.0), 2.0);
    EXPECT_DOUBLE_EQ(sigma_n2_for_snr(2.0, 10.0), 0.2);
    EXPECT_DOUBLE_EQ(sigma_n2_for_snr(5.0, 20.0), 0.05);
}

TEST(Sweep, ArmsShareTrialSeeds) {
    auto c = small_linear();
    c.snr_db = {5.0};
    c.arms = {{PredictorKind::Kf, ControllerKind::Care}, {PredictorKind::Ls, ControllerKind::Care}};
    const auto r = snr_sweep(c);
    ASSERT_EQ(r.arms.size(), 2u);
    ASSERT_EQ(r.summary.size(), 2u);
    // Common random numbers: identical initial states and first-slot channels.
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(r.arms[0].per_snr[0][i].slots[0].state_energy, r.arms[1].per_snr[0][i].slots[0].state_energy);
        EXPECT_EQ(r.arms[0].per_snr[0][i].slots[0].chan_pow_sq, r.arms[1].per_snr[0][i].slots[0].chan_pow_sq);
    }
    EXPECT_DOUBLE_EQ(r.sigma_n2[0], sigma_n2_for_snr(r.calibration_power, 5.0));
}

TEST(PilotOverhead, ProposedSpendsNothingBaselineGrowsLinearly) {
    auto lin = small_linear();
    lin.horizon = 100;
    const auto rows = pilot_overhead(lin);
    ASSERT_EQ(rows.size(), 100u);
    EXPECT_EQ(rows.back().proposed_power, 0.0);
    EXPECT_NEAR(rows.back().pilot_power, 400.0, 1e-9);  // N = 4 unit pilots per slot
    EXPECT_NEAR(rows.back().pilot_db, 10.0 * std::log10(400.0), 1e-9);

    const auto nl = bundled("nonlinear-mimo.cfg", {{"horizon", "100"}});
    const auto r2 = pilot_overhead(nl);
    ASSERT_EQ(r2.size(), 100u);
    EXPECT_EQ(r2.back().proposed_power, 0.0);
    EXPECT_NEAR(r2.back().pilot_db, 24.77, 0.01);  // 3 transmit antennas
    EXPECT_NEAR(r2[0].pilot_power, 3.0, 1e-12);
}

// ---- command line ----

TEST(Cli, ExitCodes) {
    const auto out = scratch("cli");
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("simulate --trials 2 --set horizon=5 --set controller.kind=pid --out " + out.string()), 1);
    EXPECT_EQ(run_cli("simulate --trials 2 --set horizon=5 --set controller=pid --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "summary.csv"));
    EXPECT_EQ(run_cli("simulate --set channel.alpha=1.5 --out " + out.string()), 1);
    EXPECT_EQ(run_cli("simulate --config " + (out / "absent.cfg").string() + " --out " + out.string()), 3);
    EXPECT_EQ(run_cli("simulate --trials 1 --set horizon=5 --set controller=pid --out /proc/pfc_no_such_dir"), 3);
    EXPECT_EQ(run_cli("solve-care --set controller.m_r=1 --set controller.m_theta=2 "
                      "--set controller.sigma_bar_scale=16 --out " + out.string()),
              2);
    EXPECT_EQ(run_cli("no-such-command"), 1);
    fs::remove_all(out);
}

TEST(Cli, SolvedTableAuditsClean) {
    const auto out = scratch("table");
    ASSERT_EQ(run_cli("solve-care --set controller.m_r=1 --set controller.m_theta=2 --out " + out.string()), 0);
    ASSERT_TRUE(fs::exists(out / "kernels.txt"));
    EXPECT_EQ(run_cli("check-stability --set controller.m_r=1 --set controller.m_theta=2 --table " +
                      (out / "kernels.txt").string() + " --out " + out.string()),
              0);
    EXPECT_TRUE(fs::exists(out / "stability.csv"));
    fs::remove_all(out);
}
