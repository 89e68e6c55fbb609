// One PASS/FAIL line per primary acceptance criterion.
//
//   acceptance --cli <fusepipe> --unit <unit_tests> --work <dir>
//
// The oracle suites run as filtered unit-test invocations; the end-to-end and
// determinism checks drive the command-line tool twice on the synthetic
// two-class fixture.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "fusepipe/evalreport.hpp"
#include "fusepipe/hash.hpp"
#include "fusepipe/transforms.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int results_failed = 0;

void line(const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << ")" << std::endl;
    if (!o.pass) ++results_failed;
}

double run_timed(const std::string& cmd, int& rc) {
    const auto start = std::chrono::steady_clock::now();
    rc = std::system(cmd.c_str());
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome gtest_suite(const fs::path& unit, const std::vector<std::string>& tests, double limit, const fs::path& log) {
    std::string filter;
    for (const auto& t : tests) filter += (filter.empty() ? "" : ":") + t;
    int rc = 0;
    const double secs = run_timed(quote(unit) + " --gtest_filter='" + filter + "' > " + quote(log) + " 2>&1", rc);
    // every requested test must actually have run
    const std::string out = fusepipe::read_file(log);
    std::size_t ran = 0;
    for (const auto& t : tests) ran += out.find("[       OK ] " + t) != std::string::npos;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu/%zu tests passed in %.1f s, limit %.0f s", ran, tests.size(), secs, limit);
    return {rc == 0 && ran == tests.size() && secs < limit, buf};
}

std::map<std::string, std::string> files_under(const fs::path& root, const std::string& suffix = "") {
    std::map<std::string, std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().string().ends_with(suffix))
            out[fs::relative(e.path(), root).generic_string()] = fusepipe::read_file(e.path());
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    fs::path cli, unit, work;
    app.add_option("--cli", cli, "fusepipe executable")->required();
    app.add_option("--unit", unit, "unit test executable")->required();
    app.add_option("--work", work, "scratch directory")->required();
    CLI11_PARSE(app, argc, argv);

    fs::remove_all(work);
    fs::create_directories(work);

    line("classifier oracle suite",
         gtest_suite(unit,
                     {"Knn.MatchesExhaustiveScanOnFiftyDatasets", "GaussianNB.PosteriorsMatchClosedForm",
                      "Forest.SingleTreeMatchesExhaustiveSplitOracle", "AdaBoost.StagedWeightsMatchLoopOracle"},
                     60.0, work / "classifiers.log"));
    line("numerical optimisation suite",
         gtest_suite(unit,
                     {"Gradient.FiniteDifferencesOnTenNets", "Adam.FirstStepByHand", "Gbdt.TrainingLossNeverIncreases",
                      "Svm.LinearDecisionEqualsPrimalAndDualIsFeasible", "Svm.SeparablePairHasClosedFormMargin"},
                     600.0, work / "numerics.log"));
    line("transform suite",
         gtest_suite(unit,
                     {"Pca.OrthonormalAndReconstruction", "Scaler.RandomFitSetIsStandardised",
                      "Smote.SyntheticPointsOnNeighbourSegments", "Smote.TenVersusFourBalances"},
                     600.0, work / "transforms.log"));
    line("ensemble suite",
         gtest_suite(unit,
                     {"Vote.ThreeVoterTruthTable", "Vote.TwoVoterTieGoesToBetterRank", "Fuse.DimensionsOrderAndAssociativity",
                      "Ranking.PublishedTableTopThree"},
                     600.0, work / "ensemble.log"));

    // ---- end to end ---------------------------------------------------------
    const fs::path data = work / "synthetic";
    int rc = 0;
    run_timed(quote(cli) + " make-synthetic --dir " + quote(data) + " --n 400 --d 16 --separation 4 --views 3 --seed 7 > " +
                  quote(work / "make.log") + " 2>&1",
              rc);
    const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
    int rc1 = 0, rc2 = 0;
    const double secs1 = run_timed("FUSEPIPE_THREADS=8 " + quote(cli) + " pipeline --config " + quote(data / "config.json") +
                                       " --out " + quote(work / "run1") + " > " + quote(work / "run1.log") + " 2>&1",
                                   rc1);
    Outcome e2e;
    if (rc != 0 || rc1 != 0) {
        e2e.detail = "pipeline exited with status " + std::to_string(rc1) + ", see run1.log";
    } else {
        double worst = 1.0;
        std::string worst_cell;
        bool vote_ok = true;
        std::string vote_note;
        for (auto v : fusepipe::transforms::kAllVariants) {
            const std::string vn(fusepipe::transforms::to_string(v));
            const fs::path dir = work / "run1" / "reports" / vn;
            const auto single = fusepipe::report_from_json(json::parse(fusepipe::read_file(dir / "single.json")));
            const auto vote = fusepipe::report_from_json(json::parse(fusepipe::read_file(dir / "vote.json")));
            for (const auto& [key, acc] : single.cells)
                if (acc < worst) {
                    worst = acc;
                    worst_cell = vn + "/" + key.first + "/" + key.second;
                }
            const auto triple = std::find_if(vote.rows.begin(), vote.rows.end(),
                                             [](const std::string& r) { return std::count(r.begin(), r.end(), '+') == 2; });
            if (triple == vote.rows.end()) {
                vote_ok = false;
                vote_note = "no three-member ensemble in " + vn;
                continue;
            }
            for (const auto& tag : vote.columns) {
                std::vector<double> singles;
                for (const auto& c : single.columns) singles.push_back(single.at(tag, c));
                if (vote.at(*triple, tag) < median(singles)) {
                    vote_ok = false;
                    vote_note = vn + "/" + tag + " vote below median";
                }
            }
        }
        char buf[320];
        std::snprintf(buf, sizeof buf, "wall %.0f s on %u hardware threads, limit 900 s at 4 cores; min single accuracy %.4f%s%s; %s",
                      secs1, cores, worst, worst_cell.empty() ? "" : " at ", worst_cell.c_str(),
                      vote_ok ? "top-3 vote >= median single everywhere" : vote_note.c_str());
        e2e = {secs1 < 900.0 && worst >= 0.97 && vote_ok, buf};
    }
    line("end-to-end desk-scale run", e2e);

    // ---- determinism ----------------------------------------------------------
    Outcome det;
    const double secs2 = run_timed("FUSEPIPE_THREADS=1 " + quote(cli) + " pipeline --config " + quote(data / "config.json") +
                                       " --out " + quote(work / "run2") + " > " + quote(work / "run2.log") + " 2>&1",
                                   rc2);
    if (rc1 != 0 || rc2 != 0) {
        det.detail = "a pipeline run failed";
    } else {
        const auto r1 = files_under(work / "run1" / "reports");
        const auto r2 = files_under(work / "run2" / "reports");
        const auto l1 = files_under(work / "run1" / "tune", ".ledger.csv");
        const auto l2 = files_under(work / "run2" / "tune", ".ledger.csv");
        const bool manifests = fusepipe::read_file(work / "run1" / "manifest.json") ==
                               fusepipe::read_file(work / "run2" / "manifest.json");
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu report files %s, manifest %s, %zu ledgers 8 workers vs serial %s; serial run %.0f s",
                      r1.size(), r1 == r2 ? "identical" : "differ", manifests ? "identical" : "differs", l1.size(),
                      l1 == l2 ? "identical" : "differ", secs2);
        det = {!r1.empty() && r1 == r2 && manifests && !l1.empty() && l1 == l2, buf};
    }
    line("determinism", det);

    return results_failed == 0 ? 0 : 1;
}
