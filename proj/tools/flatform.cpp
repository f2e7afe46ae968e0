// flatform command line: analyze, construct, verify, gen.
#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "flatform/analyze.hpp"
#include "flatform/gen.hpp"
#include "flatform/report.hpp"

using namespace flatform;

namespace {

constexpr int kOk = 0, kInvalid = 2, kInternal = 3;

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Computation is sequential; the cap is validated and echoed in reports.
int thread_cap() {
    const char* env = std::getenv("FLATFORM_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw InvalidInput("FLATFORM_THREADS must be a positive integer");
    return 1;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
}

void emit(const Json& j, const std::string& path) { write_text(path, j.dump(2) + "\n"); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatform: flat coordinates for bilinear forms g + ω"};
    app.require_subcommand(1);

    std::string file, out_path, chart_path, gen_chart_path;
    auto* analyze_cmd = app.add_subcommand("analyze", "decide whether the form admits flat coordinates");
    analyze_cmd->add_option("file", file, "problem file (YAML)")->required();
    analyze_cmd->add_option("-o,--output", out_path, "write the report here instead of stdout");

    auto* construct_cmd = app.add_subcommand("construct", "build and certify a flat chart");
    construct_cmd->add_option("file", file, "problem file (YAML)")->required();
    construct_cmd->add_option("-o,--output", chart_path, "write the sampled chart export (JSON)");
    construct_cmd->add_option("--report", out_path, "write the report here instead of stdout");

    auto* verify_cmd = app.add_subcommand("verify", "certify a user-supplied chart by pullback");
    verify_cmd->add_option("file", file, "problem file (YAML)")->required();
    verify_cmd->add_option("--chart", chart_path, "chart file (YAML or exported JSON)")->required();
    verify_cmd->add_option("-o,--output", out_path, "write the report here instead of stdout");

    GenOptions g;
    auto* gen_cmd = app.add_subcommand("gen", "generate a fixture with a known flat chart");
    gen_cmd->add_option("--seed", g.seed, "random seed")->required();
    gen_cmd->add_option("--dim", g.n, "dimension")->required();
    gen_cmd->add_option("--rank-g", g.rank_g, "rank of the symmetric part")->required();
    gen_cmd->add_option("--rank-w", g.rank_w, "rank of the skew part")->required();
    gen_cmd->add_option("--deform", g.deform, "coefficient bound of the polynomial perturbation")->required();
    gen_cmd->add_option("-o,--output", out_path, "write the problem here instead of stdout");
    gen_cmd->add_option("--chart-out", gen_chart_path, "write the ground-truth chart file here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    int threads = 1;
    Problem p;
    try {
        threads = thread_cap();
        if (!gen_cmd->parsed()) p = load_problem(file);
    } catch (const std::exception& e) {
        std::cerr << "flatform: invalid input: " << e.what() << "\n";
        return kInvalid;
    }

    try {
        if (analyze_cmd->parsed()) {
            Json rep = report_header("analyze", p, threads);
            rep["analysis"] = analysis_json(analyze(p));
            emit(rep, out_path);
        } else if (construct_cmd->parsed()) {
            Json rep = report_header("construct", p, threads);
            Analysis a = analyze(p);
            rep["analysis"] = analysis_json(a);
            if (a.report.verdict != Verdict::Flat) {
                rep["construction"] = Json{{"status", "refused"},
                                           {"message", std::string("verdict is ") + to_string(a.report.verdict)}};
            } else {
                try {
                    FlatChartResult r = construct(p);
                    rep["construction"] = construction_json(r);
                    if (!chart_path.empty()) emit(chart_export_json(r, p), chart_path);
                } catch (const UnsupportedCase& e) {
                    rep["construction"] = Json{{"status", "unsupported"}, {"message", e.what()}};
                } catch (const ConstructionError& e) {
                    rep["construction"] = Json{{"status", "failed"}, {"message", e.what()}};
                }
            }
            emit(rep, out_path);
        } else if (verify_cmd->parsed()) {
            ChartFile cf;
            try {
                cf = load_chart_file(chart_path, p);
            } catch (const std::exception& e) {
                std::cerr << "flatform: invalid chart: " << e.what() << "\n";
                return kInvalid;
            }
            Json rep = report_header("verify", p, threads);
            rep["verify"] = verify_json(verify(p, cf));
            emit(rep, out_path);
        } else if (gen_cmd->parsed()) {
            Fixture fx;
            try {
                fx = generate(g);
            } catch (const std::invalid_argument& e) {
                std::cerr << "flatform: invalid input: " << e.what() << "\n";
                return kInvalid;
            }
            write_text(out_path, problem_to_yaml(fx.problem));
            if (!gen_chart_path.empty()) write_text(gen_chart_path, chart_to_yaml(fx.chart));
        }
    } catch (const InvalidInput& e) {
        std::cerr << "flatform: invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "flatform: internal failure: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}
